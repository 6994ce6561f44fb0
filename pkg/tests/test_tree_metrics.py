import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppnav.model import ModelParams
from ppnav.navigators import (CompassNavigator, Path, RadialNavigator, SmallWorldNavigator, navigate)
from ppnav.point_process import InvalidInput, PointSet, Window, palm_add, sample_ppp
from ppnav.tree_metrics import (NavigationFailure, NavTree, ball_sizes, build_tree, depths, deviation,
                                offspring_cone_check, path_metrics, transverse_decomposition, tree_ball)


def _window(R, seed):
    return palm_add(sample_ppp(Window.ball(R), 2, seed), np.zeros((1, 2)))


def _tree(R=12.0, seed=0, nav=None):
    return build_tree(_window(R, seed), nav or RadialNavigator())


def test_singleton_tree():
    ps = PointSet(Window.ball(1.0), np.zeros((1, 2)), 0)
    t = build_tree(ps, RadialNavigator())
    assert len(t) == 1 and t.H.tolist() == [0] and len(tree_ball(t, 5)) == 0


def test_build_tree_needs_O_first():
    with pytest.raises(InvalidInput):
        build_tree(sample_ppp(Window.ball(3.0), 2, 0), RadialNavigator())


@pytest.mark.parametrize("seed", range(3))
def test_radial_tree_matches_linear_scan(seed):
    ps = _window(math.sqrt(100 / math.pi), seed)
    t = build_tree(ps, RadialNavigator())
    P = ps.points
    n2 = (P ** 2).sum(1)
    for i in range(1, len(P)):
        idx = np.flatnonzero(n2 < n2[i])
        idx = idx[idx != i]
        d = np.linalg.norm(P[idx] - P[i], axis=1)
        assert t.parent[i] == idx[np.lexsort((idx, d))[0]]
    # one parent per non-root node
    assert np.sum(t.parent != np.arange(len(P))) == len(P) - 1


def test_depths_match_parent_chains():
    t = _tree(15.0, 4, SmallWorldNavigator(beta=4.0, seed=3))
    for i in range(0, len(t), 13):
        assert t.H[i] == len(t.chain(i)) - 1 == path_metrics(t, i).H
    assert np.all(t.H[t.parent[1:]] == t.H[1:] - 1)


def test_depths_reject_cycles_and_stuck_nodes():
    with pytest.raises(NavigationFailure):
        depths(np.array([0, 2, 1]))
    with pytest.raises(NavigationFailure) as e:
        depths(np.array([0, 1, 0]))
    assert e.value.nodes == [1]


def test_parent_of_O_gives_zero_deviation():
    t = NavTree(np.array([[0.0, 0], [3.0, 4.0]]), np.array([0, 0]), np.array([0, 1]))
    m = path_metrics(t, 1)
    assert m.H == 1 and m.Delta == 0.0 and m.euclid_len == 5.0


def test_hand_path_deviation():
    p = Path(np.array([[10.0, 0], [6.0, 3.0], [2.0, 0], [0.0, 0]]), "absorbed-at-O")
    assert path_metrics(p).Delta == 3.0
    assert path_metrics(Path(np.zeros((1, 2)), "absorbed-at-O")) == path_metrics(p.__class__(np.zeros((1, 2)), "x"))
    assert path_metrics(Path(np.zeros((1, 2)), "absorbed-at-O")).G == 0.0


def test_counting_functional_equals_H():
    t = _tree(14.0, 1, CompassNavigator())
    for i in range(1, len(t), 11):
        m = path_metrics(t, i, g=lambda x, y: 1.0)
        assert m.G == m.H


@given(st.integers(0, 2 ** 20), st.floats(0, 2 * math.pi))
@settings(max_examples=20)
def test_deviation_rotation_invariant(seed, ang):
    P = np.random.default_rng(seed).normal(size=(8, 2)) * 5
    R = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    assert deviation(P @ R.T) == pytest.approx(deviation(P), rel=1e-9, abs=1e-9)


def test_tree_ball_properties():
    t = _tree(15.0, 2)
    assert len(tree_ball(t, 0)) == 0
    kmax = int(t.H.max())
    prev = set()
    for k in range(kmax + 1):
        cur = set(tree_ball(t, k).tolist())
        assert prev <= cur
        prev = cur
    assert prev == set(range(1, len(t)))
    sizes = ball_sizes(t, kmax)
    assert sizes.tolist() == [len(tree_ball(t, k)) for k in range(kmax + 1)]
    assert sizes[-1] == len(t) - 1
    with pytest.raises(InvalidInput):
        tree_ball(t, -1)


def test_cone_on_axis_never_violates():
    P = np.array([[0.0, 0], [1.0, 0], [2.0, 0], [4.0, 0]])
    t = NavTree(P, np.array([0, 0, 1, 2]), np.array([0, 1, 2, 3]))
    assert len(offspring_cone_check(t, 0.5)) == 0


def test_cone_crafted_violation():
    # X = (4,0) has offspring Y = (4,4)... at angle pi/4, and Z = (0,5) at angle pi/2
    P = np.array([[0.0, 0], [4.0, 0], [0.0, 5.0]])
    t = NavTree(P, np.array([0, 0, 1]), np.array([0, 1, 2]))
    assert 4 ** (0.8 - 1) < math.pi / 2
    assert offspring_cone_check(t, 0.8).tolist() == [1]
    with pytest.raises(InvalidInput):
        offspring_cone_check(t, 1.0)


def test_cone_violation_rate_radial():
    rates = []
    for R in (60.0, 120.0):
        t = _tree(R, 5)
        rates.append(len(offspring_cone_check(t, 0.8)) / len(t))
    assert rates[0] < 0.5 and rates[1] <= rates[0] + 0.02


def test_transverse_axis_path():
    tr = transverse_decomposition(np.array([[9.0, 0], [5.0, 0], [1.0, 0], [0.0, 0]]))
    assert np.all(tr.V == 0) and np.all(tr.q == 0)
    assert tr.residual() < 1e-12


def _sim_paths():
    out = []
    prm = ModelParams(2, 4.0)
    for i in range(20):
        out.append(navigate("small-world", prm, [300.0 * math.cos(i), 300.0 * math.sin(i)], seed=7, index=i))
    ps = _window(25.0, 6)
    for nav in ("radial", "compass"):
        for s in range(1, len(ps.points), 97):
            out.append(navigate(nav, None, s, point_set=ps))
    return out


def test_recursion_residual_and_lemma_bound():
    for p in _sim_paths():
        if p.H == 0:
            continue
        tr = transverse_decomposition(p)
        assert tr.residual() < 1e-9
        assert np.all(tr.lemma_bound_holds())


def test_transverse_needs_planar():
    with pytest.raises(InvalidInput):
        transverse_decomposition(np.zeros((3, 3)))


def test_tree_csv():
    t = _tree(5.0, 0)
    rows = t.to_csv().splitlines()
    assert rows[0] == "child,parent,h" and len(rows) == len(t) + 1
