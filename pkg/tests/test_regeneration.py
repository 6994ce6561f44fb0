import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from ppnav.model import ModelParams, farthest_radius
from ppnav.point_process import InvalidInput
from ppnav.regeneration import (InsufficientData, QueueParams, RegenTrace, RegenerationEstimator,
                                TailExponentEstimator, _rho_vec, coupled_walk, cycles, domination_check,
                                freshness_residuals, giginf_simulate, giginf_theta, lag1_permutation_test,
                                regen_analysis, stationary_workload, tail_exponent)
from ppnav.rng import stream

P5 = ModelParams(2, 5.0, 1.0)


@pytest.fixture(scope="module")
def directed_trace():
    return coupled_walk(P5, "directed", steps=20000, seed=1)


# -- coupling ----------------------------------------------------------------

def test_W0_is_zero():
    assert coupled_walk(P5, "directed", steps=5, seed=0).W[0] == 0
    assert coupled_walk(P5, "radial", [40.0, 0.0], steps=5, seed=0).W[0] == 0
    assert coupled_walk(ModelParams(2, 2.0), "scaled", [1e3, 0.0], steps=5, seed=0).W[0] == 0


def test_mode_preconditions():
    with pytest.raises(InvalidInput):
        coupled_walk(ModelParams(2, 2.0), "directed")
    with pytest.raises(InvalidInput):
        coupled_walk(P5, "scaled", [10.0, 0])
    with pytest.raises(InvalidInput):
        coupled_walk(P5, "radial")
    with pytest.raises(InvalidInput):
        coupled_walk(P5, "sideways")
    assert "no-theory" in coupled_walk(ModelParams(2, 2.5), "directed", steps=3).tags


def test_directed_recursions(directed_trace):
    tr = directed_trace
    x = tr.X @ tr.e1
    assert np.all(tr.W >= 0)
    assert np.all(tr.Y[1:] == np.maximum(x[1:], x[:-1] + tr.rho[:-1]))
    assert np.all(tr.Z == np.maximum.accumulate(tr.Y))
    assert np.array_equal(tr.regen_times, np.flatnonzero(tr.W == 0)[1:])


def test_radial_and_scaled_recursions():
    tr = coupled_walk(P5, "radial", [60.0, 0.0], steps=10 ** 4, seed=2)
    n = np.linalg.norm(tr.X, axis=1)
    assert n[-1] == 0
    assert np.all(tr.W >= 0)
    np.testing.assert_allclose(tr.W, n - tr.Z, atol=1e-12)
    np.testing.assert_allclose(tr.Y[1:], np.maximum(np.minimum(n[:-1] - tr.rho[:-1], n[1:]), 0), atol=1e-12)
    assert np.all(tr.Z == np.minimum.accumulate(tr.Y))
    sc = coupled_walk(ModelParams(2, 2.0), "scaled", [1e5, 0.0], steps=10 ** 4, seed=3)
    assert np.all(sc.W >= 0)
    assert np.linalg.norm(sc.X[-1]) <= math.e or sc.Y[-1] == 0


def test_regen_fraction(directed_trace):
    st_ = regen_analysis(directed_trace, n_perm=199)
    assert st_.regen_fraction >= 0.05


def test_mu_hat_agrees_with_long_run_mean(directed_trace):
    st_ = regen_analysis(directed_trace, n_perm=199)
    assert abs(st_.mu_hat - st_.long_run) <= 2 * st_.se


def test_overshoot_tail_slope(directed_trace):
    tr = directed_trace
    over = tr.Y - tr.X @ tr.e1
    fit = tail_exponent(over, 4.0, min_tail=100)
    assert fit.slope <= -(5 - 2) + 0.3


def test_cycles_partition_the_walk(directed_trace):
    L, Pc = cycles(directed_trace)
    th = directed_trace.regen_times
    assert L.sum() == th[-1] and np.all(L >= 1)
    x = directed_trace.coordinate
    assert Pc.sum() == pytest.approx(x[th[-1]] - x[0])


def test_degenerate_cycles():
    k = np.arange(13)
    X = np.column_stack([0.75 * k, np.zeros(13)])
    W = np.where(k % 2 == 0, 0.0, 0.4)
    tr = RegenTrace("directed", X, np.zeros(13), X[:, 0], X[:, 0] + W, W, np.array([1.0, 0.0]))
    s = regen_analysis(tr, n_perm=99)
    assert s.mu_hat == 1.5 / 2 and s.se == 0.0
    assert s.lag1_pvalue == 1.0


def test_too_few_cycles():
    tr = RegenTrace("directed", np.zeros((3, 2)), np.zeros(3), np.zeros(3), np.ones(3), np.array([0.0, 1, 1]),
                    np.array([1.0, 0.0]))
    with pytest.raises(InsufficientData):
        regen_analysis(tr)


def test_trace_csv(directed_trace):
    rows = directed_trace.to_csv().splitlines()
    assert rows[0] == "k,x0,x1,rho,y,z,w,is_regen"
    assert sum(r.endswith(",1") for r in rows[1:]) == len(directed_trace.regen_times)


def test_estimator_front_end():
    est = RegenerationEstimator(steps=3000, seed=4).fit()
    assert est.mu_prime_ > 0 and est.se_ > 0 and 0 < est.regen_fraction_ <= 1


def test_permutation_pvalues_calibrated():
    pv = [lag1_permutation_test(stream(7, "iid", i).normal(size=40), n_perm=199, seed=i)[1]
          for i in range(300)]
    assert stats.kstest(pv, "uniform").pvalue > 0.01


def test_permutation_detects_dependence():
    ar = np.zeros(300)
    e = stream(1, "ar").normal(size=300)
    for i in range(1, 300):
        ar[i] = 0.8 * ar[i - 1] + e[i]
    r, p = lag1_permutation_test(ar, 499)
    assert r > 0.5 and p < 0.01


def test_cycle_aggregates_independent(directed_trace):
    assert regen_analysis(directed_trace, n_perm=499).lag1_pvalue > 0.01


def test_domination(directed_trace):
    res = domination_check([directed_trace], P5, runs=20000, horizon=300, seed=1)
    assert res["ok"]


def test_vectorised_rho_matches_scalar_sampler():
    a = _rho_vec(stream(0, "v"), P5, 20000)
    rng = stream(0, "s")
    b = np.array([farthest_radius(rng, P5) for _ in range(20000)])
    assert stats.ks_2samp(a, b).pvalue > 0.01
    # atom at 0 equals the void probability of the whole process
    p0 = math.exp(-P5.omega * P5.radial_mass_total)
    assert abs(np.mean(a == 0) - p0) < 4 * math.sqrt(p0 * (1 - p0) / 20000)


def test_freshness_dispersion():
    r = freshness_residuals(P5, [30.0, 0.0], runs=1000, seed=0)
    assert len(r) > 900
    assert 0.9 <= r.var() <= 1.1


# -- queue -------------------------------------------------------------------

def test_zero_service_empties_at_once():
    W, th = giginf_simulate(QueueParams(service="zero"), 20)
    assert th == 1 and np.all(W[1:] == 0)
    theta, cens = giginf_theta(QueueParams(service="zero"), 50, 10)
    assert np.all(theta == 1) and not cens.any()


def test_no_departures_never_empties():
    qp = QueueParams(tau="const", tau_value=0.0, p_zero=0.5, Y=1.0)
    W, th = giginf_simulate(qp, 500, seed=2)
    assert th is None and np.all(np.diff(W) >= 0)
    _, cens = giginf_theta(qp, 200, 300, seed=2)
    assert cens.all()


@given(st.integers(0, 10 ** 6))
@settings(max_examples=20)
def test_recursion_definition(seed):
    qp = QueueParams(service="bounded", bound=3.0, Y=2.0)
    W, th = giginf_simulate(qp, 50, seed)
    rng = stream(seed, "queue", 0)
    s, t = qp.sample_sigma(rng, 50), qp.sample_tau(rng, 50)
    ref = [2.0]
    for k in range(50):
        ref.append(max(ref[-1] - t[k], s[k]))
    assert W.tolist() == ref
    z = [k for k in range(1, 51) if ref[k] == 0]
    assert th == (z[0] if z else None)


def test_vectorised_theta_matches_scalar():
    qp = QueueParams()
    a, ca = giginf_theta(qp, 4000, 500, seed=3)
    b = [giginf_simulate(qp, 500, seed=4, index=i)[1] for i in range(4000)]
    b = np.array([500 if x is None else x for x in b])
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_queue_tail_slopes():
    qp = QueueParams(alpha=3.0, p_zero=0.5, tau_p=0.5)
    theta, _ = giginf_theta(qp, 200000, 5000, seed=5)
    assert tail_exponent(theta, 5.0, t_max=100.0, min_tail=1000).slope <= -0.8
    M = stationary_workload(qp, 200000, horizon=500, seed=6)
    assert tail_exponent(M, 2.0, min_tail=1000).slope <= -1.8


def test_queue_params_rejects():
    with pytest.raises(InvalidInput):
        QueueParams(service="odd").sample_sigma(stream(0), 3)
    with pytest.raises(InvalidInput):
        QueueParams(tau="odd").sample_tau(stream(0), 3)
    with pytest.raises(InvalidInput):
        giginf_simulate(QueueParams(), 0)


# -- tail exponent -----------------------------------------------------------

def test_pareto2_slope():
    x = stream(0, "par").uniform(size=200000) ** (-1 / 2)
    fit = tail_exponent(x, 1.0)
    assert fit.slope == pytest.approx(-2.0, abs=0.1)
    lo, hi = fit.ci()
    assert lo < fit.slope < hi
    est = TailExponentEstimator(t_min=1.0).fit(x)
    assert est.predict(10.0) == pytest.approx(0.01, rel=0.2)


def test_exponential_slope_steepens():
    x = stream(0, "exp").exponential(size=10 ** 6)
    s = [tail_exponent(x, t, min_tail=100).slope for t in (1.0, 3.0, 6.0)]
    assert s[0] > s[1] > s[2]


def test_constant_samples_raise():
    with pytest.raises(InsufficientData):
        tail_exponent(np.full(5000, 3.0), 1.0)
    with pytest.raises(InsufficientData):
        tail_exponent(np.ones(10), 0.5)
    with pytest.raises(InvalidInput):
        tail_exponent(np.ones(10), 0.0)
