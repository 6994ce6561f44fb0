"""Navigation trees over a realised sample and their path / tree metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .navigators import Path
from .point_process import InvalidInput, PointSet


class NavigationFailure(RuntimeError):
    def __init__(self, msg, nodes=()):
        super().__init__(msg)
        self.nodes = list(nodes)


@dataclass(frozen=True)
class NavTree:
    points: np.ndarray
    parent: np.ndarray      # parent[root] == root
    H: np.ndarray
    root: int = 0

    def __len__(self):
        return len(self.parent)

    def chain(self, i: int) -> np.ndarray:
        """Path i -> ... -> root as point indices."""
        out = [int(i)]
        while out[-1] != self.root:
            out.append(int(self.parent[out[-1]]))
        return np.array(out, dtype=np.int64)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["child", "parent", "h"])
        for i, (p, h) in enumerate(zip(self.parent.tolist(), self.H.tolist())):
            w.writerow([i, p, h])
        return buf.getvalue()


def depths(parent: np.ndarray, root: int = 0) -> np.ndarray:
    """Hop count to the root by pointer doubling; raises on nodes that never
    reach the root (cycles or stuck nodes)."""
    parent = np.asarray(parent, dtype=np.int64)
    n = len(parent)
    stuck = np.flatnonzero((parent == np.arange(n)) & (np.arange(n) != root))
    if len(stuck):
        raise NavigationFailure(f"{len(stuck)} nodes have no successor, e.g. {stuck[:5].tolist()}", stuck)
    if n and parent[root] != root:
        raise InvalidInput("root must map to itself")
    dist = (np.arange(n) != root).astype(np.int64)
    jump = parent.copy()
    for _ in range(max(1, int(math.ceil(math.log2(max(n, 2)))) + 1)):
        dist = dist + dist[jump]
        jump = jump[jump]
    bad = np.flatnonzero(jump != root)
    if len(bad):
        raise NavigationFailure(f"{len(bad)} nodes never reach O, e.g. {bad[:5].tolist()}", bad)
    return dist


def build_tree(ps: PointSet, navigator) -> NavTree:
    """Tree of the toward-origin map A over ``ps`` (O must be point 0).

    ``navigator`` is a fitted-or-unfitted estimator with ``fit(ps).parent_``
    or a ready parent array."""
    P = ps.points
    if len(P) == 0 or np.any(P[0] != 0):
        raise InvalidInput("the point set must contain O as point 0")
    if getattr(navigator, "mode", "toward-origin") != "toward-origin":
        raise InvalidInput("navigation trees need a toward-origin navigator")
    parent = np.asarray(navigator if isinstance(navigator, np.ndarray) else navigator.fit(ps).parent_)
    return NavTree(P, parent, depths(parent))


@dataclass(frozen=True)
class PathMetrics:
    H: int
    Delta: float
    G: float
    euclid_len: float


def _path_points(tree_or_path, X):
    if isinstance(tree_or_path, Path):
        return tree_or_path.points
    return tree_or_path.points[tree_or_path.chain(X)]


def deviation(pts) -> float:
    """max_k |X_k - Xbar_k|, Xbar_k the projection of X_k on the line OX_0."""
    pts = np.asarray(pts, dtype=float)
    x = np.linalg.norm(pts[0])
    if len(pts) <= 1 or x == 0:
        return 0.0
    u = pts[0] / x
    perp = pts - np.outer(pts @ u, u)
    return float(np.max(np.linalg.norm(perp, axis=1)))


def path_metrics(tree_or_path, X=None, g=None) -> PathMetrics:
    """H, Delta, G = sum g(X_i, X_{i+1}) and the Euclidean path length."""
    pts = _path_points(tree_or_path, X)
    H = len(pts) - 1
    if H == 0:
        return PathMetrics(0, 0.0, 0.0, 0.0)
    G = float(sum(g(pts[i], pts[i + 1]) for i in range(H))) if g is not None else float("nan")
    return PathMetrics(H, deviation(pts), G, float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()))


def tree_ball(tree: NavTree, k: int) -> np.ndarray:
    """T_O(k): points other than O within k hops of O."""
    if k < 0:
        raise InvalidInput("k must be >= 0")
    idx = np.flatnonzero(tree.H <= k)
    return idx[idx != tree.root]


def ball_sizes(tree: NavTree, kmax: int) -> np.ndarray:
    """|T_O(k)| for k = 0..kmax."""
    h = np.delete(tree.H, tree.root)
    return np.cumsum(np.bincount(h, minlength=kmax + 1)[: kmax + 1])


def offspring_cone_check(tree: NavTree, gamma: float) -> np.ndarray:
    """Nodes X with some offspring Y at angle(X, Y) > |X|^(gamma - 1)."""
    if not 0 < gamma < 1:
        raise InvalidInput("gamma must lie in (0, 1)")
    P = tree.points
    n = len(P)
    norms = np.linalg.norm(P, axis=1)
    with np.errstate(divide="ignore"):
        cone = np.where(norms > 0, norms ** (gamma - 1.0), np.inf)
    viol = np.zeros(n, dtype=bool)
    desc = np.flatnonzero(tree.H >= 2)
    anc = tree.parent[desc]
    # walk every node's ancestor chain one level at a time
    while len(desc):
        keep = anc != tree.root
        desc, anc = desc[keep], anc[keep]
        if not len(desc):
            break
        cosang = np.einsum("ij,ij->i", P[desc], P[anc]) / (norms[desc] * norms[anc])
        ang = np.arccos(np.clip(cosang, -1.0, 1.0))
        viol[anc[ang > cone[anc]]] = True
        anc = tree.parent[anc]
    return np.flatnonzero(viol)


@dataclass(frozen=True)
class TransverseTrace:
    U: np.ndarray
    V: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    q: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    M: np.ndarray

    def residual(self) -> float:
        """Largest relative error of the one-step recursion for (U, V)."""
        c, s = np.cos(self.theta[:-1]), np.sin(self.theta[:-1])
        V1 = self.V[:-1] + self.q * c - self.p * s
        U1 = self.U[:-1] - self.p * c - self.q * s
        scale = np.maximum(np.hypot(self.U[1:], self.V[1:]), np.hypot(self.U[:-1], self.V[:-1]))
        scale = np.where(scale > 0, scale, 1.0)
        err = np.maximum(np.abs(V1 - self.V[1:]), np.abs(U1 - self.U[1:])) / scale
        return float(err.max()) if len(err) else 0.0

    def lemma_bound_holds(self) -> np.ndarray:
        """V_k <= S_k + M_k at every k."""
        return self.V <= self.S + self.M


def transverse_decomposition(path, e1=None, e2=None) -> TransverseTrace:
    """Longitudinal / transverse coordinates of a planar path toward O."""
    pts = path.points if isinstance(path, Path) else np.asarray(path, dtype=float)
    if pts.shape[1] != 2:
        raise InvalidInput("transverse decomposition is planar")
    own_axis = e1 is None
    if own_axis:
        e1 = pts[0] / np.linalg.norm(pts[0])
    e1 = np.asarray(e1, dtype=float)
    if e2 is None:
        e2 = np.array([-e1[1], e1[0]])
    U = pts @ e1
    V = pts @ np.asarray(e2, dtype=float)
    if own_axis:
        # exact by definition; the dot products leave ~1e-16 |X| behind
        U[0], V[0] = np.linalg.norm(pts[0]), 0.0
    theta = np.arctan2(V, U)
    step_v = np.diff(np.column_stack([U, V]), axis=0)
    c, s = np.cos(theta[:-1]), np.sin(theta[:-1])
    p = -(step_v[:, 0] * c + step_v[:, 1] * s)
    q = -step_v[:, 0] * s + step_v[:, 1] * c
    Q = q * c
    steps = np.linalg.norm(step_v, axis=1)
    S = np.concatenate([[0.0], np.maximum.accumulate(steps)]) if len(steps) else np.zeros(1)
    M = np.zeros(len(pts))
    for k in range(1, len(pts)):
        M[k] = max(0.0, M[k - 1] + Q[k - 1])
    return TransverseTrace(U, V, theta, p, q, Q, S, M)
