"""Navigation rules: small-world (lazy and dense), radial and compass, in
toward-origin and directed modes.

The lazy small-world construction never realises the environment away from
the path.  Given the path X_0..X_k, the unexplored points in the current
search region form a PPP of intensity

    lambda_k(x) = prod_{l<k} (1 - f(|x - X_l|)),

so the neighbors of X_k there are a PPP of intensity f(|x - X_k|) lambda_k(x).
Neighbors of X_l that were not chosen always fall outside later search
regions (the chosen one has minimal norm, resp. maximal e1 coordinate), so
nothing else needs to be remembered.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from .delaunay import Triangulation, triangulate
from .model import (ConditioningError, ModelParams, first_arrival, sample_around)
from .point_process import InvalidInput, PointSet
from .rng import derive_key, hash_uniform, stream

TOWARD = "toward-origin"
DIRECTED = "directed"

ABSORBED = "absorbed-at-O"
ESCAPE = "direction-escape"
STEP_LIMIT = "step-limit"
CYCLE = "cycle"

JOINT = "joint"
PER_NODE = "per-node"
CONDITIONINGS = (JOINT, PER_NODE)


class BoundaryExhausted(RuntimeError):
    """No point of the window lies in the search region."""


@dataclass
class Limits:
    max_steps: int = 10 ** 6
    max_realized: int = 10 ** 7
    max_rounds: int = 10 ** 6


def scaled_progress(X, nxt) -> float:
    """-ln(|next| / |X|); +inf when next is O."""
    x = float(np.linalg.norm(X))
    if x <= 0:
        raise InvalidInput("scaled progress needs |X| > 0")
    y = float(np.linalg.norm(nxt))
    return math.inf if y == 0 else -math.log(y / x)


@dataclass
class Path:
    points: np.ndarray
    termination: str
    mode: str = TOWARD
    e1: np.ndarray | None = None
    indices: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def H(self) -> int:
        return len(self.points) - 1

    @property
    def progress(self) -> np.ndarray:
        if self.mode == DIRECTED:
            return np.diff(self.points @ self.e1)
        return -np.diff(np.linalg.norm(self.points, axis=1))

    @property
    def scaled(self) -> np.ndarray:
        n = np.linalg.norm(self.points, axis=1)
        with np.errstate(divide="ignore"):
            return -np.log(n[1:] / n[:-1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.points.shape[1]
        w.writerow(["step", *[f"x{i}" for i in range(d)], "progress", "scaled_progress"])
        prog = np.append(self.progress, np.nan)
        sc = np.append(self.scaled, np.nan) if self.mode == TOWARD else np.full(len(self.points), np.nan)
        for k, p in enumerate(self.points):
            w.writerow([k, *[repr(float(v)) for v in p], repr(float(prog[k])), repr(float(sc[k]))])
        return buf.getvalue()

    def sidecar(self) -> str:
        return json.dumps({"termination": self.termination, "H": self.H, "mode": self.mode,
                           **self.meta}, sort_keys=True, indent=1, default=float)


# ---------------------------------------------------------------------------
# lazy small world

class NavState:
    """Lazy small-world environment along one path.

    ``registry`` holds the path points that thin the unexplored region;
    ``realized`` (when ``keep_realized``) records every sampled neighbor with
    the step that created it.
    """

    def __init__(self, params: ModelParams, start, mode=TOWARD, e1=None, seed=0,
                 index=0, max_rounds=10 ** 6, keep_realized=False, conditioning="joint"):
        self.params = params
        self.mode = mode
        if conditioning not in CONDITIONINGS:
            raise InvalidInput(f"unknown conditioning {conditioning!r}")
        self.conditioning = conditioning
        start = np.asarray(start, dtype=float)
        if start.shape != (params.d,):
            raise InvalidInput(f"start must have {params.d} coordinates")
        if mode == DIRECTED:
            if params.beta <= params.d:
                raise InvalidInput("directed small-world navigation needs beta > d")
            e1 = np.eye(params.d)[0] if e1 is None else np.asarray(e1, dtype=float)
            e1 = e1 / np.linalg.norm(e1)
        elif mode != TOWARD:
            raise InvalidInput(f"unknown mode {mode!r}")
        self.e1 = e1
        self.rng = stream(seed, "lazy-sw", index)
        self._buf = np.empty((64, params.d))
        self._buf[0] = start
        self._expo = np.ones(64)      # thinning exponent of each path point
        self.path = [self._buf[0]]
        self.max_rounds = max_rounds
        self.rounds = []            # rejection rounds used at each step
        self.keep_realized = keep_realized
        self.realized = []          # (point, step) pairs
        self._lo = 0                # registry entries before this are irrelevant
        self.r_trunc = params.tail_radius() if mode == DIRECTED else None

    @property
    def current(self) -> np.ndarray:
        return self.path[-1]

    @property
    def k(self) -> int:
        return len(self.path) - 1

    def _registry(self):
        """Path points X_0..X_{k-1} that can still thin the search region."""
        reg = self._buf[:self.k]
        rel = self.params.relevance_radius
        X = self.current
        # the key only grows along the path, so the cut point only moves forward
        if self.mode == DIRECTED:
            key = (X - reg[self._lo:]) @ self.e1
        else:
            key = np.linalg.norm(reg[self._lo:], axis=1) - np.linalg.norm(X)
        self._lo += int(np.cumprod(key >= rel).sum())
        return reg[self._lo:]

    def thinning(self, pts, reg=None) -> np.ndarray:
        """lambda_k at ``pts``."""
        pts = np.atleast_2d(pts)
        reg = self._registry() if reg is None else reg
        if len(reg) == 0:
            return np.ones(len(pts))
        dist = np.sqrt(((pts[:, None, :] - reg[None, :, :]) ** 2).sum(-1))
        expo = self._expo[self._lo:self._lo + len(reg)]
        if np.all(expo == 1):
            return np.prod(1.0 - self.params.f(dist), axis=1)
        with np.errstate(divide="ignore"):
            return np.exp(np.log1p(-self.params.f(dist)) @ expo)

    def _push(self, pt):
        if self.k + 1 >= len(self._buf):
            self._buf = np.vstack([self._buf, np.empty_like(self._buf)])
            self._expo = np.concatenate([self._expo, np.ones(len(self._expo))])
        self._buf[self.k + 1] = pt
        self.path.append(self._buf[self.k + 1].copy())

    def neighbor_sample(self):
        """Neighbor set of the current point in its search region.

        Returns ``(points, O_is_neighbor)``; whole draws are repeated until
        the set is nonempty.  For toward-origin runs with beta <= d only the
        smallest-norm neighbor is generated (that is all the rule uses).
        """
        p = self.params
        X = self.current
        x = float(np.linalg.norm(X))
        if self.mode == TOWARD and x == 0:
            raise InvalidInput("navigation already absorbed at O")
        reg = self._registry()
        per_node = self.conditioning == PER_NODE
        for r in range(self.max_rounds):
            # per-node conditioning: round r sees the points that failed the
            # r earlier coins of X, intensity lambda * (1 - f(|x - X|))^r
            if per_node and r > 0:
                weight = (lambda y, r=r: self.thinning(y, reg) * (1.0 - p.f(np.linalg.norm(y - X, axis=1))) ** r)
            else:
                weight = (lambda y: self.thinning(y, reg)) if len(reg) else None
            if self.mode == DIRECTED:
                cand = sample_around(self.rng, p, X, r_max=self.r_trunc, e1=self.e1)
                has_O = False
            elif p.beta > p.d:
                cand = sample_around(self.rng, p, X, r_max=2 * x)
                cand = cand[np.einsum("ij,ij->i", cand, cand) < x * x]
                has_O = bool(self.rng.uniform() < p.f(x))
            else:
                has_O = bool(self.rng.uniform() < p.f(x))
                if has_O:
                    cand = np.zeros((0, p.d))
                else:
                    y = first_arrival(self.rng, p, X, weight)
                    cand = np.zeros((0, p.d)) if y is None else y[None, :]
            if len(cand) and (self.mode == DIRECTED or p.beta > p.d) and weight is not None:
                keep = self.rng.uniform(size=len(cand)) < weight(cand)
                cand = cand[keep]
            if len(cand) or has_O:
                self.rounds.append(r + 1)
                if per_node:
                    self._expo[self.k] = r + 1
                if self.keep_realized:
                    self.realized.extend((c, self.k) for c in cand)
                return cand, has_O
        raise ConditioningError(
            f"neighbor set still empty after {self.max_rounds} rounds", self.max_rounds, X.tolist())

    def step(self) -> np.ndarray:
        cand, has_O = self.neighbor_sample()
        if self.mode == DIRECTED:
            nxt = cand[int(np.argmax(cand @ self.e1))]
        elif has_O:
            nxt = np.zeros(self.params.d)
        else:
            nxt = cand[int(np.argmin(np.einsum("ij,ij->i", cand, cand)))]
        self._push(nxt)
        return self.current


def small_world_step(state: NavState):
    if state.mode != TOWARD:
        raise InvalidInput("small_world_step is the toward-origin rule")
    return state.step()


def small_world_directed_step(state: NavState):
    if state.mode != DIRECTED:
        raise InvalidInput("small_world_directed_step needs a directed state")
    return state.step()


def pick_min_norm(points, cand_idx) -> int:
    """Lowest-norm candidate, ties to the lowest index."""
    cand_idx = np.asarray(cand_idx)
    n2 = np.einsum("ij,ij->i", points[cand_idx], points[cand_idx])
    return int(cand_idx[np.lexsort((cand_idx, n2))[0]])


def pick_max_dir(points, cand_idx, e1) -> int:
    cand_idx = np.asarray(cand_idx)
    s = points[cand_idx] @ e1
    return int(cand_idx[np.lexsort((cand_idx, -s))[0]])


# ---------------------------------------------------------------------------
# dense (fully realised) small world

class EdgeOracle:
    """Pair coins U(X, Y) as a hash of (key, i, j, round).

    In toward-origin mode a pair is only ever consulted by its endpoint of
    larger norm, so the round counter of that endpoint is part of the key:
    re-drawing a node's coins (conditioning on a nonempty neighbor set)
    just bumps its counter.  Identical queries give identical coins, so the
    memo is implicit.
    """

    def __init__(self, seed: int, n: int = 0):
        self.key = derive_key(seed, "edge-coins") & ((1 << 64) - 1)
        self.rounds = np.zeros(n, dtype=np.int64)

    def coin(self, i, j, rnd=None):
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        rnd = self.rounds[i] if rnd is None else np.asarray(rnd, dtype=np.int64)
        return hash_uniform(self.key, np.minimum(i, j), np.maximum(i, j), rnd)


def dense_step(ps: PointSet, params: ModelParams, i: int, oracle: EdgeOracle,
               max_rounds: int = 10 ** 6) -> int:
    """Exact small-world step from point ``i`` over every lower-norm point."""
    P = ps.points
    norms = np.linalg.norm(P, axis=1)
    if norms[i] == 0:
        return i
    cand = np.flatnonzero(norms < norms[i])
    fd = params.f(np.linalg.norm(P[cand] - P[i], axis=1))
    for _ in range(max_rounds):
        u = oracle.coin(i, cand)
        hit = cand[u < fd]
        if len(hit):
            return pick_min_norm(P, hit)
        oracle.rounds[i] += 1
    raise ConditioningError(f"node {i}: no neighbor after {max_rounds} rounds", max_rounds, i)


def dense_parents(ps: PointSet, params: ModelParams, seed: int, r_near: float | None = None,
                  max_rounds: int = 10 ** 6) -> tuple[np.ndarray, np.ndarray]:
    """Toward-origin small-world parent of every point of a planar set.

    Pairs closer than ``r_near`` get hashed coins (EdgeOracle).  Farther
    candidates are handled per node by square rings of grid cells of side
    ``r_near``: ring h (Chebyshev cell distance) lies at distance
    >= (h - 1) r_near, so each ring member is pre-selected with probability
    p_h = f(max(r_near, (h-1) r_near)) by one Binomial draw per (node, ring)
    and then accepted with f(d) / p_h.  Every pair is thus an independent
    Bernoulli(f(d)) restricted to the search region.  Nodes without a
    neighbor are redrawn (next round) until all have one.

    Returns ``(parent, rounds)``; point 0 must be O.
    """
    P = ps.points
    n = len(P)
    if n == 0 or np.any(P[0] != 0):
        raise InvalidInput("dense small-world tree needs O as point 0")
    if ps.dim != 2:
        raise InvalidInput("dense small-world trees are planar")
    if r_near is None:
        r_near = max(4.0, 2.0 * params.t_sat)
    norms = np.linalg.norm(P, axis=1)
    oracle = EdgeOracle(seed, n)
    parent = np.full(n, -1, dtype=np.int64)
    parent[0] = 0
    # near pairs, oriented (hi, lo) with |P_lo| < |P_hi|
    pairs = cKDTree(P).query_pairs(r_near, output_type="ndarray")
    if len(pairs):
        a, b = pairs[:, 0], pairs[:, 1]
        swap = norms[a] < norms[b]
        hi = np.where(swap, b, a)
        lo = np.where(swap, a, b)
        ok = norms[lo] < norms[hi]
        hi, lo = hi[ok], lo[ok]
        dist = np.linalg.norm(P[hi] - P[lo], axis=1)
        ok = dist < r_near
        hi, lo, dist = hi[ok], lo[ok], dist[ok]
        order = np.argsort(hi, kind="stable")
        hi, lo, fd = hi[order], lo[order], params.f(dist[order])
    else:
        hi = lo = np.zeros(0, dtype=np.int64)
        fd = np.zeros(0)
    starts = np.searchsorted(hi, np.arange(n + 1))

    idx = ps.spatial_index(cell=r_near)
    cells = idx._cell_of(P)
    todo = np.arange(1, n)
    rng = stream(seed, "far-rings")
    for rnd in range(max_rounds):
        if len(todo) == 0:
            break
        # near zone
        sel = np.concatenate([np.arange(starts[i], starts[i + 1]) for i in todo]) if len(todo) < n - 1 \
            else np.arange(len(hi))
        best = np.full(n, -1, dtype=np.int64)
        if len(sel):
            h_, l_, f_ = hi[sel], lo[sel], fd[sel]
            acc = oracle.coin(h_, l_, oracle.rounds[h_]) < f_
            _merge_best(best, h_[acc], l_[acc], norms)
        # far zone
        fh, fl = _far_hits(rng, P, norms, params, idx, cells, todo, r_near)
        _merge_best(best, fh, fl, norms)
        got = todo[best[todo] >= 0]
        parent[got] = best[got]
        todo = todo[best[todo] < 0]
        oracle.rounds[todo] += 1
    else:
        raise ConditioningError(f"{len(todo)} nodes without neighbor after {max_rounds} rounds",
                                max_rounds, todo[:10].tolist())
    return parent, oracle.rounds


def _merge_best(best, h, l, norms):
    """best[h] = argmin-norm (then index) of l over all hits."""
    if len(h) == 0:
        return
    cur = best[h]
    hh = np.concatenate([h, h[cur >= 0]])
    ll = np.concatenate([l, cur[cur >= 0]])
    order = np.lexsort((ll, norms[ll], hh))
    hh, ll = hh[order], ll[order]
    first = np.ones(len(hh), dtype=bool)
    first[1:] = hh[1:] != hh[:-1]
    best[hh[first]] = ll[first]


def _far_hits(rng, P, norms, params, idx, cells, nodes, L):
    """Far-zone neighbor hits (distance >= L) for ``nodes``."""
    out_h, out_l = [], []
    if len(nodes) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    c = cells[nodes]
    max_h = int(idx.shape.max())
    prev = np.zeros(len(nodes), dtype=np.int64)
    for h in range(1, max_h + 1):
        cnt_box = idx.box_count(c - h, c + h)
        cnt = cnt_box - prev
        prev = cnt_box
        p_h = float(params.f(max(L, (h - 1) * L)))
        if p_h <= 0:
            break
        k = rng.binomial(cnt, p_h)
        for t in np.flatnonzero(k):
            i = int(nodes[t])
            ring = idx._ring(cells[i], h) if h > 1 else idx._box(cells[i] - 1, cells[i] + 1)
            pick = rng.choice(ring, size=int(k[t]), replace=False)
            dd = np.linalg.norm(P[pick] - P[i], axis=1)
            ok = (dd >= L) & (norms[pick] < norms[i])
            ok &= rng.uniform(size=len(pick)) < params.f(dd) / p_h
            out_h.extend([i] * int(ok.sum()))
            out_l.extend(pick[ok].tolist())
    return np.array(out_h, dtype=np.int64), np.array(out_l, dtype=np.int64)


# ---------------------------------------------------------------------------
# radial and compass

def radial_step(ps: PointSet, X, mode=TOWARD, e1=None) -> int:
    """Nearest point of the search region to X (B(O,|X|) or the half-space
    ahead of X); ties to the lowest index."""
    P = ps.points
    self_idx = int(X) if np.ndim(X) == 0 else None
    X = P[X] if np.ndim(X) == 0 else np.asarray(X, dtype=float)
    if mode == TOWARD and not np.any(X):
        return int(np.flatnonzero(~np.any(P, axis=1))[0])
    if mode == DIRECTED:
        e1 = np.eye(ps.dim)[0] if e1 is None else np.asarray(e1, dtype=float)
        acc = lambda c: (P[c] - X) @ e1 > 0
    else:
        # same rounding as the candidates, so X never sits inside its own ball
        x2 = float(np.einsum("ij,ij->i", X[None], X[None])[0])
        acc = lambda c: np.einsum("ij,ij->i", P[c], P[c]) < x2
    j = ps.spatial_index().nearest(X, accept=acc, exclude=self_idx)
    if j is None:
        raise BoundaryExhausted("no point of the window in the search region")
    return j


def _compass_score(P, i, nb, mode, e1, directed_sign):
    X = P[i]
    v = X - P[nb]
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    if mode == DIRECTED:
        s = v @ e1
        return -s if directed_sign == "aligned" else s
    return v @ (X / np.linalg.norm(X))


def compass_step(tri: Triangulation, i: int, mode=TOWARD, e1=None, directed_sign="aligned") -> int:
    """Delaunay neighbor maximising <X/|X|, (X-Y)/|X-Y|> (toward O) or the
    directed analogue; ``directed_sign='literal'`` keeps the sign as printed
    (<e1, (X-Y)/|X-Y|>), ``'aligned'`` uses <e1, (Y-X)/|Y-X|>."""
    P = tri.points
    if mode == TOWARD and not np.any(P[i]):
        raise InvalidInput("compass step from O")
    nb = tri.neighbors(i)
    if len(nb) == 0:
        raise BoundaryExhausted(f"point {i} has no Delaunay neighbor")
    if mode == DIRECTED:
        e1 = np.eye(2)[0] if e1 is None else np.asarray(e1, dtype=float)
    s = _compass_score(P, i, nb, mode, e1, directed_sign)
    return int(nb[np.lexsort((nb, -s))[0]])


# ---------------------------------------------------------------------------
# full paths

def navigate(kind: str, params: ModelParams | None, start, mode=TOWARD, limits: Limits | None = None,
             seed: int = 0, index: int = 0, point_set: PointSet | None = None,
             tri: Triangulation | None = None, e1=None, directed_sign="aligned",
             conditioning: str = JOINT) -> Path:
    """Iterate one navigation rule from ``start``.

    kinds: ``small-world`` (lazy environment), ``small-world-dense`` (on
    ``point_set``, start given as a point index), ``radial`` and ``compass``
    (on ``point_set``; compass triangulates it if ``tri`` is not given).
    """
    limits = limits or Limits()
    if kind == "small-world":
        if params is None:
            raise InvalidInput("small-world navigation needs model parameters")
        st = NavState(params, start, mode, e1, seed, index, limits.max_rounds, conditioning=conditioning)
        if mode == TOWARD and not np.any(st.current):
            return Path(np.array([st.current]), ABSORBED, mode)
        term = STEP_LIMIT
        for _ in range(limits.max_steps):
            nxt = st.step()
            if mode == TOWARD and not np.any(nxt):
                term = ABSORBED
                break
        meta = {"rounds_max": max(st.rounds, default=0)}
        if mode == DIRECTED:
            meta["truncation_radius"] = st.r_trunc
        return Path(np.array(st.path), term, mode, st.e1, meta=meta)

    if point_set is None:
        raise InvalidInput(f"{kind} navigation needs a point set")
    P = point_set.points
    if mode == DIRECTED:
        e1 = np.eye(point_set.dim)[0] if e1 is None else np.asarray(e1, dtype=float) / np.linalg.norm(e1)
    i = int(start)
    idxs = [i]
    term = STEP_LIMIT
    oracle = EdgeOracle(seed, len(P)) if kind == "small-world-dense" else None
    if kind == "compass" and tri is None:
        tri = triangulate(point_set)
    seen = {i}
    for _ in range(limits.max_steps):
        if mode == TOWARD and not np.any(P[i]):
            term = ABSORBED
            break
        try:
            if kind == "radial":
                j = radial_step(point_set, i, mode, e1)
            elif kind == "compass":
                j = compass_step(tri, i, mode, e1, directed_sign)
            elif kind == "small-world-dense":
                if mode != TOWARD:
                    raise InvalidInput("dense small-world runs are toward-origin")
                j = dense_step(point_set, params, i, oracle, limits.max_rounds)
            else:
                raise InvalidInput(f"unknown navigator {kind!r}")
        except BoundaryExhausted:
            if mode == DIRECTED:
                term = ESCAPE
                break
            raise
        idxs.append(j)
        if j in seen:
            term = CYCLE
            break
        seen.add(j)
        i = j
    else:
        if mode == TOWARD and not np.any(P[i]):
            term = ABSORBED
    idxs = np.array(idxs, dtype=np.int64)
    return Path(P[idxs], term, mode, e1, indices=idxs)


# ---------------------------------------------------------------------------
# estimator front ends: fit(point_set) computes the navigation map A on the
# whole set (parent_), predict(indices) looks it up

class _NavigatorBase(BaseEstimator):
    def predict(self, X):
        return self.parent_[np.asarray(X, dtype=np.int64)]

    def fit_predict(self, point_set):
        return self.fit(point_set).parent_


class RadialNavigator(_NavigatorBase):
    def __init__(self, mode=TOWARD, e1=None):
        self.mode = mode
        self.e1 = e1

    def fit(self, point_set: PointSet, y=None):
        self.parent_ = radial_parents(point_set, self.mode, self.e1)
        return self

    def navigate(self, point_set, start, limits=None):
        return navigate("radial", None, start, self.mode, limits, point_set=point_set, e1=self.e1)


class CompassNavigator(_NavigatorBase):
    def __init__(self, mode=TOWARD, e1=None, directed_sign="aligned"):
        self.mode = mode
        self.e1 = e1
        self.directed_sign = directed_sign

    def fit(self, point_set: PointSet, y=None):
        self.tri_ = triangulate(point_set)
        P = point_set.points
        e1 = None if self.mode != DIRECTED else (np.eye(2)[0] if self.e1 is None else np.asarray(self.e1))
        par = np.arange(len(P))
        for i in range(len(P)):
            if (self.mode == TOWARD and not np.any(P[i])) or len(self.tri_.neighbors(i)) == 0:
                continue
            par[i] = compass_step(self.tri_, i, self.mode, e1, self.directed_sign)
        self.parent_ = par
        return self

    def navigate(self, point_set, start, limits=None):
        tri = getattr(self, "tri_", None)
        return navigate("compass", None, start, self.mode, limits, point_set=point_set, tri=tri,
                        e1=self.e1, directed_sign=self.directed_sign)


class SmallWorldNavigator(_NavigatorBase):
    """Toward-origin small-world map on a realised planar set (O = point 0)."""

    def __init__(self, d=2, beta=5.0, c=1.0, seed=0, r_near=None, max_rounds=10 ** 6):
        self.d = d
        self.beta = beta
        self.c = c
        self.seed = seed
        self.r_near = r_near
        self.max_rounds = max_rounds

    @property
    def params_(self):
        return ModelParams(self.d, self.beta, self.c)

    def fit(self, point_set: PointSet, y=None):
        self.parent_, self.rounds_ = dense_parents(point_set, self.params_, self.seed,
                                                   self.r_near, self.max_rounds)
        return self

    def navigate(self, start, limits=None, index=0, mode=TOWARD, e1=None, conditioning=PER_NODE):
        """Lazy path from coordinates ``start`` (no realised set needed); the
        default conditioning is the one of ``fit``."""
        return navigate("small-world", self.params_, start, mode, limits, self.seed, index, e1=e1,
                        conditioning=conditioning)


def radial_parents(ps: PointSet, mode=TOWARD, e1=None) -> np.ndarray:
    """Radial map on every point; points with an empty search region map to
    themselves (toward-origin: only O; directed: the front of the window)."""
    P = ps.points
    n = len(P)
    par = np.arange(n)
    if n < 2:
        return par
    if mode == DIRECTED:
        e1 = np.eye(ps.dim)[0] if e1 is None else np.asarray(e1, dtype=float)
        key = P @ e1
    else:
        key = -np.einsum("ij,ij->i", P, P)
    k = min(16, n)
    dist, nb = cKDTree(P).query(P, k=k)
    dist, nb = np.atleast_2d(dist), np.atleast_2d(nb)
    ok = key[nb] > key[:, None]
    # ties in distance to the lowest index: re-sort within equal distances
    order = np.lexsort((nb, dist), axis=1)
    nb = np.take_along_axis(nb, order, 1)
    ok = np.take_along_axis(ok, order, 1)
    dist = np.take_along_axis(dist, order, 1)
    first = np.argmax(ok, axis=1)
    found = ok[np.arange(n), first]
    par[found] = nb[found, first[found]]
    for i in np.flatnonzero(~found):
        if mode == TOWARD and not np.any(P[i]):
            continue
        try:
            par[i] = radial_step(ps, i, mode, e1)
        except BoundaryExhausted:
            pass
    return par
