"""Regenerative coupling of small-world walks and the GI/GI/inf workload
recursion that dominates it.

Every step k draws an auxiliary PPP V~(X_k) of intensity f(|x - X_k|),
independent of the environment.  Only one number of it is needed:

* directed / radial: rho_k, the distance from X_k to its farthest point
  (exact inversion of P(rho <= t) = exp(-mass beyond t));
* scaled: the smallest norm of V~(X_k) inside B(O, |X_k|) (first arrival in
  norm order).

The index convention is the one of the directed case throughout:
Y_k uses rho_{k-1}, the auxiliary process of the previous point.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .model import ModelParams, farthest_radius, first_arrival
from .navigators import DIRECTED, TOWARD, NavState
from .point_process import InvalidInput, geometry_constants, uniform_in_ball
from .rng import stream

MODES = ("directed", "radial", "scaled")


class InsufficientData(ValueError):
    pass


@dataclass
class RegenTrace:
    mode: str
    X: np.ndarray
    rho: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    W: np.ndarray
    e1: np.ndarray | None = None
    tags: list = field(default_factory=list)

    @property
    def regen_times(self) -> np.ndarray:
        """k >= 1 with W_k == 0 (exact zeros)."""
        return np.flatnonzero(self.W == 0)[1:] if self.W[0] == 0 else np.flatnonzero(self.W == 0)

    @property
    def coordinate(self) -> np.ndarray:
        """The quantity whose increments are the progress of the walk."""
        if self.mode == "directed":
            return self.X @ self.e1
        n = np.linalg.norm(self.X, axis=1)
        if self.mode == "radial":
            return -n
        with np.errstate(divide="ignore"):
            return -np.log(n)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "x0", "x1", "rho", "y", "z", "w", "is_regen"])
        reg = np.zeros(len(self.W), dtype=int)
        reg[self.regen_times] = 1
        for k in range(len(self.W)):
            w.writerow([k, repr(float(self.X[k, 0])), repr(float(self.X[k, 1])),
                        repr(float(self.rho[k])), repr(float(self.Y[k])), repr(float(self.Z[k])),
                        repr(float(self.W[k])), int(reg[k])])
        return buf.getvalue()


def _aux_rho(rng, params):
    return farthest_radius(rng, params)


def coupled_walk(params: ModelParams, mode: str, start=None, steps: int = 1000, seed: int = 0,
                 index: int = 0, e1=None, max_rounds: int = 10 ** 6,
                 conditioning: str = "joint") -> RegenTrace:
    """Run the small-world walk with the Y/Z/W coupling attached.

    directed: Y_k = max(<X_k,e1>, <X_{k-1},e1> + rho_{k-1}), Z_k = max_{l<=k} Y_l,
              W_k = Z_k - <X_k,e1>.
    radial:   Z_0 = |X|, Y_k = (min(|X_{k-1}| - rho_{k-1}, |X_k|))^+, Z running min,
              W_k = |X_k| - Z_k; stops at O.
    scaled:   as radial with rho_k = |X_k| - (smallest norm of V~(X_k) in
              B(O, |X_k|)), W_k = ln(|X_k| / Z_k); stops once |X_k| <= e or Y_k = 0.
    """
    if mode not in MODES:
        raise InvalidInput(f"unknown coupling mode {mode!r}")
    d = params.d
    tags = []
    if mode in ("directed", "radial") and params.beta <= d:
        raise InvalidInput(f"{mode} coupling needs beta > d")
    if mode == "scaled" and params.beta != d:
        raise InvalidInput("scaled coupling is the beta = d construction")
    if params.regime == "no-theory":
        tags.append("no-theory")
    aux = stream(seed, "aux-ppp", index)
    if mode == "directed":
        start = np.zeros(d) if start is None else np.asarray(start, dtype=float)
        st = NavState(params, start, DIRECTED, e1, seed, index, max_rounds, conditioning=conditioning)
        e1v = st.e1
        x = [start @ e1v]
        rho = [_aux_rho(aux, params)]
        Y = [x[0]]
        Z = [x[0]]
        for k in range(1, steps + 1):
            nxt = st.step()
            xk = float(nxt @ e1v)
            yk = max(xk, x[-1] + rho[-1])
            Y.append(yk)
            Z.append(yk if k == 1 else max(Z[-1], yk))
            x.append(xk)
            rho.append(_aux_rho(aux, params))
        x = np.array(x)
        Z = np.array(Z)
        return RegenTrace(mode, np.array(st.path), np.array(rho), np.array(Y), Z, Z - x, e1v, tags)

    if start is None:
        raise InvalidInput(f"{mode} coupling needs a start point")
    start = np.asarray(start, dtype=float)
    st = NavState(params, start, TOWARD, None, seed, index, max_rounds, conditioning=conditioning)
    n0 = float(np.linalg.norm(start))
    norms = [n0]
    rho, Y, Z = [], [n0], [n0]

    def aux_rho(X, xn):
        if mode == "radial":
            return _aux_rho(aux, params)
        y = first_arrival(aux, params, X)
        return xn - (xn if y is None else float(np.linalg.norm(y)))

    rho.append(aux_rho(start, n0))
    for k in range(1, steps + 1):
        if norms[-1] == 0 or (mode == "scaled" and (norms[-1] <= math.e or Y[-1] == 0) and k > 1):
            break
        nxt = st.step()
        xn = float(np.linalg.norm(nxt))
        yk = max(min(norms[-1] - rho[-1], xn), 0.0)
        Y.append(yk)
        Z.append(min(Z[-1], yk))
        norms.append(xn)
        rho.append(aux_rho(nxt, xn) if xn > 0 else 0.0)
    norms = np.array(norms)
    Z = np.array(Z)
    if mode == "radial":
        W = norms - Z
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            W = np.where(norms == Z, 0.0, np.log(norms / Z))
    # after absorption W stays 0 by convention
    W[norms == 0] = 0.0
    return RegenTrace(mode, np.array(st.path), np.array(rho), np.array(Y), Z, W, None, tags)


@dataclass(frozen=True)
class CycleStats:
    lengths: np.ndarray
    progress: np.ndarray
    mu_hat: float
    se: float
    long_run: float
    regen_fraction: float
    lag1_corr: float
    lag1_pvalue: float

    def as_dict(self):
        return {"n_cycles": int(len(self.lengths)), "mu_hat": self.mu_hat, "se": self.se,
                "long_run": self.long_run, "regen_fraction": self.regen_fraction,
                "lag1_corr": self.lag1_corr, "lag1_pvalue": self.lag1_pvalue,
                "mean_cycle_length": float(self.lengths.mean()),
                "mean_cycle_progress": float(self.progress.mean())}


def lag1_permutation_test(x, n_perm: int = 999, seed: int = 0) -> tuple[float, float]:
    """Lag-1 autocorrelation and its two-sided permutation p-value."""
    x = np.asarray(x, dtype=float)
    if len(x) < 3 or np.all(x == x[0]):
        return 0.0, 1.0

    def r1(v):
        v = v - v.mean()
        den = float(v @ v)
        return float(v[1:] @ v[:-1]) / den if den > 0 else 0.0

    obs = r1(x)
    rng = stream(seed, "perm")
    cnt = sum(abs(r1(rng.permutation(x))) >= abs(obs) for _ in range(n_perm))
    return obs, (cnt + 1) / (n_perm + 1)


def cycles(trace: RegenTrace):
    th = np.concatenate([[0], trace.regen_times])
    coord = trace.coordinate
    return np.diff(th), np.diff(coord[th])


def regen_analysis(trace: RegenTrace, n_perm: int = 999, seed: int = 0) -> CycleStats:
    """mu' estimate as (mean cycle progress) / (mean cycle length) with a
    ratio-estimator standard error, plus an independence diagnostic."""
    th = trace.regen_times
    if len(th) < 2:
        raise InsufficientData(f"need >= 2 regenerative times, got {len(th)}")
    L, Pc = cycles(trace)
    n = len(L)
    mu = float(Pc.sum() / L.sum())
    resid = Pc - mu * L
    se = float(math.sqrt((resid @ resid) * n / max(n - 1, 1)) / L.sum())
    coord = trace.coordinate
    steps = len(coord) - 1
    long_run = float((coord[-1] - coord[0]) / steps)
    frac = len(th) / steps
    r, pv = lag1_permutation_test(Pc, n_perm, seed)
    return CycleStats(L, Pc, mu, se, long_run, frac, r, pv)


class RegenerationEstimator(BaseEstimator):
    """Regenerative estimate of the mean progress per step (directed by default)."""

    def __init__(self, d=2, beta=5.0, c=1.0, mode="directed", steps=10000, seed=0, start=None,
                 conditioning="joint"):
        self.conditioning = conditioning
        self.d = d
        self.beta = beta
        self.c = c
        self.mode = mode
        self.steps = steps
        self.seed = seed
        self.start = start

    def fit(self, X=None, y=None):
        params = ModelParams(self.d, self.beta, self.c)
        self.trace_ = coupled_walk(params, self.mode, self.start, self.steps, self.seed,
                                   conditioning=self.conditioning)
        st = regen_analysis(self.trace_, seed=self.seed)
        self.stats_ = st
        self.mu_prime_ = st.mu_hat
        self.se_ = st.se
        self.regen_fraction_ = st.regen_fraction
        return self


# ---------------------------------------------------------------------------
# GI/GI/inf

@dataclass(frozen=True)
class QueueParams:
    """service: 'pareto' (P(s > t) = (1 - p_zero) t^-alpha on t >= 1, atom p_zero at 0)
    or 'bounded' (uniform on [0, bound] with atom p_zero at 0); interarrival
    Bernoulli(tau_p) (values 0/1) or 'const' (always tau_value)."""

    service: str = "pareto"
    alpha: float = 3.0
    p_zero: float = 0.5
    bound: float = 1.0
    tau: str = "bernoulli"
    tau_p: float = 0.5
    tau_value: float = 1.0
    Y: float = 0.0

    def sample_sigma(self, rng, n):
        z = rng.uniform(size=n) < self.p_zero
        if self.service == "pareto":
            s = rng.uniform(size=n) ** (-1.0 / self.alpha)
        elif self.service == "bounded":
            s = rng.uniform(0.0, self.bound, size=n)
        elif self.service == "zero":
            return np.zeros(n)
        else:
            raise InvalidInput(f"unknown service law {self.service!r}")
        return np.where(z, 0.0, s)

    def sample_tau(self, rng, n):
        if self.tau == "bernoulli":
            return (rng.uniform(size=n) < self.tau_p).astype(float)
        if self.tau == "const":
            return np.full(n, float(self.tau_value))
        raise InvalidInput(f"unknown interarrival law {self.tau!r}")


def giginf_simulate(qp: QueueParams, n: int, seed: int = 0, index: int = 0):
    """W_0 = Y, W_k = max(W_{k-1} - tau_{k-1}, sigma_{k-1}); returns (W, theta)
    with theta = None when the queue never empties within n steps."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    rng = stream(seed, "queue", index)
    sig = qp.sample_sigma(rng, n)
    tau = qp.sample_tau(rng, n)
    W = np.empty(n + 1)
    W[0] = qp.Y
    for k in range(1, n + 1):
        W[k] = max(W[k - 1] - tau[k - 1], sig[k - 1])
    z = np.flatnonzero(W[1:] == 0)
    return W, (int(z[0]) + 1 if len(z) else None)


def giginf_theta(qp: QueueParams, runs: int, n_max: int, seed: int = 0):
    """Vectorised first emptying times of ``runs`` independent queues.
    Returns (theta, censored) with theta = n_max for censored runs."""
    rng = stream(seed, "queue-theta")
    W = np.full(runs, float(qp.Y))
    theta = np.full(runs, n_max, dtype=np.int64)
    alive = np.arange(runs)
    for k in range(1, n_max + 1):
        if len(alive) == 0:
            break
        s = qp.sample_sigma(rng, len(alive))
        t = qp.sample_tau(rng, len(alive))
        W = np.maximum(W - t, s)
        done = W == 0
        theta[alive[done]] = k
        alive, W = alive[~done], W[~done]
    censored = np.zeros(runs, dtype=bool)
    censored[alive] = True
    return theta, censored


def stationary_workload(qp: QueueParams, runs: int, horizon: int = 1000, seed: int = 0):
    """M = sup_j (sigma_j - (tau_0 + ... + tau_{j-1}))^+ over the last
    ``horizon`` customers (backward construction, vectorised over runs)."""
    rng = stream(seed, "queue-M")
    M = np.zeros(runs)
    elapsed = np.zeros(runs)
    for _ in range(horizon):
        M = np.maximum(M, qp.sample_sigma(rng, runs) - elapsed)
        elapsed += qp.sample_tau(rng, runs)
    return M


# ---------------------------------------------------------------------------
# tails

@dataclass(frozen=True)
class TailFit:
    slope: float
    intercept: float
    se: float
    n_tail: int
    grid: np.ndarray
    survival: np.ndarray

    def ci(self, z=1.96):
        return self.slope - z * self.se, self.slope + z * self.se


def tail_exponent(samples, t_min: float, n_bins: int = 20, min_count: int = 10,
                  t_max: float | None = None, min_tail: int = 1000) -> TailFit:
    """Least-squares slope of log P(X > t) against log t on a log-spaced grid
    in [t_min, t_max]; grid points with fewer than ``min_count`` exceedances
    are dropped."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if t_min <= 0:
        raise InvalidInput("t_min must be > 0")
    n_tail = int(np.sum(x > t_min))
    if n_tail < min_tail:
        raise InsufficientData(f"only {n_tail} samples exceed t_min = {t_min}")
    top = x[-1] if t_max is None else min(t_max, x[-1])
    if not top > t_min:
        raise InsufficientData("no tail above t_min")
    grid = np.geomspace(t_min, top, n_bins)
    surv_cnt = n - np.searchsorted(x, grid, side="right")
    keep = surv_cnt >= min_count
    grid, surv = grid[keep], surv_cnt[keep] / n
    if len(grid) < 3:
        raise InsufficientData("fewer than 3 usable grid points")
    if np.all(surv == surv[0]):
        raise InsufficientData("empirical survival is flat above t_min (no tail)")
    lx, ly = np.log(grid), np.log(surv)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = max(len(lx) - 2, 1)
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(((lx - lx.mean()) ** 2).sum()))
    return TailFit(float(coef[0]), float(coef[1]), se, n_tail, grid, surv)


class TailExponentEstimator(BaseEstimator):
    def __init__(self, t_min=1.0, n_bins=20, min_count=10, t_max=None, min_tail=1000):
        self.t_min = t_min
        self.n_bins = n_bins
        self.min_count = min_count
        self.t_max = t_max
        self.min_tail = min_tail

    def fit(self, X, y=None):
        fit = tail_exponent(np.ravel(X), self.t_min, self.n_bins, self.min_count, self.t_max, self.min_tail)
        self.fit_ = fit
        self.slope_, self.intercept_, self.se_ = fit.slope, fit.intercept, fit.se
        return self

    def predict(self, t):
        """Fitted survival probability at t."""
        return np.exp(self.intercept_) * np.asarray(t, dtype=float) ** self.slope_


# ---------------------------------------------------------------------------
# invariants

def domination_check(traces, params: ModelParams, c0: float | None = None, runs: int = 20000,
                     horizon: int = 2000, seed: int = 0, grid=None):
    """Compare the empirical tail of W (directed traces) with the stationary
    workload M of the queue with sigma ~ rho and tau ~ Bernoulli(c0).

    W_{k+1} = max(W_k - P_k, rho_k - P_k, 0) <= max(W_k - 1{P_k >= 1}, rho_k),
    so any c0 below the conditional probability of a unit step gives a
    dominating queue; by default c0 is half the observed unit-step rate.
    Returns a dict with the grid, both tails, the 3-sigma slack and ``ok``."""
    Ws = np.concatenate([t.W[1:] for t in traces])
    prog = np.concatenate([np.diff(t.coordinate) for t in traces])
    if c0 is None:
        c0 = 0.5 * float(np.mean(prog >= 1))
    rng = stream(seed, "dom-rho")

    M = np.zeros(runs)
    elapsed = np.zeros(runs)
    for _ in range(horizon):
        sig = _rho_vec(rng, params, runs)
        M = np.maximum(M, sig - elapsed)
        elapsed += (rng.uniform(size=runs) < c0)
    if grid is None:
        grid = np.geomspace(0.5, max(float(Ws.max()), 1.0), 15)
    w_tail = np.array([np.mean(Ws > g) for g in grid])
    m_tail = np.array([np.mean(M > g) for g in grid])
    slack = 3 * np.sqrt(np.maximum(w_tail * (1 - w_tail), 1.0 / len(Ws)) / len(Ws))
    ok = bool(np.all(w_tail <= m_tail + slack))
    return {"grid": grid, "w_tail": w_tail, "m_tail": m_tail, "slack": slack, "c0": c0, "ok": ok}


def _rho_vec(rng, params: ModelParams, n: int):
    """Vectorised farthest_radius."""
    tot = params.omega * params.radial_mass_total
    u = rng.uniform(size=n)
    m = params.radial_mass_total - (-np.log(u)) / params.omega
    r = params.radial_mass_inv(np.maximum(m, 0.0))
    return np.where(u <= math.exp(-tot), 0.0, r)


def freshness_residuals(params: ModelParams, start, runs: int = 1000, seed: int = 0):
    """Radial coupling: at the first regenerative time theta, count the
    unexplored points of B(O, Z_theta) (PPP of intensity lambda_theta in the
    lazy construction) and return Pearson residuals against the intensity-1
    claim, (N - |B|) / sqrt(|B|)."""
    d = params.d
    pi_d = geometry_constants(d)[0]
    out = []
    for r in range(runs):
        tr = coupled_walk(params, "radial", start, steps=10 ** 4, seed=seed, index=r)
        th = tr.regen_times
        th = th[np.linalg.norm(tr.X[th], axis=1) > 0] if len(th) else th
        if len(th) == 0:
            continue
        k = int(th[0])
        Zk = float(tr.Z[k])
        vol = pi_d * Zk ** d
        rng = stream(seed, "fresh", r)
        n = int(rng.poisson(vol))
        pts = uniform_in_ball(rng, n, d, Zk)
        lam = np.ones(n)
        for P in tr.X[:k]:
            lam *= 1.0 - params.f(np.linalg.norm(pts - P, axis=1))
        cnt = int(np.sum(rng.uniform(size=n) < lam))
        out.append((cnt - vol) / math.sqrt(vol) if vol > 0 else 0.0)
    return np.array(out)
