"""Monte Carlo experiment plans and their reports.

A plan is a flat key=value file.  Every replication draws from its own
stream ``(seed, tag, index)`` so reports do not depend on the number of
workers.  Pass/fail tolerances come from the plan.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial.distance import cdist

from . import analytic
from .model import ModelParams
from .navigators import CONDITIONINGS, DIRECTED, PER_NODE, TOWARD, NavState, SmallWorldNavigator, navigate
from .point_process import InvalidInput, Window, geometry_constants, palm_add, sample_ppp
from .regeneration import (QueueParams, coupled_walk, giginf_theta, regen_analysis, stationary_workload,
                           tail_exponent)
from .rng import stream
from .tree_metrics import ball_sizes, build_tree, deviation, offspring_cone_check

SCHEMA = "ppnav.report/1"
REGIMES = ("linear", "log", "loglog", "shape", "deviation", "progress-tail", "queue", "local-limit")


def _floats(s):
    return [float(v) for v in str(s).split(",") if v.strip()]


@dataclass
class ExperimentPlan:
    regime: str = "linear"
    conditioning: str = "joint"
    d: int = 2
    beta: float = 5.0
    c: float = 1.0
    ladder: list = field(default_factory=list)      # |X| ladder (or window radii)
    reps: int = 100
    seed: int = 0
    threads: int = 1
    window: float = 300.0
    k_min: int = 10
    eps: float = 0.2
    gamma: float = 0.9
    steps: int = 100000
    samples: int = 10000
    regen_steps: int = 100000
    t_min: float = 5.0
    t_max: float = 50.0
    x_norm: float = 1e4
    perms: int = 499
    cone_window: float = 100.0
    tol_ratio: float = 0.15
    tol_slope: float = 0.05
    tol_level: float = 0.15
    tol_ks: float = 0.05
    tol_profile: float = 0.2
    tol_sandwich: float = 0.05
    tol_exponent: float = 0.9
    tol_alpha: float = 0.01
    tol_doubling: float = 0.1
    tol_theta_slope: float = -0.8
    tol_m_slope: float = -1.8

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, kv: dict) -> "ExperimentPlan":
        known = {f.name: f for f in fields(cls)}
        args = {}
        for k, v in kv.items():
            key = k.replace("-", "_")
            if key not in known:
                raise InvalidInput(f"unknown plan key {k!r}")
            default = known[key].default
            if key == "ladder":
                args[key] = _floats(v) if isinstance(v, str) else [float(x) for x in v]
            elif key in ("regime", "conditioning"):
                args[key] = str(v)
            elif isinstance(default, int) and not isinstance(default, bool):
                args[key] = int(float(v))
            else:
                args[key] = float(v)
        plan = cls(**args)
        plan.validate()
        return plan

    @classmethod
    def parse(cls, text: str) -> "ExperimentPlan":
        return cls.from_dict(parse_kv(text))

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        with open(path) as fh:
            return cls.parse(fh.read())

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.d, self.beta, self.c)

    def validate(self):
        if self.regime not in REGIMES:
            raise InvalidInput(f"unknown regime {self.regime!r}")
        d, b = self.d, self.beta
        need = {"linear": b > d, "log": b == d, "loglog": d - 2 < b < d,
                "shape": b > d, "deviation": b > d, "local-limit": b > d}
        if not need.get(self.regime, True):
            raise InvalidInput(f"regime {self.regime} inconsistent with d={d}, beta={b}")
        lad = np.asarray(self.ladder, dtype=float)
        if len(lad) > 2:
            r = lad[1:] / lad[:-1]
            if np.any(r <= 1) or not np.allclose(r, r[0], rtol=1e-9):
                raise InvalidInput("ladder must be geometric and increasing")
        if self.conditioning not in CONDITIONINGS:
            raise InvalidInput(f"unknown conditioning {self.conditioning!r}")
        if self.reps < 1 or self.threads < 1:
            raise InvalidInput("reps and threads must be >= 1")

    def as_dict(self):
        return {k: v for k, v in asdict(self).items()}


def parse_kv(text: str) -> dict:
    """One ``key = value`` per line, ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInput(f"line {n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise InvalidInput(f"line {n}: empty key")
        out[k] = v
    return out


@dataclass
class Check:
    name: str
    value: float
    target: float
    tolerance: float
    passed: bool
    source: str
    note: str = ""


@dataclass
class EstimateReport:
    operation: str
    plan: dict
    estimates: dict = field(default_factory=dict)
    references: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)     # name -> {"columns": [...], "rows": [[...]]}
    provenance: dict = field(default_factory=dict)
    schema: str = SCHEMA

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name, value, target, tol, passed, source, note=""):
        self.checks.append(Check(name, float(value), float(target), float(tol), bool(passed), source, note))

    def to_dict(self):
        return {"schema": self.schema, "operation": self.operation, "plan": self.plan,
                "estimates": self.estimates, "references": self.references,
                "checks": [asdict(c) for c in self.checks], "curves": self.curves,
                "provenance": self.provenance, "passed": self.passed}

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "EstimateReport":
        d = json.loads(text)
        if d.get("schema") != SCHEMA:
            raise InvalidInput(f"unsupported report schema {d.get('schema')!r}")
        rep = cls(d["operation"], d["plan"], d["estimates"], d["references"], [],
                  d["curves"], d["provenance"])
        rep.checks = [Check(**c) for c in d["checks"]]
        return rep

    def curve_csv(self, name: str) -> str:
        cur = self.curves[name]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cur["columns"])
        for row in cur["rows"]:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
        return buf.getvalue()


def _clean(o):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        v = float(o)
        return v if math.isfinite(v) else repr(v)
    return o


def _curve(columns, *cols):
    return {"columns": list(columns), "rows": [list(r) for r in zip(*[np.asarray(c).tolist() for c in cols])]}


def _map(plan: ExperimentPlan, fn, n):
    if plan.threads > 1:
        return Parallel(n_jobs=plan.threads)(delayed(fn)(i) for i in range(n))
    return [fn(i) for i in range(n)]


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")


def _ols(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1 - float(res @ res) / ss if ss > 0 else 1.0
    se = math.sqrt(float(res @ res) / max(len(x) - 2, 1) / float(((x - x.mean()) ** 2).sum()))
    return float(coef[0]), float(coef[1]), se, r2


def _start(d, x):
    s = np.zeros(d)
    s[0] = x
    return s


# ---------------------------------------------------------------------------
# single-step samplers

def first_steps_toward(params: ModelParams, x: float, n: int, seed: int, tag="first-toward",
                       conditioning="joint"):
    """n independent A(X) for X = x e1, each in a fresh Palm environment."""
    out = np.empty((n, params.d))
    X = _start(params.d, x)
    for i in range(n):
        out[i] = NavState(params, X, TOWARD, None, seed, _tag_index(tag, i), conditioning=conditioning).step()
    return out


def first_steps_directed(params: ModelParams, n: int, seed: int, e1=None, tag="first-directed",
                         conditioning="joint"):
    """n independent A_{e1}(O)."""
    out = np.empty((n, params.d))
    O = np.zeros(params.d)
    for i in range(n):
        out[i] = NavState(params, O, DIRECTED, e1, seed, _tag_index(tag, i), conditioning=conditioning).step()
    return out


def _tag_index(tag: str, i: int) -> int:
    # separate index ranges per sampler so streams never collide
    return (sum(map(ord, tag)) << 40) + i


# ---------------------------------------------------------------------------
# operations

def hop_scaling(plan: ExperimentPlan) -> EstimateReport:
    p = plan.params
    rep = EstimateReport("hop_scaling", plan.as_dict())
    if plan.regime not in ("linear", "log", "loglog"):
        raise InvalidInput("hop_scaling needs regime linear, log or loglog")
    lad = np.asarray(plan.ladder, dtype=float)
    if len(lad) < 2:
        raise InvalidInput("hop_scaling needs a ladder of at least two |X| values")

    if plan.regime == "loglog":
        alpha = analytic.contraction_alpha(p.d, p.beta)
        xs, ys, dropped = [], [], 0
        for j, x in enumerate(lad):
            pts = first_steps_toward(p, x, plan.reps, plan.seed, tag=f"loglog-{j}",
                                     conditioning=plan.conditioning)
            nrm = np.linalg.norm(pts, axis=1)
            dropped += int(np.sum(nrm == 0))
            keep = nrm > 0
            xs.extend([math.log(x)] * int(keep.sum()))
            ys.extend(np.log(nrm[keep]).tolist())
        slope, icpt, se, r2 = _ols(xs, ys)
        rep.estimates.update(slope=slope, intercept=icpt, slope_se=se, r2=r2, absorbed_first_steps=dropped)
        rep.references.update(alpha={"value": alpha, "source": "analytic.contraction_alpha"},
                              loglog_limit={"value": analytic.loglog_limit(p.d, p.beta),
                                            "source": "analytic.loglog_limit"})
        rep.check("contraction slope", slope, alpha, plan.tol_slope, abs(slope - alpha) <= plan.tol_slope,
                  "analytic.contraction_alpha")
        # informational H-ratio at the top of the ladder
        xt = float(lad[-1])
        H = [navigate("small-world", p, _start(p.d, xt), seed=plan.seed, index=i,
                      conditioning=plan.conditioning).H
             for i in range(min(plan.reps, 50))]
        rep.estimates["H_over_lnln_top"] = float(np.mean(H) / math.log(math.log(xt)))
        rep.curves["first_step"] = _curve(["ln_x", "ln_x1"], xs, ys)
    else:
        def run(j_i):
            j, i = divmod(j_i, plan.reps)
            return navigate("small-world", p, _start(p.d, lad[j]), seed=plan.seed, index=j_i,
                            conditioning=plan.conditioning).H
        Hs = np.array(_map(plan, run, len(lad) * plan.reps)).reshape(len(lad), plan.reps)
        means = Hs.mean(axis=1)
        ses = Hs.std(axis=1, ddof=1) / math.sqrt(plan.reps)
        if plan.regime == "log":
            mt = analytic.mu_tilde(p)
            target = 1.0 / mt.value
            ratio = means / np.log(lad)
            err = np.abs(ratio - target)
            rep.references["inv_mu_tilde"] = {"value": target, "source": "analytic.mu_tilde",
                                              "mu_tilde": mt.value, "cutoff": mt.cutoff}
            rep.check("H/ln|X| at top of ladder", ratio[-1], target, plan.tol_ratio,
                      abs(ratio[-1] / target - 1) <= plan.tol_ratio, "analytic.mu_tilde")
            mono = bool(np.all(np.diff(err) <= 0))
            rep.check("monotone approach along ladder", float(mono), 1.0, 0.0, mono, "analytic.mu_tilde",
                      "|H/ln|X| - 1/mu_tilde| nonincreasing in |X|")
            rep.curves["hops"] = _curve(["x", "H_mean", "H_se", "ratio"], lad, means, ses, ratio)
        else:
            dbl = means[1:] / means[:-1]
            r = lad[1:] / lad[:-1]
            rel = np.abs(dbl / r - 1)
            rep.estimates["doubling_ratios"] = dbl.tolist()
            rep.check("H(rx)/H(x) along ladder", float(rel.max()), 0.0, plan.tol_doubling,
                      bool(np.all(rel <= plan.tol_doubling)), "ratio consistency")
            rep.curves["hops"] = _curve(["x", "H_mean", "H_se", "H_over_x"], lad, means, ses, means / lad)
        rep.estimates.update(H_mean=means.tolist(), H_se=ses.tolist())
    rep.provenance.update(seed=plan.seed)
    return rep


def estimate_mu_prime(p: ModelParams, steps: int, seed: int, conditioning="joint"):
    tr = coupled_walk(p, "directed", steps=steps, seed=seed, conditioning=conditioning)
    return regen_analysis(tr, seed=seed)


def shape_profile(plan: ExperimentPlan) -> EstimateReport:
    p = plan.params
    if p.beta <= p.d:
        raise InvalidInput("shape_profile needs beta > d")
    rep = EstimateReport("shape_profile", plan.as_dict())
    # the realised trees condition each node's coins on its own environment,
    # so mu' is estimated under the same law
    st = estimate_mu_prime(p, plan.regen_steps, plan.seed, PER_NODE)
    mu = st.mu_hat
    R = plan.window
    k_max = int(math.floor(0.8 * R / ((1 + plan.eps) * mu) - 1e-9))
    if k_max < plan.k_min:
        raise InvalidInput(f"boundary guard leaves no k: k_max = {k_max} < k_min = {plan.k_min}")
    ks = np.arange(plan.k_min, k_max + 1)
    pi_d = geometry_constants(p.d)[0]

    def one(i):
        ps = palm_add(sample_ppp(Window.ball(R, d=p.d), p.d, plan.seed * 1000003 + i), [np.zeros(p.d)])
        tree = build_tree(ps, SmallWorldNavigator(p.d, p.beta, p.c, seed=plan.seed + 7919 * (i + 1)))
        sizes = ball_sizes(tree, k_max)
        nrm = np.linalg.norm(tree.points, axis=1)
        nonroot = np.arange(len(nrm)) != tree.root
        viol = []
        for k in ks:
            inner = nonroot & (nrm < (1 - plan.eps) * k * mu) & (tree.H > k)
            outer = nonroot & (tree.H <= k) & (nrm > (1 + plan.eps) * k * mu)
            viol.append(bool(inner.any() or outer.any()))
        return sizes[ks], np.array(viol), int(tree.H.max())

    out = _map(plan, one, plan.reps)
    sizes = np.array([o[0] for o in out], dtype=float)
    viol = np.array([o[1] for o in out])
    prof = sizes / (pi_d * ks.astype(float) ** p.d)
    mean_prof = prof.mean(axis=0)
    se_prof = prof.std(axis=0, ddof=1) / math.sqrt(len(prof)) if len(prof) > 1 else np.zeros(len(ks))
    target = mu ** p.d
    dev = np.abs(mean_prof / target - 1)
    rep.estimates.update(mu_prime=mu, mu_prime_se=st.se, k_range=[int(ks[0]), int(ks[-1])],
                         max_rel_dev=float(dev.max()), sandwich_violation_rate=float(viol.mean()))
    rep.references["mu_prime_pow_d"] = {"value": target, "source": "regeneration.regen_analysis"}
    rep.check("profile vs mu'^d", float(dev.max()), 0.0, plan.tol_profile, bool(dev.max() <= plan.tol_profile),
              "regeneration.regen_analysis")
    rep.check("sandwich violation rate", float(viol.mean()), 0.0, plan.tol_sandwich,
              bool(viol.mean() < plan.tol_sandwich), "tree_metrics.tree_ball")
    rep.curves["profile"] = _curve(["k", "profile_mean", "profile_se", "violation_rate"],
                                   ks, mean_prof, se_prof, viol.mean(axis=0))
    rep.provenance.update(seed=plan.seed, trees=plan.reps)
    return rep


def deviation_tail(plan: ExperimentPlan) -> EstimateReport:
    p = plan.params
    if p.beta <= p.d:
        raise InvalidInput("deviation_tail needs beta > d")
    rep = EstimateReport("deviation_tail", plan.as_dict())
    lad = np.asarray(plan.ladder, dtype=float)
    n = plan.reps

    def run(j_i):
        j, _ = divmod(j_i, n)
        path = navigate("small-world", p, _start(p.d, lad[j]), seed=plan.seed, index=j_i,
                        conditioning=plan.conditioning)
        return deviation(path.points), path.H

    out = np.array(_map(plan, run, len(lad) * n), dtype=float).reshape(len(lad), n, 2)
    dev, H = out[..., 0], out[..., 1]
    med = np.median(dev, axis=1)
    if np.any(med <= 0):
        raise InvalidInput("median deviation is zero on part of the ladder; raise the ladder")
    slope, icpt, se, r2 = _ols(np.log(lad), np.log(med))
    exceed = (dev >= lad[:, None] ** plan.gamma).mean(axis=1)
    rep.estimates.update(median_exponent=slope, exponent_se=se, r2=r2, exceed=exceed.tolist(),
                         h_le_1_zero=bool(np.all(dev[H <= 1] == 0)))
    rep.check("median deviation exponent", slope, plan.tol_exponent, 0.0, slope <= plan.tol_exponent,
              "regression", "strict sublinearity")
    mono = bool(np.all(np.diff(exceed) <= 0))
    rep.check(f"P(Delta >= |X|^{plan.gamma}) nonincreasing", float(mono), 1.0, 0.0, mono, "trend")
    # offspring cone counts on one realised tree
    Rw = plan.cone_window
    ps = palm_add(sample_ppp(Window.ball(Rw, d=p.d), p.d, plan.seed + 17), [np.zeros(p.d)])
    tree = build_tree(ps, SmallWorldNavigator(p.d, p.beta, p.c, seed=plan.seed + 19))
    v = offspring_cone_check(tree, plan.gamma)
    rep.estimates.update(cone_violations=int(len(v)), cone_nodes=int(len(tree)))
    rep.curves["deviation"] = _curve(["x", "median_delta", "p_exceed"], lad, med, exceed)
    rep.provenance.update(seed=plan.seed)
    return rep


def progress_distribution(plan: ExperimentPlan) -> EstimateReport:
    p = plan.params
    rep = EstimateReport("progress_distribution", plan.as_dict())
    d, b = p.d, p.beta
    if b > d:
        steps = first_steps_directed(p, plan.samples, plan.seed, conditioning=plan.conditioning)
        prog = steps[:, 0]
        n = len(prog)
        grid = np.geomspace(plan.t_min, plan.t_max, 12)
        cnt = np.array([(prog > t).sum() for t in grid])
        scaled = grid ** (b - d) * cnt / n
        # level pooled over the grid: sum of counts over the expected shape
        level = float(cnt.sum() / (n * np.sum(grid ** (d - b))))
        level_se = float(math.sqrt(cnt.sum()) / (n * np.sum(grid ** (d - b))))
        K = analytic.progress_tail_constant(p)
        exact = analytic.progress_tail_level_exact(p)
        exact_curve = np.array([analytic.directed_progress_tail(t, p) for t in grid])
        rep.estimates.update(level=level, level_se=level_se, n_tail=int(cnt[0]))
        rep.references.update(K={"value": K, "source": "analytic.progress_tail_constant"},
                              level_exact={"value": exact, "source": "analytic.progress_tail_level_exact"})
        rep.check("t^(beta-d) tail level vs progress_tail_constant", level, K, plan.tol_level,
                  abs(level / K - 1) <= plan.tol_level, "analytic.progress_tail_constant")
        rep.check("t^(beta-d) tail level vs exact directed tail", level, exact, plan.tol_level,
                  abs(level / exact - 1) <= plan.tol_level, "analytic.progress_tail_level_exact")
        rep.curves["progress_tail"] = _curve(["t", "scaled_emp", "count", "exact"], grid, scaled, cnt,
                                             exact_curve * grid ** (b - d))
    elif b < d:
        alpha = analytic.contraction_alpha(d, b)
        x = plan.x_norm
        pts = first_steps_toward(p, x, plan.samples, plan.seed, tag="q-limit", conditioning=plan.conditioning)
        Q = np.sort(np.linalg.norm(pts, axis=1) / x ** alpha)
        ks_printed = _ks_tail(Q, lambda s: analytic.q_limit_tail(s, p))
        rep.estimates.update(ks_printed=ks_printed, q_mean=float(Q.mean()))
        rep.references["q_limit_tail"] = {"source": "analytic.q_limit_tail"}
        rep.check("KS vs printed q-limit law", ks_printed, 0.0, plan.tol_ks, ks_printed <= plan.tol_ks,
                  "analytic.q_limit_tail")
        if d == 2:
            ks_exact = _ks_tail(Q, lambda s: analytic.q_limit_tail_exact(s, p))
            rep.estimates["ks_exact"] = ks_exact
            rep.check("KS vs exact q-limit law", ks_exact, 0.0, plan.tol_ks, ks_exact <= plan.tol_ks,
                      "analytic.q_limit_tail_exact")
        grid = np.linspace(0, float(Q.max()), 40)
        emp = 1 - np.searchsorted(Q, grid, side="right") / len(Q)
        rep.curves["q_tail"] = _curve(["s", "empirical", "printed"], grid, emp,
                                      [analytic.q_limit_tail(s, p) for s in grid])
    else:
        x = plan.x_norm
        pts = first_steps_toward(p, x, plan.samples, plan.seed, tag="p-tilde", conditioning=plan.conditioning)
        nrm = np.linalg.norm(pts, axis=1)
        with np.errstate(divide="ignore"):
            Pt = -np.log(nrm / x)
        n = len(Pt)
        grid = np.linspace(0.25, 4.0, 16)
        emp = np.array([(Pt > s).mean() for s in grid])
        ref = np.array([analytic.f_tilde_tail(s, p) for s in grid])
        band = 3 * np.sqrt(ref * (1 - ref) / n)
        ok = np.abs(emp - ref) <= band
        rep.estimates.update(max_z=float(np.max(np.abs(emp - ref) / np.maximum(band / 3, 1e-300))))
        rep.check("P-tilde tail within 3 sigma bands", float(ok.mean()), 1.0, 0.0, bool(ok.all()),
                  "analytic.f_tilde_tail")
        rep.curves["p_tilde_tail"] = _curve(["s", "empirical", "f_tilde", "band"], grid, emp, ref, band)
    rep.provenance.update(seed=plan.seed)
    return rep


def _ks_tail(sorted_x, tail):
    """sup |F_emp - F| for a continuous law given by its tail function."""
    n = len(sorted_x)
    F = np.array([1.0 - tail(s) for s in sorted_x])
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max(np.max(hi - F), np.max(F - lo)))


def energy_test(a, b, perms: int = 499, seed: int = 0):
    """Two-sample energy distance with a permutation p-value."""
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    Z = np.vstack([a, b])
    D = cdist(Z, Z)
    n, m = len(a), len(b)

    def stat(idx):
        ia, ib = idx[:n], idx[n:]
        return (2 * D[np.ix_(ia, ib)].mean() - D[np.ix_(ia, ia)].mean() - D[np.ix_(ib, ib)].mean())

    base = np.arange(n + m)
    obs = stat(base)
    rng = stream(seed, "energy")
    cnt = sum(stat(rng.permutation(base)) >= obs for _ in range(perms))
    return float(obs), (cnt + 1) / (perms + 1)


def local_limit_compare(plan: ExperimentPlan) -> EstimateReport:
    p = plan.params
    if p.beta <= p.d:
        raise InvalidInput("local_limit_compare needs beta > d")
    rep = EstimateReport("local_limit_compare", plan.as_dict())
    x = plan.x_norm
    n = plan.samples
    e = -np.eye(p.d)[0]
    a = first_steps_toward(p, x, n, plan.seed, tag="local-toward", conditioning=plan.conditioning) - _start(p.d, x)
    b = first_steps_directed(p, n, plan.seed, e1=e, tag="local-directed", conditioning=plan.conditioning)
    stat, pv = energy_test(a, b, plan.perms, plan.seed)
    b2 = first_steps_directed(p, n, plan.seed, e1=e, tag="local-directed-2",
                              conditioning=plan.conditioning)
    stat0, pv0 = energy_test(b, b2, plan.perms, plan.seed + 1)
    # pre-asymptotic distance, reported only
    near = first_steps_toward(p, 10.0, n, plan.seed, tag="local-near", conditioning=plan.conditioning)
    near = near - _start(p.d, 10.0)
    _, pv_near = energy_test(near, b, plan.perms, plan.seed + 2)
    rep.estimates.update(energy=stat, p_value=pv, self_energy=stat0, self_p_value=pv0, near_p_value=pv_near)
    rep.check("energy test not rejected at 1%", pv, plan.tol_alpha, 0.0, pv >= plan.tol_alpha,
              "two-sample energy test")
    rep.provenance.update(seed=plan.seed)
    return rep


def queue_tails(plan: ExperimentPlan) -> EstimateReport:
    """Plan keys reused: samples = runs, steps = n_max, beta = Pareto alpha."""
    rep = EstimateReport("queue_tails", plan.as_dict())
    qp = QueueParams(service="pareto", alpha=plan.beta, p_zero=0.5, tau="bernoulli", tau_p=0.5)
    th, cen = giginf_theta(qp, plan.samples, plan.steps, plan.seed)
    ft = tail_exponent(th, plan.t_min, t_max=plan.steps / 2)
    M = stationary_workload(qp, plan.samples, horizon=1000, seed=plan.seed)
    fm = tail_exponent(M, 1.0)
    rep.estimates.update(theta_slope=ft.slope, theta_slope_se=ft.se, censored=float(cen.mean()),
                         M_slope=fm.slope, M_slope_se=fm.se)
    rep.check("theta tail slope", ft.slope, plan.tol_theta_slope, 0.0, ft.slope <= plan.tol_theta_slope,
              "bound 2 - alpha")
    rep.check("M tail slope", fm.slope, plan.tol_m_slope, 0.0, fm.slope <= plan.tol_m_slope,
              "service tail 1 - alpha")
    rep.curves["theta_tail"] = _curve(["t", "survival"], ft.grid, ft.survival)
    rep.curves["M_tail"] = _curve(["t", "survival"], fm.grid, fm.survival)
    rep.provenance.update(seed=plan.seed)
    return rep


OPERATIONS = {"linear": hop_scaling, "log": hop_scaling, "loglog": hop_scaling, "shape": shape_profile,
              "deviation": deviation_tail, "progress-tail": progress_distribution,
              "queue": queue_tails, "local-limit": local_limit_compare}


def run_plan(plan: ExperimentPlan) -> EstimateReport:
    return OPERATIONS[plan.regime](plan)
