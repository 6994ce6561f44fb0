"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 runtime failure.  Errors go to
stderr as ``ppnav: error[input]: ...`` or ``ppnav: error[runtime]: ...``.
Outputs land in ``--out`` (default ``$PPNAV_OUT`` or the working directory)
together with ``manifest.json``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, analytic
from .experiments import EstimateReport, ExperimentPlan, parse_kv, run_plan
from .model import ConditioningError, ModelParams
from .navigators import (CONDITIONINGS, DIRECTED, TOWARD, BoundaryExhausted, CompassNavigator, Limits,
                         RadialNavigator, SmallWorldNavigator, navigate)
from .point_process import InvalidInput, PointSet, Window, palm_add, read_points_csv, sample_ppp
from .regeneration import InsufficientData, QueueParams, coupled_walk, giginf_simulate, giginf_theta, \
    regen_analysis, tail_exponent
from .tree_metrics import NavTree, NavigationFailure, build_tree, path_metrics

ENV_OUT = "PPNAV_OUT"


class UsageError(InvalidInput):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# outputs

class Outputs:
    def __init__(self, outdir):
        self.dir = outdir
        self.files = []

    def write(self, name, text: str) -> str:
        os.makedirs(self.dir, exist_ok=True)
        path = os.path.join(self.dir, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        self.files.append(path)
        return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Outputs, command, config: dict, seed, wall: float) -> str:
    man = {"tool": "ppnav", "version": __version__, "command": command, "config": config, "seed": seed,
           "wall_seconds": wall,
           "outputs": [{"path": os.path.basename(p), "sha256": sha256_file(p)} for p in out.files]}
    return Outputs(out.dir).write("manifest.json", json.dumps(man, sort_keys=True, indent=1, default=str) + "\n")


def emit_report(report: EstimateReport, outdir, formats=("json", "csv"), stem=None) -> list:
    """Write the report JSON and one CSV per curve; returns the paths."""
    out = Outputs(outdir)
    stem = stem or report.operation
    if "json" in formats:
        out.write(f"{stem}.json", report.to_json() + "\n")
    if "csv" in formats:
        for name in sorted(report.curves):
            out.write(f"{stem}_{name}.csv", report.curve_csv(name))
    return out.files


def render_tree_svg(tree: NavTree, style: dict | None = None) -> str:
    """Static SVG: one segment per tree edge, O marked by a circle."""
    P = np.asarray(tree.points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2:
        raise InvalidInput("tree rendering needs a planar tree")
    st = {"size": 800, "stroke": "#335", "width": 0.6, "origin": "#c22", "margin": 10}
    st.update(style or {})
    ext = float(np.max(np.abs(P))) if len(P) else 1.0
    ext = ext if ext > 0 else 1.0
    S, m = float(st["size"]), float(st["margin"])
    k = (S / 2 - m) / ext

    def xy(p):
        return f"{S / 2 + k * p[0]:.4f}", f"{S / 2 - k * p[1]:.4f}"

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{S:g}" height="{S:g}" viewBox="0 0 {S:g} {S:g}">',
             f'<g stroke="{st["stroke"]}" stroke-width="{st["width"]}">']
    for i, j in enumerate(np.asarray(tree.parent).tolist()):
        if i == j:
            continue
        x1, y1 = xy(P[i])
        x2, y2 = xy(P[j])
        lines.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>')
    lines.append("</g>")
    ox, oy = xy(P[tree.root]) if len(P) else (f"{S / 2:.4f}", f"{S / 2:.4f}")
    lines.append(f'<circle cx="{ox}" cy="{oy}" r="4" fill="{st["origin"]}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def read_tree_csv(text: str):
    rows = [r.split(",") for r in text.strip().splitlines()[1:]]
    if not rows:
        raise InvalidInput("empty tree file")
    parent = np.array([int(r[1]) for r in rows], dtype=np.int64)
    H = np.array([int(r[2]) for r in rows], dtype=np.int64)
    return parent, H


# ---------------------------------------------------------------------------
# argument handling

COMMON = {"seed": int, "threads": int, "out": str, "config": str}

SUBCOMMANDS = {
    "sample": {"d": int, "window": str, "palm": str},
    "navigate": {"kind": str, "d": int, "beta": float, "c": float, "start": str, "mode": str,
                 "points": str, "max_steps": int, "conditioning": str, "e1": str},
    "tree": {"navigator": str, "d": int, "beta": float, "c": float, "window": str, "points": str},
    "analytic": {"kind": str, "d": int, "beta": float, "c": float, "grid": str},
    "regen": {"mode": str, "d": int, "beta": float, "c": float, "steps": int, "start": str,
              "conditioning": str},
    "queue": {"alpha": float, "p_zero": float, "tau_p": float, "runs": int, "n": int, "t_min": float,
              "service": str},
    "experiment": {"plan": str},
    "render": {"tree": str, "points": str},
}

DEFAULTS = {"seed": 0, "threads": 1, "d": 2, "beta": 5.0, "c": 1.0, "window": "ball:50", "palm": "",
            "kind": None, "mode": TOWARD, "max_steps": 10 ** 6, "conditioning": "joint", "navigator": "radial",
            "steps": 10000, "grid": "0.5:10:20", "alpha": 3.0, "p_zero": 0.5, "tau_p": 0.5, "runs": 10000,
            "n": 1000, "t_min": 5.0, "service": "pareto"}


def build_parser():
    p = _Parser(prog="ppnav", description="Navigation on Poisson point processes.")
    p.add_argument("--version", action="version", version=f"ppnav {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, keys in SUBCOMMANDS.items():
        sp = sub.add_parser(name)
        for k, typ in {**COMMON, **keys}.items():
            sp.add_argument("--" + k.replace("_", "-"), dest=k, type=typ, default=None)
    return p


def resolve(args) -> tuple[dict, set]:
    """Config file values overlaid with explicit flags, then defaults.
    Also returns the set of keys given explicitly (file or flag)."""
    keys = {**COMMON, **SUBCOMMANDS[args.command]}
    cfg = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = parse_kv(fh.read())
        except FileNotFoundError:
            raise InvalidInput(f"config file not found: {args.config}")
        for k, v in raw.items():
            key = k.replace("-", "_")
            if key not in keys or key == "config":
                raise InvalidInput(f"unknown config key {k!r}")
            try:
                cfg[key] = keys[key](v)
            except ValueError:
                raise InvalidInput(f"bad value for {k!r}: {v!r}")
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    out = {k: cfg.get(k, DEFAULTS.get(k)) for k in keys if k != "config"}
    if out.get("out") is None:
        out["out"] = os.environ.get(ENV_OUT, ".")
    return out, set(cfg)


def _vec(text, d, what):
    try:
        v = np.array([float(t) for t in str(text).split(",")])
    except ValueError:
        raise InvalidInput(f"bad {what}: {text!r}")
    if v.shape != (d,):
        raise InvalidInput(f"{what} needs {d} comma-separated coordinates")
    return v


def _load_points(path, d=None, window=None):
    try:
        with open(path) as fh:
            pts = read_points_csv(fh.read())
    except FileNotFoundError:
        raise InvalidInput(f"points file not found: {path}")
    dim = pts.shape[1]
    R = float(np.max(np.linalg.norm(pts, axis=1))) if len(pts) else 1.0
    w = window or Window.ball(max(R, 1.0) * (1 + 1e-12), d=dim)
    return PointSet(w, pts, seed=-1, n_palm=0)


def _with_origin(ps: PointSet) -> PointSet:
    P = ps.points
    if len(P) and not np.any(P[0]):
        return ps
    hit = np.flatnonzero(~np.any(P, axis=1))
    if len(hit):
        raise InvalidInput("O must be the first point of the file")
    return palm_add(ps, [np.zeros(ps.dim)])


# ---------------------------------------------------------------------------
# commands

def cmd_sample(cfg, out):
    d = cfg["d"]
    ps = sample_ppp(Window.parse(cfg["window"], d), d, cfg["seed"])
    if cfg["palm"]:
        extra = [np.zeros(d) if t.strip().upper() == "O" else _vec(t, d, "palm point")
                 for t in cfg["palm"].split(";")]
        ps = palm_add(ps, extra)
    out.write("points.csv", ps.to_csv())


def cmd_navigate(cfg, out):
    kind = cfg["kind"] or "small-world"
    d = cfg["d"]
    mode = cfg["mode"]
    if mode not in (TOWARD, DIRECTED):
        raise InvalidInput(f"unknown mode {mode!r}")
    e1 = _vec(cfg["e1"], d, "e1") if cfg.get("e1") else None
    lim = Limits(max_steps=cfg["max_steps"])
    if kind == "small-world":
        params = ModelParams(d, cfg["beta"], cfg["c"])
        start = _vec(cfg["start"], d, "start") if cfg["start"] else np.zeros(d)
        if cfg["conditioning"] not in CONDITIONINGS:
            raise InvalidInput(f"unknown conditioning {cfg['conditioning']!r}")
        path = navigate(kind, params, start, mode, lim, cfg["seed"], e1=e1, conditioning=cfg["conditioning"])
    else:
        if not cfg["points"]:
            raise InvalidInput(f"{kind} navigation needs --points")
        ps = _load_points(cfg["points"])
        if cfg["start"] is None:
            raise InvalidInput("--start (point index) is required")
        try:
            i = int(cfg["start"])
        except ValueError:
            raise InvalidInput("--start must be a point index for realised navigators")
        if not 0 <= i < len(ps):
            raise InvalidInput("start index out of range")
        params = ModelParams(d, cfg["beta"], cfg["c"]) if kind == "small-world-dense" else None
        path = navigate(kind, params, i, mode, lim, cfg["seed"], point_set=ps, e1=e1)
    out.write("path.csv", path.to_csv())
    out.write("path.json", path.sidecar() + "\n")


def cmd_tree(cfg, out):
    d = cfg["d"]
    if cfg["points"]:
        ps = _with_origin(_load_points(cfg["points"]))
    else:
        ps = palm_add(sample_ppp(Window.parse(cfg["window"], d), d, cfg["seed"]), [np.zeros(d)])
    nav = {"radial": lambda: RadialNavigator(),
           "compass": lambda: CompassNavigator(),
           "small-world": lambda: SmallWorldNavigator(ps.dim, cfg["beta"], cfg["c"], seed=cfg["seed"])}
    if cfg["navigator"] not in nav:
        raise InvalidInput(f"unknown navigator {cfg['navigator']!r}")
    tree = build_tree(ps, nav[cfg["navigator"]]())
    out.write("points.csv", ps.to_csv())
    out.write("tree.csv", tree.to_csv())
    metrics = {}
    for i in range(len(tree)):
        if i == tree.root:
            continue
        m = path_metrics(tree, i)
        metrics[str(i)] = {"H": m.H, "Delta": m.Delta, "length": m.euclid_len}
    out.write("metrics.json", json.dumps(metrics, sort_keys=True) + "\n")


def _grid(text):
    try:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    except ValueError:
        raise InvalidInput(f"grid must be lo:hi:n, got {text!r}")


def cmd_analytic(cfg, out):
    params = ModelParams(cfg["d"], cfg["beta"], cfg["c"])
    d, b = params.d, params.beta
    kind = cfg["kind"]
    if kind is None:
        kind = "progress-tail" if b > d else ("f-tilde" if b == d else "q-limit")
    curve = analytic.tail_curve(kind, params, _grid(cfg["grid"]))
    out.write("curve.csv", curve.to_csv())
    consts = {"kind": kind}
    if b > d:
        consts["K"] = analytic.progress_tail_constant(params)
        consts["K_exact_level"] = analytic.progress_tail_level_exact(params)
    elif b == d:
        mt = analytic.mu_tilde(params)
        consts.update(mu_tilde=mt.value, mu_tilde_error=mt.error, truncation=mt.cutoff)
    elif d - 2 < b < d:
        consts["loglog_limit"] = analytic.loglog_limit(d, b)
    out.write("constants.json", json.dumps(consts, sort_keys=True, indent=1) + "\n")


def cmd_regen(cfg, out):
    params = ModelParams(cfg["d"], cfg["beta"], cfg["c"])
    mode = cfg["mode"] if cfg["mode"] != TOWARD else "directed"
    start = _vec(cfg["start"], params.d, "start") if cfg["start"] else None
    tr = coupled_walk(params, mode, start, cfg["steps"], cfg["seed"], conditioning=cfg["conditioning"])
    out.write("trace.csv", tr.to_csv())
    summary = {"theta": tr.regen_times.tolist(), "tags": tr.tags}
    try:
        summary.update(regen_analysis(tr, seed=cfg["seed"]).as_dict())
    except InsufficientData as e:
        summary["analysis"] = str(e)
    out.write("summary.json", json.dumps(summary, sort_keys=True, indent=1) + "\n")


def cmd_queue(cfg, out):
    qp = QueueParams(service=cfg["service"], alpha=cfg["alpha"], p_zero=cfg["p_zero"], tau_p=cfg["tau_p"])
    W, th = giginf_simulate(qp, cfg["n"], cfg["seed"])
    out.write("queue.csv", "n,w\n" + "".join(f"{k},{w!r}\n" for k, w in enumerate(W.tolist())))
    thetas, cen = giginf_theta(qp, cfg["runs"], cfg["n"], cfg["seed"])
    summary = {"theta_first_run": th, "censored": int(cen.sum()), "runs": cfg["runs"],
               "theta": thetas[~cen].tolist()[:1000]}
    try:
        fit = tail_exponent(thetas, cfg["t_min"], t_max=cfg["n"] / 2)
        summary.update(slope=fit.slope, slope_se=fit.se)
    except InsufficientData as e:
        summary["slope"] = None
        summary["slope_note"] = str(e)
    out.write("queue.json", json.dumps(summary, sort_keys=True, indent=1) + "\n")


def cmd_experiment(cfg, out, given=frozenset()):
    if not cfg["plan"]:
        raise InvalidInput("--plan is required")
    try:
        with open(cfg["plan"]) as fh:
            kv = parse_kv(fh.read())
    except FileNotFoundError:
        raise InvalidInput(f"plan file not found: {cfg['plan']}")
    # --seed / --threads given on the command line or in --config win over the plan
    for k in ("seed", "threads"):
        if k in given:
            kv[k] = cfg[k]
    rep = run_plan(ExperimentPlan.from_dict(kv))
    out.files.extend(emit_report(rep, out.dir))


def cmd_render(cfg, out):
    if not cfg["tree"] or not cfg["points"]:
        raise InvalidInput("render needs --tree and --points")
    try:
        with open(cfg["tree"]) as fh:
            parent, H = read_tree_csv(fh.read())
        with open(cfg["points"]) as fh:
            pts = read_points_csv(fh.read())
    except FileNotFoundError as e:
        raise InvalidInput(f"file not found: {e.filename}")
    if len(pts) != len(parent):
        raise InvalidInput("tree and points sizes differ")
    out.write("tree.svg", render_tree_svg(NavTree(pts, parent, H)))


COMMANDS = {"sample": cmd_sample, "navigate": cmd_navigate, "tree": cmd_tree, "analytic": cmd_analytic,
            "regen": cmd_regen, "queue": cmd_queue, "experiment": cmd_experiment, "render": cmd_render}

RUNTIME = (ConditioningError, NavigationFailure, BoundaryExhausted, analytic.QuadratureFailure, OSError,
           InsufficientData, MemoryError)


def dispatch(argv=None) -> int:
    t0 = time.time()
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required: " + ", ".join(SUBCOMMANDS))
        cfg, given = resolve(args)
        out = Outputs(cfg["out"])
        if args.command == "experiment":
            cmd_experiment(cfg, out, given)
        else:
            COMMANDS[args.command](cfg, out)
        write_manifest(out, args.command, cfg, cfg["seed"], time.time() - t0)
        return 0
    except RUNTIME as e:
        print(f"ppnav: error[runtime]: {e}", file=sys.stderr)
        return 2
    except (InvalidInput, ValueError) as e:
        print(f"ppnav: error[input]: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
