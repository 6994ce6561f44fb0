"""Two independent 1-D quadrature schemes.

``gauss_kronrod`` wraps QUADPACK (scipy.integrate.quad, adaptive 21-point
Gauss-Kronrod).  ``adaptive_simpson`` is a plain recursive Simpson rule with
Richardson correction, written here so that every constant can be checked
by a scheme that shares no code with the first.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy import integrate


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 500


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    converged: bool
    scheme: str


DEFAULT = QuadratureSpec()


def gauss_kronrod(f, a, b, spec: QuadratureSpec = DEFAULT, points=None) -> QuadResult:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        val, err = integrate.quad(f, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                                  limit=spec.max_subdivisions, points=points)
    ok = not any(issubclass(w.category, integrate.IntegrationWarning) for w in caught)
    ok = ok and err <= max(spec.abs_tol, spec.rel_tol * abs(val)) * 10
    return QuadResult(float(val), float(err), bool(ok), "gauss-kronrod")


def adaptive_simpson(f, a, b, spec: QuadratureSpec = DEFAULT, max_depth: int = 60) -> QuadResult:
    """Adaptive Simpson with the classic |S2 - S1| / 15 acceptance test.

    The per-interval tolerance is split between halves; the returned error
    is the summed local estimate."""
    tol = max(spec.abs_tol, spec.rel_tol * 1e-2)
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    # explicit stack: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    err = 0.0
    ok = True
    evals = 3
    while stack:
        a_, b_, fa_, fm_, fb_, S, t, dep = stack.pop()
        m_ = 0.5 * (a_ + b_)
        lm, rm = 0.5 * (a_ + m_), 0.5 * (m_ + b_)
        flm, frm = f(lm), f(rm)
        evals += 2
        left = (m_ - a_) / 6.0 * (fa_ + 4 * flm + fm_)
        right = (b_ - m_) / 6.0 * (fm_ + 4 * frm + fb_)
        delta = left + right - S
        if abs(delta) <= 15 * t or dep >= max_depth:
            if dep >= max_depth:
                ok = False
            total += left + right + delta / 15.0
            err += abs(delta) / 15.0
        else:
            stack.append((a_, m_, fa_, flm, fm_, left, t / 2, dep + 1))
            stack.append((m_, b_, fm_, frm, fb_, right, t / 2, dep + 1))
        if evals > 5_000_000:
            ok = False
            break
    ok = ok and math.isfinite(total)
    return QuadResult(total, err, ok, "adaptive-simpson")
