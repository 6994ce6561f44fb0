"""Limit laws and constants of the small-world progress distributions.

Two families of functions live here.  The ones named after the statement
they implement (``progress_tail_constant``, ``q_limit_tail``,
``f_tilde_asymptote``) evaluate the printed closed forms.  The ``*_exact``
companions integrate the underlying Poisson void probabilities directly;
where the two disagree the companions are the ones simulation matches (see
the README for the factors involved).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .point_process import InvalidInput, geometry_constants
from .quadrature import DEFAULT, QuadResult, QuadratureSpec, adaptive_simpson, gauss_kronrod


class QuadratureFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class TailCurve:
    t: np.ndarray
    value: np.ndarray
    regime: str

    def check(self) -> bool:
        v = self.value
        return bool(np.all((v >= 0) & (v <= 1)) and np.all(np.diff(v) <= 1e-15))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        for a, b in zip(self.t.tolist(), self.value.tolist()):
            w.writerow([repr(a), repr(b)])
        return buf.getvalue()


def _need(res: QuadResult, what: str) -> float:
    if not res.converged:
        raise QuadratureFailure(f"{what}: quadrature did not converge (err {res.error:.3g})")
    return res.value


# ---------------------------------------------------------------------------
# beta > d: directed progress

def halfspace_mass(params: ModelParams, spec: QuadratureSpec = DEFAULT) -> QuadResult:
    """Lambda = int_{<y,e1> > 0} f(|y|) dy = (omega_{d-1} / 2) int_0^inf f(r) r^(d-1) dr."""
    p = params
    if p.beta <= p.d:
        raise InvalidInput("half-space neighbor mass is finite only for beta > d")
    g = lambda r: float(p.f(r)) * r ** (p.d - 1)
    t0 = p.t_sat
    a = gauss_kronrod(g, 0.0, t0, spec)
    b = gauss_kronrod(g, t0, math.inf, spec)
    return QuadResult(0.5 * p.omega * (a.value + b.value), 0.5 * p.omega * (a.error + b.error),
                      a.converged and b.converged, a.scheme)


def cos_power_integral(k: float, spec: QuadratureSpec = DEFAULT) -> QuadResult:
    """int_0^{pi/2} cos^k(theta) d theta."""
    return gauss_kronrod(lambda th: math.cos(th) ** k, 0.0, math.pi / 2, spec)


def progress_tail_constant(params: ModelParams, spec: QuadratureSpec = DEFAULT) -> float:
    """K = (2 c omega_{d-2} / (beta - d)) (1 - e^-Lambda)^-1 int_0^{pi/2} cos^(beta-d),
    the closed form as stated for the t^(d-beta) tail of the directed
    progress."""
    p = params
    if p.beta <= p.d:
        raise InvalidInput("progress tail constant needs beta > d")
    om2 = geometry_constants(p.d)[2]
    lam = _need(halfspace_mass(p, spec), "half-space mass")
    ang = _need(cos_power_integral(p.beta - p.d, spec), "cosine power integral")
    return 2 * p.c * om2 / (p.beta - p.d) / (1 - math.exp(-lam)) * ang


def halfspace_tail_mass(t: float, params: ModelParams, spec: QuadratureSpec = DEFAULT) -> float:
    """Lambda_t = int_{<y,e1> > t} f(|y|) dy in polar angle phi from e1:
    omega_{d-2} int_0^{pi/2} sin^(d-2) phi [M - m(t / cos phi)] d phi."""
    p = params
    om2 = geometry_constants(p.d)[2]
    mt = p.radial_mass_total
    if t <= 0:
        return 0.5 * p.omega * mt

    def g(phi):
        c = math.cos(phi)
        if c <= 0:
            return 0.0
        return math.sin(phi) ** (p.d - 2) * (mt - float(p.radial_mass(t / c)))

    return om2 * _need(gauss_kronrod(g, 0.0, math.pi / 2, spec), "half-space tail mass")


def directed_progress_tail(t, params: ModelParams, spec: QuadratureSpec = DEFAULT):
    """Exact first-step tail P(P_e1 > t) = (1 - e^-Lambda_t) / (1 - e^-Lambda_0)."""
    lam0 = halfspace_tail_mass(0.0, params, spec)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([-math.expm1(-halfspace_tail_mass(x, params, spec)) for x in ts])
    out /= -math.expm1(-lam0)
    return out if np.ndim(t) else float(out[0])


def progress_tail_level_exact(params: ModelParams, spec: QuadratureSpec = DEFAULT) -> float:
    """lim t^(beta-d) P(P_e1 > t) from the exact half-space integral:
    c omega_{d-2} / (beta - d) int_0^{pi/2} cos^(beta-d) sin^(d-2) / (1 - e^-Lambda)."""
    p = params
    if p.beta <= p.d:
        raise InvalidInput("needs beta > d")
    om2 = geometry_constants(p.d)[2]
    ang = _need(gauss_kronrod(lambda ph: math.cos(ph) ** (p.beta - p.d) * math.sin(ph) ** (p.d - 2),
                              0.0, math.pi / 2, spec), "angular integral")
    lam = halfspace_tail_mass(0.0, p, spec)
    return p.c * om2 / (p.beta - p.d) * ang / -math.expm1(-lam)


# ---------------------------------------------------------------------------
# d - 2 < beta < d: one-step contraction

def _check_loglog(params):
    if not (params.d - 2 < params.beta < params.d):
        raise InvalidInput("needs d - 2 < beta < d")


def q_limit_tail(s, params: ModelParams):
    """exp(-4 c omega_{d-2} s^2): the stated limit tail of |A(X)| / |X|^alpha."""
    _check_loglog(params)
    om2 = geometry_constants(params.d)[2]
    s = np.asarray(s, dtype=float)
    return np.exp(-4 * params.c * om2 * s ** 2)


def q_limit_tail_exact(s, params: ModelParams):
    """Planar limit tail of |A(X)| / |X|^(beta/2) from the void probability of
    the neighbor process in B(O, s |X|^(beta/2)): exp(-pi c s^2)."""
    _check_loglog(params)
    if params.d != 2:
        raise InvalidInput("exact q-limit implemented for d = 2")
    s = np.asarray(s, dtype=float)
    return np.exp(-math.pi * params.c * s ** 2)


def loglog_limit(d: int, beta: float) -> float:
    """-1 / ln(alpha), alpha = 1 - (d - beta) / 2."""
    if not (d - 2 < beta < d):
        raise InvalidInput("log-log regime needs d - 2 < beta < d")
    return -1.0 / math.log(1 - (d - beta) / 2)


def contraction_alpha(d: int, beta: float) -> float:
    if not (d - 2 < beta < d):
        raise InvalidInput("log-log regime needs d - 2 < beta < d")
    return 1 - (d - beta) / 2


# ---------------------------------------------------------------------------
# beta = d: scaled progress

def chord_points(theta, u):
    """Norms A <= B of the two points where the ray from O at angle theta
    meets the circle of centre e1 and radius 1 - u.

    Evaluated as B = cos(theta) + sqrt(rho^2 - sin^2 theta), A = u(2-u) / B
    (rho = 1 - u), algebraically equal to cos(theta)(1 -+ sqrt(1 - u(2-u)/cos^2 theta))
    without the cancellation."""
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    rho = 1.0 - u
    if np.any((u <= 0) | (u >= 1)):
        raise InvalidInput("u must lie in (0, 1)")
    s = np.sin(theta)
    if np.any((theta < 0) | (s >= rho)):
        raise InvalidInput("no intersection: need 0 <= theta < arcsin(1 - u)")
    root = np.sqrt((rho - s) * (rho + s))
    B = np.cos(theta) + root
    A = u * (2.0 - u) / B
    return A, B


def ball_integral(rho: float, d: int = 2, spec: QuadratureSpec = DEFAULT, scheme: str = "gk") -> QuadResult:
    """I(rho) = int_{B(O, rho)} |e1 - y|^-d dy for 0 < rho < 1.

    Polar coordinates centred at e1 remove the singularity: the ray at angle
    theta from -e1 crosses the ball between radii A and B, and the radial
    integral of r^-d r^(d-1) is ln(B/A).  The substitution
    sin(theta) = rho sin(phi) removes the square-root endpoint:

        I = omega_{d-2} int_0^{pi/2} (rho sin phi)^(d-2) ln(B/A)
                        rho cos phi / sqrt(1 - rho^2 sin^2 phi) dphi,

    with B = cos(theta) + rho cos(phi), A = (1 - rho^2) / B.
    """
    if not 0 < rho < 1:
        raise InvalidInput("rho must lie in (0, 1)")
    om2 = geometry_constants(d)[2]
    one_m = (1 - rho) * (1 + rho)

    def g(phi):
        sp, cp = math.sin(phi), math.cos(phi)
        st = rho * sp
        ct = math.sqrt((1 - st) * (1 + st))
        B = ct + rho * cp
        A = one_m / B
        return st ** (d - 2) * math.log(B / A) * rho * cp / ct

    fn = gauss_kronrod if scheme == "gk" else adaptive_simpson
    r = fn(g, 0.0, math.pi / 2, spec)
    return QuadResult(om2 * r.value, om2 * r.error, r.converged, r.scheme)


def ball_integral_chord_form(rho: float, d: int = 2, spec: QuadratureSpec = DEFAULT) -> float:
    """Same integral in the theta variable with the chord functions:
    omega_{d-2} int_0^{arcsin rho} sin^(d-2) theta ln(B(theta,u)/A(theta,u)) d theta."""
    om2 = geometry_constants(d)[2]
    u = 1 - rho

    def g(th):
        A, B = chord_points(th, u)
        return math.sin(th) ** (d - 2) * math.log(float(B) / float(A))

    ub = math.asin(rho)
    return om2 * _need(gauss_kronrod(lambda th: g(min(th, ub * (1 - 1e-15))), 0.0, ub, spec), "chord form")


def f_tilde_tail(s, params: ModelParams, spec: QuadratureSpec = DEFAULT, scheme: str = "gk"):
    """Limit tail of the scaled progress, 1 - exp(-c int_{B(O, e^-s)} |e1 - y|^-d dy)."""
    p = params
    if p.beta != p.d:
        raise InvalidInput("f-tilde is defined for beta = d")
    ss = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(ss <= 0):
        raise InvalidInput("s must be > 0")
    out = np.empty(len(ss))
    for i, x in enumerate(ss):
        I = _need(ball_integral(math.exp(-x), p.d, spec, scheme), "ball integral")
        out[i] = -math.expm1(-p.c * I)
    return out if np.ndim(s) else float(out[0])


def f_tilde_asymptote(s, params: ModelParams):
    """4 c omega_{d-2} e^(-2s), the stated large-s form."""
    om2 = geometry_constants(params.d)[2]
    return 4 * params.c * om2 * np.exp(-2 * np.asarray(s, dtype=float))


def f_tilde_asymptote_exact(s, params: ModelParams):
    """c pi_d e^(-d s): |e1 - y| -> 1 on the shrinking ball B(O, e^-s)."""
    pi_d = geometry_constants(params.d)[0]
    return params.c * pi_d * np.exp(-params.d * np.asarray(s, dtype=float))


def f_tilde_alt_form(s, params: ModelParams, spec: QuadratureSpec = DEFAULT) -> float:
    """The other printed expression, 1 - exp(-2 c omega_{d-2} int_0^{arcsin e^-s} ln(B/A)),
    kept for comparison (it omits the sin^(d-2) Jacobian and doubles the
    angular range)."""
    p = params
    om2 = geometry_constants(p.d)[2]
    rho = math.exp(-s)
    I2 = ball_integral_chord_form(rho, 2, spec) / 2.0   # int ln(B/A) d theta
    return -math.expm1(-2 * p.c * om2 * I2)


def _mu_tilde_cutoff(params: ModelParams, eps: float) -> float:
    """S with int_S^inf F~ <= eps, from F~(s) <= c pi_d e^(-ds) / (1 - e^-s)^d
    (on B(O, rho), |e1 - y| >= 1 - rho)."""
    p = params
    pi_d = geometry_constants(p.d)[0]
    S = 1.0
    while p.c * pi_d * math.exp(-p.d * S) / (p.d * (1 - math.exp(-S)) ** p.d) > eps:
        S += 0.25
    return S


@dataclass(frozen=True)
class MuTilde:
    value: float
    error: float
    cutoff: float
    tail_bound: float
    scheme: str
    converged: bool


def mu_tilde(params: ModelParams, spec: QuadratureSpec = DEFAULT, scheme: str = "gk") -> MuTilde:
    """mu~ = int_0^inf F~(s) ds, truncated where the exponential tail bound is
    below 1e-10.  ``scheme`` 'gk' or 'simpson' selects the outer (and inner)
    quadrature."""
    p = params
    if p.beta != p.d:
        raise InvalidInput("mu~ is defined for beta = d")
    eps = 1e-10
    S = _mu_tilde_cutoff(p, eps)
    inner = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-11, max_subdivisions=spec.max_subdivisions)

    def F(s):
        if s <= 0:
            return 1.0
        I = ball_integral(math.exp(-s), p.d, inner, scheme)
        return -math.expm1(-p.c * I.value)

    fn = gauss_kronrod if scheme == "gk" else adaptive_simpson
    # F~ has a log-type cusp at 0 (I(rho) ~ -pi ln(1 - rho)); split there
    a = fn(F, 0.0, 1.0, spec)
    b = fn(F, 1.0, S, spec)
    return MuTilde(a.value + b.value, a.error + b.error + eps, S, eps, a.scheme,
                   a.converged and b.converged)


def tail_curve(kind: str, params: ModelParams, grid) -> TailCurve:
    grid = np.asarray(grid, dtype=float)
    if kind == "progress-tail":
        v = np.asarray(directed_progress_tail(grid, params))
    elif kind == "q-limit":
        v = q_limit_tail(grid, params)
    elif kind == "q-limit-exact":
        v = q_limit_tail_exact(grid, params)
    elif kind == "f-tilde":
        v = np.asarray(f_tilde_tail(grid, params))
    else:
        raise InvalidInput(f"unknown curve {kind!r}")
    return TailCurve(grid, np.asarray(v, dtype=float), kind)
