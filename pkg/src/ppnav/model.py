"""Edge-probability model of the small-world graph and the Poisson samplers
built on it.

``f(t) = min(1, c t^-beta)``.  The radial mass

    m(r) = int_0^r f(s) s^(d-1) ds

has a closed form and a closed-form inverse, which gives exact polar
inverse-transform sampling of a PPP of intensity ``f(|x - X|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .point_process import InvalidInput, geometry_constants, _uniform_directions

# f below this is invisible in 1 - f (1 - 2**-54 rounds to 1.0)
_F_INVISIBLE = 2.0 ** -56


class ConditioningError(RuntimeError):
    """Rejection resampling of a neighbor set hit its round cap."""

    def __init__(self, msg, rounds=None, where=None):
        super().__init__(msg)
        self.rounds = rounds
        self.where = where


@dataclass(frozen=True)
class ModelParams:
    d: int = 2
    beta: float = 5.0
    c: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise InvalidInput(f"d must be an integer >= 2, got {self.d}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise InvalidInput(f"beta must be > 0, got {self.beta}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise InvalidInput(f"c must be > 0, got {self.c}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "c", float(self.c))

    # -- f and its radial mass ------------------------------------------
    @property
    def t_sat(self) -> float:
        """Radius below which f == 1."""
        return self.c ** (1.0 / self.beta)

    def f(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            v = self.c * np.power(t, -self.beta)
        return np.minimum(1.0, v)

    @property
    def regime(self) -> str:
        d, b = self.d, self.beta
        if b > d + 2:
            return "linear"
        if b == d:
            return "log"
        if d - 2 < b < d:
            return "loglog"
        if d < b <= d + 1:
            return "no-theory"
        return "other"

    def radial_mass(self, r):
        """m(r) (vectorised, r >= 0)."""
        r = np.asarray(r, dtype=float)
        d, b, c, t0 = self.d, self.beta, self.c, self.t_sat
        inner = np.minimum(r, t0) ** d / d
        rr = np.maximum(r, t0)
        if b == d:
            outer = c * np.log(rr / t0)
        else:
            with np.errstate(over="ignore", divide="ignore"):
                outer = c * (rr ** (d - b) - t0 ** (d - b)) / (d - b)
        return inner + outer

    @property
    def radial_mass_total(self) -> float:
        if self.beta <= self.d:
            return math.inf
        d, b, t0 = self.d, self.beta, self.t_sat
        return t0 ** d * (1.0 / d + 1.0 / (b - d))

    def radial_mass_inv(self, m):
        m = np.asarray(m, dtype=float)
        d, b, c, t0 = self.d, self.beta, self.c, self.t_sat
        m0 = t0 ** d / d
        low = np.power(np.maximum(d * m, 0.0), 1.0 / d)
        extra = np.maximum(m - m0, 0.0)
        if b == d:
            high = t0 * np.exp(extra / c)
        else:
            base = t0 ** (d - b) + (d - b) * extra / c
            with np.errstate(divide="ignore", invalid="ignore"):
                high = np.where(base > 0, np.power(np.maximum(base, 0.0), 1.0 / (d - b)), np.inf)
        return np.where(m <= m0, low, high)

    @property
    def omega(self) -> float:
        """Area of the unit sphere S^(d-1)."""
        return geometry_constants(self.d)[1]

    def ball_mass(self, r) -> float:
        """int_{B(0,r)} f(|x|) dx."""
        return self.omega * float(self.radial_mass(r))

    def tail_radius(self, eps: float = 1e-12) -> float:
        """Radius beyond which the neighbor mass int_{|x|>r} f is < eps (beta > d)."""
        if self.beta <= self.d:
            return math.inf
        d, b, c = self.d, self.beta, self.c
        r = (self.omega * c / ((b - d) * eps)) ** (1.0 / (b - d))
        return max(r, self.t_sat)

    @property
    def relevance_radius(self) -> float:
        """Beyond this distance 1 - f(t) == 1.0 exactly in double precision."""
        return (self.c / _F_INVISIBLE) ** (1.0 / self.beta)


def sample_around(rng, params: ModelParams, center, r_max: float = math.inf,
                  e1=None, r_min: float = 0.0):
    """PPP of intensity ``f(|x - center|)`` on ``r_min <= |x - center| < r_max``.

    With ``e1`` given, only the open half-space ``<x - center, e1> > 0`` is
    sampled (half the mass, directions reflected into the hemisphere).
    Returns an ``(n, d)`` array.
    """
    d = params.d
    m_lo = float(params.radial_mass(r_min)) if r_min > 0 else 0.0
    m_hi = float(params.radial_mass(r_max)) if math.isfinite(r_max) else params.radial_mass_total
    if not math.isfinite(m_hi):
        raise ValueError("infinite neighbor mass: r_max must be finite when beta <= d")
    frac = 0.5 if e1 is not None else 1.0
    lam = params.omega * frac * (m_hi - m_lo)
    n = int(rng.poisson(lam)) if lam > 0 else 0
    if n == 0:
        return np.zeros((0, d))
    r = params.radial_mass_inv(m_lo + rng.uniform(size=n) * (m_hi - m_lo))
    r = np.minimum(r, r_max)
    u = _uniform_directions(rng, n, d)
    if e1 is not None:
        e1 = np.asarray(e1, dtype=float)
        s = u @ e1
        u = u - 2.0 * np.minimum(s, 0.0)[:, None] * e1
    return np.asarray(center, dtype=float) + r[:, None] * u


def farthest_radius(rng, params: ModelParams, e1=None) -> float:
    """rho = max distance to the centre of a PPP of intensity f(|x|) (beta > d).

    P(rho <= t) = exp(-T(t)), T(t) the mass beyond t; rho = 0 when the
    process is empty.  Sampled by inversion.
    """
    frac = 0.5 if e1 is not None else 1.0
    tot = params.omega * frac * params.radial_mass_total
    u = rng.uniform()
    # P(rho = 0) = exp(-tot)
    if u <= math.exp(-tot):
        return 0.0
    # exp(-T(t)) = u  ->  T(t) = -ln u -> m(t) = m_tot - (-ln u)/(omega frac)
    m = params.radial_mass_total - (-math.log(u)) / (params.omega * frac)
    return float(params.radial_mass_inv(max(m, 0.0)))


def _shell_edges(x: float, params: ModelParams):
    """Norm shells [s_i, s_{i+1}) covering [0, x): doubling away from O, then
    halving the gap to the sphere |y| = x; the last shell ends at x."""
    t0 = params.t_sat
    edges = [0.0]
    s = min(1.0, x / 2)
    while s < x / 2:
        edges.append(s)
        s *= 2
    gap = x - edges[-1]
    while gap / 2 > max(t0, 1.0):
        gap /= 2
        edges.append(x - gap)
    edges.append(x)
    return edges


def first_arrival(rng, params: ModelParams, X, weight=None, exclude_O: bool = True):
    """Smallest-norm point of a PPP of intensity ``f(|y - X|) * weight(y)`` on
    ``B(O, |X|)`` (``weight`` <= 1, vectorised; ``None`` means 1).

    Points are generated shell by shell in |y| from a dominating intensity
    that depends on |y| only, ``f((|X| - s_hi)^+)`` on the shell
    [s_lo, s_hi), and thinned; the first accepted point in norm order is the
    answer.  Returns ``None`` if the process is empty.  Works for every beta
    but is the efficient choice for beta <= d, where the neighbor mass is
    spread over the whole ball.
    """
    X = np.asarray(X, dtype=float)
    x = float(np.linalg.norm(X))
    d = params.d
    pi_d = geometry_constants(d)[0]
    edges = _shell_edges(x, params)
    for lo, hi in zip(edges[:-1], edges[1:]):
        bound = float(params.f(max(x - hi, 0.0)))
        lam = pi_d * (hi ** d - lo ** d) * bound
        n = int(rng.poisson(lam))
        if n == 0:
            continue
        u = rng.uniform(size=n)
        r = (lo ** d + u * (hi ** d - lo ** d)) ** (1.0 / d)
        order = np.argsort(r, kind="stable")
        r = r[order]
        pts = r[:, None] * _uniform_directions(rng, n, d)
        acc = params.f(np.linalg.norm(pts - X, axis=1)) / bound
        if weight is not None:
            acc = acc * weight(pts)
        hit = np.flatnonzero(rng.uniform(size=n) < acc)
        if len(hit):
            return pts[hit[0]]
    return None
