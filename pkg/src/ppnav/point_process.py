"""Homogeneous Poisson point processes in balls and annuli, Palm atoms and a
uniform-grid spatial index."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import stream


class InvalidInput(ValueError):
    """Input rejected by a precondition check (CLI exit code 1)."""


def geometry_constants(d: int) -> tuple[float, float, float]:
    """Return ``(pi_d, omega_{d-1}, omega_{d-2})``.

    ``pi_d`` is the volume of the unit ball of R^d and ``omega_{k}`` the area
    of the unit sphere S^k (so ``omega_0 = 2``).
    """
    if int(d) != d or d < 2:
        raise InvalidInput(f"dimension must be an integer >= 2, got {d!r}")
    pi_d = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    omega_dm1 = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    omega_dm2 = 2 * math.pi ** ((d - 1) / 2) / math.gamma((d - 1) / 2)
    return pi_d, omega_dm1, omega_dm2


@dataclass(frozen=True)
class Window:
    kind: str
    center: tuple
    inner: float
    outer: float

    def __post_init__(self):
        if self.kind not in ("ball", "annulus"):
            raise InvalidInput(f"unknown window kind {self.kind!r}")
        if not all(math.isfinite(v) for v in self.center):
            raise InvalidInput("window center must be finite")
        if not (math.isfinite(self.outer) and self.outer >= 0):
            raise InvalidInput(f"outer radius must be finite and >= 0, got {self.outer}")
        if self.inner < 0 or self.inner > self.outer:
            raise InvalidInput(f"need 0 <= inner <= outer, got {self.inner}, {self.outer}")
        if self.kind == "ball" and self.inner != 0:
            raise InvalidInput("ball windows have inner radius 0")

    @classmethod
    def ball(cls, radius: float, center=None, d: int = 2) -> "Window":
        c = tuple(float(x) for x in (center if center is not None else [0.0] * d))
        return cls("ball", c, 0.0, float(radius))

    @classmethod
    def annulus(cls, inner: float, outer: float, center=None, d: int = 2) -> "Window":
        c = tuple(float(x) for x in (center if center is not None else [0.0] * d))
        return cls("annulus", c, float(inner), float(outer))

    @classmethod
    def parse(cls, text: str, d: int = 2) -> "Window":
        """``ball:R`` or ``annulus:R_in:R_out`` (centred at the origin)."""
        parts = text.split(":")
        try:
            if parts[0] == "ball" and len(parts) == 2:
                return cls.ball(float(parts[1]), d=d)
            if parts[0] == "annulus" and len(parts) == 3:
                return cls.annulus(float(parts[1]), float(parts[2]), d=d)
        except ValueError as exc:
            raise InvalidInput(f"bad window spec {text!r}: {exc}") from None
        raise InvalidInput(f"bad window spec {text!r}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def volume(self) -> float:
        pi_d = geometry_constants(self.dim)[0]
        return pi_d * (self.outer ** self.dim - self.inner ** self.dim)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        inside = r < self.outer
        if self.kind == "annulus":
            inside &= r >= self.inner
        return inside


@dataclass(frozen=True)
class PointSet:
    """Realised point configuration.

    The first ``n_palm`` rows are distinguished Palm atoms (O, then X, ...)
    in insertion order; the remaining rows are the Poisson sample.  Row
    numbers are the stable point indices used everywhere for tie-breaking.
    """

    window: Window
    points: np.ndarray
    seed: int
    n_palm: int = 0
    _index: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float).reshape(-1, self.window.dim)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.window.dim

    def __len__(self) -> int:
        return len(self.points)

    def spatial_index(self, cell: float = 1.0) -> "SpatialIndex":
        # built once, then shared: the set is immutable
        for idx in self._index:
            if idx.cell == cell:
                return idx
        idx = SpatialIndex(self.points, cell)
        self._index.append(idx)
        return idx

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(self.dim)])
        for p in self.points:
            w.writerow([repr(float(v)) for v in p])
        return buf.getvalue()


def read_points_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise InvalidInput("empty points CSV")
    header = rows[0]
    if header != [f"x{i}" for i in range(len(header))]:
        raise InvalidInput(f"bad points CSV header {header}")
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))


def _uniform_directions(rng, n, d):
    if d == 2:
        a = rng.uniform(0.0, 2 * math.pi, n)
        return np.column_stack([np.cos(a), np.sin(a)])
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def uniform_in_annulus(rng, n: int, d: int, inner: float, outer: float) -> np.ndarray:
    """Polar inversion: radius via the inverse of r^d, direction isotropic."""
    u = rng.uniform(size=n)
    r = (inner ** d + u * (outer ** d - inner ** d)) ** (1.0 / d)
    return r[:, None] * _uniform_directions(rng, n, d)


def uniform_in_ball(rng, n: int, d: int, radius: float) -> np.ndarray:
    if d > 4:
        return uniform_in_annulus(rng, n, d, 0.0, radius)
    out = np.empty((0, d))
    accept = geometry_constants(d)[0] / 2 ** d
    while len(out) < n:
        m = int((n - len(out)) / accept * 1.1) + 8
        cand = rng.uniform(-radius, radius, (m, d))
        cand = cand[np.einsum("ij,ij->i", cand, cand) < radius * radius]
        out = np.vstack([out, cand])
    return out[:n]


def sample_ppp(window: Window, dim: int, seed: int) -> PointSet:
    """Unit-intensity PPP restricted to ``window``."""
    if dim < 2:
        raise InvalidInput(f"dimension must be >= 2, got {dim}")
    if window.dim != dim:
        raise InvalidInput(f"window dimension {window.dim} != {dim}")
    rng = stream(seed, "ppp")
    n = int(rng.poisson(window.volume()))
    if window.kind == "ball":
        pts = uniform_in_ball(rng, n, dim, window.outer)
    else:
        pts = uniform_in_annulus(rng, n, dim, window.inner, window.outer)
    return PointSet(window, pts + np.asarray(window.center), seed)


def palm_add(ps: PointSet, extra) -> PointSet:
    """Add distinguished atoms (after any existing ones, before the sample)."""
    extra = np.atleast_2d(np.asarray(extra, dtype=float))
    if extra.size == 0:
        return ps
    if extra.shape[1] != ps.dim:
        raise InvalidInput("Palm atom dimension mismatch")
    at_origin = np.all(extra == 0.0, axis=1)
    if not np.all(at_origin | ps.window.contains(extra)):
        raise InvalidInput("Palm atoms must lie in the window or at the origin")
    pts = np.vstack([ps.points[: ps.n_palm], extra, ps.points[ps.n_palm:]])
    return PointSet(ps.window, pts, ps.seed, ps.n_palm + len(extra))


class SpatialIndex:
    """Bucket grid (CSR layout) over a static point array."""

    def __init__(self, points, cell: float = 1.0):
        pts = np.asarray(points, dtype=float)
        self.points = pts
        self.cell = float(cell)
        self.d = pts.shape[1] if pts.ndim == 2 else 2
        n = len(pts)
        if n:
            self.lo = pts.min(axis=0)
            self.shape = np.floor((pts.max(axis=0) - self.lo) / cell).astype(np.int64) + 1
        else:
            self.lo = np.zeros(self.d)
            self.shape = np.ones(self.d, dtype=np.int64)
        coords = self._cell_of(pts) if n else np.zeros((0, self.d), dtype=np.int64)
        flat = np.ravel_multi_index(coords.T, self.shape) if n else np.zeros(0, dtype=np.int64)
        self.order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=int(np.prod(self.shape)))
        self.start = np.concatenate([[0], np.cumsum(counts)])
        self.counts = counts.reshape(tuple(self.shape))
        self._prefix = None

    def _cell_of(self, pts):
        c = np.floor((np.atleast_2d(pts) - self.lo) / self.cell).astype(np.int64)
        return np.clip(c, 0, self.shape - 1)

    def _box(self, lo_cell, hi_cell) -> np.ndarray:
        """Indices of points in the inclusive cell box (unsorted)."""
        lo_cell = np.maximum(lo_cell, 0)
        hi_cell = np.minimum(hi_cell, self.shape - 1)
        if np.any(hi_cell < lo_cell):
            return np.zeros(0, dtype=np.int64)
        ranges = [np.arange(a, b + 1) for a, b in zip(lo_cell, hi_cell)]
        grid = np.meshgrid(*ranges, indexing="ij")
        flat = np.ravel_multi_index([g.ravel() for g in grid], self.shape)
        s, e = self.start[flat], self.start[flat + 1]
        if len(s) == 0:
            return np.zeros(0, dtype=np.int64)
        tot = int((e - s).sum())
        if tot == 0:
            return np.zeros(0, dtype=np.int64)
        pos = np.repeat(s - np.concatenate([[0], np.cumsum(e - s)[:-1]]), e - s) + np.arange(tot)
        return self.order[pos]

    def query_ball(self, center, r: float) -> np.ndarray:
        """Indices with ``|P - center| < r`` in ascending order."""
        center = np.asarray(center, dtype=float)
        if r <= 0 or len(self.points) == 0:
            return np.zeros(0, dtype=np.int64)
        lo = np.floor((center - r - self.lo) / self.cell).astype(np.int64)
        hi = np.floor((center + r - self.lo) / self.cell).astype(np.int64)
        cand = self._box(lo, hi)
        d2 = np.einsum("ij,ij->i", self.points[cand] - center, self.points[cand] - center)
        return np.sort(cand[d2 < r * r])

    def nearest(self, center, accept=None, exclude=None):
        """Nearest point to ``center`` among those passing ``accept`` (a
        boolean mask function on index arrays).  Ties go to the lowest index.
        Returns ``None`` when no point qualifies."""
        center = np.asarray(center, dtype=float)
        n = len(self.points)
        if n == 0:
            return None
        c0 = self._cell_of(center)[0]
        ring = 0
        best, best_d2 = None, math.inf
        max_ring = int(self.shape.max()) + 1
        while ring <= max_ring:
            # points of the current Chebyshev ring of cells are at distance
            # >= (ring - 1) * cell from the centre's cell boundary
            if best is not None and ((ring - 1) * self.cell) ** 2 > best_d2:
                break
            cand = self._ring(c0, ring)
            if len(cand):
                if exclude is not None:
                    cand = cand[cand != exclude]
                if accept is not None and len(cand):
                    cand = cand[accept(cand)]
                if len(cand):
                    diff = self.points[cand] - center
                    d2 = np.einsum("ij,ij->i", diff, diff)
                    k = np.lexsort((cand, d2))[0]
                    if d2[k] < best_d2 or (d2[k] == best_d2 and cand[k] < best):
                        best, best_d2 = int(cand[k]), float(d2[k])
            ring += 1
        return best

    def _ring(self, c0, ring):
        if ring == 0:
            return self._box(c0, c0)
        inner = self._box(c0 - ring + 1, c0 + ring - 1)
        outer = self._box(c0 - ring, c0 + ring)
        return np.setdiff1d(outer, inner, assume_unique=True)

    def box_count(self, lo_cell, hi_cell) -> np.ndarray:
        """Vectorised number of points in inclusive cell boxes (d=2)."""
        if self._prefix is None:
            p = np.zeros((self.shape[0] + 1, self.shape[1] + 1), dtype=np.int64)
            p[1:, 1:] = self.counts.cumsum(0).cumsum(1)
            self._prefix = p
        lo = np.clip(lo_cell, 0, self.shape)
        hi = np.clip(np.asarray(hi_cell) + 1, 0, self.shape)
        hi = np.maximum(hi, lo)
        p = self._prefix
        return (p[hi[..., 0], hi[..., 1]] - p[lo[..., 0], hi[..., 1]]
                - p[hi[..., 0], lo[..., 1]] + p[lo[..., 0], lo[..., 1]])
