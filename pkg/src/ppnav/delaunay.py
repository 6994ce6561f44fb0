"""Planar Delaunay triangulation (incremental Bowyer-Watson with ghost
triangles) on robust orientation / in-circle predicates."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .point_process import InvalidInput, PointSet

GHOST = -1
_EPS = np.finfo(float).eps / 2  # unit roundoff
_ORIENT_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_INCIRCLE_BOUND = (10.0 + 96.0 * _EPS) * _EPS


class DegenerateInput(InvalidInput):
    pass


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def orient(a, b, c) -> int:
    """Sign of det[b - a, c - a]: +1 counter-clockwise, -1 clockwise, 0 collinear."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    cx, cy = float(c[0]), float(c[1])
    l = (ax - cx) * (by - cy)
    r = (ay - cy) * (bx - cx)
    det = l - r
    if abs(det) > _ORIENT_BOUND * (abs(l) + abs(r)):
        return _sign(det)
    A = [Fraction(v) for v in (ax, ay, bx, by, cx, cy)]
    return _sign((A[0] - A[4]) * (A[3] - A[5]) - (A[1] - A[5]) * (A[2] - A[4]))


def in_circle(a, b, c, p) -> int:
    """+1 if p is strictly inside the circle through a, b, c (given CCW),
    -1 outside, 0 cocircular.  For clockwise a, b, c the sign flips."""
    adx, ady = float(a[0]) - float(p[0]), float(a[1]) - float(p[1])
    bdx, bdy = float(b[0]) - float(p[0]), float(b[1]) - float(p[1])
    cdx, cdy = float(c[0]) - float(p[0]), float(c[1]) - float(p[1])
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    bc = bdx * cdy - cdx * bdy
    ca = cdx * ady - adx * cdy
    ab = adx * bdy - bdx * ady
    det = alift * bc + blift * ca + clift * ab
    perm = (alift * (abs(bdx * cdy) + abs(cdx * bdy))
            + blift * (abs(cdx * ady) + abs(adx * cdy))
            + clift * (abs(adx * bdy) + abs(bdx * ady)))
    if abs(det) > _INCIRCLE_BOUND * perm:
        return _sign(det)
    P = [Fraction(float(v)) for v in (*a[:2], *b[:2], *c[:2], *p[:2])]
    adx, ady = P[0] - P[6], P[1] - P[7]
    bdx, bdy = P[2] - P[6], P[3] - P[7]
    cdx, cdy = P[4] - P[6], P[5] - P[7]
    det = ((adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
           + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
           + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady))
    return _sign(det)


@dataclass(frozen=True)
class Triangulation:
    points: np.ndarray
    triangles: np.ndarray          # (T, 3) CCW, smallest index first, rows sorted
    indptr: np.ndarray             # CSR adjacency
    indices: np.ndarray
    hull: tuple                    # hull vertices, CCW

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "k"])
        w.writerows(self.triangles.tolist())
        return buf.getvalue()


def delaunay_neighbors(tri: Triangulation, i: int) -> np.ndarray:
    return tri.neighbors(i)


class _Builder:
    def __init__(self, pts):
        self.p = pts
        self.tri = {}        # id -> (a, b, c)
        self.edge = {}       # directed edge (u, v) -> id of triangle containing u->v
        self.next_id = 0
        self.last = None

    def add(self, a, b, c):
        # keep the ghost (if any) in last position
        if a == GHOST:
            a, b, c = b, c, a
        elif b == GHOST:
            a, b, c = c, a, b
        t = self.next_id
        self.next_id += 1
        self.tri[t] = (a, b, c)
        self.edge[(a, b)] = t
        self.edge[(b, c)] = t
        self.edge[(c, a)] = t
        if c != GHOST:
            self.last = t
        return t

    def remove(self, t):
        a, b, c = self.tri.pop(t)
        for e in ((a, b), (b, c), (c, a)):
            if self.edge.get(e) == t:
                del self.edge[e]

    def conflict(self, t, q) -> bool:
        a, b, c = self.tri[t]
        P = self.p
        if c == GHOST:
            o = orient(P[a], P[b], P[q])
            if o > 0:
                return True
            if o < 0:
                return False
            # collinear with the hull edge: conflict iff strictly inside the segment
            d1 = np.dot(P[q] - P[a], P[b] - P[a])
            d2 = np.dot(P[q] - P[b], P[a] - P[b])
            return d1 > 0 and d2 > 0
        return in_circle(P[a], P[b], P[c], P[q]) > 0

    def locate(self, q):
        """Walk from the last created real triangle to a triangle in conflict."""
        P = self.p
        t = self.last
        seen = 0
        limit = 4 * len(self.tri) + 10
        while seen < limit:
            seen += 1
            a, b, c = self.tri[t]
            if c == GHOST:
                return t if self.conflict(t, q) else None
            moved = False
            for u, v in ((a, b), (b, c), (c, a)):
                if orient(P[u], P[v], P[q]) < 0:
                    t = self.edge[(v, u)]
                    moved = True
                    break
            if not moved:
                return t
        return None

    def insert(self, q):
        seed = self.locate(q)
        if seed is None or not self.conflict(seed, q):
            # walk failed to land on a conflict (only in degenerate input); scan
            seed = next((t for t in self.tri if self.conflict(t, q)), None)
            if seed is None:
                return
        cavity = {seed}
        stack = [seed]
        while stack:
            t = stack.pop()
            a, b, c = self.tri[t]
            for u, v in ((a, b), (b, c), (c, a)):
                n = self.edge.get((v, u))
                if n is not None and n not in cavity and self.conflict(n, q):
                    cavity.add(n)
                    stack.append(n)
        boundary = []
        for t in cavity:
            a, b, c = self.tri[t]
            for u, v in ((a, b), (b, c), (c, a)):
                if self.edge.get((v, u)) not in cavity:
                    boundary.append((u, v))
        for t in cavity:
            self.remove(t)
        for u, v in boundary:
            self.add(u, v, q)

    def flip_cocircular(self, max_iter: int = 1000):
        """Make every cocircular quad use the diagonal through its lowest index."""
        P = self.p
        for _ in range(max_iter):
            flipped = False
            for t in list(self.tri):
                if t not in self.tri:
                    continue
                a, b, c = self.tri[t]
                if c == GHOST:
                    continue
                for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
                    n = self.edge.get((v, u))
                    if n is None:
                        continue
                    x = next(z for z in self.tri[n] if z not in (u, v))
                    if x == GHOST or in_circle(P[u], P[v], P[w], P[x]) != 0:
                        continue
                    if min(w, x) < min(u, v):
                        self.remove(t)
                        self.remove(n)
                        self.add(w, u, x)
                        self.add(x, v, w)
                        flipped = True
                        break
                if flipped:
                    break
            if not flipped:
                return


def triangulate(ps, order=None) -> Triangulation:
    """Delaunay triangulation of a planar point set.

    ``ps`` is a :class:`PointSet` or an ``(n, 2)`` array.  Exact duplicate
    coordinates are triangulated once (lowest index) and the duplicates get
    no neighbors.  ``order`` optionally fixes the insertion order.
    """
    pts = ps.points if isinstance(ps, PointSet) else np.asarray(ps, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidInput("Delaunay triangulation is planar (d = 2) only")
    n = len(pts)
    if n < 3:
        raise DegenerateInput(f"need at least 3 points, got {n}")
    seen = {}
    keep = []
    for i in range(n):
        key = (float(pts[i, 0]), float(pts[i, 1]))
        if key not in seen:
            seen[key] = i
            keep.append(i)
    ins = [i for i in (order if order is not None else range(n)) if seen[(float(pts[i, 0]), float(pts[i, 1]))] == i]
    if len(ins) < 3:
        raise DegenerateInput("fewer than 3 distinct points")
    a, b = ins[0], ins[1]
    c = next((k for k in ins[2:] if orient(pts[a], pts[b], pts[k]) != 0), None)
    if c is None:
        raise DegenerateInput("all points are collinear")
    if orient(pts[a], pts[b], pts[c]) < 0:
        a, b = b, a
    B = _Builder(pts)
    B.add(a, b, c)
    B.add(b, a, GHOST)
    B.add(c, b, GHOST)
    B.add(a, c, GHOST)
    for q in ins:
        if q not in (a, b, c):
            B.insert(q)
    B.flip_cocircular()

    real = [t for t in B.tri.values() if t[2] != GHOST]
    tris = []
    for t in real:
        k = t.index(min(t))
        tris.append(t[k:] + t[:k])
    tris = np.array(sorted(tris), dtype=np.int64).reshape(-1, 3)
    nb = [set() for _ in range(n)]
    for x, y, z in tris:
        nb[x].update((y, z))
        nb[y].update((x, z))
        nb[z].update((x, y))
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(s) for s in nb])
    indices = np.array([j for s in nb for j in sorted(s)], dtype=np.int64)
    # hull from ghost triangles: edge a->b with the ghost outside, so the
    # hull runs b -> a counter-clockwise
    nxt = {t[1]: t[0] for t in B.tri.values() if t[2] == GHOST}
    start = min(nxt)
    hull = [start]
    while nxt[hull[-1]] != start:
        hull.append(nxt[hull[-1]])
    return Triangulation(pts, tris, indptr, indices, tuple(hull))
