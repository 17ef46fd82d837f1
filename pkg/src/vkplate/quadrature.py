"""Quadrature on triangles, polygons (via ear clipping) and segments."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

MIN_DEGREE = 2
MAX_DEGREE = 12


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class TriangleRule:
    degree: int
    points: np.ndarray   # (n, 3) barycentric
    weights: np.ndarray  # (n,), sum to 1


@dataclass(frozen=True)
class PolygonQuadrature:
    cell: int
    triangles: np.ndarray  # (nt, 3) local vertex indices
    points: np.ndarray     # (n, 2) physical
    weights: np.ndarray    # (n,), sum to the cell area

    def integrate(self, values):
        return np.dot(self.weights, values)


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Collapsed (Duffy) Gauss product rule, exact for total degree `degree`.

    Gauss-Jacobi(1, 0) absorbs the collapse Jacobian in the first direction,
    so both directions need ceil((degree + 1) / 2) points.
    """
    if degree < 0:
        raise QuadratureError(f"negative degree {degree}")
    m = max(1, (degree + 2) // 2)
    s, ws = roots_jacobi(m, 1.0, 0.0)   # weight (1 - s) on [-1, 1]
    t, wt = leggauss(m)
    s = 0.5 * (s + 1.0)
    t = 0.5 * (t + 1.0)
    ws = ws / ws.sum()
    wt = wt / wt.sum()
    # (s, t) in [0,1]^2 -> x = s, y = (1 - s) t
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    x = S.ravel()
    y = ((1.0 - S) * T).ravel()
    bary = np.column_stack([1.0 - x - y, x, y])
    pts = np.ascontiguousarray(bary)
    w = W.ravel()
    pts.flags.writeable = False
    w.flags.writeable = False
    return TriangleRule(degree, pts, w)


def signed_area(ring):
    ring = np.asarray(ring, dtype=float)
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_cross(p1, p2, q1, q2):
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if d1 == d2 == d3 == d4 == 0.0:
        # collinear: overlap test on the dominant axis
        ax = 0 if abs(p2[0] - p1[0]) + abs(q2[0] - q1[0]) > 0 else 1
        lo1, hi1 = sorted((p1[ax], p2[ax]))
        lo2, hi2 = sorted((q1[ax], q2[ax]))
        return max(lo1, lo2) <= min(hi1, hi2)
    return d1 * d2 <= 0 and d3 * d4 <= 0


def is_simple(ring):
    """True if the closed ring has no repeated vertices and no crossing edges."""
    ring = np.asarray(ring, dtype=float)
    n = len(ring)
    if n < 3:
        return False
    if len(np.unique(ring, axis=0)) != n:
        return False
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            c, d = ring[j], ring[(j + 1) % n]
            if _segments_cross(a, b, c, d):
                return False
    return True


def _point_in_triangle(p, a, b, c, eps):
    return (_cross(a, b, p) >= -eps and _cross(b, c, p) >= -eps
            and _cross(c, a, p) >= -eps)


def triangulate_polygon(ring):
    """Ear-clip a simple counterclockwise ring into len(ring) - 2 triangles.

    Returns an (n - 2, 3) integer array of indices into `ring`.
    """
    ring = np.asarray(ring, dtype=float)
    n = len(ring)
    if n < 3:
        raise QuadratureError("polygon needs at least 3 vertices")
    if n == 3:
        return np.array([[0, 1, 2]])
    if not is_simple(ring):
        raise QuadratureError("self-intersecting polygon")
    area = signed_area(ring)
    if area <= 0:
        raise QuadratureError("polygon must be counterclockwise")
    eps = 1e-14 * abs(area)
    idx = list(range(n))
    tris = []
    guard = 0
    while len(idx) > 3:
        m = len(idx)
        clipped = False
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = ring[i0], ring[i1], ring[i2]
            if _cross(a, b, c) <= eps:
                continue
            if any(_point_in_triangle(ring[j], a, b, c, eps)
                   for j in idx if j not in (i0, i1, i2)):
                continue
            tris.append((i0, i1, i2))
            idx.pop(k)
            clipped = True
            break
        guard += 1
        if not clipped or guard > n:
            raise QuadratureError("ear clipping failed; polygon is degenerate")
    tris.append(tuple(idx))
    return np.array(tris, dtype=int)


def map_rule(tri_coords, rule):
    """Map a reference rule onto triangles.

    tri_coords has shape (..., 3, 2); returns points (..., nq, 2) and
    weights (..., nq) already scaled by triangle areas.
    """
    tri_coords = np.asarray(tri_coords, dtype=float)
    pts = np.einsum("qa,...ad->...qd", rule.points, tri_coords)
    e1 = tri_coords[..., 1, :] - tri_coords[..., 0, :]
    e2 = tri_coords[..., 2, :] - tri_coords[..., 0, :]
    area = 0.5 * (e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])
    w = area[..., None] * rule.weights
    return pts, w


def _check_degree(degree):
    if not MIN_DEGREE <= degree <= MAX_DEGREE:
        raise QuadratureError(
            f"unsupported degree {degree}; expected {MIN_DEGREE}..{MAX_DEGREE}")


def polygon_rule(ring, degree, cell=-1, triangles=None):
    """Quadrature exact for polynomials of total degree <= `degree` on a polygon."""
    _check_degree(degree)
    ring = np.asarray(ring, dtype=float)
    if triangles is None:
        triangles = triangulate_polygon(ring)
    pts, w = map_rule(ring[triangles], triangle_rule(degree))
    return PolygonQuadrature(cell, triangles, pts.reshape(-1, 2), w.ravel())


def edge_rule(a, b, npoints):
    """Gauss-Legendre points and weights on the segment a -> b."""
    if npoints < 1:
        raise QuadratureError("npoints must be >= 1")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t, w = leggauss(npoints)
    t = 0.5 * (t + 1.0)
    length = np.hypot(*(b - a))
    pts = a + t[:, None] * (b - a)
    return pts, 0.5 * w * length
