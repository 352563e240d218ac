"""Exact constructions and tolerance-based incidence predicates in R^3.

Points are plain float ndarrays of shape (3,).  All residuals returned by the
predicates are normalized by the diameter (or an explicit scale) of the input
configuration, so tolerances are scale-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import GeometryError

__all__ = [
    "Tolerances",
    "Line3",
    "Plane3",
    "as_point",
    "diameter",
    "coplanarity_residual",
    "best_fit_plane",
    "intersect_lines",
    "intersect_line_plane",
    "intersect_planes",
    "project_through_line",
    "collinear_coordinates",
    "cross_ratio",
    "edge_ratio",
    "menelaus_multiratio",
    "verify_cox",
]

_UNIT_TOL = 1e-12


def as_point(p) -> np.ndarray:
    q = np.asarray(p, dtype=float)
    if q.shape != (3,):
        raise GeometryError(f"expected a 3-vector, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise GeometryError("non-finite coordinates")
    return q


@dataclass(frozen=True)
class Tolerances:
    """Relative tolerances used by predicates and solvers.

    incidence_rel bounds incidence residuals relative to the configuration
    diameter; genericity_rel is the minimum normalized tetrahedron volume
    below which a quadrilateral counts as non-skew.
    """

    incidence_rel: float = 1e-9
    genericity_rel: float = 1e-7

    def __post_init__(self):
        if self.incidence_rel <= 0 or self.genericity_rel <= 0:
            raise ValueError("tolerances must be strictly positive")


@dataclass(frozen=True)
class Line3:
    base: np.ndarray
    direction: np.ndarray  # unit vector

    @staticmethod
    def through(a, b) -> "Line3":
        a, b = as_point(a), as_point(b)
        d = b - a
        n = np.linalg.norm(d)
        if n == 0.0:
            raise GeometryError("cannot span a line by coincident points")
        return Line3(a, d / n)

    @staticmethod
    def from_direction(base, direction) -> "Line3":
        base, direction = as_point(base), as_point(direction)
        n = np.linalg.norm(direction)
        if n == 0.0:
            raise GeometryError("zero direction vector")
        return Line3(base, direction / n)

    def __post_init__(self):
        if abs(np.linalg.norm(self.direction) - 1.0) > _UNIT_TOL:
            raise GeometryError("line direction must be a unit vector")

    def point_at(self, t: float) -> np.ndarray:
        return self.base + t * self.direction

    def distance_to(self, p) -> float:
        v = as_point(p) - self.base
        return float(np.linalg.norm(v - (v @ self.direction) * self.direction))


@dataclass(frozen=True)
class Plane3:
    normal: np.ndarray  # unit vector
    offset: float  # signed distance from the origin: {x : <normal, x> = offset}

    @staticmethod
    def through(a, b, c) -> "Plane3":
        a, b, c = as_point(a), as_point(b), as_point(c)
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise GeometryError("collinear points do not span a plane")
        n = n / norm
        return Plane3(n, float(n @ a))

    @staticmethod
    def from_point_normal(point, normal) -> "Plane3":
        point, normal = as_point(point), as_point(normal)
        norm = np.linalg.norm(normal)
        if norm == 0.0:
            raise GeometryError("zero normal vector")
        n = normal / norm
        return Plane3(n, float(n @ point))

    def __post_init__(self):
        if abs(np.linalg.norm(self.normal) - 1.0) > _UNIT_TOL:
            raise GeometryError("plane normal must be a unit vector")

    def signed_distance(self, p) -> float:
        return float(self.normal @ as_point(p) - self.offset)


def diameter(points: np.ndarray) -> float:
    """Maximum pairwise distance of a point set given as an (n, 3) array."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) < 2:
        return 0.0
    d = 0.0
    for i, j in combinations(range(len(pts)), 2):
        d = max(d, float(np.linalg.norm(pts[i] - pts[j])))
    return d


def best_fit_plane(points: np.ndarray) -> Plane3:
    """Least-squares plane through a point cloud.

    Uses the centroid and the eigenvector of the smallest eigenvalue of the
    second-moment matrix.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    moments = centered.T @ centered
    _, vecs = np.linalg.eigh(moments)
    normal = vecs[:, 0]
    return Plane3.from_point_normal(centroid, normal)


def coplanarity_residual(points) -> float:
    """Max point-to-best-fit-plane distance divided by the set diameter.

    Zero iff the (at least four) points are coplanar.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) < 4:
        raise GeometryError("coplanarity test needs at least 4 points")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite coordinates")
    diam = diameter(pts)
    if diam == 0.0:
        raise GeometryError("all points coincide; coplanarity undefined")
    plane = best_fit_plane(pts)
    dist = max(abs(plane.signed_distance(p)) for p in pts)
    return dist / diam


def intersect_lines(l1: Line3, l2: Line3, genericity_rel: float = 1e-7):
    """Closest-approach midpoint of two lines plus a normalized gap residual.

    A residual close to zero certifies an actual intersection.  The gap is
    normalized by the distance of the base points to the midpoint (at least 1)
    so that callers can compare it against relative tolerances.
    """
    d1, d2 = l1.direction, l2.direction
    cross = np.cross(d1, d2)
    denom = float(cross @ cross)
    if denom < genericity_rel**2:
        raise GeometryError("lines are (numerically) parallel")
    w = l2.base - l1.base
    t1 = float(np.cross(w, d2) @ cross) / denom
    t2 = float(np.cross(w, d1) @ cross) / denom
    c1 = l1.point_at(t1)
    c2 = l2.point_at(t2)
    mid = 0.5 * (c1 + c2)
    gap = float(np.linalg.norm(c1 - c2))
    scale = max(
        1.0,
        float(np.linalg.norm(mid - l1.base)),
        float(np.linalg.norm(mid - l2.base)),
    )
    return mid, gap / scale


def intersect_line_plane(line: Line3, plane: Plane3) -> np.ndarray:
    denom = float(plane.normal @ line.direction)
    num = plane.offset - float(plane.normal @ line.base)
    if abs(denom) < _UNIT_TOL * max(1.0, abs(num)):
        raise GeometryError("line is parallel to the plane")
    return line.point_at(num / denom)


def intersect_planes(p1: Plane3, p2: Plane3, p3: Plane3) -> np.ndarray:
    a = np.stack([p1.normal, p2.normal, p3.normal])
    b = np.array([p1.offset, p2.offset, p3.offset])
    det = np.linalg.det(a)
    if abs(det) < 1e-14:
        raise GeometryError("planes do not meet in a single point")
    return np.linalg.solve(a, b)


def project_through_line(p, axis: Line3, target: Line3) -> np.ndarray:
    """Intersection of the plane spanned by p and axis with the target line."""
    p = as_point(p)
    v = p - axis.base
    normal = np.cross(axis.direction, v)
    norm = np.linalg.norm(normal)
    if norm < _UNIT_TOL * max(1.0, float(np.linalg.norm(v))):
        raise GeometryError("point lies on the projection axis")
    plane = Plane3.from_point_normal(p, normal / norm)
    return intersect_line_plane(target, plane)


def collinear_coordinates(points, incidence_rel: float = 1e-9) -> np.ndarray:
    """Signed coordinates of collinear points along their common line.

    Raises if the points are not collinear within the tolerance (relative to
    their diameter).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    diam = diameter(pts)
    if diam == 0.0:
        raise GeometryError("coincident points are not collinear input")
    # Span direction from the most separated pair for stability.
    best = (0, 1)
    dist = -1.0
    for i, j in combinations(range(len(pts)), 2):
        d = float(np.linalg.norm(pts[i] - pts[j]))
        if d > dist:
            dist, best = d, (i, j)
    direction = (pts[best[1]] - pts[best[0]]) / dist
    rel = pts - pts[best[0]]
    coords = rel @ direction
    off_line = rel - np.outer(coords, direction)
    if np.max(np.linalg.norm(off_line, axis=1)) > incidence_rel * diam * 10:
        raise GeometryError("points are not collinear within tolerance")
    return coords


def cross_ratio(a, b, c, d, incidence_rel: float = 1e-9) -> float:
    """Cross-ratio l(a,b)/l(b,c) * l(c,d)/l(d,a) of four collinear points."""
    ta, tb, tc, td = collinear_coordinates([a, b, c, d], incidence_rel)
    bc, da = tc - tb, ta - td
    if bc == 0.0 or da == 0.0:
        raise GeometryError("repeated points in cross-ratio")
    return float(((tb - ta) / bc) * ((td - tc) / da))


def edge_ratio(x_i, p, x_j, incidence_rel: float = 1e-9) -> float:
    """Ratio of directed lengths l(x_i, p) / l(p, x_j) for p on line <x_i, x_j>.

    The value is independent of the orientation chosen for the line.
    """
    ti, tp, tj = collinear_coordinates([x_i, p, x_j], incidence_rel)
    num, den = tp - ti, tj - tp
    if den == 0.0:
        raise GeometryError("ratio point coincides with an endpoint")
    return float(num / den)


def menelaus_multiratio(x, p, incidence_rel: float = 1e-9) -> float:
    """Multiratio prod l(x_i, p_i)/l(p_i, x_{i+1}) over a closed polygon.

    x and p are sequences of n+1 points each, with p[i] on the line through
    x[i] and x[i+1] (indices mod n+1).  The product equals (-1)^(n+1) exactly
    when the p's lie in a common hyperplane.
    """
    x = [as_point(q) for q in x]
    p = [as_point(q) for q in p]
    if len(x) != len(p):
        raise GeometryError("need one division point per polygon edge")
    m = 1.0
    for i in range(len(x)):
        m *= edge_ratio(x[i], p[i], x[(i + 1) % len(x)], incidence_rel)
    return m


def verify_cox(apex, planes, x_pairs, incidence_rel: float = 1e-9) -> float:
    """Normalized spread of the four triple-plane meets of a Cox configuration.

    planes: four planes through the apex.  x_pairs: dict mapping the six index
    pairs (i, j) with i < j to a point on the intersection line of planes i
    and j.  Builds the planes through (x_ij, x_jk, x_ik) for each index triple
    and returns the max pairwise distance of their four triple intersection
    points divided by the configuration diameter.  A value close to zero
    certifies the incidence theorem for this instance.
    """
    apex = as_point(apex)
    if len(planes) != 4:
        raise GeometryError("need exactly four planes")
    for pl in planes:
        if abs(pl.signed_distance(apex)) > incidence_rel * max(1.0, float(np.linalg.norm(apex))) * 10:
            raise GeometryError("planes are not concurrent at the apex")
    pts = {}
    for (i, j), q in x_pairs.items():
        if not (0 <= i < j <= 3):
            raise GeometryError(f"bad plane index pair {(i, j)}")
        pts[(i, j)] = as_point(q)
    if len(pts) != 6:
        raise GeometryError("need one point per plane pair")

    # work in the apex frame to avoid cancellation from large offsets
    def pair(i, j):
        return pts[(min(i, j), max(i, j))] - apex

    triple_planes = []
    for i, j, k in combinations(range(4), 3):
        triple_planes.append(Plane3.through(pair(i, j), pair(j, k), pair(i, k)))
    meets = [intersect_planes(*trio) for trio in combinations(triple_planes, 3)]
    spread = diameter(np.array(meets))
    scale = diameter(np.array([pair(i, j) for i, j in pts] + [np.zeros(3)]))
    if scale == 0.0:
        raise GeometryError("degenerate configuration")
    return spread / scale
