"""Crisscrossed quadrilaterals and the extension of A-surfaces by crosses.

A cross on a skew quadrilateral is encoded by one scalar per corner (unique
up to a common factor): the cross vertex on edge (i, i+1) is the weighted
point (r_i x_i + r_{i+1} x_{i+1}) / (r_i + r_{i+1}) and the centre is the
weighted mean of all four corners.  Extending a whole surface amounts to one
scalar per lattice vertex, subject to a tangency condition across each
interior edge that is tested both geometrically (a four-point coplanarity)
and algebraically (a ratio identity against the parallel invariant).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anet import ANet, parallel_invariants, net_scale
from .errors import GenericityError, GeometryError, SolverError
from .geometry import (
    Line3,
    Plane3,
    Tolerances,
    best_fit_plane,
    coplanarity_residual,
    diameter,
    edge_ratio,
    intersect_lines,
    project_through_line,
)
from .lattice import ScalarField

__all__ = [
    "CrisscrossedQuad",
    "Cross",
    "HyperbolicNet",
    "cross_from_rho",
    "classify_cross",
    "same_hyperboloid",
    "c1_residual_geometric",
    "c1_residual_algebraic",
    "propagate_cross_vertex",
    "rho_evolve",
    "solve_rho_cauchy",
    "extendability_check",
    "c1_sweep",
    "quad_at",
    "geometric_parallel_invariant",
    "rho_fields_equal",
]

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class CrisscrossedQuad:
    """Skew quadrilateral corners (cyclic) with one cross scalar per corner."""

    corners: np.ndarray  # (4, 3)
    rho: np.ndarray  # (4,)

    def __post_init__(self):
        object.__setattr__(self, "corners", np.asarray(self.corners, dtype=float).reshape(4, 3))
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float).reshape(4))
        if np.any(self.rho == 0.0):
            raise GeometryError("cross scalars must be nonzero")
        top = float(np.abs(self.rho).max())
        for i in range(4):
            if abs(self.rho[i] + self.rho[(i + 1) % 4]) <= _SUM_TOL * top:
                raise GeometryError(
                    f"scalars at corners {i} and {(i + 1) % 4} cancel; cross vertex at infinity"
                )

    def skew_volume(self) -> float:
        """Spanned volume over the volume of an orthogonal frame with the
        same edge lengths; matches the net-level genericity measure."""
        p0, p1, p2, p3 = self.corners
        u, v, w = p1 - p0, p2 - p0, p3 - p0
        det = float(np.cross(u, v) @ w)
        frame = float(np.linalg.norm(u) * np.linalg.norm(v) * np.linalg.norm(w))
        return abs(det) / frame if frame > 0 else 0.0

    def edge_vertex(self, k: int) -> np.ndarray:
        """Cross vertex on edge (k, k+1 mod 4)."""
        i, j = k % 4, (k + 1) % 4
        ri, rj = self.rho[i], self.rho[j]
        return (ri * self.corners[i] + rj * self.corners[j]) / (ri + rj)


@dataclass(frozen=True)
class Cross:
    vertices: np.ndarray  # (4, 3): the points on edges 01, 12, 23, 30
    centre: np.ndarray
    plane: Plane3
    internal_flags: tuple

    def __post_init__(self):
        if sum(self.internal_flags) % 2 != 0:
            raise GeometryError("number of internal cross vertices must be even")


def cross_from_rho(quad: CrisscrossedQuad, genericity_rel: float = 1e-7) -> Cross:
    """Cross determined by the corner scalars of a crisscrossed quadrilateral."""
    if quad.skew_volume() < genericity_rel:
        raise GenericityError("quadrilateral is not skew")
    total = float(quad.rho.sum())
    if abs(total) <= _SUM_TOL * float(np.abs(quad.rho).max()):
        raise GeometryError("scalar sum vanishes; cross centre at infinity")
    verts = np.array([quad.edge_vertex(k) for k in range(4)])
    centre = (quad.rho[:, None] * quad.corners).sum(axis=0) / total
    plane = best_fit_plane(verts)
    signs = np.sign(quad.rho)
    flags = tuple(bool(signs[k] == signs[(k + 1) % 4]) for k in range(4))
    return Cross(verts, centre, plane, flags)


def classify_cross(rho):
    """Classify the cross by its scalars and flag the paraboloid case.

    Returns (kind, is_paraboloid) with kind one of 'internal' (all scalars of
    one sign), 'restrictable' (positive product) or 'non_restrictable'.
    """
    r = np.asarray(rho, dtype=float).reshape(4)
    if np.any(r == 0.0):
        raise GeometryError("cross scalars must be nonzero")
    shape_ratio = (r[0] * r[2]) / (r[1] * r[3])
    paraboloid = abs(shape_ratio - 1.0) <= 1e-10
    signs = np.sign(r)
    if np.all(signs == signs[0]):
        kind = "internal"
    elif r[0] * r[1] * r[2] * r[3] > 0:
        kind = "restrictable"
    else:
        kind = "non_restrictable"
    return kind, paraboloid


def same_hyperboloid(rho_a, rho_b, rel_tol: float = 1e-10) -> bool:
    """Whether two scalar quadruples describe the same adapted hyperboloid.

    The shape ratio r1 r3 / (r2 r4) is the complete invariant.
    """
    a = np.asarray(rho_a, dtype=float).reshape(4)
    b = np.asarray(rho_b, dtype=float).reshape(4)
    if np.any(a == 0.0) or np.any(b == 0.0):
        raise GeometryError("cross scalars must be nonzero")
    qa = (a[0] * a[2]) / (a[1] * a[3])
    qb = (b[0] * b[2]) / (b[1] * b[3])
    return abs(qa - qb) <= rel_tol * max(abs(qa), abs(qb))


def _shared_edge(left: CrisscrossedQuad, right: CrisscrossedQuad):
    """Indices (k, l) of the shared edge in each quad, or None."""
    scale = max(diameter(left.corners), diameter(right.corners))
    tol = 1e-9 * scale

    def same(p, q):
        return float(np.linalg.norm(p - q)) <= tol

    for k in range(4):
        a, b = left.corners[k], left.corners[(k + 1) % 4]
        for l in range(4):
            c, d = right.corners[l], right.corners[(l + 1) % 4]
            if (same(a, c) and same(b, d)) or (same(a, d) and same(b, c)):
                return k, l
    return None


def c1_residual_geometric(left: CrisscrossedQuad, right: CrisscrossedQuad,
                          tol: Tolerances = Tolerances()) -> float:
    """Tangency test for crosses on edge-adjacent quadrilaterals.

    The adapted surfaces are tangent along the common extended edge exactly
    when the two far cross vertices and the shared edge endpoints are
    coplanar; the normalized coplanarity residual of those four points is
    returned.  Requires the two crosses to share their vertex on the common
    edge within tolerance.
    """
    pair = _shared_edge(left, right)
    if pair is None:
        raise GeometryError("quadrilaterals do not share an edge")
    k, l = pair
    scale = max(diameter(left.corners), diameter(right.corners))
    shared_left = left.edge_vertex(k)
    shared_right = right.edge_vertex(l)
    if np.linalg.norm(shared_left - shared_right) > 1e-6 * scale:
        raise GeometryError("crosses do not share the vertex on the common edge")
    far_left = left.edge_vertex(k + 2)
    far_right = right.edge_vertex(l + 2)
    a, b = left.corners[k], left.corners[(k + 1) % 4]
    return coplanarity_residual(np.array([far_left, a, b, far_right]))


def c1_residual_algebraic(rho1, rho2, rho3, rho4, rho5, rho6, invariant) -> float:
    """Relative defect of the ratio identity r3 r6 / (r1 r4) = invariant.

    Labels follow the six vertices of two quadrilaterals (x1, x2, x5, x6) and
    (x2, x3, x4, x5) glued along the edge (x2, x5).
    """
    for v in (rho1, rho2, rho3, rho4, rho5, rho6):
        if v == 0.0:
            raise GeometryError("cross scalars must be nonzero")
    if invariant == 0.0:
        raise GeometryError("parallel invariant must be nonzero")
    lhs = (rho3 * rho6) / (rho1 * rho4)
    return abs(lhs - invariant) / abs(invariant)


def propagate_cross_vertex(known_far, shared_a, shared_b, target_a, target_b) -> np.ndarray:
    """Far cross vertex of the neighbouring quadrilateral under tangency.

    Projects the known far vertex through the shared edge line onto the
    neighbour's opposite extended edge.  The result does not involve the
    shared cross vertex at all.
    """
    axis = Line3.through(shared_a, shared_b)
    target = Line3.through(target_a, target_b)
    return project_through_line(known_far, axis, target)


def rho_evolve(rho, rho_j, rho_ii, a_ij, a_ij_i) -> float:
    """Scalar two-steps-along-i, one-along-j: r_iij = r_ii r_j / (r a a_i)."""
    denom = rho * a_ij * a_ij_i
    if denom == 0.0:
        raise SolverError("zero scalar or coefficient in evolution step")
    return rho_ii * rho_j / denom


def quad_at(net: ANet, rho, cell) -> CrisscrossedQuad:
    """Crisscrossed quadrilateral of the lattice cell anchored at `cell`."""
    z1, z2 = cell
    w = net.window
    xv = net.vertices.values
    rv = rho.values if isinstance(rho, ScalarField) else np.asarray(rho)
    corners = np.array([
        xv[w.offset((z1, z2))],
        xv[w.offset((z1 + 1, z2))],
        xv[w.offset((z1 + 1, z2 + 1))],
        xv[w.offset((z1, z2 + 1))],
    ])
    scalars = np.array([
        rv[w.offset((z1, z2))],
        rv[w.offset((z1 + 1, z2))],
        rv[w.offset((z1 + 1, z2 + 1))],
        rv[w.offset((z1, z2 + 1))],
    ])
    return CrisscrossedQuad(corners, scalars)


def geometric_parallel_invariant(net: ANet, cell, direction: int) -> float:
    """Parallel invariant of two edge-adjacent cells from vertex geometry only.

    The shared-edge line of the two quadrilaterals meets the two star
    diagonals of the shared corners; the product of the corresponding ratios
    of directed lengths reproduces the coefficient product a a~ without any
    reference to a normal field.
    """
    z1, z2 = cell
    w = net.window
    xv = net.vertices.values

    def v(i, j):
        return xv[w.offset((i, j))]

    if direction == 1:
        x1, x2, x3 = v(z1, z2), v(z1 + 1, z2), v(z1 + 2, z2)
        x6, x5, x4 = v(z1, z2 + 1), v(z1 + 1, z2 + 1), v(z1 + 2, z2 + 1)
    elif direction == 2:
        x1, x2, x3 = v(z1, z2), v(z1, z2 + 1), v(z1, z2 + 2)
        x6, x5, x4 = v(z1 + 1, z2), v(z1 + 1, z2 + 1), v(z1 + 1, z2 + 2)
    else:
        raise ValueError("direction must be 1 or 2")
    shared = Line3.through(x2, x5)
    r, gap_r = intersect_lines(shared, Line3.through(x1, x3))
    s, gap_s = intersect_lines(shared, Line3.through(x4, x6))
    scale = diameter(np.array([x1, x2, x3, x4, x5, x6]))
    if max(gap_r, gap_s) > 1e-6 * max(1.0, scale):
        raise GeometryError("star diagonals do not meet the shared edge line")
    l_r = edge_ratio(x1, r, x3)
    l_s = edge_ratio(x4, s, x6)
    return l_r * l_s


@dataclass
class HyperbolicNet:
    """A-surface with an extension scalar per vertex and its health status."""

    surface: ANet
    rho: ScalarField
    status: str = "invalid"
    offending: list = field(default_factory=list)

    def scale(self) -> float:
        return net_scale(self.surface)


def rho_fields_equal(a: ScalarField, b: ScalarField, rel_tol: float = 1e-10) -> bool:
    """Geometric equality: the two fields differ by one global nonzero factor."""
    if a.window != b.window:
        return False
    av, bv = a.values.ravel(), b.values.ravel()
    if np.any(bv == 0.0) or np.any(av == 0.0):
        raise GeometryError("scalars must be nonzero")
    ratios = av / bv
    ref = ratios.flat[0]
    return bool(np.all(np.abs(ratios - ref) <= rel_tol * abs(ref)))


def c1_sweep(net: ANet, rho: ScalarField, tol: Tolerances = Tolerances(),
             algebraic_tol: float = 1e-9):
    """Evaluate both tangency tests across every interior edge.

    Returns a dict with the max residuals, the list of failing cell pairs and
    whether the two tests ever disagree on pass/fail.
    """
    inv = parallel_invariants(net, (1, 2))
    w = net.window
    n1, n2 = w.shape
    rv = rho.values
    max_geo = 0.0
    max_alg = 0.0
    offending = []
    disagreements = []
    for z2 in range(n2 - 1):
        for z1 in range(n1 - 2):
            scalars = (rv[z1, z2], rv[z1 + 1, z2], rv[z1 + 2, z2],
                       rv[z1 + 2, z2 + 1], rv[z1 + 1, z2 + 1], rv[z1, z2 + 1])
            alg = c1_residual_algebraic(*scalars, inv[1][z1, z2])
            geo = c1_residual_geometric(
                quad_at(net, rho, (z1, z2)), quad_at(net, rho, (z1 + 1, z2)), tol
            )
            _tally(alg, geo, (z1, z2, 1), algebraic_tol, tol.incidence_rel,
                   offending, disagreements)
            max_geo, max_alg = max(max_geo, geo), max(max_alg, alg)
    for z2 in range(n2 - 2):
        for z1 in range(n1 - 1):
            scalars = (rv[z1, z2], rv[z1, z2 + 1], rv[z1, z2 + 2],
                       rv[z1 + 1, z2 + 2], rv[z1 + 1, z2 + 1], rv[z1 + 1, z2])
            alg = c1_residual_algebraic(*scalars, inv[2][z1, z2])
            geo = c1_residual_geometric(
                quad_at(net, rho, (z1, z2)), quad_at(net, rho, (z1, z2 + 1)), tol
            )
            _tally(alg, geo, (z1, z2, 2), algebraic_tol, tol.incidence_rel,
                   offending, disagreements)
            max_geo, max_alg = max(max_geo, geo), max(max_alg, alg)
    return {
        "max_geometric": max_geo,
        "max_algebraic": max_alg,
        "offending": offending,
        "disagreements": disagreements,
    }


def _tally(alg, geo, tag, alg_tol, geo_tol, offending, disagreements):
    ok_alg = alg <= alg_tol
    ok_geo = geo <= geo_tol
    if ok_alg != ok_geo:
        disagreements.append(tag)
    if not (ok_alg and ok_geo):
        offending.append(tag)


def _status_from(rho_values: np.ndarray, sweep: dict) -> str:
    if sweep["offending"]:
        return "invalid"
    signs = np.sign(rho_values)
    if np.all(signs == signs.flat[0]):
        return "hyperbolic"
    return "pre_hyperbolic"


def solve_rho_cauchy(net: ANet, rho_axis1, rho_axis2, rho_corner: float,
                     order: str = "rows", tol: Tolerances = Tolerances(),
                     consistency_rel: float = 1e-9,
                     check: bool = True) -> HyperbolicNet:
    """Extend an A-surface by propagating the cross scalars from Cauchy data.

    Data: scalars along both coordinate axes plus the value at (1, 1).  Cells
    reachable by both evolution routes are computed twice and must agree to
    consistency_rel; `order` picks which route provides the stored value
    ('rows' prefers the route stepping twice along axis 1).
    """
    if (1, 2) not in net.moutard:
        raise SolverError("net carries no coefficients; solve or attach them first")
    a = net.moutard[(1, 2)].values
    w = net.window
    n1, n2 = w.shape
    r1 = np.asarray(rho_axis1, dtype=float)
    r2 = np.asarray(rho_axis2, dtype=float)
    if r1.shape != (n1,) or r2.shape != (n2,):
        raise ValueError("axis seed lengths must match the window")
    if np.any(r1 == 0.0) or np.any(r2 == 0.0) or rho_corner == 0.0:
        raise ValueError("scalar seeds must be nonzero")
    if r1[0] != r2[0]:
        raise ValueError("axis seeds must agree at the origin")
    if order not in ("rows", "cols"):
        raise ValueError("order must be 'rows' or 'cols'")

    rho = ScalarField(w)
    rv = rho.values
    rv[:, 0] = r1
    rv[0, :] = r2
    rv[1, 1] = rho_corner
    worst_rel = 0.0
    for z2 in range(1, n2):
        for z1 in range(1, n1):
            if z1 == 1 and z2 == 1:
                continue
            via_rows = via_cols = None
            if z1 >= 2:
                via_rows = rho_evolve(
                    rv[z1 - 2, z2 - 1], rv[z1 - 2, z2], rv[z1, z2 - 1],
                    a[z1 - 2, z2 - 1], a[z1 - 1, z2 - 1],
                )
            if z2 >= 2:
                via_cols = rho_evolve(
                    rv[z1 - 1, z2 - 2], rv[z1, z2 - 2], rv[z1 - 1, z2],
                    a[z1 - 1, z2 - 2], a[z1 - 1, z2 - 1],
                )
            if via_rows is not None and via_cols is not None:
                rel = abs(via_rows - via_cols) / max(abs(via_rows), abs(via_cols))
                worst_rel = max(worst_rel, rel)
                if rel > consistency_rel:
                    raise SolverError(
                        f"evolution routes disagree at {(z1, z2)}: {rel:.3e} relative"
                    )
            value = via_rows if order == "rows" else via_cols
            if value is None:
                value = via_rows if via_rows is not None else via_cols
            rv[z1, z2] = value
    rho._set[...] = True
    rho.freeze()
    if check:
        sweep = c1_sweep(net, rho, tol)
        if sweep["disagreements"]:
            raise SolverError(
                f"geometric and algebraic tangency tests disagree at {sweep['disagreements'][:3]}"
            )
        status = _status_from(rv, sweep)
        offending = sweep["offending"]
    else:
        signs = np.sign(rv)
        status = "hyperbolic" if np.all(signs == signs.flat[0]) else "pre_hyperbolic"
        offending = []
    return HyperbolicNet(net, rho, status, offending)


def extendability_check(net: ANet):
    """Whether every parallel invariant is positive, plus the failing pairs."""
    inv = parallel_invariants(net, (1, 2))
    offending = []
    for d, arr in inv.items():
        for idx in np.argwhere(arr <= 0.0):
            offending.append((tuple(int(v) for v in idx), d))
    return len(offending) == 0, offending
