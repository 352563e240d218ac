"""Blaschke and Weingarten cubes, and layer-to-layer transformations of
crisscrossed A-nets.

A transformation layer is the next height of a 3D A-net whose vertical strips
satisfy the tangency condition.  Free initial data on one quadrilateral gives
the weaker (Backlund) transform; deriving that data from the cross of the
initial cube instead gives the Weingarten transform, for which every cube
carries a pair of crosses related by the projection identity and the vertex
scalars parametrize one ordered family of Moutard coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anet import (
    ANet,
    bw_rescale,
    dbkp_residual,
    lelieuvre_residual_max,
    net_scale,
    recompute_moutard,
    star_coplanarity_max,
)
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
    intersect_planes,
    project_through_line,
)
from .hypnet import Cross, HyperbolicNet, c1_sweep, _status_from
from .lattice import ScalarField, VectorField, Window

__all__ = [
    "ACube",
    "WeingartenPair",
    "PhiField",
    "EquiTwistedData",
    "complete_blaschke_cube",
    "blaschke_center",
    "weingarten_propagate_algebraic",
    "weingarten_propagate_geometric",
    "is_weingarten_cube",
    "weingarten_centre_residual",
    "combine_layers",
    "combine_pair",
    "backlund_transform",
    "weingarten_transform",
    "normalize_lambda",
    "verify_rho_equals_tau",
    "equi_twist_cube_check",
    "horizontal_loop_conditions",
    "equi_twist_sweep",
    "generate_equitwisted_pair",
    "iterate_weingarten",
    "weingarten_cube_equations",
    "cube_closure_residual",
]

_FACE_AXES = {1: (2, 3), 2: (3, 1), 3: (1, 2)}


@dataclass(frozen=True)
class ACube:
    """Eight corners of an elementary hexahedron, indexed by {0,1}^3 offsets."""

    corners: np.ndarray  # (2, 2, 2, 3)

    def __post_init__(self):
        object.__setattr__(
            self, "corners", np.asarray(self.corners, dtype=float).reshape(2, 2, 2, 3)
        )

    @staticmethod
    def from_net(net: ANet, anchor) -> "ACube":
        w = net.window
        block = np.empty((2, 2, 2, 3))
        for d1 in (0, 1):
            for d2 in (0, 1):
                for d3 in (0, 1):
                    idx = (anchor[0] + d1, anchor[1] + d2, anchor[2] + d3)
                    block[d1, d2, d3] = net.vertices.values[w.offset(idx)]
        return ACube(block)

    def face_offsets(self, axis: int, side: int):
        """Corner offsets of a face in cyclic order."""
        b, c = _FACE_AXES[axis]
        offs = []
        for db, dc in ((0, 0), (1, 0), (1, 1), (0, 1)):
            off = [0, 0, 0]
            off[axis - 1] = side
            off[b - 1] = db
            off[c - 1] = dc
            offs.append(tuple(off))
        return offs

    def face(self, axis: int, side: int) -> np.ndarray:
        return np.array([self.corners[o] for o in self.face_offsets(axis, side)])

    def scale(self) -> float:
        return diameter(self.corners.reshape(-1, 3))

    def bottom(self) -> np.ndarray:
        return self.face(3, 0)

    def top(self) -> np.ndarray:
        return self.face(3, 1)


def complete_blaschke_cube(cube: ACube, rho_known: dict, edge_point) -> np.ndarray:
    """Recover the full (2,2,2) scalar array from seven values plus one point.

    rho_known maps seven corner offsets to scalars.  The crosses of the faces
    spanned by those corners are fixed; the one remaining degree of freedom
    of the cross configuration is pinned by `edge_point`, a cross vertex on
    an (extended) edge incident to the missing corner.
    """
    known = {tuple(k): float(v) for k, v in rho_known.items()}
    if len(known) != 7:
        raise GeometryError("need scalars at exactly seven corners")
    all_offsets = {(d1, d2, d3) for d1 in (0, 1) for d2 in (0, 1) for d3 in (0, 1)}
    missing_set = all_offsets - set(known)
    if len(missing_set) != 1:
        raise GeometryError("corner offsets must cover seven distinct corners")
    (missing,) = missing_set
    if any(v == 0.0 for v in known.values()):
        raise GeometryError("cross scalars must be nonzero")
    x_m = cube.corners[missing]
    point = np.asarray(edge_point, dtype=float)
    scale = cube.scale()
    neighbour = None
    for ax in range(3):
        nb = list(missing)
        nb[ax] ^= 1
        nb = tuple(nb)
        line = Line3.through(cube.corners[nb], x_m)
        if line.distance_to(point) <= 1e-9 * scale:
            neighbour = nb
            break
    if neighbour is None:
        raise GeometryError("edge point does not lie on an edge of the missing corner")
    ratio = edge_ratio(cube.corners[neighbour], point, x_m)
    rho_m = ratio * known[neighbour]
    if rho_m == 0.0:
        raise GeometryError("edge point coincides with the neighbouring corner")
    out = np.empty((2, 2, 2))
    for off, v in known.items():
        out[off] = v
    out[missing] = rho_m
    return out


def _face_centre(cube: ACube, rho: np.ndarray, axis: int, side: int) -> np.ndarray:
    offs = cube.face_offsets(axis, side)
    weights = np.array([rho[o] for o in offs])
    total = weights.sum()
    if abs(total) <= 1e-12 * np.abs(weights).max():
        raise GeometryError("face scalar sum vanishes")
    corners = np.array([cube.corners[o] for o in offs])
    return (weights[:, None] * corners).sum(axis=0) / total


def blaschke_center(cube: ACube, rho):
    """Weighted cube centre and its distance to the three centre-joining lines.

    The segments connecting centres of opposite crosses of a cube with
    mutually compatible crosses are concurrent in this point; the residual is
    the max distance from the point to the three lines, over the cube scale.
    """
    rho = np.asarray(rho, dtype=float).reshape(2, 2, 2)
    total = rho.sum()
    if abs(total) <= 1e-12 * float(np.abs(rho).max()):
        raise GeometryError("scalar sum over the cube vanishes")
    p = (rho[..., None] * cube.corners).sum(axis=(0, 1, 2)) / total
    worst = 0.0
    for axis in (1, 2, 3):
        c0 = _face_centre(cube, rho, axis, 0)
        c1 = _face_centre(cube, rho, axis, 1)
        worst = max(worst, Line3.through(c0, c1).distance_to(p))
    return p, worst / cube.scale()


def weingarten_propagate_algebraic(rho, rho1, rho2, rho12, rho3_gauge,
                                   a21, a23, a31, a23_1, a31_2):
    """Top-face scalars of a Weingarten cube from the bottom ones.

    Three of the four tangency conditions around horizontal edges determine
    (rho13, rho23, rho123) given the gauge value rho3; the relative residual
    of the fourth condition is returned and vanishes exactly when the
    coefficients satisfy the cube compatibility.
    """
    for name, v in (("rho", rho), ("rho1", rho1), ("rho2", rho2), ("rho12", rho12),
                    ("rho3", rho3_gauge), ("a21", a21), ("a23", a23), ("a31", a31),
                    ("a23_1", a23_1), ("a31_2", a31_2)):
        if v == 0.0:
            raise SolverError(f"zero input {name} in Weingarten propagation")
    rho13 = rho3_gauge * rho12 * a21 / (rho2 * a31)
    rho23 = rho3_gauge * rho12 * a21 / (rho1 * a23)
    rho123 = rho2 * rho13 / (rho * a21 * a23_1)
    lhs = a21 * a31_2
    rhs = rho1 * rho23 / (rho * rho123)
    return rho13, rho23, rho123, abs(lhs - rhs) / abs(lhs)


def weingarten_propagate_geometric(cube: ACube, bottom: Cross,
                                   tol: Tolerances = Tolerances()) -> Cross:
    """Propagate a bottom cross to the top face by the projection identity.

    Each bottom cross vertex is sent to the diagonally opposite top edge by
    projecting through the corresponding top edge line, and independently
    through the opposite bottom edge line; agreement of the two projections
    certifies an A-cube.  The four image points are verified to be coplanar
    and the diagonals to meet.
    """
    xb = cube.bottom()
    xt = cube.top()
    scale = cube.scale()
    verts = [None] * 4
    for k in range(4):
        p = bottom.vertices[k]
        k2 = (k + 2) % 4
        top_edge_k = Line3.through(xt[k], xt[(k + 1) % 4])
        bottom_edge_opp = Line3.through(xb[k2], xb[(k2 + 1) % 4])
        target = Line3.through(xt[k2], xt[(k2 + 1) % 4])
        q_a = project_through_line(p, top_edge_k, target)
        q_b = project_through_line(p, bottom_edge_opp, target)
        if np.linalg.norm(q_a - q_b) > 1e-6 * scale:
            raise GeometryError(
                "the two projection routes disagree; corners do not form an A-cube"
            )
        verts[k2] = 0.5 * (q_a + q_b)
    verts = np.array(verts)
    if coplanarity_residual(verts) > 1e-6:
        raise GeometryError("propagated cross vertices are not coplanar")
    centre, gap = intersect_lines(
        Line3.through(verts[0], verts[2]), Line3.through(verts[1], verts[3])
    )
    if gap > 1e-6:
        raise GeometryError("propagated cross diagonals do not meet")
    flags = tuple(
        bool(edge_ratio(xt[k], verts[k], xt[(k + 1) % 4]) > 0.0) for k in range(4)
    )
    return Cross(verts, centre, best_fit_plane(verts), flags)


def is_weingarten_cube(cube: ACube, bottom: Cross, top: Cross) -> float:
    """Max tangency defect over the four corresponding cross-vertex pairs.

    For each edge k the quadruples (top_k, x_k, x_{k+1}, bottom_{k+2}) and
    (bottom_k, xt_k, xt_{k+1}, top_{k+2}) must both be coplanar.
    """
    xb = cube.bottom()
    xt = cube.top()
    worst = 0.0
    for k in range(4):
        k2 = (k + 2) % 4
        quad1 = np.array([top.vertices[k], xb[k], xb[(k + 1) % 4], bottom.vertices[k2]])
        quad2 = np.array([bottom.vertices[k], xt[k], xt[(k + 1) % 4], top.vertices[k2]])
        worst = max(worst, coplanarity_residual(quad1), coplanarity_residual(quad2))
    return worst


def weingarten_centre_residual(cube: ACube, bottom: Cross, top: Cross) -> float:
    """Joint incidence defect of the centre-connecting line with both cross planes.

    The line through the two centres must be the intersection of the cross
    planes, so each centre lies in both planes; the max normalized distance
    is returned.
    """
    worst = 0.0
    for pt in (bottom.centre, top.centre):
        worst = max(worst, abs(bottom.plane.signed_distance(pt)))
        worst = max(worst, abs(top.plane.signed_distance(pt)))
    return worst / cube.scale()


def cube_closure_residual(cube: ACube) -> float:
    """Distance of the far corner from the meet of the three adjacent
    vertex planes, over the cube scale.

    For seven corners with planar stars the three planes at the corners next
    to the eighth intersect in the unique point that completes the
    hexahedron.
    """
    c = cube.corners
    planes = []
    for ax in range(3):
        centre_off = [1, 1, 1]
        centre_off[ax] = 0
        nbs = []
        for bx in range(3):
            if bx == ax:
                continue
            nb = list(centre_off)
            nb[bx] = 0
            nbs.append(c[tuple(nb)])
        planes.append(Plane3.through(c[tuple(centre_off)], nbs[0], nbs[1]))
    meet = intersect_planes(*planes)
    return float(np.linalg.norm(meet - c[1, 1, 1])) / cube.scale()


def _cube_family_coeffs(net: ANet, cell) -> dict:
    """Coefficients of the cube at `cell` in the (a21, a23, a31) orientation."""
    z1, z2, z3 = cell
    a12 = net.moutard[(1, 2)].values
    a13 = net.moutard[(1, 3)].values
    a23 = net.moutard[(2, 3)].values
    return {
        "a21": -a12[z1, z2, z3],
        "a23": a23[z1, z2, z3],
        "a31": -a13[z1, z2, z3],
        "a23_1": a23[z1 + 1, z2, z3],
        "a31_2": -a13[z1, z2 + 1, z3],
    }


def weingarten_cube_equations(net: ANet, rho: ScalarField, cell) -> float:
    """Max relative residual of the four tangency conditions on one cube."""
    a = _cube_family_coeffs(net, cell)
    z1, z2, z3 = cell
    r = rho.values
    rho0, rho1, rho2, rho12 = (
        r[z1, z2, z3], r[z1 + 1, z2, z3], r[z1, z2 + 1, z3], r[z1 + 1, z2 + 1, z3]
    )
    rho3, rho13, rho23, rho123 = (
        r[z1, z2, z3 + 1], r[z1 + 1, z2, z3 + 1], r[z1, z2 + 1, z3 + 1],
        r[z1 + 1, z2 + 1, z3 + 1],
    )
    eqs = [
        (a["a31"] / a["a21"], rho3 * rho12 / (rho2 * rho13)),
        (a["a21"] * a["a31_2"], rho1 * rho23 / (rho0 * rho123)),
        (a["a23"] / a["a21"], rho3 * rho12 / (rho1 * rho23)),
        (a["a21"] * a["a23_1"], rho2 * rho13 / (rho0 * rho123)),
    ]
    return max(abs(lhs - rhs) / abs(lhs) for lhs, rhs in eqs)


@dataclass
class WeingartenPair:
    """Layered 3D A-net with a global scalar field satisfying the tangency
    conditions on vertical planes, plus the family normalization factor."""

    net: ANet
    rho: ScalarField
    lambda_: float | None = None
    status: str = "pre_hyperbolic"
    offending: list = field(default_factory=list)

    def layers(self) -> int:
        return self.net.window.shape[2]


@dataclass
class PhiField:
    """Positive vertex potential generating vertical coefficients by ratios."""

    phi: np.ndarray  # (W1, W2), strictly positive

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        if np.any(self.phi <= 0.0):
            raise ValueError("potential must be strictly positive")

    def a23(self) -> np.ndarray:
        return self.phi[:, :-1] / self.phi[:, 1:]

    def a31(self) -> np.ndarray:
        return self.phi[:-1, :] / self.phi[1:, :]


def _extend_rho_layer(net: ANet, rho_values: np.ndarray, k: int, seeds: dict,
                      consistency_rel: float = 1e-9) -> np.ndarray:
    """Fill the scalars at height k+1 from height k and one seeded unit cell.

    seeds maps the four cells (c1, c2), (c1+1, c2), (c1, c2+1), (c1+1, c2+1)
    to new-layer values.  The tangency evolution on vertical planes is a
    two-term recursion per row/column, run in both directions from the seeded
    cells; re-deriving the rows afterwards serves as a consistency check.
    """
    w1, w2 = rho_values.shape[0], rho_values.shape[1]
    a13 = net.moutard[(1, 3)].values
    a23 = net.moutard[(2, 3)].values
    cells = sorted(seeds)
    c1, c2 = cells[0]
    new = np.full((w1, w2), np.nan)
    for (i, j), v in seeds.items():
        if v == 0.0:
            raise SolverError("seed scalars must be nonzero")
        new[i, j] = v

    def step_dir1(z1, z2, forward):
        prod = a13[z1, z2, k] * a13[z1 + 1, z2, k]
        if prod == 0.0 or rho_values[z1, z2, k] == 0.0:
            raise SolverError(f"singular vertical step at {(z1, z2)}")
        if forward:
            return rho_values[z1 + 2, z2, k] * new[z1, z2] / (rho_values[z1, z2, k] * prod)
        return rho_values[z1, z2, k] * prod * new[z1 + 2, z2] / rho_values[z1 + 2, z2, k]

    def step_dir2(z1, z2, forward):
        prod = a23[z1, z2, k] * a23[z1, z2 + 1, k]
        if prod == 0.0 or rho_values[z1, z2, k] == 0.0:
            raise SolverError(f"singular vertical step at {(z1, z2)}")
        if forward:
            return rho_values[z1, z2 + 2, k] * new[z1, z2] / (rho_values[z1, z2, k] * prod)
        return rho_values[z1, z2, k] * prod * new[z1, z2 + 2] / rho_values[z1, z2 + 2, k]

    for z2 in (c2, c2 + 1):
        for z1 in range(c1, w1 - 2):  # rightwards, both parity chains
            new[z1 + 2, z2] = step_dir1(z1, z2, True)
        for z1 in range(min(c1 + 1, w1 - 2), 0, -1):  # leftwards
            if np.isnan(new[z1 - 1, z2]):
                new[z1 - 1, z2] = step_dir1(z1 - 1, z2, False)
    for z1 in range(w1):
        for z2 in range(c2, w2 - 2):
            new[z1, z2 + 2] = step_dir2(z1, z2, True)
        for z2 in range(min(c2 + 1, w2 - 2), 0, -1):
            if np.isnan(new[z1, z2 - 1]):
                new[z1, z2 - 1] = step_dir2(z1, z2 - 1, False)
    if np.any(np.isnan(new)):
        raise SolverError("layer fill left unset cells")
    worst = 0.0
    for z2 in range(w2):
        if z2 in (c2, c2 + 1):
            continue
        for z1 in range(w1 - 2):
            alt = step_dir1(z1, z2, True)
            rel = abs(alt - new[z1 + 2, z2]) / max(abs(alt), abs(new[z1 + 2, z2]))
            worst = max(worst, rel)
    if worst > consistency_rel:
        raise SolverError(
            f"vertical tangency evolution is inconsistent: {worst:.3e} relative"
        )
    return new


def combine_layers(base: ANet, tilde: ANet, tol: Tolerances = Tolerances(),
                   residual_rel: float = 1e-8) -> ANet:
    """Stack a surface with a candidate transform layer into a 2-layer 3D net.

    The base net must carry normals.  Normals on the new layer are recovered
    from its vertex planes and the vertical Lelieuvre condition; failure of
    the joint residuals means the supporting nets do not form a Weingarten
    pair.
    """
    if base.dim != 2 or tilde.dim != 2:
        raise ValueError("both layers must be 2-dimensional nets")
    if base.normals is None:
        raise ValueError("the base layer needs a normal field")
    if base.window != tilde.window:
        raise ValueError("layers must share their window")
    w1, w2 = base.window.shape
    xb = base.vertices.values
    xt = tilde.vertices.values
    nb = base.normals.values
    nt = np.empty_like(nb)
    for z1 in range(w1):
        for z2 in range(w2):
            star = [xt[z1, z2]]
            for dz1, dz2 in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                u, v = z1 + dz1, z2 + dz2
                if 0 <= u < w1 and 0 <= v < w2:
                    star.append(xt[u, v])
            m = best_fit_plane(np.array(star)).normal
            e = xt[z1, z2] - xb[z1, z2]
            cross = np.cross(m, nb[z1, z2])
            denom = float(cross @ cross)
            if denom < 1e-20:
                raise GenericityError(f"parallel vertex normals at {(z1, z2)}")
            nt[z1, z2] = (float(e @ cross) / denom) * m
    window = Window.from_shape(w1, w2, 2)
    verts = VectorField(window, np.stack([xb, xt], axis=2)).freeze()
    normals = VectorField(window, np.stack([nb, nt], axis=2)).freeze()
    net3 = ANet(verts, normals, recompute_moutard(normals))
    if lelieuvre_residual_max(net3) > residual_rel:
        raise SolverError("layers do not satisfy the Lelieuvre relations jointly")
    if star_coplanarity_max(net3) > 10 * tol.incidence_rel:
        raise SolverError("stacked net has non-planar vertex stars")
    return net3


def combine_pair(net3: ANet, rho_bottom: ScalarField, rho_upper,
                 lambda_: float | None = None) -> WeingartenPair:
    """Assemble a WeingartenPair record from a layered net and its scalars.

    rho_upper is one (W1, W2) array per additional layer, or a single array
    for a plain two-layer pair.
    """
    upper = np.asarray(rho_upper, dtype=float)
    if upper.ndim == 2:
        upper = upper[:, :, None]
    stacked = np.concatenate([rho_bottom.values[:, :, None], upper], axis=2)
    rho = ScalarField(net3.window, stacked).freeze()
    signs = np.sign(rho.values)
    status = "hyperbolic" if np.all(signs == signs.flat[0]) else "pre_hyperbolic"
    return WeingartenPair(net3, rho, lambda_, status)


def _resolve_stack(f: HyperbolicNet, layer_or_net, tol: Tolerances) -> ANet:
    if isinstance(layer_or_net, ANet) and layer_or_net.dim == 3:
        net3 = layer_or_net
        base = f.surface.vertices.values
        if not np.allclose(net3.vertices.values[:, :, 0], base,
                           atol=1e-9 * max(1.0, net_scale(f.surface))):
            raise ValueError("layer 0 of the stack does not match the given net")
        return net3
    if isinstance(layer_or_net, ANet) and layer_or_net.dim == 2:
        return combine_layers(f.surface, layer_or_net, tol)
    raise TypeError("expected a 2D transform layer or a 3D stacked net")


def backlund_transform(f: HyperbolicNet, layer_or_net, rho_seed,
                       tol: Tolerances = Tolerances()) -> HyperbolicNet:
    """Transform with free initial data on one quadrilateral of the new layer.

    rho_seed holds the four values at (0,0), (1,0), (0,1), (1,1) of the new
    layer.  The remaining scalars follow from the tangency conditions on
    vertical coordinate planes, and the returned layer then satisfies the
    tangency condition in its own plane as well.
    """
    net3 = _resolve_stack(f, layer_or_net, tol)
    if net3.window.shape[2] != 2:
        raise ValueError("transforms extend exactly one layer at a time")
    seed = np.asarray(rho_seed, dtype=float).reshape(4)
    if np.any(seed == 0.0):
        raise ValueError("seed scalars must be nonzero")
    rho3 = np.empty(net3.window.shape)
    rho3[:, :, 0] = f.rho.values
    seeds = {(0, 0): seed[0], (1, 0): seed[1], (0, 1): seed[2], (1, 1): seed[3]}
    top = _extend_rho_layer(net3, rho3, 0, seeds)
    tilde_net = net3.layer(1)
    rho_top = ScalarField(tilde_net.window, top).freeze()
    sweep = c1_sweep(tilde_net, rho_top, tol)
    status = _status_from(rho_top.values, sweep)
    return HyperbolicNet(tilde_net, rho_top, status, sweep["offending"])


def weingarten_transform(f: HyperbolicNet, layer_or_net,
                         rho3_gauge: float | None = None,
                         tol: Tolerances = Tolerances(),
                         initial_cell=(0, 0)) -> WeingartenPair:
    """Canonical transform: the initial cube is extended to a Weingarten cube.

    The new layer's values over the initial cell follow from the algebraic
    cube propagation (gauge fixed by rho3_gauge, default the base scalar at
    that cell); everything else follows from the vertical tangency
    conditions.  Every cube of the result satisfies the Weingarten equations,
    which is verified before returning.
    """
    net3 = _resolve_stack(f, layer_or_net, tol)
    if net3.window.shape[2] != 2:
        raise ValueError("transforms extend exactly one layer at a time")
    rho3 = np.empty(net3.window.shape)
    rho3[:, :, 0] = f.rho.values
    c1, c2 = initial_cell
    gauge = float(rho3[c1, c2, 0]) if rho3_gauge is None else float(rho3_gauge)
    a = _cube_family_coeffs(net3, (c1, c2, 0))
    r13, r23, r123, resid = weingarten_propagate_algebraic(
        rho3[c1, c2, 0], rho3[c1 + 1, c2, 0], rho3[c1, c2 + 1, 0],
        rho3[c1 + 1, c2 + 1, 0], gauge,
        a["a21"], a["a23"], a["a31"], a["a23_1"], a["a31_2"],
    )
    if resid > 1e-9:
        raise SolverError(
            f"initial cube coefficients violate the compatibility: {resid:.3e}"
        )
    seeds = {(c1, c2): gauge, (c1 + 1, c2): r13, (c1, c2 + 1): r23,
             (c1 + 1, c2 + 1): r123}
    top = _extend_rho_layer(net3, rho3, 0, seeds)
    pair = combine_pair(net3, f.rho, top)
    worst = max(
        weingarten_cube_equations(net3, pair.rho, (u, v, 0))
        for u in range(net3.window.shape[0] - 1)
        for v in range(net3.window.shape[1] - 1)
    )
    if worst > 1e-8:
        pair.status = "invalid"
        pair.offending.append(("weingarten_equations", worst))
    return pair


def normalize_lambda(pair: WeingartenPair, tol_rel: float = 1e-9,
                     check: bool = True) -> WeingartenPair:
    """Rescale the normal gauge so the family factor becomes +1 or -1.

    The factor is read off the origin cube; a checkerboard rescaling of the
    normals multiplies it by a positive constant, so only its sign is
    invariant.  After normalization the relation a = lambda r_i r_j /
    (r r_ij) is verified on every face of the selected family; with
    check=False the caller inspects the residual itself.
    """
    net = pair.net
    r = pair.rho.values
    a12 = net.moutard[(1, 2)].values
    lam = -a12[0, 0, 0] * r[0, 0, 0] * r[1, 1, 0] / (r[1, 0, 0] * r[0, 1, 0])
    if lam == 0.0:
        raise SolverError("degenerate family factor")
    alpha = 1.0 / np.sqrt(abs(lam))
    normals = bw_rescale(net.normals, alpha) if net.normals is not None else None
    moutard = {}
    for pairkey, fieldv in net.moutard.items():
        scaled = fieldv.copy()
        grids = np.meshgrid(
            *[np.arange(lo, hi + 1) for lo, hi in scaled.window.bounds], indexing="ij"
        )
        parity = sum(grids) % 2
        scaled.values = scaled.values * np.where(parity == 0, alpha**2, alpha**-2)
        moutard[pairkey] = scaled.freeze()
    new_net = ANet(net.vertices, normals, moutard)
    lam_new = float(np.sign(lam))
    out = WeingartenPair(new_net, pair.rho, lam_new, pair.status, list(pair.offending))
    if check:
        report = verify_rho_equals_tau(out)
        if report["max_residual"] > tol_rel:
            raise SolverError(
                f"family factor is not constant across cubes: {report['max_residual']:.3e}"
            )
    return out


def verify_rho_equals_tau(pair: WeingartenPair) -> dict:
    """Check that the scalars parametrize an ordered coefficient family.

    With factor +1 the family is (a21, a23, a31); with -1 the opposite
    orientation (a12, a32, a13).  Reports the max relative residual of
    a = lambda r_i r_j / (r r_ij) over all faces of the family.
    """
    net = pair.net
    lam = pair.lambda_ if pair.lambda_ is not None else 1.0
    r = pair.rho.values
    worst = 0.0
    fam = "(a21, a23, a31)" if lam > 0 else "(a12, a32, a13)"
    for (i, j), fieldv in net.moutard.items():
        sign = -lam if (i, j) in ((1, 2), (1, 3)) else lam

        def sh(di, dj, i=i, j=j):
            s = [slice(None)] * 3
            for ax in range(3):
                if ax == i - 1:
                    s[ax] = slice(1, None) if di else slice(0, -1)
                elif ax == j - 1:
                    s[ax] = slice(1, None) if dj else slice(0, -1)
            return r[tuple(s)]

        pred = sign * sh(1, 0) * sh(0, 1) / (sh(0, 0) * sh(1, 1))
        rel = np.abs(pred - fieldv.values) / np.abs(fieldv.values)
        worst = max(worst, float(rel.max()))
    return {"family": fam, "lambda": lam, "max_residual": worst}


def equi_twist_cube_check(a21, a23, a31, a23_1, a31_2) -> bool:
    """Positivity of the four parallel invariants governing patch propagation."""
    for v in (a21, a23, a31, a23_1, a31_2):
        if v == 0.0:
            raise ValueError("coefficients must be nonzero")
    return (a31 / a21 > 0) and (a21 * a31_2 > 0) and (a23 / a21 > 0) and (a21 * a23_1 > 0)


def horizontal_loop_conditions(a23, a31, a23_1) -> bool:
    """Twist conditions of the remaining face loop of the same cube; these can
    never hold together with the vertical-pair check."""
    return (a31 / a23 < 0) and (a31 * a23_1 < 0)


def equi_twist_sweep(net: ANet):
    """Evaluate the cube twist check for every cube of a layered net."""
    w1, w2, w3 = net.window.shape
    failing = []
    for z3 in range(w3 - 1):
        for z2 in range(w2 - 1):
            for z1 in range(w1 - 1):
                a = _cube_family_coeffs(net, (z1, z2, z3))
                if not equi_twist_cube_check(
                    a["a21"], a["a23"], a["a31"], a["a23_1"], a["a31_2"]
                ):
                    failing.append((z1, z2, z3))
    return len(failing) == 0, failing


@dataclass
class EquiTwistedData:
    """Coefficient data of one equi-twisted layer pair plus the assembled net."""

    phi: PhiField
    a: np.ndarray
    a23: np.ndarray
    a31: np.ndarray
    a3: np.ndarray
    net: ANet


def generate_equitwisted_pair(seed: int, shape=(10, 10), phi_axis1=None,
                              phi_axis2=None, a_policy=None,
                              offset_range=(0.5, 1.5),
                              tol: Tolerances = Tolerances()) -> EquiTwistedData:
    """Construct a layer pair in which every cube passes the twist check.

    The potential grows from positive axis data by phi_12 = a (phi_1 + phi_2)
    - phi, with each coefficient a strictly above phi / (phi_1 + phi_2)
    (default: by a seeded uniform offset).  All derived coefficients are then
    positive, so a one-sign extension of the bottom layer admits a transform
    with all-internal crosses.
    """
    w1, w2 = shape
    rng_phi = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 7])
    phi = np.empty((w1, w2))
    phi[:, 0] = (rng_phi.uniform(0.5, 1.5, size=w1) if phi_axis1 is None
                 else np.asarray(phi_axis1, dtype=float))
    phi[0, :] = (rng_phi.uniform(0.5, 1.5, size=w2) if phi_axis2 is None
                 else np.asarray(phi_axis2, dtype=float))
    if phi_axis1 is not None and phi_axis2 is not None:
        if not np.isclose(np.asarray(phi_axis1)[0], np.asarray(phi_axis2)[0]):
            raise ValueError("axis data must agree at the origin")
    if np.any(phi[:, 0] <= 0) or np.any(phi[0, :] <= 0):
        raise ValueError("potential axis data must be strictly positive")
    a = np.empty((w1 - 1, w2 - 1))
    lo, hi = offset_range
    for z2 in range(w2 - 1):
        for z1 in range(w1 - 1):
            bound = phi[z1, z2] / (phi[z1 + 1, z2] + phi[z1, z2 + 1])
            if a_policy is None:
                val = bound + rng_phi.uniform(lo, hi)
            else:
                val = float(a_policy((z1, z2), bound))
            if val <= bound:
                raise ValueError(
                    f"coefficient policy violates the positivity bound at {(z1, z2)}"
                )
            a[z1, z2] = val
            phi[z1 + 1, z2 + 1] = val * (phi[z1 + 1, z2] + phi[z1, z2 + 1]) - phi[z1, z2]
    phi_field = PhiField(phi)
    a23 = phi_field.a23()
    a31 = phi_field.a31()
    a3 = a * phi[1:, :-1] * phi[:-1, 1:] / (phi[:-1, :-1] * phi[1:, 1:])
    if np.any(a3 <= 0):
        raise SolverError("derived top-layer coefficients are not positive")

    from .anet import solve_layered_cauchy
    from .sampling import rng_for

    net = None
    for attempt in range(64):
        rng = rng_for(seed, 9, attempt)
        n1 = rng.normal(size=(w1, 3))
        n2 = rng.normal(size=(w2, 3))
        n2[0] = n1[0]
        n3 = rng.normal(size=(2, 3))
        n3[0] = n1[0]
        try:
            net = solve_layered_cauchy(
                n1, n2, n3,
                a12_plane=-a,
                a13_strip=-a31[:, :1],
                a23_strip=a23[:1, :].T,
                tol=tol,
            )
            break
        except (GenericityError, SolverError):
            continue
    if net is None:
        raise GenericityError(f"no generic assembly found for seed {seed}")
    got_a3 = -net.moutard[(1, 2)].values[:, :, 1]
    got_a23 = net.moutard[(2, 3)].values[:, :, 0]
    got_a31 = -net.moutard[(1, 3)].values[:, :, 0]
    for got, want, name in ((got_a3, a3, "a3"), (got_a23, a23, "a23"), (got_a31, a31, "a31")):
        rel = np.abs(got - want) / np.abs(want)
        if rel.max() > 1e-9:
            raise SolverError(f"evolved field {name} deviates from the potential form")
    ok, failing = equi_twist_sweep(net)
    if not ok:
        raise SolverError(f"twist check fails at cubes {failing[:3]}")
    return EquiTwistedData(phi_field, a, a23, a31, a3, net)


def iterate_weingarten(f0: HyperbolicNet, layers: ANet,
                       tol: Tolerances = Tolerances()):
    """Apply the canonical transform through every consecutive layer pair.

    Returns the scalar field over the full window together with a report
    holding the per-cube dBKP residual of the scalars (sign pattern -, -, +,
    the one fixed by the transform family) and the worst tangency-equation
    residual over all cubes.
    """
    if layers.dim != 3:
        raise ValueError("need a layered 3D net")
    w1, w2, w3 = layers.window.shape
    base = f0.surface.vertices.values
    if not np.allclose(layers.vertices.values[:, :, 0], base,
                       atol=1e-9 * max(1.0, net_scale(f0.surface))):
        raise ValueError("layer 0 of the stack does not match the initial net")
    rho3 = np.empty((w1, w2, w3))
    rho3[:, :, 0] = f0.rho.values
    worst_eq = 0.0
    for k in range(w3 - 1):
        a = _cube_family_coeffs(layers, (0, 0, k))
        gauge = rho3[0, 0, k]
        r13, r23, r123, resid = weingarten_propagate_algebraic(
            rho3[0, 0, k], rho3[1, 0, k], rho3[0, 1, k], rho3[1, 1, k], gauge,
            a["a21"], a["a23"], a["a31"], a["a23_1"], a["a31_2"],
        )
        if resid > 1e-9:
            raise SolverError(f"cube compatibility fails at layer {k}: {resid:.3e}")
        seeds = {(0, 0): gauge, (1, 0): r13, (0, 1): r23, (1, 1): r123}
        rho3[:, :, k + 1] = _extend_rho_layer(layers, rho3, k, seeds)
        rho_field = ScalarField(layers.window, rho3)
        for v in range(w2 - 1):
            for u in range(w1 - 1):
                worst_eq = max(
                    worst_eq, weingarten_cube_equations(layers, rho_field, (u, v, k))
                )
    rho_out = ScalarField(layers.window, rho3).freeze()
    db = dbkp_residual(rho_out, signs="weingarten")
    signs = np.sign(rho3)
    report = {
        "dbkp_max": float(db.max()),
        "weingarten_equations_max": float(worst_eq),
        "one_sign": bool(np.all(signs == signs.flat[0])),
    }
    return rho_out, report
