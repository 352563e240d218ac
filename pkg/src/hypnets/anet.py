"""Discrete A-nets: nets with planar vertex stars, built from normal fields.

A net is encoded by its vertices x and, when available, a normal field n with
edges x_i - x = n_i x n and per-quadrilateral coefficients a governing the
evolution n_ij - n = a (n_j - n_i).  Coefficients are stored for ordered plane
pairs (i, j) with i < j in exactly that orientation; the value for the
reversed pair is the negative.
"""

from __future__ import annotations

import numpy as np

from .errors import GenericityError, SolverError
from .geometry import Tolerances, coplanarity_residual
from .lattice import FaceField, ScalarField, VectorField, Window

__all__ = [
    "ANet",
    "TauField",
    "moutard_step",
    "moutard_coefficient_variant",
    "lelieuvre_integrate",
    "solve_surface_cauchy",
    "solve_layered_cauchy",
    "solve_two_layer_cauchy",
    "bw_rescale",
    "parallel_invariants",
    "evolve_moutard_cube",
    "evolve_cube_lex",
    "tau_potential",
    "dbkp_residual",
    "net_scale",
    "star_coplanarity_max",
    "lelieuvre_residual_max",
    "moutard_residual_max",
    "min_quad_volume",
    "recompute_moutard",
]

_CLOSURE_TOL = 1e-10
_SINGULAR = 1e-300


class ANet:
    """Vertices plus optional Lelieuvre normals and Moutard coefficients."""

    def __init__(self, vertices: VectorField, normals: VectorField | None = None,
                 moutard: dict | None = None):
        self.vertices = vertices
        self.normals = normals
        self.moutard = dict(moutard or {})
        for (i, j) in self.moutard:
            if not i < j:
                raise ValueError("coefficients are stored for pairs with i < j")

    @property
    def dim(self) -> int:
        return self.vertices.window.dim

    @property
    def window(self) -> Window:
        return self.vertices.window

    def coefficient(self, i: int, j: int) -> FaceField:
        """Face field for the (i, j) orientation; negated copy when i > j."""
        if i < j:
            return self.moutard[(i, j)]
        flipped = self.moutard[(j, i)].copy()
        flipped.values = -flipped.values
        return flipped

    def plane_pairs(self):
        return sorted(self.moutard)

    def layer(self, k: int) -> "ANet":
        """2D sub-net at height k of a 3D net (vertices and normals only)."""
        if self.dim != 3:
            raise ValueError("layer extraction needs a 3D net")
        (l1, h1), (l2, h2), _ = self.window.bounds
        win2 = Window([(l1, h1), (l2, h2)])
        verts = VectorField(win2, self.vertices.values[:, :, k - self.window.bounds[2][0]])
        normals = None
        if self.normals is not None:
            normals = VectorField(win2, self.normals.values[:, :, k - self.window.bounds[2][0]])
        moutard = {}
        if (1, 2) in self.moutard:
            a12 = self.moutard[(1, 2)]
            f = FaceField(win2, (1, 2), a12.values[:, :, k - self.window.bounds[2][0]])
            moutard[(1, 2)] = f
        return ANet(verts.freeze(), normals.freeze() if normals else None, moutard)


def net_scale(net_or_field) -> float:
    """Bounding-box diagonal of the vertex set; the reference length for residuals."""
    field = net_or_field.vertices if isinstance(net_or_field, ANet) else net_or_field
    pts = field.values.reshape(-1, 3)
    span = pts.max(axis=0) - pts.min(axis=0)
    return float(np.linalg.norm(span))


def moutard_step(n, n_i, n_j, a: float) -> np.ndarray:
    """One evolution step: the new diagonal value n + a (n_j - n_i)."""
    n = np.asarray(n, dtype=float)
    return n + a * (np.asarray(n_j, dtype=float) - np.asarray(n_i, dtype=float))


def moutard_coefficient_variant(a: float, orientation: str = "canonical") -> float:
    """Derived coefficient value for a reoriented quadrilateral diagram.

    Flipping one diagonal arrow changes the sign, swapping the long and short
    diagonals takes the reciprocal.
    """
    if orientation == "canonical":
        return a
    if orientation == "sign-flipped":
        return -a
    if orientation == "reciprocal":
        return 1.0 / a
    if orientation == "sign-flipped-reciprocal":
        return -1.0 / a
    raise ValueError(f"unknown orientation {orientation!r}")


def _edge_fields(normals: VectorField):
    """Edge vectors e_k(z) = n(z + e_k) x n(z) for each direction."""
    vals = normals.values
    m = normals.window.dim
    edges = []
    for k in range(m):
        sl_hi = [slice(None)] * m
        sl_lo = [slice(None)] * m
        sl_hi[k] = slice(1, None)
        sl_lo[k] = slice(0, -1)
        edges.append(np.cross(vals[tuple(sl_hi)], vals[tuple(sl_lo)]))
    return edges


def lelieuvre_integrate(normals: VectorField, x0, closure_tol: float = _CLOSURE_TOL) -> VectorField:
    """Vertices obtained by summing the edge vectors n_i x n from x0.

    Path independence is asserted by checking the closure of every elementary
    quadrilateral; failure means the normals do not solve a Moutard system.
    """
    window = normals.window
    m = window.dim
    if not normals.all_set():
        raise SolverError("normal field is not fully populated")
    edges = _edge_fields(normals)
    edge_scale = max(float(np.abs(e).max(initial=0.0)) for e in edges)
    if edge_scale == 0.0:
        raise GenericityError("all edge vectors vanish; normal field is degenerate")
    # Closure around each elementary (i, j) quadrilateral.
    for i in range(m):
        for j in range(i + 1, m):
            ei, ej = edges[i], edges[j]
            sl_i = [slice(None)] * m
            sl_i[j] = slice(0, -1)
            sl_j = [slice(None)] * m
            sl_j[i] = slice(0, -1)
            sl_i_up = list(sl_i)
            sl_i_up[j] = slice(1, None)
            sl_j_up = list(sl_j)
            sl_j_up[i] = slice(1, None)
            gap = ei[tuple(sl_i)] + ej[tuple(sl_j_up)] - ej[tuple(sl_j)] - ei[tuple(sl_i_up)]
            worst = float(np.abs(gap).max(initial=0.0))
            if worst > closure_tol * edge_scale:
                raise SolverError(
                    f"quadrilateral closure fails in plane ({i + 1},{j + 1}): "
                    f"{worst / edge_scale:.3e} relative"
                )
    verts = VectorField(window)
    x0 = np.asarray(x0, dtype=float)
    origin = window.origin
    verts.set(origin, x0)
    # Integrate axis 1 first, then sweep the remaining axes in order.
    shape = window.shape
    vals = verts.values
    vals[(0,) * m] = x0
    for k in range(m):
        # extend along axis k for all already-filled indices with lower axes full
        sl_prev = [slice(None)] * m
        sl_next = [slice(None)] * m
        for ax in range(k + 1, m):
            sl_prev[ax] = 0
            sl_next[ax] = 0
        for pos in range(shape[k] - 1):
            src = list(sl_prev)
            dst = list(sl_next)
            src[k] = pos
            dst[k] = pos + 1
            step_slice = list(src)
            vals[tuple(dst)] = vals[tuple(src)] + edges[k][tuple(step_slice)]
    verts._set[...] = True
    return verts.freeze()


def _genericity_check(net: ANet, tol: Tolerances):
    vol, pair, cell = min_quad_volume_located(net)
    if vol < tol.genericity_rel:
        raise GenericityError(
            f"non-skew elementary quadrilateral at cell {cell} in plane {pair}: "
            f"normalized volume {vol:.3e}"
        )


def solve_surface_cauchy(n_axis1, n_axis2, a12, x0=(0.0, 0.0, 0.0),
                         tol: Tolerances = Tolerances()) -> ANet:
    """A-surface from normals along both axes and coefficients on every quad.

    n_axis1/n_axis2 are (W1, 3) and (W2, 3) arrays agreeing at the origin,
    a12 an (W1-1, W2-1) array.  Returns a net with normals, vertices and the
    coefficient field; genericity violations abort with the failing cell.
    """
    n1 = np.asarray(n_axis1, dtype=float)
    n2 = np.asarray(n_axis2, dtype=float)
    a = np.asarray(a12, dtype=float)
    w1, w2 = len(n1), len(n2)
    if a.shape != (w1 - 1, w2 - 1):
        raise ValueError(f"coefficient array must have shape {(w1 - 1, w2 - 1)}")
    if np.linalg.norm(n1[0] - n2[0]) > 1e-12 * max(1.0, float(np.abs(n1[0]).max())):
        raise ValueError("axis normal data disagree at the origin")
    window = Window.from_shape(w1, w2)
    normals = VectorField(window)
    vals = normals.values
    vals[:, 0] = n1
    vals[0, :] = n2
    for z2 in range(w2 - 1):
        for z1 in range(w1 - 1):
            if a[z1, z2] == 0.0:
                raise GenericityError(f"zero coefficient at cell {(z1, z2)}")
            vals[z1 + 1, z2 + 1] = moutard_step(
                vals[z1, z2], vals[z1 + 1, z2], vals[z1, z2 + 1], a[z1, z2]
            )
    normals._set[...] = True
    normals.freeze()
    verts = lelieuvre_integrate(normals, x0)
    field = FaceField(window, (1, 2), a)
    net = ANet(verts, normals, {(1, 2): field.freeze()})
    _genericity_check(net, tol)
    return net


def evolve_moutard_cube(a12: float, a23: float, a31: float):
    """Coefficients on the far faces of a hexahedron from the near ones.

    Input is the cyclic family (a12, a23, a31); every member is divided by
    the same denominator, so opposite-face ratios coincide by construction.
    Returns (a12_3, a23_1, a31_2, denom).
    """
    denom = -(a12 * a23 + a23 * a31 + a31 * a12)
    if abs(denom) < _SINGULAR:
        raise SolverError("singular hexahedron: zero coefficient denominator")
    return a12 / denom, a23 / denom, a31 / denom, denom


def evolve_cube_lex(a12: float, a13: float, a23: float):
    """Same evolution in the stored (i < j) orientation.

    Returns (a12_3, a13_2, a23_1, denom) with denom = a12 a13 + a13 a23 - a12 a23.
    """
    denom = a12 * a13 + a13 * a23 - a12 * a23
    if abs(denom) < _SINGULAR:
        raise SolverError("singular hexahedron: zero coefficient denominator")
    return a12 / denom, a13 / denom, a23 / denom, denom


def solve_layered_cauchy(n_axis1, n_axis2, n_axis3, a12_plane, a13_strip, a23_strip,
                         x0=(0.0, 0.0, 0.0), tol: Tolerances = Tolerances(),
                         consistency_tol: float = 1e-8) -> ANet:
    """3D A-net from axis normals and coefficient seeds on the coordinate planes.

    Seeds: a12_plane[(z1, z2)] on the (1,2)-plane, a13_strip[(z1, z3)] on the
    (1,3)-plane and a23_strip[(z2, z3)] on the (2,3)-plane.  Coefficients are
    propagated cube by cube, normals by the plane evolutions, vertices by
    integration.  The redundant vertical route is recomputed as a consistency
    check.
    """
    n1 = np.asarray(n_axis1, dtype=float)
    n2 = np.asarray(n_axis2, dtype=float)
    n3 = np.asarray(n_axis3, dtype=float)
    a12_plane = np.asarray(a12_plane, dtype=float)
    a13_strip = np.asarray(a13_strip, dtype=float)
    a23_strip = np.asarray(a23_strip, dtype=float)
    w1, w2, w3 = len(n1), len(n2), len(n3)
    if a12_plane.shape != (w1 - 1, w2 - 1):
        raise ValueError(f"a12 seed must have shape {(w1 - 1, w2 - 1)}")
    if a13_strip.shape != (w1 - 1, w3 - 1):
        raise ValueError(f"a13 seed must have shape {(w1 - 1, w3 - 1)}")
    if a23_strip.shape != (w2 - 1, w3 - 1):
        raise ValueError(f"a23 seed must have shape {(w2 - 1, w3 - 1)}")
    window = Window.from_shape(w1, w2, w3)
    a12 = FaceField(window, (1, 2))
    a13 = FaceField(window, (1, 3))
    a23 = FaceField(window, (2, 3))
    for z1 in range(w1 - 1):
        for z2 in range(w2 - 1):
            a12.set((z1, z2, 0), a12_plane[z1, z2])
    for z1 in range(w1 - 1):
        for z3 in range(w3 - 1):
            a13.set((z1, 0, z3), a13_strip[z1, z3])
    for z2 in range(w2 - 1):
        for z3 in range(w3 - 1):
            a23.set((0, z2, z3), a23_strip[z2, z3])
    for z3 in range(w3 - 1):
        for z2 in range(w2 - 1):
            for z1 in range(w1 - 1):
                c12 = float(a12.get((z1, z2, z3)))
                c13 = float(a13.get((z1, z2, z3)))
                c23 = float(a23.get((z1, z2, z3)))
                try:
                    s12, s13, s23, _ = evolve_cube_lex(c12, c13, c23)
                except SolverError as exc:
                    raise SolverError(f"{exc} at cube {(z1, z2, z3)}") from exc
                a12.set((z1, z2, z3 + 1), s12)
                a13.set((z1, z2 + 1, z3), s13)
                a23.set((z1 + 1, z2, z3), s23)
    for f in (a12, a13, a23):
        f.freeze()

    normals = VectorField(window)
    vals = normals.values
    vals[:, 0, 0] = n1
    vals[0, :, 0] = n2
    vals[0, 0, :] = n3
    for z2 in range(w2 - 1):  # bottom layer
        for z1 in range(w1 - 1):
            vals[z1 + 1, z2 + 1, 0] = moutard_step(
                vals[z1, z2, 0], vals[z1 + 1, z2, 0], vals[z1, z2 + 1, 0],
                float(a12.get((z1, z2, 0))),
            )
    worst_consistency = 0.0
    normal_scale = float(np.abs(vals[:, :, 0]).max())
    for z3 in range(w3 - 1):
        for z1 in range(w1 - 1):  # row z2 = 0 of the next layer
            vals[z1 + 1, 0, z3 + 1] = moutard_step(
                vals[z1, 0, z3], vals[z1 + 1, 0, z3], vals[z1, 0, z3 + 1],
                float(a13.get((z1, 0, z3))),
            )
        for z2 in range(w2 - 1):  # column z1 = 0
            vals[0, z2 + 1, z3 + 1] = moutard_step(
                vals[0, z2, z3], vals[0, z2 + 1, z3], vals[0, z2, z3 + 1],
                float(a23.get((0, z2, z3))),
            )
        for z2 in range(w2 - 1):  # layer interior via the (1,2) evolution
            for z1 in range(w1 - 1):
                vals[z1 + 1, z2 + 1, z3 + 1] = moutard_step(
                    vals[z1, z2, z3 + 1], vals[z1 + 1, z2, z3 + 1],
                    vals[z1, z2 + 1, z3 + 1], float(a12.get((z1, z2, z3 + 1))),
                )
        # redundant vertical route must reproduce the same layer
        for z2 in range(1, w2):
            for z1 in range(w1 - 1):
                alt = moutard_step(
                    vals[z1, z2, z3], vals[z1 + 1, z2, z3], vals[z1, z2, z3 + 1],
                    float(a13.get((z1, z2, z3))),
                )
                dev = float(np.linalg.norm(alt - vals[z1 + 1, z2, z3 + 1]))
                worst_consistency = max(worst_consistency, dev)
        normal_scale = max(normal_scale, float(np.abs(vals[:, :, z3 + 1]).max()))
    if worst_consistency > consistency_tol * normal_scale:
        raise SolverError(
            f"vertical evolution routes disagree: {worst_consistency / normal_scale:.3e}"
        )
    normals._set[...] = True
    normals.freeze()
    verts = lelieuvre_integrate(normals, x0)
    net = ANet(verts, normals, {(1, 2): a12, (1, 3): a13, (2, 3): a23})
    _genericity_check(net, tol)
    return net


def solve_two_layer_cauchy(n_axis1, n_axis2, n_pair, a12_plane, a13_row, a23_col,
                           x0=(0.0, 0.0, 0.0), tol: Tolerances = Tolerances()) -> ANet:
    """Two-layer special case of the layered solver (window Z^2 x {0, 1})."""
    n3 = np.asarray(n_pair, dtype=float)
    if n3.shape != (2, 3):
        raise ValueError("n_pair must hold the origin normal and its vertical neighbour")
    a13 = np.asarray(a13_row, dtype=float).reshape(-1, 1)
    a23 = np.asarray(a23_col, dtype=float).reshape(-1, 1)
    return solve_layered_cauchy(n_axis1, n_axis2, n3, a12_plane, a13, a23, x0, tol)


def bw_rescale(normals: VectorField, alpha: float) -> VectorField:
    """Rescale by alpha on even-parity vertices, 1/alpha on odd-parity ones.

    Integrated vertices are unchanged because every edge pairs one vertex of
    each parity.
    """
    if alpha == 0.0:
        raise ValueError("rescaling factor must be nonzero")
    window = normals.window
    grids = np.meshgrid(*[np.arange(lo, hi + 1) for lo, hi in window.bounds],
                        indexing="ij")
    parity = np.zeros(window.shape, dtype=int)
    for g in grids:
        parity += g
    factor = np.where(parity % 2 == 0, alpha, 1.0 / alpha)
    out = VectorField(window, normals.values * factor[..., None])
    return out.freeze()


def recompute_moutard(normals: VectorField) -> dict:
    """Least-squares coefficients a = <n_ij - n, n_j - n_i> / |n_j - n_i|^2."""
    window = normals.window
    m = window.dim
    vals = normals.values
    out = {}
    for i in range(1, m + 1):
        for j in range(i + 1, m + 1):
            field = FaceField(window, (i, j))
            for idx in field.window.indices():
                n = vals[window.offset(idx)]
                n_i = vals[window.offset(tuple(v + (1 if k == i - 1 else 0) for k, v in enumerate(idx)))]
                n_j = vals[window.offset(tuple(v + (1 if k == j - 1 else 0) for k, v in enumerate(idx)))]
                n_ij = vals[window.offset(tuple(v + (1 if k in (i - 1, j - 1) else 0) for k, v in enumerate(idx)))]
                diff = n_j - n_i
                denom = float(diff @ diff)
                if denom == 0.0:
                    raise GenericityError(f"degenerate short diagonal at {idx}")
                field.set(idx, float((n_ij - n) @ diff) / denom)
            out[(i, j)] = field.freeze()
    return out


def parallel_invariants(net: ANet, pair=(1, 2)) -> dict:
    """Products a(z) a(z + e_d) of coefficients on edge-adjacent quadrilaterals.

    Returns one array per adjacency direction d in the plane pair.  The
    products do not depend on the choice of the normal field.
    """
    if pair not in net.moutard:
        raise ValueError(f"net has no coefficients for plane pair {pair}")
    a = net.moutard[pair].values
    i, j = pair
    out = {}
    for d in (i, j):
        ax = d - 1
        sl_lo = [slice(None)] * a.ndim
        sl_hi = [slice(None)] * a.ndim
        sl_lo[ax] = slice(0, -1)
        sl_hi[ax] = slice(1, None)
        out[d] = a[tuple(sl_lo)] * a[tuple(sl_hi)]
    return out


class TauField:
    """Vertex potential with a^{ij} = tau_i tau_j / (tau tau_ij) for one family."""

    FAMILIES = ("lexicographic", "weingarten")

    def __init__(self, tau: ScalarField, family: str):
        if family not in self.FAMILIES:
            raise ValueError(f"unknown coefficient family {family!r}")
        if np.any(tau.values == 0.0):
            raise ValueError("tau must be nonzero everywhere")
        self.tau = tau
        self.family = family


def family_coefficient(net: ANet, pair, family: str) -> FaceField:
    """Coefficient field of the selected ordered family for a stored plane pair.

    The lexicographic family keeps the stored orientation; the other family
    reverses the (1,2) and (1,3) orientations, i.e. uses (a21, a23, a31).
    """
    i, j = pair
    field = net.moutard[(i, j)]
    if family == "lexicographic":
        return field
    if family == "weingarten":
        if (i, j) in ((1, 2), (1, 3)):
            flipped = field.copy()
            flipped.values = -flipped.values
            return flipped
        return field
    raise ValueError(f"unknown coefficient family {family!r}")


def tau_potential(net: ANet, family: str = "lexicographic", axis_seeds=None,
                  rel_tol: float = 1e-10) -> TauField:
    """Construct a vertex potential for the selected coefficient family.

    axis_seeds, when given, hold nonzero tau values along each coordinate
    axis (a list of m arrays sharing the origin value); the default is 1
    everywhere, which fixes the product gauge f1(z1) f2(z2) f3(z3).  The
    defining relation is asserted on every face before returning.
    """
    window = net.window
    m = window.dim
    shape = window.shape
    if axis_seeds is None:
        axis_seeds = [np.ones(shape[k]) for k in range(m)]
    axis_seeds = [np.asarray(s, dtype=float) for s in axis_seeds]
    for k, s in enumerate(axis_seeds):
        if s.shape != (shape[k],):
            raise ValueError(f"axis seed {k + 1} must have length {shape[k]}")
        if np.any(s == 0.0):
            raise ValueError("tau seeds must be nonzero")
    for s in axis_seeds[1:]:
        if s[0] != axis_seeds[0][0]:
            raise ValueError("axis seeds must agree at the origin")

    coeffs = {pair: family_coefficient(net, pair, family) for pair in net.plane_pairs()}
    for pair, f in coeffs.items():
        if np.any(f.values == 0.0):
            raise SolverError(f"zero coefficient in plane pair {pair}")

    tau = ScalarField(window)
    vals = tau.values

    def fill_plane(ci, cj, fixed):
        """Fill the (ci, cj) plane at the pinned remaining coordinates."""
        c = coeffs[(ci, cj)].values
        ni, nj = shape[ci - 1], shape[cj - 1]
        idx = [0] * m
        for k, v in fixed.items():
            idx[k - 1] = v

        def at(zi, zj):
            return tuple(
                zi if k == ci - 1 else (zj if k == cj - 1 else idx[k])
                for k in range(m)
            )

        for zj in range(nj - 1):
            for zi in range(ni - 1):
                cval = c[at(zi, zj)]
                vals[at(zi + 1, zj + 1)] = (
                    vals[at(zi + 1, zj)] * vals[at(zi, zj + 1)]
                    / (vals[at(zi, zj)] * cval)
                )

    if m == 2:
        vals[:, 0] = axis_seeds[0]
        vals[0, :] = axis_seeds[1]
        fill_plane(1, 2, {})
    elif m == 3:
        vals[:, 0, 0] = axis_seeds[0]
        vals[0, :, 0] = axis_seeds[1]
        vals[0, 0, :] = axis_seeds[2]
        fill_plane(1, 2, {3: 0})
        fill_plane(1, 3, {2: 0})
        fill_plane(2, 3, {1: 0})
        # upper layers: rows/columns are known, fill interiors via the (1,2) relation
        for z3 in range(1, shape[2]):
            c = coeffs[(1, 2)].values
            for z2 in range(shape[1] - 1):
                for z1 in range(shape[0] - 1):
                    vals[z1 + 1, z2 + 1, z3] = (
                        vals[z1 + 1, z2, z3] * vals[z1, z2 + 1, z3]
                        / (vals[z1, z2, z3] * c[z1, z2, z3])
                    )
    else:
        raise ValueError("tau potentials are built for m = 2 or 3 only")
    tau._set[...] = True
    tau.freeze()

    field = TauField(tau, family)
    worst = tau_defining_residual(net, field)
    if worst > rel_tol:
        raise SolverError(
            f"coefficients admit no potential for this family: residual {worst:.3e}"
        )
    return field


def tau_defining_residual(net: ANet, field: TauField) -> float:
    """Max relative error of a^{ij} = tau_i tau_j / (tau tau_ij) over all faces."""
    window = net.window
    m = window.dim
    vals = field.tau.values
    worst = 0.0
    for pair in net.plane_pairs():
        c = family_coefficient(net, pair, field.family).values
        i, j = pair

        def shifted(di, dj):
            s = [slice(None)] * m
            for ax in range(m):
                if ax == i - 1:
                    s[ax] = slice(1, None) if di else slice(0, -1)
                elif ax == j - 1:
                    s[ax] = slice(1, None) if dj else slice(0, -1)
            return vals[tuple(s)]

        pred = shifted(1, 0) * shifted(0, 1) / (shifted(0, 0) * shifted(1, 1))
        worst = max(worst, float(np.max(np.abs(pred - c) / np.abs(c))))
    return worst


_FAMILY_SIGNS = {"weingarten": (-1.0, -1.0, 1.0), "lexicographic": (-1.0, 1.0, -1.0)}


def dbkp_residual(tau, signs="weingarten"):
    """Per-cube residual of tau tau_123 + e1 tau_1 tau_23 + e2 tau_2 tau_13 + e3 tau_3 tau_12.

    signs may be a family name, an explicit sign triple, or three per-cube
    coefficient arrays for the non-autonomous variant.  The residual is
    normalized by the largest of the four term magnitudes.
    """
    if isinstance(tau, TauField):
        tau = tau.tau
    vals = tau.values if isinstance(tau, ScalarField) else np.asarray(tau, dtype=float)
    if vals.ndim != 3 or min(vals.shape) < 2:
        raise ValueError("dBKP residual needs a 3D window of extent >= 2 everywhere")
    if isinstance(signs, str):
        signs = _FAMILY_SIGNS[signs]
    e1, e2, e3 = (np.asarray(s, dtype=float) for s in signs)

    def s(d1, d2, d3):
        return vals[
            slice(1, None) if d1 else slice(0, -1),
            slice(1, None) if d2 else slice(0, -1),
            slice(1, None) if d3 else slice(0, -1),
        ]

    t0 = s(0, 0, 0) * s(1, 1, 1)
    t1 = s(1, 0, 0) * s(0, 1, 1)
    t2 = s(0, 1, 0) * s(1, 0, 1)
    t3 = s(0, 0, 1) * s(1, 1, 0)
    num = np.abs(t0 + e1 * t1 + e2 * t2 + e3 * t3)
    den = np.maximum.reduce([np.abs(t0), np.abs(t1), np.abs(t2), np.abs(t3)])
    den = np.where(den == 0.0, 1.0, den)
    return num / den


def star_coplanarity_max(net: ANet) -> float:
    """Max coplanarity residual over all vertex stars with at least 3 neighbours."""
    window = net.window
    m = window.dim
    worst = 0.0
    vals = net.vertices.values
    for idx in window.indices():
        star = [vals[window.offset(idx)]]
        for d in range(1, m + 1):
            for step in (-1, 1):
                nb = tuple(v + (step if k == d - 1 else 0) for k, v in enumerate(idx))
                if window.contains(nb):
                    star.append(vals[window.offset(nb)])
        if len(star) >= 4:
            worst = max(worst, coplanarity_residual(np.array(star)))
    return worst


def lelieuvre_residual_max(net: ANet) -> float:
    """Max |x_i - x - n_i x n| over all edges, relative to the net scale."""
    if net.normals is None:
        raise ValueError("net carries no normal field")
    scale = net_scale(net)
    if scale == 0.0:
        raise GenericityError("net has zero extent")
    m = net.dim
    xv, nv = net.vertices.values, net.normals.values
    worst = 0.0
    for k in range(m):
        sl_hi = [slice(None)] * m
        sl_lo = [slice(None)] * m
        sl_hi[k] = slice(1, None)
        sl_lo[k] = slice(0, -1)
        lhs = xv[tuple(sl_hi)] - xv[tuple(sl_lo)]
        rhs = np.cross(nv[tuple(sl_hi)], nv[tuple(sl_lo)])
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst / scale


def moutard_residual_max(net: ANet) -> float:
    """Max |n_ij - n - a (n_j - n_i)| over all faces, relative to normal scale."""
    if net.normals is None:
        raise ValueError("net carries no normal field")
    nv = net.normals.values
    m = net.dim
    nscale = float(np.abs(nv).max())
    worst = 0.0
    for (i, j), field in net.moutard.items():
        a = field.values

        def corner(di, dj):
            s = [slice(None)] * m
            for ax in range(m):
                if ax == i - 1:
                    s[ax] = slice(1, None) if di else slice(0, -1)
                elif ax == j - 1:
                    s[ax] = slice(1, None) if dj else slice(0, -1)
            return nv[tuple(s)]

        gap = corner(1, 1) - corner(0, 0) - a[..., None] * (corner(0, 1) - corner(1, 0))
        worst = max(worst, float(np.abs(gap).max()))
    return worst / nscale


def min_quad_volume(net: ANet) -> float:
    """Smallest normalized tetrahedron volume over all elementary quadrilaterals.

    The volume spanned by one corner and its three companions is divided by
    the volume an orthogonal frame with the same edge lengths would span, so
    the measure is scale-free and insensitive to elongated quadrilaterals.
    """
    if net_scale(net) == 0.0:
        raise GenericityError("net has zero extent")
    xv = net.vertices.values
    m = net.dim
    best = np.inf
    for i in range(1, m + 1):
        for j in range(i + 1, m + 1):
            def corner(di, dj):
                s = [slice(None)] * m
                for ax in range(m):
                    if ax == i - 1:
                        s[ax] = slice(1, None) if di else slice(0, -1)
                    elif ax == j - 1:
                        s[ax] = slice(1, None) if dj else slice(0, -1)
                return xv[tuple(s)]

            p0, p1, p2, p3 = corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)
            u, v, w = p1 - p0, p2 - p0, p3 - p0
            det = np.einsum("...i,...i->...", np.cross(u, v), w)
            frame = (
                np.linalg.norm(u, axis=-1)
                * np.linalg.norm(v, axis=-1)
                * np.linalg.norm(w, axis=-1)
            )
            vol = np.abs(det) / np.where(frame == 0.0, 1.0, frame)
            best = min(best, float(vol.min()))
    return best
