"""Tessellation of doubly ruled patches from (quad, scalars) data, OBJ export.

A patch over a crisscrossed quadrilateral is evaluated as the rational
bilinear blend whose weights are exactly the four cross scalars; its
half-parameter lines are the crossing segments.  Boundary samples are always
computed from the shared lattice edge's one-dimensional blend so adjacent
patches produce bit-identical points and the assembled mesh is watertight
without any epsilon welding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .hypnet import CrisscrossedQuad, HyperbolicNet, classify_cross, quad_at

__all__ = ["TriMesh", "eval_patch", "edge_blend", "tessellate", "write_obj",
           "max_crossedge_dihedral_deg"]


@dataclass
class TriMesh:
    vertices: np.ndarray  # (N, 3)
    triangles: np.ndarray  # (M, 3) int, 0-based
    groups: list  # one (name, first_triangle, n_triangles) per patch

    def __post_init__(self):
        if len(self.triangles) and (self.triangles.min() < 0
                                    or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle indices out of range")

    def min_triangle_area(self) -> float:
        p = self.vertices[self.triangles]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return float(0.5 * np.linalg.norm(cross, axis=1).min())


def eval_patch(quad: CrisscrossedQuad, u, v) -> np.ndarray:
    """Rational bilinear point(s) of the patch at parameters in [0, 1].

    The four corners carry the weights; the basis is the bilinear one, so
    (1/2, 0) etc. reproduce the cross vertices and (1/2, 1/2) the centre.
    Only internal crosses describe bounded patches with a safe denominator.
    """
    kind, _ = classify_cross(quad.rho)
    if kind != "internal":
        raise GeometryError("patch evaluation needs an internal cross")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    b = np.stack([(1 - u) * (1 - v), u * (1 - v), u * v, (1 - u) * v], axis=-1)
    weights = b * quad.rho
    denom = weights.sum(axis=-1)
    if np.any(np.abs(denom) < 1e-300):
        raise GeometryError("patch denominator underflow")
    num = weights @ quad.corners
    return num / denom[..., None]


def edge_blend(xa, xb, ra: float, rb: float, t) -> np.ndarray:
    """One-dimensional rational blend along an edge; shared by both patches.

    Both patches adjacent to a lattice edge call this with identical
    arguments in identical order, making shared boundary samples bit-equal.
    """
    t = np.asarray(t, dtype=float)
    wa = ra * (1 - t)
    wb = rb * t
    denom = wa + wb
    return (wa[..., None] * np.asarray(xa, dtype=float)
            + wb[..., None] * np.asarray(xb, dtype=float)) / denom[..., None]


def _patch_grid(net, rho, cell, resolution: int) -> np.ndarray:
    """(res+1, res+1, 3) samples; boundary rows come from shared-edge blends."""
    z1, z2 = cell
    w = net.window
    xv = net.vertices.values
    rv = rho.values
    res = resolution
    quad = quad_at(net, rho, cell)
    grid = np.empty((res + 1, res + 1, 3))
    ts = np.arange(1, res) / res
    # corners from the vertex array itself
    grid[0, 0] = xv[w.offset((z1, z2))]
    grid[res, 0] = xv[w.offset((z1 + 1, z2))]
    grid[res, res] = xv[w.offset((z1 + 1, z2 + 1))]
    grid[0, res] = xv[w.offset((z1, z2 + 1))]
    if res > 1:
        def lat_edge(i0, j0, i1, j1):
            return edge_blend(
                xv[w.offset((i0, j0))], xv[w.offset((i1, j1))],
                rv[w.offset((i0, j0))], rv[w.offset((i1, j1))], ts,
            )

        grid[1:res, 0] = lat_edge(z1, z2, z1 + 1, z2)            # v = 0
        grid[1:res, res] = lat_edge(z1, z2 + 1, z1 + 1, z2 + 1)  # v = 1
        grid[0, 1:res] = lat_edge(z1, z2, z1, z2 + 1)            # u = 0
        grid[res, 1:res] = lat_edge(z1 + 1, z2, z1 + 1, z2 + 1)  # u = 1
        uu, vv = np.meshgrid(ts, ts, indexing="ij")
        grid[1:res, 1:res] = eval_patch(quad, uu, vv)
    return grid


def tessellate(hyp: HyperbolicNet, resolution: int = 8) -> TriMesh:
    """Sample every patch on a (res+1)^2 grid and triangulate.

    Requires a net whose status is hyperbolic (all crosses internal).  The
    vertex order is row-major over quads and then over samples, so exports
    are deterministic.
    """
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    if hyp.status != "hyperbolic":
        raise GeometryError(f"cannot tessellate a net with status {hyp.status!r}")
    net, rho = hyp.surface, hyp.rho
    n1, n2 = net.window.shape
    res = resolution
    verts = []
    tris = []
    groups = []
    per_patch = (res + 1) ** 2
    for z1 in range(n1 - 1):
        for z2 in range(n2 - 1):
            base = len(groups) * per_patch
            grid = _patch_grid(net, rho, (z1, z2), res)
            verts.append(grid.reshape(-1, 3))
            first_tri = len(tris)
            for i in range(res):
                for j in range(res):
                    a = base + i * (res + 1) + j
                    b = base + (i + 1) * (res + 1) + j
                    c = base + (i + 1) * (res + 1) + (j + 1)
                    d = base + i * (res + 1) + (j + 1)
                    tris.append((a, b, c))
                    tris.append((a, c, d))
            groups.append((f"patch_{z1}_{z2}", first_tri, len(tris) - first_tri))
    return TriMesh(np.concatenate(verts, axis=0), np.array(tris, dtype=int), groups)


def write_obj(mesh: TriMesh, path):
    """Plain OBJ with one group per patch and 1-based face indices."""
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for name, first, count in mesh.groups:
            fh.write(f"g {name}\n")
            for a, b, c in mesh.triangles[first:first + count]:
                fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def max_crossedge_dihedral_deg(hyp: HyperbolicNet, resolution: int = 16) -> float:
    """Worst fold angle (degrees) between sampled triangles across patch seams.

    For a tangency-passing net this tends to zero as the sampling is
    refined, since the patches join with matching tangent planes along every
    interior edge.
    """
    net, rho = hyp.surface, hyp.rho
    n1, n2 = net.window.shape
    res = resolution
    grids = {}
    for z1 in range(n1 - 1):
        for z2 in range(n2 - 1):
            grids[(z1, z2)] = _patch_grid(net, rho, (z1, z2), res)
    worst = 0.0

    def fold(p0, p1, qa, qb):
        # triangles (p0, p1, qa) and (p1, p0, qb) share the segment p0-p1
        n_a = np.cross(p1 - p0, qa - p0)
        n_b = np.cross(p0 - p1, qb - p1)
        na = np.linalg.norm(n_a)
        nb = np.linalg.norm(n_b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        c = float(np.clip(abs(n_a @ n_b) / (na * nb), -1.0, 1.0))
        return float(np.degrees(np.arccos(c)))

    for z1 in range(n1 - 2):  # seams between (z1, z2) and (z1+1, z2)
        for z2 in range(n2 - 1):
            left = grids[(z1, z2)]
            right = grids[(z1 + 1, z2)]
            for j in range(res):
                worst = max(worst, fold(left[res, j], left[res, j + 1],
                                        left[res - 1, j], right[1, j]))
    for z2 in range(n2 - 2):  # seams between (z1, z2) and (z1, z2+1)
        for z1 in range(n1 - 1):
            low = grids[(z1, z2)]
            high = grids[(z1, z2 + 1)]
            for i in range(res):
                worst = max(worst, fold(low[i, res], low[i + 1, res],
                                        low[i, res - 1], high[i, 1]))
    return worst
