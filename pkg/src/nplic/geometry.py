"""Cells, normals and exact plane/cell clipping.

Sign convention: the volume fraction of a plane ``n . x + C = 0`` counts the
part of the cell where ``n . x + C <= 0``, so the reference fluid lies opposite
to the normal and alpha decreases monotonically in C.
"""

from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from math import factorial

import numpy as np

from nplic import _kernels

SIGN_CONVENTION = "alpha:n.x+C<=0"


class GeometryError(ValueError):
    """Invalid or degenerate geometric input."""


class MeshType(str, Enum):
    SQUARE = "square"
    TRIANGLE = "triangle"
    CUBE = "cube"
    TETRAHEDRON = "tetrahedron"

    @property
    def dim(self):
        return 2 if self in (MeshType.SQUARE, MeshType.TRIANGLE) else 3

    @property
    def is_simplex(self):
        return self in (MeshType.TRIANGLE, MeshType.TETRAHEDRON)

    @property
    def n_vertices(self):
        return {"square": 4, "triangle": 3, "cube": 8, "tetrahedron": 4}[self.value]

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown mesh type {value!r}; expected one of {names}") from None


_CANONICAL = {
    MeshType.SQUARE: [(0, 0), (1, 0), (1, 1), (0, 1)],
    MeshType.TRIANGLE: [(0, 0), (1, 0), (0, 1)],
    MeshType.CUBE: [((k >> 0) & 1, (k >> 1) & 1, (k >> 2) & 1) for k in range(8)],
    MeshType.TETRAHEDRON: [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)],
}

_EDGES = {
    MeshType.SQUARE: [(0, 1), (1, 2), (2, 3), (3, 0)],
    MeshType.TRIANGLE: [(0, 1), (1, 2), (2, 0)],
    MeshType.CUBE: [
        (a, b) for a, b in combinations(range(8), 2) if bin(a ^ b).count("1") == 1
    ],
    MeshType.TETRAHEDRON: list(combinations(range(4), 2)),
}


def _simplex_measure(points):
    p = np.asarray(points, dtype=float)
    return abs(np.linalg.det(p[1:] - p[0])) / factorial(p.shape[1])


@dataclass(frozen=True, eq=False)
class Cell:
    """A square, triangle, cube or tetrahedron given by its vertices.

    Squares are ordered counter-clockwise; cube vertex ``k`` sits at the
    corner with bits ``(k & 1, k >> 1 & 1, k >> 2 & 1)`` of the reference cube.
    """

    mesh_type: MeshType
    vertices: np.ndarray

    def __post_init__(self):
        mt = MeshType.parse(self.mesh_type)
        v = np.array(self.vertices, dtype=float)
        if v.shape != (mt.n_vertices, mt.dim):
            raise GeometryError(
                f"{mt.value} needs {mt.n_vertices} vertices of dimension {mt.dim}, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise GeometryError("cell vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "mesh_type", mt)
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self):
        return self.mesh_type.dim

    @property
    def pieces(self):
        if self.mesh_type is MeshType.SQUARE:
            return _kernels.SQUARE_TRIS
        if self.mesh_type is MeshType.CUBE:
            return _kernels.CUBE_TETS
        return np.arange(self.mesh_type.n_vertices, dtype=np.int64)[None, :]

    def piece_measures(self):
        return np.array([_simplex_measure(self.vertices[p]) for p in self.pieces])

    @property
    def measure(self):
        return float(self.piece_measures().sum())

    def _kernel_args(self):
        m = self.piece_measures()
        total = m.sum()
        scale = np.max(np.ptp(self.vertices, axis=0)) ** self.dim
        if not total > 1e-14 * scale or np.min(m) <= 0.0:
            raise GeometryError(f"degenerate {self.mesh_type.value} cell (zero measure)")
        return self.vertices, self.pieces, m / total

    @property
    def edges(self):
        return _EDGES[self.mesh_type]


def canonical_cell(mesh_type):
    """Unit square/cube, or the unit right simplex with a vertex at the origin."""
    mt = MeshType.parse(mesh_type)
    return Cell(mt, np.array(_CANONICAL[mt], dtype=float))


def angles_to_normal(theta, phi=None):
    """Unit normal from polar (2D) or spherical (3D) angles.

    2D gives ``(cos theta, sin theta)``; 3D gives
    ``(sin theta cos phi, sin theta sin phi, cos theta)``. Arrays broadcast and
    the normal is stacked on the last axis.
    """
    theta = np.asarray(theta, dtype=float)
    if phi is None:
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack(np.broadcast_arrays(st * np.cos(phi), st * np.sin(phi), np.cos(theta)), axis=-1)


def normal_to_angles(n):
    """Inverse of :func:`angles_to_normal`.

    Returns ``theta`` in 2D (in ``(-pi, pi]``) and ``(theta, phi)`` in 3D with
    ``theta`` in ``[0, pi]`` and ``phi`` in ``(0, 2 pi]``. At the poles ``phi``
    is undefined and reported as ``2 pi``.
    """
    n = np.asarray(n, dtype=float)
    if n.shape[-1] == 2:
        return np.arctan2(n[..., 1], n[..., 0])
    if n.shape[-1] != 3:
        raise GeometryError(f"normal must have 2 or 3 components, got {n.shape[-1]}")
    rho = np.hypot(n[..., 0], n[..., 1])
    theta = np.arctan2(rho, n[..., 2])
    phi = np.arctan2(n[..., 1], n[..., 0])
    phi = np.where(phi <= 0.0, phi + 2.0 * np.pi, phi)
    phi = np.where(rho == 0.0, 2.0 * np.pi, phi)
    return theta, phi


def unit_normal(n, dim=None):
    n = np.asarray(n, dtype=float)
    if dim is not None and n.shape[-1] != dim:
        raise GeometryError(f"normal must have {dim} components, got {n.shape[-1]}")
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    if np.any(norm == 0.0) or not np.all(np.isfinite(n)):
        raise GeometryError("normal must be finite and nonzero")
    return n / norm


def c_bounds(cell, n):
    """Bracket ``(c_min, c_max)``: alpha is 1 at ``c_min`` and 0 at ``c_max``."""
    n = unit_normal(n, cell.dim)
    return _kernels.cell_bounds(cell.vertices, n)


def volume_fraction(cell, n, c):
    """Exact fraction of ``cell`` where ``n . x + c <= 0``."""
    n = unit_normal(n, cell.dim)
    verts, pieces, weights = cell._kernel_args()
    return float(_kernels.cell_fraction(verts, pieces, weights, n, float(c)))


def volume_fractions(cell, normals, cs):
    """Vectorised :func:`volume_fraction` over matching rows of normals and cs."""
    normals = unit_normal(np.atleast_2d(normals), cell.dim)
    cs = np.ascontiguousarray(np.broadcast_to(np.asarray(cs, dtype=float), normals.shape[:1]))
    verts, pieces, weights = cell._kernel_args()
    return _kernels.fraction_batch(verts, pieces, weights, np.ascontiguousarray(normals), cs)


def interface_polygon(cell, n, c, atol=1e-12):
    """Ordered vertices of ``plane & cell``.

    A 2-point segment in 2D, a convex polygon (counter-clockwise about ``n``)
    in 3D. Raises :class:`GeometryError` if the plane misses the interior.
    """
    n = unit_normal(n, cell.dim)
    c = float(c)
    c_min, c_max = _kernels.cell_bounds(cell.vertices, n)
    if not c_min < c < c_max:
        raise GeometryError(f"plane C={c!r} does not cut the cell interior ({c_min!r}, {c_max!r})")
    verts = cell.vertices
    d = verts @ n + c
    pts = []
    for a, b in cell.edges:
        da, db = d[a], d[b]
        if abs(da) <= atol and abs(db) <= atol:
            cand = [verts[a], verts[b]]
        elif abs(da) <= atol:
            cand = [verts[a]]
        elif abs(db) <= atol:
            cand = [verts[b]]
        elif (da < 0.0) != (db < 0.0):
            t = da / (da - db)
            cand = [verts[a] + t * (verts[b] - verts[a])]
        else:
            cand = []
        for p in cand:
            if not any(np.allclose(p, q, rtol=0.0, atol=1e-12) for q in pts):
                pts.append(p)
    pts = np.array(pts)
    if cell.dim == 2:
        if len(pts) != 2:
            raise GeometryError(f"expected a segment, found {len(pts)} intersection points")
        return pts
    centre = pts.mean(axis=0)
    helper = np.eye(3)[np.argmin(np.abs(n))]
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    w = np.cross(n, u)
    rel = pts - centre
    order = np.argsort(np.arctan2(rel @ w, rel @ u))
    return pts[order]
