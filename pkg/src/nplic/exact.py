"""Exact inverse PLIC: find C from (n, alpha0) by bracketed root finding.

Arbitrary triangles and tetrahedra are reduced to the canonical unit simplex
by an affine map ``x = origin + A @ delta``; ``A = R.T @ Q`` where ``R`` aligns
the simplex with the axes and ``Q`` is upper triangular.
"""

from dataclasses import dataclass

import numpy as np

from nplic import _kernels
from nplic.geometry import (
    Cell,
    GeometryError,
    MeshType,
    canonical_cell,
    unit_normal,
)

DEFAULT_TOL = 1e-12


def _check_alpha(alpha0):
    alpha0 = float(alpha0)
    if not 0.0 <= alpha0 <= 1.0:
        raise ValueError(f"alpha0 must lie in [0, 1], got {alpha0!r}")
    return alpha0


def solve_c_exact(cell, n, alpha0, tol_alpha=DEFAULT_TOL):
    """Plane constant C with ``|volume_fraction(cell, n, C) - alpha0| <= tol_alpha``.

    ``alpha0 == 0`` returns ``c_max`` and ``alpha0 == 1`` returns ``c_min``.
    """
    alpha0 = _check_alpha(alpha0)
    if not tol_alpha > 0:
        raise ValueError("tol_alpha must be positive")
    n = unit_normal(n, cell.dim)
    verts, pieces, weights = cell._kernel_args()
    return float(_kernels.solve_cell(verts, pieces, weights, n, alpha0, tol_alpha))


def solve_c_exact_batch(cell, normals, alphas, tol_alpha=DEFAULT_TOL):
    """Loop :func:`solve_c_exact` over rows; compiled, one query at a time."""
    alphas = np.ascontiguousarray(alphas, dtype=float).reshape(-1)
    if np.any((alphas < 0.0) | (alphas > 1.0)) or not np.all(np.isfinite(alphas)):
        raise ValueError("alpha0 values must lie in [0, 1]")
    normals = np.ascontiguousarray(unit_normal(np.atleast_2d(normals), cell.dim))
    if normals.shape[0] != alphas.shape[0]:
        raise ValueError("normals and alphas must have the same length")
    verts, pieces, weights = cell._kernel_args()
    return _kernels.solve_batch(verts, pieces, weights, normals, alphas, tol_alpha)


@dataclass(frozen=True, eq=False)
class NormalizationTransform:
    """Affine map ``x = origin_shift + rotation.T @ Q @ delta``.

    ``Q`` is upper triangular with positive diagonal: its columns are the
    aligned edge vectors ``P2 - P1``, ``P3 - P1`` (, ``P4 - P1``).
    """

    Q: np.ndarray
    rotation: np.ndarray
    origin_shift: np.ndarray

    @property
    def det_Q(self):
        return float(np.prod(np.diag(self.Q)))

    @property
    def matrix(self):
        return self.rotation.T @ self.Q

    def to_physical(self, delta):
        return self.origin_shift + np.asarray(delta, dtype=float) @ self.matrix.T


@dataclass(frozen=True)
class TransformedPlane:
    n_delta: np.ndarray
    c_delta: float
    scale: float


def normalize_simplex(vertices):
    """Map an arbitrary triangle/tetrahedron onto the canonical unit simplex."""
    p = np.asarray(vertices, dtype=float)
    if p.ndim != 2 or p.shape not in ((3, 2), (4, 3)):
        raise GeometryError(f"expected 3 points in 2D or 4 points in 3D, got shape {p.shape}")
    mesh = MeshType.TRIANGLE if p.shape[1] == 2 else MeshType.TETRAHEDRON
    edges = (p[1:] - p[0]).T
    scale = np.max(np.abs(edges))
    if scale == 0.0 or abs(np.linalg.det(edges / scale)) < 1e-12:
        raise GeometryError(f"degenerate {mesh.value}: vertices are not affinely independent")
    rot_t, q = np.linalg.qr(edges)
    signs = np.sign(np.diag(q))
    q = signs[:, None] * q
    rot_t = rot_t * signs[None, :]
    q = np.triu(q)
    t = NormalizationTransform(Q=q, rotation=rot_t.T, origin_shift=p[0].copy())
    return t, canonical_cell(mesh)


def transform_plane(t, n, c):
    """Express ``n . x + c = 0`` in the canonical coordinates of ``t``."""
    n = np.asarray(n, dtype=float)
    g = t.matrix.T @ n
    scale = float(np.linalg.norm(g))
    if scale == 0.0:
        raise GeometryError("normal collapses under the transform")
    c_shift = float(c) + float(n @ t.origin_shift)
    return TransformedPlane(n_delta=g / scale, c_delta=c_shift / scale, scale=scale)


def plane_from_canonical(t, n, c_delta):
    """Back-transform a canonical plane constant to physical coordinates."""
    n = np.asarray(n, dtype=float)
    scale = float(np.linalg.norm(t.matrix.T @ n))
    return c_delta * scale - float(n @ t.origin_shift)


def solve_c_general(vertices, n, alpha0, canonical_solver=None):
    """Solve on an arbitrary simplex via its canonical cell.

    ``canonical_solver(mesh_type, n_delta, alpha0) -> C`` replaces the exact
    canonical solve (for instance with a trained surrogate).
    """
    alpha0 = _check_alpha(alpha0)
    n = unit_normal(n)
    t, cell = normalize_simplex(vertices)
    if n.shape[0] != cell.dim:
        raise GeometryError("normal dimension does not match the simplex")
    tp = transform_plane(t, n, 0.0)
    if canonical_solver is None:
        c_delta = solve_c_exact(cell, tp.n_delta, alpha0)
    else:
        c_delta = float(canonical_solver(cell.mesh_type, tp.n_delta, alpha0))
    return plane_from_canonical(t, n, c_delta)


def _rect_alpha_2d(m1, m2, v):
    # m1 <= m2, m1 + m2 = 1; returns a with area{m . x <= a} = v, v <= 1/2
    if v * 2.0 * m2 <= m1:
        return np.sqrt(2.0 * m1 * m2 * v)
    return v * m2 + 0.5 * m1


def _rect_alpha_3d(m1, m2, m3, v):
    # m1 <= m2 <= m3, sum 1, v <= 1/2
    m12 = m1 + m2
    v1 = m1 * m1 / (6.0 * m2 * m3) if m1 > 0.0 else 0.0
    v2 = v1 + (m2 - m1) / (2.0 * m3)
    if m3 < m12:
        v3 = (m3 * m3 * (3.0 * m12 - m3) + m1 * m1 * (m1 - 3.0 * m3) + m2 * m2 * (m2 - 3.0 * m3)) / (
            6.0 * m1 * m2 * m3
        )
    else:
        v3 = 0.5 * m12 / m3
    if v < v1:
        return np.cbrt(6.0 * m1 * m2 * m3 * v)
    if v < v2:
        return 0.5 * (m1 + np.sqrt(m1 * m1 + 8.0 * m2 * m3 * (v - v1)))
    if v < v3:
        p = 2.0 * m1 * m2
        q = 1.5 * m1 * m2 * (m12 - 2.0 * m3 * v)
        p12 = np.sqrt(p)
        cs = np.cos(np.arccos(np.clip(q / (p * p12), -1.0, 1.0)) / 3.0)
        return p12 * (np.sqrt(3.0 * (1.0 - cs * cs)) - cs) + m12
    if m12 < m3:
        return m3 * v + 0.5 * m12
    p = m1 * (m2 + m3) + m2 * m3 - 0.25
    q = 1.5 * m1 * m2 * m3 * (0.5 - v)
    p12 = np.sqrt(p)
    cs = np.cos(np.arccos(np.clip(q / (p * p12), -1.0, 1.0)) / 3.0)
    return p12 * (np.sqrt(3.0 * (1.0 - cs * cs)) - cs) + 0.5


def solve_c_analytic_rect(n, alpha0):
    """Closed-form C on the unit square or cube (Scardovelli-Zaleski relations)."""
    alpha0 = _check_alpha(alpha0)
    n = unit_normal(n)
    if n.shape[0] not in (2, 3):
        raise GeometryError("analytic solver needs a 2D or 3D normal")
    neg = float(n[n < 0.0].sum())
    total = float(np.abs(n).sum())
    m = np.sort(np.abs(n)) / total
    if alpha0 <= _kernels.ALPHA_SNAP:
        a = 0.0
    elif alpha0 >= 1.0 - _kernels.ALPHA_SNAP:
        a = 1.0
    else:
        v = min(alpha0, 1.0 - alpha0)
        a = _rect_alpha_2d(*m, v) if n.shape[0] == 2 else _rect_alpha_3d(*m, v)
        if alpha0 > 0.5:
            a = 1.0 - a
    return -total * float(a) - neg
