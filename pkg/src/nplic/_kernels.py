"""Compiled scalar kernels for half-space clipping and the bracketed C search.

Every clipping routine works on signed vertex distances ``d_v = n . v + C``.
The clipped fraction of a simplex is an affine invariant, so the simplex
kernels never need vertex coordinates; the square and cube kernels decompose
into simplices and weight by measure.

Vertices with ``|d| < ON_PLANE_EPS`` are snapped to the plane and counted on
the alpha side.
"""

import numpy as np
from numba import njit

ON_PLANE_EPS = 1e-14
ALPHA_SNAP = 1e-15
WIDTH_RTOL = 1e-14
MAX_BISECT = 200

# Kuhn decomposition of the unit cube along the 0 -> 7 diagonal; vertex
# index k has coordinates (k & 1, (k >> 1) & 1, (k >> 2) & 1).
CUBE_TETS = np.array(
    [
        [0, 1, 3, 7],
        [0, 1, 5, 7],
        [0, 2, 3, 7],
        [0, 2, 6, 7],
        [0, 4, 5, 7],
        [0, 4, 6, 7],
    ],
    dtype=np.int64,
)
SQUARE_TRIS = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)


@njit(cache=True)
def _snap(d):
    if abs(d) < ON_PLANE_EPS:
        return 0.0
    return d


@njit(cache=True)
def _cut(di, dj):
    # fraction of edge i->j (di <= 0 < dj) lying on the alpha side
    return di / (di - dj)


@njit(cache=True)
def tri_fraction(d0, d1, d2):
    """Area fraction of a triangle where the linear function d <= 0."""
    d = np.empty(3)
    d[0] = _snap(d0)
    d[1] = _snap(d1)
    d[2] = _snap(d2)
    nneg = 0
    for k in range(3):
        if d[k] <= 0.0:
            nneg += 1
    if nneg == 0:
        return 0.0
    if nneg == 3:
        return 1.0
    if nneg == 1:
        for i in range(3):
            if d[i] <= 0.0:
                f = 1.0
                for j in range(3):
                    if j != i:
                        f *= _cut(d[i], d[j])
                return f
    for j in range(3):
        if d[j] > 0.0:
            f = 1.0
            for i in range(3):
                if i != j:
                    f *= _cut(-d[j], -d[i])
            return 1.0 - f
    return 0.0


@njit(cache=True)
def tet_fraction(d0, d1, d2, d3):
    """Volume fraction of a tetrahedron where the linear function d <= 0."""
    d = np.empty(4)
    d[0] = _snap(d0)
    d[1] = _snap(d1)
    d[2] = _snap(d2)
    d[3] = _snap(d3)
    nneg = 0
    for k in range(4):
        if d[k] <= 0.0:
            nneg += 1
    if nneg == 0:
        return 0.0
    if nneg == 4:
        return 1.0
    if nneg == 1:
        for i in range(4):
            if d[i] <= 0.0:
                f = 1.0
                for j in range(4):
                    if j != i:
                        f *= _cut(d[i], d[j])
                return f
    if nneg == 3:
        for j in range(4):
            if d[j] > 0.0:
                f = 1.0
                for i in range(4):
                    if i != j:
                        f *= _cut(-d[j], -d[i])
                return 1.0 - f
    # two on each side: the alpha side is a triangular prism
    ia = -1
    ib = -1
    ic = -1
    id_ = -1
    for k in range(4):
        if d[k] <= 0.0:
            if ia < 0:
                ia = k
            else:
                ib = k
        else:
            if ic < 0:
                ic = k
            else:
                id_ = k
    a = _cut(d[ia], d[ic])
    b = _cut(d[ia], d[id_])
    c = _cut(d[ib], d[ic])
    e = _cut(d[ib], d[id_])
    return a * b + a * e + c * e - a * b * e - a * c * e


@njit(cache=True)
def simplex_fraction(d):
    if d.shape[0] == 3:
        return tri_fraction(d[0], d[1], d[2])
    return tet_fraction(d[0], d[1], d[2], d[3])


@njit(cache=True)
def cell_fraction(verts, pieces, weights, n, c):
    """Clipped fraction of a cell given as weighted simplices.

    ``pieces`` indexes ``verts``; ``weights`` are piece measures normalised
    to sum to one.
    """
    nv = verts.shape[0]
    dist = np.empty(nv)
    for v in range(nv):
        s = c
        for k in range(verts.shape[1]):
            s += n[k] * verts[v, k]
        dist[v] = s
    total = 0.0
    dp = np.empty(pieces.shape[1])
    for p in range(pieces.shape[0]):
        for k in range(pieces.shape[1]):
            dp[k] = dist[pieces[p, k]]
        total += weights[p] * simplex_fraction(dp)
    if total < 0.0:
        return 0.0
    if total > 1.0:
        return 1.0
    return total


@njit(cache=True)
def cell_bounds(verts, n):
    lo = np.inf
    hi = -np.inf
    for v in range(verts.shape[0]):
        s = 0.0
        for k in range(verts.shape[1]):
            s += n[k] * verts[v, k]
        if s < lo:
            lo = s
        if s > hi:
            hi = s
    return -hi, -lo


@njit(cache=True)
def _bisect(verts, pieces, weights, n, alpha0, tol):
    c_min, c_max = cell_bounds(verts, n)
    lo = c_min
    hi = c_max
    min_width = WIDTH_RTOL * (c_max - c_min)
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        r = cell_fraction(verts, pieces, weights, n, mid) - alpha0
        if abs(r) <= tol:
            return mid
        if r > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= min_width:
            break
    return 0.5 * (lo + hi)


@njit(cache=True)
def solve_cell(verts, pieces, weights, n, alpha0, tol):
    """Bisection for C with fraction(C) = alpha0 on [c_min, c_max].

    The fraction is non-increasing in C, equal to 1 at c_min and 0 at c_max.
    Targets above 1/2 are solved on the complement (-n, 1 - alpha0) so the
    residual is never formed as a difference of numbers close to 1.
    """
    c_min, c_max = cell_bounds(verts, n)
    if alpha0 <= ALPHA_SNAP:
        return c_max
    if alpha0 >= 1.0 - ALPHA_SNAP:
        return c_min
    if alpha0 > 0.5:
        return -_bisect(verts, pieces, weights, -n, 1.0 - alpha0, tol)
    return _bisect(verts, pieces, weights, n, alpha0, tol)


@njit(cache=True, nogil=True)
def solve_batch(verts, pieces, weights, normals, alphas, tol):
    """Per-query loop over :func:`solve_cell`; each query is independent."""
    out = np.empty(alphas.shape[0])
    for q in range(alphas.shape[0]):
        out[q] = solve_cell(verts, pieces, weights, normals[q], alphas[q], tol)
    return out


@njit(cache=True, nogil=True)
def fraction_batch(verts, pieces, weights, normals, cs):
    out = np.empty(cs.shape[0])
    for q in range(cs.shape[0]):
        out[q] = cell_fraction(verts, pieces, weights, normals[q], cs[q])
    return out
