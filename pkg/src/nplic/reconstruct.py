"""Interface reconstruction on a 2D VOF field.

``alpha[i, j]`` is the liquid fraction of the cell ``[i h, (i+1) h] x
[j h, (j+1) h]``. Normals point from liquid (alpha = 1) towards gas, so the
clipped side ``n . x + C <= 0`` of each cell is its liquid part.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from nplic.exact import solve_c_exact
from nplic.geometry import GeometryError, MeshType, c_bounds, canonical_cell, interface_polygon
from nplic.model import nplic_solve_batch

SEGMENTS_TAG = "nplic-segments"
SEGMENTS_VERSION = "v1"
INTERFACE_TOL = 1e-12
GRAD_TOL = 1e-12


@dataclass
class VofGrid:
    alpha: np.ndarray
    h: float = 1.0

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.alpha.ndim != 2:
            raise ValueError("alpha must be a 2D array")
        if np.any((self.alpha < 0.0) | (self.alpha > 1.0)):
            raise ValueError("alpha values must lie in [0, 1]")
        if not self.h > 0:
            raise ValueError("cell size h must be positive")

    @property
    def n_x(self):
        return self.alpha.shape[0]

    @property
    def n_y(self):
        return self.alpha.shape[1]

    def interface_mask(self, tol=INTERFACE_TOL):
        return (self.alpha > tol) & (self.alpha < 1.0 - tol)


@dataclass
class CellInterface:
    i: int
    j: int
    normal: np.ndarray
    c: float
    segment: np.ndarray
    solver: str = "exact"


def _arc_integral(a, b, r):
    # integral of sqrt(r^2 - t^2) over [a, b], both clamped to [-r, r]
    a = min(max(a, -r), r)
    b = min(max(b, -r), r)
    if b <= a:
        return 0.0

    def prim(u):
        return 0.5 * (u * math.sqrt(max(r * r - u * u, 0.0)) + r * r * math.asin(u / r))

    return prim(b) - prim(a)


def _quadrant_area(x, y, r):
    # area of {u <= x, v <= y} inside the origin-centred disk of radius r
    xc = min(max(x, -r), r)
    if xc <= -r or y <= -r:
        return 0.0
    if y >= r:
        return 2.0 * _arc_integral(-r, xc, r)
    w = math.sqrt(r * r - y * y)
    inner = y * max(min(xc, w) + w, 0.0) + _arc_integral(-w, xc if xc < w else w, r)
    if y < 0.0:
        return inner
    return inner + 2.0 * (_arc_integral(-r, min(xc, -w), r) + _arc_integral(w, xc, r))


def disk_rect_area(center, radius, x0, x1, y0, y1):
    """Exact area of a disk intersected with an axis-aligned rectangle."""
    cx, cy = center
    g = lambda x, y: _quadrant_area(x - cx, y - cy, radius)  # noqa: E731
    area = g(x1, y1) - g(x0, y1) - g(x1, y0) + g(x0, y0)
    return min(max(area, 0.0), (x1 - x0) * (y1 - y0))


def make_circle_field(center, radius, n, h=1.0):
    """Gas bubble (alpha = 0 inside the disk) on an n x n grid of liquid."""
    if n < 2:
        raise ValueError("grid needs n >= 2")
    alpha = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            area = disk_rect_area(center, radius, i * h, (i + 1) * h, j * h, (j + 1) * h)
            alpha[i, j] = min(max(1.0 - area / (h * h), 0.0), 1.0)
    return VofGrid(alpha, h)


def demo_field(n=8, h=1.0):
    """The bubble used for the 8 x 8 demonstration: centre (n h / 2, n h / 2), radius 0.3 n h."""
    return make_circle_field((0.5 * n * h, 0.5 * n * h), 0.3 * n * h, n, h)


def youngs_gradient(grid):
    """Youngs 3x3 gradient: 1-2-1 smoothing across, central differences along.

    Boundary cells fall back to one-sided differences along the derivative
    axis and an edge-replicated smoothing stencil across it.
    """
    a = grid.alpha
    gx = np.zeros_like(a)
    gy = np.zeros_like(a)
    pad_y = np.pad(a, ((0, 0), (1, 1)), mode="edge")
    sy = 0.25 * (pad_y[:, :-2] + 2.0 * pad_y[:, 1:-1] + pad_y[:, 2:])
    pad_x = np.pad(a, ((1, 1), (0, 0)), mode="edge")
    sx = 0.25 * (pad_x[:-2, :] + 2.0 * pad_x[1:-1, :] + pad_x[2:, :])
    if a.shape[0] > 1:
        gx = np.gradient(sy, grid.h, axis=0)
    if a.shape[1] > 1:
        gy = np.gradient(sx, grid.h, axis=1)
    return np.stack([gx, gy], axis=-1)


def estimate_normals(grid, tol=INTERFACE_TOL):
    """``{(i, j): n}`` for interface cells, ``n = -grad alpha / |grad alpha|``.

    Cells whose gradient norm is below ``GRAD_TOL`` are returned separately
    as flagged and get no normal.
    """
    grad = youngs_gradient(grid)
    normals, flagged = {}, []
    for i, j in zip(*np.nonzero(grid.interface_mask(tol))):
        g = grad[i, j]
        norm = float(np.hypot(g[0], g[1]))
        if norm < GRAD_TOL:
            flagged.append((int(i), int(j)))
        else:
            normals[(int(i), int(j))] = -g / norm
    return normals, flagged


def _clip_into_bracket(n, c):
    lo, hi = c_bounds(canonical_cell(MeshType.SQUARE), n)
    margin = 1e-12 * (hi - lo)
    return min(max(c, lo + margin), hi - margin)


def reconstruct_field(grid, solver="exact", model=None, tol=INTERFACE_TOL):
    """One interface segment per interface cell, ordered by (i, j)."""
    if solver not in ("exact", "nplic"):
        raise ValueError(f"solver must be 'exact' or 'nplic', got {solver!r}")
    if solver == "nplic":
        if model is None or MeshType.SQUARE not in model.config.meshes:
            raise ValueError("the nplic solver needs a model covering square cells")
    normals, _ = estimate_normals(grid, tol)
    keys = sorted(normals)
    if not keys:
        return []
    unit = canonical_cell(MeshType.SQUARE)
    ns = np.array([normals[k] for k in keys])
    alphas = np.array([grid.alpha[k] for k in keys])
    if solver == "exact":
        cs = [solve_c_exact(unit, n, a) for n, a in zip(ns, alphas)]
    else:
        cs = nplic_solve_batch(model, MeshType.SQUARE, ns, alphas)
    out = []
    for (i, j), n, c in zip(keys, ns, cs):
        c = _clip_into_bracket(n, float(c))
        try:
            seg = interface_polygon(unit, n, c)
        except GeometryError:
            continue
        origin = np.array([i * grid.h, j * grid.h])
        out.append(CellInterface(i, j, n, c, origin + grid.h * seg, solver))
    return out


def segment_deviation(a, b):
    """Max endpoint distance between two segments, matching endpoint order."""
    d1 = max(np.linalg.norm(a[0] - b[0]), np.linalg.norm(a[1] - b[1]))
    d2 = max(np.linalg.norm(a[0] - b[1]), np.linalg.norm(a[1] - b[0]))
    return float(min(d1, d2))


def write_segments_csv(cells, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"{SEGMENTS_TAG} {SEGMENTS_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "x0", "y0", "x1", "y1", "solver"])
        for c in cells:
            (x0, y0), (x1, y1) = c.segment
            w.writerow([c.i, c.j] + [format(float(v), ".17g") for v in (x0, y0, x1, y1)] + [c.solver])


def read_segments_csv(path):
    """Rows of ``(i, j, segment, solver)``."""
    with open(path, newline="") as fh:
        head = fh.readline().split()
        if head[:2] != [SEGMENTS_TAG, SEGMENTS_VERSION]:
            raise ValueError(f"{path}: not a {SEGMENTS_TAG} {SEGMENTS_VERSION} file")
        rows = []
        for rec in csv.DictReader(fh):
            seg = np.array([[float(rec["x0"]), float(rec["y0"])], [float(rec["x1"]), float(rec["y1"])]])
            rows.append((int(rec["i"]), int(rec["j"]), seg, rec["solver"]))
    return rows


_STYLES = {
    "exact": 'stroke="#1f4e9c" stroke-width="0.08"',
    "nplic": 'stroke="#d62728" stroke-width="0.04" stroke-dasharray="0.12 0.08"',
}


def segments_svg(cells, n_x, n_y, h=1.0, alpha=None):
    """Standalone SVG, one user unit per cell width, y pointing up."""
    w, hgt = n_x, n_y
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="-0.5 -0.5 {w + 1} {hgt + 1}" '
        f'width="{60 * (w + 1)}" height="{60 * (hgt + 1)}">',
        f'<g transform="translate(0 {hgt}) scale(1 -1)">',
    ]
    if alpha is not None:
        for i in range(n_x):
            for j in range(n_y):
                shade = int(255 - 120 * float(alpha[i, j]))
                out.append(f'<rect x="{i}" y="{j}" width="1" height="1" fill="rgb({shade},{shade},255)"/>')
    grid = []
    for k in range(n_x + 1):
        grid.append(f'<line x1="{k}" y1="0" x2="{k}" y2="{hgt}"/>')
    for k in range(n_y + 1):
        grid.append(f'<line x1="0" y1="{k}" x2="{w}" y2="{k}"/>')
    out.append('<g stroke="#999999" stroke-width="0.02">' + "".join(grid) + "</g>")
    for solver in sorted({c.solver for c in cells}):
        style = _STYLES.get(solver, 'stroke="black" stroke-width="0.05"')
        lines = []
        for c in cells:
            if c.solver != solver:
                continue
            (x0, y0), (x1, y1) = np.asarray(c.segment) / h
            lines.append(f'<line x1="{x0:.6f}" y1="{y0:.6f}" x2="{x1:.6f}" y2="{y1:.6f}"/>')
        out.append(f'<g id="{escape(solver)}" {style} stroke-linecap="round">' + "".join(lines) + "</g>")
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_segments(cells, fmt, path, grid=None):
    """Write segments as ``csv`` or ``svg``; svg draws one style per solver."""
    path = Path(path)
    if fmt == "csv":
        write_segments_csv(cells, path)
    elif fmt == "svg":
        if grid is not None:
            n_x, n_y, h, alpha = grid.n_x, grid.n_y, grid.h, grid.alpha
        else:
            n_x = max((c.i for c in cells), default=0) + 1
            n_y = max((c.j for c in cells), default=0) + 1
            h, alpha = 1.0, None
        path.write_text(segments_svg(cells, n_x, n_y, h, alpha), encoding="utf-8")
    else:
        raise ValueError(f"unknown segment format {fmt!r}; expected csv or svg")
