"""Synthetic PLIC datasets: grid-sampled normals and volume fractions, exact labels.

Record order is the nested loop theta (outer), phi (middle), alpha0 (inner).
For combined configurations the simplex block comes first.

Shuffles use SplitMix64 (Steele, Lea & Flood 2014; increment
0x9E3779B97F4A7C15, mixers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB) driving
a descending Fisher-Yates pass that draws ``j = (x * (i + 1)) >> 64``.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nplic.exact import solve_c_exact_batch
from nplic.geometry import MeshType, angles_to_normal, canonical_cell

log = logging.getLogger(__name__)

FORMAT_TAG = "nplic-dataset"
FORMAT_VERSION = "v1"

COMBINED = {
    "t-s": (MeshType.TRIANGLE, MeshType.SQUARE),
    "t-c": (MeshType.TETRAHEDRON, MeshType.CUBE),
}

_MASK64 = (1 << 64) - 1


class DatasetFormatError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def sample_alphas(n_alpha):
    """Volume fractions: a uniform ramp on [1e-4, 1 - 1e-4] plus log-spaced tails."""
    if n_alpha < 2:
        raise ValueError(f"n_alpha must be >= 2, got {n_alpha}")
    k = np.arange(5, 10)
    low = 10.0 ** -k
    ramp = 1e-4 + np.arange(n_alpha) / (n_alpha - 1) * (1.0 - 2e-4)
    return np.sort(np.concatenate([low, ramp, 1.0 - low]))


def sample_normals_3d(n_n):
    """``(theta, phi)`` grid: N+1 polar angles in [0, pi] x 2N azimuths in (0, pi]."""
    if n_n < 1:
        raise ValueError(f"n_n must be >= 1, got {n_n}")
    theta = np.pi / n_n * np.arange(n_n + 1)
    phi = np.pi / (2 * n_n) * np.arange(1, 2 * n_n + 1)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    return np.column_stack([tt.ravel(), pp.ravel()])


def sample_normals_2d(n_n):
    if n_n < 1:
        raise ValueError(f"n_n must be >= 1, got {n_n}")
    return np.pi / n_n * np.arange(n_n + 1)


def expected_count(mesh_type, n_n, n_alpha):
    """Record count of :func:`generate_dataset` (grid product, duplicates kept)."""
    mt = MeshType.parse(mesh_type)
    n_normals = 2 * n_n * (n_n + 1) if mt.dim == 3 else n_n + 1
    return n_normals * (n_alpha + 10)


@dataclass(eq=False)
class Dataset:
    """Column store of PLIC samples; ``phi`` is NaN for 2D records."""

    mesh: np.ndarray
    m: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    alpha0: np.ndarray
    c: np.ndarray
    config: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mesh = np.asarray(self.mesh, dtype="<U11")
        self.m = np.asarray(self.m, dtype=np.int64)
        for name in ("theta", "phi", "alpha0", "c"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.mesh)
        if any(len(a) != n for a in (self.m, self.theta, self.phi, self.alpha0, self.c)):
            raise ValueError("dataset columns must have equal length")

    def __len__(self):
        return len(self.c)

    @property
    def dim(self):
        return 2 if np.all(np.isnan(self.phi)) else 3

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(
            self.mesh[idx], self.m[idx], self.theta[idx], self.phi[idx],
            self.alpha0[idx], self.c[idx], config=self.config, meta=dict(self.meta),
        )

    def records(self):
        for row in zip(self.mesh, self.m, self.theta, self.phi, self.alpha0, self.c):
            mesh, m, theta, phi, a, c = row
            yield MeshType(mesh), int(m), float(theta), (None if np.isnan(phi) else float(phi)), float(a), float(c)

    def normals(self):
        if self.dim == 2:
            return angles_to_normal(self.theta)
        return angles_to_normal(self.theta, self.phi)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.config == other.config
            and np.array_equal(self.mesh, other.mesh)
            and np.array_equal(self.m, other.m)
            and all(
                np.array_equal(getattr(self, k), getattr(other, k), equal_nan=True)
                for k in ("theta", "phi", "alpha0", "c")
            )
        )


def concat(parts, config=""):
    cols = {
        k: np.concatenate([getattr(p, k) for p in parts])
        for k in ("mesh", "m", "theta", "phi", "alpha0", "c")
    }
    return Dataset(**cols, config=config)


def generate_dataset(mesh_type, n_n, n_alpha, m=None):
    """Label every (normal, alpha0) grid point with the exact plane constant."""
    mt = MeshType.parse(mesh_type)
    alphas = sample_alphas(n_alpha)
    if mt.dim == 3:
        angles = sample_normals_3d(n_n)
        theta, phi = angles[:, 0], angles[:, 1]
    else:
        theta = sample_normals_2d(n_n)
        phi = np.full_like(theta, np.nan)
    n_ang = len(theta)
    theta = np.repeat(theta, len(alphas))
    phi = np.repeat(phi, len(alphas))
    alpha0 = np.tile(alphas, n_ang)
    normals = angles_to_normal(theta) if mt.dim == 2 else angles_to_normal(theta, phi)
    c = solve_c_exact_batch(canonical_cell(mt), normals, alpha0, 1e-12)
    if m is None:
        m = int(mt.is_simplex)
    if mt.dim == 2 and n_n * (n_alpha + 10) != len(c):
        log.warning(
            "2D grid gives %d records (n_n + 1 angles); the n_n * (n_alpha + 10) count would be %d",
            len(c), n_n * (n_alpha + 10),
        )
    ds = Dataset(
        np.full(len(c), mt.value), np.full(len(c), m), theta, phi, alpha0, c,
        config=mt.value, meta={"n_n": n_n, "n_alpha": n_alpha},
    )
    return ds


def generate_combined(meshes, n_n, n_alpha):
    """Simplex and rectangular datasets stacked, with ``m`` = 1 on simplex rows."""
    if isinstance(meshes, str):
        key = meshes.lower()
        if key not in COMBINED:
            raise ValueError(f"unknown combined configuration {meshes!r}; expected t-s or t-c")
        pair = COMBINED[key]
    else:
        pair = tuple(sorted((MeshType.parse(x) for x in meshes), key=lambda x: not x.is_simplex))
        match = [k for k, v in COMBINED.items() if v == pair]
        if len(pair) != 2 or not match:
            raise ValueError("combined datasets pair triangle+square or tetrahedron+cube")
        key = match[0]
    parts = [generate_dataset(mt, n_n, n_alpha, m=int(mt.is_simplex)) for mt in pair]
    ds = concat(parts, config=key)
    ds.meta = {"n_n": n_n, "n_alpha": n_alpha}
    return ds


def generate(config, n_n, n_alpha):
    """Dispatch on a mesh name or a combined tag (``t-s``, ``t-c``)."""
    if str(config).lower() in COMBINED:
        return generate_combined(str(config).lower(), n_n, n_alpha)
    return generate_dataset(config, n_n, n_alpha)


def splitmix64(seed):
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def permutation(n, seed):
    """Deterministic Fisher-Yates permutation of ``range(n)``."""
    perm = list(range(n))
    rng = splitmix64(seed)
    for i in range(n - 1, 0, -1):
        j = (next(rng) * (i + 1)) >> 64
        perm[i], perm[j] = perm[j], perm[i]
    return np.array(perm, dtype=np.int64)


@dataclass(eq=False)
class SplitDataset:
    train: Dataset
    validation: Dataset
    test: Dataset
    split_seed: int


def split_sizes(n):
    n_val = (n + 5) // 10
    n_test = (2 * n + 5) // 10
    return n - n_val - n_test, n_val, n_test


def split_dataset(ds, seed):
    """Shuffle with ``seed`` and cut 70 % train / 10 % validation / 20 % test."""
    if len(ds) < 10:
        raise ValueError(f"need at least 10 records to split, got {len(ds)}")
    perm = permutation(len(ds), seed)
    n_train, n_val, _ = split_sizes(len(ds))
    return SplitDataset(
        train=ds.subset(perm[:n_train]),
        validation=ds.subset(perm[n_train:n_train + n_val]),
        test=ds.subset(perm[n_train + n_val:]),
        split_seed=seed,
    )


def _fmt(x):
    return format(float(x), ".17g")


def format_dataset(ds):
    head = [FORMAT_TAG, FORMAT_VERSION, ds.config or "unknown"]
    head += [f"{k}={v}" for k, v in sorted(ds.meta.items())]
    lines = [" ".join(head)]
    for mesh, m, theta, phi, a, c in zip(ds.mesh, ds.m, ds.theta, ds.phi, ds.alpha0, ds.c):
        phi_s = "" if np.isnan(phi) else _fmt(phi)
        lines.append(f"{mesh},{m},{_fmt(theta)},{phi_s},{_fmt(a)},{_fmt(c)}")
    return "\n".join(lines) + "\n"


def write_dataset(ds, path):
    Path(path).write_bytes(format_dataset(ds).encode("utf-8"))


def parse_dataset(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetFormatError("empty file, missing header", line=1)
    head = lines[0].split()
    if len(head) < 3 or head[0] != FORMAT_TAG:
        raise DatasetFormatError(f"expected header '{FORMAT_TAG} {FORMAT_VERSION} <config>'", line=1)
    if head[1] != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported version {head[1]!r}; supported: {FORMAT_VERSION}", line=1)
    meta = {}
    for tok in head[3:]:
        key, sep, value = tok.partition("=")
        if not sep:
            raise DatasetFormatError(f"bad header token {tok!r}", line=1)
        meta[key] = int(value) if value.lstrip("-").isdigit() else value
    mesh, m, theta, phi, alpha0, c = [], [], [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise DatasetFormatError(f"expected 6 comma-separated fields, got {len(parts)}", line=lineno)
        try:
            mt = MeshType(parts[0])
            mesh.append(mt.value)
            m.append(int(parts[1]))
            theta.append(float(parts[2]))
            phi.append(float(parts[3]) if parts[3] else np.nan)
            alpha0.append(float(parts[4]))
            c.append(float(parts[5]))
        except ValueError as exc:
            raise DatasetFormatError(str(exc), line=lineno) from None
        if (mt.dim == 3) == (not parts[3]):
            raise DatasetFormatError("phi must be present exactly for 3D meshes", line=lineno)
    return Dataset(mesh, m, theta, phi, alpha0, c, config=head[2], meta=meta)


def read_dataset(path):
    return parse_dataset(Path(path).read_bytes().decode("utf-8"))
