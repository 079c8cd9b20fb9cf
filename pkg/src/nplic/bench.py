"""Wall-clock comparison of the exact solver and the NPLIC surrogate.

The exact solver runs one query at a time in a compiled loop; NPLIC runs a
single batched forward pass. Both see identical query batches. Only the solve
is timed: batch construction, model loading and JIT warm-up are excluded.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from nplic.exact import solve_c_exact_batch
from nplic.geometry import MeshType, canonical_cell
from nplic.model import nplic_solve_batch

FORMAT_TAG = "nplic-bench"
FORMAT_VERSION = "v1"
DEFAULT_SIZES = (10**3, 10**4, 10**5, 10**6)
HUGE_SIZES = DEFAULT_SIZES + (10**7,)
ALPHA_RANGE = (1e-6, 1.0 - 1e-6)


def make_query_batch(mesh_type, size, seed):
    """Uniform random unit normals (normalised Gaussians) and alpha0 ~ U(1e-6, 1 - 1e-6)."""
    if size < 1:
        raise ValueError("batch size must be >= 1")
    mt = MeshType.parse(mesh_type)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((size, mt.dim))
    norm = np.linalg.norm(g, axis=1)
    while np.any(norm < 1e-12):
        bad = norm < 1e-12
        g[bad] = rng.standard_normal((int(bad.sum()), mt.dim))
        norm = np.linalg.norm(g, axis=1)
    normals = g / norm[:, None]
    alphas = rng.uniform(*ALPHA_RANGE, size=size)
    return normals, alphas


def analytic_flops(model):
    """Per-query FLOPs: ``2 d N + N`` (hidden matvec + bias), ``N`` (ReLU), ``2 N + 1`` (output)."""
    d, n = model.config.n_inputs, model.config.hidden_units
    return 2 * d * n + n + n + 2 * n + 1


@dataclass
class BenchRow:
    mesh_type: str
    solver: str
    batch_size: int
    wall_time: float

    @property
    def throughput(self):
        return self.batch_size / self.wall_time


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    mode: str = "serial"
    repeats: int = 1

    def time_of(self, mesh_type, solver, size):
        for r in self.rows:
            if r.mesh_type == mesh_type and r.solver == solver and r.batch_size == size:
                return r.wall_time
        raise KeyError((mesh_type, solver, size))

    def speedups(self):
        """``{(mesh, size): exact_time / nplic_time}``."""
        out = {}
        for r in self.rows:
            if r.solver == "exact":
                try:
                    out[(r.mesh_type, r.batch_size)] = r.wall_time / self.time_of(r.mesh_type, "nplic", r.batch_size)
                except KeyError:
                    pass
        return out

    def to_csv(self):
        lines = [
            f"{FORMAT_TAG} {FORMAT_VERSION} mode={self.mode} repeats={self.repeats}",
            "mesh_type,solver,batch_size,wall_time_seconds,throughput_qps,speedup",
        ]
        sp = self.speedups()
        for r in self.rows:
            s = sp.get((r.mesh_type, r.batch_size), "")
            s = "" if s == "" else format(s, ".6g")
            lines.append(f"{r.mesh_type},{r.solver},{r.batch_size},{r.wall_time:.9g},{r.throughput:.9g},{s}")
        return "\n".join(lines) + "\n"


def median_time(fn, repeats):
    """Median wall time of ``repeats`` calls to ``fn``."""
    times = []
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _chunked(fn, normals, alphas, threads):
    chunks = np.array_split(np.arange(len(alphas)), threads)
    with ThreadPoolExecutor(threads) as pool:
        parts = pool.map(lambda idx: fn(normals[idx], alphas[idx]), chunks)
    return np.concatenate(list(parts))


def run_bench(mesh_type, model, sizes=DEFAULT_SIZES, repeats=5, seed=0, threads=1):
    """Time both solvers on the same batches; one row per (solver, size).

    ``threads > 1`` splits each batch across a thread pool for both solvers
    and labels the report ``parallel``.
    """
    mt = MeshType.parse(mesh_type)
    cell = canonical_cell(mt)

    def exact(normals, alphas):
        return solve_c_exact_batch(cell, normals, alphas)

    def nplic(normals, alphas):
        return nplic_solve_batch(model, mt, normals, alphas)

    warm_n, warm_a = make_query_batch(mt, 8, seed)
    exact(warm_n, warm_a)
    nplic(warm_n, warm_a)

    report = BenchReport(mode="serial" if threads <= 1 else f"parallel-{threads}", repeats=repeats)
    with threadpool_limits(limits=1 if threads <= 1 else None):
        _time_sizes(report, mt, exact, nplic, sizes, repeats, seed, threads)
    return report


def _time_sizes(report, mt, exact, nplic, sizes, repeats, seed, threads):
    for size in sizes:
        normals, alphas = make_query_batch(mt, size, seed)
        for name, fn in (("exact", exact), ("nplic", nplic)):
            if threads > 1:
                call = lambda fn=fn: _chunked(fn, normals, alphas, threads)  # noqa: E731
            else:
                call = lambda fn=fn: fn(normals, alphas)  # noqa: E731
            report.rows.append(BenchRow(mt.value, name, int(size), median_time(call, repeats)))

