import numpy as np
import pytest

from nplic.geometry import MeshType, canonical_cell

MESHES = list(MeshType)


def random_normals(rng, size, dim):
    g = rng.standard_normal((size, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def uniform_in_cell(rng, mesh_type, size):
    """Uniform samples in the canonical cell (simplex via sorted-uniform spacing)."""
    mt = MeshType.parse(mesh_type)
    if not mt.is_simplex:
        return rng.random((size, mt.dim))
    u = np.sort(rng.random((size, mt.dim)), axis=1)
    return np.diff(np.concatenate([np.zeros((size, 1)), u], axis=1), axis=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240229)


@pytest.fixture(params=MESHES, ids=lambda m: m.value)
def mesh(request):
    return request.param


@pytest.fixture
def cell(mesh):
    return canonical_cell(mesh)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
