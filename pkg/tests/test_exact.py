import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_normals
from nplic.exact import (
    normalize_simplex,
    plane_from_canonical,
    solve_c_analytic_rect,
    solve_c_exact,
    solve_c_exact_batch,
    solve_c_general,
    transform_plane,
)
from nplic.geometry import Cell, GeometryError, c_bounds, canonical_cell, volume_fraction


@pytest.mark.parametrize(
    "mesh, n, alpha, expected",
    [
        ("square", [1.0, 0.0], 0.25, -0.25),
        ("cube", np.ones(3) / np.sqrt(3), 0.5, -np.sqrt(3) / 2),
        ("triangle", [1.0, 0.0], 0.75, -0.5),
        ("cube", [0.0, 0.0, 1.0], 0.3, -0.3),
    ],
)
def test_examples(mesh, n, alpha, expected):
    assert solve_c_exact(canonical_cell(mesh), n, alpha) == pytest.approx(expected, abs=1e-10)


def test_scaled_tetrahedron_example():
    cell = Cell("tetrahedron", 2.0 * canonical_cell("tetrahedron").vertices)
    assert solve_c_exact(cell, [1, 0, 0], 0.875) == pytest.approx(-1.0, abs=1e-10)


def test_boundary_alphas(cell, rng):
    for n in random_normals(rng, 20, cell.dim):
        lo, hi = c_bounds(cell, n)
        assert solve_c_exact(cell, n, 0.0) == pytest.approx(hi, abs=1e-12)
        assert solve_c_exact(cell, n, 1.0) == pytest.approx(lo, abs=1e-12)


@pytest.mark.parametrize("alpha", [-0.1, 1.5, float("nan")])
def test_alpha_out_of_range(alpha):
    with pytest.raises(ValueError):
        solve_c_exact(canonical_cell("square"), [1, 0], alpha)


def test_round_trip(cell, rng):
    normals = random_normals(rng, 2000, cell.dim)
    alphas = np.concatenate([[1e-9, 1 - 1e-9], rng.random(1998)])
    cs = solve_c_exact_batch(cell, normals, alphas)
    back = np.array([volume_fraction(cell, n, c) for n, c in zip(normals, cs)])
    assert np.max(np.abs(back - alphas)) <= 1e-10


def test_complement(cell, rng):
    for n in random_normals(rng, 200, cell.dim):
        a = rng.random()
        assert solve_c_exact(cell, -n, 1 - a) == pytest.approx(-solve_c_exact(cell, n, a), abs=1e-9)


def test_monotone_in_alpha(cell, rng):
    alphas = np.linspace(0.0, 1.0, 51)
    for n in random_normals(rng, 20, cell.dim):
        cs = solve_c_exact_batch(cell, np.tile(n, (51, 1)), alphas)
        assert np.all(np.diff(cs) < 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 2 * np.pi), st.floats(0.25, 4.0))
def test_uniform_scaling_square(alpha, angle, s):
    n = np.array([np.cos(angle), np.sin(angle)])
    base = solve_c_exact(canonical_cell("square"), n, alpha)
    scaled = solve_c_exact(Cell("square", s * canonical_cell("square").vertices), n, alpha)
    assert scaled == pytest.approx(s * base, abs=1e-9 * s)


def _random_simplex(rng, dim):
    while True:
        v = rng.normal(size=(dim + 1, dim)) * rng.uniform(0.1, 10.0)
        if abs(np.linalg.det(v[1:] - v[0])) > 1e-2:
            return v


@pytest.mark.parametrize("dim", [2, 3])
def test_general_simplex_round_trip(dim, rng):
    mesh = "triangle" if dim == 2 else "tetrahedron"
    for _ in range(200):
        v = _random_simplex(rng, dim)
        n = random_normals(rng, 1, dim)[0]
        a = rng.random()
        c = solve_c_general(v, n, a)
        assert volume_fraction(Cell(mesh, v), n, c) == pytest.approx(a, abs=1e-10)


@pytest.mark.parametrize("dim", [2, 3])
def test_normalization_transform(dim, rng):
    v = _random_simplex(rng, dim)
    t, cell = normalize_simplex(v)
    assert t.det_Q > 0
    np.testing.assert_allclose(np.triu(t.Q), t.Q)
    # canonical vertices map back onto the physical ones
    np.testing.assert_allclose(t.to_physical(cell.vertices), v, atol=1e-10)
    n = random_normals(rng, 1, dim)[0]
    c = rng.normal()
    tp = transform_plane(t, n, c)
    assert np.linalg.norm(tp.n_delta) == pytest.approx(1.0)
    assert plane_from_canonical(t, n, tp.c_delta) == pytest.approx(c, abs=1e-10)
    a_phys = volume_fraction(Cell(cell.mesh_type, v), n, c)
    assert volume_fraction(cell, tp.n_delta, tp.c_delta) == pytest.approx(a_phys, abs=1e-12)


def test_normalize_degenerate():
    with pytest.raises(GeometryError):
        normalize_simplex([[0, 0], [1, 1], [2, 2]])
    with pytest.raises(GeometryError):
        normalize_simplex([[0, 0, 0], [1, 0, 0]])


def test_custom_canonical_solver():
    v = np.array([[1.0, 1.0], [3.0, 1.0], [1.0, 3.0]])
    calls = []

    def solver(mesh, n, a):
        calls.append(mesh.value)
        return solve_c_exact(canonical_cell(mesh), n, a)

    assert solve_c_general(v, [1, 0], 0.75, solver) == pytest.approx(solve_c_general(v, [1, 0], 0.75))
    assert calls == ["triangle"]


@pytest.mark.parametrize("mesh", ["square", "cube"])
def test_analytic_matches_root_finder(mesh, rng):
    cell = canonical_cell(mesh)
    normals = random_normals(rng, 10_000, cell.dim)
    alphas = rng.random(10_000)
    ref = solve_c_exact_batch(cell, normals, alphas, 1e-300)
    got = np.array([solve_c_analytic_rect(n, a) for n, a in zip(normals, alphas)])
    assert np.max(np.abs(got - ref)) <= 1e-10


def test_analytic_axis_aligned():
    assert solve_c_analytic_rect([0.0, -1.0], 0.3) == pytest.approx(0.7, abs=1e-12)
    assert solve_c_analytic_rect([0.0, 0.0, 1.0], 0.0) == pytest.approx(0.0, abs=1e-12)
    assert solve_c_analytic_rect([0.0, 0.0, 1.0], 1.0) == pytest.approx(-1.0, abs=1e-12)
