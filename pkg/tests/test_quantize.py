import numpy as np
import pytest

from kgescape.quantize import (GridError, GridSpec, calculus_checks, coherent_state, dump_matrix, expectation,
                               fit_order, garding_check, load_matrix, weyl_quantize)
from kgescape.symbols import ScalarSymbol, gaussian_symbol, truncate_x


@pytest.fixture(scope="module")
def grid():
    return GridSpec(1, 7.0, 128, 0.1)


def test_grid_rejects_non_power_of_two():
    with pytest.raises(GridError):
        GridSpec(1, 5.0, 100, 0.1)


def test_nyquist_formula(grid):
    assert grid.nyquist == pytest.approx(np.pi * grid.N * grid.h / (2 * grid.L))


def test_identity_quantizes_to_identity(grid):
    I = weyl_quantize(ScalarSymbol.constant(1.0), grid, strict=False).matrix
    np.testing.assert_allclose(I, np.eye(grid.N), atol=1e-13)


def test_position_symbol_is_multiplication(grid):
    a = ScalarSymbol.from_parts(lambda x, xi: np.cos(x[..., 0]))
    A = weyl_quantize(a, grid, strict=False).matrix
    np.testing.assert_allclose(A, np.diag(np.cos(grid.axis())), atol=1e-12)


def test_real_symbol_gives_hermitian(grid):
    A = weyl_quantize(gaussian_symbol([0.3], [0.5], 1.0, 0.6), grid, strict=False)
    assert A.hermiticity_error() < 1e-14


def test_support_margin_enforced(grid):
    with pytest.raises(GridError):
        weyl_quantize(gaussian_symbol([0.0], [0.0], 3.0, 1.0), grid)
    wide = truncate_x(ScalarSymbol.constant(1.0), 6.5, 6.9)
    with pytest.raises(GridError):
        weyl_quantize(wide, grid)


def test_coherent_state_recovers_symbol(grid):
    a = gaussian_symbol([0.0], [0.0], 1.5, 1.0)
    A = weyl_quantize(a, grid, strict=False)
    psi = coherent_state([0.4], [0.2], grid)
    assert grid.norm(psi) == pytest.approx(1.0)
    val = expectation(A, psi, grid).real
    assert val == pytest.approx(float(a(np.array([[0.4]]), np.array([[0.2]]))[0]), abs=0.05)


def test_commutator_matches_bracket_at_higher_order():
    grids = [GridSpec(1, 7.0, 256, h) for h in (0.2, 0.1, 0.05)]
    a = gaussian_symbol([0.5], [0.3], 1.0, 0.8)
    b = gaussian_symbol([-0.4], [-0.2], 1.2, 0.7)
    res = calculus_checks(a, b, grids, strict=False)
    assert res["commutator_fit"]["order"] >= 1.0


def test_garding_rejects_negative_symbol(grid):
    with pytest.raises(ValueError):
        garding_check(-gaussian_symbol([0.0], [0.0]), [grid], strict=False)


def test_fit_order_exact_power():
    hs = [0.4, 0.2, 0.1]
    assert fit_order(hs, [3 * h**2 for h in hs])["order"] == pytest.approx(2.0)
    assert fit_order(hs, [0, 0, 0], floor=1e-12)["all_below_floor"]


def test_matrix_roundtrip(tmp_path, grid):
    A = weyl_quantize(gaussian_symbol([0.0], [0.3]), grid, strict=False)
    path = tmp_path / "a.bin"
    dump_matrix(A, path)
    assert path.stat().st_size == 32 + 16 * grid.N**2
    B = load_matrix(path)
    np.testing.assert_array_equal(A.matrix, B.matrix)
    assert B.grid.h == grid.h and B.grid.N == grid.N


def test_two_dimensional_hermitian():
    gr = GridSpec(2, 6.0, 16, 0.5, margin=0.1)
    a = gaussian_symbol([0.2, -0.1], [0.3, 0.0], 1.0, 1.0)
    A = weyl_quantize(a, gr, strict=False)
    assert A.matrix.shape == (256, 256)
    assert A.hermiticity_error() < 1e-13
