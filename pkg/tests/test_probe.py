import numpy as np
import pytest

from kgescape.geometry import Cometric
from kgescape.probe import (NonHermitianError, assemble_P, cutoff_commutator_decay, cutoff_matrix,
                            quadratic_form_reality, resolvent_kernel_probe, skew_injected, tail_state)
from kgescape.quantize import GridSpec


@pytest.fixture(scope="module")
def grid():
    return GridSpec(1, 10.0, 64, 1.0)


@pytest.fixture(scope="module")
def P1(grid):
    return assemble_P(Cometric.euclidean(1), grid)


def test_flat_1d_is_minus_laplacian(P1, grid):
    # plane waves on the torus are eigenvectors
    k = 2 * np.pi * 3 / (2 * grid.L)
    phi = np.exp(1j * k * grid.axis())
    np.testing.assert_allclose(P1.matrix @ phi, k * k * phi, atol=1e-10)


def test_hermitian(P1):
    assert P1.is_hermitian


def test_complex_coefficient_rejected(grid):
    hook = lambda G, u, u0: (G * (1 + 0.01j), u, u0)
    with pytest.raises(NonHermitianError):
        assemble_P(Cometric.euclidean(1), grid, coefficient_hook=hook)


def test_reality_detects_skew(P1, grid):
    states = [tail_state(grid, 1.0, [0.5]), tail_state(grid, 2.0)]
    assert quadratic_form_reality(P1, states)["pass"]
    assert not quadratic_form_reality(skew_injected(P1, 1e-3, positive=True), states)["pass"]


def test_identity_cutoff_commutes(P1, grid):
    phi = tail_state(grid, 1.0)
    np.testing.assert_allclose(cutoff_matrix(grid, None), np.eye(grid.size))
    with pytest.raises(ValueError):
        cutoff_matrix(grid, 6.0)
    res = cutoff_commutator_decay(P1, [1.0, 2.0], phi)
    assert all(v > 0 for v in res["norms"])


def test_gaussian_decays_fast(P1, grid):
    phi = np.exp(-grid.axis() ** 2 / 2.0)
    res = cutoff_commutator_decay(P1, [1.0, 1.5, 2.0, 3.0, 4.0], phi)
    assert res["pass"]


def test_resolvent_margin(P1):
    assert resolvent_kernel_probe(P1, 0.5 + 1j)["pass"]
    assert not resolvent_kernel_probe(skew_injected(P1, 1.0, positive=True), 1j)["pass"]
    with pytest.raises(ValueError):
        resolvent_kernel_probe(P1, 2.0)
