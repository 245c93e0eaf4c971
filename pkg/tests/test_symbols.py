import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgescape.geometry import Cometric
from kgescape.symbols import (CutoffParams, Ladder, ParameterError, ScalarSymbol, bracket_values, gaussian_symbol,
                              observable, poisson_bracket, principal_symbol, zeta_incoming, zeta_outgoing)

INC = CutoffParams(0.2, 0.5, 0.3, 0.9, 1.0, 0.2, 0.1)
OUT = CutoffParams(0.2, -0.5, -0.3, -0.9, 1.0, 0.2, 0.1, orientation="outgoing")


def _fd_grad(a, x, xi, e=1e-6):
    gx = np.zeros_like(x)
    gk = np.zeros_like(xi)
    for i in range(x.shape[-1]):
        E = np.zeros(x.shape[-1])
        E[i] = e
        gx[..., i] = (a(x + E, xi) - a(x - E, xi)) / (2 * e)
        gk[..., i] = (a(x, xi + E) - a(x, xi - E)) / (2 * e)
    return gx, gk


@pytest.mark.parametrize("bad", [
    dict(delta=0.3), dict(sigma=0.2), dict(sigma_inf=0.4), dict(R=-1.0), dict(nu=0.0),
])
def test_incoming_parameter_ordering(bad):
    with pytest.raises(ParameterError):
        INC.with_(**bad)


def test_outgoing_ordering():
    with pytest.raises(ParameterError):
        OUT.with_(sigma=-0.2)


def test_decay_rates_must_be_below_mu():
    INC.validate(0.5)
    with pytest.raises(ParameterError):
        INC.validate(0.05)


def test_ladder_monotone():
    lad = Ladder.build(INC, 3, delta_factor=1.05)
    assert len(lad) == 4
    assert all(a.R > b.R for a, b in zip(lad.rungs, lad.rungs[1:]))
    with pytest.raises(ParameterError):
        Ladder((lad[1], lad[0]))


def test_constant_symbol():
    one = ScalarSymbol.constant(2.5)
    v, gx, gk = one.value_and_grad(np.ones((3, 2)), np.ones((3, 2)))
    np.testing.assert_array_equal(v, 2.5)
    assert not np.any(gx) and not np.any(gk)


def test_algebra_gradients(rng):
    a = gaussian_symbol([0.2, 0.0], [0.1, -0.3], 1.0, 0.7)
    b = gaussian_symbol([-0.5, 0.4], [0.0, 0.2], 0.8, 1.1)
    s = a * b - a + 3.0 * b
    x = rng.normal(size=(50, 2))
    xi = rng.normal(size=(50, 2))
    _, gx, gk = s.value_and_grad(x, xi)
    fx, fk = _fd_grad(s, x, xi)
    np.testing.assert_allclose(gx, fx, atol=1e-8)
    np.testing.assert_allclose(gk, fk, atol=1e-8)


@pytest.mark.parametrize("params", [INC, OUT])
def test_localizer_gradients(params, rng):
    g = Cometric.minkowski(2)
    z = zeta_incoming(params, g) if params.orientation == "incoming" else zeta_outgoing(params, g)
    x = rng.normal(size=(400, 2)) * 4
    xi = rng.normal(size=(400, 2))
    v, gx, gk = z.value_and_grad(x, xi)
    fx, fk = _fd_grad(z, x, xi)
    live = v > 1e-8
    assert live.sum() > 10
    np.testing.assert_allclose(gx[live], fx[live], atol=2e-6)
    np.testing.assert_allclose(gk[live], fk[live], atol=2e-6)


def test_bracket_is_antisymmetric(rng):
    g = Cometric.minkowski(2)
    p = principal_symbol(g)
    b = observable(INC, g)
    x = rng.normal(size=(100, 2)) * 3
    xi = rng.normal(size=(100, 2))
    np.testing.assert_allclose(poisson_bracket(p, b, x, xi), -poisson_bracket(b, p, x, xi), atol=1e-14)
    np.testing.assert_allclose(bracket_values(p, b)(x, xi), poisson_bracket(p, b, x, xi), atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_localizer_in_unit_interval(x1, x2, k1, k2):
    g = Cometric.minkowski(2)
    v = zeta_incoming(INC, g)(np.array([[x1, x2]]), np.array([[k1, k2]]))[0]
    assert -1e-15 <= v <= 1.0 + 1e-15


def test_plateau_constant_at_least_two():
    assert INC.plateau_constant() >= 2.0
    assert OUT.plateau_constant() >= 2.0
