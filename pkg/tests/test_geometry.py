import numpy as np
import pytest

from kgescape.geometry import (Cometric, DomainError, ExcludedPointError, GaussianBump, PowerDecay, RingTrap,
                               SingularConfigurationError, beta, c0_from_sigma_inf, grad_tau, japanese,
                               tau_incoming, tau_outgoing)


def test_japanese_bracket():
    assert japanese(np.array([[3.0, 4.0]]))[0] == pytest.approx(np.sqrt(26.0))


def test_c0_sign_follows_sigma_inf():
    assert c0_from_sigma_inf(0.6) == pytest.approx(0.75)
    assert c0_from_sigma_inf(-0.6) == pytest.approx(-0.75)


def test_beta_rejects_origin(flat2):
    with pytest.raises(ExcludedPointError):
        beta(np.zeros(2), np.array([1.0, 0.0]), flat2)
    with pytest.raises(ExcludedPointError):
        beta(np.ones(2), np.zeros(2), flat2)


def test_tau_formula_against_angle_form(flat2, rng):
    x = rng.normal(size=(500, 2)) * 5
    xi = rng.normal(size=(500, 2))
    b = beta(x, xi, flat2)
    keep = b < 0.85
    x, xi, b = x[keep], xi[keep], b[keep]
    c0 = c0_from_sigma_inf(0.9)
    expect = np.linalg.norm(x, axis=-1) * (c0 * np.sqrt(1 - b**2) - b)
    np.testing.assert_allclose(tau_incoming(x, xi, 0.9, flat2), expect, rtol=1e-12, atol=1e-12)


def test_tau_domains(flat2):
    x = np.array([1.0, 0.0])
    with pytest.raises(DomainError):
        tau_incoming(x, np.array([1.0, 0.0]), 0.5, flat2)
    with pytest.raises(DomainError):
        tau_outgoing(x, np.array([-1.0, 0.0]), -0.5, flat2)


def test_grad_tau_singular_on_axis(flat2):
    with pytest.raises(SingularConfigurationError):
        grad_tau(np.array([-1.0, 0.0]), np.array([1.0, 0.0]), "incoming", 0.9, flat2)


def test_grad_tau_outgoing_transport(flat2, rng):
    x = rng.normal(size=(300, 2)) * 3
    xi = rng.normal(size=(300, 2))
    b = beta(x, xi, flat2)
    keep = b > -0.85
    x, xi = x[keep], xi[keep]
    dx, _ = grad_tau(x, xi, "outgoing", -0.9, flat2)
    v = xi @ flat2.flat
    vhat = v / np.linalg.norm(v, axis=-1, keepdims=True)
    np.testing.assert_allclose(np.sum(vhat * dx, axis=-1), 1.0, atol=1e-12)


@pytest.mark.parametrize("family", [
    GaussianBump(amplitude=np.array([[0.1, 0.03], [0.03, -0.2]]), center=[0.5, -0.2], width=1.3),
    PowerDecay(amplitude=np.array([[0.1, 0.02], [0.02, -0.05]]), mu=0.5, scale=1.5),
])
def test_metric_derivatives_match_differences(family, rng):
    g = Cometric.minkowski(2, perturbation=family)
    x = rng.normal(size=(40, 2)) * 2
    G, dG, d2G, _ = g.metric_terms(x)
    e = 1e-5
    for i in range(2):
        E = np.zeros(2)
        E[i] = e
        fd = (g.metric_terms(x + E)[0] - g.metric_terms(x - E)[0]) / (2 * e)
        np.testing.assert_allclose(dG[..., i], fd, atol=1e-8)
        fd2 = (g.metric_terms(x + E)[1] - g.metric_terms(x - E)[1]) / (2 * e)
        np.testing.assert_allclose(d2G[..., i], fd2, atol=1e-7)


def test_order_cap_matches_full(rng):
    g = Cometric.ring_trap()
    x = rng.normal(size=(20, 3))
    full = g.metric_terms(x)
    for k in range(4):
        part = g.metric_terms(x, k)
        assert len(part) == k + 1
        for a, b in zip(part, full):
            np.testing.assert_array_equal(a, b)


def test_power_decay_constants(perturbed2, rng):
    x = rng.normal(size=(2000, 2)) * 30
    c = perturbed2.decay_constants(x)
    assert perturbed2.mu == 0.5
    assert all(np.isfinite(v["metric"]) for v in c.values())


def test_ring_trap_needs_three_dimensions():
    with pytest.raises(ValueError):
        Cometric(np.diag([1.0, -1.0]), perturbation=RingTrap())


def test_ring_orbit_is_null():
    g = Cometric.ring_trap()
    p = g.perturbation.orbit_point()
    G = g.g(p.x[None, :])[0]
    assert abs(p.xi @ G @ p.xi) < 1e-14


def test_degenerate_flat_part_rejected():
    with pytest.raises(ValueError):
        Cometric(np.diag([1.0, 0.0]))
