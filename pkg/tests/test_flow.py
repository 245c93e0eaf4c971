import numpy as np
import pytest

from kgescape.flow import (Escaped, InsufficientHorizonError, NotNullError, Trapped,
                           backward_asymptotic_direction, classify_null_nontrapping, hamilton_rhs, integrate,
                           trajectory_csv)
from kgescape.geometry import Cometric, PhasePoint


def test_rhs_flat_is_group_velocity(flat2):
    dx, dxi = hamilton_rhs(np.array([1.0, 2.0]), np.array([0.3, -0.4]), flat2)
    np.testing.assert_allclose(dx, [0.6, 0.8])
    np.testing.assert_array_equal(dxi, [0.0, 0.0])


def test_t_eval_marks_are_exact(perturbed2):
    marks = [-3.0, -1.5, 0.0, 2.0, 4.0]
    tr = integrate(PhasePoint([1.0, 0.0], [0.6, 0.8]), (-3.0, 4.0), perturbed2, t_eval=marks)
    for t in marks:
        tr.at(t)
    with pytest.raises(KeyError):
        tr.at(0.123)


def test_flat_straight_lines(flat2):
    p = PhasePoint([0.5, -1.0], [1.0, 0.4])
    tr = integrate(p, (-10.0, 10.0), flat2, t_eval=[-10.0, 10.0])
    y, eta = tr.at(10.0)
    np.testing.assert_allclose(y, p.x + 10.0 * 2.0 * (p.xi @ flat2.flat), atol=1e-12)
    np.testing.assert_allclose(eta, p.xi, atol=0)


def test_not_null_rejected(flat2):
    with pytest.raises(NotNullError):
        classify_null_nontrapping([1.0, 0.0], [1.0, 0.0], flat2, 20.0)


def test_generic_perturbed_null_data_escape(perturbed2):
    res = classify_null_nontrapping([1.0, 0.5], [0.6, 0.6], perturbed2, 30.0, null_tol=1.0)
    # not exactly null for the perturbed metric, so use a genuine null covector instead
    xi = np.array([1.0, 0.0])
    G = perturbed2.g(np.array([[1.0, 0.5]]))[0]
    # solve p2(1, s) = 0 for s
    a, b, c = G[1, 1], 2 * G[0, 1], G[0, 0]
    s = (-b - np.sqrt(b * b - 4 * a * c)) / (2 * a)
    xi = np.array([1.0, s])
    res = classify_null_nontrapping([1.0, 0.5], xi, perturbed2, 30.0)
    assert isinstance(res, Escaped)
    assert res.t_exit_fwd > 0 and res.t_exit_bwd < 0


def test_backward_direction_needs_horizon():
    g = Cometric.ring_trap()
    p = g.perturbation.orbit_point()
    with pytest.raises(InsufficientHorizonError):
        backward_asymptotic_direction(p, g, R_escape=10.0, k_max=4)


@pytest.mark.slow
def test_ring_orbit_trapped_short_horizon():
    g = Cometric.ring_trap()
    p = g.perturbation.orbit_point()
    res = classify_null_nontrapping(p.x, p.xi, g, 10.0, T_max=100.0, rtol=1e-10, atol=1e-12)
    assert isinstance(res, Trapped)
    assert res.max_radius == pytest.approx(1.0, abs=1e-6)


def test_trajectory_csv_columns(flat2):
    tr = integrate(PhasePoint([2.0, 0.0], [-1.0, 0.0]), (0.0, 1.0), flat2, t_eval=[0.0, 0.5, 1.0])
    lines = trajectory_csv(tr, flat2).strip().splitlines()
    assert lines[0] == "t,y_1,y_2,eta_1,eta_2,p2,beta,tau_incoming"
    assert len(lines) == 1 + len(tr.t)
    first = lines[1].split(",")
    assert float(first[-2]) == pytest.approx(-1.0)
    assert float(first[-1]) == pytest.approx(2.0)
