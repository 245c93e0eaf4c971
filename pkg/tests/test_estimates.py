import numpy as np
import pytest

from kgescape.estimates import (HypothesisViolation, outside_support_sample, search_R0, support_sample,
                                verify_energy_inequality, verify_incoming_cutoff_sign,
                                verify_incoming_observable, verify_outgoing_cutoff)
from kgescape.geometry import Cometric, GaussianBump
from kgescape.symbols import CutoffParams, outgoing_remainder

INC = CutoffParams(0.2, 0.5, 0.3, 0.9, 1.0, 0.2, 0.1)
OUT = CutoffParams(0.2, -0.5, -0.3, -0.9, 1.0, 0.2, 0.1, orientation="outgoing")


def test_support_sample_is_seeded():
    a = support_sample(INC, np.diag([1.0, -1.0]), 500, seed=3)
    b = support_sample(INC, np.diag([1.0, -1.0]), 500, seed=3)
    np.testing.assert_array_equal(a[0], b[0])
    assert a[0].shape == (500, 2)


def test_flat_sign_holds_everywhere(flat2):
    rep = verify_incoming_cutoff_sign(INC, flat2, count=5000, seed=0)
    assert rep.passed
    assert rep.to_dict()["pass"] is True
    assert list(rep.to_dict())[:6] == ["quantity", "params", "grid", "worst", "argmax", "pass"]


def test_strong_bump_breaks_sign_at_small_R():
    g = Cometric.minkowski(2, perturbation=GaussianBump(amplitude=np.array([[0.3, 0.0], [0.0, -0.3]]),
                                                        width=2.0))
    rep = verify_incoming_cutoff_sign(INC.with_(R=0.5), g, count=5000, seed=0)
    assert not rep.passed
    res = search_R0(INC, g, R_lo=0.5, R_hi=64.0, count=3000, seed=0)
    assert res["R0"] is not None and res["R0"] == pytest.approx(1.25 * res["R_bisect"])


def test_flat_observable_constant_positive(flat2):
    c1, rep = verify_incoming_observable(INC, flat2, count=5000, seed=0)
    assert c1 > 0 and rep.passed
    assert rep.details["chain_lower_bound"] > 0


def test_outgoing_remainder_bookkeeping(flat2):
    rep = verify_outgoing_cutoff(OUT, flat2, count=5000, seed=0, support_count=2000)
    assert rep.passed
    assert rep.details["rho_max_outside_support"] == 0.0


def test_outside_sample_avoids_support(flat2):
    x, xi = outside_support_sample(OUT, flat2.flat, 2000, seed=5)
    assert np.all(outgoing_remainder(OUT, flat2)(x, xi) == 0.0)


def _toy(n=12, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    P = 0.5 * (A + A.conj().T)
    B = np.diag(rng.uniform(0.5, 1.0, n)).astype(complex)
    W = np.diag(1.0 / np.sqrt(1.0 + np.arange(n) ** 2.0))
    return P, B, W


def test_energy_inequality_from_valid_premise():
    P, B, W = _toy()
    c, h = 0.5, 0.1
    BB = B.conj().T @ B
    prem = 1j * (BB @ P - P @ BB) - (c / h) * B.conj().T @ W @ B
    lam = np.linalg.eigvalsh(0.5 * (prem + prem.conj().T))[0]
    E = np.sqrt(max(0.0, -lam) + 1e-9) * np.eye(P.shape[0])
    states = np.random.default_rng(1).normal(size=(10, P.shape[0])) + 0j
    res = verify_energy_inequality(B, np.zeros_like(B), E, P, 0.5j, c, h, W, states)
    assert res["pass"]


def test_energy_inequality_rejects_bad_premise():
    P, B, W = _toy()
    with pytest.raises(HypothesisViolation) as info:
        verify_energy_inequality(B, np.zeros_like(B), np.zeros_like(B), P, 0.5j, 0.5, 0.1, W, [])
    assert info.value.lam_min < 0
