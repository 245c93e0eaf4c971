"""Acceptance criteria, one test each; every test prints a single verdict line."""

import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record
from kgescape import campaigns
from kgescape.cli import run
from kgescape.config import load_config
from kgescape.estimates import (CommutatorSetup, verify_incoming_cutoff_sign, verify_incoming_observable,
                                verify_outgoing_cutoff)
from kgescape.flow import Trapped, classify_null_nontrapping, integrate
from kgescape.geometry import Cometric, PhasePoint, beta, grad_tau, tau_incoming
from kgescape.symbols import CutoffParams, zeta_incoming
from kgescape.quantize import GridSpec

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def _cutoff(manifest, key, **kw):
    return CutoffParams(**manifest["cutoffs"][key]).with_(**kw)


def _richardson(f, x, i, e=1e-3):
    def d(s):
        E = np.zeros(x.shape[-1])
        E[i] = s
        return (f(x + E) - f(x - E)) / (2 * s)

    return (4 * d(e / 2) - d(e)) / 3


def test_criterion_01_geometry_identities(rng):
    t0 = time.time()
    g = Cometric.minkowski(3)
    si = 0.9
    x = rng.normal(size=(10_000, 3)) * rng.uniform(0.5, 50, size=(10_000, 1))
    xi = rng.normal(size=(10_000, 3))
    keep = beta(x, xi, g) < si - 1e-3
    x, xi = x[keep], xi[keep]
    dx, dxi = grad_tau(x, xi, "incoming", si, g)
    v = 2 * xi @ g.flat
    vhat = v / np.linalg.norm(v, axis=-1, keepdims=True)
    transport = float(np.max(np.abs(-np.sum(vhat * dx, axis=-1) - 1.0)))

    # finite differences with Richardson extrapolation, flat g0 = I, xi fixed
    ge = Cometric.euclidean(2)
    xs = rng.normal(size=(200, 2)) * 4
    xis = rng.normal(size=(200, 2))
    ok = beta(xs, xis, ge) < si - 0.05
    xs, xis = xs[ok], xis[ok]
    gx, gxi = grad_tau(xs, xis, "incoming", si, ge)
    rel = 0.0
    for i in range(2):
        fx = _richardson(lambda y: tau_incoming(y, xis, si, ge), xs, i)
        fk = _richardson(lambda k: tau_incoming(xs, k, si, ge), xis, i)
        scale = np.maximum(1.0, np.abs(fx))
        rel = max(rel, float(np.max(np.abs(gx[:, i] - fx) / scale)),
                  float(np.max(np.abs(gxi[:, i] - fk) / np.maximum(1.0, np.abs(fk)))))
    # localizer gradients on their live region
    z = zeta_incoming(CutoffParams(0.2, 0.5, 0.3, 0.9, 1.0, 0.2, 0.1), ge)
    zv, zx, _ = z.value_and_grad(xs, xis)
    live = zv > 1e-3
    for i in range(2):
        fz = _richardson(lambda y: z(y, xis), xs, i, e=1e-4)
        rel = max(rel, float(np.max(np.abs(zx[live, i] - fz[live]) / np.maximum(1.0, np.abs(fz[live])))))
    dt = time.time() - t0
    passed = transport <= 1e-10 and rel <= 1e-6
    record(1, passed, f"transport err {transport:.1e} on {len(x)} pts, fd rel err {rel:.1e}, {dt:.1f}s")
    assert passed


def test_criterion_02_flow_exactness(flat2, perturbed2):
    t0 = time.time()
    p = PhasePoint([0.7, -1.2], [0.8, 0.6])
    marks = np.linspace(-100, 100, 41)
    tr = integrate(p, (-100.0, 100.0), flat2, t_eval=marks)
    closed = max(float(np.max(np.abs(tr.at(t)[0] - (p.x + 2 * t * (p.xi @ flat2.flat))))) for t in marks)

    q = PhasePoint([1.0, 0.5], [0.9, -0.3])
    tp = integrate(q, (-100.0, 100.0), perturbed2, rtol=1e-11, atol=1e-13)
    drift = tp.max_p2_drift() / float(q.xi @ q.xi)

    fwd = integrate(q, (0.0, 30.0), perturbed2, rtol=1e-12, atol=1e-14)
    end = PhasePoint(fwd.y[-1], fwd.eta[-1])
    back = integrate(end, (-30.0, 0.0), perturbed2, rtol=1e-12, atol=1e-14)
    y0, eta0 = back.y[0], back.eta[0]
    roundtrip = float(max(np.max(np.abs(y0 - q.x)), np.max(np.abs(eta0 - q.xi))))
    dt = time.time() - t0
    passed = closed <= 1e-10 and drift <= 1e-8 and roundtrip <= 1e-8
    record(2, passed, f"closed form {closed:.1e}, p2 drift {drift:.1e}, round trip {roundtrip:.1e}, {dt:.1f}s")
    assert passed


def test_criterion_03_nontrapping(perturbed2):
    t0 = time.time()
    cfg = load_config(CONFIGS / "minkowski.toml")
    scan, _ = campaigns.nontrap_scan(cfg)
    flat_ok = scan["counts"]["Escaped"] == 200 and scan["pass"]

    ring = Cometric.ring_trap()
    o = ring.perturbation.orbit_point()
    res = classify_null_nontrapping(o.x, o.xi, ring, 20.0, T_max=1e3, rtol=1e-10, atol=1e-12)
    ring_ok = isinstance(res, Trapped)

    lim = campaigns.backward_limits(perturbed2, 50, 5.0, seed=7)
    dt = time.time() - t0
    passed = flat_ok and ring_ok and lim["pass"] and len(lim["sweep"]) == 50
    record(3, passed, f"flat escaped {scan['counts']['Escaped']}/200, ring {res.kind}, "
                      f"backward limit err {lim['worst']:.1e} on 50, {dt:.0f}s")
    assert passed


def test_criterion_04_incoming_sign(manifest, flat2, perturbed2):
    t0 = time.time()
    parts = []
    passed = True
    for key, g in (("flat", flat2), ("perturbed", perturbed2)):
        R0 = manifest["campaigns"][key]["R0"]
        inc = _cutoff(manifest, "incoming", R=R0)
        sign = verify_incoming_cutoff_sign(inc, g, count=100_000, seed=11)
        c1, obs = verify_incoming_observable(inc, g, count=100_000, seed=12)
        fw = max(sign.details["factorwise_max"])
        passed = passed and sign.passed and fw <= 1e-12 and c1 > 0 and obs.passed
        parts.append(f"{key}: R0 {R0:.4g} max {sign.worst:.1e} factorwise {fw:.1e} c1 {c1:.3g}")
    dt = time.time() - t0
    record(4, passed, "; ".join(parts) + f", {dt:.0f}s")
    assert passed


def test_criterion_05_outgoing(manifest, flat2, perturbed2):
    t0 = time.time()
    parts = []
    passed = True
    for key, g in (("flat", flat2), ("perturbed", perturbed2)):
        out = _cutoff(manifest, "outgoing", R=manifest["campaigns"][key]["R0"])
        rep = verify_outgoing_cutoff(out, g, count=100_000, seed=21, support_count=10_000)
        passed = passed and rep.passed
        parts.append(f"{key}: resid {rep.worst:.1e} rho outside {rep.details['rho_max_outside_support']:.1e}")
    dt = time.time() - t0
    record(5, passed, "; ".join(parts) + f", {dt:.0f}s")
    assert passed


def test_criterion_06_quantization():
    t0 = time.time()
    rep, _ = campaigns.quantize_check(load_config(CONFIGS / "euclidean_1d.toml"))
    C = [r["C"] for r in rep["garding"]["rows"]]
    dt = time.time() - t0
    record(6, rep["pass"], f"recovery slope {rep['recovery_fit']['order']:.2f}, commutator order "
                           f"{rep['calculus']['commutator_fit']['order']:.2f}, Garding C "
                           + ", ".join(f"{c:.3f}" for c in C) + f", {dt:.0f}s")
    assert rep["pass"], rep["checks"]


@pytest.fixture(scope="module")
def commutator_report():
    return campaigns.commutator_verify(load_config(CONFIGS / "euclidean_1d.toml"))[0]


def test_criterion_07_operator_inequality(commutator_report):
    rep = commutator_report
    lam = ", ".join(f"{r['lambda_min']:.2e}" for r in rep["sweep"])
    ok = rep["checks"]["operator_inequality"]
    record(7, ok, f"lambda_min [{lam}] fitted order {rep['fit']['order']:.2f} (need >= 2)")
    assert ok


def test_criterion_07_break_variant_fails(commutator_report):
    brk = commutator_report["break"]
    record("7b", commutator_report["checks"]["break_detected"],
           f"reversed commutator: order {brk['fit']['order']:.2f}, check fails as required")
    assert commutator_report["checks"]["break_detected"]
    assert not brk["pass"]


def test_criterion_08_energy_inequality(manifest):
    t0 = time.time()
    setup = CommutatorSetup(_cutoff(manifest, "rung"), _cutoff(manifest, "rung_next"),
                            tuple(manifest["commutator"]["box"]), tuple(manifest["commutator"]["box_next"]))
    grid = GridSpec(1, 7.0, 256, 0.05)
    res = campaigns.energy_check(setup, Cometric.euclidean(1), grid, manifest["commutator"]["c_basic"], 0.5j,
                                 100, 20, seed=0)
    dt = time.time() - t0
    passed = res["pass"] and res["states"] == 120 and res["premise_lambda_min"] >= -1e-10
    record(8, passed, f"premise lambda_min {res['premise_lambda_min']:.1e}, worst margin {res['worst_margin']:.2e}, "
                      f"B=0 rhs err {res['bookkeeping']['rhs_error']:.1e}, {dt:.0f}s")
    assert passed


def test_criterion_09_cascade(manifest):
    t0 = time.time()
    cfg = load_config(CONFIGS / "euclidean_1d.toml")
    rep, _ = campaigns.cascade_run(cfg)
    # independent target: tau^gamma at the center, computed from the closed form
    rung = _cutoff(manifest, "cascade")
    x0, k0 = cfg.cascade.center_x[0], cfg.cascade.center_xi[0]
    tau = float(tau_incoming(np.array([[x0]]), np.array([[k0]]), rung.sigma_inf, Cometric.euclidean(1))[0])
    target = tau**rung.gamma
    on = rep["sweep"][-1]["B0_on"]
    ratio = on / target
    off = rep["off_support"]["B0_fit"]
    dt = time.time() - t0
    passed = rep["pass"] and abs(ratio - 1) <= 0.1
    record(9, passed, f"plateau ratio {ratio:.3f} at h=0.05, off-support order {off['order']:.2f}, {dt:.0f}s")
    assert passed


def test_criterion_10_probe():
    t0 = time.time()
    parts = []
    passed = True
    for name in ("minkowski", "perturbed"):
        rep, _ = campaigns.probe_run(load_config(CONFIGS / f"{name}.toml"))
        passed = passed and rep["pass"]
        m = min(r["margin"] for r in rep["sweep"])
        parts.append(f"{name}: herm err {rep['worst']:.1e} min margin {m:.1e} "
                     f"controls {sum(v for k, v in rep['checks'].items() if k.startswith('control_'))}/5")
    dt = time.time() - t0
    record(10, passed, "; ".join(parts) + f", {dt:.0f}s")
    assert passed


SUITE = [
    ("flow", "trace", "minkowski"),
    ("nontrap", "scan", "minkowski"),
    ("escape", "verify", "minkowski"),
    ("quantize", "check", "euclidean_1d"),
    ("commutator", "verify", "euclidean_1d"),
    ("cascade", "run", "euclidean_1d"),
    ("probe", "run", "perturbed"),
]


def _without_timestamp(raw: bytes) -> bytes:
    return b"\n".join(line for line in raw.split(b"\n") if not line.lstrip().startswith(b'"timestamp"'))


def test_criterion_11_determinism(tmp_path):
    t0 = time.time()
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        for group, action, conf in SUITE:
            run([group, action, "--config", str(CONFIGS / f"{conf}.toml"), "--out", str(d / conf), "--seed", "3",
                 "--format", "csv"])
        outs.append(d)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    same = bool(files)
    for rel in files:
        a, b = outs[0] / rel, outs[1] / rel
        same = same and _without_timestamp(a.read_bytes()) == _without_timestamp(b.read_bytes())
    dt = time.time() - t0
    record(11, same, f"{len(files)} files identical across two seeded runs, {dt:.0f}s")
    assert same
