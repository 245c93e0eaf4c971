"""Verification campaigns driven by a RunConfig; each returns a report payload."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import probe as pr
from .config import ConfigError, CutoffBlock, RunConfig
from .estimates import (CommutatorSetup, HypothesisViolation, commutator_matrices, ladder_cascade,
                        search_R0, verify_energy_inequality, verify_incoming_cutoff_sign,
                        verify_incoming_observable, verify_operator_commutator, verify_outgoing_cutoff)
from .flow import (backward_asymptotic_direction, classify_null_nontrapping, integrate, p2_value,
                   trajectory_csv)
from .geometry import Cometric, PhasePoint, RingTrap
from .quantize import (GridSpec, calculus_checks, coherent_state, expectation, fit_order, garding_check,
                       weyl_quantize)
from .reports import load_manifest
from .symbols import CutoffParams, Ladder, ScalarSymbol, gaussian_symbol, observable, truncate_x

__all__ = [
    "sample_null_data",
    "flow_trace",
    "nontrap_scan",
    "escape_verify",
    "quantize_check",
    "commutator_verify",
    "energy_check",
    "cascade_run",
    "probe_run",
    "COMMANDS",
]


def _manifest_params(key: str) -> CutoffParams:
    return CutoffParams(**load_manifest()["cutoffs"][key])


def _params(block: CutoffBlock | None, key: str) -> CutoffParams:
    return block.params() if block is not None else _manifest_params(key)


# ---------------------------------------------------------------------------
# flow


def sample_null_data(g: Cometric, count: int, radius: float, seed: int):
    """Seeded null data: x uniform in a ball, xi a unit null covector."""
    rng = np.random.default_rng(seed)
    n = g.n
    out = []
    while len(out) < count:
        x = rng.normal(size=n)
        x *= radius * rng.uniform() ** (1.0 / n) / np.linalg.norm(x)
        G = g.g(x[None, :])[0]
        u, w = rng.normal(size=n), rng.normal(size=n)
        pu, pw, puw = u @ G @ u, w @ G @ w, u @ G @ w
        if pu * pw >= 0:
            ev = np.linalg.eigvalsh(G)
            if ev[0] * ev[-1] > 0:
                raise ConfigError("metric: cometric is definite, there are no null covectors")
            continue
        # p2(u + t w) = pw t^2 + 2 puw t + pu = 0 has real roots since pu pw < 0
        t = (-puw + np.sqrt(puw * puw - pu * pw)) / pw
        xi = u + t * w
        out.append((x, xi / np.linalg.norm(xi)))
    return out


def flow_trace(cfg: RunConfig) -> tuple[dict, dict]:
    if cfg.flow.initial is None:
        raise ConfigError("flow.initial: required for flow trace")
    g = cfg.metric.build()
    ini = cfg.flow.initial
    t0, t1 = ini.t_span
    p = PhasePoint(ini.x, ini.xi)
    t_eval = np.linspace(t0, t1, ini.samples)
    tr = integrate(p, (t0, t1), g, rtol=cfg.flow.rtol, atol=cfg.flow.atol, t_eval=t_eval)
    drift = tr.max_p2_drift()
    rel = drift / max(1.0, float(p.xi @ p.xi))
    report = {
        "quantity": "flow_trace",
        "params": {"x": list(ini.x), "xi": list(ini.xi), "t_span": [t0, t1]},
        "grid": {"samples": ini.samples, "rtol": cfg.flow.rtol, "atol": cfg.flow.atol},
        "worst": rel,
        "argmax": None,
        "pass": bool(tr.reason == "horizon_reached" and rel <= 1e-8),
        "reason": tr.reason,
        "steps": tr.steps,
        "rejected": tr.rejected,
        "p2_start": float(p2_value(p.x, p.xi, g)),
        "final": {"x": tr.y[-1].tolist(), "xi": tr.eta[-1].tolist()},
    }
    sigma_inf = cfg.cutoffs.incoming.sigma_inf if cfg.cutoffs.incoming else 0.9
    return report, {"trajectory.csv": trajectory_csv(tr, g, sigma_inf)}


def _classify(args):
    x, xi, g, R_escape, T_max, null_tol, rtol, atol = args
    res = classify_null_nontrapping(x, xi, g, R_escape, T_max, null_tol, rtol=rtol, atol=atol)
    return res


def nontrap_scan(cfg: RunConfig, jobs: int = 1) -> tuple[dict, dict]:
    g = cfg.metric.build()
    fl = cfg.flow
    data = [(x, xi, "sampled") for x, xi in sample_null_data(g, fl.count, fl.sample_radius, cfg.seed)]
    if fl.include_family_orbits and isinstance(g.perturbation, RingTrap):
        p = g.perturbation.orbit_point()
        data.append((p.x, p.xi, "family_orbit"))
    args = [(x, xi, g, fl.R_escape, fl.T_max, fl.null_tol, fl.rtol, fl.atol) for x, xi, _ in data]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_classify, args, chunksize=max(1, len(args) // (4 * jobs))))
    else:
        results = [_classify(a) for a in args]
    rows = []
    for (x, xi, origin), res in zip(data, results):
        row = {"origin": origin, "x": np.asarray(x).tolist(), "xi": np.asarray(xi).tolist(), "kind": res.kind}
        if res.kind == "Escaped":
            row["t_exit_fwd"], row["t_exit_bwd"] = res.t_exit_fwd, res.t_exit_bwd
        elif res.kind == "Trapped":
            row["horizon"], row["max_radius"] = res.horizon, res.max_radius
        else:
            row["reason"] = res.reason
        rows.append(row)
    kinds = [r["kind"] for r in rows]
    bad = [i for i, k in enumerate(kinds) if k != "Escaped"]
    report = {
        "quantity": "nontrap_scan",
        "params": {"R_escape": fl.R_escape, "T_max": fl.T_max, "count": fl.count,
                   "sample_radius": fl.sample_radius},
        "grid": {"seed": cfg.seed, "points": len(rows)},
        "worst": len(bad),
        "argmax": rows[bad[0]] if bad else None,
        "pass": not bad,
        "sweep": rows,
        "counts": {k: kinds.count(k) for k in ("Escaped", "Trapped", "Undetermined")},
    }
    return report, {}


def backward_limits(g: Cometric, count: int, radius: float, seed: int, R_escape: float = 50.0,
                    k_max: int = 14, tol: float = 1e-3) -> dict:
    """Asymptotic backward direction on escaped null data; the limit should be -1."""
    rows = []
    for x, xi in sample_null_data(g, count, radius, seed):
        res = backward_asymptotic_direction(PhasePoint(x, xi), g, R_escape=R_escape, k_max=k_max)
        rows.append({"x": x.tolist(), "xi": xi.tolist(), "limit": res["limit"],
                     "error": abs(res["limit"] + 1.0)})
    worst = max(r["error"] for r in rows) if rows else 0.0
    return {"quantity": "backward_direction", "worst": worst, "pass": bool(worst <= tol), "sweep": rows}


# ---------------------------------------------------------------------------
# symbols


def escape_verify(cfg: RunConfig) -> tuple[dict, dict]:
    g = cfg.metric.build()
    cb = cfg.cutoffs
    inc = _params(cb.incoming, "incoming")
    try:
        inc.validate(g.mu)
    except ValueError as exc:
        raise ConfigError(f"cutoffs.incoming: {exc}") from None
    search = None
    if cb.search_R0:
        search = search_R0(inc, g, R_lo=cb.R_search[0], R_hi=cb.R_search[1], count=cb.count,
                           seed=cfg.seed, safety=cb.safety)
        if search["R0"] is None:
            checks = [{"check": "R0_search", "pass": False, "detail": "no R in range passes"}]
            return _escape_report(inc, checks, search), {}
        inc = inc.with_(R=float(search["R0"]))
    sign = verify_incoming_cutoff_sign(inc, g, count=cb.count, seed=cfg.seed + 1)
    c1, obs = verify_incoming_observable(inc, g, count=cb.count, seed=cfg.seed + 2)
    checks = [
        {"check": "incoming_sign", "pass": sign.passed, "report": sign.to_dict()},
        {"check": "incoming_observable", "pass": obs.passed, "c1": c1, "report": obs.to_dict()},
    ]
    if cb.outgoing is not None:
        outg = cb.outgoing.params().with_(R=inc.R)
        o = verify_outgoing_cutoff(outg, g, count=cb.count, seed=cfg.seed + 3, support_count=cb.support_count)
        checks.append({"check": "outgoing", "pass": o.passed, "C0": o.details["C0"], "report": o.to_dict()})
    return _escape_report(inc, checks, search), {}


def _escape_report(inc, checks, search):
    failing = [c["check"] for c in checks if not c["pass"]]
    return {
        "quantity": "escape_verify",
        "params": inc.as_dict(),
        "grid": None,
        "worst": len(failing),
        "argmax": failing[0] if failing else None,
        "pass": not failing,
        "sweep": search["sweep"] if search else [],
        "R0": inc.R,
        "R_bisect": search["R_bisect"] if search else None,
        "checks": checks,
    }


# ---------------------------------------------------------------------------
# quantization


def quartic_well_symbol(width: float = 1.5) -> ScalarSymbol:
    """(x - xi)^2 (x + xi)^2 times a Gaussian: nonnegative with a degenerate zero set."""
    G = gaussian_symbol([0.0], [0.0], width, width)

    def v(x, xi):
        X, K = x[..., 0], xi[..., 0]
        return (X - K) ** 2 * (X + K) ** 2

    return ScalarSymbol.from_parts(v, name="quartic") * G


def quantize_check(cfg: RunConfig) -> tuple[dict, dict]:
    gb = cfg.grid
    if gb.n != 1:
        raise ConfigError("grid.n: quantize check runs on one-dimensional grids")
    grids = gb.grids()
    a = gaussian_symbol([0.5], [0.3], 1.0, 0.8, name="gauss_a")
    b = gaussian_symbol([-0.4], [-0.2], 1.2, 0.7, name="gauss_b")
    one = ScalarSymbol.constant(1.0)
    centers = [(0.5, 0.3), (1.0, 0.0), (-0.5, 0.5)]
    rows = []
    for gr in grids:
        I = weyl_quantize(one, gr, strict=False).matrix
        A = weyl_quantize(a, gr, strict=False)
        errs = []
        for x0, k0 in centers:
            psi = coherent_state([x0], [k0], gr)
            errs.append(abs(expectation(A, psi, gr).real - float(a(np.array([[x0]]), np.array([[k0]]))[0])))
        rows.append({"h": gr.h, "identity_error": float(np.max(np.abs(I - np.eye(gr.size)))),
                     "hermiticity_error": A.hermiticity_error(), "recovery_error": max(errs)})
    hs = [r["h"] for r in rows]
    rec = fit_order(hs, [r["recovery_error"] for r in rows])
    calc = calculus_checks(a, b, grids, strict=False)
    gard = garding_check(quartic_well_symbol(), grids, strict=False)
    checks = {
        "identity": max(r["identity_error"] for r in rows) <= 1e-12,
        "hermitian": max(r["hermiticity_error"] for r in rows) <= 1e-10,
        "recovery_slope": 0.8 <= rec["order"] <= 1.3,
        "commutator_order": calc["commutator_fit"]["order"] >= 1.0,
        "garding": gard["stable"] and all(r["lambda_min"] >= -gard["C"] * r["h"] - 1e-12 for r in gard["rows"]),
    }
    failing = [k for k, v in checks.items() if not v]
    report = {
        "quantity": "quantize_check",
        "params": {"symbols": [a.name, b.name], "garding_symbol": "quartic"},
        "grid": gb.model_dump(mode="json"),
        "worst": len(failing),
        "argmax": failing[0] if failing else None,
        "pass": not failing,
        "sweep": rows,
        "checks": checks,
        "recovery_fit": rec,
        "calculus": calc,
        "garding": gard,
    }
    return report, {}


# ---------------------------------------------------------------------------
# operator level


def _commutator_setup(cfg: RunConfig) -> CommutatorSetup:
    cb = cfg.commutator
    return CommutatorSetup(_params(cb.rung, "rung"), _params(cb.rung_next, "rung_next"),
                           tuple(cb.box), tuple(cb.box_next))


def energy_check(setup: CommutatorSetup, g: Cometric, grid: GridSpec, c: float, z: complex,
                 n_random: int, n_coherent: int, seed: int) -> dict:
    """Energy inequality on matrices that satisfy the premise by construction.

    E absorbs the negative part of the commutator form, E = sqrt(m) I, so the
    premise holds exactly; B = 0 checks the bookkeeping of the right side.
    """
    m = commutator_matrices(setup, g, grid)
    B, Bt, P, W = m["B"], m["Bn"], m["P"], m["W"]
    h = grid.h
    BB = B.conj().T @ B
    prem = 1j * (BB @ P - P @ BB) - (c / h) * B.conj().T @ W @ B + Bt.conj().T @ W @ Bt
    lam = float(np.linalg.eigvalsh(0.5 * (prem + prem.conj().T))[0])
    E = np.sqrt(max(0.0, -lam) + 1e-9) * np.eye(grid.size)
    rng = np.random.default_rng(seed)
    states = [rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size) for _ in range(n_random)]
    states = [s / grid.norm(s) for s in states]
    for _ in range(n_coherent):
        x0 = rng.uniform(-0.8, 0.8) * grid.L * (1 - grid.margin)
        k0 = rng.uniform(-1.5, 1.5)
        states.append(coherent_state([x0], [k0], grid, check=False))
    main = verify_energy_inequality(B, Bt, E, P, z, c, h, W, states)
    zero = np.zeros_like(B)
    book = verify_energy_inequality(zero, Bt, E, P, z, c, h, W, states)
    sw = np.sqrt(np.real(np.diag(W)))
    exact = [np.linalg.norm(sw * (Bt @ s)) ** 2 + np.linalg.norm(E @ s) ** 2 for s in states]
    book_err = max(abs(r["rhs"] - e) / max(1.0, e) for r, e in zip(book["rows"], exact))
    book_lhs = max(abs(r["lhs"]) for r in book["rows"])
    return {
        "quantity": "energy_inequality",
        "premise_lambda_min": main["premise_lambda_min"],
        "E_shift": float(E[0, 0] ** 2),
        "states": main["states"],
        "worst_margin": min(r["margin"] for r in main["rows"]),
        "pass": bool(main["pass"] and book["pass"] and book_err <= 1e-12 and book_lhs == 0.0),
        "bookkeeping": {"rhs_error": book_err, "lhs_max": book_lhs},
        "rows": main["rows"],
    }


def commutator_verify(cfg: RunConfig) -> tuple[dict, dict]:
    g = cfg.metric.build()
    if g.n != 1 or cfg.grid.n != 1:
        raise ConfigError("metric.dimension: the operator commutator campaign runs in n = 1")
    grids = cfg.grid.grids()
    setup = _commutator_setup(cfg)
    cb = cfg.commutator
    man = load_manifest()["commutator"]
    if cb.use_manifest and cb.c0_values is None and cb.alpha_values is None:
        rep = verify_operator_commutator(setup, g, grids, c0=man["c_basic"], alpha=man["c_rung_0"])
    else:
        rep = verify_operator_commutator(setup, g, grids, c0_values=cb.c0_values, alpha_values=cb.alpha_values)
    brk = verify_operator_commutator(setup, g, grids, c0=rep["c0"], alpha=rep["alpha"], reverse=True)
    try:
        energy = energy_check(setup, g, grids[-1], rep["c0"], 0.5j, cb.energy_states, cb.coherent_states,
                              cfg.seed)
    except HypothesisViolation as exc:
        energy = {"quantity": "energy_inequality", "pass": False, "premise_lambda_min": exc.lam_min}
    checks = {"operator_inequality": rep["pass"], "break_detected": not brk["pass"],
              "energy_inequality": energy["pass"]}
    failing = [k for k, v in checks.items() if not v]
    report = {
        "quantity": "commutator_verify",
        "params": {"rung": rep["rung"], "rung_next": rep["rung_next"], "boxes": rep["boxes"]},
        "grid": rep["grids"],
        "worst": float(-min(r["lambda_min"] for r in rep["rows"])),
        "argmax": failing[0] if failing else None,
        "pass": not failing,
        "sweep": rep["rows"],
        "checks": checks,
        "constants": {"c_basic": rep["c0"], "c_rung_0": rep["alpha"]},
        "fit": rep["fit"],
        "break": {"rows": brk["rows"], "fit": brk["fit"], "pass": brk["pass"]},
        "energy": {k: v for k, v in energy.items() if k != "rows"},
    }
    return report, {}


def cascade_run(cfg: RunConfig) -> tuple[dict, dict]:
    g = cfg.metric.build()
    if g.n != 1:
        raise ConfigError("metric.dimension: the cascade campaign runs in n = 1")
    cc = cfg.cascade
    man = load_manifest()
    if cc.rungs:
        ladder = Ladder(tuple(r.params() for r in cc.rungs))
    else:
        ladder = Ladder((_manifest_params("cascade"), _manifest_params("cascade_next")))
    boxes = [tuple(b) for b in (cc.boxes or man["cascade"]["boxes"])]
    grids = [GridSpec(1, cc.L, cc.N, h) for h in cc.h]
    consts = {"c0": man["commutator"]["c_basic"], "alpha": [man["commutator"]["c_rung_0"]] * (len(ladder) - 1)}
    on = ladder_cascade(ladder, g, grids, boxes, (cc.center_x, cc.center_xi), consts)
    off_center = (cc.center_x, [-v for v in cc.center_xi])
    off = ladder_cascade(ladder, g, grids, boxes, off_center, consts)
    b0 = truncate_x(observable(ladder[0], g), *boxes[0])
    target = float(b0(np.array([cc.center_x]), np.array([cc.center_xi]))[0])
    plateau_ratio = on["rows"][-1]["B0_norm"] / target if target > 0 else float("nan")
    off_fit = off["B0_fit"]
    checks = {
        "plateau": bool(np.isfinite(plateau_ratio) and abs(plateau_ratio - 1.0) <= 0.1),
        "off_support_decay": bool(off_fit["all_below_floor"] or off_fit["order"] >= 2.0),
    }
    failing = [k for k, v in checks.items() if not v]
    report = {
        "quantity": "cascade_run",
        "params": {"ladder": [r.as_dict() for r in ladder.rungs], "boxes": [list(b) for b in boxes]},
        "grid": [gr.as_dict() for gr in grids],
        "worst": abs(plateau_ratio - 1.0),
        "argmax": failing[0] if failing else None,
        "pass": not failing,
        "sweep": [{"h": r["h"], "B0_on": r["B0_norm"], "B0_off": s["B0_norm"]}
                  for r, s in zip(on["rows"], off["rows"])],
        "checks": checks,
        "plateau": {"tau_gamma": target, "ratio": plateau_ratio},
        "on_plateau": on,
        "off_support": off,
    }
    return report, {}


# ---------------------------------------------------------------------------
# probe


def probe_run(cfg: RunConfig) -> tuple[dict, dict]:
    g = cfg.metric.build()
    pb = cfg.probe
    if g.n != pb.n:
        raise ConfigError(f"probe.n: must equal metric.dimension ({g.n})")
    grid = GridSpec(pb.n, pb.L, pb.N, 1.0)
    Pd = pr.assemble_P(g, grid)
    rng = np.random.default_rng(cfg.seed)
    states = [rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size) for _ in range(pb.states)]
    for _ in range(pb.states):
        x0 = rng.uniform(-0.3, 0.3, pb.n) * pb.L
        k0 = rng.uniform(-1.0, 1.0, pb.n)
        states.append(coherent_state(x0, k0, grid.with_h(0.5), check=False))
    xi_tail = (pb.tail_xi + [0.0] * pb.n)[: pb.n]
    reality = pr.quadratic_form_reality(Pd, states)
    tail = pr.cutoff_commutator_decay(Pd, pb.R_list, pr.tail_state(grid, pb.tail_power, xi_tail), pb.slack)
    gauss = pr.cutoff_commutator_decay(Pd, pb.R_list, coherent_state(np.zeros(pb.n), np.zeros(pb.n), grid),
                                       pb.slack)
    phi = states[0]
    X1 = pr.cutoff_matrix(grid, None)
    ident = float(np.linalg.norm(Pd.matrix @ (X1 @ phi) - X1 @ (Pd.matrix @ phi)))
    resolvent = [pr.resolvent_kernel_probe(Pd, complex(*z)) for z in pb.z]
    controls = {}
    try:
        pr.assemble_P(g, grid, coefficient_hook=lambda G, u, u0: (G * (1 + 0.01j), u, u0))
        controls["complex_injection_rejected"] = False
    except pr.NonHermitianError:
        controls["complex_injection_rejected"] = True
    try:
        pr.assemble_P(g, grid, split_sign=-1.0, coefficient_hook=_with_first_order(grid))
        controls["split_sign_flip_rejected"] = False
    except pr.NonHermitianError:
        controls["split_sign_flip_rejected"] = True
    skew = pr.skew_injected(Pd, 1e-3, seed=cfg.seed)
    controls["skew_reality_fails"] = not pr.quadratic_form_reality(skew, states)["pass"]
    pos = pr.skew_injected(Pd, abs(pb.z[0][1]), positive=True)
    controls["skew_resolvent_fails"] = not pr.resolvent_kernel_probe(pos, complex(*pb.z[0]))["pass"]
    flat_tail = pr.cutoff_commutator_decay(Pd, pb.R_list, pr.tail_state(grid, 0.0, xi_tail), pb.slack)
    controls["growing_tail_decay_fails"] = not flat_tail["pass"]
    checks = {
        "hermitian": Pd.is_hermitian,
        "reality": reality["pass"],
        "tail_decay": tail["pass"],
        "gaussian_decay": gauss["pass"],
        "identity_cutoff_zero": ident == 0.0,
        "resolvent": all(r["pass"] for r in resolvent),
        **{f"control_{k}": v for k, v in controls.items()},
    }
    failing = [k for k, v in checks.items() if not v]
    report = {
        "quantity": "probe_run",
        "params": {"tail_power": pb.tail_power, "tail_xi": xi_tail, "R": pb.R_list},
        "grid": grid.as_dict(),
        "worst": Pd.hermiticity_error(),
        "argmax": failing[0] if failing else None,
        "pass": not failing,
        "sweep": [{"z": r["z"], "sigma_min": r["sigma_min"], "margin": r["margin"]} for r in resolvent],
        "checks": checks,
        "reality": {k: v for k, v in reality.items() if k != "rows"},
        "tail_decay": tail,
        "gaussian_decay": gauss,
        "growing_tail": flat_tail,
        "note": resolvent[0]["note"],
    }
    return report, {}


def _with_first_order(grid: GridSpec):
    # a real, x-dependent first-order coefficient so the split-sign break has something to act on
    pts = grid.points()
    bump = 0.1 * np.exp(-0.5 * np.sum(pts * pts, axis=-1))[:, None]

    def hook(G, u, u0):
        return G, u + bump, u0

    return hook


COMMANDS = {
    ("flow", "trace"): flow_trace,
    ("nontrap", "scan"): nontrap_scan,
    ("escape", "verify"): escape_verify,
    ("quantize", "check"): quantize_check,
    ("commutator", "verify"): commutator_verify,
    ("cascade", "run"): cascade_run,
    ("probe", "run"): probe_run,
}
