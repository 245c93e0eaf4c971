"""Hamilton flow of the wave symbol and null non-trapping diagnostics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Cometric, PhasePoint, c0_from_sigma_inf

__all__ = [
    "FlowError",
    "NotNullError",
    "InsufficientHorizonError",
    "Trajectory",
    "Escaped",
    "Trapped",
    "Undetermined",
    "hamilton_rhs",
    "p2_value",
    "integrate",
    "classify_null_nontrapping",
    "backward_asymptotic_direction",
    "trajectory_csv",
    "write_trajectory_csv",
]


class FlowError(RuntimeError):
    pass


class NotNullError(ValueError):
    pass


class InsufficientHorizonError(FlowError):
    pass


def p2_value(x, xi, g: Cometric):
    return np.einsum("...j,...jk,...k->...", xi, g.g(x), xi)


def hamilton_rhs(x, xi, g: Cometric):
    """(d_xi p2, -d_x p2)."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    G, dG = g.metric_terms(x, 1)
    dx = 2.0 * np.einsum("...jk,...k->...j", G, xi)
    dxi = -np.einsum("...j,...jkl,...k->...l", xi, dG, xi)
    return dx, dxi


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
ORDER = 5


@dataclass
class Trajectory:
    """Sampled flow line; ``t`` is sorted increasingly and includes 0."""

    t: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    p2: np.ndarray
    reason: str
    rtol: float
    atol: float
    steps: int = 0
    rejected: int = 0
    conservation_retries: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def start(self) -> PhasePoint:
        i = int(np.argmin(np.abs(self.t)))
        return PhasePoint(self.y[i], self.eta[i])

    def max_p2_drift(self) -> float:
        i = int(np.argmin(np.abs(self.t)))
        p0 = self.p2[i]
        return float(np.max(np.abs(self.p2 - p0)) / (1.0 + abs(p0)))

    def at(self, tq):
        """State at a recorded time (exact match required)."""
        idx = np.nonzero(self.t == tq)[0]
        if idx.size == 0:
            raise KeyError(f"time {tq} not sampled")
        i = idx[0]
        return self.y[i], self.eta[i]


def _dp_step(f, z, dt, k1):
    ks = [k1]
    for i in range(1, 7):
        zi = z + dt * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(zi))
    z5 = z + dt * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = dt * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return z5, err, ks[-1]


def _integrate_one_way(g, z0, T, rtol, atol, tol_conserve, t_eval, max_steps, h_min, stop):
    n = g.n

    def f(z):
        dx, dxi = hamilton_rhs(z[:n], z[n:], g)
        return np.concatenate([dx, dxi])

    def energy(z):
        return float(p2_value(z[:n], z[n:], g))

    direction = 1.0 if T >= 0 else -1.0
    Tabs = abs(T)
    marks = sorted(abs(t) for t in t_eval if 0 < direction * t <= Tabs) if t_eval is not None else []
    ts = [0.0]
    zs = [z0.copy()]
    e0 = energy(z0)
    tol_e = tol_conserve * (1.0 + abs(e0))
    t = 0.0
    z = z0.copy()
    k1 = f(z)
    speed = float(np.max(np.abs(k1)))
    dt = 0.01 * max(1.0, float(np.max(np.abs(z)))) / max(speed, 1e-12)
    dt = min(max(dt, 1e-6), max(Tabs, 1e-12))
    steps = rejected = retries = 0
    reason = "horizon_reached"
    mi = 0
    while t < Tabs:
        if steps + rejected > max_steps:
            reason = "step_failure"
            break
        step = min(dt, Tabs - t)
        hit = False
        if mi < len(marks) and t + step >= marks[mi] - 1e-15 * max(1.0, marks[mi]):
            step = marks[mi] - t
            hit = True
        if step < h_min:
            if hit and step >= 0:
                # a mark coincides with the current time up to round-off
                ts.append(direction * marks[mi])
                zs.append(z.copy())
                mi += 1
                continue
            reason = "step_failure"
            break
        znew, err, klast = _dp_step(f, z, direction * step, k1)
        # error measured against the state norm: near-zero components do not
        # dictate the step on orbits that keep some coordinates at rest
        sc = atol + rtol * max(float(np.max(np.abs(z))), float(np.max(np.abs(znew))))
        en = float(np.sqrt(np.mean((err / sc) ** 2)))
        if not np.all(np.isfinite(znew)) or en > 1.0:
            rejected += 1
            fac = 0.2 if not np.isfinite(en) else max(0.2, 0.9 * en ** (-1.0 / ORDER))
            dt = step * fac
            continue
        if abs(energy(znew) - e0) > tol_e:
            retries += 1
            dt = 0.5 * step
            continue
        t = marks[mi] if hit else t + step
        if hit:
            mi += 1
        z = znew
        k1 = klast
        steps += 1
        ts.append(direction * t)
        zs.append(z.copy())
        fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** (-1.0 / ORDER)))
        dt = step * fac if not hit else max(dt, step)
        if stop is not None and stop(direction * t, z):
            reason = "escaped"
            break
    return ts, zs, reason, steps, rejected, retries


def integrate(p0: PhasePoint, t_span: Sequence[float], g: Cometric, rtol: float = 1e-10,
              atol: float = 1e-12, tol_conserve: float = 1e-8, t_eval=None,
              max_steps: int = 200000, h_min: float = 1e-12, stop=None) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration of the Hamilton flow.

    The span may straddle 0; both halves start from ``p0``.  Every accepted
    step keeps ``|p2 - p2(0)| <= tol_conserve (1 + |p2(0)|)``; a breach halves
    the step and retries.  A step below ``h_min`` ends the run with reason
    ``step_failure`` and the partial trajectory is still returned.

    Args:
        t_eval: times that must appear exactly in the output.
        stop: optional ``stop(t, z) -> bool`` checked after each step
            (reason ``escaped`` when it fires).
    """
    t_minus, t_plus = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t_minus) and math.isfinite(t_plus)) or t_minus > 0 or t_plus < 0:
        raise ValueError("t_span must be finite and contain 0")
    if rtol <= 0 or atol <= 0 or tol_conserve <= 0:
        raise ValueError("tolerances must be positive")
    z0 = np.concatenate([p0.x, p0.xi])
    n = g.n
    parts = []
    reasons = []
    stats = np.zeros(3, dtype=int)
    for T in (t_minus, t_plus):
        if T == 0:
            continue
        ts, zs, reason, *st = _integrate_one_way(g, z0, T, rtol, atol, tol_conserve, t_eval,
                                                 max_steps, h_min, stop)
        parts.append((ts, zs))
        reasons.append(reason)
        stats += st
    t_all = [0.0]
    z_all = [z0]
    for ts, zs in parts:
        t_all.extend(ts[1:])
        z_all.extend(zs[1:])
    t_all = np.asarray(t_all)
    order = np.argsort(t_all, kind="stable")
    Z = np.asarray(z_all)[order]
    t_all = t_all[order]
    reason = "step_failure" if "step_failure" in reasons else (
        "escaped" if reasons and all(r == "escaped" for r in reasons) else "horizon_reached")
    y, eta = Z[:, :n], Z[:, n:]
    return Trajectory(t_all, y, eta, p2_value(y, eta, g), reason, rtol, atol,
                      int(stats[0]), int(stats[1]), int(stats[2]),
                      {"t_span": [t_minus, t_plus], "reasons": reasons})


# ---------------------------------------------------------------------------
# Non-trapping


@dataclass(frozen=True)
class Escaped:
    t_exit_fwd: float
    t_exit_bwd: float
    kind: str = "Escaped"


@dataclass(frozen=True)
class Trapped:
    horizon: float
    max_radius: float
    kind: str = "Trapped"


@dataclass(frozen=True)
class Undetermined:
    reason: str
    kind: str = "Undetermined"


def _radial_speed(y, eta, g):
    dx, _ = hamilton_rhs(y, eta, g)
    r = np.linalg.norm(y, axis=-1)
    return np.sum(y * dx, axis=-1) / np.maximum(r, 1e-300)


def _escape_time(traj: Trajectory, g, R_escape, dwell, direction):
    """First |t| at which |y| > R_escape with positive radial speed (in the
    direction of travel) sustained for ``dwell``; None if never."""
    sel = traj.t * direction >= 0
    t = traj.t[sel] * direction
    order = np.argsort(t)
    t = t[order]
    y = traj.y[sel][order]
    eta = traj.eta[sel][order]
    r = np.linalg.norm(y, axis=-1)
    rs = _radial_speed(y, eta, g) * direction
    good = (r > R_escape) & (rs > 0)
    start = None
    for i in range(len(t)):
        if good[i]:
            if start is None:
                start = t[i]
            if t[i] - start >= dwell:
                return float(start)
        else:
            start = None
    return None


def classify_null_nontrapping(x0, xi0, g: Cometric, R_escape: float, T_max: float | None = None,
                              null_tol: float = 1e-8, dwell: float | None = None,
                              rtol: float = 1e-9, atol: float = 1e-11):
    """Finite-horizon escape certificate for null initial data.

    Escaped: in both time directions |y| passes R_escape and the radial speed
    stays positive (outwards along the direction of travel) for a dwell
    window.  Trapped: |y| < R_escape for all |t| <= T_max in at least one
    direction.  Otherwise Undetermined.
    """
    p = PhasePoint(x0, xi0)
    if not np.any(p.xi):
        raise NotNullError("xi0 = 0 is excluded")
    pv = float(p2_value(p.x, p.xi, g))
    if abs(pv) > null_tol * float(p.xi @ p.xi):
        raise NotNullError(f"initial data not null: p2 = {pv:.3e}")
    speed = float(np.linalg.norm(hamilton_rhs(p.x, p.xi, g)[0]))
    if T_max is None:
        T_max = 1e3 * R_escape / max(speed, 1e-300)
    if dwell is None:
        dwell = R_escape / max(speed, 1e-300)
    out = {}
    for direction in (1.0, -1.0):
        state = {"start": None}

        def stop(t, z, direction=direction, state=state):
            y, eta = z[: g.n], z[g.n :]
            r = float(np.linalg.norm(y))
            rs = float(_radial_speed(y, eta, g)) * direction
            if r > R_escape and rs > 0:
                if state["start"] is None:
                    state["start"] = abs(t)
                return abs(t) - state["start"] >= dwell
            state["start"] = None
            return False

        tr = integrate(p, (min(0.0, direction * T_max), max(0.0, direction * T_max)), g,
                       rtol=rtol, atol=atol, stop=stop)
        out[direction] = tr
    res = {}
    for direction, tr in out.items():
        if tr.reason == "step_failure":
            return Undetermined(f"integration failed in direction {direction:+.0f}")
        res[direction] = _escape_time(tr, g, R_escape, dwell, direction)
    if res[1.0] is not None and res[-1.0] is not None:
        return Escaped(res[1.0], -res[-1.0])
    for direction, tr in out.items():
        rmax = float(np.max(np.linalg.norm(tr.y, axis=-1)))
        if res[direction] is None and rmax < R_escape and tr.reason == "horizon_reached":
            return Trapped(T_max, rmax)
    return Undetermined("left R_escape without a sustained outward dwell")


def _aitken(seq):
    s0, s1, s2 = seq[-3:]
    den = s2 - 2 * s1 + s0
    if abs(den) < 1e-300:
        return float(s2)
    return float(s2 - (s2 - s1) ** 2 / den)


def backward_asymptotic_direction(start, g: Cometric, R_escape: float = 50.0, k_max: int = 12,
                                  t0: float | None = None, rtol: float = 1e-11, atol: float = 1e-13) -> dict:
    """yhat(t) . vhat(eta(t)) at t = -t0 2^k and its Aitken-extrapolated limit.

    ``start`` is a PhasePoint or a Trajectory (its t = 0 state is used).
    ``vhat`` is the unit flat group velocity of the current momentum.

    Raises:
        InsufficientHorizonError: if |y| has not passed R_escape by the last
            sample time (for instance on a trapped orbit).
    """
    p = start.start if isinstance(start, Trajectory) else start
    speed = float(np.linalg.norm(hamilton_rhs(p.x, p.xi, g)[0]))
    if t0 is None:
        t0 = 1.0 / max(speed, 1e-300)
    times = [-t0 * 2.0**k for k in range(k_max + 1)]
    tr = integrate(p, (times[-1], 0.0), g, rtol=rtol, atol=atol, t_eval=times)
    if tr.reason == "step_failure":
        raise InsufficientHorizonError("integration failed before the backward horizon")
    vals = []
    for t in times:
        y, eta = tr.at(t)
        v = eta @ g.flat
        vals.append(float(y @ v / (np.linalg.norm(y) * np.linalg.norm(v))))
    y_last, _ = tr.at(times[-1])
    if np.linalg.norm(y_last) < R_escape:
        raise InsufficientHorizonError(
            f"|y| = {np.linalg.norm(y_last):.3g} < R_escape = {R_escape} at t = {times[-1]:.3g}")
    # the limit of the sequence; also its momentum for reference
    _, eta_last = tr.at(times[-1])
    return {
        "times": times,
        "values": vals,
        "limit": _aitken(vals),
        "eta_last": eta_last.tolist(),
        "p2_drift": tr.max_p2_drift(),
    }


def trajectory_csv(traj: Trajectory, g: Cometric, sigma_inf: float = 0.9) -> str:
    """Columns t, y_1..y_n, eta_1..eta_n, p2, beta, tau_incoming (blank off its domain)."""
    n = g.n
    c0 = c0_from_sigma_inf(sigma_inf)
    fh = io.StringIO()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t"] + [f"y_{i+1}" for i in range(n)] + [f"eta_{i+1}" for i in range(n)]
               + ["p2", "beta", "tau_incoming"])
    for t, y, eta, pv in zip(traj.t, traj.y, traj.eta, traj.p2):
        v = eta @ g.flat
        r, nv = np.linalg.norm(y), np.linalg.norm(v)
        if r > 0 and nv > 0:
            vh = v / nv
            b = float(np.clip(y @ vh / r, -1, 1))
            xpar = float(y @ vh)
            tau = c0 * float(np.linalg.norm(y - xpar * vh)) - xpar if b <= sigma_inf else None
            bs = repr(b)
            ts = "" if tau is None else repr(max(float(tau), 0.0))
        else:
            bs, ts = "", ""
        w.writerow([repr(float(t))] + [repr(float(a)) for a in y] + [repr(float(a)) for a in eta]
                   + [repr(float(pv)), bs, ts])
    return fh.getvalue()


def write_trajectory_csv(traj: Trajectory, g: Cometric, path, sigma_inf: float = 0.9) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trajectory_csv(traj, g, sigma_inf))