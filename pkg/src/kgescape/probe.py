"""The full operator P on a periodic grid (h = 1) and functional-analytic probes.

The discretization is a finite Hermitian matrix, so it is trivially
self-adjoint; the probes check that the assembly keeps that structure and
measure the cutoff-commutator decay used to pass from Schwartz functions to
weighted L^2.  They say nothing about the continuum operator at infinity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cutoffs
from .geometry import Cometric
from .quantize import GridSpec, fit_order

__all__ = [
    "NonHermitianError",
    "DiscreteOperator",
    "derivative_matrices",
    "assemble_P",
    "skew_injected",
    "quadratic_form_reality",
    "cutoff_matrix",
    "cutoff_commutator_decay",
    "tail_state",
    "resolvent_kernel_probe",
]

HERMITIAN_TOL = 1e-10


class NonHermitianError(ValueError):
    pass


@dataclass
class DiscreteOperator:
    matrix: np.ndarray
    grid: GridSpec
    provenance: dict

    def hermiticity_error(self) -> float:
        M = self.matrix
        return float(np.max(np.abs(M - M.conj().T)) / max(1.0, np.max(np.abs(M))))

    @property
    def is_hermitian(self) -> bool:
        return self.hermiticity_error() <= HERMITIAN_TOL


def derivative_matrices(grid: GridSpec) -> list:
    """Spectral D_j = -i d/dx_j; real Fourier symbols, so each is Hermitian."""
    N, n = grid.N, grid.n
    k = 2.0 * np.pi * np.fft.fftfreq(N, d=grid.dx)
    F = np.fft.fft(np.eye(N), axis=0) / np.sqrt(N)
    D1 = F.conj().T @ np.diag(k) @ F
    D1 = 0.5 * (D1 + D1.conj().T)
    if n == 1:
        return [D1]
    I = np.eye(N)
    return [np.kron(D1, I), np.kron(I, D1)]


def assemble_P(g: Cometric, grid: GridSpec, coefficient_hook=None, split_sign: float = 1.0,
               check: bool = True) -> DiscreteOperator:
    """sum D_j g^{jk} D_k + 1/2 sum (D_j u_j + u_j D_j) + u_0 at h = 1.

    Coefficients are diagonal multiplication matrices at the grid points.

    Args:
        coefficient_hook: optional ``hook(G, u, u0) -> (G, u, u0)`` applied to
            the sampled coefficient arrays (a test hook, e.g. to inject
            complex values).
        split_sign: ``-1`` turns the symmetric first-order split into
            ``D u - u D`` (a deliberate break).
        check: reject non-Hermitian results.

    Raises:
        NonHermitianError: if ``check`` and the result is not Hermitian.
    """
    if g.n != grid.n:
        raise ValueError("metric and grid dimensions differ")
    pts = grid.points()
    G = g.g(pts)
    u = g.first_order_terms(pts)[0]
    u0 = g.zeroth_order_terms(pts)[0]
    if coefficient_hook is not None:
        G, u, u0 = coefficient_hook(G, u, u0)
    D = derivative_matrices(grid)
    n = grid.n
    M = np.diag(np.asarray(u0, dtype=complex))
    for j in range(n):
        for k in range(n):
            M = M + D[j] @ (G[:, j, k][:, None] * D[k])
        Uj = np.asarray(u[:, j])
        M = M + 0.5 * (D[j] * Uj[None, :] + split_sign * Uj[:, None] * D[j])
    op = DiscreteOperator(M, grid, {"metric": g.describe(), "h": 1.0, "split_sign": split_sign,
                                    "hooked": coefficient_hook is not None})
    if check and not op.is_hermitian:
        raise NonHermitianError(f"assembled P is not Hermitian (error {op.hermiticity_error():.3e})")
    return op


def skew_injected(Pd: DiscreteOperator, eps: float, seed: int = 0, positive: bool = False) -> DiscreteOperator:
    """P + i eps S with S real symmetric (identity if ``positive``): a negative control."""
    size = Pd.matrix.shape[0]
    if positive:
        S = np.eye(size)
    else:
        A = np.random.default_rng(seed).normal(size=(size, size))
        S = 0.5 * (A + A.T)
    prov = dict(Pd.provenance, skew=eps)
    return DiscreteOperator(Pd.matrix + 1j * eps * S, Pd.grid, prov)


def quadratic_form_reality(Pd: DiscreteOperator, states, tol: float = 1e-10) -> dict:
    """|Im <phi, P phi>| <= tol |phi| |P phi| for every trial state."""
    rows = []
    ok = True
    for phi in states:
        phi = np.asarray(phi, dtype=complex)
        Pp = Pd.matrix @ phi
        q = np.vdot(phi, Pp)
        bound = tol * np.linalg.norm(phi) * np.linalg.norm(Pp)
        good = abs(q.imag) <= bound
        ok = ok and good
        rows.append({"imag": float(q.imag), "bound": float(bound), "pass": bool(good)})
    worst = max((abs(r["imag"]) / max(r["bound"], 1e-300) for r in rows), default=0.0)
    return {"quantity": "quadratic_form_reality", "states": len(rows), "worst_ratio": float(worst),
            "pass": bool(ok), "rows": rows}


def cutoff_matrix(grid: GridSpec, R: float | None) -> np.ndarray:
    """Diagonal X_R = chi2(|x| / R); ``R = None`` gives the identity."""
    if R is None:
        return np.eye(grid.size)
    r = np.linalg.norm(grid.points(), axis=-1)
    if 2.0 * R > grid.L * (1.0 - grid.margin):
        raise ValueError(f"X_R with R = {R} does not fit the box (needs 2R <= {grid.L * (1 - grid.margin):.3g})")
    return np.diag(cutoffs.chi2(r / R))


def tail_state(grid: GridSpec, power: float, xi0=None) -> np.ndarray:
    """<x>^-power exp(i x . xi0), unit grid norm."""
    pts = grid.points()
    xi0 = np.zeros(grid.n) if xi0 is None else np.asarray(xi0, dtype=float)
    phi = (1.0 + np.sum(pts * pts, axis=-1)) ** (-0.5 * power) * np.exp(1j * pts @ xi0)
    return phi / grid.norm(phi)


def cutoff_commutator_decay(Pd: DiscreteOperator, R_list, phi, slack: float = 0.15,
                            floor: float = 1e-13) -> dict:
    """|[P, X_R] phi| over R with a fitted power of R.

    Passes iff the fitted exponent is at most ``-1 + slack`` (or every value
    sits below ``floor``, i.e. faster than any power on this range).
    """
    phi = np.asarray(phi, dtype=complex)
    vals = []
    for R in R_list:
        X = cutoff_matrix(Pd.grid, R)
        C = Pd.matrix @ (X @ phi) - X @ (Pd.matrix @ phi)
        vals.append(Pd.grid.norm(C))
    fit = fit_order(R_list, vals, floor)
    exponent = fit["order"]
    ok = fit["all_below_floor"] or (np.isfinite(exponent) and exponent <= -1.0 + slack)
    return {"quantity": "cutoff_commutator_decay", "R": [float(r) for r in R_list],
            "norms": [float(v) for v in vals], "exponent": float(exponent), "fit": fit, "pass": bool(ok)}


def resolvent_kernel_probe(Pd: DiscreteOperator, z: complex, tol: float = 1e-8) -> dict:
    """sigma_min(P - z) against |Im z| (exact for Hermitian P)."""
    z = complex(z)
    if z.imag == 0:
        raise ValueError("z must have nonzero imaginary part")
    M = Pd.matrix - z * np.eye(Pd.matrix.shape[0])
    smin = float(np.linalg.svd(M, compute_uv=False)[-1])
    margin = smin - abs(z.imag)
    return {
        "quantity": "resolvent_kernel_probe",
        "z": [z.real, z.imag],
        "sigma_min": smin,
        "margin": float(margin),
        "hermitian": Pd.is_hermitian,
        "pass": bool(margin >= -tol),
        "note": "finite Hermitian matrices are self-adjoint; this anchors the discretization only",
    }
