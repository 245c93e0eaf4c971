"""Semiclassical Weyl quantization on a periodic grid.

Positions are ``x_j = -L + j dx`` with ``dx = 2L/N`` per axis and the dual
momenta are ``xi_m = 2 pi h m / (N dx)`` for ``m`` in FFT order, so the
largest representable momentum is ``pi h / dx``.

Two discretizations of the Weyl integral are available.  The default
samples the symbol at grid positions and at midpoint momenta
``xi_q + wrap(p - q) dxi / 2`` taken on the momentum torus; in the
Fourier basis

    Ahat[p, q] = N^-n sum_j exp(-2 pi i (p - q).j / N) a(x_j, xi_q + wrap(p - q) dxi / 2)

and ``A = U^H Ahat U`` with the unitary DFT ``U``.  Multiplication symbols
give diagonal matrices and Fourier multipliers give DFT-diagonal ones, both
exactly.  The alternative ``"position"`` scheme uses midpoints in x,

    A[k + d, k] = N^-n sum_m exp(2 pi i d.m / N) a(x_k + d dx / 2, xi_m),

with the ambiguous Nyquist offset averaged over both midpoints.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

from .symbols import ScalarSymbol, poisson_bracket

__all__ = [
    "GridError",
    "GridSpec",
    "QuantizedOperator",
    "weyl_quantize",
    "weight_matrix",
    "coherent_state",
    "expectation",
    "calculus_checks",
    "garding_check",
    "fit_order",
    "dump_matrix",
    "load_matrix",
]

MAGIC = b"WEYLMAT1"


class GridError(ValueError):
    """A symbol does not fit the grid's position or momentum window."""


@dataclass(frozen=True)
class GridSpec:
    n: int
    L: float
    N: int
    h: float
    margin: float = 0.1
    nyquist_factor: float = 2.0

    def __post_init__(self):
        if self.n not in (1, 2):
            raise GridError("grids are one- or two-dimensional")
        if self.N < 4 or self.N & (self.N - 1):
            raise GridError(f"N must be a power of two, got {self.N}")
        if self.L <= 0 or self.h <= 0:
            raise GridError("L and h must be positive")
        if not 0 <= self.margin < 1:
            raise GridError("margin must lie in [0, 1)")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def nyquist(self) -> float:
        """Largest grid momentum magnitude, pi h / dx."""
        return np.pi * self.h / self.dx

    @property
    def size(self) -> int:
        return self.N**self.n

    def axis(self):
        return -self.L + self.dx * np.arange(self.N)

    def half_axis(self):
        return -self.L + 0.5 * self.dx * np.arange(2 * self.N)

    def momenta_axis(self):
        return 2.0 * np.pi * self.h * np.fft.fftfreq(self.N, d=self.dx)

    def points(self):
        """Grid positions as an (N^n, n) array in row-major order."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.n), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def inner(self, u, v):
        return self.dx**self.n * np.vdot(u, v)

    def norm(self, u):
        return float(np.sqrt(np.real(self.inner(u, u))))

    def with_h(self, h) -> "GridSpec":
        return GridSpec(self.n, self.L, self.N, h, self.margin, self.nyquist_factor)

    def check_symbol(self, a: ScalarSymbol):
        """Raise GridError unless a's support fits with the configured margins."""
        if a.x_radius is None:
            raise GridError(f"symbol {a.name} has unbounded x-support")
        if a.x_radius > self.L * (1.0 - self.margin):
            raise GridError(
                f"symbol {a.name}: x-support radius {a.x_radius:.4g} exceeds "
                f"{self.L * (1 - self.margin):.4g}")
        if a.xi_radius is None:
            raise GridError(f"symbol {a.name} has unbounded momentum support")
        if self.nyquist < self.nyquist_factor * a.xi_radius:
            raise GridError(
                f"symbol {a.name}: Nyquist momentum {self.nyquist:.4g} below "
                f"{self.nyquist_factor} x support radius {a.xi_radius:.4g}")

    def as_dict(self):
        return {"n": self.n, "L": self.L, "N": self.N, "h": self.h, "margin": self.margin,
                "nyquist_factor": self.nyquist_factor}


@dataclass
class QuantizedOperator:
    matrix: np.ndarray
    grid: GridSpec
    tag: str = ""
    hermitian: bool = field(default=False)

    def __matmul__(self, other):
        if isinstance(other, QuantizedOperator):
            return QuantizedOperator(self.matrix @ other.matrix, self.grid, f"{self.tag}@{other.tag}")
        return self.matrix @ other

    @property
    def H(self):
        return QuantizedOperator(self.matrix.conj().T, self.grid, f"{self.tag}^*")

    def hermiticity_error(self) -> float:
        A = self.matrix
        return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


def _wrap_offsets(N):
    d = np.arange(N)
    return np.where(d >= N // 2, d - N, d)


def _kernel_1axis(N):
    """Half-grid midpoint indices s[j, k] and offsets d[j, k] (mod N)."""
    j = np.arange(N)[:, None]
    k = np.arange(N)[None, :]
    d = (j - k) % N
    dw = np.where(d >= N // 2, d - N, d)
    s = (2 * k + dw) % (2 * N)
    return s, d


def weyl_quantize(a: ScalarSymbol, grid: GridSpec, strict: bool = True,
                  scheme: str = "momentum", chunk: int = 1 << 20) -> QuantizedOperator:
    """Matrix of Op_h(a) on the grid.

    Args:
        a: the symbol.
        grid: the grid.
        strict: enforce the support margins (the wave symbol and other
            unbounded symbols are quantized with ``strict=False``).
        scheme: ``"momentum"`` (default) samples positions on the grid and
            momenta at the midpoints ``(xi_p + xi_q)/2``; ``"position"`` is
            the midpoint rule in x described in the module docstring.  Both
            discretize the same Weyl integral; the position form
            interpolates the symbol to half-integer momenta with slowly
            decaying tails, which pollutes commutators with ``Op_h(xi^2)``.
        chunk: evaluation batch size in phase-space points.
    """
    if strict:
        grid.check_symbol(a)
    if scheme == "momentum":
        return _quantize_momentum_midpoint(a, grid, chunk)
    if scheme != "position":
        raise ValueError(f"unknown scheme {scheme!r}")
    n, N = grid.n, grid.N
    xh = grid.half_axis()
    xim = grid.momenta_axis()
    if n == 1:
        X = np.repeat(xh, N)[:, None]
        XI = np.tile(xim, 2 * N)[:, None]
        vals = _eval_chunked(a, X, XI, chunk).reshape(2 * N, N)
        F = np.fft.ifft(vals, axis=1)
        s, d = _kernel_1axis(N)
        A = F[s, d]
        nyq = d == N // 2
        A = np.where(nyq, 0.5 * (F[s, d] + F[(s + N) % (2 * N), d]), A)
    else:
        g1, g2 = np.meshgrid(xh, xh, indexing="ij")
        m1, m2 = np.meshgrid(xim, xim, indexing="ij")
        pos = np.stack([g1.reshape(-1), g2.reshape(-1)], axis=-1)
        mom = np.stack([m1.reshape(-1), m2.reshape(-1)], axis=-1)
        X = np.repeat(pos, N * N, axis=0)
        XI = np.tile(mom, (4 * N * N, 1))
        vals = _eval_chunked(a, X, XI, chunk).reshape(2 * N, 2 * N, N, N)
        F = np.fft.ifft2(vals, axes=(2, 3))
        s, d = _kernel_1axis(N)
        nyq = d == N // 2
        # average over both midpoints on every Nyquist axis
        A = 0.0
        for sh1, sh2 in itertools.product((0, N), (0, N)):
            w1 = np.where(nyq, 0.5, 1.0 if sh1 == 0 else 0.0)
            w2 = np.where(nyq, 0.5, 1.0 if sh2 == 0 else 0.0)
            S1 = (s + sh1) % (2 * N)
            S2 = (s + sh2) % (2 * N)
            term = F[S1[:, None, :, None], S2[None, :, None, :], d[:, None, :, None], d[None, :, None, :]]
            A = A + w1[:, None, :, None] * w2[None, :, None, :] * term
        A = A.reshape(N * N, N * N)
    op = QuantizedOperator(np.ascontiguousarray(A), grid, a.name)
    if a.real:
        op.hermitian = True
    return op


def _midpoint_tables(N):
    """Half-lattice midpoint indices for every (p, q) on the momentum torus.

    The midpoint is ``xi_q + wrap(p - q)/2`` folded into [-N, N) half steps,
    so two extreme modes of opposite sign are never paired through a
    spurious midpoint near zero.  At the Nyquist offset both foldings are
    returned (they are averaged to keep the matrix Hermitian).
    """
    pw = _wrap_offsets(N)
    p = np.arange(N)
    d = (p[:, None] - p[None, :]) % N
    dw = np.where(d >= N // 2, d - N, d)
    r = 2 * pw[None, :] + dw
    r1 = (r + N) % (2 * N)
    r2 = (r1 + N) % (2 * N)
    return d, r1, r2, d == N // 2


def _quantize_momentum_midpoint(a, grid, chunk):
    # A = U^H Ahat U with Ahat[p, q] = DFT_x[a(., xi_q + wrap(p - q) dxi / 2)](p - q)
    n, N = grid.n, grid.N
    x = grid.axis()
    dxi = 2.0 * np.pi * grid.h / (N * grid.dx)
    rvals = np.arange(-N, N)
    ximid = 0.5 * dxi * rvals
    R = len(rvals)
    didx, r1, r2, nyq = _midpoint_tables(N)
    w1 = np.where(nyq, 0.5, 1.0)
    w2 = np.where(nyq, 0.5, 0.0)
    if n == 1:
        X = np.repeat(x, R)[:, None]
        XI = np.tile(ximid, N)[:, None]
        vals = _eval_chunked(a, X, XI, chunk).reshape(N, R)
        G = np.fft.fft(vals, axis=0) / N
        Ahat = w1 * G[didx, r1] + w2 * G[didx, r2]
        U = np.fft.fft(np.eye(N), axis=0) / np.sqrt(N)
        A = U.conj().T @ Ahat @ U
    else:
        g1, g2 = np.meshgrid(x, x, indexing="ij")
        pos = np.stack([g1.reshape(-1), g2.reshape(-1)], axis=-1)
        k1, k2 = np.meshgrid(ximid, ximid, indexing="ij")
        mom = np.stack([k1.reshape(-1), k2.reshape(-1)], axis=-1)
        X = np.repeat(pos, R * R, axis=0)
        XI = np.tile(mom, (N * N, 1))
        vals = _eval_chunked(a, X, XI, chunk).reshape(N, N, R, R)
        G = np.fft.fft2(vals, axes=(0, 1)) / (N * N)
        D1, D2 = didx[:, None, :, None], didx[None, :, None, :]
        Ahat = 0.0
        for ra, wa in ((r1, w1), (r2, w2)):
            for rb, wb in ((r1, w1), (r2, w2)):
                Ahat = Ahat + (wa[:, None, :, None] * wb[None, :, None, :]
                               * G[D1, D2, ra[:, None, :, None], rb[None, :, None, :]])
        Ahat = Ahat.reshape(N * N, N * N)
        U1 = np.fft.fft(np.eye(N), axis=0) / np.sqrt(N)
        U = np.kron(U1, U1)
        A = U.conj().T @ Ahat @ U
    op = QuantizedOperator(np.ascontiguousarray(A), grid, a.name)
    op.hermitian = bool(a.real)
    return op


def _eval_chunked(a, X, XI, chunk):
    out = np.empty(X.shape[0], dtype=complex if not a.real else float)
    for i in range(0, X.shape[0], chunk):
        out[i : i + chunk] = a(X[i : i + chunk], XI[i : i + chunk])
    return out


def weight_matrix(grid: GridSpec, power: float = -1.0) -> np.ndarray:
    """Diagonal <x>^power on the grid (an exact multiplication operator)."""
    pts = grid.points()
    return np.diag((1.0 + np.sum(pts * pts, axis=-1)) ** (0.5 * power))


def coherent_state(x0, xi0, grid: GridSpec, check: bool = True) -> np.ndarray:
    """Gaussian packet exp(-|x - x0|^2 / 2h) exp(i x.xi0 / h), unit grid norm."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xi0 = np.asarray(xi0, dtype=float).reshape(-1)
    if x0.size != grid.n or xi0.size != grid.n:
        raise GridError("coherent state center has the wrong dimension")
    if check and np.max(np.abs(x0)) > grid.L * (1.0 - grid.margin):
        raise GridError(f"coherent state center {x0} outside the box margin")
    pts = grid.points()
    psi = np.exp(-np.sum((pts - x0) ** 2, axis=-1) / (2 * grid.h) + 1j * (pts @ xi0) / grid.h)
    return psi / grid.norm(psi)


def expectation(A, psi, grid: GridSpec) -> complex:
    M = A.matrix if isinstance(A, QuantizedOperator) else A
    return complex(grid.inner(psi, M @ psi))


def fit_order(hs, values, floor: float = 0.0) -> dict:
    """Least-squares slope of log(value) against log(h).

    Values at or below ``floor`` are treated as exact zeros; if all are, the
    fitted order is reported as infinite.
    """
    hs = np.asarray(hs, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    keep = v > floor
    if not np.any(keep):
        return {"order": float("inf"), "constant": 0.0, "all_below_floor": True, "residual": 0.0}
    if np.sum(keep) < 2:
        return {"order": float("nan"), "constant": float("nan"), "all_below_floor": False,
                "residual": float("nan")}
    lh, lv = np.log(hs[keep]), np.log(v[keep])
    A = np.stack([lh, np.ones_like(lh)], axis=-1)
    coef, *_ = np.linalg.lstsq(A, lv, rcond=None)
    res = float(np.max(np.abs(A @ coef - lv)))
    return {"order": float(coef[0]), "constant": float(np.exp(coef[1])), "all_below_floor": False,
            "residual": res}


def _opnorm(M):
    return float(np.linalg.norm(M, 2))


def calculus_checks(a: ScalarSymbol, b: ScalarSymbol, grids, strict: bool = True) -> dict:
    """Commutator-versus-bracket and composition residuals over an h ladder.

    Reports ``||(i/h)[A, B] - Op_h({a, b})||`` and ``||AB - Op_h(ab)||`` in
    operator norm at each grid and their fitted h-orders.
    """
    from .symbols import bracket_values

    rows = []
    for grid in grids:
        A = weyl_quantize(a, grid, strict).matrix
        B = weyl_quantize(b, grid, strict).matrix
        br = bracket_values(a, b)
        C = weyl_quantize(br, grid, strict).matrix
        comm = 1j / grid.h * (A @ B - B @ A)
        prod = weyl_quantize(a * b, grid, strict).matrix
        rows.append({
            "h": grid.h,
            "commutator_residual": _opnorm(comm - C),
            "composition_residual": _opnorm(A @ B - prod),
            "commutator_norm": _opnorm(comm),
        })
    hs = [r["h"] for r in rows]
    scale = max(1.0, max(r["commutator_norm"] for r in rows))
    floor = 1e-11 * scale
    return {
        "symbols": [a.name, b.name],
        "rows": rows,
        "commutator_fit": fit_order(hs, [r["commutator_residual"] for r in rows], floor),
        "composition_fit": fit_order(hs, [r["composition_residual"] for r in rows], floor),
    }


def garding_check(a: ScalarSymbol, grids, sample_points: int = 20000, seed: int = 0,
                  strict: bool = True, growth_tol: float = 0.1) -> dict:
    """Smallest eigenvalue of Op_h(a) for a nonnegative symbol across h.

    The symbol is first sampled on random phase-space points inside its
    support window; a negative sample rejects the input.  ``C_h`` is
    ``max(0, -lambda_min) / h``; the bound is called stable when no finer
    rung needs more than ``(1 + growth_tol)`` times the coarsest ``C_h``.
    """
    rng = np.random.default_rng(seed)
    g0 = grids[0]
    xr = a.x_radius if a.x_radius is not None else g0.L
    kr = a.xi_radius if a.xi_radius is not None else g0.nyquist
    x = rng.uniform(-xr, xr, size=(sample_points, g0.n))
    xi = rng.uniform(-kr, kr, size=(sample_points, g0.n))
    smin = float(np.min(np.real(a(x, xi))))
    if smin < -1e-14:
        raise ValueError(f"symbol {a.name} takes negative value {smin:.3e}")
    rows = []
    for grid in grids:
        A = weyl_quantize(a, grid, strict).matrix
        A = 0.5 * (A + A.conj().T)
        lam = float(np.linalg.eigvalsh(A)[0])
        rows.append({"h": grid.h, "lambda_min": lam, "C": max(0.0, -lam) / grid.h})
    Cs = [r["C"] for r in rows]
    return {
        "symbol": a.name,
        "rows": rows,
        "C": max(Cs),
        "C_spread": (max(Cs) - min(Cs)) / max(max(Cs), 1e-300) if max(Cs) > 0 else 0.0,
        "stable": bool(max(Cs) <= (1.0 + growth_tol) * Cs[0] + 1e-12),
    }


def dump_matrix(op: QuantizedOperator, path) -> None:
    """Binary dump: 32-byte header then row-major little-endian complex128."""
    g = op.grid
    header = MAGIC + struct.pack("<iidd", g.n, g.N, g.L, g.h)
    assert len(header) == 32
    data = np.ascontiguousarray(op.matrix, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))


def load_matrix(path) -> QuantizedOperator:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise ValueError("not a WEYLMAT1 file")
    n, N, L, h = struct.unpack("<iidd", raw[8:32])
    size = N**n
    M = np.frombuffer(raw[32:], dtype="<c16").reshape(size, size).copy()
    return QuantizedOperator(M, GridSpec(n, L, N, h), "loaded")
