"""Asymptotically flat cometrics and the phase-space geometry built on them.

Everything here is vectorized over leading axes: positions and momenta are
arrays of shape ``(..., n)`` and scalar outputs have shape ``(...)``.

Conventions
-----------
* ``v(xi) = 2 g0 xi`` is the group velocity of the flat symbol
  ``p0(xi) = xi . g0 xi``; ``vhat`` is its Euclidean unit vector.
* ``beta(x, xi) = xhat . vhat(xi)``.
* ``x_par = x . vhat`` and ``x_perp = x - x_par vhat``.
* ``c0 = sigma_inf / sqrt(1 - sigma_inf**2)``; it is negative for the
  outgoing orientation where ``sigma_inf`` lies in ``(-1, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "ExcludedPointError",
    "DomainError",
    "SingularConfigurationError",
    "PhasePoint",
    "Perturbation",
    "NoPerturbation",
    "GaussianBump",
    "PowerDecay",
    "RingTrap",
    "Cometric",
    "japanese",
    "c0_from_sigma_inf",
    "group_velocity",
    "beta",
    "split_parallel_perp",
    "tau_incoming",
    "tau_outgoing",
    "grad_tau",
    "frame",
]

#: Gradients of tau are rejected when |x_perp| < PERP_TOL * |x| (n >= 2).
PERP_TOL = 1e-8
#: Round-off allowance when clamping beta and checking tau domains.
ROUND_TOL = 1e-12


class GeometryError(ValueError):
    """Base class for geometric precondition failures."""


class ExcludedPointError(GeometryError):
    """Raised at x = 0 or xi = 0 where directions are undefined."""


class DomainError(GeometryError):
    """Raised when tau is requested outside its cone of definition."""


class SingularConfigurationError(GeometryError):
    """Raised on the ray x_perp = 0 where tau is not differentiable."""


def japanese(x: np.ndarray) -> np.ndarray:
    """<x> = (1 + |x|^2)^(1/2) along the last axis."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + np.sum(x * x, axis=-1))


def c0_from_sigma_inf(sigma_inf: float) -> float:
    return sigma_inf / np.sqrt(1.0 - sigma_inf**2)


@dataclass(frozen=True)
class PhasePoint:
    """A point (x, xi) of R^{2n}."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        xi = np.array(self.xi, dtype=float).reshape(-1)
        if x.shape != xi.shape:
            raise ValueError(f"x and xi differ in dimension: {x.shape} vs {xi.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
            raise ValueError("phase point has non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    @property
    def n(self) -> int:
        return self.x.size

    def as_dict(self) -> dict:
        return {"x": self.x.tolist(), "xi": self.xi.tolist()}


# ---------------------------------------------------------------------------
# Perturbation families
#
# Each family returns the perturbation and its x-derivatives up to third
# order: ``terms(x) -> (f, d1, d2, d3)`` with the derivative axes appended
# last, e.g. for a matrix family ``d2[..., j, k, l, m] = d_l d_m f^{jk}``.


def _radial_derivs(x, center, mask, phi, order=3):
    """Derivatives of phi(rho), rho = |mask * (x - center)|^2, up to ``order`` <= 3.

    ``phi(rho)`` returns ``(phi, phi', phi'', phi''')``.
    """
    y = (x - center) * mask
    rho = np.sum(y * y, axis=-1)
    f0, f1, f2, f3 = phi(rho)
    n = x.shape[-1]
    eye = np.eye(n) * mask
    g1 = 2.0 * f1[..., None] * y
    if order < 2:
        return (f0, g1)[: order + 1]
    yy = y[..., :, None] * y[..., None, :]
    g2 = 4.0 * f2[..., None, None] * yy + 2.0 * f1[..., None, None] * eye
    if order < 3:
        return f0, g1, g2
    yyy = yy[..., :, :, None] * y[..., None, None, :]
    sym = (
        eye[:, :, None] * y[..., None, None, :]
        + eye[:, None, :] * y[..., None, :, None]
        + eye[None, :, :] * y[..., :, None, None]
    )
    g3 = 8.0 * f3[..., None, None, None] * yyy + 4.0 * f2[..., None, None, None] * sym
    return f0, g1, g2, g3


def _product_with_linear(x, terms, coeff):
    f0, f1, f2, f3 = tuple(terms) + (None,) * (4 - len(terms))
    c = np.asarray(coeff, dtype=float)
    ell = x @ c
    h0 = f0 * ell
    if f1 is None:
        return (h0,)
    h1 = f1 * ell[..., None] + f0[..., None] * c
    if f2 is None:
        return h0, h1
    h2 = f2 * ell[..., None, None] + f1[..., :, None] * c[None, :] + f1[..., None, :] * c[:, None]
    if f3 is None:
        return h0, h1, h2
    h3 = (
        f3 * ell[..., None, None, None]
        + f2[..., :, :, None] * c[None, None, :]
        + f2[..., :, None, :] * c[None, :, None]
        + f2[..., None, :, :] * c[:, None, None]
    )
    return h0, h1, h2, h3


def _product(a, b):
    """Leibniz rule for derivative tensors of two scalar fields (same order, at most 3)."""
    out = [a[0] * b[0]]
    if len(a) > 1:
        out.append(a[1] * b[0][..., None] + a[0][..., None] * b[1])
    if len(a) > 2:
        ab = a[1][..., :, None] * b[1][..., None, :]
        out.append(a[2] * b[0][..., None, None] + ab + np.swapaxes(ab, -1, -2) + a[0][..., None, None] * b[2])
    if len(a) > 3:
        t = a[2][..., :, :, None] * b[1][..., None, None, :]
        u = b[2][..., :, :, None] * a[1][..., None, None, :]
        sym = (t + np.moveaxis(t, -1, -2) + np.moveaxis(t, -1, -3)
               + u + np.moveaxis(u, -1, -2) + np.moveaxis(u, -1, -3))
        out.append(a[3] * b[0][..., None, None, None] + sym + a[0][..., None, None, None] * b[3])
    return tuple(out)


class Perturbation:
    """A closed-form perturbation family with analytic derivatives."""

    kind = "abstract"

    def terms(self, x: np.ndarray, shape: tuple, order: int = 3):
        raise NotImplementedError

    @property
    def decay_exponent(self) -> float | None:
        return None

    def describe(self) -> dict:
        return {"kind": self.kind}


class NoPerturbation(Perturbation):
    kind = "none"

    def terms(self, x, shape, order=3):
        lead = x.shape[:-1]
        n = x.shape[-1]
        return tuple(np.zeros(lead + shape + (n,) * k) for k in range(order + 1))


@dataclass(frozen=True)
class _ProfileFamily(Perturbation):
    amplitude: np.ndarray | float = 0.0

    def _profile(self, x, order):
        raise NotImplementedError

    def terms(self, x, shape, order=3):
        amp = np.broadcast_to(np.asarray(self.amplitude, dtype=float), shape)
        k = len(shape)
        a = amp.reshape((1,) * (x.ndim - 1) + shape)
        out = []
        for m, f in enumerate(self._profile(x, order)):
            lead = f.shape[: f.ndim - m]
            out.append(f.reshape(lead + (1,) * k + f.shape[f.ndim - m :]) * a.reshape(a.shape + (1,) * m))
        return tuple(out)

    def describe(self):
        d = {"kind": self.kind}
        for k, v in self.__dict__.items():
            d[k] = np.asarray(v).tolist() if isinstance(v, np.ndarray) else v
        return d


@dataclass(frozen=True)
class GaussianBump(_ProfileFamily):
    """amplitude * exp(-|x - center|^2 / (2 width^2))."""

    center: Sequence[float] | None = None
    width: float = 1.0
    kind = "gaussian_bump"

    def _profile(self, x, order):
        n = x.shape[-1]
        c = np.zeros(n) if self.center is None else np.asarray(self.center, dtype=float)
        s = 1.0 / (2.0 * self.width**2)

        def phi(rho):
            e = np.exp(-s * rho)
            return e, -s * e, s * s * e, -(s**3) * e

        return _radial_derivs(x, c, np.ones(n), phi, order)


@dataclass(frozen=True)
class PowerDecay(_ProfileFamily):
    """amplitude * (1 + |x|^2 / scale^2)^(-mu/2), a symbol of order -mu."""

    mu: float = 0.5
    scale: float = 1.0
    kind = "power_decay"

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"power_decay needs 0 < mu < 1, got {self.mu}")
        if self.scale <= 0:
            raise ValueError("power_decay scale must be positive")

    @property
    def decay_exponent(self):
        return self.mu

    def _profile(self, x, order):
        n = x.shape[-1]
        a = -self.mu / 2.0
        s2 = self.scale**2

        def phi(rho):
            w = 1.0 + rho / s2
            return (
                w**a,
                a * w ** (a - 1) / s2,
                a * (a - 1) * w ** (a - 2) / s2**2,
                a * (a - 1) * (a - 2) * w ** (a - 3) / s2**3,
            )

        return _radial_derivs(x, np.zeros(n), np.ones(n), phi, order)


@dataclass(frozen=True)
class RingTrap(Perturbation):
    """Twisted light cones in n = 3 with an exactly circular null orbit.

    With flat part ``diag(1, 1, -1)`` the perturbed cometric is

        p2 = |xi_1|^2 + |xi_2|^2 + 2 c(rho) e (x1 xi2 - x2 xi1) xi3 + (k(rho) e^2 - 1) xi3^2

    where ``rho = x1^2 + x2^2``, ``s = rho - radius^2``,
    ``k = exp(-s^2/width^2) (1 + well s^2)``, ``c = twist exp(-s^2/twist_width^2)``
    and ``e = exp(-x3^2/(2 height^2))`` makes everything decay along the axis.
    On the circle ``rho = radius^2, x3 = 0`` one has ``k = 1`` and ``dk = 0``,
    so ``xi = (0, 0, 1)`` is null and its bicharacteristic runs around the
    circle.  ``well > 1/width^2`` makes ``k`` a local minimum there, which
    keeps the orbit stable in the plane.  The defaults satisfy
    ``k - 1 < c^2 rho`` everywhere, so the cometric stays Lorentzian.
    A nondegenerate Lorentzian cometric on R^2 cannot have a closed null
    bicharacteristic, hence three dimensions.
    """

    radius: float = 1.0
    width: float = 0.8
    well: float | None = None
    twist: float = 0.6
    twist_width: float = 2.0
    height: float = 2.0
    kind = "ring_trap"

    def _well(self):
        return 1.5 / self.width**2 if self.well is None else self.well

    def _k(self):
        r2, w2, a = self.radius**2, self.width**2, self._well()

        def phi(rho):
            s = rho - r2
            e = np.exp(-s * s / w2)
            # e = exp(q), q = -s^2/w2; derivatives in s
            q1, q2 = -2 * s / w2, -2 / w2
            e1 = q1 * e
            e2 = (q2 + q1 * q1) * e
            e3 = (3 * q1 * q2 + q1**3) * e
            m0, m1, m2 = 1 + a * s * s, 2 * a * s, 2 * a
            return (
                e * m0,
                e1 * m0 + e * m1,
                e2 * m0 + 2 * e1 * m1 + e * m2,
                e3 * m0 + 3 * e2 * m1 + 3 * e1 * m2,
            )

        return phi

    def _c(self):
        r2, w2, c0 = self.radius**2, self.twist_width**2, self.twist

        def phi(rho):
            s = rho - r2
            e = c0 * np.exp(-s * s / w2)
            q1, q2 = -2 * s / w2, -2 / w2
            return e, q1 * e, (q2 + q1 * q1) * e, (3 * q1 * q2 + q1**3) * e

        return phi

    def terms(self, x, shape, order=3):
        if shape != (3, 3) or x.shape[-1] != 3:
            raise ValueError("ring_trap is a cometric family in dimension n = 3")
        mask = np.array([1.0, 1.0, 0.0])
        zero = np.zeros(3)
        axis = np.array([0.0, 0.0, 1.0])
        h2 = self.height**2

        def env(rho):
            e = np.exp(-rho / (2 * h2))
            return e, -e / (2 * h2), e / (4 * h2 * h2), -e / (8 * h2**3)

        e = _radial_derivs(x, zero, axis, env, order)
        e2 = _product(e, e)
        k = _product(_radial_derivs(x, zero, mask, self._k(), order), e2)
        c = _product(_radial_derivs(x, zero, mask, self._c(), order), e)
        g13 = _product_with_linear(x, c, [0.0, -1.0, 0.0])
        g23 = _product_with_linear(x, c, [1.0, 0.0, 0.0])
        lead = x.shape[:-1]
        out = []
        for m in range(order + 1):
            # component axes first while filling, then move behind the batch axes
            arr = np.zeros((3, 3) + lead + (3,) * m)
            arr[2, 2] = k[m]
            arr[0, 2] = arr[2, 0] = g13[m]
            arr[1, 2] = arr[2, 1] = g23[m]
            nb = len(lead)
            out.append(np.moveaxis(arr, (0, 1), (nb, nb + 1)))
        return tuple(out)

    def orbit_point(self, height: float = 0.0, energy: float = 1.0) -> PhasePoint:
        """Null initial data on the trapped circle."""
        return PhasePoint([self.radius, 0.0, height], [0.0, 0.0, energy])

    def describe(self):
        return {
            "kind": self.kind,
            "radius": self.radius,
            "width": self.width,
            "well": self._well(),
            "twist": self.twist,
            "twist_width": self.twist_width,
            "height": self.height,
        }


_NONE = NoPerturbation()


@dataclass(frozen=True)
class Cometric:
    """g^{jk}(x) = g0^{jk} + perturbation, with lower-order coefficients.

    ``first_order`` yields the vector ``u_j`` and ``zeroth_order`` the scalar
    ``u_0`` of the operator
    ``P = sum D_j g^{jk} D_k + 1/2 sum (D_j u_j + u_j D_j) + u_0``.
    """

    flat: np.ndarray
    perturbation: Perturbation = field(default=_NONE)
    first_order: Perturbation = field(default=_NONE)
    zeroth_order: Perturbation = field(default=_NONE)
    det_tol: float = 1e-8

    def __post_init__(self):
        g0 = np.array(self.flat, dtype=float)
        if g0.ndim != 2 or g0.shape[0] != g0.shape[1]:
            raise ValueError("flat part must be a square matrix")
        if not np.allclose(g0, g0.T, rtol=0, atol=1e-14):
            raise ValueError("flat part must be symmetric")
        if abs(np.linalg.det(g0)) < self.det_tol:
            raise ValueError("flat part is (numerically) degenerate")
        object.__setattr__(self, "flat", g0)
        if isinstance(self.perturbation, RingTrap) and g0.shape[0] != 3:
            raise ValueError("ring_trap requires n = 3")

    @classmethod
    def minkowski(cls, n: int = 2, **kw) -> "Cometric":
        """Flat diag(1, ..., 1, -1)."""
        d = np.ones(n)
        d[-1] = -1.0
        return cls(np.diag(d), **kw)

    @classmethod
    def euclidean(cls, n: int = 2, **kw) -> "Cometric":
        return cls(np.eye(n), **kw)

    @classmethod
    def ring_trap(cls, **kw) -> "Cometric":
        return cls(np.diag([1.0, 1.0, -1.0]), perturbation=RingTrap(**kw))

    @property
    def n(self) -> int:
        return self.flat.shape[0]

    @property
    def mu(self) -> float | None:
        exps = [
            p.decay_exponent
            for p in (self.perturbation, self.first_order, self.zeroth_order)
            if p.decay_exponent is not None
        ]
        return min(exps) if exps else None

    @property
    def is_flat(self) -> bool:
        return all(
            isinstance(p, NoPerturbation)
            for p in (self.perturbation, self.first_order, self.zeroth_order)
        )

    def _x(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"expected trailing dimension {self.n}, got {x.shape}")
        return x

    def metric_terms(self, x, order: int = 3):
        """(g, dg, d2g, d3g) with derivative axes last."""
        x = self._x(x)
        f = self.perturbation.terms(x, (self.n, self.n), order)
        g = f[0] + self.flat
        return (g,) + tuple(f[1:])

    def g(self, x):
        return self.metric_terms(x, 0)[0]

    def dg(self, x):
        return self.metric_terms(x, 1)[1]

    def first_order_terms(self, x):
        return self.first_order.terms(self._x(x), (self.n,))

    def zeroth_order_terms(self, x):
        return self.zeroth_order.terms(self._x(x), ())

    def check_nondegenerate(self, x) -> float:
        """Smallest |det g(x)| over the given points; raises if below det_tol."""
        d = np.abs(np.linalg.det(self.g(x)))
        m = float(np.min(d))
        if m < self.det_tol:
            raise GeometryError(f"cometric degenerate: min |det g| = {m:.3e}")
        return m

    def decay_constants(self, points, max_order: int = 2) -> dict:
        """Sampled C_alpha with |d^alpha (g - g0)| <= C_alpha <x>^(-mu - |alpha|).

        Returned per derivative order (the max over multi-indices of that
        order); only meaningful when the cometric declares a decay exponent.
        """
        mu = self.mu
        if mu is None:
            raise ValueError("no decay exponent declared by the perturbation families")
        x = self._x(points)
        jx = japanese(x)
        f = self.perturbation.terms(x, (self.n, self.n))
        u = self.first_order.terms(x, (self.n,))
        u0 = self.zeroth_order.terms(x, ())
        out = {}
        for order in range(max_order + 1):
            w = jx ** (mu + order)
            consts = []
            for arr, k in ((f[order], 2), (u[order], 1), (u0[order], 0)):
                flat = np.abs(arr).reshape(arr.shape[: x.ndim - 1] + (-1,))
                consts.append(float(np.max(flat.max(axis=-1) * w)) if flat.size else 0.0)
            out[order] = {"metric": consts[0], "first_order": consts[1], "zeroth_order": consts[2]}
        return out

    def describe(self) -> dict:
        return {
            "flat": self.flat.tolist(),
            "perturbation": self.perturbation.describe(),
            "first_order": self.first_order.describe(),
            "zeroth_order": self.zeroth_order.describe(),
        }


# ---------------------------------------------------------------------------
# Directional quantities


def _as_pair(x, xi, n):
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if x.shape[-1] != n or xi.shape[-1] != n:
        raise ValueError(f"trailing dimension must be {n}")
    return x, xi


def frame(x, xi, g0):
    """Unchecked directional frame used by the symbol evaluators.

    Returns a dict with ``u`` (vhat), ``nv`` (|g0 xi|), ``r`` (|x|),
    ``xpar``, ``xperp``, ``nperp`` (|x_perp|), ``uperp`` (x_perp/|x_perp|,
    zero where x_perp vanishes) and ``gperp`` (g0 x_perp / |g0 xi|, which
    is d(x_par)/d(xi)).
    """
    gx = xi @ g0
    nv = np.linalg.norm(gx, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = gx / nv[..., None]
    r = np.linalg.norm(x, axis=-1)
    xpar = np.sum(x * u, axis=-1)
    xperp = x - xpar[..., None] * u
    nperp = np.linalg.norm(xperp, axis=-1)
    tiny = nperp <= 1e-14 * np.maximum(r, 1e-300)
    safe = np.where(tiny, 1.0, nperp)
    uperp = np.where(tiny[..., None], 0.0, xperp / safe[..., None])
    nperp = np.where(tiny, 0.0, nperp)
    xperp = np.where(tiny[..., None], 0.0, xperp)
    with np.errstate(invalid="ignore", divide="ignore"):
        gperp = (xperp @ g0) / nv[..., None]
    return {"u": u, "nv": nv, "r": r, "xpar": xpar, "xperp": xperp, "nperp": nperp,
            "uperp": uperp, "gperp": gperp}


def group_velocity(xi, g: Cometric, tol: float = 1e-14):
    """v = 2 g0 xi and its unit vector.

    Raises:
        ExcludedPointError: if |g0 xi| is below ``tol`` anywhere.
    """
    xi = np.asarray(xi, dtype=float)
    v = 2.0 * (xi @ g.flat)
    nv = np.linalg.norm(v, axis=-1)
    if np.any(nv <= tol):
        raise ExcludedPointError("group velocity vanishes (xi = 0)")
    return v, v / nv[..., None]


def beta(x, xi, g: Cometric):
    """beta = xhat . vhat(xi), clamped to [-1, 1] against round-off only."""
    x, xi = _as_pair(x, xi, g.n)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ExcludedPointError("beta undefined at x = 0")
    _, vhat = group_velocity(xi, g)
    b = np.sum(x * vhat, axis=-1) / r
    over = np.abs(b) - 1.0
    if np.any(over > ROUND_TOL):
        raise GeometryError("beta left [-1, 1] by more than round-off")
    return np.clip(b, -1.0, 1.0)


def split_parallel_perp(x, xi, g: Cometric):
    """(x . vhat, x - (x . vhat) vhat)."""
    x, xi = _as_pair(x, xi, g.n)
    _, vhat = group_velocity(xi, g)
    par = np.sum(x * vhat, axis=-1)
    return par, x - par[..., None] * vhat


def _tau(x, xi, sigma_inf, g, orientation):
    b = beta(x, xi, g)
    c0 = c0_from_sigma_inf(sigma_inf)
    par, perp = split_parallel_perp(x, xi, g)
    nperp = np.linalg.norm(perp, axis=-1)
    if orientation == "incoming":
        if not 0.0 < sigma_inf < 1.0:
            raise ValueError("incoming tau needs sigma_inf in (0, 1)")
        if np.any(b > sigma_inf + ROUND_TOL):
            raise DomainError("incoming tau needs beta <= sigma_inf")
        t = c0 * nperp - par
    else:
        if not -1.0 < sigma_inf < 0.0:
            raise ValueError("outgoing tau needs sigma_inf in (-1, 0)")
        if np.any(b < sigma_inf - ROUND_TOL):
            raise DomainError("outgoing tau needs beta >= sigma_inf")
        t = par - c0 * nperp
    r = np.linalg.norm(x, axis=-1)
    if np.any(t < -1e-10 * r):
        raise GeometryError("tau negative beyond round-off")
    return np.maximum(t, 0.0)


def tau_incoming(x, xi, sigma_inf: float, g: Cometric):
    """Length of the forward ray x + t vhat inside {beta <= sigma_inf}.

    Equals ``|x| (c0 sqrt(1 - beta^2) - beta)``.
    """
    return _tau(x, xi, sigma_inf, g, "incoming")


def tau_outgoing(x, xi, sigma_inf: float, g: Cometric):
    """``|x| (beta - c0 sqrt(1 - beta^2))`` on ``{beta >= sigma_inf}``."""
    return _tau(x, xi, sigma_inf, g, "outgoing")


def grad_tau(x, xi, orientation: str, sigma_inf: float, g: Cometric):
    """Analytic (d_x tau, d_xi tau).

    Incoming: ``d_x tau = c0 x_perp/|x_perp| - vhat`` and
    ``d_xi tau = -(c0 x_par/|x_perp| + 1) g0 x_perp / |g0 xi|``.
    The outgoing expressions carry the opposite overall sign.

    Raises:
        SingularConfigurationError: when |x_perp| < 1e-8 |x| in n >= 2.
        DomainError: outside the open domain of tau.
    """
    if orientation not in ("incoming", "outgoing"):
        raise ValueError(f"unknown orientation {orientation!r}")
    x, xi = _as_pair(x, xi, g.n)
    b = beta(x, xi, g)
    if orientation == "incoming" and np.any(b >= sigma_inf):
        raise DomainError("gradient needs beta < sigma_inf strictly")
    if orientation == "outgoing" and np.any(b <= sigma_inf):
        raise DomainError("gradient needs beta > sigma_inf strictly")
    fr = frame(x, xi, g.flat)
    if g.n > 1 and np.any(fr["nperp"] < PERP_TOL * fr["r"]):
        raise SingularConfigurationError("tau is not differentiable where x_perp = 0")
    c0 = c0_from_sigma_inf(sigma_inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(fr["nperp"] > 0, fr["xpar"] / np.where(fr["nperp"] > 0, fr["nperp"], 1.0), 0.0)
    dx = c0 * fr["uperp"] - fr["u"]
    dxi = -(c0 * ratio + 1.0)[..., None] * fr["gperp"]
    if orientation == "outgoing":
        dx, dxi = -dx, -dxi
    return dx, dxi
