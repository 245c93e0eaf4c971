"""Phase-space symbols: the wave symbol, escape localizers and observables.

A :class:`ScalarSymbol` wraps an evaluator ``fn(x, xi, grad)`` that returns
either the value or ``(value, d_x, d_xi)``.  All gradients are analytic;
finite differences appear only in :func:`seminorm_estimate` (for second
derivatives) and in the tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import cutoffs
from .geometry import Cometric, c0_from_sigma_inf, frame, japanese

__all__ = [
    "ScalarSymbol",
    "CutoffParams",
    "Ladder",
    "ParameterError",
    "principal_symbol",
    "subprincipal_symbol",
    "zeta_incoming",
    "zeta_outgoing",
    "zeta_parts",
    "observable",
    "observable_zero_variant",
    "poisson_bracket",
    "bracket_values",
    "truncate_x",
    "box_remainder",
    "outgoing_remainder",
    "seminorm_estimate",
    "gaussian_symbol",
]


class ParameterError(ValueError):
    pass


def _max_radius(a, b):
    if a is None or b is None:
        return None
    return max(a, b)


def _min_radius(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class ScalarSymbol:
    """Real (or complex) phase-space function with an analytic gradient.

    Args:
        fn: ``fn(x, xi, grad)``; arrays of shape ``(..., n)``.
        name: label carried into reports.
        x_radius: the symbol vanishes for |x| > x_radius (None: unbounded).
        xi_radius: likewise in momentum.
        order: class tag (k, l) for S^{k,l}.
        has_grad: False for value-only symbols (e.g. brackets used as
            remainders); asking for a gradient then raises.
        support: optional predicate ``support(x, xi) -> bool array``
            outside which the value is exactly zero.
    """

    def __init__(self, fn, name="a", x_radius=None, xi_radius=None, order=(0.0, 0.0),
                 has_grad=True, support=None, real=True):
        self._fn = fn
        self.name = name
        self.x_radius = x_radius
        self.xi_radius = xi_radius
        self.order = tuple(order)
        self.has_grad = has_grad
        self.support = support
        self.real = real

    def __repr__(self):
        return f"ScalarSymbol({self.name!r}, order={self.order})"

    def __call__(self, x, xi):
        return self._fn(np.asarray(x, dtype=float), np.asarray(xi, dtype=float), False)

    def value_and_grad(self, x, xi):
        if not self.has_grad:
            raise NotImplementedError(f"symbol {self.name} has no gradient evaluator")
        return self._fn(np.asarray(x, dtype=float), np.asarray(xi, dtype=float), True)

    def gradient(self, x, xi):
        _, dx, dxi = self.value_and_grad(x, xi)
        return dx, dxi

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, ScalarSymbol):
            other = ScalarSymbol.constant(other)
        f, g = self._fn, other._fn

        def fn(x, xi, grad):
            if not grad:
                return f(x, xi, False) + g(x, xi, False)
            a, ax, axi = f(x, xi, True)
            b, bx, bxi = g(x, xi, True)
            return a + b, ax + bx, axi + bxi

        return ScalarSymbol(fn, f"({self.name}+{other.name})",
                            _max_radius(self.x_radius, other.x_radius),
                            _max_radius(self.xi_radius, other.xi_radius),
                            tuple(max(p, q) for p, q in zip(self.order, other.order)),
                            self.has_grad and other.has_grad, real=self.real and other.real)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, ScalarSymbol) else -other)

    def __mul__(self, other):
        if not isinstance(other, ScalarSymbol):
            c = other
            f = self._fn

            def fn(x, xi, grad):
                if not grad:
                    return c * f(x, xi, False)
                a, ax, axi = f(x, xi, True)
                return c * a, c * ax, c * axi

            return ScalarSymbol(fn, f"{c}*{self.name}", self.x_radius, self.xi_radius,
                                self.order, self.has_grad, self.support,
                                self.real and np.isrealobj(c))
        f, g = self._fn, other._fn

        def fn(x, xi, grad):
            if not grad:
                return f(x, xi, False) * g(x, xi, False)
            a, ax, axi = f(x, xi, True)
            b, bx, bxi = g(x, xi, True)
            return a * b, ax * b[..., None] + a[..., None] * bx, axi * b[..., None] + a[..., None] * bxi

        return ScalarSymbol(fn, f"({self.name}*{other.name})",
                            _min_radius(self.x_radius, other.x_radius),
                            _min_radius(self.xi_radius, other.xi_radius),
                            tuple(p + q for p, q in zip(self.order, other.order)),
                            self.has_grad and other.has_grad, real=self.real and other.real)

    __rmul__ = __mul__

    def square(self):
        return self * self

    # simple constructors -------------------------------------------------
    @staticmethod
    def constant(c: float) -> "ScalarSymbol":
        def fn(x, xi, grad):
            v = np.full(x.shape[:-1], float(c))
            if not grad:
                return v
            return v, np.zeros_like(x), np.zeros_like(xi)

        return ScalarSymbol(fn, f"{c}", None, None, (0.0, 0.0), real=True)

    @staticmethod
    def from_parts(value: Callable, grad_x: Callable | None = None,
                   grad_xi: Callable | None = None, **kw) -> "ScalarSymbol":
        """Build a symbol from separate callables ``f(x, xi)``."""

        def fn(x, xi, grad):
            v = value(x, xi)
            if not grad:
                return v
            dx = np.zeros_like(x) if grad_x is None else grad_x(x, xi)
            dxi = np.zeros_like(xi) if grad_xi is None else grad_xi(x, xi)
            return v, dx, dxi

        return ScalarSymbol(fn, **kw)


def gaussian_symbol(x0, xi0, width_x: float = 1.0, width_xi: float = 1.0, amplitude: float = 1.0,
                    name: str = "gauss") -> ScalarSymbol:
    """amplitude * exp(-|x - x0|^2 / 2wx^2 - |xi - xi0|^2 / 2wxi^2), a Schwartz test symbol."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    xi0 = np.atleast_1d(np.asarray(xi0, dtype=float))

    def fn(x, xi, grad):
        dx = (x - x0) / width_x**2
        dk = (xi - xi0) / width_xi**2
        v = amplitude * np.exp(-0.5 * np.sum((x - x0) * dx, axis=-1) - 0.5 * np.sum((xi - xi0) * dk, axis=-1))
        if not grad:
            return v
        return v, -v[..., None] * dx, -v[..., None] * dk

    return ScalarSymbol(fn, name, None, None, (-np.inf, -np.inf))


# ---------------------------------------------------------------------------
# Wave symbols


def principal_symbol(g: Cometric) -> ScalarSymbol:
    """p2(x, xi) = sum g^{jk}(x) xi_j xi_k."""

    def fn(x, xi, grad):
        if not grad:
            G = g.g(x)
            return np.einsum("...j,...jk,...k->...", xi, G, xi)
        G, dG = g.metric_terms(x, 1)
        v = np.einsum("...j,...jk,...k->...", xi, G, xi)
        dx = np.einsum("...j,...jkl,...k->...l", xi, dG, xi)
        dxi = 2.0 * np.einsum("...jk,...k->...j", G, xi)
        return v, dx, dxi

    return ScalarSymbol(fn, "p2", None, None, (2.0, 0.0))


def subprincipal_symbol(g: Cometric, h: float) -> ScalarSymbol:
    """q = u . xi / h + u0 + (1/4) sum_jk d_j d_k g^{jk}, a member of h^-1 S^{1,-mu}."""
    if h <= 0:
        raise ValueError("h must be positive")
    mu = g.mu if g.mu is not None else 0.0

    def fn(x, xi, grad):
        _, dG, d2G, d3G = g.metric_terms(x, 3)
        u = g.first_order_terms(x)
        u0 = g.zeroth_order_terms(x)
        val = np.einsum("...j,...j->...", u[0], xi) / h + u0[0] + 0.25 * np.einsum("...jkjk->...", d2G)
        if not grad:
            return val
        dx = (
            np.einsum("...jl,...j->...l", u[1], xi) / h
            + u0[1]
            + 0.25 * np.einsum("...jkjkl->...l", d3G)
        )
        return val, dx, u[0] / h

    return ScalarSymbol(fn, f"q(h={h})", None, None, (1.0, -mu))


# ---------------------------------------------------------------------------
# Cutoff parameters


@dataclass(frozen=True)
class CutoffParams:
    """Escape-function parameters for one orientation.

    ``rho3`` is the low-momentum threshold of the zero variant's chi3.
    """

    delta: float
    sigma: float
    sigma_prime: float
    sigma_inf: float
    R: float
    gamma: float
    nu: float
    orientation: str = "incoming"
    rho3: float = 1.0

    def __post_init__(self):
        self.validate()

    @property
    def c0(self) -> float:
        return c0_from_sigma_inf(self.sigma_inf)

    def validate(self, mu: float | None = None):
        if self.orientation not in ("incoming", "outgoing"):
            raise ParameterError(f"unknown orientation {self.orientation!r}")
        if not 0.0 < self.delta < 0.25:
            raise ParameterError(f"delta must lie in (0, 1/4), got {self.delta}")
        if self.R <= 0:
            raise ParameterError("R must be positive")
        if self.gamma < 0:
            raise ParameterError("gamma must be nonnegative")
        if self.nu <= 0:
            raise ParameterError("nu must be positive")
        if self.rho3 <= 0:
            raise ParameterError("rho3 must be positive")
        s, sp, si = self.sigma, self.sigma_prime, self.sigma_inf
        if self.orientation == "incoming":
            if not 0.0 < sp < s < si < 1.0:
                raise ParameterError(
                    f"incoming ordering 0 < sigma' < sigma < sigma_inf < 1 violated: {sp}, {s}, {si}")
        else:
            if not -1.0 < si < s < sp < 0.0:
                raise ParameterError(
                    f"outgoing ordering -1 < sigma_inf < sigma < sigma' < 0 violated: {si}, {s}, {sp}")
        if mu is not None:
            if not self.nu < mu:
                raise ParameterError(f"need nu < mu, got nu={self.nu}, mu={mu}")
            if not self.gamma < mu:
                raise ParameterError(f"need gamma < mu, got gamma={self.gamma}, mu={mu}")
        return self

    def with_(self, **kw) -> "CutoffParams":
        return replace(self, **kw)

    def plateau_constant(self) -> float:
        """Smallest C0 for which |x| >= C0 R forces the first factor to equal 1.

        Incoming: on {beta <= sigma'} the first factor's argument is at most
        -1 once |x| >= t R for t = 4 / (sqrt(4 - 3 beta^2) - beta); the
        maximum over beta in [-1, sigma'] sits at an endpoint.  Outgoing is
        the mirror image with beta in [sigma, 1].
        """
        if self.orientation == "incoming":
            b = self.sigma_prime
            return float(max(2.0, 4.0 / (np.sqrt(4.0 - 3.0 * b * b) - b)))
        b = self.sigma
        return float(max(2.0, 4.0 / (np.sqrt(4.0 - 3.0 * b * b) + b)))

    def as_dict(self) -> dict:
        return {
            "delta": self.delta, "sigma": self.sigma, "sigma_prime": self.sigma_prime,
            "sigma_inf": self.sigma_inf, "R": self.R, "gamma": self.gamma, "nu": self.nu,
            "orientation": self.orientation, "rho3": self.rho3, "c0": self.c0,
        }


@dataclass(frozen=True)
class Ladder:
    """A finite sequence of rungs with the monotone orderings of the iteration.

    Incoming: delta_j, sigma_j, sigma'_j increase and R_j decreases.
    Outgoing: delta_j increases, sigma_j and sigma'_j decrease towards
    sigma_inf and R_j decreases.
    """

    rungs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        rungs = tuple(self.rungs)
        object.__setattr__(self, "rungs", rungs)
        if not rungs:
            raise ParameterError("ladder needs at least one rung")
        ori = {r.orientation for r in rungs}
        if len(ori) != 1:
            raise ParameterError("mixed orientations in one ladder")
        if len({(r.sigma_inf, r.gamma, r.nu) for r in rungs}) != 1:
            raise ParameterError("sigma_inf, gamma and nu must be shared by all rungs")
        inc = rungs[0].orientation == "incoming"
        for a, b in zip(rungs, rungs[1:]):
            ok = a.delta < b.delta and a.R > b.R
            if inc:
                ok = ok and a.sigma < b.sigma and a.sigma_prime < b.sigma_prime
            else:
                ok = ok and a.sigma > b.sigma and a.sigma_prime > b.sigma_prime
            if not ok:
                raise ParameterError(f"ladder ordering violated between {a} and {b}")

    def __len__(self):
        return len(self.rungs)

    def __getitem__(self, j) -> CutoffParams:
        return self.rungs[j]

    @classmethod
    def build(cls, base: CutoffParams, J: int, delta_factor=1.6, sigma_step=0.05,
              R_factor=0.75) -> "Ladder":
        """Rungs 0..J from a base rung by geometric/arithmetic steps."""
        sgn = 1.0 if base.orientation == "incoming" else -1.0
        rungs = []
        for j in range(J + 1):
            rungs.append(base.with_(
                delta=base.delta * delta_factor**j,
                sigma=base.sigma + sgn * sigma_step * j,
                sigma_prime=base.sigma_prime + sgn * sigma_step * j,
                R=base.R * R_factor**j,
            ))
        return cls(tuple(rungs))


# ---------------------------------------------------------------------------
# Localizers


def _flatten(x, xi):
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    x, xi = np.broadcast_arrays(x, xi)
    lead = x.shape[:-1]
    n = x.shape[-1]
    return x.reshape(-1, n), xi.reshape(-1, n), lead


def zeta_parts(params: CutoffParams, g0: np.ndarray, x, xi, zero_variant=False):
    """Factor values and gradients of the localizer at flattened points.

    Returns a dict with ``live`` (mask where all factors may be nonzero),
    ``z`` (list of three ``(value, dx, dxi)`` triples, zero off ``live``),
    ``tau`` and ``dtau`` (valid on ``live``) and ``lead`` (original shape).
    """
    x, xi, lead = _flatten(x, xi)
    M, n = x.shape
    inc = params.orientation == "incoming"
    sgn = 1.0 if inc else -1.0
    R = params.R
    r = np.linalg.norm(x, axis=-1)
    nv = np.linalg.norm(xi @ g0, axis=-1)
    ok = (r > 0) & (nv > 0)
    xs = np.where(ok[:, None], x, 1.0)
    xis = np.where(ok[:, None], xi, 1.0)
    fr = frame(xs, xis, g0)
    u, xpar, xperp, nperp, uperp, gperp = (fr[k] for k in ("u", "xpar", "xperp", "nperp", "uperp", "gperp"))
    rs = fr["r"]
    nvs = fr["nv"]
    bet = np.clip(xpar / rs, -1.0, 1.0)

    # first factor, evaluated at x / R
    a1 = sgn * xpar / R - 0.5 * nperp**2 / R**2 + 1.0
    a1x = sgn * u / R - xperp / R**2
    a1xi = (sgn / R + xpar / R**2)[:, None] * gperp
    # angular factor
    if inc:
        den = params.sigma - params.sigma_prime
        a2 = (bet - params.sigma) / den
    else:
        den = params.sigma_prime - params.sigma
        a2 = (params.sigma - bet) / den
    dbx = (u - bet[:, None] * xs / rs[:, None]) / rs[:, None]
    dbxi = gperp / rs[:, None]
    a2x = sgn * dbx / den
    a2xi = sgn * dbxi / den

    live = ok & (a1 < 0) & (a2 < 0)

    z1, z1d = cutoffs.chi1(a1, deriv=True)
    z2, z2d = cutoffs.chi1(a2, deriv=True)

    # tau and its gradient (orientation sign folded in)
    c0 = params.c0
    tau = sgn * (c0 * nperp - xpar)
    safe_np = np.where(nperp > 0, nperp, 1.0)
    ratio = np.where(nperp > 0, xpar / safe_np, 0.0)
    dtx = sgn * (c0 * uperp - u)
    dtxi = -sgn * (c0 * ratio + 1.0)[:, None] * gperp
    tau = np.where(live, np.maximum(tau, 0.0), 1.0)

    if zero_variant:
        z3, z3xi = cutoffs.chi3(xis, params.rho3, deriv=True)
        z3x = np.zeros_like(xs)
    else:
        d = params.delta
        jt = np.sqrt(1.0 + tau * tau)
        w = jt ** (-params.nu)
        dw = -params.nu * tau * jt ** (-params.nu - 2.0)  # d<tau>^-nu / dtau
        if inc:
            lam = 2.0 * d - d * w
            dlam = -d * dw
        else:
            lam = d + d * w
            dlam = d * dw
        xi2 = np.sum(xis * xis, axis=-1)
        a3 = (xi2 - 1.0) / lam
        a3x = -(a3 * dlam / lam)[:, None] * dtx
        a3xi = 2.0 * xis / lam[:, None] - (a3 * dlam / lam)[:, None] * dtxi
        z3, z3d = cutoffs.chi2(a3, deriv=True)
        z3x = z3d[:, None] * a3x
        z3xi = z3d[:, None] * a3xi

    m = live[:, None]
    zs = [
        (np.where(live, z1, 0.0), np.where(m, z1d[:, None] * a1x, 0.0), np.where(m, z1d[:, None] * a1xi, 0.0)),
        (np.where(live, z2, 0.0), np.where(m, z2d[:, None] * a2x, 0.0), np.where(m, z2d[:, None] * a2xi, 0.0)),
        (np.where(live, z3, 0.0), np.where(m, z3x, 0.0), np.where(m, z3xi, 0.0)),
    ]
    return {
        "live": live, "z": zs, "tau": tau, "dtau": (dtx, dtxi), "lead": lead, "n": n,
        "beta": bet, "xpar": xpar, "nperp": nperp, "r": r,
    }


def _product(zs):
    v = zs[0][0] * zs[1][0] * zs[2][0]
    dx = 0.0
    dxi = 0.0
    for i in range(3):
        others = np.prod([zs[k][0] for k in range(3) if k != i], axis=0)
        dx = dx + zs[i][1] * others[:, None]
        dxi = dxi + zs[i][2] * others[:, None]
    return v, dx, dxi


def _localizer(params: CutoffParams, g: Cometric, weight: bool, zero_variant: bool, name: str):
    g0 = g.flat
    gamma = params.gamma

    def fn(x, xi, grad):
        P = zeta_parts(params, g0, x, xi, zero_variant)
        v, dx, dxi = _product(P["z"])
        if weight and gamma != 0.0:
            live = P["live"]
            tau = P["tau"]
            tg = np.where(live, tau**gamma, 0.0)
            dtg = np.where(live, gamma * tau ** (gamma - 1.0), 0.0)
            dtx, dtxi = P["dtau"]
            dx = dtg[:, None] * dtx * v[:, None] + tg[:, None] * dx
            dxi = dtg[:, None] * dtxi * v[:, None] + tg[:, None] * dxi
            v = tg * v
        lead, n = P["lead"], P["n"]
        v = v.reshape(lead)
        if not grad:
            return v
        return v, dx.reshape(lead + (n,)), dxi.reshape(lead + (n,))

    xi_rad = None if zero_variant else float(np.sqrt(1.0 + 4.0 * params.delta))
    order = (0.0, gamma if weight else 0.0)

    def support(x, xi):
        P = zeta_parts(params, g0, x, xi, zero_variant)
        return P["live"].reshape(P["lead"])

    return ScalarSymbol(fn, name, None, xi_rad, order, support=support)


def zeta_incoming(params: CutoffParams, g: Cometric) -> ScalarSymbol:
    """zeta_-(x, xi) = zeta_1(x/R, xi) zeta_2(x, xi) zeta_3(x, xi)."""
    if params.orientation != "incoming":
        raise ParameterError("zeta_incoming needs incoming parameters")
    params.validate(g.mu)
    return _localizer(params, g, False, False, "zeta_in")


def zeta_outgoing(params: CutoffParams, g: Cometric) -> ScalarSymbol:
    if params.orientation != "outgoing":
        raise ParameterError("zeta_outgoing needs outgoing parameters")
    params.validate(g.mu)
    return _localizer(params, g, False, False, "zeta_out")


def observable(params: CutoffParams, g: Cometric, orientation: str | None = None) -> ScalarSymbol:
    """b = tau^gamma zeta, extended by zero off the support of zeta."""
    if orientation is not None and orientation != params.orientation:
        raise ParameterError("orientation does not match the parameters")
    params.validate(g.mu)
    tag = "in" if params.orientation == "incoming" else "out"
    return _localizer(params, g, True, False, f"b_{tag}")


def observable_zero_variant(params: CutoffParams, g: Cometric, orientation: str | None = None,
                            weighted: bool = True) -> ScalarSymbol:
    """Localizer with chi3(xi) replacing the energy-shell factor.

    ``weighted=False`` gives zeta^0 itself, otherwise tau^gamma zeta^0.
    """
    if orientation is not None and orientation != params.orientation:
        raise ParameterError("orientation does not match the parameters")
    params.validate(g.mu)
    tag = "in" if params.orientation == "incoming" else "out"
    return _localizer(params, g, weighted, True, f"{'b' if weighted else 'zeta'}0_{tag}")


# ---------------------------------------------------------------------------
# Brackets


def poisson_bracket(a: ScalarSymbol, b: ScalarSymbol, x, xi):
    """{a, b} = d_xi a . d_x b - d_x a . d_xi b."""
    ax, axi = a.gradient(x, xi)
    bx, bxi = b.gradient(x, xi)
    return np.sum(axi * bx, axis=-1) - np.sum(ax * bxi, axis=-1)


def bracket_values(a: ScalarSymbol, b: ScalarSymbol, name=None) -> ScalarSymbol:
    """{a, b} as a value-only symbol."""

    def fn(x, xi, grad):
        if grad:
            raise NotImplementedError("bracket symbols carry no gradient")
        return poisson_bracket(a, b, x, xi)

    return ScalarSymbol(fn, name or f"{{{a.name},{b.name}}}",
                        _min_radius(a.x_radius, b.x_radius),
                        _min_radius(a.xi_radius, b.xi_radius),
                        (a.order[0] + b.order[0] - 1, a.order[1] + b.order[1] - 1),
                        has_grad=False)


def truncate_x(b: ScalarSymbol, inner: float, outer: float) -> ScalarSymbol:
    """b(x, xi) * chi_box(|x|) where chi_box = 1 on |x| <= inner, 0 beyond outer."""

    def box(x, xi, grad):
        r = np.linalg.norm(x, axis=-1)
        if not grad:
            return cutoffs.smooth_box(r, inner, outer)
        v, d = cutoffs.smooth_box(r, inner, outer, deriv=True)
        safe = np.where(r > 0, r, 1.0)
        return v, (d / safe)[..., None] * x, np.zeros_like(xi)

    chi = ScalarSymbol(box, f"box[{inner},{outer}]", outer, None, (0.0, 0.0))
    out = b * chi
    out.name = f"{b.name}|box"
    out.x_radius = outer
    out.support = None
    return out


def box_remainder(b: ScalarSymbol, g: Cometric, inner: float, outer: float) -> ScalarSymbol:
    """b^2 {p2, chi_box^2}: the bracket produced by cutting b off in a box.

    Added back in the operator commutator so that the box truncation does not
    manufacture negativity at its edge.
    """
    p2 = principal_symbol(g)

    def fn(x, xi, grad):
        if grad:
            raise NotImplementedError
        bv = b(x, xi)
        r = np.linalg.norm(x, axis=-1)
        v, d = cutoffs.smooth_box(r, inner, outer, deriv=True)
        safe = np.where(r > 0, r, 1.0)
        dchi2 = (2.0 * v * d / safe)[..., None] * x
        _, p2xi = p2.gradient(x, xi)
        return bv * bv * np.sum(p2xi * dchi2, axis=-1)

    return ScalarSymbol(fn, f"box_rem({b.name})", outer, b.xi_radius, (1.0, 2 * b.order[1] - 1),
                        has_grad=False)


def outgoing_remainder(params: CutoffParams, g: Cometric) -> ScalarSymbol:
    """rho = {p2, zeta~_1(x/R) zeta~_2} zeta~_3 for the outgoing localizer."""
    if params.orientation != "outgoing":
        raise ParameterError("outgoing_remainder needs outgoing parameters")
    p2 = principal_symbol(g)

    def fn(x, xi, grad):
        if grad:
            raise NotImplementedError
        P = zeta_parts(params, g.flat, x, xi)
        (z1, z1x, z1xi), (z2, z2x, z2xi), (z3, _, _) = P["z"]
        fx = z1x * z2[:, None] + z1[:, None] * z2x
        fxi = z1xi * z2[:, None] + z1[:, None] * z2xi
        xf, xif, _ = _flatten(x, xi)
        px, pxi = p2.gradient(xf, xif)
        br = np.sum(pxi * fx, axis=-1) - np.sum(px * fxi, axis=-1)
        return (br * z3).reshape(P["lead"])

    return ScalarSymbol(fn, "rho_out", None, float(np.sqrt(1.0 + 4.0 * params.delta)),
                        (1.0, -1.0), has_grad=False)


# ---------------------------------------------------------------------------
# Seminorms


def _multi_indices(n, order):
    """Multi-indices (alpha, beta) of total order ``order`` over 2n coordinates."""
    out = []
    for combo in itertools.combinations_with_replacement(range(2 * n), order):
        alpha = [0] * n
        beta = [0] * n
        for c in combo:
            if c < n:
                alpha[c] += 1
            else:
                beta[c - n] += 1
        out.append((tuple(alpha), tuple(beta), combo))
    return out


def seminorm_estimate(a: ScalarSymbol, k: float, l: float, max_order: int, x, xi, step=1e-5) -> dict:
    """Worst weighted derivative sizes over the sample points.

    For every (alpha, beta) with |alpha| + |beta| <= max_order reports
    sup |d_x^alpha d_xi^beta a| <x>^{|alpha| - l} <xi>^{|beta| - k}.
    Orders 0 and 1 are analytic; order 2 differentiates the analytic
    gradient by central differences (recorded under ``method``).
    """
    if max_order > 2:
        raise ValueError("seminorm_estimate supports max_order <= 2")
    x, xi, _ = _flatten(x, xi)
    n = x.shape[-1]
    jx = japanese(x)
    jxi = japanese(xi)
    consts = {}
    method = {0: "analytic", 1: "analytic", 2: "central-difference of analytic gradient"}
    val = a(x, xi)
    consts[((0,) * n, (0,) * n)] = float(np.max(np.abs(val) * jx ** (-l) * jxi ** (-k)))
    if max_order >= 1:
        dx, dxi = a.gradient(x, xi)
        full = np.concatenate([dx, dxi], axis=-1)
        for alpha, beta, combo in _multi_indices(n, 1):
            d = full[:, combo[0]]
            consts[(alpha, beta)] = float(np.max(np.abs(d) * jx ** (sum(alpha) - l) * jxi ** (sum(beta) - k)))
    if max_order >= 2:
        hess = np.empty((x.shape[0], 2 * n, 2 * n))
        z = np.concatenate([x, xi], axis=-1)
        for i in range(2 * n):
            e = np.zeros(2 * n)
            e[i] = step * max(1.0, 1.0)
            zp, zm = z + e, z - e
            gp = np.concatenate(a.gradient(zp[:, :n], zp[:, n:]), axis=-1)
            gm = np.concatenate(a.gradient(zm[:, :n], zm[:, n:]), axis=-1)
            hess[:, :, i] = (gp - gm) / (2 * step)
        hess = 0.5 * (hess + hess.transpose(0, 2, 1))
        for alpha, beta, combo in _multi_indices(n, 2):
            d = hess[:, combo[0], combo[1]]
            consts[(alpha, beta)] = float(np.max(np.abs(d) * jx ** (sum(alpha) - l) * jxi ** (sum(beta) - k)))
    return {
        "symbol": a.name,
        "class": [k, l],
        "constants": {f"{list(al)}|{list(be)}": v for (al, be), v in consts.items()},
        "method": {o: method[o] for o in range(max_order + 1)},
        "points": int(x.shape[0]),
    }
