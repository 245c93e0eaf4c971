"""Smooth step and bump profiles built from exp(-1/t)."""

from __future__ import annotations

import numpy as np


def _F(t):
    t = np.asarray(t, dtype=float)
    pos = t > 0
    safe = np.where(pos, t, 1.0)
    f = np.where(pos, np.exp(-1.0 / safe), 0.0)
    # F'(t) = F(t) / t^2
    df = np.where(pos, f / (safe * safe), 0.0)
    return f, df


def chi1(s, deriv: bool = False):
    """Smooth nonincreasing step: 1 for s <= -1, 0 for s >= 0.

    chi1(s) = F(-s) / (F(-s) + F(s + 1)) with F(t) = exp(-1/t) for t > 0.
    With ``deriv=True`` returns ``(chi1, chi1')``.
    """
    s = np.asarray(s, dtype=float)
    a, da = _F(-s)
    b, db = _F(s + 1.0)
    d = a + b  # never zero: one of the two is positive for every s
    val = a / d
    if not deriv:
        return val
    # d/ds a = -F'(-s), d/ds b = F'(s+1)
    der = (-da * b - a * db) / (d * d)
    return val, der


def chi2(s, deriv: bool = False):
    """Even bump: 1 for |s| <= 1, 0 for |s| >= 2, nonincreasing in |s|."""
    s = np.asarray(s, dtype=float)
    u, du = chi1(s - 2.0, deriv=True)
    w, dw = chi1(-s - 2.0, deriv=True)
    val = u * w
    if not deriv:
        return val
    return val, du * w - u * dw


def chi3(xi, radius: float = 1.0, deriv: bool = False):
    """Low-momentum cutoff chi1((radius - |xi|) / radius).

    Zero for |xi| <= radius and one for |xi| >= 2 radius.  ``radius = 1``
    gives chi1(1 - |xi|).  With ``deriv=True`` also returns the xi-gradient.
    """
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi, axis=-1)
    val, d = chi1((radius - r) / radius, deriv=True)
    if not deriv:
        return val
    safe = np.where(r > 0, r, 1.0)
    grad = (-d / radius / safe)[..., None] * xi
    return val, grad


def smooth_box(r, inner: float, outer: float, deriv: bool = False):
    """1 for r <= inner, 0 for r >= outer, smooth monotone in between."""
    width = outer - inner
    if width <= 0:
        raise ValueError("smooth_box needs inner < outer")
    v, d = chi1((np.asarray(r, dtype=float) - outer) / width, deriv=True)
    if not deriv:
        return v
    return v, d / width
