"""Shared one-dimensional quadrature helpers.

Gauss-Legendre node caches, a doubling-ladder panel integrator with optional
power-law endpoint substitutions, and the (semi)closed-form integrals of the
singular kernels the arclength engine subtracts.
"""

from __future__ import annotations

import numpy as np

_GL_CACHE: dict[int, tuple] = {}

LADDER = (12, 24, 48, 96, 192)


def gauss_legendre(k: int):
    if k not in _GL_CACHE:
        _GL_CACHE[k] = np.polynomial.legendre.leggauss(k)
    return _GL_CACHE[k]


def sin_power_integral(q: float, T: float) -> float:
    """Integral of (2 sin(t/2))^{-q} over [0, T] for 0 <= q < 1, T <= 2π.

    Series expansion on [0, h0] (the integrand is t^{-q}·(1 + q t²/24 + ...)),
    geometric Gauss-Legendre panels beyond.  Accurate to ~1e-13.
    """
    if T <= 0.0:
        return 0.0
    if q == 0.0:
        return T
    h0 = min(0.05, T)
    val = (
        h0 ** (1 - q) / (1 - q)
        + q * h0 ** (3 - q) / (24 * (3 - q))
        + (q * q / 1152 + q / 2880) * h0 ** (5 - q) / (5 - q)
    )
    if T > h0:
        x, w = gauss_legendre(48)
        edges = [h0]
        while edges[-1] < T:
            edges.append(min(T, edges[-1] * 2.0))
        for a, b in zip(edges[:-1], edges[1:]):
            m, h = 0.5 * (a + b), 0.5 * (b - a)
            t = m + h * x
            val += h * float(np.sum(w * (2.0 * np.sin(0.5 * t)) ** (-q)))
    return float(val)


def peak_kernel_integral(q: float, d0: float, vmod: float, T: float) -> float:
    """Integral of (d0² + 4·vmod·sin²(t/2))^{-q/2} over [0, T], T <= π.

    d0 = |1 - |v|| is the miss distance of the critical value from the unit
    circle; d0 = 0 reduces to the genuinely singular sin-power case.  A sinh
    substitution resolves the peak for arbitrarily small d0.
    """
    if T <= 0.0:
        return 0.0
    d0 = abs(d0)
    if d0 < 1e-150:
        return vmod ** (-0.5 * q) * sin_power_integral(q, T)
    x, w = gauss_legendre(48)
    total = 0.0
    t1 = min(0.5, T)
    smax = float(np.arcsinh(t1 / d0))
    if smax > 0.0:
        npan = max(2, int(np.ceil(smax / 1.0)))
        edges = np.linspace(0.0, smax, npan + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            m, h = 0.5 * (a + b), 0.5 * (b - a)
            s = m + h * x
            t = d0 * np.sinh(s)
            kern = (d0 * d0 + 4.0 * vmod * np.sin(0.5 * t) ** 2) ** (-0.5 * q)
            total += h * float(np.sum(w * kern * d0 * np.cosh(s)))
    if T > t1:
        edges = np.linspace(t1, T, 5)
        for a, b in zip(edges[:-1], edges[1:]):
            m, h = 0.5 * (a + b), 0.5 * (b - a)
            t = m + h * x
            kern = (d0 * d0 + 4.0 * vmod * np.sin(0.5 * t) ** 2) ** (-0.5 * q)
            total += h * float(np.sum(w * kern))
    return total


class PanelIntegrator:
    """Doubling-ladder Gauss-Legendre with optional endpoint substitution.

    The integrand is supplied as f(offsets) -> values where offsets are
    distances from the panel's anchor endpoint (so callers can do exact
    near-endpoint arithmetic).  ``power`` applies t = u^power clustering at the
    anchor (power 1 = none, 2 = sqrt-type singularities, 4 = post-subtraction
    residuals).  Panels that fail to converge on the ladder are bisected.
    """

    def __init__(self, tol: float, max_depth: int = 24, min_width: float = 1e-13):
        self.tol = tol
        self.max_depth = max_depth
        self.min_width = min_width
        self.error = 0.0
        self.exhausted = False

    def integrate(self, f, width: float, power: int = 1) -> float:
        return self._panel(f, 0.0, width, power, self.tol, 0)

    def _ladder(self, f, lo: float, width: float, power: int):
        """Yield successive GL estimates of ∫_lo^{lo+width} f(offset) d(offset)."""
        a, b = lo, lo + width
        if power == 1:
            for k in LADDER:
                x, w = gauss_legendre(k)
                m, h = 0.5 * (a + b), 0.5 * (b - a)
                offs = m + h * x
                yield float(h * np.sum(w * f(offs)))
        else:
            ua, ub = a ** (1.0 / power), b ** (1.0 / power)
            for k in LADDER:
                x, w = gauss_legendre(k)
                m, h = 0.5 * (ua + ub), 0.5 * (ub - ua)
                u = m + h * x
                offs = u**power
                jac = power * u ** (power - 1)
                yield float(h * np.sum(w * f(offs) * jac))

    def _panel(self, f, lo, width, power, tol, depth):
        prev = None
        best_delta = np.inf
        for est in self._ladder(f, lo, width, power):
            if prev is not None:
                best_delta = abs(est - prev)
                if best_delta <= tol:
                    self.error += best_delta
                    return est
            prev = est
        if depth >= self.max_depth or width <= self.min_width:
            self.error += best_delta if np.isfinite(best_delta) else abs(prev or 0.0)
            self.exhausted = True
            return prev if prev is not None else 0.0
        # bisect at the substituted-variable midpoint so node clustering persists
        a, b = lo, lo + width
        cut = (0.5 * (a ** (1.0 / power) + b ** (1.0 / power))) ** power
        return self._panel(f, a, cut - a, power, 0.5 * tol, depth + 1) + self._panel(
            f, cut, b - cut, power, 0.5 * tol, depth + 1
        )
