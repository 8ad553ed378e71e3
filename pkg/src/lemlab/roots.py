"""Simultaneous root finding and the lemniscate/circle intersection solver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadParameter
from .polynomials import CoeffPoly

MAX_ITER = 200


@dataclass(frozen=True)
class RootSet:
    roots: tuple
    residuals: tuple
    converged: bool

    def array(self) -> np.ndarray:
        return np.asarray(self.roots, dtype=complex)


@dataclass(frozen=True)
class CircleSection:
    """Intersection of a lemniscate with the circle |z| = radius."""

    radius: float
    points: tuple
    full_circle: bool
    tangency: tuple = field(default=(), compare=False)


def _initial_circle(c: np.ndarray) -> np.ndarray:
    n = len(c) - 1
    r = 1.0 + float(np.max(np.abs(c[:-1])))  # Cauchy bound
    k = np.arange(n)
    return 0.8 * r * np.exp(2j * np.pi * (k + 0.35) / n + 0.42j)


def aberth(coeffs, x0=None, max_iter=MAX_ITER, step_tol=2e-15):
    """Aberth-Ehrlich simultaneous iteration with one Newton polish per root.

    coeffs: c0..cn, leading coefficient nonzero.  Returns (roots, residuals,
    converged) with residuals |p(root)| against the scaled polynomial.
    """
    c = np.asarray(coeffs, dtype=complex)
    n = len(c) - 1
    if n < 1:
        return np.array([], dtype=complex), np.array([]), True
    c = c / c[-1]
    if n == 1:
        r = np.array([-c[0]])
        return r, np.abs(np.polyval(c[::-1], r)), True
    dc = np.arange(1, n + 1) * c[1:]
    crev, dcrev = c[::-1], dc[::-1]
    x = _initial_circle(c) if x0 is None else np.array(x0, dtype=complex)
    cabs_rev = np.abs(c)[::-1]
    # Backward-error convergence: |p(x)| small against sum_k |c_k||x|^k, not
    # against a fixed absolute scale.  Fibers with tiny constant terms have
    # root clusters far below the coefficient scale; an absolute test would
    # accept a blob of wrong magnitude around them.
    back_tol = 4e-15 * (n + 2)
    converged = False
    for _ in range(max_iter):
        pv = np.polyval(crev, x)
        spread = np.polyval(cabs_rev, np.abs(x))
        if np.all(np.abs(pv) <= back_tol * spread):
            converged = True
            break
        pd = np.polyval(dcrev, x)
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        inv[~np.isfinite(inv)] = 0.0
        s = inv.sum(axis=1)
        tiny = np.abs(pd) < 1e-300
        w = pv / np.where(tiny, 1.0, pd)
        w[tiny] = 0.1 + 0.1j  # jostle off the exact critical point
        denom = 1.0 - w * s
        deg = np.abs(denom) < 1e-13
        step = w / np.where(deg, 1.0, denom)
        step[deg] = w[deg]
        x = x - step
        if np.max(np.abs(step)) <= step_tol * np.max(np.abs(x)):
            pv = np.polyval(crev, x)
            spread = np.polyval(cabs_rev, np.abs(x))
            converged = bool(np.all(np.abs(pv) <= back_tol * spread))
            break
    # Newton polish
    pv = np.polyval(crev, x)
    pd = np.polyval(dcrev, x)
    ok = np.abs(pd) > 1e-300
    xp = np.where(ok, x - pv / np.where(ok, pd, 1.0), x)
    rp = np.abs(np.polyval(crev, xp))
    keep = rp <= np.abs(pv)
    x = np.where(keep, xp, x)
    res = np.where(keep, rp, np.abs(pv))
    if not converged:
        spread = np.polyval(cabs_rev, np.abs(x))
        converged = bool(np.all(res <= 4.0 * back_tol * spread))
    return x, res, converged


def all_roots(p: CoeffPoly, warm_start: RootSet | None = None) -> RootSet:
    if p.degree < 1:
        raise BadParameter("degree must be >= 1")
    x0 = warm_start.array() if warm_start is not None else None
    r, res, conv = aberth(p.array(), x0=x0)
    return RootSet(tuple(r), tuple(float(v) for v in res), conv)


def fiber(p: CoeffPoly, w: complex, warm_start: RootSet | None = None) -> RootSet:
    """Roots of p(z) - w; warm starts preserve root ordering along a sweep."""
    c = p.array()
    c[0] -= w
    x0 = warm_start.array() if warm_start is not None else None
    r, res, conv = aberth(c, x0=x0)
    return RootSet(tuple(r), tuple(float(v) for v in res), conv)


def critical_points_of(p: CoeffPoly) -> np.ndarray:
    """Critical multiset: exact provenance when present, else solve p' = 0."""
    if p.critical_points is not None:
        return np.asarray(p.critical_points, dtype=complex)
    if p.degree == 1:
        return np.array([], dtype=complex)
    dc = p.deriv_array()
    r, _, _ = aberth(dc)
    return r


def _trim_leading(c: np.ndarray, tol: float) -> np.ndarray:
    k = len(c)
    while k > 1 and abs(c[k - 1]) <= tol:
        k -= 1
    return c[:k]


def circle_intersections(p: CoeffPoly, r: float) -> CircleSection:
    """Solve |p(z)| = 1 on |z| = r via the conjugate-polynomial degree-2n equation.

    Clears the 1/z poles symbolically: q(z) = p(z)·s(z) − zⁿ with
    s(z) = Σ conj(c_k)·r^{2k}·z^{n−k}, then filters the roots back to the circle
    and polishes them along it.
    """
    if r <= 0:
        raise BadParameter("radius must be positive")
    c = p.array()
    n = p.degree
    s = np.conj(c)[::-1] * (r ** (2.0 * np.arange(n, -1, -1)))  # s[j] multiplies z^j
    q = np.convolve(c, s)
    q[n] -= 1.0  # subtract z^n
    scale = max(1.0, float(np.max(np.abs(q))))
    full_scale = max(1.0, float(np.max(np.abs(c)))) * max(1.0, r) ** (2 * n)
    if np.all(np.abs(q) <= 1e-12 * full_scale):
        return CircleSection(r, (), True)
    qt = _trim_leading(q, 1e-14 * scale)
    if len(qt) < 2:
        return CircleSection(r, (), False)
    roots, _, _ = aberth(qt)
    filter_tol = 1e-6 * r
    cand = roots[np.abs(np.abs(roots) - r) <= filter_tol]
    # polish along the circle: Newton on g(t) = |p(r e^{it})|^2 - 1
    pts = []
    crev = c[::-1]
    dcrev = p.deriv_array()[::-1]
    for z in cand:
        t = float(np.angle(z))
        for _ in range(30):
            zz = r * np.exp(1j * t)
            pv = np.polyval(crev, zz)
            g = (pv * np.conj(pv)).real - 1.0
            dv = np.polyval(dcrev, zz)
            dg = 2.0 * (np.conj(pv) * dv * 1j * zz).real
            if abs(dg) < 1e-300:
                break
            t_new = t - g / dg
            if abs(t_new - t) < 1e-15:
                t = t_new
                break
            t = t_new
        zz = r * np.exp(1j * t)
        if abs(abs(np.polyval(crev, zz)) - 1.0) <= 1e-8:
            pts.append(zz)
    # dedupe
    dedupe_tol = 1e-8 * max(1.0, r)
    uniq: list[complex] = []
    counts: list[int] = []
    for z in sorted(pts, key=lambda w: float(np.angle(w))):
        if uniq and abs(z - uniq[-1]) < dedupe_tol:
            counts[-1] += 1
            continue
        uniq.append(complex(z))
        counts.append(1)
    if len(uniq) > 1 and abs(uniq[0] - uniq[-1]) < dedupe_tol:
        counts[0] += counts.pop()
        uniq.pop()
    tang = tuple(z for z, k in zip(uniq, counts) if k > 1)
    return CircleSection(r, tuple(uniq), False, tang)
