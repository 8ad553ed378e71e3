"""Lemniscate arclength engines.

Three independent routes to the length of {z : |p(z)| = 1} (restricted to a
region):

* the fiber formula — integrate sum_{p(z)=e^{i a}} 1/|p'(z)| over the angle a;
* the radial formula — integrate the cosecant-weighted circle-intersection
  counts over the radius;
* predictor-corrector tracing of the level curve itself.

The fiber route is the precision workhorse.  Critical points whose critical
value lies on (or near) the unit circle make the integrand singular (or
sharply peaked) at the angle of that critical value; those clusters get a
local power-law model that is subtracted from the integrand on the flanking
panels and re-added in (semi)closed form.  Near the singular angle the fiber
is solved in Taylor-shifted coordinates with a cancellation-free constant
term, so the subtracted integrand stays evaluable at machine accuracy
arbitrarily close to the singularity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import acos, lgamma, log, pi

import numpy as np

from .errors import BadParameter, BudgetExceeded, TransversalityFailure
from .polynomials import CoeffPoly, taylor_shift
from .quadrature import PanelIntegrator, peak_kernel_integral, sin_power_integral
from .regions import QuadratureBudget, Region, WholePlane
from .roots import aberth, circle_intersections, critical_points_of

TWO_PI = 2.0 * pi

# Critical values within this band of |v| = 1 get a subtraction model.
MODEL_BAND = 0.3
# Exclusion radius (fallback when a singular cluster cannot be modeled).
EPS_CRIT_FACTOR = 1e-3


@dataclass(frozen=True)
class LengthResult:
    length: float
    error_estimate: float
    excluded_measure: float
    method: str


@dataclass
class Trace:
    components: list
    closed_flags: list
    critical_flags: list = field(default_factory=list)

    def total_length(self) -> float:
        return sum(_polyline_length(c, closed) for c, closed in zip(self.components, self.closed_flags))


def _polyline_length(vertices, closed: bool) -> float:
    v = np.asarray(vertices, dtype=complex)
    if len(v) < 2:
        return 0.0
    segs = np.diff(v)
    if closed:
        segs = np.append(segs, v[0] - v[-1])
    lens = np.abs(segs)
    keep = lens > 0
    lens = lens[keep]
    if len(lens) < 2:
        return float(np.sum(lens))
    # chord-to-arc correction from the turning angles
    dirs = segs[keep] / lens
    turn = np.abs(np.angle(dirs[1:] / dirs[:-1]))
    corr = 1.0 + np.minimum(turn, 1.0) ** 2 / 24.0
    weights = np.ones_like(lens)
    weights[1:] += 0.5 * (corr - 1.0)
    weights[:-1] += 0.5 * (corr - 1.0)
    return float(np.sum(lens * weights))


# ---------------------------------------------------------------------------
# closed forms for p0 = z^n - 1


def length_p0_closed(n: int) -> float:
    """2^{1/n}·B(1/2, 1/(2n)), the exact length for z^n − 1."""
    if n < 1:
        raise BadParameter("n must be >= 1")
    return 2.0 ** (1.0 / n) * float(
        np.exp(lgamma(0.5) + lgamma(0.5 / n) - lgamma(0.5 + 0.5 / n))
    )


def p0_length_asymptote(n: int) -> float:
    return 2.0 * n + 4.0 * log(2.0)


def length_p0_outer(n: int, r0: float) -> float:
    """Length of the p0 lemniscate outside D(0, r0), 0 < r0 <= 1."""
    if not (0.0 < r0 <= 1.0):
        raise BadParameter("need 0 < r0 <= 1")
    q = (n - 1.0) / n
    half = min(1.0, 0.5 * r0**n)
    a_max = 2.0 * acos(half)  # |alpha| <= a_max on the kept set
    t_excl = pi - a_max
    return 2.0 * (sin_power_integral(q, pi) - sin_power_integral(q, t_excl))


# ---------------------------------------------------------------------------
# critical-cluster analysis


@dataclass
class _Cluster:
    center: complex
    multiplicity: int  # multiplicity as root of p'


def _cluster_critical_points(p: CoeffPoly):
    zetas = critical_points_of(p)
    exact = p.critical_points is not None
    tol = 1e-9 if exact else 2e-2 * max(1.0, float(np.max(np.abs(zetas))) if len(zetas) else 1.0)
    clusters: list[_Cluster] = []
    for z in zetas:
        for cl in clusters:
            if abs(z - cl.center) < tol:
                cl.center = (cl.center * cl.multiplicity + z) / (cl.multiplicity + 1)
                cl.multiplicity += 1
                break
        else:
            clusters.append(_Cluster(complex(z), 1))
    if not exact:
        # tighten multiplicities from the Taylor coefficients at the centroid
        for cl in clusters:
            sh = taylor_shift(p, cl.center)
            scale = float(np.max(np.abs(sh))) or 1.0
            m = 0
            for k in range(1, len(sh)):
                if abs(sh[k]) > 1e-7 * scale:
                    m = k - 1
                    break
            if m >= cl.multiplicity:
                cl.multiplicity = m
    return clusters


class _SingularModel:
    """Local power-law model of a critical cluster's fiber contribution.

    Near a cluster of m critical points at z* with critical value v, the m+1
    colliding fiber roots contribute |c|^{-1/(m+1)}·|e^{i a} − v|^{-m/(m+1)}
    to the integrand, c the (m+1)-st Taylor coefficient of p at z*.
    """

    def __init__(self, p: CoeffPoly, cluster: _Cluster):
        self.zeta = cluster.center
        self.m = cluster.multiplicity
        self.shifted = taylor_shift(p, self.zeta)
        self.v = complex(self.shifted[0])
        self.vmod = abs(self.v)
        self.d0 = 1.0 - self.vmod  # signed miss distance of |v| from 1
        self.alpha = float(np.angle(self.v)) if self.vmod > 0 else 0.0
        self.phase = np.exp(1j * self.alpha)
        self.c = complex(self.shifted[self.m + 1])
        self.q = self.m / (self.m + 1.0)
        self.amp = abs(self.c) ** (-1.0 / (self.m + 1)) if self.c != 0 else 0.0
        self.shifted_deriv = np.arange(1, len(self.shifted)) * self.shifted[1:]

    def tau_vec(self, dal):
        """w − v for w = e^{i(alpha* + dal)}, cancellation-free."""
        return self.phase * ((-2.0 * np.sin(0.5 * dal) ** 2) + 1j * np.sin(dal) + self.d0)

    def kernel(self, dal):
        t2 = self.d0 * self.d0 + 4.0 * self.vmod * np.sin(0.5 * dal) ** 2
        with np.errstate(divide="ignore"):
            return self.amp * np.where(t2 > 0, t2, np.inf) ** (-0.5 * self.q)

    def flank_integral(self, width: float) -> float:
        return self.amp * peak_kernel_integral(self.q, self.d0, self.vmod, width)


def _wrap_angle(a: float) -> float:
    return (a + pi) % TWO_PI - pi


# ---------------------------------------------------------------------------
# fiber-formula engine


class _FiberSweep:
    def __init__(self, p: CoeffPoly, omega: Region | None, budget: QuadratureBudget):
        self.p = p
        self.n = p.degree
        self.coeffs = p.array()
        self.dcoeffs_rev = p.deriv_array()[::-1]
        self.omega = omega
        self.plane = omega is None or isinstance(omega, WholePlane)
        self.budget = budget
        self.models: list[_SingularModel] = []
        self.peak_angles: list[float] = []
        self.excluded: list[tuple[complex, int]] = []
        self.eps_crit = EPS_CRIT_FACTOR
        self._classify_clusters()

    def _cluster_in_omega(self, zc: complex) -> str:
        if self.plane:
            return "inside"
        probe = zc + 4.0 * self.eps_crit * np.exp(2j * pi * np.arange(8) / 8)
        probe = np.append(probe, zc)
        hits = np.asarray(self.omega.contains(probe), dtype=bool)
        if hits.all():
            return "inside"
        if not hits.any():
            return "outside"
        return "boundary"

    def _classify_clusters(self):
        clusters = _cluster_critical_points(self.p)
        scale = max([1.0] + [abs(c.center) for c in clusters])
        self.eps_crit = EPS_CRIT_FACTOR * scale
        for cl in clusters:
            model = _SingularModel(self.p, cl)
            av = model.vmod
            if not (0.2 < av < 5.0):
                continue
            where = self._cluster_in_omega(cl.center)
            if abs(av - 1.0) < MODEL_BAND and model.amp > 0:
                if where == "inside":
                    self.models.append(model)
                elif where == "boundary" and abs(av - 1.0) < 1e-6:
                    self.excluded.append((cl.center, cl.multiplicity))
                else:
                    self.peak_angles.append(model.alpha)
            else:
                self.peak_angles.append(model.alpha)

    # fiber solve returning filtered 1/|p'| sum -----------------------------

    def _solve(self, anchor: float, offset: float, model: _SingularModel | None, warm):
        """Fiber at angle anchor+offset; offset is kept exact (never folded into
        the anchor) so subtraction models stay accurate arbitrarily close to
        their singular angle."""
        if model is not None:
            dal = _wrap_angle(anchor - model.alpha) + offset
            q = model.shifted.copy()
            q[0] = -model.tau_vec(dal)
            u, _, _ = aberth(q, x0=warm)
            roots = model.zeta + u
            dp = np.polyval(model.shifted_deriv[::-1], u)
            return roots, u, np.abs(dp)
        c = self.coeffs.copy()
        c[0] -= np.exp(1j * (anchor + offset))
        roots, _, _ = aberth(c, x0=warm)
        dp = np.polyval(self.dcoeffs_rev, roots)
        return roots, roots, np.abs(dp)

    def _fsum(self, roots, dpabs) -> float:
        keep = dpabs > 1e-300
        if not self.plane:
            keep &= np.asarray(self.omega.contains(roots), dtype=bool)
        for zc, _m in self.excluded:
            keep &= np.abs(roots - zc) > self.eps_crit
        if not np.any(keep):
            return 0.0
        return float(np.sum(1.0 / dpabs[keep]))

    def _count(self, roots) -> int:
        keep = np.ones(len(roots), dtype=bool)
        if not self.plane:
            keep &= np.asarray(self.omega.contains(roots), dtype=bool)
        for zc, _m in self.excluded:
            keep &= np.abs(roots - zc) > self.eps_crit
        return int(np.sum(keep))

    # breakpoints ------------------------------------------------------------

    def _crossing_angles(self):
        if self.plane and not self.excluded:
            return []
        m0 = max(64, 8 * self.n)
        angles = -pi + TWO_PI * np.arange(m0) / m0
        counts = []
        warm = None
        roots_at = []
        for a in angles:
            roots, _, _ = self._solve(a, 0.0, None, warm)
            warm = roots
            roots_at.append(roots)
            counts.append(self._count(roots))
        found = []
        for k in range(m0):
            k2 = (k + 1) % m0
            if counts[k] == counts[k2]:
                continue
            lo, hi = angles[k], angles[k] + TWO_PI / m0
            clo = counts[k]
            warm = roots_at[k]
            for _ in range(45):
                mid = 0.5 * (lo + hi)
                roots, _, _ = self._solve(mid, 0.0, None, warm)
                warm = roots
                if self._count(roots) == clo:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-11:
                    break
            found.append(_wrap_angle(0.5 * (lo + hi)))
        return found

    # main -------------------------------------------------------------------

    def run(self) -> LengthResult:
        base = [-pi, -pi / 2.0, 0.0, pi / 2.0]
        raw = (
            [(a, None) for a in base]
            + [(m.alpha, m) for m in self.models]
            + [(a, "peak") for a in self.peak_angles]
            + [(a, "cross") for a in self._crossing_angles()]
        )
        # dedupe, model labels win
        raw.sort(key=lambda t: (_wrap_angle(t[0]), t[1] is None))
        marks: list[list] = []
        for a, tag in raw:
            a = _wrap_angle(a)
            if marks and abs(a - marks[-1][0]) < 1e-9:
                if not isinstance(marks[-1][1], _SingularModel) and isinstance(tag, _SingularModel):
                    marks[-1][1] = tag
                elif marks[-1][1] is None and tag is not None:
                    marks[-1][1] = tag
                continue
            marks.append([a, tag])
        if len(marks) > 1 and abs((marks[0][0] + TWO_PI) - marks[-1][0]) < 1e-9:
            if isinstance(marks[-1][1], _SingularModel) and not isinstance(marks[0][1], _SingularModel):
                marks[0][1] = marks[-1][1]
            marks.pop()

        target = self.budget.tol * max(1.0, 2.0 * self.n)
        integ = PanelIntegrator(tol=1.0, max_depth=min(self.budget.max_depth, 30))
        total = 0.0

        def add_panel(a, tag_a, b, tag_b):
            nonlocal total
            width = b - a
            if width <= 1e-12:
                return
            if isinstance(tag_a, _SingularModel) and isinstance(tag_b, _SingularModel):
                mid = 0.5 * (a + b)
                add_panel(a, tag_a, mid, None)
                add_panel(mid, None, b, tag_b)
                return
            if isinstance(tag_b, _SingularModel) or (
                not isinstance(tag_a, _SingularModel) and tag_b is not None and tag_a is None
            ):
                # anchor at the right endpoint: mirror offsets
                anchor, sign, tag = b, -1.0, tag_b
            else:
                anchor, sign, tag = a, 1.0, tag_a
            model = tag if isinstance(tag, _SingularModel) else None
            power = 4 if model is not None else (2 if tag is not None else 1)
            state = {"warm": None, "off": None}

            def f(offsets):
                order = np.argsort(offsets)
                out = np.empty(len(offsets))
                warm = state["warm"] if state["off"] is not None else None
                for idx in order:
                    off = offsets[idx]
                    roots, local, dpabs = self._solve(anchor, sign * off, model, warm)
                    warm = local
                    val = self._fsum(roots, dpabs)
                    if model is not None:
                        val -= model.kernel(sign * off)
                    out[idx] = val
                state["warm"] = warm
                state["off"] = offsets[order[-1]] if len(order) else None
                return out

            integ.tol = target * max(width / TWO_PI, 0.05)
            total += integ.integrate(f, width, power=power)
            if model is not None:
                total += model.flank_integral(width)

        for i, (a, tag_a) in enumerate(marks):
            if i + 1 < len(marks):
                b, tag_b = marks[i + 1]
            else:
                b, tag_b = marks[0][0] + TWO_PI, marks[0][1]
            add_panel(a, tag_a, b, tag_b)

        excluded_measure = sum(
            TWO_PI * self.eps_crit * (m + 1) for _zc, m in self.excluded
        )
        err = integ.error + 1e-14 * max(1.0, abs(total))
        result = LengthResult(float(total), float(err), float(excluded_measure), "fiber")
        if integ.exhausted and err > 5.0 * target:
            raise BudgetExceeded("fiber sweep refinement exhausted", result=result)
        return result


def length_fiber(
    p: CoeffPoly, omega: Region | None = None, budget: QuadratureBudget | None = None
) -> LengthResult:
    """Lemniscate length inside omega via the fiber formula."""
    if budget is None:
        budget = QuadratureBudget(tol=1e-9, max_depth=26)
    return _FiberSweep(p, omega, budget).run()


# ---------------------------------------------------------------------------
# radial engine


def _radial_extent(omega: Region):
    box = omega.bounding_box()
    if box is None:
        raise BadParameter("radial formula needs a bounded region")
    x0, x1, y0, y1 = box
    corners = [complex(x0, y0), complex(x0, y1), complex(x1, y0), complex(x1, y1)]
    r_hi = max(abs(c) for c in corners)
    if x0 <= 0.0 <= x1 and y0 <= 0.0 <= y1:
        r_lo = 0.0
    else:
        dx = max(x0, 0.0, -x1)
        dy = max(y0, 0.0, -y1)
        r_lo = float(np.hypot(dx, dy))
    return r_lo, r_hi


ANGLE_TOL = 1e-12


def length_radial(
    p: CoeffPoly, omega: Region, budget: QuadratureBudget | None = None
) -> LengthResult:
    """Lemniscate length inside omega via circle intersections per radius."""
    if budget is None:
        budget = QuadratureBudget(tol=1e-7, max_depth=18, samples_1d=64)
    n = p.degree
    coeffs_rev = p.array()[::-1]
    dcoeffs_rev = p.deriv_array()[::-1]
    zetas = critical_points_of(p)
    eps_crit = EPS_CRIT_FACTOR * max([1.0] + [abs(z) for z in zetas])
    excluded_measure = 0.0
    r_lo, r_hi = _radial_extent(omega)
    if r_lo < eps_crit and bool(np.any(omega.contains(np.array([0.0 + 0j])))):
        r_lo = max(r_lo, eps_crit)
        excluded_measure += TWO_PI * eps_crit * n
    if r_hi <= r_lo:
        return LengthResult(0.0, 0.0, excluded_measure, "radial")
    excluded_clusters = []
    for z in zetas:
        if abs(abs(np.polyval(coeffs_rev, z)) - 1.0) < 0.05 and bool(
            np.any(omega.contains(np.array([z])))
        ):
            if not any(abs(z - w) < 1e-9 for w in excluded_clusters):
                excluded_clusters.append(complex(z))
    excluded_measure += TWO_PI * eps_crit * len(excluded_clusters)

    def section_points(r):
        sec = circle_intersections(p, r)
        if sec.full_circle:
            return None
        pts = np.asarray(sec.points, dtype=complex)
        if len(pts) == 0:
            return pts
        keep = np.asarray(omega.contains(pts), dtype=bool)
        for zc in excluded_clusters:
            keep &= np.abs(pts - zc) > eps_crit
        if len(zetas):
            dmin = np.min(np.abs(pts[:, None] - zetas[None, :]), axis=1)
            keep &= dmin > 1e-9
        return pts[keep]

    # breakpoints where the intersection count changes
    m0 = max(16, budget.samples_1d)
    grid = np.linspace(r_lo, r_hi, m0 + 1)
    counts = []
    for r in grid:
        pts = section_points(r)
        counts.append(-1 if pts is None else len(pts))
    breaks = [r_lo, r_hi]
    for k in range(m0):
        if counts[k] == counts[k + 1]:
            continue
        lo, hi = grid[k], grid[k + 1]
        clo = counts[k]
        while hi - lo > 1e-6 * max(1.0, r_hi):
            mid = 0.5 * (lo + hi)
            pts = section_points(mid)
            cm = -1 if pts is None else len(pts)
            if cm == clo:
                lo = mid
            else:
                hi = mid
        breaks.append(0.5 * (lo + hi))
    breaks = sorted(set(breaks))

    def integrand_at(r):
        pts = section_points(r)
        if pts is None:
            # entire circle on the lemniscate: contributes the circle length
            # density 2*pi*r per unit radius in a measure-zero set; treat as 0
            return 0.0
        if len(pts) == 0:
            return 0.0
        pv = np.polyval(coeffs_rev, pts)
        dv = np.polyval(dcoeffs_rev, pts)
        ratio = pv / (pts * dv)
        s = np.abs(np.sin(np.angle(ratio)))
        if np.any(s < ANGLE_TOL):
            raise TransversalityFailure(f"tangential intersection at r={r}")
        return float(np.sum(1.0 / s))

    integ = PanelIntegrator(tol=1.0, max_depth=budget.max_depth)
    total = 0.0
    target = budget.tol * max(1.0, 2.0 * n * (r_hi - r_lo))
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a < 1e-9:
            continue
        mid = 0.5 * (a + b)
        integ.tol = target * max((b - a) / max(r_hi - r_lo, 1e-12), 0.05) * 0.5
        # sqrt substitution anchored at each breakpoint (tips are sqrt-singular)
        def f_lo(offs):
            return np.array([integrand_at(a + o) for o in offs])

        def f_hi(offs):
            return np.array([integrand_at(b - o) for o in offs])

        total += integ.integrate(f_lo, mid - a, power=2)
        total += integ.integrate(f_hi, b - mid, power=2)
    err = integ.error + 1e-14 * max(1.0, abs(total))
    result = LengthResult(float(total), float(err), float(excluded_measure), "radial")
    if integ.exhausted and err > 5.0 * target:
        raise BudgetExceeded("radial sweep refinement exhausted", result=result)
    return result


# ---------------------------------------------------------------------------
# predictor-corrector tracing


def trace_lemniscate(
    p: CoeffPoly, level: float = 1.0, budget: QuadratureBudget | None = None
) -> Trace:
    """Trace all components of {|p| = level} as polylines."""
    if level <= 0:
        raise BadParameter("level must be positive")
    if budget is None:
        budget = QuadratureBudget(tol=1e-5, max_depth=12)
    n = p.degree
    coeffs_rev = p.array()[::-1]
    dcoeffs_rev = p.deriv_array()[::-1]
    ddc = p.deriv_array()
    ddcoeffs_rev = (np.arange(1, len(ddc)) * ddc[1:])[::-1] if len(ddc) > 1 else np.array([0.0])
    zetas = critical_points_of(p)
    crit_on_curve = [
        complex(z)
        for z in zetas
        if abs(abs(np.polyval(coeffs_rev, z)) - level) < 1e-6 * max(1.0, level)
    ]

    def pval(z):
        return np.polyval(coeffs_rev, z)

    def dval(z):
        return np.polyval(dcoeffs_rev, z)

    def ddval(z):
        return np.polyval(ddcoeffs_rev, z)

    ctol = 1e-9 * max(1.0, level)

    def correct(z, max_iter=25):
        for _ in range(max_iter):
            pv = pval(z)
            g = (pv * np.conj(pv)).real - level * level
            grad = 2.0 * pv * np.conj(dval(z))
            g2 = (grad * np.conj(grad)).real
            if g2 < 1e-280:
                return None
            z = z - g * grad / g2
            if abs(abs(pval(z)) - level) <= ctol:
                return z
        return None

    # seeds
    seeds = []
    for alpha in (0.0, pi / 2.0, pi, 1.5 * pi):
        c = p.array()
        c[0] -= level * np.exp(1j * alpha)
        roots, _, _ = aberth(c)
        seeds.extend(complex(z) for z in roots)
    for r in (0.25, 0.5, 0.75, 1.0, 1.25, 1.5):
        try:
            sec = circle_intersections(p, r * max(1.0, level ** (1.0 / n)))
        except Exception:
            continue
        if not sec.full_circle:
            seeds.extend(sec.points)
    cleaned = []
    for s in seeds:
        zs = correct(complex(s))
        if zs is None:
            continue
        if all(abs(zs - t) > 1e-7 for t in cleaned):
            cleaned.append(complex(zs))

    max_turn = np.sqrt(24.0 * max(budget.tol, 1e-8))
    components = []
    closed_flags = []
    critical_flags = []
    visited = np.zeros(0, dtype=complex)

    def near_visited(z):
        return visited.size > 0 and float(np.min(np.abs(visited - z))) < 0.03

    for seed in cleaned:
        if near_visited(seed):
            continue
        verts = [seed]
        z = seed
        direction = None
        crossed = False
        closed = False
        h = 0.02
        max_steps = 4000 * (n + 4)
        step_idx = 0
        while step_idx < max_steps:
            step_idx += 1
            pv = pval(z)
            dv = dval(z)
            if abs(dv) < 1e-12:
                if direction is None:
                    break
                z2 = correct(z + 0.01 * direction)
                if z2 is None:
                    break
                z = z2
                verts.append(z)
                continue
            tangent = 1j * pv * np.conj(dv)
            tangent /= abs(tangent)
            if direction is not None and (tangent * np.conj(direction)).real < 0:
                tangent = -tangent
            ddv = ddval(z)
            h_cap = 0.05
            if abs(ddv) > 1e-300:
                h_cap = min(h_cap, 0.5 * abs(pv) * abs(dv) / abs(ddv))
            h = min(h, h_cap)
            ok = None
            for _ in range(30):
                cand = correct(z + h * tangent)
                if cand is not None and abs(cand - z) < 3.0 * h + 1e-12:
                    ok = cand
                    break
                h *= 0.5
                if h < 1e-9:
                    break
            if ok is None:
                # stalled; if a critical point lies ahead, jump through it
                near = [zc for zc in crit_on_curve if abs(z - zc) < 0.05]
                if near:
                    zc = near[0]
                    jump = correct(2.0 * zc - z)
                    if jump is not None and abs(jump - z) > 1e-9:
                        crossed = True
                        verts.append(zc)
                        direction = jump - zc
                        direction /= abs(direction)
                        z = jump
                        verts.append(z)
                        h = 0.01
                        continue
                break  # split component, flagged below
            new_dir = ok - z
            if abs(new_dir) > 0:
                new_dir /= abs(new_dir)
            # turn-based step adaptation: keep per-segment turning ~ max_turn
            if direction is not None:
                turn = abs(np.angle(new_dir / direction))
                if turn > 2.5 * max_turn and h > 2e-6:
                    h *= 0.5
                    continue  # retry from the same z with a shorter step
                grow = max_turn / max(turn, 1e-12)
                h = min(h * min(max(grow, 0.5), 1.4), 0.05)
            direction = new_dir
            z = ok
            verts.append(z)
            for zc in crit_on_curve:
                if abs(z - zc) < 1e-4:
                    crossed = True
            if step_idx > 4 and abs(z - seed) < 0.6 * max(h, 1e-4):
                closed = True
                break
        if len(verts) > 2:
            components.append(verts)
            closed_flags.append(closed)
            critical_flags.append(crossed or (not closed))
            visited = np.concatenate([visited, np.asarray(verts, dtype=complex)])
    return Trace(components, closed_flags, critical_flags)


def trace_length(trace: Trace) -> float:
    return trace.total_length()


def length_trace(
    p: CoeffPoly, omega: Region | None = None, budget: QuadratureBudget | None = None
) -> LengthResult:
    """Length via tracing; the omega filter drops vertices outside the region."""
    tr = trace_lemniscate(p, 1.0, budget)
    if omega is None or isinstance(omega, WholePlane):
        return LengthResult(tr.total_length(), 1e-3 * max(1.0, tr.total_length()), 0.0, "trace")
    total = 0.0
    for verts, closed in zip(tr.components, tr.closed_flags):
        v = np.asarray(verts, dtype=complex)
        if closed:
            v = np.append(v, v[0])
        inside = np.asarray(omega.contains(v), dtype=bool)
        segs = np.abs(np.diff(v))
        pair_in = inside[:-1] & inside[1:]
        half = inside[:-1] ^ inside[1:]
        total += float(np.sum(segs[pair_in]) + 0.5 * np.sum(segs[half]))
    return LengthResult(total, 2e-3 * max(1.0, total), 0.0, "trace")


# ---------------------------------------------------------------------------
# exports


def trace_to_csv(trace: Trace) -> str:
    lines = ["component_id,vertex_index,re,im"]
    for ci, verts in enumerate(trace.components):
        for vi, z in enumerate(verts):
            z = complex(z)
            lines.append(f"{ci},{vi},{z.real:.17g},{z.imag:.17g}")
    return "\n".join(lines) + "\n"


def trace_to_svg(trace: Trace, extent: float = 1.6, size: int = 640) -> str:
    """Self-contained SVG polyline rendering, viewBox [-extent, extent]^2."""
    vb = f"{-extent} {-extent} {2*extent} {2*extent}"
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="{vb}">',
        f'<rect x="{-extent}" y="{-extent}" width="{2*extent}" height="{2*extent}" '
        'fill="white"/>',
    ]
    for verts, closed in zip(trace.components, trace.closed_flags):
        pts = " ".join(f"{complex(z).real:.6g},{-complex(z).imag:.6g}" for z in verts)
        tag = "polygon" if closed else "polyline"
        parts.append(
            f'<{tag} points="{pts}" fill="none" stroke="#1f4e79" stroke-width="0.012"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
