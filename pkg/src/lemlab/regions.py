"""Region algebra, areas, the |psi| measure, and Riesz potentials.

Regions are trees of primitives (disks, annuli, sublevel sets, potential
superlevel sets) combined with union/intersection/complement.  Every region
supports a pointwise membership test plus a conservative three-valued cell
classifier (inside / outside / boundary), which drives the quadtree
integrators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadParameter
from .polynomials import CoeffPoly

IN, MAYBE, OUT = 1, 0, -1


@dataclass(frozen=True)
class QuadratureBudget:
    """Tolerances and refinement limits for the numerical integrals."""

    tol: float = 1e-6
    max_depth: int = 12
    min_cell: float = 1e-7
    samples_1d: int = 64

    def __post_init__(self):
        if self.tol <= 0:
            raise BadParameter("tol must be positive")
        if self.max_depth > 40:
            raise BadParameter("max_depth must be <= 40")


DEFAULT_BUDGET = QuadratureBudget()


class Region:
    """Base class: membership, cell classification, bounding box."""

    def contains(self, z):
        """Vectorized membership for complex z."""
        raise NotImplementedError

    def classify(self, cx, cy, half):
        """IN/MAYBE/OUT per square cell (centers cx+i*cy, half-width half)."""
        raise NotImplementedError

    def bounding_box(self):
        """(x0, x1, y0, y1) or None when unbounded."""
        raise NotImplementedError

    def union(self, other):
        return Union(self, other)

    def intersect(self, other):
        return Intersection(self, other)

    def complement(self):
        return Complement(self)


def _rect_dist(cx, cy, half, x0, y0):
    """(min, max) distance from point (x0,y0) to the cell squares."""
    dx = np.abs(cx - x0)
    dy = np.abs(cy - y0)
    dmin = np.hypot(np.maximum(dx - half, 0.0), np.maximum(dy - half, 0.0))
    dmax = np.hypot(dx + half, dy + half)
    return dmin, dmax


@dataclass(frozen=True)
class Disk(Region):
    center: complex
    radius: float

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) < self.radius

    def classify(self, cx, cy, half):
        dmin, dmax = _rect_dist(cx, cy, half, self.center.real, self.center.imag)
        out = np.where(dmax <= self.radius, IN, np.where(dmin >= self.radius, OUT, MAYBE))
        return out.astype(np.int8)

    def bounding_box(self):
        c, r = self.center, self.radius
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)


@dataclass(frozen=True)
class Annulus(Region):
    """r1 <= |z - center| < r2."""

    center: complex
    r1: float
    r2: float

    def contains(self, z):
        d = np.abs(np.asarray(z) - self.center)
        return (d >= self.r1) & (d < self.r2)

    def classify(self, cx, cy, half):
        dmin, dmax = _rect_dist(cx, cy, half, self.center.real, self.center.imag)
        inside = (dmin >= self.r1) & (dmax <= self.r2)
        outside = (dmax < self.r1) | (dmin > self.r2)
        return np.where(inside, IN, np.where(outside, OUT, MAYBE)).astype(np.int8)

    def bounding_box(self):
        c, r = self.center, self.r2
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)


class Sublevel(Region):
    """E_R(p) = {z : |p(z)| < R}."""

    def __init__(self, poly: CoeffPoly, level: float):
        if level <= 0:
            raise BadParameter("sublevel threshold must be positive")
        self.poly = poly
        self.level = level
        self._coeffs = poly.array()

    def contains(self, z):
        return np.abs(np.polyval(self._coeffs[::-1], np.asarray(z, dtype=complex))) < self.level

    def classify(self, cx, cy, half):
        # Taylor shift to each cell center: |p| on the cell lies within
        # |p(zc)| ± sum_k |t_k| rho^k, rho the circumradius.
        zc = np.asarray(cx, dtype=complex) + 1j * np.asarray(cy, dtype=complex)
        rho = np.asarray(half, dtype=float) * np.sqrt(2.0)
        n = len(self._coeffs) - 1
        t = np.broadcast_to(self._coeffs[:, None], (n + 1, zc.size)).copy()
        zf = zc.ravel()
        for i in range(n + 1):
            for j in range(n - 1, i - 1, -1):
                t[j] += zf * t[j + 1]
        mags = np.abs(t)
        center = mags[0]
        rr = np.asarray(rho).ravel()
        tail = np.zeros_like(center)
        rp = np.ones_like(rr)
        for k in range(1, n + 1):
            rp = rp * rr
            tail += mags[k] * rp
        inside = (center + tail < self.level)
        outside = (center - tail > self.level)
        res = np.where(inside, IN, np.where(outside, OUT, MAYBE)).astype(np.int8)
        return res.reshape(np.shape(cx))

    def bounding_box(self):
        # Cauchy-style bound: |z| >= 1 + max|c_k| + R  implies |p(z)| > R
        b = 1.0 + float(np.max(np.abs(self._coeffs[:-1]))) + self.level
        return (-b, b, -b, b)


class PotentialSuperlevel(Region):
    """{z : sum_j 1/|z - zeta_j| >= lam} for a finite pole configuration."""

    def __init__(self, poles, lam: float):
        if lam <= 0:
            raise BadParameter("level must be positive")
        self.poles = tuple(complex(z) for z in poles)
        self.lam = lam

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        tot = np.zeros(z.shape, dtype=float)
        for zeta in self.poles:
            d = np.abs(z - zeta)
            with np.errstate(divide="ignore"):
                tot += np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), np.inf)
        return tot >= self.lam

    def classify(self, cx, cy, half):
        lower = np.zeros(np.shape(cx), dtype=float)
        upper = np.zeros(np.shape(cx), dtype=float)
        for zeta in self.poles:
            dmin, dmax = _rect_dist(cx, cy, half, zeta.real, zeta.imag)
            upper += np.where(dmin > 0, 1.0 / np.maximum(dmin, 1e-300), np.inf)
            lower += 1.0 / np.maximum(dmax, 1e-300)
        inside = lower >= self.lam
        outside = upper < self.lam
        return np.where(inside, IN, np.where(outside, OUT, MAYBE)).astype(np.int8)

    def bounding_box(self):
        m = len(self.poles)
        r = m / self.lam
        xs = [z.real for z in self.poles]
        ys = [z.imag for z in self.poles]
        return (min(xs) - r, max(xs) + r, min(ys) - r, max(ys) + r)


@dataclass(frozen=True)
class Union(Region):
    a: Region
    b: Region

    def contains(self, z):
        return self.a.contains(z) | self.b.contains(z)

    def classify(self, cx, cy, half):
        return np.maximum(self.a.classify(cx, cy, half), self.b.classify(cx, cy, half))

    def bounding_box(self):
        ba, bb = self.a.bounding_box(), self.b.bounding_box()
        if ba is None or bb is None:
            return None
        return (min(ba[0], bb[0]), max(ba[1], bb[1]), min(ba[2], bb[2]), max(ba[3], bb[3]))


@dataclass(frozen=True)
class Intersection(Region):
    a: Region
    b: Region

    def contains(self, z):
        return self.a.contains(z) & self.b.contains(z)

    def classify(self, cx, cy, half):
        return np.minimum(self.a.classify(cx, cy, half), self.b.classify(cx, cy, half))

    def bounding_box(self):
        ba, bb = self.a.bounding_box(), self.b.bounding_box()
        if ba is None:
            return bb
        if bb is None:
            return ba
        box = (max(ba[0], bb[0]), min(ba[1], bb[1]), max(ba[2], bb[2]), min(ba[3], bb[3]))
        if box[0] >= box[1] or box[2] >= box[3]:
            return (box[0], box[0], box[2], box[2])
        return box


@dataclass(frozen=True)
class Complement(Region):
    a: Region

    def contains(self, z):
        return ~self.a.contains(z)

    def classify(self, cx, cy, half):
        return (-self.a.classify(cx, cy, half)).astype(np.int8)

    def bounding_box(self):
        return None


class EmptyRegion(Region):
    def contains(self, z):
        return np.zeros(np.shape(z), dtype=bool)

    def classify(self, cx, cy, half):
        return np.full(np.shape(cx), OUT, dtype=np.int8)

    def bounding_box(self):
        return (0.0, 0.0, 0.0, 0.0)


class WholePlane(Region):
    def contains(self, z):
        return np.ones(np.shape(z), dtype=bool)

    def classify(self, cx, cy, half):
        return np.full(np.shape(cx), IN, dtype=np.int8)

    def bounding_box(self):
        return None


def equiv_radius(area_value: float) -> float:
    """Radius of the disk with the given area."""
    if area_value < 0:
        raise BadParameter("area must be nonnegative")
    return float(np.sqrt(area_value / np.pi))


# ---------------------------------------------------------------------------
# quadtree machinery


def _root_cells(region: Region):
    box = region.bounding_box()
    if box is None:
        raise BadParameter("region is unbounded")
    x0, x1, y0, y1 = box
    w = max(x1 - x0, y1 - y0, 1e-12)
    cx = 0.5 * (x0 + x1)
    cy = 0.5 * (y0 + y1)
    half = 0.5 * w
    return np.array([cx]), np.array([cy]), half


def _subdivide(cx, cy, half):
    h = 0.5 * half
    ox = np.concatenate([cx - h, cx + h, cx - h, cx + h])
    oy = np.concatenate([cy - h, cy - h, cy + h, cy + h])
    return ox, oy, h


def area(region: Region, budget: QuadratureBudget = DEFAULT_BUDGET):
    """Quadtree area: (area, error_bound).

    Cells fully inside count fully, boundary cells recurse; at exhaustion
    boundary cells contribute half their area and their full area goes into
    the error bound.  A budget overrun therefore shows up as
    error_bound > tol·area rather than as an exception.
    """
    cx, cy, half = _root_cells(region)
    total = 0.0
    err = 0.0
    depth = 0
    while len(cx):
        cls = region.classify(cx, cy, half)
        inside = cls == IN
        total += float(np.sum(inside)) * (2.0 * half) ** 2
        maybe = cls == MAYBE
        boundary_area = float(np.sum(maybe)) * (2.0 * half) ** 2
        if not np.any(maybe):
            return total, err
        if depth >= budget.max_depth or half <= budget.min_cell or (
            depth > 4 and boundary_area <= budget.tol * max(total, 1e-12)
        ):
            total += 0.5 * boundary_area
            err += boundary_area
            return total, err
        cx, cy, half = _subdivide(cx[maybe], cy[maybe], half)
        depth += 1
    return total, err


def _gauss_nodes_2d(k: int):
    x, w = np.polynomial.legendre.leggauss(k)
    X, Y = np.meshgrid(x, x)
    W = np.outer(w, w)
    return X.ravel(), Y.ravel(), W.ravel()


_G3 = _gauss_nodes_2d(3)
_G5 = _gauss_nodes_2d(5)

PSI_EXCLUSION_RADIUS = 1e-4


def _integrate_cells(f, cx, cy, half, poles):
    """Per-cell tensor Gauss; 5x5 within 4 cell-widths of a pole, 3x3 elsewhere."""
    if len(cx) == 0:
        return np.zeros(0)
    vals = np.zeros(len(cx))
    if poles is not None and len(poles):
        zc = cx + 1j * cy
        dmin = np.min(np.abs(zc[:, None] - np.asarray(poles)[None, :]), axis=1)
        near = dmin <= 8.0 * half  # 4 cell-widths
    else:
        near = np.zeros(len(cx), dtype=bool)
    for nodes, mask in ((_G5, near), (_G3, ~near)):
        if not np.any(mask):
            continue
        gx, gy, gw = nodes
        zz = (cx[mask, None] + half * gx[None, :]) + 1j * (cy[mask, None] + half * gy[None, :])
        vals[mask] = half * half * np.sum(gw[None, :] * f(zz), axis=1)
    return vals


def _quadtree_integral(region, f, poles, budget, force_refine_near=None):
    """Common driver for psi_measure / riesz_potential style integrals."""
    cx, cy, half = _root_cells(region)
    total = 0.0
    err = 0.0
    depth = 0
    while len(cx):
        cls = region.classify(cx, cy, half)
        inside = cls == IN
        maybe = cls == MAYBE
        # force refinement near singular points so the Gauss rule sees a
        # resolved integrand there
        if force_refine_near is not None and half > force_refine_near[1]:
            pts = force_refine_near[0]
            if len(pts):
                zc = cx + 1j * cy
                dmin = np.min(np.abs(zc[:, None] - np.asarray(pts)[None, :]), axis=1)
                hot = dmin <= 4.0 * half
                promote = inside & hot
                inside = inside & ~hot
                maybe = maybe | promote
        total += float(np.sum(_integrate_cells(f, cx[inside], cy[inside], half, poles)))
        if not np.any(maybe):
            return total, err
        if depth >= budget.max_depth or half <= budget.min_cell:
            # occupancy-filtered Gauss on leftover boundary cells
            bx, by = cx[maybe], cy[maybe]
            gx, gy, gw = _G3
            zz = (bx[:, None] + half * gx[None, :]) + 1j * (by[:, None] + half * gy[None, :])
            occ = region.contains(zz)
            contrib = half * half * np.sum(gw[None, :] * f(zz) * occ, axis=1)
            bound = half * half * np.sum(gw[None, :] * np.abs(f(zz)), axis=1)
            total += float(np.sum(contrib))
            err += float(np.sum(bound))
            return total, err
        cx, cy, half = _subdivide(cx[maybe], cy[maybe], half)
        depth += 1
    return total, err


def psi_measure(spec, region: Region, budget: QuadratureBudget = DEFAULT_BUDGET):
    """(1/π)·∫_region |psi| dA with analytic accounting for the 1/|z-ζ| poles.

    Returns (value, error_bound).  Exclusion disks of radius 1e-4 around each
    critical point contribute 0 to the value and multiplicity·2·radius to the
    error bound (a rigorous bound on what was skipped).
    """
    zetas = np.asarray(spec.critical_points, dtype=complex)
    eps = PSI_EXCLUSION_RADIUS

    def f(z):
        tot = np.zeros(z.shape, dtype=complex)
        dmin = np.full(z.shape, np.inf)
        for zeta in zetas:
            d = z - zeta
            ad = np.abs(d)
            dmin = np.minimum(dmin, ad)
            safe = np.maximum(ad, 1e-300)
            tot += 1.0 / np.where(ad > 0, d, 1.0) * (ad > 0)
            del safe
        vals = np.abs(tot) / np.pi
        vals[dmin < eps] = 0.0
        return vals

    val, err = _quadtree_integral(
        region, f, zetas, budget, force_refine_near=(zetas, max(eps, budget.min_cell))
    )
    # per-disk skipped mass bound: (1/π)·multiplicity·2π·eps = 2·mult·eps
    uniq: list[complex] = []
    mult: list[int] = []
    for z in zetas:
        for i, u in enumerate(uniq):
            if abs(z - u) < 1e-9:
                mult[i] += 1
                break
        else:
            uniq.append(complex(z))
            mult.append(1)
    for u, m in zip(uniq, mult):
        if np.any(region.contains(np.array([u]))):
            err += 2.0 * m * eps
    return val, err


def riesz_potential(region: Region, z0: complex, budget: QuadratureBudget = DEFAULT_BUDGET):
    """∫_region 1/|z−z0| dA, singularity patched analytically (∫_{D(z0,ε)} = 2πε)."""
    z0 = complex(z0)
    eps = PSI_EXCLUSION_RADIUS

    def f(z):
        d = np.abs(z - z0)
        vals = 1.0 / np.maximum(d, 1e-300)
        vals[d < eps] = 0.0
        return vals

    val, err = _quadtree_integral(
        region, f, np.array([z0]), budget, force_refine_near=(np.array([z0]), max(eps, budget.min_cell))
    )
    # analytic patch if the disk sits inside the region
    probe = z0 + eps * np.exp(2j * np.pi * np.arange(8) / 8)
    if bool(np.all(region.contains(probe))) and bool(region.contains(np.array([z0]))[0]):
        val += 2.0 * np.pi * eps
    else:
        err += 2.0 * np.pi * eps
    return val, err


def psi_density_grid(spec, extent: float, npts: int):
    """Raster of |psi|/π on [-extent, extent]^2 for the heat-map export."""
    xs = np.linspace(-extent, extent, npts)
    ys = np.linspace(-extent, extent, npts)
    X, Y = np.meshgrid(xs, ys)
    Z = X + 1j * Y
    tot = np.zeros(Z.shape, dtype=complex)
    for zeta in spec.critical_points:
        d = Z - zeta
        ad = np.abs(d)
        tot += np.where(ad > 1e-12, 1.0 / np.where(ad > 0, d, 1.0), 0.0)
    return xs, ys, np.abs(tot) / np.pi
