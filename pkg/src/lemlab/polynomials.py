"""Polynomial representations, evaluation, norms, and the built-in example families.

Two coordinate systems coexist: critical-point coordinates (a monic degree-n
polynomial is determined by its n-1 critical points plus the constant term) and
dense monic coefficient form.  Critical-point coordinates are the source of
truth; coefficient form is derived on demand and carries the generating
critical points along as provenance so downstream engines never have to
re-solve for them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import pi

import numpy as np

from .errors import BadParameter, ConfigError, OriginInput, PoleAtZ

# Denominators below this magnitude count as poles (underflow guard, not a
# relative test: psi legitimately takes huge values near critical points).
POLE_TOL = 1e-300


def _mean_zero_tol(zetas) -> float:
    m = max((abs(z) for z in zetas), default=0.0)
    return 1e-12 * max(1.0, m)


@dataclass(frozen=True)
class CriticalSpec:
    """Monic degree-n polynomial as critical multiset plus constant term.

    ``critical_points`` holds the n-1 roots of p' with multiplicity as repeated
    entries.  When ``normalized`` is set, the critical points have mean zero and
    the constant term is a nonpositive real.
    """

    degree: int
    critical_points: tuple
    constant_term: complex
    normalized: bool = False

    def __post_init__(self):
        if self.degree < 1:
            raise BadParameter("degree must be >= 1")
        if len(self.critical_points) != self.degree - 1:
            raise BadParameter(
                f"need {self.degree - 1} critical points, got {len(self.critical_points)}"
            )

    @staticmethod
    def make(degree, critical_points, constant_term, normalized=None):
        """Build a spec, silently re-centering the mean when claiming normalized."""
        zetas = [complex(z) for z in critical_points]
        c0 = complex(constant_term)
        if normalized is None:
            mean = sum(zetas) / len(zetas) if zetas else 0.0
            normalized = (
                abs(mean) <= _mean_zero_tol(zetas)
                and abs(c0.imag) <= 1e-12
                and c0.real <= 1e-12
            )
        if normalized and zetas:
            mean = sum(zetas) / len(zetas)
            if abs(mean) > 0.0:
                zetas = [z - mean for z in zetas]
            c0 = complex(min(c0.real, 0.0), 0.0)
        return CriticalSpec(degree, tuple(zetas), c0, normalized)


@dataclass(frozen=True)
class CoeffPoly:
    """Dense monic coefficient form, c0..cn with cn exactly 1.

    ``critical_points`` is optional provenance: the exact critical multiset the
    polynomial was built from, when known.
    """

    coefficients: tuple
    critical_points: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        c = self.coefficients
        if len(c) < 2:
            raise BadParameter("need degree >= 1")
        if abs(c[-1] - 1.0) > 1e-12:
            raise BadParameter("polynomial must be monic")
        if c[-1] != 1.0:
            object.__setattr__(
                self, "coefficients", tuple(c[:-1]) + (complex(1.0),)
            )

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def array(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=complex)

    def deriv_array(self) -> np.ndarray:
        c = self.array()
        return np.arange(1, len(c)) * c[1:]

    def __call__(self, z):
        return np.polyval(self.array()[::-1], z)

    def deriv(self, z):
        return np.polyval(self.deriv_array()[::-1], z)


@dataclass(frozen=True)
class NormBundle:
    """The deviation-from-z^n-1 norms of a normalized polynomial."""

    l1_dispersion: float
    origin_repulsion: float
    total_size: float
    l2_dispersion: float


@lru_cache(maxsize=512)
def _coeffs_from_spec(spec: CriticalSpec) -> tuple:
    n = spec.degree
    # p'(z) = n * prod(z - zeta); antidifferentiate, constant p(0).
    dcoef = np.array([1.0 + 0j])
    for z in spec.critical_points:
        dcoef = np.convolve(dcoef, np.array([-z, 1.0 + 0j]))
    dcoef = n * dcoef  # dcoef[j] multiplies z^j in p'
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = spec.constant_term
    coeffs[1:] = dcoef / np.arange(1, n + 1)
    coeffs[n] = 1.0
    return tuple(coeffs)


def from_critical_points(spec: CriticalSpec) -> CoeffPoly:
    """Expand p'(z) = n·prod(z−ζ) and antidifferentiate with constant p(0)."""
    return CoeffPoly(_coeffs_from_spec(spec), critical_points=spec.critical_points)


def eval_all(p: CoeffPoly, z: complex):
    """Simultaneous Horner evaluation of (p, p', p'') at z."""
    c = p.coefficients
    b = c[-1]
    d = 0.0 + 0j
    e = 0.0 + 0j
    for k in range(len(c) - 2, -1, -1):
        e = e * z + d
        d = d * z + b
        b = b * z + c[k]
    return b, d, 2.0 * e


def log_derivatives(p: CoeffPoly, z: complex):
    """phi = p'/p and psi = p''/p'.  Raises PoleAtZ on vanishing denominators."""
    pv, dv, ddv = eval_all(p, z)
    if abs(pv) < POLE_TOL:
        raise PoleAtZ(f"p({z}) vanishes")
    if abs(dv) < POLE_TOL:
        raise PoleAtZ(f"p'({z}) vanishes")
    return dv / pv, ddv / dv


def psi_from_spec(spec: CriticalSpec, z):
    """psi via the partial fraction expansion sum 1/(z-zeta)."""
    tot = 0.0 + 0j
    for zeta in spec.critical_points:
        d = z - zeta
        if abs(d) < POLE_TOL:
            raise PoleAtZ(f"z = {z} is a critical point")
        tot += 1.0 / d
    return tot


def norms(spec: CriticalSpec) -> NormBundle:
    """Dispersion, origin repulsion, total size, and the l2 dispersion."""
    l1 = float(sum(abs(z) for z in spec.critical_points))
    l2 = float(sum(abs(z) ** 2 for z in spec.critical_points))
    n = spec.degree
    l0 = n * abs(1.0 + spec.constant_term) ** (1.0 / n)
    return NormBundle(l1, float(l0), l1 + float(l0), l2)


def delta(spec: CriticalSpec, z: complex) -> float:
    """Normalized distance min|z−ζ|/|z| to the critical points."""
    if z == 0:
        raise OriginInput("delta undefined at the origin")
    if not spec.critical_points:
        return float("inf")
    return min(abs(z - zeta) for zeta in spec.critical_points) / abs(z)


def conjugate(p: CoeffPoly) -> CoeffPoly:
    """Coefficient-wise conjugate; satisfies p̃(z̄) = conj(p(z))."""
    crit = None
    if p.critical_points is not None:
        crit = tuple(complex(z).conjugate() for z in p.critical_points)
    return CoeffPoly(tuple(complex(c).conjugate() for c in p.coefficients), crit)


def normalize(p: CoeffPoly):
    """Kill the z^{n-1} coefficient and rotate p(0) onto the nonpositive reals.

    Returns (normalized, shift, rotation) with
    normalized(z) = e^{-in·rotation} · p(e^{i·rotation}·z - shift), rotation in
    [0, 2π/n).  Lemniscate length is invariant under the transformation.
    """
    n = p.degree
    c = p.array()
    shift = c[n - 1] / n
    shifted = _taylor_shift(c, -shift)
    c0 = shifted[0]
    if abs(c0) < 1e-15:
        theta = 0.0
    else:
        theta = (np.angle(c0) - pi) / n
        theta = float(theta % (2.0 * pi / n))
    rot = np.exp(1j * theta)
    out = shifted * rot ** np.arange(n + 1) * np.exp(-1j * n * theta)
    out[n] = 1.0
    out[n - 1] = 0.0
    # force exact normalization invariants
    out[0] = complex(min(out[0].real, 0.0) if abs(out[0].imag) < 1e-9 * max(1.0, abs(out[0])) else out[0])
    crit = None
    if p.critical_points is not None:
        crit = tuple((complex(z) + shift) * np.conj(rot) for z in p.critical_points)
    return CoeffPoly(tuple(out), crit), complex(shift), theta


def _taylor_shift(coeffs, z0):
    """Coefficients of p(z + z0) by synthetic division (exact up to rounding)."""
    t = np.array(coeffs, dtype=complex)
    n = len(t) - 1
    for i in range(n + 1):
        for j in range(n - 1, i - 1, -1):
            t[j] += z0 * t[j + 1]
    return t


def taylor_shift(p: CoeffPoly, z0) -> np.ndarray:
    return _taylor_shift(p.array(), z0)


def family(name: str, n: int, a_or_r: float | None = None) -> CriticalSpec:
    """Built-in families: p0, example1, example2, cassini."""
    if name == "p0":
        if n < 1:
            raise BadParameter("p0 needs n >= 1")
        return CriticalSpec.make(n, (0.0,) * (n - 1), -1.0, normalized=True)
    if name == "example1":
        a = a_or_r
        if n <= 2 or a is None or not (0.0 < a < 1.0):
            raise BadParameter("example1 needs n > 2 and 0 < a < 1")
        zetas = (complex(a), complex(-a)) + (0.0,) * (n - 3)
        return CriticalSpec.make(n, zetas, -1.0, normalized=True)
    if name == "example2":
        a = a_or_r
        if n < 1 or a is None or not (0.0 < a <= 1.0):
            raise BadParameter("example2 needs 0 < a <= 1")
        return CriticalSpec.make(
            n, (0.0,) * (n - 1), -1.0 - (a / n) ** n, normalized=True
        )
    if name == "cassini":
        r = a_or_r
        if n != 2 or r is None or r <= 0:
            raise BadParameter("cassini needs n = 2 and r > 0")
        return CriticalSpec.make(2, (0.0,), -r * r, normalized=True)
    raise BadParameter(f"unknown family {name!r}")


FAMILY_NAMES = ("p0", "example1", "example2", "cassini")


# ---------------------------------------------------------------------------
# JSON schema (consumed/produced by the CLI)


def spec_to_json(spec: CriticalSpec) -> str:
    obj = {
        "degree": spec.degree,
        "critical_points": [[z.real, z.imag] for z in map(complex, spec.critical_points)],
        "constant_term": [complex(spec.constant_term).real, complex(spec.constant_term).imag],
        "normalized": spec.normalized,
    }
    return json.dumps(obj, separators=(", ", ": "))


def spec_from_json(text: str) -> CriticalSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if "coefficients" in obj:
        coeffs = [complex(re, im) for re, im in obj["coefficients"]]
        if not coeffs or coeffs[-1] != 1.0:
            raise ConfigError("coefficient form must be monic (last entry [1,0])")
        # critical points unknown; caller may derive them via the root solver
        raise ConfigError("coefficient form must be loaded with poly_from_json")
    try:
        degree = int(obj["degree"])
        zetas = tuple(complex(re, im) for re, im in obj["critical_points"])
        c0 = complex(*obj["constant_term"])
        normalized = bool(obj.get("normalized", False))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed polynomial JSON: {exc}") from exc
    try:
        return CriticalSpec.make(degree, zetas, c0, normalized=normalized)
    except BadParameter as exc:
        raise ConfigError(str(exc)) from exc


def poly_from_json(text: str) -> CoeffPoly:
    """Load either schema; coefficient form comes back without critical provenance."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if "coefficients" in obj:
        try:
            coeffs = tuple(complex(re, im) for re, im in obj["coefficients"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed coefficients: {exc}") from exc
        if len(coeffs) < 2 or coeffs[-1] != 1.0:
            raise ConfigError("coefficient form must be monic (last entry [1,0])")
        return CoeffPoly(coeffs)
    return from_critical_points(spec_from_json(text))
