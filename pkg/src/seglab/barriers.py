"""Closed-form radial ring barriers and their discrete sign verification.

Both barriers live on the ring a*r/b <= |x| <= r and are powers of the
radius: the subsolution drops from r*M at the inner rim to 0 at the outer
one and keeps the minimal operator nonnegative, the supersolution mirrors
it.  Everything is stored as coefficients so boundary values and normal
derivatives come out at machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pucci import Ellipticity, core_hessians, extremal_of_hessian

__all__ = [
    "BarrierSpec",
    "RadialProfile",
    "BarrierReport",
    "min_alpha",
    "subsolution_barrier",
    "supersolution_barrier",
    "verify_barrier",
    "REPORT_HEADER",
]

_ALPHA_FLOOR_SHIFT = 1e-9

REPORT_HEADER = "kind,a,b,alpha,lambda,Lambda,n,h,worst_violation,pass"


def min_alpha(ell: Ellipticity, n: int) -> float:
    """Smallest admissible ring-barrier exponent for the given ellipticity."""
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    return max((ell.Lam * (n - 1) - ell.lam) / ell.lam, n - 2 + _ALPHA_FLOOR_SHIFT)


@dataclass(frozen=True)
class BarrierSpec:
    """Ring barrier parameters.

    Structural constraints (positive sizes, a < b) are enforced on
    construction; the exponent admissibility needed for the sign property is
    a separate query so that deliberately inadmissible profiles can still be
    built for negative controls.
    """

    M: float
    r: float
    a: float
    b: float
    alpha: float
    ell: Ellipticity
    n: int = 2

    def __post_init__(self) -> None:
        if not (self.M > 0.0 and math.isfinite(self.M)):
            raise ValueError(f"amplitude must be positive, got {self.M}")
        if not (self.r > 0.0 and math.isfinite(self.r)):
            raise ValueError(f"outer scale must be positive, got {self.r}")
        if not (0.0 < self.a < self.b):
            raise ValueError(f"ring shape needs 0 < a < b, got a={self.a}, b={self.b}")
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"exponent must be positive, got {self.alpha}")
        if self.n < 2:
            raise ValueError(f"dimension must be >= 2, got {self.n}")

    @property
    def inner_radius(self) -> float:
        return self.a * self.r / self.b

    @property
    def m2(self) -> float:
        return self.a**self.alpha / (self.b**self.alpha - self.a**self.alpha)

    def is_admissible(self) -> bool:
        return self.alpha >= min_alpha(self.ell, self.n)


@dataclass(frozen=True)
class RadialProfile:
    """psi(|x|) = M * r * (m1 + m2 * (|x|/r)^(-alpha)), with declared rim data."""

    kind: str  # "sub" or "super"
    spec: BarrierSpec
    m1: float
    m2: float
    inner_value: float
    outer_value: float
    c: float  # normal-derivative constant at the declared rim, psi' = c*M there

    def value(self, s):
        """Evaluate psi at radius s (scalar or array), s > 0."""
        y = np.asarray(s, dtype=np.float64) / self.spec.r
        return self.spec.M * self.spec.r * (self.m1 + self.m2 * y ** (-self.spec.alpha))

    def slope(self, s):
        """Radial derivative psi'(s)."""
        y = np.asarray(s, dtype=np.float64) / self.spec.r
        return -self.spec.M * self.spec.alpha * self.m2 * y ** (-self.spec.alpha - 1.0)

    def field_at(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.value(np.hypot(x, y))


def _declared_rims(kind: str, spec: BarrierSpec) -> tuple[float, float]:
    # (value at inner rim a*r/b, value at outer rim r)
    if kind == "sub":
        return spec.r * spec.M, 0.0
    return 0.0, spec.r * spec.M


def subsolution_barrier(spec: BarrierSpec, require_admissible: bool = True) -> RadialProfile:
    """Decreasing ring barrier: r*M at the inner rim, 0 at |x| = r.

    The outward normal derivative at the outer rim is c*M with
    c = -alpha * a^alpha / (b^alpha - a^alpha).
    """
    if require_admissible and not spec.is_admissible():
        raise ValueError(
            f"exponent {spec.alpha} below the admissible floor "
            f"{min_alpha(spec.ell, spec.n)} for {spec.ell}"
        )
    m2 = spec.m2
    inner, outer = _declared_rims("sub", spec)
    return RadialProfile("sub", spec, -m2, m2, inner, outer, -spec.alpha * m2)


def supersolution_barrier(spec: BarrierSpec, require_admissible: bool = True) -> RadialProfile:
    """Increasing ring barrier: 0 at the inner rim, r*M at |x| = r.

    The normal derivative at the inner rim is c*M with
    c = alpha / ((a/b) - (a/b)^(alpha+1)).
    """
    if require_admissible and not spec.is_admissible():
        raise ValueError(
            f"exponent {spec.alpha} below the admissible floor "
            f"{min_alpha(spec.ell, spec.n)} for {spec.ell}"
        )
    m2 = spec.m2
    inner, outer = _declared_rims("super", spec)
    ratio = spec.a / spec.b
    c = spec.alpha / (ratio - ratio ** (spec.alpha + 1.0))
    return RadialProfile("super", spec, 1.0 + m2, -m2, inner, outer, c)


@dataclass(frozen=True)
class BarrierReport:
    """Result of the discrete sign check on the ring."""

    kind: str
    spec: BarrierSpec
    h: float
    worst_violation: float
    threshold: float
    n_checked: int
    passed: bool

    def csv_row(self) -> str:
        s = self.spec
        return (
            f"{self.kind},{s.a:.17g},{s.b:.17g},{s.alpha:.17g},{s.ell.lam:.17g},"
            f"{s.ell.Lam:.17g},{s.n},{self.h:.17g},{self.worst_violation:.17g},"
            f"{'PASS' if self.passed else 'FAIL'}"
        )


def _fourth_derivative_bound(profile: RadialProfile, rho_min: float) -> float:
    """Upper bound for |psi''''| on radii >= rho_min.

    The profile is M*r*(m1 + m2 y^(-alpha)) in y = s/r, so the fourth radial
    derivative is M * |m2| * alpha(alpha+1)(alpha+2)(alpha+3) * r^(alpha+1)
    * s^(-(alpha+4)), monotone decreasing in s.
    """
    spec = profile.spec
    al = spec.alpha
    coef = abs(profile.m2) * al * (al + 1.0) * (al + 2.0) * (al + 3.0)
    return spec.M * coef * spec.r ** (al + 1.0) * rho_min ** (-(al + 4.0))


def verify_barrier(
    profile: RadialProfile,
    grid_h: float,
    extend_inner: bool = False,
) -> BarrierReport:
    """Sign-check the discrete extremal operator of the profile on its ring.

    Samples psi on a Cartesian grid, evaluates the minimal operator for the
    sub kind (which must stay >= 0) or the maximal operator for the super
    kind (<= 0), and compares the worst violation against a second-order
    consistency threshold derived from the fourth radial derivative bound.
    """
    spec = profile.spec
    if spec.n != 2:
        raise ValueError("discrete verification runs on 2-D grids only")
    r, ra = spec.r, spec.inner_radius
    if not grid_h < (r - ra) / 8.0:
        raise ValueError(
            f"ring under-resolved: need h < {(r - ra) / 8.0:.6g}, got {grid_h:.6g}"
        )
    check_inner = 0.5 * ra if extend_inner else ra

    # sample on a square covering the outer circle with stencil margin;
    # nodes well inside the inner hole never enter any checked stencil
    half = r + 3.0 * grid_h
    m = int(math.ceil(half / grid_h))
    coords = np.arange(-m, m + 1) * grid_h
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    R = np.hypot(X, Y)
    eval_floor = max(check_inner - 2.5 * grid_h, 1e-12)
    values = np.where(R >= eval_floor, profile.value(np.maximum(R, eval_floor)), 0.0)

    sign = "minus" if profile.kind == "sub" else "plus"
    vals = extremal_of_hessian(*core_hessians(values, grid_h), spec.ell, sign)
    Rc = R[1:-1, 1:-1]
    # a node is checked when its whole 3x3 stencil stays in the evaluated ring
    stencil_reach = grid_h * math.sqrt(2.0) * 1.0000001
    checked = (Rc >= check_inner) & (Rc <= r) & (Rc - stencil_reach >= eval_floor)
    n_checked = int(checked.sum())
    if n_checked == 0:
        raise ValueError("ring under-resolved: no stencil-complete ring node")

    if profile.kind == "sub":
        worst = max(0.0, -float(vals[checked].min()))
    else:
        worst = max(0.0, float(vals[checked].max()))

    rho_min = max(check_inner - stencil_reach, eval_floor)
    b4 = _fourth_derivative_bound(profile, rho_min)
    threshold = (spec.ell.Lam * spec.n**2 / 3.0) * b4 * grid_h * grid_h
    return BarrierReport(
        profile.kind, spec, grid_h, worst, threshold, n_checked, worst <= threshold
    )
