"""Diagnostics that turn the limit theory into measurements.

Everything here is a read-only pass over converged states or synthetic
fields: segregation metrics, free-boundary sampling, growth and regularity
estimates, the thin-support decay test, the two-population monotonicity
functional, and residuals of the limit system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import DomainMask, ScalarField, oscillation
from .pucci import Ellipticity, core_hessians, extremal_of_hessian
from .solver import SystemState

__all__ = [
    "default_support_delta",
    "support_overlap",
    "interaction_mass",
    "free_boundary_points",
    "GrowthProfile",
    "linear_growth_profile",
    "lipschitz_norm_estimate",
    "HolderEstimate",
    "holder_exponent_estimate",
    "subharmonicity_check",
    "ThinSupportReport",
    "thin_support_decay_check",
    "AcfCurve",
    "acf_functional",
    "LimitResidualReport",
    "limit_residual",
]


def default_support_delta(outer_tol: float, phi_sup: float) -> float:
    """Threshold separating numerical zero from genuine positivity."""
    return max(10.0 * outer_tol, 1e-3 * phi_sup)


def support_overlap(state: SystemState, delta: float) -> float:
    """Area where at least two populations both exceed delta."""
    if delta <= 0.0:
        raise ValueError(f"threshold must be positive, got {delta}")
    above = np.zeros((state.grid.nx, state.grid.ny), dtype=np.int64)
    for f in state.fields:
        above += f.values > delta
    return float((above >= 2).sum()) * state.grid.h**2


def interaction_mass(state: SystemState) -> float:
    """Integral of the pairwise product coupling over the whole grid."""
    total = np.zeros((state.grid.nx, state.grid.ny))
    for i in range(state.d):
        for j in range(i + 1, state.d):
            total += state.fields[i].values * state.fields[j].values
    return float(total.sum()) * state.grid.h**2 / state.epsilon


def free_boundary_points(
    field: ScalarField, mask: DomainMask, delta: float
) -> list[tuple[int, int]]:
    """Interior nodes at or below delta with an axis neighbor above it."""
    if delta <= 0.0:
        raise ValueError(f"threshold must be positive, got {delta}")
    u = field.values
    low = (u <= delta) & mask.interior
    hi = u > delta
    near = np.zeros_like(low)
    near[1:, :] |= hi[:-1, :]
    near[:-1, :] |= hi[1:, :]
    near[:, 1:] |= hi[:, :-1]
    near[:, :-1] |= hi[:, 1:]
    ii, jj = np.nonzero(low & near)
    return [(int(a), int(b)) for a, b in zip(ii, jj)]


@dataclass(frozen=True)
class GrowthProfile:
    """sup over balls around a candidate free-boundary node, per radius."""

    center: tuple[int, int]
    entries: tuple[tuple[float, float, float], ...]  # (R, sup, sup/R)
    skipped: tuple[float, ...]
    slope: float  # fitted C = max ratio

    def csv(self) -> str:
        lines = [f"# linear_growth_profile center={self.center} slope={self.slope:.17g}"]
        lines.append("R,sup,ratio")
        for r, s, q in self.entries:
            lines.append(f"{r:.17g},{s:.17g},{q:.17g}")
        return "\n".join(lines) + "\n"


def linear_growth_profile(
    field: ScalarField, mask: DomainMask, x0: tuple[int, int], radii
) -> GrowthProfile:
    """Tabulate sup_{B_R(x0)} and sup/R; radii whose ball leaves the domain
    are skipped and recorded."""
    grid = field.grid
    cx, cy = grid.x(x0[0]), grid.y(x0[1])
    entries = []
    skipped = []
    for r in sorted(float(r) for r in radii):
        if r < 2.0 * grid.h:
            raise ValueError(f"radius {r} below the 2h resolution floor")
        ball = grid.ball((cx, cy), r)
        if np.any(ball & ~mask.nonexterior):
            skipped.append(r)
            continue
        sup = float(field.values[ball].max())
        entries.append((r, sup, sup / r))
    slope = max((q for _, _, q in entries), default=0.0)
    return GrowthProfile(tuple(x0), tuple(entries), tuple(skipped), slope)


def lipschitz_norm_estimate(
    field: ScalarField, mask: DomainMask, center: tuple[int, int], radius: float
) -> float:
    """Max slope |difference|/h over axis-adjacent node pairs in the ball."""
    grid = field.grid
    ball = grid.ball((grid.x(center[0]), grid.y(center[1])), radius) & mask.nonexterior
    if not ball.any():
        raise ValueError("ball does not meet the domain")
    u = field.values
    best = 0.0
    pair_x = ball[1:, :] & ball[:-1, :]
    if pair_x.any():
        best = max(best, float(np.abs(u[1:, :] - u[:-1, :])[pair_x].max()))
    pair_y = ball[:, 1:] & ball[:, :-1]
    if pair_y.any():
        best = max(best, float(np.abs(u[:, 1:] - u[:, :-1])[pair_y].max()))
    return best / grid.h


@dataclass(frozen=True)
class HolderEstimate:
    """Log-log oscillation fit over dyadic balls."""

    center: tuple[float, float]
    radii: tuple[float, ...]
    oscillations: tuple[float, ...]
    alpha_hat: float
    constant: float
    fit_residual: float
    requested_depth: int
    used_depth: int

    def csv(self) -> str:
        lines = [
            f"# holder_exponent_estimate center=({self.center[0]:.17g},{self.center[1]:.17g})"
            f" alpha={self.alpha_hat:.17g} constant={self.constant:.17g}"
            f" residual={self.fit_residual:.17g} depth={self.used_depth}/{self.requested_depth}"
        ]
        lines.append("radius,oscillation")
        for r, o in zip(self.radii, self.oscillations):
            lines.append(f"{r:.17g},{o:.17g}")
        return "\n".join(lines) + "\n"


def holder_exponent_estimate(
    field: ScalarField, mask: DomainMask, center: tuple[float, float], k_max: int
) -> HolderEstimate:
    """Fit osc(B_r) ~ C r^alpha over r = 2^-1 .. 2^-k_max around a point.

    Balls narrower than 4h across are dropped (depth reduced), as are zero
    oscillations, which carry no log-log information."""
    if k_max < 2:
        raise ValueError(f"need at least two dyadic levels, got k_max={k_max}")
    grid = field.grid
    used = k_max
    while used >= 2 and 2.0 ** (-used) < 2.0 * grid.h:
        used -= 1
    if used < 2:
        raise ValueError(f"grid spacing {grid.h} cannot resolve two dyadic levels")
    radii = [2.0**-k for k in range(1, used + 1)]
    oscs = [oscillation(field, mask, center, r) for r in radii]
    keep = [(r, o) for r, o in zip(radii, oscs) if o > 0.0]
    if len(keep) < 2:
        raise ValueError("fewer than two nonzero oscillations; exponent undefined")
    lr = np.log([r for r, _ in keep])
    lo = np.log([o for _, o in keep])
    slope, intercept = np.polyfit(lr, lo, 1)
    fit_res = float(np.sqrt(np.mean((lo - (slope * lr + intercept)) ** 2)))
    return HolderEstimate(
        (float(center[0]), float(center[1])),
        tuple(radii),
        tuple(oscs),
        float(slope),
        float(math.exp(intercept)),
        fit_res,
        k_max,
        used,
    )


def subharmonicity_check(field: ScalarField, mask: DomainMask) -> float:
    """Minimum of the 5-point Laplacian over stencil-complete nodes."""
    u = field.values
    h2 = field.grid.h ** 2
    core = np.s_[1:-1, 1:-1]
    lap = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * u[core]) / h2
    ok = mask.stencil_ok()[core]
    if not ok.any():
        raise ValueError("no stencil-complete interior node")
    return float(lap[ok].min())


@dataclass(frozen=True)
class ThinSupportReport:
    """Outcome of the thin-support decay bound."""

    eps0: float
    support_fraction: float
    sup_ball: float
    sup_half_ball: float
    bound: float
    passed: bool

    def csv(self) -> str:
        return (
            f"# thin_support_decay_check eps0={self.eps0:.17g}\n"
            "support_fraction,sup_ball,sup_half_ball,bound,pass\n"
            f"{self.support_fraction:.17g},{self.sup_ball:.17g},"
            f"{self.sup_half_ball:.17g},{self.bound:.17g},"
            f"{'PASS' if self.passed else 'FAIL'}\n"
        )


def thin_support_decay_check(
    field: ScalarField, mask: DomainMask, center: tuple[float, float], eps0: float
) -> ThinSupportReport:
    """Decay bound for nonnegative fields with small support fraction.

    Hypotheses are hard errors naming what failed: the field must be
    nonnegative, normalized to at most 1 on the unit ball around the center,
    and positive on at most an eps0 fraction of that ball's nodes.  The
    conclusion checked is sup over the half ball <= eps0 * 4, with an h-size
    allowance for the discrete boundary."""
    if not (0.0 < eps0 < 1.0):
        raise ValueError(f"eps0 must lie in (0, 1), got {eps0}")
    grid = field.grid
    ball = grid.ball(center, 1.0) & mask.nonexterior
    if not ball.any():
        raise ValueError("hypothesis failed: unit ball misses the domain")
    vals = field.values[ball]
    if float(vals.min()) < 0.0:
        raise ValueError("hypothesis failed: field takes negative values")
    sup_ball = float(vals.max())
    if sup_ball > 1.0 + 1e-12:  # 1e-12: roundoff allowance on the normalization
        raise ValueError(f"hypothesis failed: sup over the unit ball is {sup_ball} > 1")
    frac = float((vals > 0.0).sum()) / float(ball.sum())
    if frac > eps0:
        raise ValueError(
            f"hypothesis failed: support fraction {frac:.6g} exceeds eps0={eps0}"
        )
    half = grid.ball(center, 0.5) & mask.nonexterior
    sup_half = float(field.values[half].max()) if half.any() else 0.0
    bound = eps0 * 4.0 * (1.0 + 4.0 * grid.h)
    return ThinSupportReport(eps0, frac, sup_ball, sup_half, bound, sup_half <= bound)


@dataclass(frozen=True)
class AcfCurve:
    """Two-factor monotonicity functional sampled over radii."""

    center: tuple[float, float]
    radii: tuple[float, ...]
    values: tuple[float, ...]
    factors_u: tuple[float, ...]
    factors_v: tuple[float, ...]
    bound_estimate: float

    def csv(self) -> str:
        lines = [
            f"# acf_functional center=({self.center[0]:.17g},{self.center[1]:.17g})"
            f" bound={self.bound_estimate:.17g}"
        ]
        lines.append("rho,J,factor_u,factor_v")
        for r, j, a, b in zip(self.radii, self.values, self.factors_u, self.factors_v):
            lines.append(f"{r:.17g},{j:.17g},{a:.17g},{b:.17g}")
        return "\n".join(lines) + "\n"


def _one_factor(
    vals: np.ndarray,
    own: np.ndarray,
    straddle: np.ndarray,
    dist: np.ndarray,
    rho: float,
    h: float,
) -> float:
    """(1/rho^2) integral of |grad|^2 over the majority region of one field.

    Central differences away from the interface; at straddling nodes the
    gradient is one-sided into the node's own side and the cell carries half
    weight, which balances the half cell the sharp interface cuts away."""
    gx_c = np.zeros_like(vals)
    gy_c = np.zeros_like(vals)
    gx_c[1:-1, :] = (vals[2:, :] - vals[:-2, :]) / (2.0 * h)
    gy_c[:, 1:-1] = (vals[:, 2:] - vals[:, :-2]) / (2.0 * h)

    fwd_x = np.zeros_like(vals)
    bwd_x = np.zeros_like(vals)
    fwd_x[:-1, :] = np.abs(vals[1:, :] - vals[:-1, :]) / h
    bwd_x[1:, :] = fwd_x[:-1, :]
    fwd_y = np.zeros_like(vals)
    bwd_y = np.zeros_like(vals)
    fwd_y[:, :-1] = np.abs(vals[:, 1:] - vals[:, :-1]) / h
    bwd_y[:, 1:] = fwd_y[:, :-1]

    sq_central = gx_c**2 + gy_c**2
    sq_onesided = np.maximum(fwd_x, bwd_x) ** 2 + np.maximum(fwd_y, bwd_y) ** 2
    sq = np.where(straddle, sq_onesided, sq_central)

    w = np.clip((rho - dist) / h + 0.5, 0.0, 1.0)
    w = w * np.where(straddle, 0.5, 1.0) * own
    return float((w * sq).sum()) * h * h / (rho * rho)


def acf_functional(
    u: ScalarField,
    v: ScalarField,
    mask: DomainMask,
    center: tuple[float, float],
    radii,
) -> AcfCurve:
    """Product of the two scaled Dirichlet factors around a shared center.

    Each factor integrates its own function's squared gradient over the
    region where that function dominates the other; ties split between both.
    A pair in which one function dominates wherever the other is positive
    has genuinely overlapping supports and is rejected."""
    grid = u.grid
    if v.grid is not grid and (v.grid != grid):
        raise ValueError("fields live on different grids")
    rs = sorted(float(r) for r in radii)
    if not rs:
        raise ValueError("no radii given")
    if rs[0] < 4.0 * grid.h:
        raise ValueError(f"radius {rs[0]} below the 4h resolution floor")
    X, Y = grid.meshes()
    dist = np.hypot(X - center[0], Y - center[1])
    outer = dist <= rs[-1] + grid.h
    if np.any(outer & ~mask.nonexterior):
        raise ValueError("largest ball reaches the exterior")

    U, V = u.values, v.values
    if float(U.min()) < 0.0 or float(V.min()) < 0.0:
        raise ValueError("fields must be nonnegative")

    bound = 4.0 / rs[-1] ** 8 * (float((U * U + V * V).sum()) * grid.h**2) ** 2

    ball_max = dist <= rs[-1]
    if float(U[ball_max].max()) == 0.0 or float(V[ball_max].max()) == 0.0:
        zero = tuple(0.0 for _ in rs)
        return AcfCurve(
            (float(center[0]), float(center[1])), tuple(rs), zero, zero, zero, bound
        )

    own_u = U >= V
    own_v = V >= U
    if not (own_u & ~own_v & ball_max).any() or not (own_v & ~own_u & ball_max).any():
        raise ValueError(
            "overlapping supports: one field dominates the whole ball, "
            "the functional presumes a segregated pair"
        )

    def flips(own: np.ndarray) -> np.ndarray:
        f = np.zeros_like(own)
        f[1:, :] |= own[1:, :] & ~own[:-1, :]
        f[:-1, :] |= own[:-1, :] & ~own[1:, :]
        f[:, 1:] |= own[:, 1:] & ~own[:, :-1]
        f[:, :-1] |= own[:, :-1] & ~own[:, 1:]
        return f

    straddle_u = flips(own_u)
    straddle_v = flips(own_v)

    js, fus, fvs = [], [], []
    for rho in rs:
        fu = _one_factor(U, own_u, straddle_u, dist, rho, grid.h)
        fv = _one_factor(V, own_v, straddle_v, dist, rho, grid.h)
        fus.append(fu)
        fvs.append(fv)
        js.append(fu * fv)
    return AcfCurve(
        (float(center[0]), float(center[1])),
        tuple(rs),
        tuple(js),
        tuple(fus),
        tuple(fvs),
        bound,
    )


@dataclass(frozen=True)
class LimitResidualReport:
    """Residuals of the limit system on a converged state."""

    delta: float
    deep_residuals: tuple[float, ...]  # per population, max |M-(u_i)| deep inside
    deep_couplings: tuple[float, ...]  # per population, max coupling deep inside
    supersolution_max: float  # max over i, nodes of M-(u_i - sum others)

    @property
    def deep_residual(self) -> float:
        return max(self.deep_residuals)

    @property
    def deep_coupling(self) -> float:
        return max(self.deep_couplings)

    def csv(self) -> str:
        lines = [
            f"# limit_residual delta={self.delta:.17g}"
            f" supersolution_max={self.supersolution_max:.17g}"
        ]
        lines.append("component,deep_residual,deep_coupling")
        for i, (r, c) in enumerate(zip(self.deep_residuals, self.deep_couplings)):
            lines.append(f"{i},{r:.17g},{c:.17g}")
        return "\n".join(lines) + "\n"


def limit_residual(
    state: SystemState, ell: Ellipticity, mask: DomainMask, delta: float
) -> LimitResidualReport:
    """Measure how close a state is to the segregated limit system.

    Deep inside each population's support (whole stencil above delta) the
    minimal operator should vanish; everywhere, each u_i minus the sum of
    its competitors should stay a supersolution."""
    if delta <= 0.0:
        raise ValueError(f"threshold must be positive, got {delta}")
    h = mask.grid.h
    core = np.s_[1:-1, 1:-1]
    ok = mask.stencil_ok()[core]
    total = np.zeros((state.grid.nx, state.grid.ny))
    for f in state.fields:
        total += f.values

    deep_res, deep_cpl = [], []
    super_max = -math.inf
    for i, f in enumerate(state.fields):
        u = f.values
        above = u > delta
        deep = ok.copy()
        for di in (0, 1, 2):
            for dj in (0, 1, 2):
                deep &= above[di : above.shape[0] - 2 + di, dj : above.shape[1] - 2 + dj]
        if deep.any():
            vals = extremal_of_hessian(*core_hessians(u, h), ell, "minus")
            deep_res.append(float(np.abs(vals[deep]).max()))
            cpl = (u * (total - u))[core] / state.epsilon
            deep_cpl.append(float(cpl[deep].max()))
        else:
            deep_res.append(0.0)
            deep_cpl.append(0.0)
        diff = 2.0 * u - total  # u_i - sum_{k != i} u_k
        svals = extremal_of_hessian(*core_hessians(diff, h), ell, "minus")
        if ok.any():
            super_max = max(super_max, float(svals[ok].max()))
    return LimitResidualReport(
        delta, tuple(deep_res), tuple(deep_cpl), float(super_max)
    )
