"""Coupled-system solver: damped Picard over per-population scalar solves.

Each scalar problem keeps the competitors frozen, so it is a minimal-operator
equation with a nonnegative zeroth-order coefficient, relaxed in explicit
pseudo-time with a CFL-limited step.  The outer loop re-freezes, mixes with a
damping weight, and stops on the true coupled residual.  A descending
epsilon schedule reuses each converged state as the next warm start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .geometry import DomainMask, Grid, ScalarField
from .pucci import Ellipticity, core_hessians, extremal_of_hessian

__all__ = [
    "SystemState",
    "SolveConfig",
    "InnerResult",
    "solve_component",
    "fixed_point_solve",
    "residual",
    "epsilon_continuation",
    "unclamped_drift",
    "LOG_HEADER",
]

LOG_HEADER = "epsilon,outer_iter,component,residual,inner_iters"


@dataclass(frozen=True)
class SolveConfig:
    inner_tol: float = 2e-7
    outer_tol: float = 1e-6
    max_inner: int = 400_000
    max_outer: int = 200
    cfl_safety: float = 0.9
    damping: float = 1.0

    def __post_init__(self) -> None:
        if not (self.inner_tol > 0.0 and self.outer_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration caps must be >= 1")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")


@dataclass(frozen=True)
class SystemState:
    """Converged or in-progress fields of all populations at one epsilon."""

    epsilon: float
    fields: tuple[ScalarField, ...]
    residuals: tuple[float, ...]
    outer_iters: int
    inner_iters: int
    converged: bool

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if len(self.fields) == 0:
            raise ValueError("state needs at least one population")
        if len(self.residuals) != len(self.fields):
            raise ValueError("one residual per population required")

    @property
    def d(self) -> int:
        return len(self.fields)

    @property
    def grid(self) -> Grid:
        return self.fields[0].grid


@dataclass(frozen=True)
class InnerResult:
    field: ScalarField
    residual: float
    iterations: int
    converged: bool


@numba.njit(cache=True)
def _relax(u, c, classes, h, lam, Lam, tau, lo, hi, tol, max_steps):
    """Jacobi pseudo-time sweeps of v <- v + tau*(minimal operator - c v).

    Residual is measured on the pre-update iterate; on tolerance hit that
    iterate is returned unstepped.  Non-interior nodes are never written.
    """
    nx, ny = u.shape
    h2 = h * h
    v = u.copy()
    w = u.copy()
    res = 0.0
    steps = 0
    for it in range(max_steps):
        res = 0.0
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                if classes[i, j] != 1:
                    continue
                h11 = (v[i + 1, j] - 2.0 * v[i, j] + v[i - 1, j]) / h2
                h22 = (v[i, j + 1] - 2.0 * v[i, j] + v[i, j - 1]) / h2
                h12 = (
                    v[i + 1, j + 1] - v[i + 1, j - 1] - v[i - 1, j + 1] + v[i - 1, j - 1]
                ) / (4.0 * h2)
                m = 0.5 * (h11 + h22)
                dif = 0.5 * (h11 - h22)
                d = math.sqrt(dif * dif + h12 * h12)
                e1 = m - d
                e2 = m + d
                mop = lam * (e1 + e2)
                if e1 < 0.0:
                    mop += (Lam - lam) * e1
                if e2 < 0.0:
                    mop += (Lam - lam) * e2
                rhs = mop - c[i, j] * v[i, j]
                a = abs(rhs)
                if a > res:
                    res = a
                nv = v[i, j] + tau * rhs
                if nv < lo:
                    nv = lo
                elif nv > hi:
                    nv = hi
                w[i, j] = nv
        steps = it + 1
        if res <= tol:
            return v, res, steps, True
        v, w = w, v
    return v, res, steps, False


def _coupling(state: SystemState, i: int) -> np.ndarray:
    """(1/epsilon) * sum of the competitor fields."""
    total = np.zeros((state.grid.nx, state.grid.ny))
    for j, f in enumerate(state.fields):
        if j != i:
            total += f.values
    return total / state.epsilon


def _clamp_bounds(phi: ScalarField, mask: DomainMask) -> tuple[float, float]:
    bvals = phi.values[mask.boundary]
    lo = min(0.0, float(bvals.min()))
    hi = max(0.0, float(bvals.max()))
    return lo, hi


def _tau(c: np.ndarray, mask: DomainMask, ell: Ellipticity, cfg: SolveConfig) -> float:
    cmax = float(c[mask.interior].max()) if mask.interior.any() else 0.0
    return cfg.cfl_safety / (4.0 * ell.Lam / mask.grid.h**2 + cmax)


def solve_component(
    i: int, state: SystemState, ell: Ellipticity, mask: DomainMask, cfg: SolveConfig
) -> InnerResult:
    """Relax population i against frozen competitors down to inner_tol."""
    c = _coupling(state, i)
    lo, hi = _clamp_bounds(state.fields[i], mask)
    v, res, steps, ok = _relax(
        state.fields[i].values.copy(),
        c,
        mask.classes,
        mask.grid.h,
        ell.lam,
        ell.Lam,
        _tau(c, mask, ell, cfg),
        lo,
        hi,
        cfg.inner_tol,
        cfg.max_inner,
    )
    return InnerResult(ScalarField(mask.grid, v), float(res), int(steps), bool(ok))


def residual(state: SystemState, ell: Ellipticity, mask: DomainMask) -> list[float]:
    """Per population, worst node deviation from the coupled equation."""
    out = []
    core = np.s_[1:-1, 1:-1]
    ok = mask.stencil_ok()[core]
    for i, f in enumerate(state.fields):
        vals = extremal_of_hessian(*core_hessians(f.values, mask.grid.h), ell, "minus")
        gap = vals - (_coupling(state, i) * f.values)[core]
        out.append(float(np.abs(gap[ok]).max()) if ok.any() else 0.0)
    return out


def _zero_coupling_extension(
    phi: ScalarField, mask: DomainMask, ell: Ellipticity, cfg: SolveConfig
) -> InnerResult:
    lone = SystemState(1.0, (phi,), (math.inf,), 0, 0, False)
    return solve_component(0, lone, ell, mask, cfg)


def fixed_point_solve(
    phi: list[ScalarField],
    epsilon: float,
    ell: Ellipticity,
    mask: DomainMask,
    cfg: SolveConfig = SolveConfig(),
    init: SystemState | None = None,
    log: list | None = None,
) -> SystemState:
    """Picard iteration on the frozen-competitor map until the coupled
    residual of every population drops to outer_tol.

    Without a warm start the first iterate extends each boundary datum by
    its uncoupled solve.  Damping begins at the configured weight and is
    halved whenever the worst residual grows on two consecutive passes.
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    d = len(phi)
    if d == 0:
        raise ValueError("at least one population required")
    inner_total = 0
    if init is None:
        ext = [_zero_coupling_extension(p, mask, ell, cfg) for p in phi]
        inner_total += sum(e.iterations for e in ext)
        fields = tuple(e.field for e in ext)
    else:
        if init.d != d:
            raise ValueError(f"warm start has {init.d} populations, data has {d}")
        fields = init.fields

    state = SystemState(epsilon, fields, (math.inf,) * d, 0, inner_total, False)
    damping = cfg.damping
    history: list[float] = []
    for outer in range(1, cfg.max_outer + 1):
        inner_ok = True
        results = [solve_component(i, state, ell, mask, cfg) for i in range(d)]
        new_fields = []
        for i, r in enumerate(results):
            inner_total += r.iterations
            inner_ok = inner_ok and r.converged
            if damping >= 1.0:
                new_fields.append(r.field)
            else:
                mixed = (1.0 - damping) * state.fields[i].values + damping * r.field.values
                new_fields.append(ScalarField(mask.grid, mixed))
        state = SystemState(epsilon, tuple(new_fields), state.residuals, outer, inner_total, False)
        res = residual(state, ell, mask)
        state = replace(state, residuals=tuple(res))
        worst = max(res)
        if log is not None:
            for i, r in enumerate(results):
                log.append((epsilon, outer, i, res[i], r.iterations))
        if worst <= cfg.outer_tol and inner_ok:
            return replace(state, converged=True)
        history.append(worst)
        if len(history) >= 3 and history[-1] > history[-2] > history[-3]:
            damping = max(damping / 2.0, 1.0 / 64.0)
            history.clear()
    return state


def epsilon_continuation(
    phi: list[ScalarField],
    schedule: list[float],
    ell: Ellipticity,
    mask: DomainMask,
    cfg: SolveConfig = SolveConfig(),
    log: list | None = None,
) -> list[SystemState]:
    """Solve along a strictly decreasing positive epsilon schedule, warm
    starting each solve from the previous state.  Non-convergence at one
    epsilon is recorded on its state and the sweep continues."""
    if len(schedule) == 0:
        raise ValueError("empty epsilon schedule")
    arr = np.asarray(schedule, dtype=np.float64)
    if not np.all(arr > 0.0):
        raise ValueError("epsilon schedule must be positive")
    if len(arr) > 1 and not np.all(np.diff(arr) < 0.0):
        raise ValueError("epsilon schedule must be strictly decreasing")
    states: list[SystemState] = []
    prev: SystemState | None = None
    for eps in arr:
        prev = fixed_point_solve(phi, float(eps), ell, mask, cfg, init=prev, log=log)
        states.append(prev)
    return states


def unclamped_drift(
    state: SystemState,
    i: int,
    ell: Ellipticity,
    mask: DomainMask,
    cfg: SolveConfig = SolveConfig(),
    steps: int = 100,
) -> float:
    """Max node movement of population i after extra unclamped sweeps.

    On a converged state this measures dynamic stability of the maximum
    principle bounds: the clamp should be inactive, so releasing it must not
    let the iterate wander."""
    c = _coupling(state, i)
    u0 = state.fields[i].values.copy()
    v, _, _, _ = _relax(
        u0.copy(),
        c,
        mask.classes,
        mask.grid.h,
        ell.lam,
        ell.Lam,
        _tau(c, mask, ell, cfg),
        -math.inf,
        math.inf,
        -1.0,
        steps,
    )
    return float(np.abs(v - u0).max())
