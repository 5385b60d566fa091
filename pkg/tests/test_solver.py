import math

import numpy as np
import pytest

from seglab import (
    BoundarySegment,
    Ellipticity,
    ScalarField,
    SolveConfig,
    SystemState,
    build_boundary_data,
    build_disk_domain,
    epsilon_continuation,
    fixed_point_solve,
    residual,
    unclamped_drift,
)

from conftest import antipodal_segments


def solve_single(disk, phi, ell, **kw):
    _, mask = disk
    return fixed_point_solve([phi], 1.0, ell, mask, SolveConfig(**kw))


def test_constant_data_gives_constant_field(disk16, ell12):
    grid, mask = disk16
    vals = np.where(mask.boundary, 0.75, 0.0)
    state = solve_single(disk16, ScalarField(grid, vals), ell12)
    assert state.converged
    u = state.fields[0].values[mask.nonexterior]
    np.testing.assert_allclose(u, 0.75, atol=5e-6)


def test_harmonic_data_reproduced_exactly():
    # lam == Lam: the operator collapses to the 5-point Laplacian, and
    # x^2 - y^2 is discretely harmonic, so the data extends exactly
    grid, mask = build_disk_domain(1.0, 1.0 / 16.0, (0.0, 0.0))
    ell = Ellipticity(1.0, 1.0)
    X, Y = grid.meshes()
    exact = X * X - Y * Y
    phi = ScalarField(grid, np.where(mask.boundary, exact, 0.0))
    state = fixed_point_solve([phi], 1.0, ell, mask, SolveConfig())
    assert state.converged
    err = np.abs(state.fields[0].values - exact)[mask.nonexterior].max()
    assert err < 1e-6


def test_zero_data_zero_solution(disk16, ell12):
    grid, mask = disk16
    state = solve_single(disk16, ScalarField.zeros(grid), ell12)
    assert state.fields[0].values.max() == 0.0
    assert state.residuals[0] == 0.0


def test_two_population_antipodal(disk16, ell12):
    grid, mask = disk16
    phis = build_boundary_data(mask, antipodal_segments(), populations=2)
    log: list = []
    state = fixed_point_solve(phis, 0.3, ell12, mask, SolveConfig(), log=log)
    assert state.converged
    assert max(state.residuals) <= 1e-6
    sup = max(f.values.max() for f in phis)
    for f in state.fields:
        assert f.values.min() >= 0.0
        assert f.values.max() <= sup + 1e-12
    # the data is antipodal, so the populations are mirror images
    u0 = state.fields[0].values
    u1 = state.fields[1].values
    assert np.abs(u0 - u1[::-1, ::-1]).max() < 1e-9
    # log rows carry (epsilon, outer, component, residual, inner steps)
    assert log and all(len(row) == 5 for row in log)
    assert {row[2] for row in log} == {0, 1}


def test_stronger_competitor_suppresses(disk16, ell12):
    _, mask = disk16
    segs_weak = antipodal_segments()
    segs_strong = [
        BoundarySegment(0.0, math.pi, 1.0, 0),
        BoundarySegment(math.pi, 2 * math.pi, 3.0, 1),
    ]
    w = fixed_point_solve(
        build_boundary_data(mask, segs_weak, populations=2), 0.3, ell12, mask, SolveConfig()
    )
    s = fixed_point_solve(
        build_boundary_data(mask, segs_strong, populations=2), 0.3, ell12, mask, SolveConfig()
    )
    gap = s.fields[0].values - w.fields[0].values
    assert gap.max() <= 1e-7  # nowhere does a stronger rival help population 0


def test_unclamped_drift_small_when_converged(disk16, ell12):
    _, mask = disk16
    phis = build_boundary_data(mask, antipodal_segments(), populations=2)
    state = fixed_point_solve(phis, 1.0, ell12, mask, SolveConfig())
    for i in range(2):
        assert unclamped_drift(state, i, ell12, mask, SolveConfig(), steps=100) <= 1e-6


def test_residual_detects_perturbation(disk16, ell12):
    grid, mask = disk16
    phis = build_boundary_data(mask, antipodal_segments(), populations=2)
    state = fixed_point_solve(phis, 1.0, ell12, mask, SolveConfig())
    base = max(residual(state, ell12, mask))
    delta = 1e-3
    vals = state.fields[0].values.copy()
    ii, jj = np.argwhere(mask.interior & mask.stencil_ok())[40]
    vals[ii, jj] += delta
    bumped = SystemState(
        state.epsilon,
        [ScalarField(grid, vals), state.fields[1]],
        state.residuals,
        state.outer_iters,
        state.inner_iters,
        state.converged,
    )
    jump = max(residual(bumped, ell12, mask))
    # a point bump of size delta moves the residual by Theta(delta / h^2)
    scale = delta / grid.h**2
    assert scale <= jump <= 10.0 * scale
    assert jump > 100.0 * base


def test_schedule_validation(disk16, ell12):
    grid, mask = disk16
    phi = [ScalarField.zeros(grid)]
    with pytest.raises(ValueError):
        epsilon_continuation(phi, [], ell12, mask)
    with pytest.raises(ValueError):
        epsilon_continuation(phi, [1.0, 1.0], ell12, mask)
    with pytest.raises(ValueError):
        epsilon_continuation(phi, [0.5, 1.0], ell12, mask)
    with pytest.raises(ValueError):
        epsilon_continuation(phi, [1.0, -0.5], ell12, mask)


def test_continuation_warm_start(disk16, ell12):
    _, mask = disk16
    phis = build_boundary_data(mask, antipodal_segments(), populations=2)
    states = epsilon_continuation(phis, [1.0, 0.3], ell12, mask, SolveConfig())
    assert [s.epsilon for s in states] == [1.0, 0.3]
    assert all(s.converged for s in states)
    # stronger competition at the later epsilon shrinks the overlap region
    both0 = ((states[0].fields[0].values > 1e-3) & (states[0].fields[1].values > 1e-3)).sum()
    both1 = ((states[1].fields[0].values > 1e-3) & (states[1].fields[1].values > 1e-3)).sum()
    assert both1 <= both0
