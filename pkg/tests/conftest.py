import math
import time

import numpy as np
import pytest

from seglab import (
    BoundarySegment,
    Ellipticity,
    SolveConfig,
    build_boundary_data,
    build_disk_domain,
    epsilon_continuation,
)

SCHEDULE = [1.0, 0.3, 0.1, 0.03, 0.01]


@pytest.fixture(scope="session")
def ell12() -> Ellipticity:
    return Ellipticity(1.0, 2.0)


@pytest.fixture(scope="session")
def disk64():
    """Default desk-scale domain: unit disk, h = 1/64, 129^2 bounding grid."""
    return build_disk_domain(1.0, 1.0 / 64.0, (0.0, 0.0))


@pytest.fixture(scope="session")
def disk16():
    # coarse twin for cheap solver tests
    return build_disk_domain(1.0, 1.0 / 16.0, (0.0, 0.0))


def antipodal_segments() -> list[BoundarySegment]:
    return [
        BoundarySegment(0.0, math.pi, 1.0, 0),
        BoundarySegment(math.pi, 2.0 * math.pi, 1.0, 1),
    ]


@pytest.fixture(scope="session")
def phis64(disk64):
    _, mask = disk64
    return build_boundary_data(mask, antipodal_segments(), populations=2)


@pytest.fixture(scope="session")
def sweep64(disk64, phis64, ell12):
    """Two antipodal populations driven through the full coupling schedule.

    Built once; several acceptance checks read different aspects of the same
    states. Returns (states, log, wall_seconds)."""
    _, mask = disk64
    log: list = []
    t0 = time.perf_counter()
    states = epsilon_continuation(phis64, SCHEDULE, ell12, mask, SolveConfig(), log=log)
    elapsed = time.perf_counter() - t0
    return states, log, elapsed


def radial_power_field(disk, beta: float):
    """|x|^beta around the disk center, exact at nodes."""
    from seglab import ScalarField

    grid, mask = disk
    X, Y = grid.meshes()
    return ScalarField(grid, np.hypot(X, Y) ** beta)


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
