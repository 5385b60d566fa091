"""Discrete disk domains, node classification, and boundary data.

The computational domain is a disk embedded in a square lattice. Nodes are
classified Interior (strictly inside the disk), Boundary (outside or on the
circle but touching the interior), or Exterior (everything else). Interior
nodes always carry a full 9-point neighborhood of non-Exterior nodes, so
second-difference stencils never read Exterior values.

Boundary data for each population lives on an arc of the circle as a smooth
cos^2 bump. Arcs of distinct populations may touch at endpoints but never
overlap, which makes the pointwise products of the data exactly zero.

Fields are immutable: the value arrays are marked read-only on construction.
Mutating code should work on copies (see :meth:`ScalarField.mutable_values`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

EXTERIOR = 0
INTERIOR = 1
BOUNDARY = 2

_CLASS_NAMES = {EXTERIOR: "exterior", INTERIOR: "interior", BOUNDARY: "boundary"}
_CLASS_CODES = {name: code for code, name in _CLASS_NAMES.items()}


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform lattice. Node (i, j) sits at origin + (i*h, j*h), computed
    per node so coordinates are exactly reproducible from indices."""

    nx: int
    ny: int
    h: float
    origin: tuple[float, float]

    def __post_init__(self) -> None:
        if self.h <= 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 nodes per axis, got {self.nx}x{self.ny}")

    def x(self, i) -> float:
        return self.origin[0] + np.asarray(i) * self.h

    def y(self, j) -> float:
        return self.origin[1] + np.asarray(j) * self.h

    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays X, Y of shape (nx, ny), indexed [i, j]."""
        return np.meshgrid(self.x(np.arange(self.nx)), self.y(np.arange(self.ny)),
                           indexing="ij")

    def ball(self, center: tuple[float, float], radius: float) -> np.ndarray:
        """Boolean node mask of the closed ball |x - center| <= radius."""
        X, Y = self.meshes()
        return np.hypot(X - center[0], Y - center[1]) <= radius


@dataclass(frozen=True)
class DomainMask:
    """Node classification plus the disk metadata it was built from.

    The classes array holds EXTERIOR / INTERIOR / BOUNDARY codes. The
    invariant checked at construction: every Interior node has all 8
    lattice neighbors present and non-Exterior, and the Boundary set is
    nonempty. Dirichlet values are carried separately as ScalarFields.
    """

    grid: Grid
    classes: np.ndarray
    center: tuple[float, float]
    radius: float

    def __post_init__(self) -> None:
        cls = np.ascontiguousarray(self.classes, dtype=np.int8)
        if cls.shape != (self.grid.nx, self.grid.ny):
            raise ValueError("classes shape does not match grid")
        object.__setattr__(self, "classes", _readonly(cls))
        interior = cls == INTERIOR
        if not interior.any():
            raise ValueError("spacing too coarse: mask has no interior node")
        if not (cls == BOUNDARY).any():
            raise ValueError("mask has no boundary node")
        if interior[0, :].any() or interior[-1, :].any() \
                or interior[:, 0].any() or interior[:, -1].any():
            raise ValueError("spacing too coarse: interior node on the grid edge "
                             "lacks a full stencil")
        core = interior[1:-1, 1:-1]
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                nb = cls[1 + di:cls.shape[0] - 1 + di, 1 + dj:cls.shape[1] - 1 + dj]
                if (core & (nb == EXTERIOR)).any():
                    raise ValueError("interior node with an exterior neighbor: "
                                     "stencils would read exterior values")

    @property
    def interior(self) -> np.ndarray:
        return self.classes == INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.classes == BOUNDARY

    @property
    def nonexterior(self) -> np.ndarray:
        return self.classes != EXTERIOR

    def stencil_ok(self) -> np.ndarray:
        """Interior nodes whose full 9-point stencil avoids Exterior nodes.

        By the construction invariant this equals the interior set for any
        generated mask; kept general for hand-built masks in tests.
        """
        cls = self.classes
        ok = np.zeros_like(cls, dtype=bool)
        core = np.ones((cls.shape[0] - 2, cls.shape[1] - 2), dtype=bool)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                nb = cls[1 + di:cls.shape[0] - 1 + di, 1 + dj:cls.shape[1] - 1 + dj]
                core &= nb != EXTERIOR
        ok[1:-1, 1:-1] = core & (cls[1:-1, 1:-1] == INTERIOR)
        return ok

    def theta(self) -> np.ndarray:
        """Angular coordinate of every node about the disk center, in [0, 2*pi)."""
        X, Y = self.grid.meshes()
        return np.mod(np.arctan2(Y - self.center[1], X - self.center[0]), 2.0 * np.pi)


@dataclass(frozen=True)
class ScalarField:
    """One finite real value per grid node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.nx, self.grid.ny):
            raise ValueError("field shape does not match grid")
        if not np.isfinite(vals).all():
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", _readonly(vals))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros((grid.nx, grid.ny)))

    @classmethod
    def from_function(cls, grid: Grid, fn, mask: DomainMask | None = None) -> "ScalarField":
        """Sample fn(x, y) at every node; with a mask, Exterior nodes get 0."""
        X, Y = grid.meshes()
        vals = np.asarray(fn(X, Y), dtype=np.float64)
        vals = np.broadcast_to(vals, X.shape).copy()
        if mask is not None:
            vals[~mask.nonexterior] = 0.0
        return cls(grid, vals)

    def mutable_values(self) -> np.ndarray:
        return self.values.copy()

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


@dataclass(frozen=True)
class BoundarySegment:
    """Arc [theta0, theta1] of the circle carrying one population's data."""

    theta0: float
    theta1: float
    amplitude: float
    population: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.theta0 < self.theta1 <= 2.0 * math.pi + 1e-12):
            raise ValueError(f"arc [{self.theta0}, {self.theta1}] is not an increasing "
                             "interval inside [0, 2*pi]")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be non-negative, got {self.amplitude}")
        if self.population < 0:
            raise ValueError(f"population index must be non-negative, got {self.population}")


def build_disk_domain(radius: float, h: float,
                      center: tuple[float, float] = (0.0, 0.0)) -> tuple[Grid, DomainMask]:
    """Build the lattice covering a disk and classify its nodes.

    Interior nodes satisfy |x - center| < radius. Non-interior nodes with an
    Interior node among their 8 lattice neighbors become Boundary; the rest
    are Exterior. Classifying by the full 8-neighborhood (not only the 4
    axis neighbors) is what guarantees that every Interior node's 9-point
    stencil reads no Exterior value, including across the diagonal corners
    the circle cuts off.

    Parameters
    ----------
    radius, h : float
        Disk radius and lattice spacing. Spacings h >= 3*radius/4 cannot
        carry an interior stencil and are rejected as a sizing error.
    center : pair of float
        Disk center; also the grid's central node.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if h <= 0:
        raise ValueError(f"spacing must be positive, got {h}")
    if h >= 0.75 * radius:
        raise ValueError(f"spacing too coarse for radius {radius}: h = {h}")
    m = math.ceil(radius / h - 1e-12)
    n = 2 * m + 1
    grid = Grid(n, n, h, (center[0] - m * h, center[1] - m * h))
    X, Y = grid.meshes()
    interior = np.hypot(X - center[0], Y - center[1]) < radius
    classes = np.zeros((n, n), dtype=np.int8)
    classes[interior] = INTERIOR
    padded = np.zeros((n + 2, n + 2), dtype=bool)
    padded[1:-1, 1:-1] = interior
    near = np.zeros((n, n), dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            near |= padded[1 + di:n + 1 + di, 1 + dj:n + 1 + dj]
    classes[~interior & near] = BOUNDARY
    return grid, DomainMask(grid, classes, (float(center[0]), float(center[1])), float(radius))


def build_boundary_data(mask: DomainMask, segments: list[BoundarySegment],
                        exponent: float = 1.0, populations: int | None = None,
                        ) -> list[ScalarField]:
    """Sample per-population Dirichlet data onto the Boundary nodes.

    Each segment contributes A * cos^2(pi * (theta - theta_mid) / width) on
    the open arc (theta0, theta1) and exactly 0 elsewhere, evaluated at each
    Boundary node's angular coordinate. Open arcs of distinct populations
    must be disjoint (touching endpoints are fine), so at every node at most
    one population is nonzero and the pairwise products vanish exactly.

    The Hoelder exponent of the data is descriptive metadata: the cos^2
    profile is C^1, hence Hoelder for every exponent <= 1, and the profile
    itself does not depend on it. It is validated and recorded by callers.
    """
    if not (0.0 < exponent <= 1.0):
        raise ValueError(f"exponent must lie in (0, 1], got {exponent}")
    for a in segments:
        for b in segments:
            if a.population == b.population or a is b:
                continue
            lo, hi = max(a.theta0, b.theta0), min(a.theta1, b.theta1)
            if lo < hi - 1e-15:
                raise ValueError(
                    f"arcs for populations {a.population} and {b.population} overlap "
                    f"on [{lo}, {hi}]")
    d = populations if populations is not None else max((s.population for s in segments),
                                                        default=0) + 1
    if any(s.population >= d for s in segments):
        raise ValueError("segment population index exceeds declared population count")
    theta = mask.theta()
    on_boundary = mask.boundary
    fields = []
    for i in range(d):
        vals = np.zeros_like(theta)
        for seg in segments:
            if seg.population != i:
                continue
            inside = on_boundary & (theta > seg.theta0) & (theta < seg.theta1)
            mid = 0.5 * (seg.theta0 + seg.theta1)
            width = seg.theta1 - seg.theta0
            bump = seg.amplitude * np.cos(np.pi * (theta[inside] - mid) / width) ** 2
            vals[inside] += bump
        fields.append(ScalarField(mask.grid, vals))
    return fields


def oscillation(field: ScalarField, mask: DomainMask, center: tuple[float, float],
                radius: float) -> float:
    """max - min of the field over non-Exterior nodes in the closed ball."""
    sel = mask.grid.ball(center, radius) & mask.nonexterior
    if not sel.any():
        raise ValueError(f"ball of radius {radius} at {center} misses the domain")
    vals = field.values[sel]
    return float(vals.max() - vals.min())


def dump_field(field: ScalarField, mask: DomainMask, target) -> None:
    """Write a field as CSV rows `i,j,x,y,class,value`, row-major over (j, i).

    Floats carry 17 significant digits, enough to round-trip doubles exactly.
    This format is the interchange surface between the modules and the CLI.
    """
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    f = open(target, "w", newline="") if own else target
    try:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["i", "j", "x", "y", "class", "value"])
        g = field.grid
        for j in range(g.ny):
            for i in range(g.nx):
                w.writerow([i, j, f"{g.x(i):.17g}", f"{g.y(j):.17g}",
                            _CLASS_NAMES[int(mask.classes[i, j])],
                            f"{field.values[i, j]:.17g}"])
    finally:
        if own:
            f.close()


def load_field(source) -> tuple[Grid, np.ndarray, ScalarField]:
    """Read a field dump back into (Grid, classes array, ScalarField)."""
    own = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
    f = open(source, "r", newline="") if own else source
    try:
        rows = list(csv.reader(f))
    finally:
        if own:
            f.close()
    if not rows or rows[0] != ["i", "j", "x", "y", "class", "value"]:
        raise ValueError("not a field dump: bad header")
    body = rows[1:]
    nx = max(int(r[0]) for r in body) + 1
    ny = max(int(r[1]) for r in body) + 1
    if len(body) != nx * ny:
        raise ValueError(f"field dump has {len(body)} rows, expected {nx * ny}")
    first = body[0]
    x0, y0 = float(first[2]), float(first[3])
    second = next(r for r in body if int(r[0]) == 1 and int(r[1]) == 0)
    grid = Grid(nx, ny, float(second[2]) - x0, (x0, y0))
    classes = np.zeros((nx, ny), dtype=np.int8)
    values = np.zeros((nx, ny))
    for r in body:
        i, j = int(r[0]), int(r[1])
        classes[i, j] = _CLASS_CODES[r[4]]
        values[i, j] = float(r[5])
    return grid, classes, ScalarField(grid, values)
