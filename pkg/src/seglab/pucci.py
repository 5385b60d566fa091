"""Extremal second-order operators and their algebra.

The operators act on symmetric matrices through their spectrum: the minimal
operator weights negative eigenvalues by Lambda and positive ones by lambda,
the maximal operator swaps the roles.  Field-level evaluation goes through
central second differences on a disk mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainMask, ScalarField, _readonly

__all__ = [
    "Ellipticity",
    "SymMatrix",
    "eigenvalues",
    "pucci_minus",
    "pucci_plus",
    "discrete_hessian",
    "pucci_field",
    "core_hessians",
    "extremal_of_hessian",
    "AlgebraReport",
    "run_algebra_suite",
]

_JACOBI_REL_TOL = 1e-12

_TRIU_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _triu(n: int) -> tuple[np.ndarray, np.ndarray]:
    got = _TRIU_CACHE.get(n)
    if got is None:
        got = _TRIU_CACHE[n] = np.triu_indices(n)
    return got


@dataclass(frozen=True)
class Ellipticity:
    """Ellipticity bounds 0 < lam <= Lam."""

    lam: float
    Lam: float

    def __post_init__(self) -> None:
        if not (0.0 < self.lam <= self.Lam):
            raise ValueError(
                f"ellipticity bounds must satisfy 0 < lam <= Lam, got ({self.lam}, {self.Lam})"
            )
        if not (math.isfinite(self.lam) and math.isfinite(self.Lam)):
            raise ValueError("ellipticity bounds must be finite")


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric n x n matrix, upper triangle stored row-major."""

    n: int
    packed: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"matrix dimension must be >= 2, got {self.n}")
        data = np.asarray(self.packed, dtype=np.float64)
        if data.shape != (self.n * (self.n + 1) // 2,):
            raise ValueError(
                f"packed storage for n={self.n} needs {self.n * (self.n + 1) // 2} entries, "
                f"got shape {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "packed", _readonly(data))

    @classmethod
    def from_full(cls, a: np.ndarray) -> "SymMatrix":
        """Build from a full array, averaging the off-diagonal halves."""
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square array, got shape {a.shape}")
        n = a.shape[0]
        sym = 0.5 * (a + a.T)
        return cls(n, sym[_triu(n)])

    @classmethod
    def diag(cls, entries) -> "SymMatrix":
        return cls.from_full(np.diag(np.asarray(entries, dtype=np.float64)))

    def to_full(self) -> np.ndarray:
        full = np.zeros((self.n, self.n))
        iu = _triu(self.n)
        full[iu] = self.packed
        full[(iu[1], iu[0])] = self.packed
        return full

    def trace(self) -> float:
        # diagonal entries sit at offsets 0, n, n+(n-1), ... in the packing
        total = 0.0
        pos = 0
        for row in range(self.n):
            total += float(self.packed[pos])
            pos += self.n - row
        return total

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        if not isinstance(other, SymMatrix) or other.n != self.n:
            return NotImplemented
        return SymMatrix(self.n, self.packed + other.packed)

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(self.n, -self.packed)

    def __rmul__(self, t: float) -> "SymMatrix":
        return SymMatrix(self.n, float(t) * self.packed)


def _jacobi_spectrum(full: np.ndarray, rel_tol: float = _JACOBI_REL_TOL) -> np.ndarray:
    """Cyclic Jacobi sweeps on a symmetric matrix, diagonal returned sorted."""
    a = full.copy()
    n = a.shape[0]
    scale = math.sqrt(float((a * a).sum()))
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(64):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if math.sqrt(off) <= rel_tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    if k == p or k == q:
                        continue
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = a[p, k] = c * akp - s * akq
                    a[k, q] = a[q, k] = s * akp + c * akq
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a).copy())


def eigenvalues(H: SymMatrix) -> np.ndarray:
    """Full real spectrum, ascending."""
    if H.n == 2:
        h11, h12, h22 = float(H.packed[0]), float(H.packed[1]), float(H.packed[2])
        m = 0.5 * (h11 + h22)
        d = math.hypot(0.5 * (h11 - h22), h12)
        return np.array([m - d, m + d])
    return _jacobi_spectrum(H.to_full())


def _weighted_sum(evals: np.ndarray, weight_neg: float, weight_pos: float) -> float:
    neg = float(evals[evals < 0.0].sum())
    pos = float(evals[evals > 0.0].sum())
    return weight_neg * neg + weight_pos * pos


def pucci_minus(H: SymMatrix, ell: Ellipticity) -> float:
    """Lam * (negative part of the spectrum) + lam * (positive part)."""
    return _weighted_sum(eigenvalues(H), ell.Lam, ell.lam)


def pucci_plus(H: SymMatrix, ell: Ellipticity) -> float:
    """lam * (negative part of the spectrum) + Lam * (positive part)."""
    return _weighted_sum(eigenvalues(H), ell.lam, ell.Lam)


def discrete_hessian(
    field: ScalarField, mask: DomainMask, node: tuple[int, int], h: float | None = None
) -> SymMatrix:
    """Central-difference Hessian at an interior node with a full 3x3 stencil."""
    i, j = node
    grid = field.grid
    if h is None:
        h = grid.h
    if not (0 < i < grid.nx - 1 and 0 < j < grid.ny - 1):
        raise ValueError(f"node ({i}, {j}) has no complete stencil on the grid")
    if not mask.interior[i, j]:
        raise ValueError(f"node ({i}, {j}) is not an interior node")
    block = mask.classes[i - 1 : i + 2, j - 1 : j + 2]
    if np.any(block == 0):
        raise ValueError(f"hessian stencil at node ({i}, {j}) touches the exterior")
    u = field.values
    h2 = h * h
    h11 = (u[i + 1, j] - 2.0 * u[i, j] + u[i - 1, j]) / h2
    h22 = (u[i, j + 1] - 2.0 * u[i, j] + u[i, j - 1]) / h2
    h12 = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) / (4.0 * h2)
    return SymMatrix(2, np.array([h11, h12, h22]))


def pucci_field(
    field: ScalarField, mask: DomainMask, ell: Ellipticity, sign: str = "minus"
) -> tuple[ScalarField, np.ndarray]:
    """Evaluate the chosen extremal operator of the discrete Hessian per node.

    Returns the value field (0 where the stencil is incomplete) and the
    validity mask of nodes where the value is meaningful.
    """
    if sign not in ("minus", "plus"):
        raise ValueError(f"sign must be 'minus' or 'plus', got {sign!r}")
    grid = field.grid
    valid = mask.stencil_ok()
    vals = extremal_of_hessian(*core_hessians(field.values, grid.h), ell, sign)
    out = np.zeros_like(field.values)
    core = np.s_[1:-1, 1:-1]
    out[core][valid[core]] = vals[valid[core]]
    return ScalarField(grid, out), valid


def core_hessians(u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Central-difference H11, H22, H12 on the inner (nx-2, ny-2) block."""
    h2 = h * h
    core = np.s_[1:-1, 1:-1]
    h11 = (u[2:, 1:-1] - 2.0 * u[core] + u[:-2, 1:-1]) / h2
    h22 = (u[1:-1, 2:] - 2.0 * u[core] + u[1:-1, :-2]) / h2
    h12 = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4.0 * h2)
    return h11, h22, h12


def extremal_of_hessian(
    h11: np.ndarray, h22: np.ndarray, h12: np.ndarray, ell: Ellipticity, sign: str
) -> np.ndarray:
    """Closed-form 2-D extremal operator from Hessian entry arrays."""
    m = 0.5 * (h11 + h22)
    d = np.hypot(0.5 * (h11 - h22), h12)
    e1 = m - d
    e2 = m + d
    if sign == "minus":
        return ell.Lam * (np.minimum(e1, 0.0) + np.minimum(e2, 0.0)) + ell.lam * (
            np.maximum(e1, 0.0) + np.maximum(e2, 0.0)
        )
    return ell.lam * (np.minimum(e1, 0.0) + np.minimum(e2, 0.0)) + ell.Lam * (
        np.maximum(e1, 0.0) + np.maximum(e2, 0.0)
    )


@dataclass(frozen=True)
class AlgebraReport:
    """Worst absolute deviation per operator-algebra law."""

    n_samples: int
    seed: int
    worst: dict[str, float]

    @property
    def max_violation(self) -> float:
        return max(self.worst.values())

    def rows(self) -> list[tuple[str, float]]:
        return sorted(self.worst.items())


def _random_sym(rng: np.random.Generator, n: int) -> SymMatrix:
    a = rng.standard_normal((n, n))
    return SymMatrix.from_full(0.5 * (a + a.T))


def _random_rotation(rng: np.random.Generator, n: int) -> np.ndarray:
    if n == 2:
        ang = rng.uniform(0.0, 2.0 * math.pi)
        c, s = math.cos(ang), math.sin(ang)
        return np.array([[c, -s], [s, c]])
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    # fix the sign convention so q is a proper orthogonal sample
    return q * np.sign(np.diag(r))


def _minus_plus(H: SymMatrix, ell: Ellipticity) -> tuple[float, float]:
    """Both extremal values from a single spectrum computation."""
    evals = eigenvalues(H)
    neg = float(evals[evals < 0.0].sum())
    pos = float(evals[evals > 0.0].sum())
    return ell.Lam * neg + ell.lam * pos, ell.lam * neg + ell.Lam * pos


def run_algebra_suite(n_samples: int, seed: int = 0) -> AlgebraReport:
    """Randomized verification of the operator-algebra laws.

    Each sample draws a dimension, a pair of symmetric matrices, ellipticity
    bounds, a rotation, a nonnegative scale and a positive semidefinite
    increment, then measures how far every law is from holding exactly.
    """
    rng = np.random.default_rng(seed)
    laws = (
        "reflection",
        "chain",
        "order",
        "psd_trace",
        "rotation",
        "homogeneity",
        "monotonicity",
    )
    worst = {law: 0.0 for law in laws}

    def bump(law: str, dev: float) -> None:
        if dev > worst[law]:
            worst[law] = dev

    dims = np.array([2, 2, 2, 2, 2, 2, 2, 2, 3, 4, 5])
    for k in range(n_samples):
        n = int(dims[rng.integers(len(dims))])
        H = _random_sym(rng, n)
        G = _random_sym(rng, n)
        lam = 0.1 + float(rng.uniform(0.0, 2.0))
        Lam = lam if k % 17 == 0 else lam + float(rng.uniform(0.0, 3.0))
        ell = Ellipticity(lam, Lam)

        mH, pH = _minus_plus(H, ell)
        mG, pG = _minus_plus(G, ell)

        mNegH, pNegH = _minus_plus(-H, ell)
        bump("reflection", abs(mNegH + pH))
        bump("reflection", abs(pNegH + mH))

        mHG, pHG = _minus_plus(H + G, ell)
        chain = (mH + mG, mHG, pH + mG, pHG, pH + pG)
        for lo, hi in zip(chain, chain[1:]):
            bump("chain", max(0.0, lo - hi))

        bump("order", max(0.0, mH - pH))

        b = rng.standard_normal((n, n))
        if k % 11 == 0:
            b[:, 0] = 0.0  # exercise a rank-deficient increment
        npsd = SymMatrix.from_full(b @ b.T)
        mN, pN = _minus_plus(npsd, ell)
        bump("psd_trace", abs(mN - lam * npsd.trace()))
        bump("psd_trace", abs(pN - Lam * npsd.trace()))

        q = _random_rotation(rng, n)
        mRot, pRot = _minus_plus(SymMatrix.from_full(q.T @ H.to_full() @ q), ell)
        bump("rotation", abs(mRot - mH))
        bump("rotation", abs(pRot - pH))

        t = 0.0 if k % 13 == 0 else float(rng.uniform(0.0, 3.0))
        mT, pT = _minus_plus(t * H, ell)
        bump("homogeneity", abs(mT - t * mH))
        bump("homogeneity", abs(pT - t * pH))

        mHN, _ = _minus_plus(H + npsd, ell)
        tr = npsd.trace()
        bump("monotonicity", max(0.0, mH + lam * tr - mHN))
        bump("monotonicity", max(0.0, mHN - (mH + Lam * tr)))

    return AlgebraReport(n_samples, seed, worst)
