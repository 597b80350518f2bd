"""Exact counting of integer matrices with prime or prescribed invariant values."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from math import floor, gcd, inf, isfinite, prod
from typing import Callable

import numpy as np

from . import _kernels as K
from .errors import ArithmeticOverflowError, BudgetExceededError, InvalidRegionError
from .numbertheory import SIEVE_LIMIT, factorize, is_prime, prime_table, zeta
from .spaces import MatrixSpace, eval_int, eval_real, last_coordinate_split, value_bound

__all__ = [
    "SignMode",
    "RegionKind",
    "Patch",
    "Region",
    "CountResult",
    "value_counts",
    "count_primes",
    "count_level_set",
    "hecke_factor",
    "hecke_prediction",
    "check_star_shaped",
    "DEFAULT_BUDGET",
]

# Maximum number of lattice points visited by one enumeration.
DEFAULT_BUDGET = 4 * 10**9
# Points beyond which the pure numpy fallback refuses to run.
SLOW_PATH_BUDGET = 2 * 10**8
_BATCH = 1 << 20
# Histogram memory per enumeration (bytes) before chunks are shared.
_HIST_BYTES = 1 << 28


class SignMode(str, Enum):
    POSITIVE_PRIME = "positive_prime"
    PRIME_IDEAL = "prime_ideal"


class RegionKind(str, Enum):
    BOX = "box"
    CONE = "cone"
    RADIAL = "radial"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Patch:
    """A subset of the level set {F = sign}.

    Membership is a sup-norm band ``lo < |u| <= hi`` optionally intersected
    with a vectorised predicate on level-set points.  Bands without a
    predicate are handled by the compiled kernels.
    """

    sign: int = 1
    lo: float = 0.0
    hi: float = inf
    predicate: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    radius: float | None = None

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise InvalidRegionError("patch sign must be +1 or -1")
        if not self.lo < self.hi:
            raise InvalidRegionError("empty norm band")

    @property
    def bounding_radius(self) -> float:
        r = self.hi if self.radius is None else min(self.radius, self.hi)
        if not isfinite(r):
            raise InvalidRegionError("patch needs a finite bounding radius")
        return float(r)

    @property
    def compiled(self) -> bool:
        return self.predicate is None and isfinite(self.hi)

    def contains(self, U: np.ndarray) -> np.ndarray:
        """Membership of points assumed to lie on the level set."""
        U = np.asarray(U, dtype=float)
        sup = np.abs(U).max(axis=-1)
        mask = (sup > self.lo) & (sup <= self.hi)
        if self.predicate is not None:
            mask &= np.asarray(self.predicate(U), dtype=bool)
        return mask


@dataclass(frozen=True)
class Region:
    """A bounded region of V(R) together with the prime-counting convention.

    Box: the sup-norm ball of radius T.  Cone: {t u : 0 <= t <= T, u in
    patch}.  Radial: {x : gauge(x) <= T} for a degree-one homogeneous
    gauge.  Custom: an arbitrary vectorised predicate ``f(X, F) -> mask``;
    that its boundary has measure zero is the caller's responsibility.
    """

    kind: RegionKind
    T: float
    sign_mode: SignMode = SignMode.POSITIVE_PRIME
    patch: Patch | None = None
    gauge: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    predicate: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    radius: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", RegionKind(self.kind))
        object.__setattr__(self, "sign_mode", SignMode(self.sign_mode))
        if not (self.T >= 0 and isfinite(self.T)):
            raise InvalidRegionError("region scale T must be finite and nonnegative")
        if self.kind is RegionKind.CONE and self.patch is None:
            raise InvalidRegionError("cone region needs a patch")
        if self.kind is RegionKind.RADIAL and self.gauge is None:
            raise InvalidRegionError("radial region needs a gauge")
        if self.kind is RegionKind.CUSTOM and self.predicate is None:
            raise InvalidRegionError("custom region needs a predicate")
        if self.kind in (RegionKind.RADIAL, RegionKind.CUSTOM):
            if self.radius is None or not isfinite(self.radius):
                raise InvalidRegionError("region with infinite bounding radius")

    @classmethod
    def box(cls, T: float, sign_mode: SignMode | str = SignMode.POSITIVE_PRIME) -> "Region":
        return cls(RegionKind.BOX, T, sign_mode)

    @classmethod
    def cone(cls, patch: Patch, T: float, sign_mode: SignMode | str = SignMode.POSITIVE_PRIME) -> "Region":
        return cls(RegionKind.CONE, T, sign_mode, patch=patch)

    @classmethod
    def radial(cls, gauge, T: float, radius: float, sign_mode=SignMode.POSITIVE_PRIME) -> "Region":
        return cls(RegionKind.RADIAL, T, sign_mode, gauge=gauge, radius=radius)

    @classmethod
    def custom(cls, predicate, radius: float, sign_mode=SignMode.POSITIVE_PRIME) -> "Region":
        return cls(RegionKind.CUSTOM, radius, sign_mode, predicate=predicate, radius=radius)

    def with_sign_mode(self, sign_mode: SignMode | str) -> "Region":
        return Region(self.kind, self.T, sign_mode, self.patch, self.gauge, self.predicate, self.radius)

    @property
    def bounding_radius(self) -> float:
        if self.kind is RegionKind.BOX:
            return float(self.T)
        if self.kind is RegionKind.CONE:
            return float(self.T) * self.patch.bounding_radius
        return float(self.radius)

    @property
    def compiled(self) -> bool:
        return self.kind is RegionKind.BOX or (self.kind is RegionKind.CONE and self.patch.compiled)

    def contains(self, space: MatrixSpace, X: np.ndarray, F: np.ndarray | None = None) -> np.ndarray:
        """Vectorised membership for points given in free coordinates."""
        X = np.asarray(X)
        if F is None:
            F = eval_real(space, X)
        sup = np.abs(X).max(axis=-1)
        if self.kind is RegionKind.BOX:
            return sup <= self.T
        if self.kind is RegionKind.CONE:
            Ff = np.asarray(F, dtype=float)
            level = np.abs(Ff) ** (1.0 / space.poly_degree)
            ok = (Ff * self.patch.sign > 0) & (level <= self.T * (1 + 1e-12))
            safe = np.where(ok, level, 1.0)
            U = np.asarray(X, dtype=float) / safe[..., None]
            return ok & self.patch.contains(U)
        if self.kind is RegionKind.RADIAL:
            return (np.asarray(self.gauge(np.asarray(X, dtype=float))) <= self.T) & (sup <= self.radius)
        return np.asarray(self.predicate(X, F), dtype=bool) & (sup <= self.radius)

    def describe(self) -> dict:
        out = {"kind": self.kind.value, "T": self.T, "sign_mode": self.sign_mode.value}
        if self.patch is not None:
            out["patch"] = {"sign": self.patch.sign, "lo": self.patch.lo, "hi": self.patch.hi}
        if self.radius is not None:
            out["radius"] = self.radius
        return out


@dataclass(frozen=True)
class CountResult:
    total: int
    by_value: dict[int, int]
    wall_time: float
    thread_count: int

    def __post_init__(self) -> None:
        assert self.total == sum(self.by_value.values())

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "by_value": {str(k): v for k, v in sorted(self.by_value.items())},
            "thread_count": self.thread_count,
        }


# ---------------------------------------------------------------------------
# enumeration core


def _guard_width(space: MatrixSpace, radius: float) -> int:
    bound = value_bound(space, radius)
    if bound >= 2**62:
        raise ArithmeticOverflowError(f"values of {space} on radius {radius} exceed 64-bit kernels")
    return bound


def _lattice_size(space: MatrixSpace, R: int) -> int:
    return (2 * R + 1) ** space.ambient_dim


def _check_budget(points: int, budget: int) -> None:
    if points > budget:
        raise BudgetExceededError(
            f"enumeration needs {points:.3g} points, budget is {budget:.3g}; reduce T or raise --budget"
        )


def _kernel_params(space: MatrixSpace, region: Region, cutting=None):
    if cutting is not None:
        return K.KIND_CUTTING, np.asarray(cutting, dtype=np.float64)
    if region.kind is RegionKind.BOX:
        return K.KIND_BOX, np.zeros(1)
    p = region.patch
    return K.KIND_CONE, np.array([p.sign, region.T, p.lo, p.hi], dtype=np.float64)


def _nchunks(L: int, width: int, nclass: int) -> int:
    per = 8 * width * nclass
    return max(1, min(L, _HIST_BYTES // max(per, 1)))


def _histogram(space, region, threads, budget, cutting=None, nclass=1):
    """Compiled histogram of F over the region; returns (offset B, hist)."""
    R = int(floor(region.bounding_radius + 1e-9))
    _check_budget(_lattice_size(space, R), budget)
    B = _guard_width(space, R)
    kind, params = _kernel_params(space, region, cutting=cutting)
    g, h = last_coordinate_split(space)
    K.set_threads(threads)
    L = 2 * R + 1
    hist = K.region_histogram(
        g.coef, g.idx, h.coef, h.idx, space.ambient_dim, R, B, kind, params,
        space.poly_degree, nclass, _nchunks(L, 2 * B + 1, nclass),
    )
    return B, hist


def _slow_points(space: MatrixSpace, R: int):
    """Yield batches of integer points of [-R, R]^dim in lexicographic order."""
    dim = space.ambient_dim
    L = 2 * R + 1
    total = L**dim
    weights = L ** np.arange(dim - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, _BATCH):
        flat = np.arange(start, min(total, start + _BATCH), dtype=np.int64)
        yield (flat[:, None] // weights) % L - R


def value_counts(
    space: MatrixSpace,
    region: Region,
    threads: int | None = None,
    budget: int = DEFAULT_BUDGET,
) -> tuple[np.ndarray, np.ndarray]:
    """Distinct values of F on the integer points of the region, with counts."""
    R = int(floor(region.bounding_radius + 1e-9))
    if region.compiled and space.ambient_dim >= 2:
        B, hist = _histogram(space, region, threads, budget)
        nz = np.flatnonzero(hist[0])
        return nz - B, hist[0][nz]
    _check_budget(_lattice_size(space, R), min(budget, SLOW_PATH_BUDGET))
    _guard_width(space, R)
    acc: dict[int, int] = {}
    for X in _slow_points(space, R):
        F = eval_int(space, X)
        F = F[region.contains(space, X, F)]
        vals, cnt = np.unique(F, return_counts=True)
        for v, c in zip(vals.tolist(), cnt.tolist()):
            acc[v] = acc.get(v, 0) + c
    keys = np.array(sorted(acc), dtype=np.int64)
    return keys, np.array([acc[k] for k in keys.tolist()], dtype=np.int64)


def prime_mask(values: np.ndarray) -> np.ndarray:
    """Elementwise primality of |values|."""
    a = np.abs(np.asarray(values, dtype=np.int64))
    if a.size == 0:
        return np.zeros(0, dtype=bool)
    top = int(a.max())
    if top <= SIEVE_LIMIT:
        return prime_table(top)[a]
    return np.array([is_prime(int(v)) for v in a], dtype=bool)


def _select_primes(values, counts, sign_mode: SignMode, progression):
    mask = prime_mask(values)
    if sign_mode is SignMode.POSITIVE_PRIME:
        mask &= values > 0
    if progression is not None:
        a, q = progression
        mask &= (values - a) % q == 0
    return values[mask], counts[mask]


def count_primes(
    space: MatrixSpace,
    region: Region,
    progression: tuple[int, int] | None = None,
    threads: int | None = None,
    budget: int = DEFAULT_BUDGET,
) -> CountResult:
    """Exact number of integer points in the region with a prime value.

    PositivePrime counts F(A) prime; PrimeIdeal counts |F(A)| prime.  With
    ``progression=(a, q)`` only values F(A) = a mod q are kept.
    """
    if progression is not None:
        a, q = progression
        if q < 1 or gcd(a, q) != 1:
            raise ValueError("progression needs q >= 1 and gcd(a, q) = 1")
    start = time.perf_counter()
    used = K.set_threads(threads)
    values, counts = value_counts(space, region, threads, budget)
    values, counts = _select_primes(values, counts, region.sign_mode, progression)
    by_value = {int(v): int(c) for v, c in zip(values, counts)}
    return CountResult(int(counts.sum()), by_value, time.perf_counter() - start, used)


def count_level_set(
    space: MatrixSpace,
    m: int,
    region: Region,
    threads: int | None = None,
    budget: int = DEFAULT_BUDGET,
) -> int:
    """Exact number of integer points with F = m in the region."""
    if m == 0:
        raise ValueError("level m must be nonzero")
    R = int(floor(region.bounding_radius + 1e-9))
    if region.compiled and space.ambient_dim >= 2:
        _check_budget((2 * R + 1) ** (space.ambient_dim - 1), budget)
        _guard_width(space, R)
        kind, params = _kernel_params(space, region)
        g, h = last_coordinate_split(space)
        K.set_threads(threads)
        return int(
            K.region_level_count(
                g.coef, g.idx, h.coef, h.idx, space.ambient_dim, R, int(m), kind, params,
                space.poly_degree, 2 * R + 1,
            )
        )
    values, counts = value_counts(space, region, threads, budget)
    return int(counts[values == m].sum())


# ---------------------------------------------------------------------------
# Hecke counts


def hecke_factor(n: int, m: int) -> int:
    """The multiplicative factor G_n(m) counting sublattices of index m.

    For p^e exactly dividing m the local factor is
    prod_{i=1}^{n-1} (p^{e+i} - 1) / (p^i - 1).
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    if m > 10**12:
        raise ValueError("factorisation is limited to m <= 10**12")
    out = 1
    for p, e in factorize(m).items() if m > 1 else []:
        num = prod(p ** (e + i) - 1 for i in range(1, n))
        den = prod(p**i - 1 for i in range(1, n))
        out *= num // den
    return out


def hecke_prediction(n: int, m: int, mu_omega: float) -> float:
    """Main term prod_{j=2}^n zeta(j)^{-1} * G_n(m) * mu(Omega)."""
    if n < 2:
        raise ValueError("need n >= 2")
    return prod(1.0 / zeta(j) for j in range(2, n + 1)) * hecke_factor(n, m) * mu_omega


def check_star_shaped(space: MatrixSpace, region: Region, samples: int = 20000, seed: int = 0) -> bool:
    """Sampled test that t*x stays in the region for x in it and t in [0, 1]."""
    rng = np.random.default_rng(seed)
    r = region.bounding_radius
    X = rng.uniform(-r, r, size=(samples, space.ambient_dim))
    X = X[region.contains(space, X)]
    if len(X) == 0:
        return True
    t = rng.uniform(0, 1, size=(len(X), 1))
    Y = X * t
    if region.kind is RegionKind.CONE:
        # the apex is excluded by the sign condition; tiny scalings still count
        Y = Y[eval_real(space, Y) != 0]
    return bool(region.contains(space, Y).all())
