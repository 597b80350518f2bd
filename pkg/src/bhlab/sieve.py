"""Upper-bound sieve for prime values: rho(d), rough counts and remainders."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import prod

import numpy as np

from .enumeration import DEFAULT_BUDGET, Region, RegionKind, prime_mask, value_counts
from .errors import InvalidRegionError
from .localdensity import count_mod
from .numbertheory import factorize, is_squarefree, primes_up_to
from .spaces import MatrixSpace

__all__ = [
    "SieveResult",
    "RemainderRow",
    "rho",
    "rough_mask",
    "region_volume",
    "rough_count",
    "remainder_experiment",
    "small_prime_contribution",
    "write_remainder_csv",
]


@dataclass(frozen=True)
class SieveResult:
    main_term: float
    exact_rough_count: int
    remainder_sum: float
    z: float
    sieve_constant: float
    prime_count_bound: float
    empirical_ratio: float
    volume: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class RemainderRow:
    d: int
    count: int
    r_d: float
    bound: float
    ratio: float


def rho(space: MatrixSpace, d: int) -> int:
    """#{x mod d : F(x) = 0}, multiplied out over the primes of squarefree d."""
    if not is_squarefree(d):
        raise ValueError(f"{d} is not squarefree")
    if d == 1:
        return 1
    return prod(count_mod(space, p, 1, 0).raw_count for p in factorize(d))


def rough_mask(values: np.ndarray, z: float) -> np.ndarray:
    """gcd(v, P(z)) = 1, with P(z) the product of primes <= z."""
    values = np.asarray(values, dtype=np.int64)
    mask = np.ones(values.shape, dtype=bool)
    for p in primes_up_to(z):
        mask &= values % p != 0
    return mask


def region_volume(space: MatrixSpace, region: Region, convention: str = "cell") -> float:
    """Volume of a box region.

    ``cell`` counts the unit cells centred on lattice points, (2T + 1)^dim
    for integral T; ``euclidean`` is (2T)^dim.
    """
    if region.kind is not RegionKind.BOX:
        raise InvalidRegionError("the sieve is applied to boxes")
    T = float(region.T)
    if convention == "cell":
        return (2 * np.floor(T) + 1.0) ** space.ambient_dim
    if convention == "euclidean":
        return (2.0 * T) ** space.ambient_dim
    raise ValueError(f"unknown volume convention {convention!r}")


def _squarefree_upto(n: float) -> list[int]:
    return [d for d in range(1, int(n) + 1) if is_squarefree(d)]


def _divisible_count(values, counts, d: int) -> int:
    return int(counts[values % d == 0].sum())


def rough_count(
    space: MatrixSpace,
    region: Region,
    z: float,
    sieve_constant: float = 1.0,
    volume: str = "cell",
    threads: int | None = None,
    budget: int = DEFAULT_BUDGET,
) -> SieveResult:
    """Exact z-rough count alongside the sieve main term and remainders.

    main_term = |R| prod_{p <= z} (1 - rho(p) / p^dim); the remainder sum
    runs over squarefree d <= z.  prime_count_bound is
    sieve_constant * main_term + remainder_sum; the constant is a parameter
    and the observed exact / main_term ratio is reported next to it.
    """
    values, counts = value_counts(space, region, threads, budget)
    vol = region_volume(space, region, volume)
    dim = space.ambient_dim
    exact = int(counts[rough_mask(values, z)].sum())
    main = vol * prod((1.0 - rho(space, p) / p**dim for p in primes_up_to(z)), start=1.0)
    rem = 0.0
    for d in _squarefree_upto(z):
        rem += abs(_divisible_count(values, counts, d) - vol * rho(space, d) / d**dim)
    return SieveResult(
        main, exact, rem, float(z), sieve_constant, sieve_constant * main + rem, exact / main if main else float("nan"), vol
    )


def remainder_experiment(
    space: MatrixSpace,
    region: Region,
    d_max: int,
    volume: str = "cell",
    threads: int | None = None,
    budget: int = DEFAULT_BUDGET,
) -> list[RemainderRow]:
    """r_d = #{x in R : d | F(x)} - |R| rho(d) / d^dim for squarefree d <= d_max.

    The comparison bound is T^{dim-1} d^{dim-1}; ratio = |r_d| / bound.
    """
    values, counts = value_counts(space, region, threads, budget)
    vol = region_volume(space, region, volume)
    dim = space.ambient_dim
    T = float(region.T)
    rows = []
    for d in _squarefree_upto(d_max):
        c = _divisible_count(values, counts, d)
        r = c - vol * rho(space, d) / d**dim
        bound = T ** (dim - 1) * float(d) ** (dim - 1)
        rows.append(RemainderRow(d, c, r, bound, abs(r) / bound if bound else float("inf")))
    return rows


def small_prime_contribution(
    space: MatrixSpace,
    region: Region,
    z: float,
    threads: int | None = None,
    budget: int = DEFAULT_BUDGET,
) -> int:
    """#{x in R : F(x) is a prime <= z}."""
    if z < 2:
        return 0
    values, counts = value_counts(space, region, threads, budget)
    mask = prime_mask(values) & (values > 0) & (values <= z)
    return int(counts[mask].sum())


def write_remainder_csv(rows: list[RemainderRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "r_d", "bound", "ratio"])
        for r in rows:
            w.writerow([r.d, repr(r.r_d), repr(r.bound), repr(r.ratio)])
