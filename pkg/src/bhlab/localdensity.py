"""Local densities of F modulo prime powers and the singular series."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd, prod, sqrt

import numpy as np

from . import _kernels as K
from .errors import BudgetExceededError
from .numbertheory import is_prime, primes_up_to, zeta
from .spaces import Family, MatrixSpace, _gradient_tables, linear_split, monomials

__all__ = [
    "LocalDensity",
    "SingularSeries",
    "EquidistributionReport",
    "StabilityReport",
    "residue_counts",
    "count_mod",
    "count_mod_composite",
    "sl_count_closed_form",
    "skew_invertible_count",
    "sym_invertible_count",
    "local_factor_formula",
    "check_local_equidistribution",
    "singular_series",
    "write_factors_csv",
    "stability_check",
    "singular_locus_count",
    "MOD_BUDGET",
]

# Work budget (inner-loop iterations) for one residue histogram.
MOD_BUDGET = 10**9


@dataclass(frozen=True)
class LocalDensity:
    space: MatrixSpace
    q: int
    k: int
    m: int
    raw_count: int
    normalized: Fraction
    stabilized: int | None = None

    def to_json(self) -> dict:
        return {
            "space": self.space.to_spec(),
            "q": self.q,
            "k": self.k,
            "m": self.m,
            "raw_count": self.raw_count,
            "normalized": str(self.normalized),
            "stabilized": self.stabilized,
        }


@dataclass(frozen=True)
class SingularSeries:
    space: MatrixSpace
    truncation: int
    per_prime_factors: dict[int, Fraction]
    raw_counts: dict[int, int]
    truncated_product: float
    closed_form: float
    closed_form_symbolic: str
    brute_bound: int

    @property
    def relative_error(self) -> float:
        return abs(self.truncated_product / self.closed_form - 1.0)


@dataclass(frozen=True)
class EquidistributionReport:
    space: MatrixSpace
    q: int
    k: int
    passed: bool
    counts: dict[int, int]
    classes: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class StabilityReport:
    space: MatrixSpace
    p: int
    factor: Fraction
    deviation: float
    scaled_deviation: float


def _pad(terms: list[tuple[int, tuple[int, ...]]], width: int, dim: int):
    coef = np.array([c for c, _ in terms], dtype=np.int64)
    idx = np.array([row + (dim,) * (width - len(row)) for _, row in terms], dtype=np.int64)
    return coef, idx.reshape(len(terms), width)


@lru_cache(maxsize=None)
def _residue_tables(space: MatrixSpace):
    """Padded (c0, c1) tables for the residue kernel and the affine flag.

    Each C_j (owner j) and H (owner nb) is written as A + x_r B in the
    innermost rest coordinate x_r when that is possible.
    """
    split = linear_split(space)
    dim, deg = space.ambient_dim, space.poly_degree
    nb = len(split.block)
    owned = [(j, t) for j, t in enumerate(split.coef_tables)] + [(nb, split.const_table)]
    terms = [(j, int(c), tuple(int(k) for k in row)) for j, t in owned for c, row in zip(t.coef, t.idx)]
    r = split.rest[-1] if len(split.rest) >= 2 else None
    affine = r is not None and all(row.count(r) <= 1 for _, _, row in terms)
    t0, t1, o0, o1 = [], [], [], []
    for j, c, row in terms:
        if affine and r in row:
            row = list(row)
            row.remove(r)
            t1.append((c, tuple(row)))
            o1.append(j)
        else:
            t0.append((c, row))
            o0.append(j)
    c0c, c0i = _pad(t0, deg, dim)
    c1c, c1i = _pad(t1, deg, dim)
    return (
        c0c, c0i, c1c, c1i,
        np.array(o0, dtype=np.int64), np.array(o1, dtype=np.int64),
        np.array(split.block, dtype=np.int64), np.array(split.rest, dtype=np.int64),
        affine,
    )


def _work(space: MatrixSpace, M: int, method: str) -> int:
    if method == "exhaustive":
        return M**space.ambient_dim
    split = linear_split(space)
    return M ** len(split.rest)


@lru_cache(maxsize=256)
def _residue_counts_cached(space: MatrixSpace, M: int, method: str) -> tuple[int, ...]:
    if method == "exhaustive":
        mono = monomials(space)
        hist = K.residue_histogram_exhaustive(mono.coef, mono.idx, space.ambient_dim, M, min(M, 64))
    else:
        c0c, c0i, c1c, c1i, o0, o1, block, rest, affine = _residue_tables(space)
        nchunks = min(M, 64) if len(rest) else 1
        hist = K.residue_histogram(
            c0c, c0i, c1c, c1i, o0, o1, block, rest, space.ambient_dim, M, affine, nchunks
        )
    return tuple(int(v) for v in hist)


def residue_counts(space: MatrixSpace, M: int, method: str = "auto", budget: int = MOD_BUDGET) -> np.ndarray:
    """Array c with c[r] = #{x in (Z/M)^dim : F(x) = r mod M}.

    ``method="auto"`` enumerates only the coordinates outside the linear
    block and credits each fibre in closed form; ``"exhaustive"`` visits
    every tuple and serves as the reference.
    """
    if M < 1:
        raise ValueError("modulus must be positive")
    if method not in ("auto", "exhaustive"):
        raise ValueError(f"unknown method {method!r}")
    if monomials(space).abs_coef_sum() * float(M) ** space.poly_degree >= 2.0**62:
        raise BudgetExceededError(f"modulus {M} too large for 64-bit residue kernels")
    work = _work(space, M, method)
    if work > budget:
        raise BudgetExceededError(
            f"residue enumeration of {space} mod {M} needs ~{work:.3g} steps (budget {budget:.3g}); use a smaller k"
        )
    return np.array(_residue_counts_cached(space, M, method), dtype=np.int64)


def count_mod(
    space: MatrixSpace,
    q: int,
    k: int,
    m: int,
    method: str = "auto",
    check_stable: bool = False,
    budget: int = MOD_BUDGET,
) -> LocalDensity:
    """#{x mod q^k : F(x) = m mod q^k} with density raw / q^{k(dim-1)}.

    With ``check_stable`` the normalised density is also computed at k + 1
    and ``stabilized`` records k when the two agree.
    """
    if not is_prime(q):
        raise ValueError(f"{q} is not prime")
    if k < 1:
        raise ValueError("k must be at least 1")
    M = q**k
    raw = int(residue_counts(space, M, method, budget)[m % M])
    norm = Fraction(raw, q ** (k * (space.ambient_dim - 1)))
    stable = None
    if check_stable:
        nxt = count_mod(space, q, k + 1, m, method, False, budget)
        stable = k if nxt.normalized == norm else None
    return LocalDensity(space, q, k, m, raw, norm, stable)


def count_mod_composite(space: MatrixSpace, N: int, m: int, budget: int = MOD_BUDGET) -> int:
    """Direct count of F = m mod N for an arbitrary modulus N (no CRT)."""
    return int(residue_counts(space, N, "exhaustive", budget)[m % N])


# ---------------------------------------------------------------------------
# closed forms


def sl_count_closed_form(n: int, p: int, k: int) -> int:
    """#SL_n(Z/p^k) = p^{k(n^2-1)} prod_{j=2}^n (1 - p^{-j})."""
    if n < 2:
        raise ValueError("need n >= 2")
    val = Fraction(p) ** (k * (n * n - 1)) * prod((1 - Fraction(1, p**j) for j in range(2, n + 1)), start=Fraction(1))
    assert val.denominator == 1
    return int(val)


def skew_invertible_count(n: int, p: int) -> int:
    """Number of nonsingular 2n x 2n skew matrices over F_p."""
    if n < 1:
        raise ValueError("need n >= 1")
    return prod(p ** (2 * n - 1) - p ** (2 * i) for i in range(n))


def sym_invertible_count(n: int, p: int) -> int:
    """Number of nonsingular n x n symmetric matrices over F_p."""
    if n < 1:
        raise ValueError("need n >= 1")
    val = Fraction(p) ** (n * (n + 1) // 2) * prod(
        (1 - Fraction(1, p ** (2 * i - 1)) for i in range(1, (n + 1) // 2 + 1)), start=Fraction(1)
    )
    assert val.denominator == 1
    return int(val)


def _series_exponents(space: MatrixSpace) -> list[int]:
    n = space.n
    if space.family is Family.FULL:
        return list(range(2, n + 1))
    if space.family is Family.SKEW:
        return list(range(3, 2 * n, 2))
    return list(range(3, n + 1, 2))


def local_factor_formula(space: MatrixSpace, p: int) -> Fraction:
    """(1 - p^{-dim} rho(p)) / (1 - 1/p) from the count of nonsingular matrices."""
    return prod((1 - Fraction(1, p**j) for j in _series_exponents(space)), start=Fraction(1))


def _closed_form(space: MatrixSpace) -> tuple[float, str]:
    exps = _series_exponents(space)
    if not exps:
        return 1.0, "1"
    return prod(1.0 / zeta(j) for j in exps), " ".join(f"zeta({j})^-1" for j in exps)


# ---------------------------------------------------------------------------
# equidistribution and singular series


def _unit_classes(space: MatrixSpace, q: int, k: int) -> list[list[int]]:
    M = q**k
    units = [a for a in range(M) if gcd(a, q) == 1]
    if space.family is not Family.SYM:
        return [units]
    # the congruence A -> g^T A g scales det by det(g)^2: only square classes
    squares = {b * b % M for b in units}
    classes: list[list[int]] = []
    seen: set[int] = set()
    for a in units:
        if a in seen:
            continue
        cls = sorted({a * s % M for s in squares})
        seen.update(cls)
        classes.append(cls)
    return classes


def check_local_equidistribution(space: MatrixSpace, q: int, k: int, budget: int = MOD_BUDGET) -> EquidistributionReport:
    """Check that unit values of F mod q^k are hit equally often.

    For Full and Skew all units are compared; for Sym only units in the
    same square class.
    """
    M = q**k
    hist = residue_counts(space, M, "auto", budget)
    classes = _unit_classes(space, q, k)
    counts = {a: int(hist[a]) for cls in classes for a in cls}
    passed = all(len({counts[a] for a in cls}) == 1 for cls in classes)
    return EquidistributionReport(space, q, k, passed, counts, tuple(tuple(c) for c in classes))


def singular_series(space: MatrixSpace, P: int, brute_bound: int = 31, budget: int = MOD_BUDGET) -> SingularSeries:
    """Truncated Euler product of the singular series over primes p <= P.

    Local factors for p <= brute_bound come from counting F = 0 mod p;
    beyond that the closed local factor is used.
    """
    if P > 10**4:
        raise ValueError("truncation is limited to P <= 10**4")
    dim = space.ambient_dim
    factors: dict[int, Fraction] = {}
    raws: dict[int, int] = {}
    for p in primes_up_to(P):
        if p <= brute_bound:
            raw = count_mod(space, p, 1, 0, budget=budget).raw_count
            fac = (1 - Fraction(raw, p**dim)) / (1 - Fraction(1, p))
        else:
            fac = local_factor_formula(space, p)
            raw = int(p**dim * (1 - fac * (1 - Fraction(1, p))))
        factors[p] = fac
        raws[p] = raw
    trunc = prod((float(f) for f in factors.values()), start=1.0)
    closed, sym = _closed_form(space)
    return SingularSeries(space, P, factors, raws, trunc, closed, sym, brute_bound)


def write_factors_csv(series: SingularSeries, path) -> None:
    dim = series.space.ambient_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["prime", "raw_count", "normalized_num", "normalized_den", "factor"])
        for p, fac in series.per_prime_factors.items():
            norm = Fraction(series.raw_counts[p], p ** (dim - 1))
            w.writerow([p, series.raw_counts[p], norm.numerator, norm.denominator, repr(float(fac))])


def stability_check(space: MatrixSpace, p: int, budget: int = MOD_BUDGET) -> StabilityReport:
    """Density of F = p mod p^2, with its deviation from 1 scaled by sqrt(p)."""
    if p == 2 or not is_prime(p):
        raise ValueError("stability check needs an odd prime")
    factor = count_mod(space, p, 2, p, budget=budget).normalized
    dev = abs(float(factor) - 1.0)
    return StabilityReport(space, p, factor, dev, dev * sqrt(p))


def singular_locus_count(space: MatrixSpace, p: int, budget: int = MOD_BUDGET) -> int:
    """#{v mod p : F(v) = 0 and grad F(v) = 0 mod p}."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    dim = space.ambient_dim
    if p**dim > budget:
        raise BudgetExceededError(f"singular locus of {space} mod {p} needs {p**dim:.3g} points")
    mono = monomials(space)
    tables = _gradient_tables(space)
    gc = np.concatenate([t.coef for t in tables])
    gi = np.concatenate([t.idx for t in tables])
    own = np.concatenate([np.full(len(t.coef), j, dtype=np.int64) for j, t in enumerate(tables)])
    return int(K.singular_locus(mono.coef, mono.idx, gc, gi, own, dim, p, min(p, 64)))
