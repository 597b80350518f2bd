"""Small arithmetic helpers: prime tables, symbols, zeta values."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd, prod

import numpy as np
from scipy.special import zeta as _scipy_zeta
from sympy import isprime as _isprime
from sympy.functions.combinatorial.numbers import kronecker_symbol
from sympy.functions.combinatorial.numbers import jacobi_symbol, legendre_symbol
from sympy.ntheory import factorint

__all__ = [
    "prime_table",
    "primes_up_to",
    "is_prime",
    "factorize",
    "is_squarefree",
    "squarefree_up_to",
    "legendre",
    "jacobi",
    "kronecker",
    "valuation",
    "split_valuation",
    "hilbert_symbol",
    "zeta",
    "zeta_product",
    "divisor_sum",
]

# Sieve tables larger than this many entries fall back to Miller-Rabin.
SIEVE_LIMIT = 1 << 32


@lru_cache(maxsize=8)
def _sieve(n: int) -> np.ndarray:
    table = np.ones(n + 1, dtype=np.bool_)
    table[:2] = False
    for i in range(2, int(n**0.5) + 1):
        if table[i]:
            table[i * i :: i] = False
    table.flags.writeable = False
    return table


def prime_table(n: int) -> np.ndarray:
    """Boolean array ``t`` of length ``n + 1`` with ``t[k]`` true iff k is prime."""
    if n > SIEVE_LIMIT:
        raise ValueError(f"sieve bound {n} exceeds the table budget {SIEVE_LIMIT}")
    # round up so that nearby bounds share one cached table
    size = max(1024, 1 << max(0, int(n).bit_length()))
    return _sieve(min(size, SIEVE_LIMIT))[: n + 1]


def primes_up_to(n: float) -> list[int]:
    n = int(np.floor(n))
    if n < 2:
        return []
    return [int(p) for p in np.flatnonzero(prime_table(n))]


def is_prime(n: int) -> bool:
    # sympy's isprime is a deterministic Miller-Rabin below 2**64
    return n > 1 and bool(_isprime(int(n)))


def factorize(n: int) -> dict[int, int]:
    if n == 0:
        raise ValueError("cannot factor 0")
    return {int(p): int(e) for p, e in factorint(abs(int(n))).items()}


def is_squarefree(n: int) -> bool:
    return n >= 1 and all(e == 1 for e in factorize(n).values())


def squarefree_up_to(n: int) -> list[int]:
    return [d for d in range(1, int(n) + 1) if is_squarefree(d)]


def legendre(a: int, p: int) -> int:
    """Legendre symbol (a|p) for an odd prime p, 0 when p divides a."""
    a %= p
    return 0 if a == 0 else int(legendre_symbol(a, p))


def jacobi(a: int, m: int) -> int:
    return int(jacobi_symbol(a, m))


def kronecker(a: int, m: int) -> int:
    return int(kronecker_symbol(a, m))


def valuation(x: int | Fraction, p: int) -> int:
    x = Fraction(x)
    if x == 0:
        raise ValueError("valuation of 0 is infinite")
    v = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def split_valuation(x: int | Fraction, p: int) -> tuple[int, Fraction]:
    """Return (v, u) with x = p**v * u and u a p-adic unit."""
    v = valuation(x, p)
    return v, Fraction(x) / Fraction(p) ** v


def _unit_mod(u: Fraction, m: int) -> int:
    return u.numerator * pow(u.denominator, -1, m) % m


def hilbert_symbol(a: int | Fraction, b: int | Fraction, p: int) -> int:
    """Hilbert symbol (a, b)_p for nonzero rationals; p = 0 means the real place."""
    a, b = Fraction(a), Fraction(b)
    if a == 0 or b == 0:
        raise ValueError("Hilbert symbol needs nonzero arguments")
    if p == 0:
        return -1 if (a < 0 and b < 0) else 1
    alpha, u = split_valuation(a, p)
    beta, w = split_valuation(b, p)
    if p != 2:
        eps = (p - 1) // 2
        sign = -1 if (alpha * beta * eps) % 2 else 1
        return sign * legendre(_unit_mod(u, p), p) ** beta * legendre(_unit_mod(w, p), p) ** alpha
    u8, w8 = _unit_mod(u, 8), _unit_mod(w, 8)

    def e(x: int) -> int:
        return ((x - 1) // 2) % 2

    def om(x: int) -> int:
        return ((x * x - 1) // 8) % 2

    exponent = e(u8) * e(w8) + alpha * om(w8) + beta * om(u8)
    return -1 if exponent % 2 else 1


def zeta(s: float) -> float:
    """Riemann zeta for real s > 1 (Cephes, double precision)."""
    if s <= 1:
        raise ValueError("zeta is evaluated only for s > 1")
    return float(_scipy_zeta(s, 1))


def zeta_product(exponents) -> float:
    """Product of 1/zeta(j) over the given exponents."""
    return prod(1.0 / zeta(j) for j in exponents)


def divisor_sum(m: int) -> int:
    return sum(d for d in range(1, m + 1) if m % d == 0)


def coprime(a: int, b: int) -> bool:
    return gcd(a, b) == 1
