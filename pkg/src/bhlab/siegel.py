"""Integral quadratic forms: Jordan symbols, local densities, masses, class numbers.

Matrices are integral symmetric (the Gram matrix S, with the form x^T S x).
Local computations use exact Fractions; the only floating point enters
through zeta and L-values for even dimension.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
import sympy
from scipy.special import zeta as hurwitz_zeta

from . import _kernels
from .errors import BudgetExceededError, InvariantError, SingularMatrixError, UnsupportedCaseError
from .numbertheory import factorize, hilbert_symbol, kronecker, legendre, split_valuation, valuation, zeta
from .spaces import determinant, rational_diagonalize

__all__ = [
    "JordanSymbolOdd",
    "Block2",
    "JordanSymbol2",
    "MassResult",
    "BruteDensity",
    "GenusMass",
    "KitaokaReport",
    "jordan_decompose_odd",
    "jordan_decompose_2",
    "alpha_p_standard",
    "alpha_p_conway_sloane",
    "alpha_2",
    "alpha_p_bruteforce",
    "siegel_mass",
    "genus_key",
    "same_genus",
    "reduced_classes",
    "canonical_form",
    "automorphism_count",
    "mass_bruteforce",
    "class_number_bruteforce",
    "hasse_invariant",
    "dirichlet_L",
    "orbit_L",
    "symmetric_orbit_constant",
    "class_number_asymptotic",
    "measure_ratio_constant",
    "so_volume",
    "kitaoka_relation_check",
]

BRUTE_BUDGET = 4_000_000_000


def _sym(S) -> tuple[tuple[int, ...], ...]:
    rows = tuple(tuple(int(x) for x in row) for row in np.asarray(S).tolist())
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("matrix must be square")
    for i in range(n):
        for j in range(i):
            if rows[i][j] != rows[j][i]:
                raise ValueError("matrix is not symmetric")
    return rows


def _det(S) -> int:
    return determinant(S) if len(S) > 1 else int(S[0][0])


def _is_posdef(S) -> bool:
    n = len(S)
    return all(_det([row[:k] for row in S[:k]]) > 0 for k in range(1, n + 1))


# ---------------------------------------------------------------- Jordan forms


def _unit_class(u: Fraction, p: int) -> int:
    return legendre(u.numerator, p) * legendre(u.denominator, p)


def _unit_mod(u: Fraction, m: int) -> int:
    return u.numerator * pow(u.denominator, -1, m) % m


def _split(S, p: int):
    """Congruence-split S over Z_(p) into 1x1 and (at p = 2) 2x2 blocks.

    Returns (blocks, g): blocks are (valuation, block matrix) in extraction
    order, and g has columns e'_1, ... with g^T S g block diagonal.
    """
    n = len(S)
    a = [[Fraction(x) for x in row] for row in S]
    g = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    active = list(range(n))
    blocks = []
    order = []

    def col_add(dst, src, c):
        for k in range(n):
            a[k][dst] += c * a[k][src]
            g[k][dst] += c * g[k][src]
        for k in range(n):
            a[dst][k] += c * a[src][k]

    while active:
        best = None
        for ii, i in enumerate(active):
            for j in active[ii:]:
                if a[i][j] != 0:
                    key = (valuation(a[i][j], p), i != j, i, j)
                    if best is None or key < best:
                        best = key
        if best is None:
            raise SingularMatrixError("matrix is singular")
        v, offdiag, i, j = best
        if offdiag and p != 2:
            col_add(i, j, Fraction(1))
            piv = [i]
        elif offdiag:
            piv = [i, j]
        else:
            piv = [i]
        for q in piv:
            active.remove(q)
        if len(piv) == 1:
            d = a[i][i]
            for k in active:
                c = a[k][i] / d
                if c:
                    col_add(k, i, -c)
        else:
            x, y, z = a[i][i], a[i][j], a[j][j]
            det = x * z - y * y
            for k in active:
                u, w = a[k][i], a[k][j]
                ci = (u * z - w * y) / det
                cj = (w * x - u * y) / det
                if ci:
                    col_add(k, i, -ci)
                if cj:
                    col_add(k, j, -cj)
        blocks.append((v, [[a[r][c] for c in piv] for r in piv]))
        order.extend(piv)
    gt = tuple(tuple(g[r][c] for c in order) for r in range(n))
    return blocks, gt


def _block_det(b) -> Fraction:
    return b[0][0] if len(b) == 1 else b[0][0] * b[1][1] - b[0][1] * b[1][0]


@dataclass(frozen=True)
class JordanSymbolOdd:
    """p-adic Jordan symbol at an odd prime: (scale k, dim n_k, det class +-1)."""

    p: int
    blocks: tuple[tuple[int, int, int], ...]
    transform: tuple = field(default=(), compare=False, repr=False)

    @property
    def n(self) -> int:
        return sum(b[1] for b in self.blocks)

    @property
    def s(self) -> int:
        return sum(k * nk for k, nk, _ in self.blocks)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "scale": [b[0] for b in self.blocks],
            "dim": [b[1] for b in self.blocks],
            "det_class": [b[2] for b in self.blocks],
        }


def jordan_decompose_odd(S, p: int) -> JordanSymbolOdd:
    """Jordan symbol of S at an odd prime p.

    Exact rational elimination, so there is no working precision to run out
    of; the congruence transform is kept in ``transform``.
    """
    if p == 2:
        raise ValueError("use jordan_decompose_2 at p = 2")
    S = _sym(S)
    raw, g = _split(S, p)
    by_scale: dict[int, list[Fraction]] = {}
    for v, b in raw:
        by_scale.setdefault(v, []).append(b[0][0])
    blocks = []
    for k in sorted(by_scale):
        unit = Fraction(1)
        for d in by_scale[k]:
            unit *= split_valuation(d, p)[1]
        blocks.append((k, len(by_scale[k]), _unit_class(unit, p)))
    return JordanSymbolOdd(p, tuple(blocks), g)


@dataclass(frozen=True)
class Block2:
    """One 2-adic Jordan block.  kind is I, II, LoveBound or LoveFree."""

    scale: int
    dim: int
    kind: str
    octane: int | None
    det_unit: int  # determinant of the unit block mod 8 (1 for love forms)

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class JordanSymbol2:
    blocks: tuple[Block2, ...]
    oct: int
    transform: tuple = field(default=(), compare=False, repr=False)

    @property
    def n(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def s(self) -> int:
        return sum(b.scale * b.dim for b in self.blocks)

    def nontrivial(self) -> list[Block2]:
        return [b for b in self.blocks if b.dim > 0]

    def to_json(self) -> dict:
        return {
            "scale": [b.scale for b in self.blocks],
            "dim": [b.dim for b in self.blocks],
            "type": [b.kind for b in self.blocks],
            "octane": [b.octane for b in self.blocks],
            "oct": self.oct,
        }


def _octane(kind: str, dim: int, oddity: int, det_unit: int) -> int:
    if kind == "I":
        # E1 - E3 over a diagonalisation; the trace mod 8 (oddity) differs
        # from it by 4 for every entry = +-3 mod 8, whose parity is read off
        # from the determinant.
        return (oddity - (4 if kronecker(det_unit, 2) == -1 else 0)) % 8
    sign = -1 if (dim // 2) % 2 else 1
    return 0 if kronecker(sign * det_unit, 2) == 1 else 4


def jordan_decompose_2(S) -> JordanSymbol2:
    """2-adic Jordan symbol by greedy pivoting.

    An odd (scaled) diagonal entry splits off a Type I 1x1 block; otherwise
    the pivot is a 2x2 block with even diagonal and odd off-diagonal.  Love
    forms are listed for the empty scales next to nontrivial ones.
    """
    S = _sym(S)
    raw, g = _split(S, 2)
    scales: dict[int, dict] = {}
    for v, b in raw:
        e = scales.setdefault(v, {"dim": 0, "typeI": False, "oddity": 0, "det": Fraction(1)})
        e["dim"] += len(b)
        unit = split_valuation(_block_det(b), 2)[1]
        e["det"] *= unit
        if len(b) == 1:
            e["typeI"] = True
            e["oddity"] += _unit_mod(unit, 8)
    blocks = []
    present = sorted(scales)
    lo, hi = present[0] - 1, present[-1] + 1
    for k in range(lo, hi + 1):
        if k in scales:
            e = scales[k]
            kind = "I" if e["typeI"] else "II"
            det_unit = _unit_mod(e["det"], 8)
            blocks.append(Block2(k, e["dim"], kind, _octane(kind, e["dim"], e["oddity"] % 8, det_unit), det_unit))
        else:
            bound = any(scales.get(j, {}).get("typeI", False) for j in (k - 1, k + 1))
            blocks.append(Block2(k, 0, "LoveBound" if bound else "LoveFree", None, 1))
    f0 = next((b for b in blocks if b.dim > 0), None)
    return JordanSymbol2(tuple(blocks), f0.octane, g)


# ------------------------------------------------------------ local densities


def _euler(p: int, upto: int) -> Fraction:
    """prod_{i=1}^{upto} (1 - p^{-2i}), empty when upto <= 0."""
    out = Fraction(1)
    for i in range(1, upto + 1):
        out *= 1 - Fraction(1, p ** (2 * i))
    return out


def alpha_p_standard(n: int, p: int, D: int) -> Fraction:
    """alpha_p for p not dividing 2D."""
    if n % 2:
        return _euler(p, (n - 1) // 2)
    chi = legendre((-1) ** (n // 2) * D, p)
    return _euler(p, n // 2 - 1) * (1 - chi * Fraction(1, p) ** (n // 2))


def _mp_odd(p: int, nk: int, delta: int) -> Fraction:
    if nk % 2:
        return Fraction(1, 2) / _euler(p, (nk - 1) // 2)
    chi = legendre((-1) ** (nk // 2), p) * delta
    return Fraction(1, 2) / ((1 - chi * Fraction(1, p) ** (nk // 2)) * _euler(p, (nk - 2) // 2))


def _power(p: int, twice_exp: int) -> Fraction:
    if twice_exp % 2:
        raise InvariantError("half-integral power of p in a local density")
    e = twice_exp // 2
    return Fraction(p) ** e


def alpha_p_conway_sloane(S, p: int) -> Fraction:
    """alpha_p(S) at an odd prime from the Jordan symbol."""
    sym = jordan_decompose_odd(S, p)
    n, s = sym.n, sym.s
    inv = Fraction(2)
    for _, nk, dk in sym.blocks:
        inv *= _mp_odd(p, nk, dk)
    twice = -s * (n + 1)
    for (k, nk, _), (k2, nk2, _) in itertools.combinations(sym.blocks, 2):
        twice += (k2 - k) * nk * nk2
    return 1 / (inv * _power(p, twice))


def _m2_unit(dim: int, kind: str, octane: int) -> Fraction:
    """M_2 of a nontrivial block whose neighbours are love forms."""
    half = Fraction(1, 2)
    if kind == "II":
        sign = 1 if octane % 8 == 0 else -1
        return half / (_euler(2, (dim - 2) // 2) * (1 - sign * Fraction(1, 2 ** (dim // 2))))
    if dim % 2:
        if dim < 3:
            raise UnsupportedCaseError("M_2 table needs dimension >= 2")
        sign = 1 if octane % 8 in (1, 7) else -1
        return half / (_euler(2, (dim - 3) // 2) * (1 - sign * Fraction(1, 2 ** ((dim - 1) // 2))))
    if octane % 8 in (2, 6):
        return half / _euler(2, (dim - 2) // 2)
    if dim < 4:
        raise UnsupportedCaseError("M_2 table degenerates for a 2-dimensional Type I block with octane 0 or 4")
    sign = 1 if octane % 8 == 0 else -1
    return half / (_euler(2, (dim - 4) // 2) * (1 - sign * Fraction(1, 2 ** (dim // 2 - 1))))


def alpha_2(S) -> Fraction:
    """alpha_2(S) for forms with a single nontrivial 2-adic Jordan block.

    Covers every odd determinant (the block is unimodular) and pure
    rescalings 2^k S0 of one.  Several nontrivial scales are not supported.
    """
    sym = jordan_decompose_2(S)
    main = sym.nontrivial()
    if len(main) != 1:
        raise UnsupportedCaseError("alpha_2 handles a single nontrivial 2-adic Jordan block")
    f = main[0]
    n = f.dim
    inv = 2 * _m2_unit(n, f.kind, f.octane)
    for b in sym.blocks:
        if b.kind == "LoveBound":
            inv *= Fraction(1, 2)
    n_ii = 0  # adjacent Type I pairs; none with a single block
    n_two = n if f.kind == "II" else 0
    inv *= _power(2, -sym.s * (n + 1)) * Fraction(2) ** (n_ii - n_two)
    return 1 / inv


@dataclass(frozen=True)
class BruteDensity:
    value: Fraction
    p: int
    k: int
    count: int
    next_value: Fraction | None = None

    @property
    def stabilized(self) -> bool | None:
        return None if self.next_value is None else self.next_value == self.value


def _congruence_count(S, T, M: int, detp: int, budget: int) -> int:
    n = len(S)
    work = M ** (2 * n - 2) * 2 + M ** max(3 * n - 5, 0)
    if M**n > 1 << 24 or work > budget:
        raise BudgetExceededError(f"congruence count mod {M} in dimension {n} exceeds the budget")
    if n > 3:
        raise UnsupportedCaseError("congruence counting supports n <= 3")
    Sa = np.array(S, dtype=np.int64) % M
    Ta = np.array(T, dtype=np.int64) % M
    nchunks = max(1, min(64, M ** (n - 1)))
    return int(_kernels.congruence_count(Sa, Ta, M, detp, nchunks))


def alpha_p_bruteforce(S, p: int, k: int, check_stable: bool = False, budget: int = BRUTE_BUDGET) -> BruteDensity:
    """(1/2) p^{-k n(n-1)/2} #{X mod p^k : X^T S X = S mod p^k}."""
    S = _sym(S)
    n = len(S)

    def at(kk):
        c = _congruence_count(S, S, p**kk, 0, budget)
        return c, Fraction(c, 2 * p ** (kk * n * (n - 1) // 2))

    c, v = at(k)
    nxt = at(k + 1)[1] if check_stable else None
    return BruteDensity(v, p, k, c, nxt)


# ------------------------------------------------------------------- masses


@dataclass(frozen=True)
class MassResult:
    mass: float
    exact: Fraction | None
    alpha_factors: dict
    D: int
    n: int
    symbolic: str

    def to_json(self) -> dict:
        return {
            "mass": self.mass,
            "exact": None if self.exact is None else str(self.exact),
            "alpha": {str(p): str(a) for p, a in self.alpha_factors.items()},
            "D": self.D,
            "n": self.n,
            "symbolic": self.symbolic,
        }


@lru_cache(maxsize=None)
def _archimedean_part(n: int):
    """2 pi^{-n(n+1)/4} prod Gamma(k/2) prod_{k} zeta(2k), symbolically."""
    m = (n - 1) // 2 if n % 2 else n // 2 - 1
    expr = 2 * sympy.pi ** sympy.Rational(-n * (n + 1), 4)
    for k in range(1, n + 1):
        expr *= sympy.gamma(sympy.Rational(k, 2))
    for k in range(1, m + 1):
        expr *= sympy.zeta(2 * k)
    return sympy.simplify(expr), m


def siegel_mass(S) -> MassResult:
    """Siegel mass of the genus of a positive definite S, n >= 3.

    The good-prime product is folded into zeta values (and an L-value over
    odd integers for even n); bad primes use the Jordan-symbol densities.
    """
    S = _sym(S)
    n = len(S)
    if n < 3:
        raise UnsupportedCaseError("the mass formula is evaluated for n >= 3")
    if not _is_posdef(S):
        raise ValueError("siegel_mass needs a positive definite matrix")
    D = _det(S)
    bad = sorted(set(factorize(D)) | {2})
    alphas = {p: (alpha_2(S) if p == 2 else alpha_p_conway_sloane(S, p)) for p in bad}
    arch, m = _archimedean_part(n)
    local = Fraction(1)
    for p in bad:
        local *= _euler(p, m) / alphas[p]
    if n % 2:
        c = sympy.Rational(arch)
        exact = Fraction(int(c.p), int(c.q)) * local * D ** ((n + 1) // 2)
        return MassResult(float(exact), exact, alphas, D, n, f"{exact}")
    L = orbit_L(n, D)
    mass = float(arch) * float(local) * L * D ** ((n + 1) / 2)
    text = f"({arch}) * {local} * L({n // 2}) * {D}^({n + 1}/2)"
    return MassResult(mass, None, alphas, D, n, text)


# ----------------------------------------------------------------- genera


def hasse_invariant(S, p: int) -> int:
    """c_p(S) = prod_{i<j} (a_i, a_j)_p over a rational diagonalisation; p = 0 is R."""
    diag = rational_diagonalize(_sym(S))
    out = 1
    for a, b in itertools.combinations(diag, 2):
        out *= hilbert_symbol(a, b, p)
    return out


def _two_adic_delta(S) -> int:
    inv = sympy.Matrix(S).inv()
    delta = 0
    for x in inv:
        if x != 0:
            delta = max(delta, -valuation(Fraction(int(x.p), int(x.q)), 2))
    return delta


def genus_key(S) -> tuple:
    """Local data of the genus.  Complete for odd determinant; for even
    determinant the 2-adic part is coarse and same_genus refines it."""
    return _genus_key(_sym(S))


@lru_cache(maxsize=None)
def _genus_key(S) -> tuple:
    D = _det(S)
    parts = []
    for p in sorted(factorize(D)):
        if p != 2:
            parts.append((p, jordan_decompose_odd(S, p).blocks))
    sym2 = jordan_decompose_2(S)
    if D % 2:
        parts.append((2, sym2.nontrivial()[0].kind, sym2.oct))
    else:
        parts.append((2, tuple((b.scale, b.dim, b.kind) for b in sym2.nontrivial())))
    return (len(S), D, tuple(parts))


def _fine_symbol_2(S) -> tuple:
    """Per-scale (dim, type, det mod 8, oddity) of one Jordan splitting.

    Equal tuples give isometric splittings, hence Z_2-equivalence; unequal
    tuples decide nothing, since the splitting is not unique at 2.
    """
    raw, _ = _split(S, 2)
    scales: dict[int, list] = {}
    for v, b in raw:
        e = scales.setdefault(v, [0, "II", Fraction(1), 0])
        e[0] += len(b)
        unit = split_valuation(_block_det(b), 2)[1]
        e[2] *= unit
        if len(b) == 1:
            e[1] = "I"
            e[3] += _unit_mod(unit, 8)
    return tuple((k, e[0], e[1], _unit_mod(e[2], 8), e[3] % 8) for k, e in sorted(scales.items()))


def same_genus(S1, S2, budget: int = BRUTE_BUDGET) -> bool:
    """Whether S1 and S2 (positive definite, equal determinant) share a genus.

    Odd primes and odd determinants are decided by Jordan symbols.  For even
    determinant, matching per-scale 2-adic data settles equivalence;
    otherwise an X with X^T S1 X = S2 mod 2^{delta+3} and det X odd is
    searched for, 2^delta being the largest denominator of S1^{-1}; Newton
    iteration lifts such an X to Z_2.
    """
    S1, S2 = _sym(S1), _sym(S2)
    if genus_key(S1) != genus_key(S2):
        return False
    if _det(S1) % 2 or _fine_symbol_2(S1) == _fine_symbol_2(S2):
        return True
    M = 2 ** (_two_adic_delta(S1) + 3)
    return _congruence_count(S1, S2, M, 2, budget) > 0


# --------------------------------------------------------- class enumeration


def _short_vectors(S, bound: int, limit: int = 5_000_000):
    """Nonzero integer v with v^T S v <= bound, with their norms."""
    A = np.array(S, dtype=np.int64)
    n = A.shape[0]
    inv = np.linalg.inv(A.astype(float))
    r = [int(math.floor(math.sqrt(bound * inv[i, i]) + 1e-9)) for i in range(n)]
    size = math.prod(2 * x + 1 for x in r)
    if size > limit:
        raise BudgetExceededError(f"short-vector box of {size} points")
    grids = np.meshgrid(*[np.arange(-x, x + 1) for x in r], indexing="ij")
    V = np.stack([gr.ravel() for gr in grids], axis=1).astype(np.int64)
    norms = np.einsum("ij,jk,ik->i", V, A, V)
    keep = (norms <= bound) & (norms > 0)
    return V[keep], norms[keep]


def _successive_minima(V, norms, n: int) -> list[int]:
    order = np.argsort(norms, kind="stable")
    lam, basis = [], []
    for i in order:
        trial = basis + [V[i]]
        if np.linalg.matrix_rank(np.array(trial, dtype=float)) == len(trial):
            basis = trial
            lam.append(int(norms[i]))
            if len(lam) == n:
                return lam
    raise InvariantError("short vectors do not span the lattice")


def _bases(S, lam):
    """All bases with diagonal Gram entries lam, as (X columns, Gram) arrays."""
    A = np.array(S, dtype=np.int64)
    V, norms = _short_vectors(S, max(lam))
    groups = [V[norms == x] for x in lam]
    n = len(lam)
    if n == 2:
        G1, G2 = groups
        det = np.outer(G1[:, 0], G2[:, 1]) - np.outer(G1[:, 1], G2[:, 0])
        i, j = np.nonzero(np.abs(det) == 1)
        X = np.stack([G1[i], G2[j]], axis=2)
    elif n == 3:
        G1, G2, G3 = groups
        cross = np.cross(G1[:, None, :], G2[None, :, :])
        det = np.einsum("abk,ck->abc", cross, G3)
        i, j, k = np.nonzero(np.abs(det) == 1)
        X = np.stack([G1[i], G2[j], G3[k]], axis=2)
    else:
        raise UnsupportedCaseError("class enumeration supports n in {2, 3}")
    gram = np.einsum("mki,kl,mlj->mij", X, A, X)
    return X, gram


def canonical_form(S) -> tuple[tuple[int, ...], ...]:
    """GL_n(Z)-class invariant representative (n <= 3).

    The diagonal is the vector of successive minima (attained by a basis in
    these dimensions); among such bases the off-diagonal entries are
    minimised lexicographically.
    """
    S = _sym(S)
    n = len(S)
    V, norms = _short_vectors(S, max(S[i][i] for i in range(n)))
    lam = _successive_minima(V, norms, n)
    _, gram = _bases(S, lam)
    iu = np.triu_indices(n, 1)
    off = gram[:, iu[0], iu[1]]
    best = off[np.lexsort(off.T[::-1])[0]]
    out = [[0] * n for _ in range(n)]
    for i in range(n):
        out[i][i] = lam[i]
    for (i, j), v in zip(zip(*iu), best):
        out[i][j] = out[j][i] = int(v)
    return _sym(out)


@lru_cache(maxsize=None)
def _aut(S) -> tuple[int, int]:
    n = len(S)
    X, gram = _bases(S, [S[i][i] for i in range(n)])
    ok = np.all(gram == np.array(S, dtype=np.int64), axis=(1, 2))
    dets = np.rint(np.linalg.det(X[ok].astype(float))).astype(int)
    return int(ok.sum()), int((dets == -1).sum())


def automorphism_count(S, proper_only: bool = False) -> int:
    """|{X in GL_n(Z) : X^T S X = S}| for positive definite S, n <= 3."""
    S = _sym(S)
    if not _is_posdef(S):
        raise ValueError("automorphism_count needs a positive definite matrix")
    if len(S) == 1:
        return 1 if proper_only else 2
    total, improper = _aut(S)
    return total - improper if proper_only else total


def _candidates(n: int, D: int):
    if n == 2:
        for a in range(1, math.isqrt(4 * D // 3) + 1):
            for b in range(0, a // 2 + 1):
                if (D + b * b) % a == 0:
                    c = (D + b * b) // a
                    if c >= a:
                        yield ((a, b), (b, c))
        return
    if n != 3:
        raise UnsupportedCaseError("class enumeration supports n in {2, 3}")
    a11 = 1
    while a11**3 <= 2 * D:
        a22 = a11
        while a11 * a22 * a22 <= 2 * D:
            for a12 in range(0, a11 // 2 + 1):
                m2 = a11 * a22 - a12 * a12
                for a13 in range(0, a11 // 2 + 1):
                    for a23 in range(-(a22 // 2), a22 // 2 + 1):
                        rest = 2 * a12 * a23 * a13 - a11 * a23 * a23 - a22 * a13 * a13
                        num = D - rest
                        if num % m2:
                            continue
                        a33 = num // m2
                        if a33 < a22 or a11 * a22 * a33 > 2 * D:
                            continue
                        yield ((a11, a12, a13), (a12, a22, a23), (a13, a23, a33))
            a22 += 1
        a11 += 1


@lru_cache(maxsize=None)
def reduced_classes(n: int, D: int) -> tuple:
    """Canonical representatives of the GL_n(Z)-classes of positive definite
    integral symmetric matrices of determinant D (n in {2, 3})."""
    if D < 1:
        raise ValueError("determinant must be positive")
    seen = set()
    for c in _candidates(n, D):
        if _det(c) == D and _is_posdef(c):
            seen.add(canonical_form(c))
    return tuple(sorted(seen))


def class_number_bruteforce(n: int, D: int, equivalence: str = "SL") -> int:
    """h_n(D); SL-classes double every GL-class without improper automorphism."""
    classes = reduced_classes(n, D)
    if equivalence == "GL":
        return len(classes)
    if equivalence != "SL":
        raise ValueError("equivalence is GL or SL")
    return sum(1 if _aut(c)[1] else 2 for c in classes)


@dataclass(frozen=True)
class GenusMass:
    key: tuple
    classes: tuple
    automorphisms: tuple
    mass: Fraction

    @property
    def representative(self):
        return self.classes[0]

    def to_json(self) -> dict:
        return {
            "classes": [list(map(list, c)) for c in self.classes],
            "automorphisms": list(self.automorphisms),
            "mass": str(self.mass),
        }


def mass_bruteforce(n: int, D: int, budget: int = BRUTE_BUDGET) -> list[GenusMass]:
    """Classes of determinant D grouped into genera, with sum 1/|Aut| each."""
    classes = reduced_classes(n, D)
    groups: list[list] = []
    for c in classes:
        for grp in groups:
            if same_genus(grp[0], c, budget):
                grp.append(c)
                break
        else:
            groups.append([c])
    out = []
    for grp in groups:
        auts = tuple(automorphism_count(c) for c in grp)
        out.append(GenusMass(genus_key(grp[0]), tuple(grp), auts, sum((Fraction(1, a) for a in auts), Fraction(0))))
    return out


# ------------------------------------------------------- L-values, constants


@lru_cache(maxsize=None)
def _character_table(D: int, odd_only: bool) -> np.ndarray:
    period = 4 * abs(D)
    return np.array(
        [0 if (odd_only and m % 2 == 0) else kronecker(D, m) for m in range(1, period + 1)],
        dtype=float,
    )


def dirichlet_L(s: float, D: int, odd_only: bool = True, tol: float = 1e-9, max_terms: int = 10**7) -> float:
    """sum_m chi(m) m^{-s} with chi(m) = (D|m) (Kronecker), m odd by default.

    The sum is cut at N and the tail split into its mean part, summed
    exactly with the Hurwitz zeta function, and an oscillating part bounded
    by Abel summation: |tail| <= 2 P N^{-s}, P the largest partial sum of
    chi minus its mean over one period.
    """
    if s <= 1:
        raise ValueError("direct summation needs s > 1")
    chi = _character_table(int(D), odd_only)
    period = chi.size
    mean = chi.mean()
    P = float(np.max(np.abs(np.cumsum(chi - mean)))) + 1e-12
    N = period * max(1, math.ceil((2 * P / tol) ** (1.0 / s) / period))
    if N > max_terms:
        raise BudgetExceededError(f"L-series truncation at {N} terms")
    m = np.arange(1, N + 1, dtype=float)
    vals = np.tile(chi, N // period) * m ** (-s)
    total = math.fsum(vals[::-1])
    return float(total + mean * float(hurwitz_zeta(s, N + 1)))


def orbit_L(n: int, q: int) -> float:
    """L(n/2, ((-1)^{n/2} q | .)) over odd m."""
    if n % 2:
        raise ValueError("n must be even")
    return dirichlet_L(n / 2, (-1) ** (n // 2) * q)


def _gamma_product(n: int) -> float:
    return math.prod(math.gamma(k / 2) for k in range(1, n + 1))


def _odd_zeta_inverse(n: int) -> float:
    return math.prod(1.0 / zeta(j) for j in range(3, n + 1, 2))


def _branch(n: int, q: int) -> float:
    """1, 1 + 2^{1-n}/(1 - 2^{-n/2}) or 1 + 2^{1-n}/(1 + 2^{-n/2}) by q mod 8."""
    if q % 4 != (-1) ** (n // 2) % 4:
        return 1.0
    t = 2.0 ** (-n / 2)
    if q % 8 in (1, 7):
        return 1.0 + 2.0 ** (1 - n) / (1.0 - t)
    return 1.0 + 2.0 ** (1 - n) / (1.0 + t)


def measure_ratio_constant(n: int) -> float:
    """mu / mu_infinity on the positive definite cone of determinant one."""
    if n < 2:
        raise ValueError("n >= 2")
    c = 1 if n % 2 else 2
    return math.pi ** (n * (n + 1) / 4) / (c * math.prod(zeta(j) for j in range(2, n + 1)) * _gamma_product(n))


def so_volume(n: int) -> float:
    """Riemannian volume of SO_n(R)."""
    return 2.0 ** (n - 1) * math.pi ** (n * (n + 1) / 4) / _gamma_product(n)


def class_number_asymptotic(n: int, q: int) -> float:
    """Main term of h_n(q) for a prime q."""
    if n < 3:
        raise ValueError("n >= 3")
    base = q ** ((n - 1) / 2) * math.pi ** (-n * (n + 1) / 4) * _gamma_product(n)
    if n % 2:
        return base * math.prod(zeta(2 * k) for k in range(1, (n - 1) // 2 + 1))
    base *= math.prod(zeta(2 * k) for k in range(1, n // 2)) * orbit_L(n, q)
    return base * 2.0 * _branch(n, q)


def symmetric_orbit_constant(n: int, q: int, indefinite: bool = True) -> float:
    """Local product attached to determinant-q symmetric matrices.

    For indefinite orbits it is the closed form in zeta values (and, for
    even n, the L-value and the q mod 8 branch).  For the positive definite
    orbit it is assembled from the class-number main term and the measure
    ratio, normalised the same way: the count of determinant-q points in a
    patch is 2 q^{(n-1)/2} mu_infinity times this constant.
    """
    if n < 3:
        raise ValueError("n >= 3")
    if not indefinite:
        return class_number_asymptotic(n, q) / q ** ((n - 1) / 2) * measure_ratio_constant(n) / 2
    out = 0.5 * _odd_zeta_inverse(n)
    if n % 2 == 0:
        out *= orbit_L(n, q) / zeta(n) * _branch(n, q)
    return out


@dataclass(frozen=True)
class KitaokaReport:
    n: int
    D: int
    class_number: int
    total_mass: Fraction
    factor: int
    ratio: float

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["total_mass"] = str(self.total_mass)
        return d


def kitaoka_relation_check(n: int, D: int, budget: int = BRUTE_BUDGET) -> KitaokaReport:
    """h_n(D) against factor * (sum of genus masses), factor 2 (n odd) or 4."""
    h = class_number_bruteforce(n, D, "SL")
    total = sum((g.mass for g in mass_bruteforce(n, D, budget)), Fraction(0))
    factor = 2 if n % 2 else 4
    return KitaokaReport(n, D, h, total, factor, h / (factor * float(total)))
