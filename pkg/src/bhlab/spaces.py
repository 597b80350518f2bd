"""The three matrix families and their invariant polynomials.

Free coordinates follow a fixed layout.  Full matrices use all entries in
row-major order.  Skew matrices store the strict upper triangle row-major,
and symmetric matrices store the upper triangle including the diagonal,
also row-major.  Gradients and volumes are always taken with respect to
these free coordinates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ArithmeticOverflowError, SingularMatrixError

__all__ = [
    "Family",
    "MatrixSpace",
    "IntMatrix",
    "RealMatrix",
    "Monomials",
    "LinearSplit",
    "monomials",
    "linear_split",
    "last_coordinate_split",
    "eval_poly",
    "eval_real",
    "eval_int",
    "gradient",
    "gradient_real",
    "gradient_int",
    "signature",
    "rational_diagonalize",
    "psi_factor",
    "determinant",
    "pfaffian",
    "value_bound",
    "INT_BITS",
]

# Width of the exact integer arithmetic; results beyond it raise.
INT_BITS = 128


class Family(str, Enum):
    FULL = "full"
    SKEW = "skew"
    SYM = "sym"


@dataclass(frozen=True)
class MatrixSpace:
    """A family together with its size parameter.

    For ``SKEW`` the parameter ``n`` is half the matrix size, so the
    Pfaffian has degree ``n`` like the determinant in the other families.
    """

    family: Family
    n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"matrix size parameter must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def full(cls, n: int) -> "MatrixSpace":
        return cls(Family.FULL, n)

    @classmethod
    def skew(cls, n: int) -> "MatrixSpace":
        """Skew-symmetric matrices of size 2n."""
        return cls(Family.SKEW, n)

    @classmethod
    def sym(cls, n: int) -> "MatrixSpace":
        return cls(Family.SYM, n)

    @classmethod
    def from_spec(cls, spec: dict) -> "MatrixSpace":
        """Build from ``{"family": ..., "size": matrix size}``."""
        family = Family(spec["family"])
        size = int(spec["size"])
        if family is Family.SKEW:
            if size % 2:
                raise ValueError("skew-symmetric matrices need even size")
            return cls(family, size // 2)
        return cls(family, size)

    def to_spec(self) -> dict:
        return {"family": self.family.value, "size": self.size}

    @property
    def size(self) -> int:
        return 2 * self.n if self.family is Family.SKEW else self.n

    @property
    def ambient_dim(self) -> int:
        n = self.n
        if self.family is Family.FULL:
            return n * n
        if self.family is Family.SKEW:
            return 2 * n * n - n
        return n * (n + 1) // 2

    @property
    def poly_degree(self) -> int:
        return self.n

    @property
    def dim(self) -> int:
        return self.ambient_dim

    @property
    def positions(self) -> tuple[tuple[int, int], ...]:
        return _positions(self.family, self.size)

    def __str__(self) -> str:
        name = {"full": "Mat", "skew": "Skew", "sym": "Sym"}[self.family.value]
        return f"{name}_{self.size}"

    def matrix(self, coords: Sequence) -> list[list]:
        """Reconstruct the full matrix (nested lists) from free coordinates."""
        if len(coords) != self.ambient_dim:
            raise ValueError(f"{self} needs {self.ambient_dim} coordinates, got {len(coords)}")
        m = self.size
        zero = coords[0] * 0 if len(coords) else 0
        out = [[zero] * m for _ in range(m)]
        for (i, j), x in zip(self.positions, coords):
            out[i][j] = x
            if self.family is Family.SKEW:
                out[j][i] = -x
            elif self.family is Family.SYM:
                out[j][i] = x
        return out

    def coords_of(self, matrix) -> tuple:
        """Free coordinates of a matrix, checking the symmetry type exactly."""
        a = [list(row) for row in matrix]
        m = self.size
        if len(a) != m or any(len(r) != m for r in a):
            raise ValueError(f"{self} needs a {m}x{m} matrix")
        for i in range(m):
            for j in range(m):
                if self.family is Family.SKEW and a[i][j] != -a[j][i]:
                    raise ValueError("matrix is not skew-symmetric")
                if self.family is Family.SYM and a[i][j] != a[j][i]:
                    raise ValueError("matrix is not symmetric")
        return tuple(a[i][j] for i, j in self.positions)

    def matrices(self, coords: np.ndarray) -> np.ndarray:
        """Vectorised reconstruction: (N, dim) coordinates to (N, m, m) matrices."""
        coords = np.asarray(coords)
        m = self.size
        out = np.zeros(coords.shape[:-1] + (m, m), dtype=coords.dtype)
        rows, cols = np.array(self.positions).T
        out[..., rows, cols] = coords
        if self.family is Family.SKEW:
            out[..., cols, rows] = -coords
        elif self.family is Family.SYM:
            out[..., cols, rows] = coords
        return out


@lru_cache(maxsize=None)
def _positions(family: Family, m: int) -> tuple[tuple[int, int], ...]:
    if family is Family.FULL:
        return tuple((i, j) for i in range(m) for j in range(m))
    if family is Family.SKEW:
        return tuple((i, j) for i in range(m) for j in range(i + 1, m))
    return tuple((i, j) for i in range(m) for j in range(i, m))


@dataclass(frozen=True)
class IntMatrix:
    space: MatrixSpace
    coords: tuple[int, ...]

    def __post_init__(self) -> None:
        coords = tuple(int(x) for x in self.coords)
        if len(coords) != self.space.ambient_dim:
            raise ValueError(f"{self.space} needs {self.space.ambient_dim} coordinates")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_matrix(cls, space: MatrixSpace, matrix) -> "IntMatrix":
        return cls(space, space.coords_of([[int(x) for x in row] for row in matrix]))

    def matrix(self) -> list[list[int]]:
        return self.space.matrix(self.coords)

    @property
    def sup_norm(self) -> int:
        return max((abs(x) for x in self.coords), default=0)


@dataclass(frozen=True)
class RealMatrix:
    space: MatrixSpace
    coords: np.ndarray = field(compare=False)

    def __post_init__(self) -> None:
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.size != self.space.ambient_dim:
            raise ValueError(f"{self.space} needs {self.space.ambient_dim} coordinates")
        c.flags.writeable = False
        object.__setattr__(self, "coords", c)

    def matrix(self) -> np.ndarray:
        return self.space.matrices(self.coords)


# ---------------------------------------------------------------------------
# exact evaluation


def _check_width(x: int, bits: int) -> int:
    if abs(x) >= 1 << (bits - 1):
        raise ArithmeticOverflowError(f"value needs more than {bits} bits")
    return x


def determinant(a: Sequence[Sequence[int]], bits: int = INT_BITS) -> int:
    """Exact determinant by Bareiss fraction-free elimination."""
    m = [list(map(int, row)) for row in a]
    n = len(m)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        pivot = m[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                # every intermediate is a minor of the input
                m[i][j] = _check_width((m[i][j] * pivot - m[i][k] * m[k][j]) // prev, bits)
        prev = pivot
    return _check_width(sign * m[n - 1][n - 1], bits)


def _pfaffian_expand(a: list[list[int]], idx: tuple[int, ...]) -> int:
    if not idx:
        return 1
    first, rest = idx[0], idx[1:]
    total = 0
    for k, j in enumerate(rest):
        if a[first][j]:
            sub = rest[:k] + rest[k + 1 :]
            total += (-1) ** k * a[first][j] * _pfaffian_expand(a, sub)
    return total


def _pfaffian_eliminate(a: list[list[int]]) -> int:
    m = [[Fraction(x) for x in row] for row in a]
    size = len(m)
    result = Fraction(1)
    for k in range(0, size - 1, 2):
        piv = next((j for j in range(k + 1, size) if m[k][j] != 0), None)
        if piv is None:
            return 0
        if piv != k + 1:
            m[k + 1], m[piv] = m[piv], m[k + 1]
            for row in m:
                row[k + 1], row[piv] = row[piv], row[k + 1]
            result = -result
        pivot = m[k][k + 1]
        result *= pivot
        for i in range(k + 2, size):
            t = m[k][i] / pivot
            if t:
                for j in range(size):
                    m[i][j] -= t * m[k + 1][j]
                for j in range(size):
                    m[j][i] -= t * m[j][k + 1]
    assert result.denominator == 1
    return int(result)


def pfaffian(a: Sequence[Sequence[int]], bits: int = INT_BITS, method: str = "auto") -> int:
    """Exact Pfaffian of an integer skew-symmetric matrix.

    ``method="expand"`` uses first-row expansion, ``"eliminate"`` uses exact
    skew elimination, and ``"auto"`` expands up to size 6.
    """
    m = [list(map(int, row)) for row in a]
    size = len(m)
    if size % 2:
        return 0
    if method == "auto":
        method = "expand" if size <= 6 else "eliminate"
    if method == "expand":
        value = _pfaffian_expand(m, tuple(range(size)))
    elif method == "eliminate":
        value = _pfaffian_eliminate(m)
    else:
        raise ValueError(f"unknown Pfaffian method {method!r}")
    return _check_width(value, bits)


def eval_poly(space: MatrixSpace, A: IntMatrix | Sequence[int], bits: int = INT_BITS) -> int:
    """det for Full/Sym and Pff for Skew, exactly, with a width check."""
    coords = A.coords if isinstance(A, IntMatrix) else tuple(int(x) for x in A)
    if isinstance(A, IntMatrix) and A.space != space:
        raise ValueError(f"matrix belongs to {A.space}, not {space}")
    mat = space.matrix(coords)
    if space.family is Family.SKEW:
        return pfaffian(mat, bits)
    return determinant(mat, bits)


# ---------------------------------------------------------------------------
# monomial tables for vectorised and compiled evaluation


@dataclass(frozen=True)
class Monomials:
    """F = sum_t coef[t] * prod_j x[idx[t, j]] in the free coordinates."""

    coef: np.ndarray
    idx: np.ndarray

    @property
    def degree(self) -> int:
        return self.idx.shape[1]

    def abs_coef_sum(self) -> int:
        return int(np.abs(self.coef).sum())


def _matchings(items: tuple[int, ...]):
    if not items:
        yield 1, ()
        return
    first, rest = items[0], items[1:]
    for k, j in enumerate(rest):
        sub = rest[:k] + rest[k + 1 :]
        for sign, pairs in _matchings(sub):
            yield (-1) ** k * sign, ((first, j),) + pairs


def _perm_sign(p: tuple[int, ...]) -> int:
    sign, seen = 1, [False] * len(p)
    for i in range(len(p)):
        if not seen[i]:
            j, length = i, 0
            while not seen[j]:
                seen[j] = True
                j = p[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def monomials(space: MatrixSpace) -> Monomials:
    index = {pos: k for k, pos in enumerate(space.positions)}
    terms: dict[tuple[int, ...], int] = {}
    m = space.size
    if space.family is Family.SKEW:
        for sign, pairs in _matchings(tuple(range(m))):
            key = tuple(sorted(index[p] for p in pairs))
            terms[key] = terms.get(key, 0) + sign
    else:
        if m > 7:
            raise ValueError("monomial tables are limited to matrix size 7")
        for perm in itertools.permutations(range(m)):
            sign = _perm_sign(perm)
            key = []
            for i, j in enumerate(perm):
                key.append(index[(min(i, j), max(i, j))] if space.family is Family.SYM else index[(i, j)])
            key = tuple(sorted(key))
            terms[key] = terms.get(key, 0) + sign
    items = sorted((k, c) for k, c in terms.items() if c != 0)
    coef = np.array([c for _, c in items], dtype=np.int64)
    idx = np.array([k for k, _ in items], dtype=np.int64).reshape(len(items), space.poly_degree)
    coef.flags.writeable = False
    idx.flags.writeable = False
    return Monomials(coef, idx)


@dataclass(frozen=True)
class LinearSplit:
    """F = sum_j C_j(rest) * x[block[j]] + H(rest).

    ``block`` lists coordinates in which F is jointly affine; ``rest`` the
    others.  Each C_j and H is a monomial table over the full coordinate
    vector that only touches ``rest``.  For Full the block is the last row, for Skew the
    last column, and for Sym the last diagonal entry.
    """

    block: tuple[int, ...]
    rest: tuple[int, ...]
    coef_tables: tuple[Monomials, ...]
    const_table: Monomials


@lru_cache(maxsize=None)
def linear_split(space: MatrixSpace) -> LinearSplit:
    m = space.size
    pos = space.positions
    if space.family is Family.FULL:
        block = tuple(k for k, (i, j) in enumerate(pos) if i == m - 1)
    elif space.family is Family.SKEW:
        block = tuple(k for k, (i, j) in enumerate(pos) if j == m - 1)
    else:
        block = (len(pos) - 1,)
    rest = tuple(k for k in range(space.ambient_dim) if k not in block)
    mono = monomials(space)
    deg = mono.degree
    coef_terms: list[list[tuple[int, tuple[int, ...]]]] = [[] for _ in block]
    const_terms: list[tuple[int, tuple[int, ...]]] = []
    for c, row in zip(mono.coef, mono.idx):
        hits = [b for b, k in enumerate(block) if k in row]
        if len(hits) > 1 or (hits and list(row).count(block[hits[0]]) > 1):
            raise AssertionError(f"{space} is not affine in the chosen block")
        if hits:
            row = list(row)
            row.remove(block[hits[0]])
            coef_terms[hits[0]].append((int(c), tuple(row)))
        else:
            const_terms.append((int(c), tuple(int(k) for k in row)))

    def table(terms, d):
        coef = np.array([c for c, _ in terms], dtype=np.int64)
        idx = np.array([k for _, k in terms], dtype=np.int64).reshape(len(terms), d)
        return Monomials(coef, idx)

    return LinearSplit(
        block,
        rest,
        tuple(table(t, deg - 1) for t in coef_terms),
        table(const_terms, deg),
    )


def _eval_table(table: Monomials, x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape[:-1], dtype=np.result_type(x.dtype, np.int64))
    for c, row in zip(table.coef, table.idx):
        term = np.full(x.shape[:-1], c, dtype=out.dtype)
        for k in row:
            term = term * x[..., k]
        out = out + term
    return out


def value_bound(space: MatrixSpace, radius: float) -> int:
    """Upper bound for |F| on the sup-norm ball of the given radius.

    Uses the smaller of the Hadamard bound and the coefficient bound.
    """
    n = space.poly_degree
    r = float(radius)
    coef = monomials(space).abs_coef_sum() * r**n
    if space.family is Family.SKEW:
        hadamard = ((2 * n - 1) ** 0.5 * r) ** n
    else:
        hadamard = (n**0.5 * r) ** n
    return int(np.floor(min(coef, hadamard) + 1e-9))


def eval_int(space: MatrixSpace, coords: np.ndarray) -> np.ndarray:
    """Vectorised exact evaluation on int64 coordinates, (N, dim) to (N,)."""
    x = np.asarray(coords, dtype=np.int64)
    bound = monomials(space).abs_coef_sum() * float(np.abs(x).max(initial=0)) ** space.poly_degree
    if bound >= 2.0**62:
        raise ArithmeticOverflowError("int64 evaluation could overflow; use eval_poly")
    return _eval_table(monomials(space), x)


def eval_real(space: MatrixSpace, coords: np.ndarray) -> np.ndarray:
    """Vectorised floating evaluation, (..., dim) to (...)."""
    x = np.asarray(coords, dtype=float)
    return _eval_table(monomials(space), x).astype(float)


@lru_cache(maxsize=None)
def _gradient_tables(space: MatrixSpace) -> tuple[Monomials, ...]:
    mono = monomials(space)
    out = []
    for k in range(space.ambient_dim):
        terms: dict[tuple[int, ...], int] = {}
        for c, row in zip(mono.coef, mono.idx):
            row = list(row)
            mult = row.count(k)
            if mult:
                row.remove(k)
                key = tuple(row)
                terms[key] = terms.get(key, 0) + int(c) * mult
        items = sorted((key, c) for key, c in terms.items() if c)
        coef = np.array([c for _, c in items], dtype=np.int64)
        idx = np.array([key for key, _ in items], dtype=np.int64).reshape(len(items), space.poly_degree - 1)
        out.append(Monomials(coef, idx))
    return tuple(out)


def gradient_real(space: MatrixSpace, coords: np.ndarray) -> np.ndarray:
    """Gradient in the free coordinates, (..., dim) to (..., dim)."""
    x = np.asarray(coords, dtype=float)
    return np.stack([_eval_table(t, x).astype(float) for t in _gradient_tables(space)], axis=-1)


def gradient_int(space: MatrixSpace, coords: np.ndarray) -> np.ndarray:
    x = np.asarray(coords, dtype=np.int64)
    return np.stack([_eval_table(t, x) for t in _gradient_tables(space)], axis=-1)


def gradient(space: MatrixSpace, X: RealMatrix | Sequence[float]) -> np.ndarray:
    """Gradient of F at one point, with respect to the free coordinates.

    Tied entries are handled by the chain rule: in Sym an off-diagonal
    coordinate feeds two matrix entries, so its partial derivative is twice
    the cofactor.
    """
    coords = X.coords if isinstance(X, RealMatrix) else np.asarray(X, dtype=float)
    return gradient_real(space, coords)


# ---------------------------------------------------------------------------
# rational diagonalisation and signature


def rational_diagonalize(S: Sequence[Sequence]) -> list[Fraction]:
    """Diagonal entries of a rational congruence diagonalisation of S.

    Pivots on a nonzero diagonal entry when one exists; otherwise replaces
    e_i by e_i + e_j for an off-diagonal nonzero entry (Sylvester).
    """
    a = [[Fraction(x) for x in row] for row in S]
    n = len(a)
    for i in range(n):
        for j in range(n):
            if a[i][j] != a[j][i]:
                raise ValueError("matrix is not symmetric")
    diag: list[Fraction] = []
    active = list(range(n))
    while active:
        piv = next((i for i in active if a[i][i] != 0), None)
        if piv is None:
            pair = next(((i, j) for i in active for j in active if i < j and a[i][j] != 0), None)
            if pair is None:
                raise SingularMatrixError("matrix is singular")
            i, j = pair
            for k in range(n):
                a[i][k] += a[j][k]
            for k in range(n):
                a[k][i] += a[k][j]
            piv = i
        d = a[piv][piv]
        active.remove(piv)
        for i in active:
            t = a[i][piv] / d
            if t:
                for k in range(n):
                    a[i][k] -= t * a[piv][k]
                for k in range(n):
                    a[k][i] -= t * a[k][piv]
        diag.append(d)
    return diag


def signature(A: IntMatrix | Sequence[Sequence[int]]) -> tuple[int, int]:
    """(positive, negative) inertia of a nonsingular symmetric matrix."""
    mat = A.matrix() if isinstance(A, IntMatrix) else A
    if isinstance(A, IntMatrix) and A.space.family is not Family.SYM:
        raise ValueError("signature needs a symmetric matrix")
    diag = rational_diagonalize(mat)
    pos = sum(1 for d in diag if d > 0)
    return pos, len(diag) - pos


def psi_factor(p: int, q: int) -> int:
    """1 when the orbit of signature (p, q) carries positive determinants."""
    if p < 0 or q < 0:
        raise ValueError("signature entries are nonnegative")
    return 1 if q % 2 == 0 else 0


@lru_cache(maxsize=None)
def last_coordinate_split(space: MatrixSpace) -> tuple[Monomials, Monomials]:
    """(G, H) with F = G * x_last + H; both tables ignore the last coordinate."""
    last = space.ambient_dim - 1
    mono = monomials(space)
    g_terms, h_terms = [], []
    for c, row in zip(mono.coef, mono.idx):
        row = [int(k) for k in row]
        if last in row:
            row.remove(last)
            g_terms.append((int(c), tuple(row)))
        else:
            h_terms.append((int(c), tuple(row)))
    deg = mono.degree

    def table(terms, d):
        coef = np.array([c for c, _ in terms], dtype=np.int64)
        idx = np.array([k for _, k in terms], dtype=np.int64).reshape(len(terms), d)
        return Monomials(coef, idx)

    return table(g_terms, deg - 1), table(h_terms, deg)
