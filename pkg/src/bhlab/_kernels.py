"""Compiled enumeration loops.

Every kernel walks integer points in a fixed lexicographic order and
accumulates integer histograms per chunk of the first coordinate.  The
chunks are summed in index order afterwards, so results do not depend on
the number of worker threads.
"""

from __future__ import annotations

import os

# Allow more workers than cores so thread-count invariance can be exercised
# on small machines; must happen before numba is imported.
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(8, os.cpu_count() or 1)))
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

import numba  # noqa: E402
import numpy as np  # noqa: E402
from numba import njit, prange  # noqa: E402

KIND_BOX = 0
KIND_CONE = 1
KIND_CUTTING = 2


def max_threads() -> int:
    return int(numba.config.NUMBA_NUM_THREADS)


def set_threads(k: int | None) -> int:
    """Set the worker count (clamped to the pool size); returns the value used."""
    if k is None:
        k = max_threads()
    k = max(1, min(int(k), max_threads()))
    numba.set_num_threads(k)
    return k


@njit(cache=True, inline="always")
def _eval(coef, idx, x):
    s = 0
    for t in range(coef.shape[0]):
        term = coef[t]
        for j in range(idx.shape[1]):
            term *= x[idx[t, j]]
        s += term
    return s


@njit(cache=True, inline="always")
def _gcd(a, b):
    a = abs(a)
    b = abs(b)
    while b:
        a, b = b, a % b
    return a


@njit(cache=True)
def _classify(kind, params, x, dim, F, deg):
    """-1 to skip the point, otherwise the histogram class index."""
    if kind == KIND_BOX:
        return 0
    if F == 0:
        return -1 if kind == KIND_CONE else 0
    sup = 0
    for j in range(dim):
        a = abs(x[j])
        if a > sup:
            sup = a
    absF = abs(F)
    level = absF ** (1.0 / deg)
    ratio = sup / level
    if kind == KIND_CONE:
        # params: sign, height, lo, hi
        sign = params[0]
        if F * sign < 0:
            return -1
        if level > params[1] * (1.0 + 1e-12):
            return -1
        if ratio <= params[2] or ratio > params[3]:
            return -1
        return 0
    # cutting of the box of radius T: params T, m0, eta, K, signs (1 or 2)
    T = params[0]
    m0 = params[1]
    eta = params[2]
    K = int(params[3])
    two_signs = params[4] > 1.5
    if F < 0 and not two_signs:
        return 0
    # piece k covers gauge in (m0 + (k-1) eta, m0 + k eta], k = 1..K
    k = int(np.ceil((ratio - m0) / eta))
    if k < 1 or k > K:
        return 0
    mk = m0 + k * eta
    if level / T <= 1.0 / mk:
        return 1
    return 0


@njit(parallel=True, cache=True)
def region_histogram(gc, gi, hc, hi, dim, R, B, kind, params, deg, nclass, nchunks):
    """Histogram of F over integer points of [-R, R]^dim, split by class.

    F is evaluated as G * x_last + H; G and H depend on the other
    coordinates only.  Requires dim >= 2.  Output shape (nclass, 2B + 1),
    with F = v stored at column v + B.
    """
    L = 2 * R + 1
    width = 2 * B + 1
    out = np.zeros((nchunks, nclass, width), dtype=np.int64)
    npref = 1
    for _ in range(dim - 2):
        npref *= L
    for c in prange(nchunks):
        x = np.empty(dim, dtype=np.int64)
        hist = out[c]
        for first in range(c, L, nchunks):
            x[0] = first - R
            for j in range(1, dim - 1):
                x[j] = -R
            for _ in range(npref):
                x[dim - 1] = 0
                G = _eval(gc, gi, x)
                H = _eval(hc, hi, x)
                F = H - G * R
                if kind == KIND_BOX:
                    col = F + B
                    for _t in range(L):
                        hist[0, col] += 1
                        col += G
                else:
                    for t in range(L):
                        x[dim - 1] = t - R
                        cls = _classify(kind, params, x, dim, F, deg)
                        if cls >= 0:
                            hist[cls, F + B] += 1
                        F += G
                j = dim - 2
                while j >= 1:
                    if x[j] < R:
                        x[j] += 1
                        break
                    x[j] = -R
                    j -= 1
    total = np.zeros((nclass, width), dtype=np.int64)
    for c in range(nchunks):
        total += out[c]
    return total


@njit(parallel=True, cache=True)
def region_level_count(gc, gi, hc, hi, dim, R, m, kind, params, deg, nchunks):
    """Number of integer points of [-R, R]^dim with F = m inside the region.

    The last coordinate is solved from F = G * x_last + H.
    """
    L = 2 * R + 1
    out = np.zeros(nchunks, dtype=np.int64)
    npref = 1
    for _ in range(dim - 2):
        npref *= L
    for c in prange(nchunks):
        x = np.empty(dim, dtype=np.int64)
        acc = 0
        for first in range(c, L, nchunks):
            x[0] = first - R
            for j in range(1, dim - 1):
                x[j] = -R
            for _ in range(npref):
                x[dim - 1] = 0
                G = _eval(gc, gi, x)
                H = _eval(hc, hi, x)
                if G == 0:
                    if H == m:
                        for t in range(L):
                            x[dim - 1] = t - R
                            if _classify(kind, params, x, dim, m, deg) >= 0:
                                acc += 1
                elif (m - H) % G == 0:
                    v = (m - H) // G
                    if -R <= v <= R:
                        x[dim - 1] = v
                        if _classify(kind, params, x, dim, m, deg) >= 0:
                            acc += 1
                j = dim - 2
                while j >= 1:
                    if x[j] < R:
                        x[j] += 1
                        break
                    x[j] = -R
                    j -= 1
        out[c] = acc
    total = 0
    for c in range(nchunks):
        total += out[c]
    return total


@njit(cache=True, inline="always")
def _eval_owned(coef, idx, owner, x, out):
    for t in range(coef.shape[0]):
        term = coef[t]
        for q in range(idx.shape[1]):
            term *= x[idx[t, q]]
        out[owner[t]] += term


@njit(parallel=True, cache=True)
def residue_histogram(c0c, c0i, c1c, c1i, own0, own1, block, rest, dim, M, affine, nchunks):
    """Counts of F mod M over all coordinate tuples in [0, M)^dim.

    F = sum_j C_j x_block[j] + H with C_j and H functions of the rest
    coordinates.  Index nb of the owner arrays denotes H.  For fixed rest
    coordinates the block part runs uniformly over the multiples of
    g = gcd(C_1, ..., C_r, M), so each fibre is credited at once and only
    the rest coordinates are enumerated.

    When ``affine`` is set, the tables (c0, c1) split every C_j and H as
    A + x_r B in the innermost rest coordinate x_r, which is then stepped
    incrementally; otherwise c0 holds the full tables.  With no rest
    coordinates pass nchunks = 1.  The caller guarantees that
    sum |coef| * M^deg stays below 2^62.
    """
    nb = block.shape[0]
    nr = rest.shape[0]
    gtab = np.empty(M, dtype=np.int64)
    for v in range(M):
        gtab[v] = _gcd(v, M)
    out = np.zeros((nchunks, M), dtype=np.int64)
    uniform = np.zeros(nchunks, dtype=np.int64)
    fibre = 1
    for _ in range(nb):
        fibre *= M
    nouter = 1
    for _ in range(nr - 2):
        nouter *= M
    inner = M if nr >= 2 else 1
    for c in prange(nchunks):
        # slot dim holds the constant 1 used to pad lower-degree monomials
        x = np.zeros(dim + 1, dtype=np.int64)
        x[dim] = 1
        A = np.zeros(nb + 1, dtype=np.int64)
        D = np.zeros(nb + 1, dtype=np.int64)
        hist = out[c]
        for first in range(c, M, nchunks):
            if nr > 0:
                x[rest[0]] = first
            for j in range(1, nr):
                x[rest[j]] = 0
            for _ in range(nouter):
                if affine:
                    for j in range(nb + 1):
                        A[j] = 0
                        D[j] = 0
                    _eval_owned(c0c, c0i, own0, x, A)
                    _eval_owned(c1c, c1i, own1, x, D)
                    for j in range(nb + 1):
                        A[j] %= M
                        D[j] %= M
                for t in range(inner):
                    if nr >= 2:
                        x[rest[nr - 1]] = t
                    if not affine:
                        for j in range(nb + 1):
                            A[j] = 0
                        _eval_owned(c0c, c0i, own0, x, A)
                        for j in range(nb + 1):
                            A[j] %= M
                    g = M
                    for j in range(nb):
                        g = gtab[A[j]] if g == M else _gcd(g, A[j])
                        if g == 1:
                            break
                    if g == 1:
                        uniform[c] += fibre // M
                    else:
                        share = fibre // (M // g)
                        for r in range(A[nb] % g, M, g):
                            hist[r] += share
                    if affine:
                        for j in range(nb + 1):
                            A[j] += D[j]
                            if A[j] >= M:
                                A[j] -= M
                j = nr - 2
                while j >= 1:
                    x[rest[j]] += 1
                    if x[rest[j]] < M:
                        break
                    x[rest[j]] = 0
                    j -= 1
            if nr == 0:
                break
    total = np.zeros(M, dtype=np.int64)
    extra = 0
    for c in range(nchunks):
        total += out[c]
        extra += uniform[c]
    for r in range(M):
        total[r] += extra
    return total


@njit(parallel=True, cache=True)
def residue_histogram_exhaustive(coef, idx, dim, M, nchunks):
    """Plain enumeration of F mod M over [0, M)^dim; the reference oracle."""
    out = np.zeros((nchunks, M), dtype=np.int64)
    npref = 1
    for _ in range(dim - 1):
        npref *= M
    for c in prange(nchunks):
        x = np.zeros(dim, dtype=np.int64)
        hist = out[c]
        for first in range(c, M, nchunks):
            x[0] = first
            for j in range(1, dim):
                x[j] = 0
            for _ in range(npref):
                v = 0
                for t in range(coef.shape[0]):
                    term = coef[t]
                    for q in range(idx.shape[1]):
                        term = (term * x[idx[t, q]]) % M
                    v += term
                hist[v % M] += 1
                j = dim - 1
                while j >= 1:
                    x[j] += 1
                    if x[j] < M:
                        break
                    x[j] = 0
                    j -= 1
    total = np.zeros(M, dtype=np.int64)
    for c in range(nchunks):
        total += out[c]
    return total


@njit(parallel=True, cache=True)
def singular_locus(coef, idx, gcoef, gidx, gown, dim, p, nchunks):
    """#{x mod p : F(x) = 0 and every partial derivative = 0 mod p}."""
    out = np.zeros(nchunks, dtype=np.int64)
    npref = 1
    for _ in range(dim - 1):
        npref *= p
    for c in prange(nchunks):
        x = np.zeros(dim, dtype=np.int64)
        grad = np.zeros(dim, dtype=np.int64)
        acc = 0
        for first in range(c, p, nchunks):
            x[0] = first
            for j in range(1, dim):
                x[j] = 0
            for _ in range(npref):
                v = 0
                for t in range(coef.shape[0]):
                    term = coef[t]
                    for q in range(idx.shape[1]):
                        term = (term * x[idx[t, q]]) % p
                    v += term
                if v % p == 0:
                    for j in range(dim):
                        grad[j] = 0
                    for t in range(gcoef.shape[0]):
                        term = gcoef[t]
                        for q in range(gidx.shape[1]):
                            term = (term * x[gidx[t, q]]) % p
                        grad[gown[t]] += term
                    ok = True
                    for j in range(dim):
                        if grad[j] % p != 0:
                            ok = False
                            break
                    if ok:
                        acc += 1
                j = dim - 1
                while j >= 1:
                    x[j] += 1
                    if x[j] < p:
                        break
                    x[j] = 0
                    j -= 1
        out[c] = acc
    total = 0
    for c in range(nchunks):
        total += out[c]
    return total


@njit(cache=True)
def _column_tables(S, M):
    """All vectors mod M (rows), their images S v mod M, and Q(v) = v^T S v mod M."""
    n = S.shape[0]
    N = 1
    for _ in range(n):
        N *= M
    V = np.zeros((N, n), dtype=np.int64)
    SV = np.zeros((N, n), dtype=np.int64)
    Q = np.zeros(N, dtype=np.int64)
    for r in range(N):
        t = r
        for j in range(n - 1, -1, -1):
            V[r, j] = t % M
            t //= M
        for i in range(n):
            s = 0
            for j in range(n):
                s += S[i, j] * V[r, j]
            SV[r, i] = s % M
        q = 0
        for i in range(n):
            q += V[r, i] * SV[r, i]
        Q[r] = q % M
    return V, SV, Q


@njit(cache=True, inline="always")
def _pair(V, SV, a, b, M):
    s = 0
    for i in range(V.shape[1]):
        s += V[a, i] * SV[b, i]
    return s % M


@njit(cache=True)
def _select(Q, want):
    cnt = 0
    for r in range(Q.shape[0]):
        if Q[r] == want:
            cnt += 1
    out = np.empty(cnt, dtype=np.int64)
    cnt = 0
    for r in range(Q.shape[0]):
        if Q[r] == want:
            out[cnt] = r
            cnt += 1
    return out


@njit(cache=True, inline="always")
def _det3(V, a, b, c):
    return (
        V[a, 0] * (V[b, 1] * V[c, 2] - V[b, 2] * V[c, 1])
        - V[a, 1] * (V[b, 0] * V[c, 2] - V[b, 2] * V[c, 0])
        + V[a, 2] * (V[b, 0] * V[c, 1] - V[b, 1] * V[c, 0])
    )


@njit(parallel=True, cache=True)
def congruence_count(S, T, M, detp, nchunks):
    """#{X mod M : X^T S X = T mod M} for n in {1, 2, 3}, by columns.

    Column i of X must have Q(x_i) = T_ii; the pairings x_i^T S x_j = T_ij
    are filtered one column at a time.  With detp > 0 only X whose
    determinant is nonzero mod detp are counted.
    """
    n = S.shape[0]
    V, SV, Q = _column_tables(S, M)
    C1 = _select(Q, T[0, 0] % M)
    if n == 1:
        if detp == 0:
            return C1.shape[0]
        k = 0
        for a in range(C1.shape[0]):
            if V[C1[a], 0] % detp != 0:
                k += 1
        return k
    C2 = _select(Q, T[1, 1] % M)
    C3 = _select(Q, T[n - 1, n - 1] % M)
    t12 = T[0, 1] % M
    t13 = T[0, n - 1] % M
    t23 = T[1, n - 1] % M
    out = np.zeros(nchunks, dtype=np.int64)
    for c in prange(nchunks):
        buf2 = np.empty(C2.shape[0], dtype=np.int64)
        buf3 = np.empty(C3.shape[0], dtype=np.int64)
        acc = 0
        for a in range(c, C1.shape[0], nchunks):
            u = C1[a]
            k2 = 0
            for b in range(C2.shape[0]):
                if _pair(V, SV, u, C2[b], M) == t12:
                    buf2[k2] = C2[b]
                    k2 += 1
            if n == 2:
                if detp == 0:
                    acc += k2
                else:
                    for b in range(k2):
                        w = buf2[b]
                        if (V[u, 0] * V[w, 1] - V[u, 1] * V[w, 0]) % detp != 0:
                            acc += 1
                continue
            k3 = 0
            for b in range(C3.shape[0]):
                if _pair(V, SV, u, C3[b], M) == t13:
                    buf3[k3] = C3[b]
                    k3 += 1
            for b in range(k2):
                for d in range(k3):
                    if _pair(V, SV, buf2[b], buf3[d], M) == t23:
                        if detp == 0 or _det3(V, u, buf2[b], buf3[d]) % detp != 0:
                            acc += 1
        out[c] = acc
    total = 0
    for c in range(nchunks):
        total += out[c]
    return total
