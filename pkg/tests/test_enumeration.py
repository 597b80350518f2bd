import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhlab.errors import BudgetExceededError, InvalidRegionError
from bhlab.enumeration import (
    Patch,
    Region,
    check_star_shaped,
    count_level_set,
    count_primes,
    hecke_factor,
    hecke_prediction,
    prime_mask,
    value_counts,
)
from bhlab.numbertheory import divisor_sum, is_prime
from bhlab.spaces import MatrixSpace, eval_int

F2 = MatrixSpace.full(2)


def brute(space, R):
    X = np.array(list(itertools.product(range(-R, R + 1), repeat=space.ambient_dim)))
    return X, eval_int(space, X)


def test_examples():
    assert count_primes(F2, Region.box(1)).total == 4
    assert count_primes(F2, Region.box(1, "prime_ideal")).total == 8
    for space in (F2, MatrixSpace.sym(3), MatrixSpace.skew(2)):
        assert count_primes(space, Region.box(0)).total == 0
    assert count_level_set(F2, 1, Region.box(1)) == 20
    assert count_level_set(F2, 2, Region.box(1)) == 4
    assert count_level_set(MatrixSpace.skew(1), 5, Region.box(4)) == 0


def test_hecke_examples():
    assert hecke_factor(2, 4) == 7
    assert hecke_factor(3, 2) == 7
    assert all(hecke_factor(n, 1) == 1 for n in range(1, 6))
    assert hecke_prediction(2, 1, 1.0) == pytest.approx(6 / np.pi**2)


def test_g2_is_divisor_sum():
    assert all(hecke_factor(2, m) == divisor_sum(m) for m in range(1, 10**4 + 1))


@pytest.mark.parametrize(
    "space,R", [(F2, 2), (MatrixSpace.sym(2), 3), (MatrixSpace.sym(3), 1), (MatrixSpace.skew(2), 1), (MatrixSpace.full(3), 1)],
    ids=str,
)
def test_histogram_matches_brute_force(space, R):
    X, F = brute(space, R)
    vals, cnt = np.unique(F, return_counts=True)
    v, c = value_counts(space, Region.box(R))
    assert v.tolist() == vals.tolist() and c.tolist() == cnt.tolist()
    want = int(sum(1 for f in F if f > 0 and is_prime(int(f))))
    assert count_primes(space, Region.box(R)).total == want


def test_cone_matches_brute_force():
    reg = Region.cone(Patch(1, 0, 3.0), 2.0)
    X, F = brute(F2, 6)
    m = reg.contains(F2, X, F)
    vals, cnt = np.unique(F[m], return_counts=True)
    v, c = value_counts(F2, reg)
    assert v.tolist() == vals.tolist() and c.tolist() == cnt.tolist()


def test_progression():
    v, c = value_counts(F2, Region.box(6))
    for a, q in [(1, 4), (3, 4), (2, 5)]:
        want = int(c[prime_mask(v) & (v > 0) & (v % q == a)].sum())
        assert count_primes(F2, Region.box(6), progression=(a, q)).total == want
    with pytest.raises(ValueError):
        count_primes(F2, Region.box(6), progression=(2, 4))


@pytest.mark.parametrize("space,T", [(F2, 25), (MatrixSpace.sym(3), 5), (MatrixSpace.skew(2), 5)], ids=str)
def test_determinism_across_threads(space, T):
    runs = [count_primes(space, Region.box(T), threads=k) for k in (1, 2, 8)]
    assert len({json.dumps(sorted(r.by_value.items())) for r in runs}) == 1
    for r in runs:
        assert r.total == sum(r.by_value.values())


@given(a=st.integers(0, 12), b=st.integers(0, 12))
def test_monotone_in_T(a, b):
    lo, hi = sorted((a, b))
    assert count_primes(F2, Region.box(lo)).total <= count_primes(F2, Region.box(hi)).total


@pytest.mark.parametrize(
    "space,T,symmetric",
    [(F2, 15, True), (MatrixSpace.full(3), 2, True), (MatrixSpace.sym(3), 4, True), (MatrixSpace.skew(1), 9, True),
     (MatrixSpace.skew(3), 1, True), (MatrixSpace.sym(2), 6, False), (MatrixSpace.skew(2), 3, True)],
    ids=str,
)
def test_sign_symmetry(space, T, symmetric):
    v, c = value_counts(space, Region.box(T))
    pos = dict(zip(v.tolist(), c.tolist()))
    flipped = all(pos.get(-x, 0) == n for x, n in pos.items())
    if symmetric:
        assert flipped
        assert count_primes(space, Region.box(T, "prime_ideal")).total == 2 * count_primes(space, Region.box(T)).total
    else:
        # Sym n=2: det counts of +m and -m differ (positive definite forms)
        assert not flipped


def test_hecke_trend():
    counts = {m: count_level_set(F2, m, Region.cone(Patch(1, 0, 20.0), 10)) for m in range(1, 7)}
    for m in range(2, 7):
        assert abs(counts[m] / counts[1] / hecke_factor(2, m) - 1) < 0.1


def test_regions():
    with pytest.raises(InvalidRegionError):
        Region.box(float("inf"))
    with pytest.raises(InvalidRegionError):
        Region.custom(lambda X, F: F > 0, radius=float("inf"))
    assert check_star_shaped(F2, Region.box(3))
    assert check_star_shaped(F2, Region.cone(Patch(1, 0, 3.0), 4))
    ring = Region.custom(lambda X, F: np.abs(X).max(axis=1) > 2, radius=4)
    assert not check_star_shaped(F2, ring)


def test_custom_region_counts():
    reg = Region.custom(lambda X, F: X[:, 0] >= 0, radius=5)
    X, F = brute(F2, 5)
    keep = X[:, 0] >= 0
    want = int(sum(1 for f in F[keep] if f > 0 and is_prime(int(f))))
    assert count_primes(F2, reg).total == want


def test_budget():
    with pytest.raises(BudgetExceededError):
        count_primes(MatrixSpace.full(3), Region.box(100))
    with pytest.raises(BudgetExceededError):
        count_primes(F2, Region.box(50), budget=1000)
