import csv
import itertools
from math import log

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhlab.enumeration import Patch, Region, count_primes
from bhlab.errors import InvalidRegionError
from bhlab.numbertheory import is_prime, is_squarefree
from bhlab.sieve import (
    region_volume,
    remainder_experiment,
    rho,
    rough_count,
    rough_mask,
    small_prime_contribution,
    write_remainder_csv,
)
from bhlab.spaces import MatrixSpace, eval_int

F2 = MatrixSpace.full(2)


def test_rho_examples():
    assert (rho(F2, 3), rho(F2, 2), rho(F2, 6), rho(F2, 1)) == (33, 10, 330, 1)
    with pytest.raises(ValueError):
        rho(F2, 4)


@given(a=st.integers(1, 40), b=st.integers(1, 40))
def test_rho_multiplicative(a, b):
    from math import gcd

    if not (is_squarefree(a) and is_squarefree(b) and gcd(a, b) == 1):
        return
    for space in (F2, MatrixSpace.skew(2)):
        assert rho(space, a * b) == rho(space, a) * rho(space, b)


def test_rough_count_against_brute_force():
    T, z = 4, 5
    X = np.array(list(itertools.product(range(-T, T + 1), repeat=4)))
    F = eval_int(F2, X)
    want = sum(1 for f in F if all(f % p for p in (2, 3, 5)))
    r = rough_count(F2, Region.box(T), z)
    assert r.exact_rough_count == want
    assert small_prime_contribution(F2, Region.box(T), z) == sum(1 for f in F if f in (2, 3, 5))
    assert r.prime_count_bound == pytest.approx(r.main_term + r.remainder_sum)
    assert r.empirical_ratio == pytest.approx(r.exact_rough_count / r.main_term)


def test_empty_sieve():
    for z in (1.5, 20 ** (1 / 40)):
        r = rough_count(F2, Region.box(20), z)
        assert r.exact_rough_count == 41**4
        assert small_prime_contribution(F2, Region.box(20), z) == 0


@pytest.mark.parametrize("T,z", [(10, 5), (20, 5), (20, 13), (15, 30)])
def test_partition_and_containment(T, z):
    box = Region.box(T)
    total = count_primes(F2, box).total
    small = small_prime_contribution(F2, box, z)
    large = sum(c for v, c in count_primes(F2, box).by_value.items() if v > z)
    assert total == small + large
    assert large <= rough_count(F2, box, z).exact_rough_count
    assert total <= small + rough_count(F2, box, z).exact_rough_count


def test_main_term_log_decay():
    box = Region.box(10)
    scaled = [rough_count(F2, box, z).main_term / region_volume(F2, box) * log(z) for z in (5, 8, 13, 20, 31, 50)]
    assert min(scaled) > 0.2 and max(scaled) / min(scaled) < 1.5


def test_remainders(tmp_path):
    rows20 = remainder_experiment(F2, Region.box(20), 30)
    rows40 = remainder_experiment(F2, Region.box(40), 30)
    assert rows20[0].d == 1 and rows20[0].r_d == 0.0  # cell volume counts lattice points
    assert [r.d for r in rows20] == [d for d in range(1, 31) if is_squarefree(d)]
    # growth from T to 2T is at most 2^(dim-1) with 50% slack
    assert max(abs(r.r_d) for r in rows40) <= 8 * 1.5 * max(abs(r.r_d) for r in rows20)
    assert max(r.ratio for r in rows20 + rows40) <= 8
    euclid = remainder_experiment(F2, Region.box(20), 6, volume="euclidean")
    assert euclid[0].r_d == 41**4 - 40**4
    write_remainder_csv(rows20, tmp_path / "r.csv")
    head = next(csv.reader(open(tmp_path / "r.csv")))
    assert head == ["d", "r_d", "bound", "ratio"]


def test_box_only():
    with pytest.raises(InvalidRegionError):
        rough_count(F2, Region.cone(Patch(1, 0, 3.0), 3), 5)


def test_rough_mask():
    v = np.arange(-12, 13)
    assert v[rough_mask(v, 3)].tolist() == [-11, -7, -5, -1, 1, 5, 7, 11]
    assert all(is_prime(p) for p in (7, 11))
