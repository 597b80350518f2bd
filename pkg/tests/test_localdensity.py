import csv
import itertools
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhlab.errors import BudgetExceededError
from bhlab.localdensity import (
    check_local_equidistribution,
    count_mod,
    count_mod_composite,
    local_factor_formula,
    residue_counts,
    singular_locus_count,
    singular_series,
    skew_invertible_count,
    sl_count_closed_form,
    stability_check,
    sym_invertible_count,
    write_factors_csv,
)
from bhlab.spaces import MatrixSpace, eval_int

F2, F3 = MatrixSpace.full(2), MatrixSpace.full(3)
K4, S3 = MatrixSpace.skew(2), MatrixSpace.sym(3)


def numpy_hist(space, M):
    X = np.array(list(itertools.product(range(M), repeat=space.ambient_dim)))
    return np.bincount(eval_int(space, X) % M, minlength=M)


def test_examples():
    assert count_mod(F2, 3, 1, 1).raw_count == 24
    assert count_mod(F2, 3, 1, 0).raw_count == 33
    assert count_mod(MatrixSpace.skew(1), 5, 1, 0).raw_count == 1
    assert count_mod(F2, 3, 1, 1).normalized == Fraction(24, 27)
    assert [sl_count_closed_form(*a) for a in [(2, 2, 1), (3, 2, 1), (2, 3, 1)]] == [6, 168, 24]
    assert [skew_invertible_count(*a) for a in [(1, 3), (2, 2), (2, 3)]] == [2, 28, 468]


@pytest.mark.parametrize(
    "space,M", [(F2, 3), (F2, 4), (F2, 9), (F2, 6), (F3, 2), (K4, 3), (K4, 4), (S3, 3), (MatrixSpace.sym(2), 8)], ids=str
)
def test_residue_counts_against_numpy(space, M):
    assert residue_counts(space, M).tolist() == numpy_hist(space, M).tolist()


@pytest.mark.parametrize("space,M", [(F2, 25), (F2, 27), (K4, 5), (S3, 5), (F3, 3)], ids=str)
def test_auto_matches_exhaustive(space, M):
    assert residue_counts(space, M, "auto").tolist() == residue_counts(space, M, "exhaustive").tolist()


@pytest.mark.parametrize("n,p,k", [(2, 2, 1), (2, 3, 1), (2, 2, 2), (3, 2, 1), (3, 3, 1), (2, 5, 1), (2, 3, 2)])
def test_sl_count(n, p, k):
    assert count_mod(MatrixSpace.full(n), p, k, 1).raw_count == sl_count_closed_form(n, p, k)


@pytest.mark.parametrize("n,p", [(1, 3), (1, 5), (2, 2), (2, 3), (2, 5)])
def test_macwilliams(n, p):
    space = MatrixSpace.skew(n)
    assert p**space.ambient_dim - count_mod(space, p, 1, 0).raw_count == skew_invertible_count(n, p)


@pytest.mark.parametrize("n,p", [(2, 3), (3, 3), (2, 5), (3, 2)])
def test_sym_invertible(n, p):
    space = MatrixSpace.sym(n)
    assert p**space.ambient_dim - count_mod(space, p, 1, 0).raw_count == sym_invertible_count(n, p)


@pytest.mark.parametrize("space,q,k", [(F2, 3, 1), (F2, 5, 1), (F2, 3, 2), (K4, 3, 1), (K4, 5, 1)], ids=str)
def test_unit_values_equidistributed(space, q, k):
    r = check_local_equidistribution(space, q, k)
    assert r.passed
    units = [a for a in range(q**k) if a % q]
    assert sorted(r.counts) == units
    if space.family.value == "full":
        assert set(r.counts.values()) == {sl_count_closed_form(space.n, q, k)}


def test_equidistribution_examples():
    assert set(check_local_equidistribution(F2, 5, 1).counts.values()) == {120}
    r = check_local_equidistribution(MatrixSpace.sym(2), 5, 1)
    assert r.passed
    assert sorted(map(sorted, r.classes)) == [[1, 4], [2, 3]]


def test_density_stabilises():
    for p in (3, 5):
        d = count_mod(F2, p, 2, p, check_stable=True)
        assert d.stabilized == 2
        assert d.normalized == count_mod(F2, p, 3, p).normalized


@given(m=st.integers(0, 10**6))
def test_crt_multiplicative(m):
    for space, a, b in [(F2, 3, 5), (F2, 4, 3), (K4, 2, 3)]:
        assert count_mod_composite(space, a * b, m) == count_mod_composite(space, a, m) * count_mod_composite(space, b, m)


def test_stability_and_singular_locus():
    r5, r13 = stability_check(F2, 5), stability_check(F2, 13)
    assert r5.deviation <= 5**-0.5
    assert r13.deviation < r5.deviation
    assert stability_check(K4, 3).factor > 0
    assert singular_locus_count(F2, 3) == 1
    assert singular_locus_count(F2, 5) == 1
    assert singular_locus_count(F3, 2) == 1 + 7 * 7


def test_local_factor_formula_matches_counts():
    for space in (F2, F3, K4, S3):
        for p in (2, 3, 5):
            raw = count_mod(space, p, 1, 0).raw_count
            assert (1 - Fraction(raw, p**space.ambient_dim)) / (1 - Fraction(1, p)) == local_factor_formula(space, p)


def test_singular_series_closed_forms():
    z = lambda s: float(mpmath.zeta(s))  # noqa: E731
    want = {F2: 1 / z(2), F3: 1 / (z(2) * z(3)), K4: 1 / z(3), S3: 1 / z(3)}
    for space, value in want.items():
        assert singular_series(space, 50).closed_form == pytest.approx(value, rel=1e-12)
    errs = [singular_series(F2, P).relative_error for P in (50, 200, 1000)]
    assert errs[0] > errs[1] > errs[2]


def test_factors_csv(tmp_path):
    s = singular_series(F2, 20)
    path = tmp_path / "f.csv"
    write_factors_csv(s, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["prime", "raw_count", "normalized_num", "normalized_den", "factor"]
    assert rows[2][:2] == ["3", "33"]
    assert float(rows[2][4]) == float(Fraction(8, 9))


def test_budget_and_bad_input():
    with pytest.raises(BudgetExceededError):
        count_mod(F3, 7, 2, 1)
    with pytest.raises(ValueError):
        count_mod(F2, 4, 1, 1)
