import math
from fractions import Fraction

import numpy as np
import pytest

from interval import (
    Interval,
    IntervalArray,
    IntervalDivisionError,
    IntervalError,
    IntervalMatrix,
    iv_arith,
    iv_elem,
    iv_from_real,
    iv_pi,
    power,
)


def _contains_exact(iv: Interval, exact: Fraction) -> bool:
    return Fraction(iv.lo) <= exact <= Fraction(iv.hi)


def _random_tree(rng, depth):
    """Return (interval, exact Fraction) of a random +-*/ expression."""
    if depth == 0 or rng.random() < 0.3:
        x = float(rng.uniform(-10.0, 10.0))
        return Interval.point(x), Fraction(x)
    a_iv, a_ex = _random_tree(rng, depth - 1)
    b_iv, b_ex = _random_tree(rng, depth - 1)
    op = rng.choice(['add', 'sub', 'mul', 'div'])
    if op == 'div' and b_iv.lo <= 0.0 <= b_iv.hi:
        op = 'mul'
    exact = {'add': a_ex + b_ex, 'sub': a_ex - b_ex, 'mul': a_ex * b_ex}.get(op)
    if op == 'div':
        exact = a_ex / b_ex
    return iv_arith(op, a_iv, b_iv), exact


def test_random_expressions_enclose_exact_value():
    rng = np.random.default_rng(20240611)
    for _ in range(10000):
        iv, exact = _random_tree(rng, 3)
        assert _contains_exact(iv, exact)


def test_decimal_string_is_enclosed_by_one_ulp():
    iv = iv_from_real('0.1')
    assert _contains_exact(iv, Fraction(1, 10))
    assert iv.hi == math.nextafter(iv.lo, math.inf)


def test_float_input_stays_a_point():
    iv = iv_from_real(0.1)
    assert iv.lo == iv.hi == 0.1


def test_pi_enclosure():
    pi = iv_pi()
    assert pi.lo == math.pi
    assert pi.hi > math.pi


def test_lo_above_hi_is_rejected():
    with pytest.raises(IntervalError):
        Interval(2.0, 1.0)


def test_division_through_zero_raises():
    with pytest.raises(IntervalDivisionError):
        Interval(1.0, 2.0) / Interval(-1.0, 1.0)
    with pytest.raises(ZeroDivisionError):
        Interval(1.0, 2.0) / Interval(0.0, 1.0)


def test_even_power_is_nonnegative():
    sq = Interval(-1.0, 2.0) ** 2
    assert sq.lo == 0.0
    assert sq.hi >= 4.0


def test_abs_and_mig():
    a = abs(Interval(-3.0, 2.0))
    assert a.lo == 0.0 and a.hi == 3.0
    assert Interval(2.0, 5.0).mig == 2.0


def test_array_negative_power():
    out = power(IntervalArray.from_values([2.0]), -2)
    assert out.contains(np.array([0.25])).all()


def test_repeated_sum_encloses_exact_total():
    arr = IntervalArray.from_values(np.full(10, 0.1))
    total = arr.sum()
    assert _contains_exact(total, 10 * Fraction(0.1))


def test_array_division_through_zero_raises():
    num = IntervalArray.from_values([1.0, 2.0])
    den = IntervalArray(np.array([-1.0, 1.0]), np.array([1.0, 2.0]))
    with pytest.raises(IntervalDivisionError):
        num / den


def test_identity_trace():
    eye = IntervalMatrix(np.eye(3))
    assert 3.0 in eye.trace()


def test_matrix_power_encloses_product():
    m = IntervalMatrix(np.array([[1.0, 1.0], [0.0, 1.0]]))
    sq = m.power(2)
    assert sq.contains(np.array([[1.0, 2.0], [0.0, 1.0]])).all()
    with pytest.raises(IntervalError):
        m.power(0)


def test_midpoint_split_encloses_matrix():
    lo = np.array([[0.9, -0.1], [0.2, 1.8]])
    hi = np.array([[1.1, 0.3], [0.25, 2.0]])
    m = IntervalMatrix(lo, hi)
    mean, delta = m.midpoint_split()
    total = mean + delta
    assert np.all(total.lo <= lo) and np.all(total.hi >= hi)
    assert np.all(mean.lo == mean.hi)


def test_elementary_functions_enclose_reference_values():
    assert 0.0 in iv_elem('log', 1.0)
    assert iv_elem('log', 1.0).width <= 4 * math.ulp(1.0)
    root = iv_elem('sqrt', Interval(4.0, 9.0))
    assert root.lo <= 2.0 and root.hi >= 3.0
    assert math.e in iv_elem('exp', 1.0)
    assert math.pi / 4 in iv_elem('arctan', 1.0)
    p = iv_elem('pow', Interval(4.0, 16.0), -0.5)
    assert p.lo <= 0.25 and p.hi >= 0.5


def test_cot_on_monotone_branch():
    c = iv_elem('cot', iv_pi() / 6.0)
    assert c.mid == pytest.approx(math.sqrt(3.0), rel=1e-14)
    assert c.width < 1e-13


@pytest.mark.parametrize("fn, arg, extra", [
    ('log', Interval(-1.0, 2.0), None),
    ('sqrt', Interval(-1.0, 2.0), None),
    ('pow', Interval(0.0, 2.0), 0.5),
    ('pow', Interval(1.0, 2.0), None),
    ('cot', Interval(3.0, 4.0), None),
    ('tan', Interval(0.1, 0.2), None),
])
def test_elementary_domain_errors(fn, arg, extra):
    with pytest.raises(IntervalError):
        iv_elem(fn, arg, extra)


def test_exp_overflow_is_an_interval_error():
    with pytest.raises(IntervalError):
        iv_elem('exp', Interval(700.0, 1000.0))
    assert iv_elem('exp', Interval(-1000.0, 0.0)).contains(0.5)
