from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expproof.numeric import (
    FIELD_PRIME,
    FieldElement,
    FixedPoint,
    FixedPointRangeError,
    dequantize,
    dot_raw,
    exact_matmul,
    fp_dot,
    quantize,
    quantize_array,
    quantize_raw,
    rdiv,
    rdiv_array,
    vector_from_json,
    vector_to_json,
)

S = 10_000


def oracle_round(x: Fraction) -> int:
    """Half away from zero, from first principles."""
    sign = -1 if x < 0 else 1
    a = abs(x)
    fl = a.numerator // a.denominator
    return sign * (fl + 1 if a - fl >= Fraction(1, 2) else fl)


def test_quantize_zero():
    assert quantize(0.0, S).raw == 0


def test_quantize_one():
    assert quantize(1.0, S).raw == 10_000


def test_quantize_half_ulp_rounds_away():
    # 0.00005 * 10^4 = 0.5 exactly in decimal; the float is slightly above
    assert quantize("0.00005", S).raw == oracle_round(Fraction("0.00005") * S) == 1
    assert quantize(0.00005, S).raw == oracle_round(Fraction(0.00005) * S) == 1
    assert quantize("-0.00005", S).raw == -1


def test_quantize_out_of_range():
    with pytest.raises(FixedPointRangeError):
        quantize(1e300, S)
    with pytest.raises(FixedPointRangeError):
        quantize(float("nan"), S)


def test_rdiv_ties_and_signs():
    assert rdiv(5, 2) == 3
    assert rdiv(-5, 2) == -3
    assert rdiv(4, 2) == 2
    assert rdiv(1, 3) == 0
    assert rdiv(-2, 3) == -1
    with pytest.raises(ValueError):
        rdiv(1, 0)


@given(st.integers(-10**30, 10**30), st.integers(1, 10**12))
def test_rdiv_matches_rational_oracle(num, den):
    assert rdiv(num, den) == oracle_round(Fraction(num, den))


@given(st.lists(st.integers(-10**12, 10**12), min_size=1, max_size=20), st.integers(1, 10**6))
def test_rdiv_array_matches_scalar(nums, den):
    assert rdiv_array(np.array(nums, dtype=np.int64), den).tolist() == [rdiv(v, den) for v in nums]


@given(st.floats(-1e9, 1e9, allow_nan=False))
def test_quantize_error_at_most_half_ulp(x):
    q = quantize(x, S)
    assert abs(Fraction(q.raw, S) - Fraction(x)) <= Fraction(1, 2 * S)


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), max_size=30))
def test_quantize_array_matches_exact(xs):
    assert quantize_array(xs, S).tolist() == [quantize_raw(x, S) for x in xs]


def test_quantize_array_ties():
    xs = [0.00005, -0.00005, 0.00015, 2.5 / S, -2.5 / S, 1.23455]
    assert quantize_array(xs, S).tolist() == [oracle_round(Fraction(x) * S) for x in xs]


@given(st.integers(-10**9, 10**9), st.integers(-10**9, 10**9))
def test_sum_of_exact_multiples(a, b):
    fa, fb = FixedPoint(a, S), FixedPoint(b, S)
    assert fa + fb == quantize(Fraction(a + b, S), S)


def test_fp_dot_examples():
    one = quantize(1.0, S)
    assert fp_dot([one], [one]) == one
    zero = [quantize(0, S)] * 3
    xyz = [quantize(v, S) for v in (0.3, -7.1, 2.2)]
    assert fp_dot(zero, xyz).raw == 0
    a = [quantize("0.5", S), quantize("0.5", S)]
    b = [quantize("0.3", S), quantize("0.7", S)]
    oracle = Fraction(1, 2) * Fraction(3, 10) + Fraction(1, 2) * Fraction(7, 10)
    assert fp_dot(a, b).raw == oracle_round(oracle * S) == 5000


def test_fp_dot_errors():
    with pytest.raises(ValueError):
        fp_dot([quantize(1, S)], [quantize(1, S)] * 2)
    with pytest.raises(ValueError):
        fp_dot([FixedPoint(1, 10)], [FixedPoint(1, 100)])


@given(st.lists(st.tuples(st.integers(-10**9, 10**9), st.integers(-10**9, 10**9)), min_size=1, max_size=40))
def test_dot_raw_matches_rational(pairs):
    a = [p[0] for p in pairs]
    b = [p[1] for p in pairs]
    assert dot_raw(a, b, S) == oracle_round(Fraction(sum(x * y for x, y in pairs), S))


def test_fixed_point_mul_rescales():
    a, b = quantize("1.5", S), quantize("-0.0003", S)
    assert (a * b).raw == oracle_round(Fraction(15000 * -3, S))
    assert float(quantize("2.25", S)) == 2.25
    assert dequantize(FixedPoint(12345, S), S) == 1.2345


def test_fixed_point_scale_mismatch():
    with pytest.raises(ValueError):
        FixedPoint(1, 10) + FixedPoint(1, 100)


def test_exact_matmul_no_wraparound():
    a = np.full((2, 3), 2**40, dtype=np.int64)
    b = np.full(3, 2**40, dtype=np.int64)
    out = exact_matmul(a, b)
    assert [int(v) for v in out] == [3 * 2**80] * 2


def test_json_round_trip():
    fp = FixedPoint(-31415, S)
    assert FixedPoint.from_json(fp.to_json()) == fp
    assert fp.to_json() == {"raw": -31415, "scale": S}
    v = np.array([1, -2, 3])
    assert vector_from_json(vector_to_json(v, S), S).tolist() == [1, -2, 3]
    with pytest.raises(ValueError):
        vector_from_json(vector_to_json(v, S), 100)


field_elems = st.integers(0, FIELD_PRIME - 1).map(FieldElement)


@given(field_elems, field_elems, field_elems)
def test_field_addition_associative_commutative(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a + b == b + a
    assert (a * b).value < FIELD_PRIME


def test_field_element_reduction_and_hex():
    assert FieldElement(FIELD_PRIME + 5).value == 5
    assert FieldElement(-1).value == FIELD_PRIME - 1
    x = FieldElement(123456789)
    assert FieldElement.from_hex(x.hex()) == x
    assert len(x.hex()) == 64
    assert FieldElement.from_bytes(x.to_bytes()) == x
    with pytest.raises(ValueError):
        FieldElement.from_hex(f"{FIELD_PRIME:064x}")
    assert FIELD_PRIME > 2**128
