import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmrobust import exprparse as ex
from nmrobust.exprparse import (Constant, Cos, Exp, Negate, Power, Product, Quotient, Sin, Sum,
                                Difference, Variable)

FIG_TEXT = "exp(-2*t/5)*cos(t)"


def test_parse_example_tree():
    tree = ex.parse(FIG_TEXT)
    expected = Product(Exp(Quotient(Product(Negate(Constant(2.0)), Variable()), Constant(5.0))), Cos(Variable()))
    assert tree == expected


def test_parse_constant():
    assert ex.parse("1") == Constant(1.0)


def test_parse_error_offset():
    with pytest.raises(ex.ParseError) as info:
        ex.parse("cos(")
    assert info.value.offset == 4
    assert "expression" in info.value.expected


def test_parse_error_bad_token():
    with pytest.raises(ex.ParseError) as info:
        ex.parse("t + $")
    assert info.value.offset == 4


def test_power_operators_and_precedence():
    assert ex.parse("t^2") == ex.parse("t**2")
    assert ex.evaluate(ex.parse("-t^2"), 3.0) == pytest.approx(9.0)
    assert ex.evaluate(ex.parse("-(t^2)"), 3.0) == pytest.approx(-9.0)
    assert ex.evaluate(ex.parse("2^(-2)"), 0.0) == pytest.approx(0.25)


def test_named_constants():
    assert ex.evaluate(ex.parse("pi"), 0) == pytest.approx(math.pi)
    assert ex.evaluate(ex.parse("e"), 0) == pytest.approx(math.e)
    assert ex.to_text(ex.parse("2*pi")) == "2*pi"


def test_evaluate_examples():
    f = ex.parse(FIG_TEXT)
    assert ex.evaluate(f, 0.0) == 1.0
    assert ex.evaluate(ex.parse("t^2"), 3.0) == 9.0
    assert abs(ex.evaluate(f, math.pi / 2)) < 1e-12


def test_evaluate_vectorized():
    ts = np.linspace(0, 1, 5)
    assert np.allclose(ex.evaluate(ex.parse("t^2+1"), ts), ts ** 2 + 1)
    assert np.allclose(ex.evaluate(ex.parse("3"), ts), 3.0)


def test_division_by_zero():
    with pytest.raises(ex.EvaluationError):
        ex.evaluate(ex.parse("1/t"), 0.0)
    with pytest.raises(ex.EvaluationError):
        ex.evaluate(ex.parse("t^(-1)"), 0.0)


def test_differentiate_examples():
    assert ex.evaluate(ex.differentiate(ex.parse("t^2")), 3.0) == pytest.approx(6.0)
    d = ex.differentiate(ex.parse("cos(t)"))
    assert ex.to_text(d) == "-sin(t)"
    f = ex.parse(FIG_TEXT)
    h = 1e-6
    fd = (ex.evaluate(f, 1.0 + h) - ex.evaluate(f, 1.0 - h)) / (2 * h)
    assert ex.evaluate(ex.differentiate(f), 1.0) == pytest.approx(fd, abs=1e-6)


def test_differentiate_constant_denominator_stays_simple():
    d = ex.differentiate(ex.parse("t/5"))
    assert ex.evaluate(d, 2.0) == pytest.approx(0.2)


def test_to_text_examples():
    assert ex.to_text(Constant(1.0)) == "1"
    assert ex.to_text(Negate(Variable())) == "-t"
    assert ex.parse("-t") == Negate(Variable())
    assert ex.parse(ex.to_text(ex.parse(FIG_TEXT))) == ex.parse(FIG_TEXT)


def test_to_text_negative_exponent():
    e = Power(Variable(), -2)
    assert ex.parse(ex.to_text(e)) == e


FD_EXPRESSIONS = ["exp(-2*t/5)*cos(t)", "sin(t)^3", "t/(1+t^2)", "exp(sin(2*t))", "cos(t)^2-sin(t)/3",
                  "(1+t)^(-2)", "t*exp(-t)*sin(3*t)", "pi*t^4-e*t", "-(cos(t)*sin(t))/(2+t)"]


@pytest.mark.parametrize("text", FD_EXPRESSIONS)
def test_derivative_matches_finite_difference(text):
    f = ex.parse(text)
    df = ex.differentiate(f)
    ts = np.linspace(0.1, 3.0, 17)
    h = 1e-6
    fd = (ex.evaluate(f, ts + h) - ex.evaluate(f, ts - h)) / (2 * h)
    assert np.allclose(ex.evaluate(df, ts), fd, atol=1e-5, rtol=1e-5)


# generated trees for the round-trip property

_leaves = st.one_of(
    st.just(Variable()),
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Constant),
    st.sampled_from([Constant(math.pi, "pi"), Constant(math.e, "e")]),
)


def _extend(children):
    binary = st.sampled_from([Sum, Difference, Product, Quotient])
    return st.one_of(
        st.builds(lambda op, a, b: op(a, b), binary, children, children),
        st.builds(Negate, children),
        st.builds(Power, children, st.integers(min_value=-3, max_value=4)),
        st.builds(Exp, children), st.builds(Sin, children), st.builds(Cos, children),
    )


trees = st.recursive(_leaves, _extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(trees)
def test_round_trip_generated(tree):
    assert ex.parse(ex.to_text(tree)) == tree
