import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balans.expr import (
    ExprDomainError,
    ExprSyntaxError,
    eval_jet,
    jet_arrays,
    parse,
    sup_abs_on_box,
)

from corpus import CORPUS, close, fd_jet, random_points


def test_lwr_flux_value():
    assert parse("u*(1-u)")(0, 0, 0.5) == 0.25


def test_minus_x():
    assert parse("-x")(0, 2, 0) == -2


def test_unbalanced_paren_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse("u*(1-u")
    assert err.value.offset == 7


@pytest.mark.parametrize(
    "text",
    ["y + 1", "2^3^1", "sin(u, x)", "min(u)", "if(u, 1)", "2 +", "foo(u)", "u ** 2", "1.2.3", ""],
)
def test_rejects_bad_input(text):
    with pytest.raises(ExprSyntaxError):
        parse(text)


def test_constants_and_precedence():
    assert parse("2 + 3*4")() == 14
    assert parse("(2^3)^2")() == 64
    assert parse("-u^2")(0, 0, 3) == -9
    assert parse("pi")() == math.pi
    assert parse("e")() == math.e
    assert parse("1e-3*u")(0, 0, 2) == 0.002


def test_jet_lwr():
    j = eval_jet(parse("u*(1-u)"), 0, 0, 0.3)
    assert j.value == pytest.approx(0.21, abs=1e-15)
    assert j.d_u == pytest.approx(0.4, abs=1e-15)
    assert (j.d_x, j.d_xu, j.d_xx) == (0, 0, 0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_jet_minus_x_everywhere(t, x, u):
    j = eval_jet(parse("-x"), t, x, u)
    assert (j.d_x, j.d_u, j.d_xu, j.d_xx) == (-1, 0, 0, 0)


def test_jet_bilinear():
    j = eval_jet(parse("x*u"), 0, 2, 3)
    assert (j.value, j.d_u, j.d_x, j.d_xu, j.d_xx) == (6, 2, 3, 1, 0)


def test_polynomial_jet_exact():
    j = eval_jet(parse("x^3*u^2 - 2*x*u + t"), 0.5, 2.0, -1.5)
    assert j.value == 8 * 2.25 + 6 + 0.5
    assert j.d_u == 8 * 2 * -1.5 - 4
    assert j.d_x == 3 * 4 * 2.25 + 3
    assert j.d_xu == 3 * 4 * 2 * -1.5 - 2
    assert j.d_xx == 6 * 2 * 2.25


@pytest.mark.parametrize("text", CORPUS)
def test_jets_match_finite_differences(text):
    e = parse(text)
    for t, x, u in random_points(25, seed=CORPUS.index(text)):
        exact = eval_jet(e, t, x, u)
        ref = fd_jet(e, t, x, u)
        for name, val in ref.items():
            assert close(getattr(exact, name), val), (text, name, (t, x, u))


@pytest.mark.parametrize("text", CORPUS)
def test_mixed_partial_symmetry(text):
    e = parse(text)
    pts = random_points(50, seed=3)
    a = jet_arrays(e, *pts.T, order="xu")["d_xu"]
    b = jet_arrays(e, *pts.T, order="ux")["d_xu"]
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("text", CORPUS + ["if(x - 0.2, u, -u)", "min(u, x) + max(t, 1)", "abs(u - x)"])
def test_print_round_trip(text):
    e = parse(text)
    again = parse(str(e))
    pts = random_points(100, seed=5)
    np.testing.assert_array_equal(e(*pts.T), again(*pts.T))
    assert str(again) == str(e)


def test_vectorized_matches_scalar():
    e = parse("sin(x)*u + exp(-t)")
    pts = random_points(20)
    vec = e(*pts.T)
    assert np.array_equal(vec, [e(*p) for p in pts])


@pytest.mark.parametrize(
    "text, point, fragment",
    [
        ("log(u)", (0, 0, 0), "log"),
        ("1/(u - 1)", (0, 0, 1), "/"),
        ("sqrt(x)", (0, -1, 0), "sqrt"),
        ("u^0.5", (0, 0, -1), "^"),
        ("exp(exp(exp(u)))", (0, 0, 10), "exp"),
    ],
)
def test_domain_errors_name_the_subexpression(text, point, fragment):
    with pytest.raises(ExprDomainError) as err:
        parse(text)(*point)
    assert fragment in err.value.subexpr


def test_domain_error_in_jet():
    with pytest.raises(ExprDomainError):
        eval_jet(parse("log(x)"), 0, 0, 0)


def test_if_only_evaluates_selected_branch():
    e = parse("if(u, log(u), 0)")
    np.testing.assert_array_equal(e(0, 0, np.array([-1.0, 0.0, math.e])), [0.0, 0.0, 1.0])


def test_piecewise_flag():
    assert parse("max(u, 0)").is_piecewise
    assert not parse("u^2").is_piecewise
    assert parse("x*u + t").variables == {"t", "x", "u"}


def test_sup_lwr_du():
    assert sup_abs_on_box(parse("u*(1-u)"), "d_u", [(0, 0), (0, 0), (0, 1)], 101) == 1.0


@given(st.floats(-3, 3), st.floats(0.1, 3))
def test_sup_minus_x_dx(x0, w):
    assert sup_abs_on_box(parse("-x"), "d_x", [(0, 1), (x0, x0 + w), (-1, 1)], 9) == 1.0


def test_sup_sin_x_u_against_dense_scan():
    e = parse("sin(x)*u")
    got = sup_abs_on_box(e, "d_xu", [(0, 0), (0, math.pi), (-1, 1)], 201)
    dense = np.max(np.abs(np.cos(np.linspace(0, math.pi, 100_001))))
    assert abs(got - dense) <= 1e-3


def test_sup_multiple_selectors():
    out = sup_abs_on_box(parse("x*u"), ["value", "d_u", "d_x"], [(0, 0), (0, 2), (0, 3)], 5)
    assert out == {"value": 6.0, "d_u": 2.0, "d_x": 3.0}


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(CORPUS), st.integers(2, 40), st.sampled_from(["value", "d_u", "d_x", "d_xu", "d_xx"]))
def test_sup_monotone_in_samples(text, samples, sel):
    e = parse(text)
    box = [(0, 1), (-1, 1), (-1, 1)]
    small = sup_abs_on_box(e, sel, box, samples)
    big = sup_abs_on_box(e, sel, box, 2 * samples)
    assert big >= small * (1 - 4 * np.finfo(float).eps)


def test_degenerate_box_is_point_evaluation():
    e = parse("x*u + t")
    assert sup_abs_on_box(e, "value", [(1, 1), (2, 2), (3, 3)], 2) == 7.0
