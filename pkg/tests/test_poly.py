from fractions import Fraction

import pytest

from poscert.errors import ParseError, PreconditionError
from poscert.poly import (Polynomial, elementary_symmetric, format_poly, parse_poly, poly)

XY = "x y"


def test_difference_of_squares():
    assert poly("(x+y)*(x-y)", XY) == poly("x^2 - y^2", XY)


def test_times_zero():
    assert (poly("x + 3", XY) * Polynomial.zero(2)).is_zero()


def test_polya_product_oracle():
    # term-by-term oracle for (x+y)^3 (x^2 - xy + y^2)
    f = poly("x^2 - x*y + y^2", XY)
    prod = poly("(x+y)^3", XY) * f
    assert prod == poly("x^5 + 2*x^4*y + x^3*y^2 + x^2*y^3 + 2*x*y^4 + y^5", XY)


def test_no_zero_terms_stored():
    p = poly("x - x + y", XY)
    assert p.terms == {(0, 1): Fraction(1)}


def test_nvars_mismatch():
    with pytest.raises(Exception):
        poly("x", "x") + poly("x", XY)


@pytest.mark.parametrize("text,names,point,value", [
    ("1 - x1^2 - x2^2", "x1 x2", (0, 0), 1),
    ("2*x0^2 - x1^2 - x2^2", "x0 x1 x2", (0, 1, 0), -1),  # negative where x0 = 0
    ("x^2 - x*y + y^2", XY, (1, 1), 1),
])
def test_evaluate(text, names, point, value):
    assert poly(text, names).evaluate(point) == value


def test_evaluate_length_mismatch():
    with pytest.raises(Exception):
        poly("x + y", XY).evaluate((1,))


def test_highest_degree_part():
    assert poly("1 - x^4 - y^2", XY).highest_degree_part() == poly("-x^4", XY)
    h = poly("x^2 + x*y", XY)
    assert h.highest_degree_part() == h


def test_highest_part_nonnegative_on_compact_example():
    # -x^4 - y^2 + 1 describes a compact set but its top part vanishes at (0,1)
    top = poly("-x^4 - y^2 + 1", XY).highest_degree_part()
    assert top.evaluate((0, 1)) == 0


def test_homogenize_examples():
    h = poly("1 - x1 - x2", "x1 x2").homogenize(even=True)
    assert h == poly("x0^2 - x0*x1 - x0*x2", "x0 x1 x2")
    h = poly("2 - x1^2 - x2^2", "x1 x2").homogenize(even=True)
    assert h == poly("2*x0^2 - x1^2 - x2^2", "x0 x1 x2")
    assert poly("x", "x").homogenize() == poly("x", "x0 x")


def test_homogenize_zero_rejected():
    with pytest.raises(PreconditionError):
        Polynomial.zero(2).homogenize()


def test_dehomogenize():
    assert poly("x0^2 - x1^2 - x2^2", "x0 x1 x2").dehomogenize(0) == poly("1 - x1^2 - x2^2", "x0 x1 x2").dehomogenize(0)
    assert poly("x0*x1", "x0 x1").dehomogenize(0) == poly("x1", "x1")
    p = poly("x^2 - x*y + 1", XY)
    assert p.homogenize().dehomogenize(0) == p
    with pytest.raises(Exception):
        p.dehomogenize(5)


def test_sign_flip():
    assert poly("x + y", XY).sign_flip((1, -1)) == poly("x - y", XY)
    assert poly("x^2 + y^2", XY).sign_flip((-1, 1)) == poly("x^2 + y^2", XY)
    assert poly("x*y", XY).sign_flip((-1, -1)) == poly("x*y", XY)
    with pytest.raises(Exception):
        poly("x*y", XY).sign_flip((1,))


def test_elementary_symmetric():
    p = poly("x - 2*y", XY)
    assert elementary_symmetric([p] * 4, 1) == p.scale(4)
    assert elementary_symmetric([p] * 4, 4) == p**4
    e2 = elementary_symmetric([poly("x", XY), poly("y", XY), poly("x+y", XY)], 2)
    assert e2 == poly("x^2 + 3*x*y + y^2", XY)
    with pytest.raises(Exception):
        elementary_symmetric([p], 2)


def test_even_odd_split():
    ev, od = poly("x + y", XY).even_odd_split(1)
    assert (ev, od) == (poly("x", XY), poly("1", XY))
    ev, od = poly("y^2", XY).even_odd_split(1)
    assert ev == poly("y", XY) and od.is_zero()  # slot y stands for y^2
    ev, od = poly("x^2*y^3 + y", XY).even_odd_split(1)
    assert ev.is_zero() and od == poly("x^2*y + 1", XY)
    with pytest.raises(IndexError):
        poly("x", XY).even_odd_split(3)


def test_weighted_degree():
    assert poly("x^2*y", XY).weighted_degree((2, 1)) == 5
    assert poly("x", XY).weighted_degree((-1, 2)) == -1
    assert poly("x^4 + x*y", XY).weighted_degree((1, -1)) == 4


def test_parse_and_format():
    p = parse_poly("3/2*x^2*y - y + 7", ["x", "y"])
    assert format_poly(p, ["x", "y"]) == "3/2*x^2*y - y + 7"
    assert parse_poly(format_poly(p, ["x", "y"]), ["x", "y"]) == p


@pytest.mark.parametrize("text", ["1.5*x", "x^", "x + * y", "2/0*x", "z + x"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_poly(text, ["x", "y"])


def test_parse_error_column():
    with pytest.raises(ParseError) as ei:
        parse_poly("x + 1.5", ["x"])
    assert ei.value.column == 5
