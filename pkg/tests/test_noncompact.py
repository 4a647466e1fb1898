from fractions import Fraction

import pytest

from poscert import certs
from poscert.certs import GeneratorSet, ModuleCert, PreorderCert, SosPoly
from poscert.errors import CertificationFailure, ParseError, PreconditionError
from poscert.noncompact import (Automorphism, IntervalUnion, LogPolyhedron, TentacleSet,
                                cone_coordinates, desquared_set, eliminate_squares,
                                infeasibility_certificate, is_putinar_1d, natural_generators,
                                semialgebraic_set_1d, stability_degree_bound, stability_multipliers,
                                substitute_automorphism, triple_intersection_check,
                                unimodular_cone_check)
from poscert.poly import Polynomial, poly

X = "x"
XY = "x y"


# -- the line ----------------------------------------------------------------------------


def test_natural_generators_two_pieces():
    K = IntervalUnion.parse("[0,1]u[2,inf)")
    assert natural_generators(K) == [poly("x", X), poly("(x - 1)*(x - 2)", X)]


def test_natural_generators_real_line():
    assert natural_generators(IntervalUnion.parse("R")) == []


def test_natural_generators_compact():
    K = IntervalUnion.parse("[-1/2,3]")
    assert natural_generators(K) == [poly("x + 1/2", X), poly("3 - x", X)]


def test_natural_generators_cut_out_K():
    K = IntervalUnion.parse("(-inf,-1]u[0,1]u[3,inf)")
    T = natural_generators(K)
    for k in range(-40, 41):
        t = Fraction(k, 8)
        assert all(p.evaluate([t]) >= 0 for p in T) == K.contains(t)


def test_natural_generators_empty():
    with pytest.raises(PreconditionError):
        natural_generators(IntervalUnion(()))


@pytest.mark.parametrize("text", ["[1,0]", "[0,1]u[1,2]", "[0,1)", "[0,x]"])
def test_interval_parse_errors(text):
    with pytest.raises((ParseError, PreconditionError)):
        IntervalUnion.parse(text)


def test_interval_roundtrip():
    K = IntervalUnion.parse("(-inf,-1]u[0,1/2]u[3,inf)")
    assert IntervalUnion.parse(str(K)) == K


def test_semialgebraic_set():
    K = semialgebraic_set_1d([poly("x", X), poly("(x - 1)*(x - 2)", X)])
    assert K == IntervalUnion.parse("[0,1]u[2,inf)")


def test_putinar_halfline():
    v = is_putinar_1d([poly("x", X)], IntervalUnion.parse("[0,inf)"))
    assert v.putinar


def test_putinar_cubic_counterexample():
    # K_S is recomputed: {x >= 0, (x-1)^3 >= 0} = [1, inf), natural generator x - 1 missing
    v = is_putinar_1d([poly("x", X), poly("(x - 1)^3", X)], IntervalUnion.parse("[0,inf)"))
    assert not v.putinar
    assert v.K == IntervalUnion.parse("[1,inf)")
    assert v.missing == (poly("x - 1", X),)
    assert v.note


def test_putinar_two_pieces():
    S = [poly("x", X), poly("(x - 1)*(x - 2)", X)]
    assert is_putinar_1d(S, IntervalUnion.parse("[0,1]u[2,inf)")).putinar


def test_putinar_scalar_multiples():
    assert is_putinar_1d([poly("3*x", X)]).putinar


def test_putinar_compact_rejected():
    with pytest.raises(PreconditionError):
        is_putinar_1d([poly("x", X), poly("1 - x", X)])


# -- tentacles ---------------------------------------------------------------------------


@pytest.mark.parametrize("text,expected", [
    ("(1,0);(0,1)", (1, 1)),
    ("(0,1);(1,-1)", (2, 1)),
    ("(-1,2);(1,-1)", (2, 3)),
])
def test_stability_multipliers(text, expected):
    T = TentacleSet.parse(text)
    r = stability_multipliers(T)
    assert r == expected
    assert all(v > 0 for v in (sum(ri * z[j] for ri, z in zip(r, T.directions)) for j in range(2)))


def test_stability_infeasible():
    T = TentacleSet.parse("(1,-1);(-1,1)")
    assert stability_multipliers(T, bound=5) is None
    y = infeasibility_certificate(T)
    assert all(sum(a * b for a, b in zip(z, y)) <= 0 for z in T.directions)


def test_stability_inconclusive():
    # feasible, but only with multipliers beyond the bound
    T = TentacleSet.parse("(-3,4);(1,-1)")
    with pytest.raises(CertificationFailure):
        stability_multipliers(T, bound=5)
    assert stability_multipliers(T, bound=20) == (2, 7)


def test_zero_direction():
    with pytest.raises(PreconditionError):
        TentacleSet(((0, 0),))


def test_degree_bound_single():
    assert stability_degree_bound(TentacleSet(((2, 1),)), (1,), 4) == 8
    for d in range(6):
        assert stability_degree_bound(TentacleSet(((1, 1),)), (1,), d) == d


def test_degree_bound_two_tentacles():
    T = TentacleSet.parse("(0,1);(1,-1)")
    # relabeled: (1,-1) plays z1 > 0 with r=1, (0,1) plays z2 > 0 with r=2
    # numerator 1*1 + 2*1 = 3, denominator min(1, 1) = 1
    assert stability_degree_bound(T, (2, 1), 2) == 6


def test_degree_bound_monotone():
    T = TentacleSet.parse("(-1,2);(1,-1)")
    vals = [stability_degree_bound(T, (2, 3), d) for d in range(8)]
    assert vals == sorted(vals)


def test_degree_bound_invalid_multipliers():
    T = TentacleSet.parse("(0,1);(1,-1)")
    with pytest.raises(PreconditionError):
        stability_degree_bound(T, (1, 1), 2)


# -- elimination of squares -----------------------------------------------------------------


def test_eliminate_squares_trivial():
    # f(x, y^2) = y^2 over S = {} ... as a square of y
    S = GeneratorSet(2, ())
    cert = ModuleCert(poly("y^2", XY), (SosPoly.square(poly("y", XY)),))
    out = eliminate_squares(cert, S, 1)
    assert out.target == poly("y", XY)
    assert out.sigmas[(1,)].expand() == Polynomial.const(1, 2)


def test_eliminate_squares_split():
    S = GeneratorSet(2, ())
    cert = ModuleCert(poly("(x + y)^2 + (x - y)^2", XY),
                      (SosPoly(2, ((1, poly("x + y", XY)), (1, poly("x - y", XY)))),))
    out = eliminate_squares(cert, S, 1)
    assert out.target == poly("2*x^2 + 2*y", XY)
    assert out.sigmas[(0,)].expand() == poly("2*x^2", XY)
    assert out.sigmas[(1,)].expand() == Polynomial.const(2, 2)


def test_eliminate_squares_with_generator():
    S = GeneratorSet(2, (poly("x", XY),))
    cert = ModuleCert(poly("x + y^2", XY), (SosPoly.square(poly("y", XY)), SosPoly.const(1, 2)))
    out = eliminate_squares(cert, S, 1)
    S2 = desquared_set(S, 1)
    assert S2.generators == (poly("x", XY), poly("y", XY))
    assert out.target == poly("x + y", XY)
    assert certs.verify_preorder(out, S2)
    # at most one g_i per support, optionally with y
    assert all(sum(a[:-1]) <= 1 for a in out.sigmas)


def test_eliminate_squares_odd_generator():
    S = GeneratorSet(2, (poly("y", XY),))
    cert = ModuleCert(poly("y", XY), (SosPoly.zero(2), SosPoly.const(1, 2)))
    with pytest.raises(PreconditionError):
        eliminate_squares(cert, S, 1)


def test_eliminate_squares_rejects_bad_cert():
    S = GeneratorSet(2, ())
    cert = ModuleCert(poly("y^2 + 1", XY), (SosPoly.square(poly("y", XY)),))
    with pytest.raises(PreconditionError):
        eliminate_squares(cert, S, 1)


# -- automorphisms ---------------------------------------------------------------------------


def _strip():
    S = GeneratorSet(2, (poly("x", XY), poly("1 - x", XY), poly("y", XY)))
    cert = PreorderCert(poly("x*y + 1/2", XY), {(0, 0, 0): SosPoly.const(Fraction(1, 2), 2),
                                                 (1, 0, 1): SosPoly.const(1, 2)})
    return S, cert


def test_identity_automorphism():
    S, cert = _strip()
    out, S2 = substitute_automorphism(cert, S, Automorphism.identity(2))
    assert out == cert and S2.generators == S.generators


def test_shear_y_by_x_squared():
    S, cert = _strip()
    auto = Automorphism.shear(1, poly("x^2", XY))
    out, S2 = substitute_automorphism(cert, S, auto)
    assert S2.generators == (poly("x", XY), poly("1 - x", XY), poly("y - x^2", XY))
    assert certs.verify_preorder(out, S2)


def test_shear_x_by_y_squared():
    S = GeneratorSet(2, (poly("x", XY), poly("1 - x", XY)))
    cert = ModuleCert(poly("1", XY), (SosPoly.zero(2), SosPoly.const(1, 2), SosPoly.const(1, 2)))
    out, S2 = substitute_automorphism(cert, S, Automorphism.shear(0, poly("y^2", XY)))
    assert S2.generators == (poly("x - y^2", XY), poly("1 - x + y^2", XY))
    assert certs.verify_module(out, S2)


def test_affine_automorphism():
    S, cert = _strip()
    auto = Automorphism.affine([[2, 1], [0, 1]], [1, -1])
    out, S2 = substitute_automorphism(cert, S, auto)
    assert certs.verify_preorder(out, S2)
    # forward then inverse is the identity
    xs = Polynomial.gens(2)
    assert [p.substitute(auto.inverse) for p in auto.forward] == xs


def test_singular_affine():
    with pytest.raises(PreconditionError):
        Automorphism.affine([[1, 2], [2, 4]])


def test_shear_must_not_involve_variable():
    with pytest.raises(PreconditionError):
        Automorphism.shear(1, poly("y", XY))


# -- logarithmic polyhedra ---------------------------------------------------------------------


def test_unimodular_witness_cone():
    P = LogPolyhedron(((0, 2), (2, 2)), (1, 1))
    res = unimodular_cone_check(P)
    assert res.unimodular
    assert set(res.witness) == {(0, 1), (1, 1)}
    for a in P.alphas:
        s, t = cone_coordinates(a, res.witness)
        assert s >= 0 and t >= 0


def test_unimodular_standard():
    res = unimodular_cone_check(LogPolyhedron(((1, 0), (0, 1)), (1, 1)))
    assert res.unimodular and abs(res.det) == 1


def test_not_unimodular():
    res = unimodular_cone_check(LogPolyhedron(((1, 0), (1, 2)), (1, 1)))
    assert not res.unimodular and abs(res.det) == 2


def test_unimodular_zero_vector():
    with pytest.raises(PreconditionError):
        unimodular_cone_check(LogPolyhedron(((0, 0),), (1,)))


def test_triple_vacuous():
    assert triple_intersection_check(LogPolyhedron(((0, 1), (1, 1)), (1, 1))).ok


def test_triple_meeting_at_one():
    P = LogPolyhedron(((0, 1), (1, 1), (1, 2)), (1, 1, 1))
    res = triple_intersection_check(P)
    assert not res.ok and res.witnesses


def test_triple_generic_pass():
    P = LogPolyhedron(((0, 1), (1, 1), (1, 2)), (1, 1, 2))
    assert triple_intersection_check(P).ok


def test_logpoly_parse():
    P = LogPolyhedron.parse("0 1 <= 1\n1 1 <= 1\n")
    assert P.alphas == ((0, 1), (1, 1)) and P.rs == (1, 1)
    assert triple_intersection_check(P).ok
    with pytest.raises(ParseError):
        LogPolyhedron.parse("1 1 < 1")
