"""The twelve acceptance criteria, one test each.

Each test prints a ``[PASS]``/``[FAIL]`` line with its tolerance and runtime
limit; the lines are repeated in the terminal summary.
"""
import random
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from poscert import certs
from poscert.certs import MODULE, PREORDER, GeneratorSet, ModuleCert, PreorderCert, SosPoly, flatten, gen
from poscert.noncompact import (Automorphism, IntervalUnion, TentacleSet, desquared_set,
                                eliminate_squares, is_putinar_1d, natural_generators,
                                stability_degree_bound, stability_multipliers,
                                substitute_automorphism, unimodular_cone_check, cone_coordinates,
                                LogPolyhedron)
from poscert.poly import Polynomial, poly
from poscert.polya import SimplexSpec, habicht_certificate, handelman_simplex, polya_check, polya_exponent
from poscert.putinar import (Problem, geometric_series_extend, putinar_search, reduce_to_ball,
                             sphere_points)

import test_properties as props
from strategies import corrupt

XY = "x y"


def _perturbations(cert):
    """Every single-coefficient perturbation of weights, square bases and target."""
    deltas = (Fraction(1, 7), Fraction(-1, 7), Fraction(1), Fraction(-1), Fraction(3))
    sig = cert.sigmas
    for e in set(cert.target.terms) | {(0, 0), (1, 1)}:
        for d in deltas:
            t = cert.target.terms
            t[e] = t.get(e, 0) + d
            yield ModuleCert(Polynomial(2, t), sig)
    for i, s in enumerate(sig):
        for j, (w, b) in enumerate(s.squares):
            for d in deltas:
                sq = list(s.squares)
                if w + d > 0:
                    sq[j] = (w + d, b)
                    yield ModuleCert(cert.target, sig[:i] + (SosPoly(2, tuple(sq)),) + sig[i + 1:])
                for e in set(b.terms) | {(0, 0), (0, 1)}:
                    c = b.coeff(e)
                    if len(b.terms) == 1 and e in b.terms and d == -2 * c:
                        continue
                    t = b.terms
                    t[e] = c + d
                    sq = list(s.squares)
                    sq[j] = (w, Polynomial(2, t))
                    yield ModuleCert(cert.target, sig[:i] + (SosPoly(2, tuple(sq)),) + sig[i + 1:])


def test_c01_sphere_identity(criterion):
    with criterion(1, "sphere identity accepted, every single-coefficient perturbation rejected",
                   "exact", 1):
        S = GeneratorSet(2, (poly("1 - x^2 - y^2", XY),))
        half = Fraction(1, 2)
        cert = ModuleCert(poly("1 - x", XY), (SosPoly(2, ((half, poly("x - 1", XY)), (half, poly("y", XY)))),
                                             SosPoly.const(half, 2)))
        assert certs.verify_module(cert, S)
        n = 0
        for bad in _perturbations(cert):
            assert not certs.verify_module(bad, S)
            n += 1
        assert n >= 50


def test_c02_polya_exponent(criterion):
    with criterion(2, "Polya exponent of x^2 - xy + y^2 is 3; N = 2 fails at x^2 y^2", "exact", 1):
        f = poly("x^2 - x*y + y^2", XY)
        r = polya_exponent(f, 10)
        assert r.N == 3
        assert r.product == poly("x^5 + 2*x^4*y + x^3*y^2 + x^2*y^3 + 2*x*y^4 + y^5", XY)
        assert polya_check(f, 2) == (False, (2, 2))


def test_c03_habicht(criterion):
    with criterion(3, "Habicht identities for x0^2 + x1^2 and x0^4 - x0^2 x1^2 + x1^4", "exact", 10):
        f = poly("x0^2 + x1^2", "x0 x1")
        h = habicht_certificate(f)
        assert h.verify()
        assert all(len(b) == 1 for s in (h.M1, h.M2) for _, b in s.squares)
        assert h.numerator() == f**4 * 8 and h.denominator() * f == f**4 * 8
        g = poly("x0^4 - x0^2*x1^2 + x1^4", "x0 x1")
        h2 = habicht_certificate(g)
        assert h2.verify() and h2.denominator() * g == h2.numerator()


def test_c04_handelman(criterion):
    with criterion(4, "Handelman coefficients of x^2 - x + 1/2 on [0,1], re-verified as preorder cert",
                   "exact", 1):
        f = poly("x^2 - x + 1/2", "x")
        cert = handelman_simplex(f, SimplexSpec.standard(1))
        assert cert.coefficients == {(2, 0): Fraction(1, 2), (0, 2): Fraction(1, 2)}
        S = GeneratorSet(1, (poly("1 - x", "x"), poly("x", "x")))
        assert certs.verify_preorder(cert.to_preorder(), S)
        assert set(cert.lambdas) == set(S.generators)


def test_c05_putinar_end_to_end(criterion):
    with criterion(5, "Putinar search for x + 1/10 on {disk, x}; 100 corrupted certificates rejected",
                   "exact", 60):
        S = GeneratorSet(2, (poly("1 - x^2 - y^2", XY), poly("x", XY)))
        _, cert = putinar_search(Problem(S, poly("x + 1/10", XY)))
        assert certs.verify_module(cert, S) and cert.target == poly("x + 1/10", XY)
        # a larger certificate from the same engine gives more room for corruption
        S2 = GeneratorSet(2, (poly("1 - x^2 - y^2", XY), poly("x - y^2", XY)))
        _, cert2 = putinar_search(Problem(S2, poly("x + 1/4", XY)))
        rng = random.Random(2024)
        for k in range(100):
            SS, cc = (S, cert) if k % 2 else (S2, cert2)
            assert not certs.verify_module(corrupt(cc, rng), SS)


def test_c06_reduce_to_ball(criterion):
    with criterion(6, "reduce_to_ball turns 1 - x^4 - y^4 into 3/2 - x^2 - y^2", "exact", 1):
        S = GeneratorSet(2, (poly("1 - x^4 - y^4", XY),))
        e = reduce_to_ball(gen(S, 1))
        assert e.poly == poly("3/2 - x^2 - y^2", XY)
        cert = flatten(e, S, MODULE)
        assert certs.verify_module(cert, S)
        assert cert.sigmas[1].expand() == Polynomial.const(1, 2)
        assert cert.sigmas[0].expand() == poly("(x^2 - 1/2)^2 + (y^2 - 1/2)^2", XY)


def test_c07_geometric_series(criterion):
    with criterion(7, "geometric series extensions l = 0..3 verify, top part negative", "exact"):
        S = GeneratorSet(1, (poly("1 - x^2", "x"),))
        p = PreorderCert(poly("1", "x"), {(0,): SosPoly.const(1, 1)})
        q = PreorderCert(poly("1 - x^2", "x"), {(1,): SosPoly.const(1, 1)})
        for l in range(4):
            e = geometric_series_extend(p, q, S, 2, l)
            assert certs.verify_preorder(flatten(e, S, PREORDER), S)
            top = e.poly.highest_degree_part()
            assert all(top.evaluate(pt) < 0 for pt in sphere_points(1, 16))


def test_c08_natural_generators(criterion):
    with criterion(8, "natural generators of [0,1] u [2,inf); Putinar verdicts for {x} and {x,(x-1)^3}",
                   "exact"):
        K = IntervalUnion.parse("[0,1]u[2,inf)")
        assert natural_generators(K) == [poly("x", "x"), poly("(x - 1)*(x - 2)", "x")]
        half = IntervalUnion.parse("[0,inf)")
        assert is_putinar_1d([poly("x", "x")], half).putinar
        assert not is_putinar_1d([poly("x", "x"), poly("(x - 1)^3", "x")], half).putinar


def test_c09_stability(criterion):
    with criterion(9, "tentacle multipliers (1,1), (2,1), (2,3); bound 8 for z = (2,1), d = 4", "exact"):
        for text, r in (("(1,0);(0,1)", (1, 1)), ("(0,1);(1,-1)", (2, 1)), ("(-1,2);(1,-1)", (2, 3))):
            assert stability_multipliers(TentacleSet.parse(text)) == r
        assert stability_degree_bound(TentacleSet(((2, 1),)), (1,), 4) == 8


def test_c10_elimination_of_squares(criterion):
    with criterion(10, "20 random y-even certificates survive elimination; strip shear preserves verification",
                   "exact"):
        done = []

        @settings(max_examples=20, deadline=None, database=None, derandomize=True)
        @given(data=st.data())
        def check(data):
            S, cert = props.random_even_cert(data)
            out = eliminate_squares(cert, S, 1)
            assert certs.verify_preorder(out, desquared_set(S, 1))
            done.append(1)

        check()
        assert len(done) >= 20
        S = GeneratorSet(2, (poly("x", XY), poly("1 - x", XY), poly("y", XY)))
        cert = PreorderCert(poly("x*y + 1/2", XY), {(0, 0, 0): SosPoly.const(Fraction(1, 2), 2),
                                                     (1, 0, 1): SosPoly.const(1, 2)})
        out, S2 = substitute_automorphism(cert, S, Automorphism.shear(1, poly("x^2", XY)))
        assert S2.generators == (poly("x", XY), poly("1 - x", XY), poly("y - x^2", XY))
        assert certs.verify_preorder(out, S2)


def test_c11_unimodularity(criterion):
    with criterion(11, "{(0,2),(2,2)} unimodular with a generating witness; {(1,0),(1,2)} not", "exact"):
        P = LogPolyhedron(((0, 2), (2, 2)), (1, 1))
        res = unimodular_cone_check(P)
        assert res.unimodular and set(res.witness) == {(0, 1), (1, 1)}
        for a in P.alphas:
            assert all(c >= 0 for c in cone_coordinates(a, res.witness))
        assert not unimodular_cone_check(LogPolyhedron(((1, 0), (1, 2)), (1, 1))).unimodular


def test_c12_property_suites(criterion):
    with criterion(12, "property suites, 200 randomized cases each, zero failures", "exact", 120):
        for fn in (props.test_ring_laws, props.test_homogenize_roundtrip,
                   props.test_even_odd_split_recomposes, props.test_certificate_fuzz_rejection):
            assert fn.hypothesis.inner_test is not None
            fn()
