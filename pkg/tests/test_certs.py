from fractions import Fraction

import pytest

from poscert import certs
from poscert.certs import (MODULE, PREORDER, GeneratorSet, ModuleCert, PreorderCert, SosPoly, add,
                           arch_monomial_rule, arch_square_rule, descent_loop, descent_step, flatten,
                           gen, product_rule, sos_leaf, times_sos)
from poscert.errors import ModeError, PoscertError, PreconditionError
from poscert.poly import Polynomial, poly

XY = "x y"
half = Fraction(1, 2)


def sphere():
    S = GeneratorSet(2, (poly("1 - x^2 - y^2", XY),))
    cert = ModuleCert(poly("1 - x", XY), (
        SosPoly(2, ((half, poly("x - 1", XY)), (half, poly("y", XY)))),
        SosPoly.const(half, 2),
    ))
    return S, cert


def test_sphere_identity_accepts():
    S, cert = sphere()
    assert certs.verify_module(cert, S)
    assert certs.verify_preorder(cert.to_preorder(), S)


def test_zero_target_empty_sigmas():
    S = GeneratorSet(1, (poly("x", "x"),))
    assert certs.verify_module(ModuleCert(Polynomial.zero(1), (SosPoly.zero(1), SosPoly.zero(1))), S)


def test_reject_reports_monomial():
    S = GeneratorSet(1, (poly("x", "x"),))
    v = certs.verify_module(ModuleCert(poly("1", "x"), (SosPoly.square(poly("x", "x")), SosPoly.zero(1))), S)
    assert not v and v.kind == "identity" and v.monomial is not None


def test_arity_mismatch():
    S, cert = sphere()
    with pytest.raises(PreconditionError):
        certs.verify_module(ModuleCert(cert.target, cert.sigmas[:1]), S)


def test_preorder_generator_product():
    S = GeneratorSet(1, (poly("x", "x"), poly("1 - x", "x")))
    cert = PreorderCert(poly("x*(1-x)", "x"), {(1, 1): SosPoly.const(1, 1)})
    assert certs.verify_preorder(cert, S)


def test_homogeneous_mode_reports_degree_violation():
    S = GeneratorSet(2, (poly("x^2 - y^2", XY),), homogeneous=True)
    good = ModuleCert(poly("2*x^2", XY), (SosPoly(2, ((1, poly("x", XY)), (1, poly("y", XY)))), SosPoly.const(1, 2)))
    assert certs.verify_module(good, S)
    # same identity after adding and subtracting a constant is not homogeneous
    bad = ModuleCert(poly("x^2 + y^2 + 1", XY), (SosPoly(2, ((1, poly("x", XY)), (1, poly("y", XY)), (1, poly("1", XY)))), SosPoly.zero(2)))
    v = certs.verify_module(bad, S)
    assert not v and v.kind == "homogeneity"


def test_product_rule_principal_module():
    x = "x"
    S = GeneratorSet(1, (poly("1 - x^2", x),))
    e = product_rule(gen(S, 1), gen(S, 1), S, MODULE)
    cert = flatten(e, S, MODULE)
    assert certs.verify_module(cert, S)
    assert cert.target == poly("(1 - x^2)^2", x)
    assert not cert.sigmas[1]


def test_product_of_tangent_planes():
    from poscert.putinar import tangent_plane_cert
    S = GeneratorSet(2, (poly("1 - x^2 - y^2", XY),))
    a = certs.cert_leaf(tangent_plane_cert((1, 0)), S)
    b = certs.cert_leaf(tangent_plane_cert((Fraction(3, 5), Fraction(4, 5))), S)
    cert = flatten(product_rule(a, b, S, MODULE), S, MODULE)
    assert certs.verify_module(cert, S)
    assert cert.target == poly("(1 - x) * (1 - 3/5*x - 4/5*y)", XY)


def test_product_rule_refused_in_multi_generator_module():
    S = GeneratorSet(1, (poly("x", "x"), poly("1 - x", "x")))
    with pytest.raises(ModeError):
        product_rule(gen(S, 1), gen(S, 2), S, MODULE)
    # fine in the preorder
    cert = flatten(product_rule(gen(S, 1), gen(S, 2), S, PREORDER), S, PREORDER)
    assert certs.verify_preorder(cert, S)


def test_flatten_leaf_and_sum():
    S = GeneratorSet(1, (poly("x", "x"), poly("1 - x", "x")))
    c = flatten(gen(S, 1), S, MODULE)
    assert c.sigmas[1].expand() == poly("1", "x") and not c.sigmas[0]
    c = flatten(add(gen(S, 1), gen(S, 2)), S, MODULE)
    assert certs.verify_module(c, S) and c.target == poly("1", "x")


def test_flatten_sphere_tree_matches_identity():
    S, cert = sphere()
    tree = add(sos_leaf(cert.sigmas[0], 1), times_sos(cert.sigmas[1], gen(S, 1)))
    flat = flatten(tree, S, MODULE)
    assert flat.target == cert.target
    assert flat.sigmas[0].expand() == cert.sigmas[0].expand()
    assert flat.sigmas[1].expand() == cert.sigmas[1].expand()


# -- archimedean rules ------------------------------------------------------------


@pytest.mark.parametrize("sign", [1, -1])
def test_arch_monomial_rule(sign):
    names = "x0 x1"
    g, m = poly("x0", names), poly("x1", names)
    S = GeneratorSet(2, (poly("x0^2 - x1^2", names),))
    e = arch_monomial_rule(g, m, 1, 0, gen(S, 1), sign=sign, S=S)
    assert e.poly == poly("x0*(x0 + x1)" if sign == 1 else "x0*(x0 - x1)", names)
    assert certs.verify_module(flatten(e, S, MODULE), S)


def test_arch_monomial_scalar_case():
    g, m = poly("1", "x"), poly("1", "x")
    S = GeneratorSet(1, (poly("1", "x"),))
    e = arch_monomial_rule(g, m, 2, 0, certs.const_leaf(1, 1, 1), sign=-1, S=S)
    assert e.poly == poly("1", "x")
    assert certs.verify_module(flatten(e, S, MODULE), S)


def test_arch_monomial_rejects_small_N():
    g = poly("x", "x")
    S = GeneratorSet(1, (g,))
    with pytest.raises(PreconditionError):
        arch_monomial_rule(g, g, Fraction(1, 2), 0, gen(S, 1))


def test_arch_square_rule():
    x = "x"
    S = GeneratorSet(1, (poly("1 + x", x), poly("1 - x", x)))
    e = arch_square_rule(poly("1", x), poly("x", x), 1, 0, 0, gen(S, 1), gen(S, 2))
    assert e.poly == poly("1 - x^2", x)
    assert certs.verify_module(flatten(e, S, MODULE), S)


def test_arch_square_zero_a():
    x = "x"
    g = poly("1", x)
    S = GeneratorSet(1, (poly("2", x),))
    e = arch_square_rule(g, Polynomial.zero(1), 2, 0, 0, gen(S, 1), gen(S, 1))
    assert e.poly == poly("4", x)
    assert certs.verify_module(flatten(e, S, MODULE), S)


def test_arch_square_shape_mismatch():
    x = "x"
    S = GeneratorSet(1, (poly("1 + x", x), poly("1 - x", x)))
    with pytest.raises(PreconditionError):
        arch_square_rule(poly("1", x), poly("x", x), 1, 0, 0, gen(S, 2), gen(S, 1))


# -- descent ------------------------------------------------------------------------


def _descent_instance():
    # g = 1, f = 1/2 + x^2, t = 1, kappa = 4, r1 = 1
    x = "x"
    S = GeneratorSet(1, (poly("3", x), poly("1/2 + x^2 - 1", x)))
    g, t, f = poly("1", x), poly("1", x), poly("1/2 + x^2", x)
    p_kappa = gen(S, 1)                          # 4 - 1
    p_r = add(gen(S, 2), certs.const_leaf(2, 1, 2))  # 1 + f
    p_t = gen(S, 2)                              # f*1 - 1
    t_expr = certs.const_leaf(1, 1, 2)
    return S, g, t, f, p_kappa, p_r, p_t, t_expr


def test_descent_step_lowers_r():
    S, g, t, f, p_kappa, p_r, p_t, t_expr = _descent_instance()
    e, r = descent_step(f, g, t, 4, 0, 0, 1, 0, 0, p_kappa, p_r, p_t, t_expr, S=S)
    assert r == Fraction(3, 4)
    assert e.poly == f + Polynomial.const(r, 1)
    assert certs.verify_preorder(flatten(e, S, PREORDER), S)


def test_descent_loop_terminates_with_f():
    S, g, t, f, p_kappa, p_r, p_t, t_expr = _descent_instance()
    e, N = descent_loop(f, g, t, 4, 0, 0, 0, 0, 1, p_kappa, p_r, p_t, t_expr, S)
    assert e.poly == f
    assert certs.verify_preorder(flatten(e, S, PREORDER), S)


def test_descent_shape_mismatch():
    S, g, t, f, p_kappa, p_r, p_t, t_expr = _descent_instance()
    with pytest.raises(PreconditionError):
        descent_step(f, g, t, 5, 0, 0, 1, 0, 0, p_kappa, p_r, p_t, t_expr, S=S)


def test_descent_with_nontrivial_g():
    # S = {1 - x^2}, f = 2 - x^2, t = 1 and l = m = 0, so f t - 1 = g
    x = "x"
    g = poly("1 - x^2", x)
    f = poly("2 - x^2", x)
    t = poly("1", x)
    S = GeneratorSet(1, (g,))
    p_kappa = certs.const_leaf(1, 1, 1)                     # kappa=2: 2 - 1
    p_r = add(certs.const_leaf(Fraction(5, 2), 1, 1), gen(S, 1))  # r=3/2: 3/2 + 2 - x^2
    p_t = gen(S, 1)                                         # f*1 - 1 = 1 - x^2 = g
    e, r = descent_step(f, g, t, 2, 0, 0, Fraction(3, 2), 0, 0, p_kappa, p_r, p_t,
                        certs.const_leaf(1, 1, 1), S=S)
    assert r == 1 and e.poly == f + 1
    assert certs.verify_preorder(flatten(e, S, PREORDER), S)


def test_rule_rejects_wrong_rhs():
    from poscert.certs import _rule
    S = GeneratorSet(1, (poly("x", "x"),))
    with pytest.raises(PoscertError):
        _rule("x", poly("2*x", "x"), gen(S, 1))
