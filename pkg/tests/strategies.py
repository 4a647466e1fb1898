"""Hypothesis strategies shared by the property and acceptance suites."""
from fractions import Fraction

from hypothesis import strategies as st

from poscert.certs import GeneratorSet, ModuleCert, SosPoly
from poscert.poly import Polynomial

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=6)
nonzero = rationals.filter(bool)
weights = st.fractions(min_value=Fraction(1, 6), max_value=4, max_denominator=6)


@st.composite
def polys(draw, nvars=2, max_deg=3, max_terms=5):
    k = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(k):
        e = tuple(draw(st.lists(st.integers(0, max_deg), min_size=nvars, max_size=nvars)))
        if sum(e) <= max_deg:
            terms[e] = draw(nonzero)
    return Polynomial(nvars, terms)


nonzero_polys = lambda **kw: polys(**kw).filter(lambda p: not p.is_zero())


@st.composite
def sos(draw, nvars=2, max_deg=2, max_squares=3):
    sq = draw(st.lists(st.tuples(weights, nonzero_polys(nvars=nvars, max_deg=max_deg, max_terms=3)),
                       max_size=max_squares))
    return SosPoly(nvars, tuple(sq))


@st.composite
def module_certs(draw, nvars=2, generators=None):
    """``(S, cert)`` with the target computed, so the identity holds by construction."""
    if generators is None:
        generators = st.lists(nonzero_polys(nvars=nvars, max_deg=2, max_terms=3), max_size=2)
    gens = tuple(draw(generators))
    S = GeneratorSet(nvars, gens)
    sig = tuple(draw(sos(nvars=nvars)) for _ in range(len(gens) + 1))
    target = sig[0].expand()
    for s, g in zip(sig[1:], gens):
        target = target + s.expand() * g
    return S, ModuleCert(target, sig)


def _replace(sigmas, i, new):
    return sigmas[:i] + (new,) + sigmas[i + 1:]


DELTAS = [Fraction(k, d) for k in range(-5, 6) if k for d in (1, 2, 3, 7)]


def corrupt(cert, rng):
    """A single-coefficient corruption of ``cert`` that must be rejected.

    Skipped by construction: replacing a one-monomial base ``c m`` by ``-c m``
    (a change of ``-2c``) leaves the square unchanged.
    """
    sig = cert.sigmas
    spots = [(i, j) for i, s in enumerate(sig) for j in range(len(s.squares))]
    kind = rng.choice(["target"] + (["weight", "base", "drop"] if spots else []))
    delta = rng.choice(DELTAS)
    if kind == "target":
        e = rng.choice(sorted(cert.target.terms) or [(0,) * cert.target.nvars])
        terms = cert.target.terms
        terms[e] = terms.get(e, 0) + delta
        return ModuleCert(Polynomial(cert.target.nvars, terms), sig)
    i, j = rng.choice(spots)
    squares = list(sig[i].squares)
    w, b = squares[j]
    if kind == "weight":
        delta = abs(delta) if rng.random() < 0.5 or w <= abs(delta) else -abs(delta)
        squares[j] = (w + delta, b)
    elif kind == "base":
        e = rng.choice(sorted(b.terms))
        c = b.coeff(e)
        if len(b.terms) == 1 and delta == -2 * c:
            delta = -c  # would merely flip the sign; drop the base instead
        terms = b.terms
        terms[e] = c + delta
        nb = Polynomial(b.nvars, terms)
        if nb.is_zero():
            del squares[j]
        else:
            squares[j] = (w, nb)
    else:
        del squares[j]
    return ModuleCert(cert.target, _replace(sig, i, SosPoly(sig[i].nvars, tuple(squares))))


@st.composite
def corruptions(draw, cert):
    return corrupt(cert, draw(st.randoms(use_true_random=False)))
