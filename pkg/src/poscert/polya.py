"""Constructive Pólya, Habicht and Handelman certificates.

* :func:`polya_exponent` finds the least ``N`` such that ``(x_0+...+x_n)^N f``
  has a positive coefficient at every monomial of its degree.
* :func:`habicht_certificate` writes a positive definite form as a quotient of
  sums of squares, ``(M2 + R2) f = M1 + R1`` with ``M1``, ``M2`` monomial squares.
* :func:`handelman_simplex` writes a polynomial positive on a simplex as a
  non-negative combination of products of the facet polynomials.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


from . import linalg
from .certs import GeneratorSet, PreorderCert, SosPoly
from .errors import CertificationFailure, PreconditionError, ResourceCapError
from .poly import Polynomial, as_fraction, elementary_symmetric_all, grlex_key, monomials_of_degree

MAX_TERMS = 2_000_000
HABICHT_MAX_N = 3


class PolyaFailure(CertificationFailure):
    """No admissible exponent up to the cap.

    ``monomial`` is the offending monomial at the last exponent tried; when
    ``witness`` is set the form is non-positive there, so no exponent exists.
    """

    def __init__(self, n_tried, monomial, witness=None, value=None):
        self.n_tried = n_tried
        self.monomial = monomial
        self.witness = witness
        self.value = value
        self.refuted = witness is not None
        if witness is not None:
            msg = f"form is {value} at {tuple(str(v) for v in witness)} in the closed octant; no exponent exists"
        else:
            msg = f"inconclusive: exponent cap {n_tried} reached, monomial {monomial} still not positive"
        super().__init__(msg)


@dataclass(frozen=True)
class PolyaResult:
    N: int
    product: Polynomial


def _bad_monomial(terms, nvars, deg, strict):
    # first (grlex) monomial whose coefficient violates the criterion
    bad = [e for e, c in terms.items() if c < 0]
    if strict:
        bad += [e for e, c in terms.items() if c == 0]
        if len(terms) < math.comb(deg + nvars - 1, nvars - 1):
            for e in monomials_of_degree(nvars, deg):
                if terms.get(e, 0) <= 0:
                    bad.append(e)
                    break
    return min(bad, key=grlex_key) if bad else None


def _times_sum(terms, nvars):
    out = {}
    get = out.get
    for e, c in terms.items():
        for i in range(nvars):
            ne = e[:i] + (e[i] + 1,) + e[i + 1 :]
            out[ne] = get(ne, 0) + c
    return {e: c for e, c in out.items() if c}


def polya_check(f: Polynomial, N: int, strict: bool = True):
    """``(ok, bad_monomial)`` for the exponent ``N``."""
    res = _polya_scan(f, N, strict, start=N)
    return res[0] is not None, res[2]


def _polya_scan(f, N_max, strict, start=0):
    nv, d = f.nvars, f.degree()
    L = f.content_lcm()
    cur = {e: int(c * L) for e, c in f.terms.items()}
    for N in range(N_max + 1):
        if N >= start:
            bad = _bad_monomial(cur, nv, d + N, strict)
            if bad is None:
                return N, cur, None, L
        else:
            bad = None
        if N == N_max:
            return None, cur, bad, L
        cur = _times_sum(cur, nv)
        if len(cur) > MAX_TERMS:
            raise ResourceCapError(f"Pólya product exceeded {MAX_TERMS} terms at exponent {N + 1}")
    return None, cur, None, L


def _simplex_points(nvars, res):
    for comp in itertools.product(range(res + 1), repeat=nvars):
        if sum(comp) == res:
            yield tuple(Fraction(c, res) for c in comp)


def find_octant_witness(f: Polynomial, hint=None, strict=True, resolution=8):
    """Look for a point of the closed octant (minus the origin) where ``f`` fails
    positivity (``<= 0`` if strict, ``< 0`` otherwise)."""
    nv = f.nvars
    cands = []
    for i in range(nv):
        e = [Fraction(0)] * nv
        e[i] = Fraction(1)
        cands.append(tuple(e))
    if hint is not None and any(hint):
        cands.append(tuple(Fraction(v) for v in hint))
    cands.append(tuple(Fraction(1) for _ in range(nv)))
    if math.comb(resolution + nv - 1, nv - 1) <= 5000:
        cands.extend(_simplex_points(nv, resolution))
    for p in cands:
        v = f.evaluate(p)
        if v < 0 or (strict and v == 0):
            return p, v
    return None, None


def polya_exponent(f: Polynomial, N_max: int = 50, strict: bool = True) -> PolyaResult:
    """Smallest ``N <= N_max`` with every monomial of ``(sum x)^N f`` positive.

    ``strict=False`` only asks for non-negative coefficients (what a Handelman
    representation needs).
    """
    if f.is_zero():
        raise PreconditionError("Pólya exponent of the zero form")
    if not f.is_homogeneous():
        raise PreconditionError("Pólya's theorem needs a homogeneous form")
    N, cur, bad, L = _polya_scan(f, N_max, strict)
    if N is None:
        witness, value = find_octant_witness(f, hint=bad, strict=strict)
        raise PolyaFailure(N_max, bad, witness, value)
    product = Polynomial(f.nvars, {e: Fraction(c, L) for e, c in cur.items()})
    return PolyaResult(N, product)


# -- Habicht ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HabichtCert:
    """``(M2 + R2) * f == M1 + R1`` with ``M1``, ``M2`` sums of monomial squares."""

    f: Polynomial
    M1: SosPoly
    M2: SosPoly
    R1: SosPoly
    R2: SosPoly
    D: int
    polya_exponents: tuple = ()

    def numerator(self) -> Polynomial:
        return (self.M1 + self.R1).expand()

    def denominator(self) -> Polynomial:
        return (self.M2 + self.R2).expand()

    def verify(self) -> bool:
        monomial_only = all(len(b) == 1 for sos in (self.M1, self.M2) for _, b in sos.squares)
        return monomial_only and self.denominator() * self.f == self.numerator()


def _halve_all(p: Polynomial) -> Polynomial:
    if any(k % 2 for e in p.terms for k in e):
        raise PreconditionError("expected a polynomial in the squares of the variables")
    return Polynomial(p.nvars, {tuple(k // 2 for k in e): c for e, c in p.terms.items()})


def _square_all(p: Polynomial) -> Polynomial:
    return Polynomial(p.nvars, {tuple(2 * k for k in e): c for e, c in p.terms.items()})


def habicht_certificate(f: Polynomial, N_max: int = 200, max_n: int = HABICHT_MAX_N) -> HabichtCert:
    """Quotient-of-squares certificate for a form positive away from the origin.

    Positivity of ``f`` is the caller's claim; what is checked is the identity.
    """
    if f.is_zero() or not f.is_homogeneous():
        raise PreconditionError("Habicht's construction needs a nonzero homogeneous form")
    deg = f.degree()
    if deg % 2:
        raise PreconditionError("Habicht's construction needs even degree")
    nv = f.nvars
    if nv - 1 > max_n:
        raise ResourceCapError(f"{nv} variables exceed the Habicht cap n <= {max_n} (2^(n+1) sign flips)")
    d = deg // 2
    K = 2**nv
    flips = [f.sign_flip(tau) for tau in itertools.product((1, -1), repeat=nv)]
    s = elementary_symmetric_all(flips)
    exps = []
    s_u = []
    for i in range(1, K + 1):
        su = _halve_all(s[i])
        try:
            res = polya_exponent(su, N_max)
        except PolyaFailure as exc:
            raise PolyaFailure(exc.n_tried, exc.monomial, exc.witness, exc.value) from None
        exps.append(res.N)
        s_u.append(su)
    D = d + max(-(-N // i) for i, N in zip(range(1, K + 1), exps))
    sum_u = sum(Polynomial.gens(nv), Polynomial.zero(nv))
    sig = [None]
    for i, su in enumerate(s_u, start=1):
        sig.append(_square_all(sum_u ** ((D - d) * i) * su))
    rho_pad = _square_all(sum_u ** (D - d))
    ft = rho_pad * f
    M1 = SosPoly.from_monomial_squares(sig[K])
    M2 = SosPoly.from_monomial_squares(rho_pad * sig[K - 1])
    r1 = [(Fraction(1), ft ** (K // 2))]
    r2 = []
    for i in range(1, K // 2):
        h = ft ** ((K - 2 * i) // 2)
        r1 += [(w, b * h) for w, b in SosPoly.from_monomial_squares(sig[2 * i]).squares]
        r2 += [(w, b * h) for w, b in SosPoly.from_monomial_squares(rho_pad * sig[2 * i - 1]).squares]
    cert = HabichtCert(f, M1, M2, SosPoly(nv, tuple(r1)), SosPoly(nv, tuple(r2)), D, tuple(exps))
    if not cert.verify():
        raise CertificationFailure("internal error: Habicht identity failed to verify")
    return cert


# -- Handelman ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimplexSpec:
    """An n-simplex given by its n+1 facet polynomials (or built from vertices)."""

    lambdas: tuple

    def __post_init__(self):
        lam = tuple(self.lambdas)
        object.__setattr__(self, "lambdas", lam)
        if not lam:
            raise PreconditionError("empty simplex")
        n = lam[0].nvars
        if len(lam) != n + 1:
            raise PreconditionError(f"an {n}-simplex needs {n + 1} facet polynomials, got {len(lam)}")
        if any(p.nvars != n or p.degree() > 1 for p in lam):
            raise PreconditionError("facet polynomials must be affine in the same ring")

    @property
    def nvars(self):
        return len(self.lambdas) - 1

    @classmethod
    def standard(cls, n):
        xs = Polynomial.gens(n)
        lam0 = Polynomial.const(1, n) - sum(xs, Polynomial.zero(n))
        return cls((lam0, *xs))

    @classmethod
    def from_vertices(cls, vertices: Sequence[Sequence]):
        """Barycentric coordinate functions of the given vertices."""
        verts = [tuple(as_fraction(v) for v in vert) for vert in vertices]
        n = len(verts) - 1
        if any(len(v) != n for v in verts):
            raise PreconditionError("need n+1 vertices in R^n")
        # lambda_i(x) = c_i . x + b_i with lambda_i(v_j) = delta_ij
        A = [list(v) + [Fraction(1)] for v in verts]
        if linalg.det(A) == 0:
            raise PreconditionError("degenerate simplex: vertices are affinely dependent")
        lams = []
        for i in range(n + 1):
            rhs = [Fraction(int(i == j)) for j in range(n + 1)]
            sol = linalg.solve(A, rhs)
            terms = {(0,) * n: sol[n]}
            for k in range(n):
                e = [0] * n
                e[k] = 1
                terms[tuple(e)] = sol[k]
            lams.append(Polynomial(n, terms))
        return cls(tuple(lams))

    def _parts(self):
        n = self.nvars
        rows = []
        for p in self.lambdas:
            lin = []
            for k in range(n):
                e = [0] * n
                e[k] = 1
                lin.append(p.coeff(e))
            rows.append((lin, p.constant_term()))
        return rows

    def barycentric_weights(self):
        """Positive ``mu`` with ``sum mu_i lambda_i == 1``."""
        n = self.nvars
        rows = self._parts()
        A = [[rows[i][0][k] for i in range(n + 1)] for k in range(n)]
        A.append([rows[i][1] for i in range(n + 1)])
        try:
            mu = linalg.solve(A, [Fraction(0)] * n + [Fraction(1)])
        except PreconditionError:
            raise PreconditionError("degenerate simplex: facet polynomials are not affinely independent") from None
        if any(m <= 0 for m in mu):
            raise PreconditionError("facet polynomials do not bound a simplex on their positive side")
        return mu

    def vertices(self):
        n = self.nvars
        rows = self._parts()
        verts = []
        for i in range(n + 1):
            others = [rows[j] for j in range(n + 1) if j != i]
            A = [lin for lin, _ in others]
            b = [-c for _, c in others]
            verts.append(tuple(linalg.solve(A, b)) if n else ())
        return verts

    def contains(self, point) -> bool:
        return all(p.evaluate(point) >= 0 for p in self.lambdas)


@dataclass(frozen=True)
class HandelmanCert:
    """``f == sum_alpha a_alpha * lambda^alpha`` with every ``a_alpha > 0``."""

    coefficients: dict
    lambdas: tuple
    N: int = 0

    def expand(self) -> Polynomial:
        n = self.lambdas[0].nvars
        if not self.coefficients:
            return Polynomial.zero(n)
        # group by the last exponent: sum_k lam_last^k * (sum over the rest)
        powers = [[Polynomial.const(1, n)] for _ in self.lambdas]

        def pw(i, k):
            row = powers[i]
            while len(row) <= k:
                row.append(row[-1] * self.lambdas[i])
            return row[k]

        groups = {}
        for a, c in self.coefficients.items():
            groups.setdefault(a[-1], []).append((a[:-1], c))
        out = Polynomial.zero(n)
        last = len(self.lambdas) - 1
        for k, items in groups.items():
            inner = Polynomial.zero(n)
            for a, c in items:
                term = Polynomial.const(c, n)
                for i, e in enumerate(a):
                    if e:
                        term = term * pw(i, e)
                inner = inner + term
            out = out + inner * pw(last, k)
        return out

    def verify(self, f: Polynomial) -> bool:
        return all(c > 0 for c in self.coefficients.values()) and self.expand() == f

    def generator_set(self) -> GeneratorSet:
        return GeneratorSet(self.lambdas[0].nvars, self.lambdas)

    def to_preorder(self) -> PreorderCert:
        """The same identity read as a preorder certificate over the facets."""
        n = self.lambdas[0].nvars
        sig = {}
        for a, c in self.coefficients.items():
            red = tuple(k % 2 for k in a)
            base = Polynomial.const(1, n)
            for lam, k in zip(self.lambdas, a):
                if k // 2:
                    base = base * lam ** (k // 2)
            sig.setdefault(red, []).append((c, base))
        return PreorderCert(self.expand(), {a: SosPoly(n, tuple(sq)) for a, sq in sig.items()})


def handelman_simplex(f: Polynomial, simplex: SimplexSpec, N_max: int = 200) -> HandelmanCert:
    n = simplex.nvars
    if f.nvars != n:
        raise PreconditionError("polynomial and simplex live in different rings")
    mu = simplex.barycentric_weights()
    lams = simplex.lambdas
    if f.is_zero():
        return HandelmanCert({}, lams, 0)
    verts = simplex.vertices()
    # F(y_1..y_n) = f(v_0 + sum_i y_i (v_i - v_0)) on the standard simplex
    ys = Polynomial.gens(n)
    images = []
    for k in range(n):
        img = Polynomial.const(verts[0][k], n)
        for i in range(1, n + 1):
            img = img + ys[i - 1].scale(verts[i][k] - verts[0][k])
        images.append(img)
    F = f.substitute(images) if n else f
    # homogenize with x0 (not to even degree), then x0 -> y0 + y1 + ... + yn
    Fh = F.homogenize(even=False)
    Y = Polynomial.gens(n + 1)
    G = Fh.substitute([sum(Y, Polynomial.zero(n + 1))] + Y[1:])
    try:
        res = polya_exponent(G, N_max, strict=False)
    except PolyaFailure as exc:
        witness = None
        if exc.witness is not None:
            y = exc.witness
            tot = sum(y)
            witness = tuple(sum(y[i] / tot * verts[i][k] for i in range(n + 1)) for k in range(n))
        raise PolyaFailure(exc.n_tried, exc.monomial, witness, exc.value) from None
    coeffs = {}
    for a, c in res.product.terms.items():
        w = c
        for m, k in zip(mu, a):
            w *= m**k
        coeffs[a] = w
    cert = HandelmanCert(coeffs, lams, res.N)
    if not cert.verify(f):
        raise CertificationFailure("internal error: Handelman identity failed to verify")
    return cert
