"""Certificate data model, exact verification and derivation trees.

A module certificate writes ``f = sum_i sigma_i g_i`` (``g_0 = 1``), a preorder
certificate ``f = sum_alpha sigma_alpha g^alpha`` over ``alpha in {0,1}^s``.
Every sigma is a :class:`SosPoly`, a list of weighted squares.  Verification
expands both sides and compares them structurally; there is no tolerance.

:class:`CertExpr` trees record how a membership was derived (sums, multiplication
by squares, products, and the archimedean / descent identities).  ``flatten``
turns a tree into a flat certificate that can be verified independently.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Mapping, Sequence

from .errors import ModeError, PoscertError, PreconditionError
from .poly import Polynomial, as_fraction, grlex_key

MODULE = "module"
PREORDER = "preorder"


# -- sums of squares ------------------------------------------------------------


@dataclass(frozen=True)
class SosPoly:
    """``sum_i w_i * base_i^2`` with every weight strictly positive."""

    nvars: int
    squares: tuple = ()

    def __post_init__(self):
        clean = []
        for w, b in self.squares:
            w = as_fraction(w)
            if w <= 0:
                raise PreconditionError(f"square weight must be positive, got {w}")
            if not isinstance(b, Polynomial) or b.nvars != self.nvars:
                raise PreconditionError("square base has the wrong ring")
            if b:
                clean.append((w, b))
        object.__setattr__(self, "squares", tuple(clean))

    @classmethod
    def zero(cls, nvars):
        return cls(nvars, ())

    @classmethod
    def const(cls, c, nvars):
        c = as_fraction(c)
        if c < 0:
            raise PreconditionError("negative constant is not a sum of squares")
        return cls(nvars, ((c, Polynomial.const(1, nvars)),) if c else ())

    @classmethod
    def square(cls, base: Polynomial, weight=1):
        return cls(base.nvars, ((weight, base),))

    @classmethod
    def from_monomial_squares(cls, p: Polynomial):
        """Read a polynomial with only even exponents and positive coefficients
        as a weighted sum of monomial squares."""
        sq = []
        for e, c in p.items():
            if any(k % 2 for k in e) or c <= 0:
                raise PreconditionError("not a sum of monomial squares")
            sq.append((c, Polynomial.monomial(tuple(k // 2 for k in e))))
        return cls(p.nvars, tuple(sq))

    @cached_property
    def expansion(self) -> Polynomial:
        out = Polynomial.zero(self.nvars)
        for w, b in self.squares:
            out = out + (b * b).scale(w)
        return out

    def expand(self) -> Polynomial:
        return self.expansion

    def __bool__(self):
        return bool(self.squares)

    def __len__(self):
        return len(self.squares)

    def __add__(self, other: "SosPoly"):
        if other.nvars != self.nvars:
            raise ValueError("nvars mismatch")
        return SosPoly(self.nvars, self.squares + other.squares)

    def scale(self, c):
        c = as_fraction(c)
        if c < 0:
            raise PreconditionError("can only scale a sum of squares by a non-negative number")
        if c == 0:
            return SosPoly.zero(self.nvars)
        return SosPoly(self.nvars, tuple((w * c, b) for w, b in self.squares))

    def __mul__(self, other: "SosPoly"):
        if other.nvars != self.nvars:
            raise ValueError("nvars mismatch")
        return SosPoly(
            self.nvars,
            tuple((w1 * w2, b1 * b2) for w1, b1 in self.squares for w2, b2 in other.squares),
        )

    def times_square(self, q: Polynomial):
        return SosPoly(self.nvars, tuple((w, b * q) for w, b in self.squares))

    def map_bases(self, fn, nvars=None):
        return SosPoly(self.nvars if nvars is None else nvars, tuple((w, fn(b)) for w, b in self.squares))

    def degree(self):
        return max((2 * b.degree() for _, b in self.squares), default=-1)

    def canonical(self):
        """Monic bases (leading coefficient squared into the weight), equal bases
        merged, sorted by the base's term order."""
        merged = {}
        for w, b in self.squares:
            lc = b.leading_term()[1]
            mb = b.scale(1 / lc)
            merged[mb] = merged.get(mb, 0) + w * lc * lc
        key = lambda item: [(grlex_key(e), c) for e, c in item[0].items()]
        return SosPoly(self.nvars, tuple((w, b) for b, w in sorted(merged.items(), key=key)))


def _ones(k, s):
    e = [0] * s
    e[k] = 1
    return tuple(e)


# -- generator sets and flat certificates ---------------------------------------------


@dataclass(frozen=True)
class GeneratorSet:
    nvars: int
    generators: tuple = ()
    homogeneous: bool = False
    even_degrees: bool = False
    names: tuple | None = None

    def __post_init__(self):
        gens = tuple(self.generators)
        object.__setattr__(self, "generators", gens)
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))
            if len(self.names) != self.nvars:
                raise PreconditionError("variable names do not match nvars")
        for g in gens:
            if g.nvars != self.nvars:
                raise PreconditionError("generator lives in a different ring")
            if self.homogeneous and not g.is_homogeneous():
                raise PreconditionError(f"generator {g} is not homogeneous")
            if self.even_degrees and g.degree() % 2:
                raise PreconditionError(f"generator {g} has odd degree")

    @property
    def s(self):
        return len(self.generators)

    def __len__(self):
        return len(self.generators)

    def __getitem__(self, i):
        return self.generators[i]

    def product(self, alpha) -> Polynomial:
        out = Polynomial.const(1, self.nvars)
        for g, a in zip(self.generators, alpha):
            if a:
                out = out * g**a
        return out

    def contains(self, point) -> bool:
        return all(g.evaluate(point) >= 0 for g in self.generators)

    def with_generators(self, gens, **kw):
        args = dict(nvars=self.nvars, generators=tuple(gens), homogeneous=self.homogeneous,
                    even_degrees=self.even_degrees, names=self.names)
        args.update(kw)
        return GeneratorSet(**args)


@dataclass(frozen=True)
class ModuleCert:
    target: Polynomial
    sigmas: tuple  # SosPoly per index 0..s; index 0 pairs with g_0 = 1

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(self.sigmas))

    @property
    def s(self):
        return len(self.sigmas) - 1

    def summands(self, S: GeneratorSet):
        gens = (Polynomial.const(1, S.nvars),) + S.generators
        return [(i, sig, g) for i, (sig, g) in enumerate(zip(self.sigmas, gens))]

    def to_preorder(self) -> "PreorderCert":
        s = self.s
        sig = {(0,) * s: self.sigmas[0]}
        for i in range(1, s + 1):
            if self.sigmas[i]:
                sig[_ones(i - 1, s)] = self.sigmas[i]
        return PreorderCert(self.target, sig)

    def expansion(self, S):
        return _combine(self.sigmas[0].nvars, ((sig, g) for _, sig, g in self.summands(S)))


@dataclass(frozen=True)
class PreorderCert:
    target: Polynomial
    sigmas: Mapping  # alpha (0/1 tuple of length s) -> SosPoly

    def __post_init__(self):
        items = sorted(((tuple(a), sig) for a, sig in dict(self.sigmas).items()), key=lambda t: t[0])
        for a, _ in items:
            if any(v not in (0, 1) for v in a):
                raise PreconditionError(f"alpha {a} is not a 0/1 vector")
        object.__setattr__(self, "sigmas", dict(items))

    def sigma(self, alpha):
        return self.sigmas.get(tuple(alpha), SosPoly.zero(self.target.nvars))

    def summands(self, S: GeneratorSet):
        return [(a, sig, S.product(a)) for a, sig in self.sigmas.items()]

    def expansion(self, S):
        return _combine(self.target.nvars, ((sig, g) for _, sig, g in self.summands(S)))

    def __eq__(self, other):
        if not isinstance(other, PreorderCert):
            return NotImplemented
        return self.target == other.target and self.sigmas == other.sigmas

    def __hash__(self):
        return hash((self.target, tuple(self.sigmas.items())))


def _combine(nvars, pairs):
    out = Polynomial.zero(nvars)
    for sig, g in pairs:
        if sig:
            out = out + sig.expand() * g
    return out


@dataclass(frozen=True)
class Verdict:
    ok: bool
    kind: str = "ok"  # ok | identity | homogeneity
    message: str = ""
    monomial: tuple | None = None

    def __bool__(self):
        return self.ok


def _first_mismatch(lhs: Polynomial, rhs: Polynomial):
    diff = lhs - rhs
    if not diff:
        return None
    return diff.items()[0][0]


def _check(target, summands, S: GeneratorSet) -> Verdict:
    nvars = S.nvars
    if target.nvars != nvars:
        raise PreconditionError("certificate target lives in a different ring")
    if S.homogeneous:
        common = None
        for key, sig, g in summands:
            for w, b in sig.squares:
                if b.nvars != nvars:
                    raise PreconditionError("square base lives in a different ring")
                if not b.is_homogeneous():
                    return Verdict(False, "homogeneity", f"sigma {key}: base {b} is not homogeneous")
                d = 2 * b.degree() + g.degree()
                if common is None:
                    common = d
                elif d != common:
                    return Verdict(
                        False, "homogeneity",
                        f"sigma {key}: summand degree {d} differs from common degree {common}",
                    )
    total = Polynomial.zero(nvars)
    for _, sig, g in summands:
        if sig.nvars != nvars:
            raise PreconditionError("sum of squares lives in a different ring")
        if sig:
            total = total + sig.expand() * g
    m = _first_mismatch(total, target)
    if m is not None:
        return Verdict(
            False, "identity",
            f"coefficient of monomial {m}: expansion {total.coeff(m)} != target {target.coeff(m)}",
            m,
        )
    return Verdict(True)


def verify_module(cert: ModuleCert, S: GeneratorSet) -> Verdict:
    if len(cert.sigmas) != S.s + 1:
        raise PreconditionError(f"certificate has {len(cert.sigmas)} sigmas, expected {S.s + 1}")
    return _check(cert.target, cert.summands(S), S)


def verify_preorder(cert: PreorderCert, S: GeneratorSet) -> Verdict:
    for a in cert.sigmas:
        if len(a) != S.s:
            raise PreconditionError(f"alpha {a} does not have length {S.s}")
    return _check(cert.target, cert.summands(S), S)


def verify(cert, S: GeneratorSet) -> Verdict:
    if isinstance(cert, ModuleCert):
        return verify_module(cert, S)
    return verify_preorder(cert, S)


# -- derivation trees -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CertExpr:
    """A node of a derivation; ``poly`` is the polynomial it denotes."""

    kind: str
    poly: Polynomial
    s: int
    children: tuple = ()
    data: Any = None
    expansion: "CertExpr | None" = None  # rule nodes: the right-hand side they rewrite to

    def __repr__(self):
        return f"CertExpr({self.kind}, {self.poly})"


def gen(S: GeneratorSet, i: int) -> CertExpr:
    """Leaf for generator ``g_i`` (1-based, matching certificate indices)."""
    if not 1 <= i <= S.s:
        raise PreconditionError(f"generator index {i} out of range 1..{S.s}")
    return CertExpr("generator", S.generators[i - 1], S.s, data=i)


def sos_leaf(sos: SosPoly, s: int) -> CertExpr:
    return CertExpr("sos", sos.expand(), s, data=sos)


def const_leaf(c, nvars, s) -> CertExpr:
    return sos_leaf(SosPoly.const(c, nvars), s)


def cert_leaf(cert, S: GeneratorSet, index_map: Sequence[int] | None = None) -> CertExpr:
    """Leaf wrapping a supplied flat certificate.

    ``index_map[j]`` is the (0-based) position in ``S`` of the certificate's j-th
    generator; the default is the identity.  The certificate is not re-verified
    here, but the flattened result always is.
    """
    pre = cert.to_preorder() if isinstance(cert, ModuleCert) else cert
    k = len(next(iter(pre.sigmas))) if pre.sigmas else 0
    if index_map is None:
        if k != S.s:
            raise PreconditionError("certificate arity does not match generator set")
        index_map = list(range(S.s))
    if len(index_map) != k:
        raise PreconditionError("index map length does not match certificate arity")
    terms = {}
    for a, sig in pre.sigmas.items():
        e = [0] * S.s
        for j, v in enumerate(a):
            e[index_map[j]] += v
        if sig:
            terms[tuple(e)] = terms.get(tuple(e), SosPoly.zero(S.nvars)) + sig
    return CertExpr("cert", cert.target, S.s, data=terms)


def add(*exprs: CertExpr) -> CertExpr:
    exprs = [e for e in exprs if e is not None]
    if not exprs:
        raise PreconditionError("empty sum")
    s = exprs[0].s
    if any(e.s != s for e in exprs):
        raise PreconditionError("summands come from different generator sets")
    total = exprs[0].poly
    for e in exprs[1:]:
        total = total + e.poly
    return CertExpr("sum", total, s, tuple(exprs))


def times_sos(sos: SosPoly, e: CertExpr) -> CertExpr:
    """``sigma * e`` for a sum of squares ``sigma``."""
    return CertExpr("square_scale", sos.expand() * e.poly, e.s, (e,), data=sos)


def scale(c, e: CertExpr) -> CertExpr:
    c = as_fraction(c)
    if c < 0:
        raise PreconditionError("negative scale")
    return times_sos(SosPoly.const(c, e.poly.nvars), e)


def product_rule(a: CertExpr, b: CertExpr, S: GeneratorSet, mode: str = PREORDER) -> CertExpr:
    """Node for ``a * b``.

    The preorder is closed under products.  A quadratic module generally is not;
    the principal case ``s = 1`` is, because ``g^2 * SOS`` is again a sum of squares.
    """
    if a.s != S.s or b.s != S.s:
        raise PreconditionError("factor built over a different generator set")
    if mode == MODULE and S.s >= 2:
        raise ModeError(
            f"a quadratic module with {S.s} generators is not closed under products; "
            "use preorder mode or a principal module"
        )
    if mode not in (MODULE, PREORDER):
        raise ValueError(f"unknown mode {mode!r}")
    return CertExpr("product", a.poly * b.poly, S.s, (a, b), data=mode)


def power_expr(g_expr: CertExpr | None, g: Polynomial, j: int, s: int) -> CertExpr:
    """Membership of ``g^j``: a square for even ``j``, ``g^(j-1) * g`` for odd ``j``."""
    if j < 0:
        raise PreconditionError("negative power")
    half = SosPoly.square(g ** (j // 2))
    if j % 2 == 0:
        return sos_leaf(half, s)
    if g.is_constant() and g.constant_term() > 0:
        return sos_leaf(SosPoly.const(g.constant_term() ** j, g.nvars), s)
    if g_expr is None:
        raise PreconditionError("odd power of g needs a membership certificate for g")
    if g_expr.poly != g:
        raise PreconditionError("certificate for g does not denote g")
    return times_sos(half, g_expr)


def _rule(kind, lhs: Polynomial, rhs: CertExpr, data=None) -> CertExpr:
    if rhs.poly != lhs:
        raise PoscertError(f"{kind}: right-hand side does not expand to the left-hand side")
    return CertExpr(kind, lhs, rhs.s, (rhs,), data=data, expansion=rhs)


def _times_expr(left: CertExpr, right: CertExpr, S, mode):
    # multiply by a power of g; pure squares need no product rule
    if left.kind == "sos":
        return times_sos(left.data, right)
    if right.kind == "sos":
        return times_sos(right.data, left)
    return product_rule(left, right, S, mode)


def arch_monomial_rule(g: Polynomial, m: Polynomial, N, k: int, premise: CertExpr, sign: int = 1,
                       g_expr: CertExpr | None = None, S: GeneratorSet | None = None,
                       mode: str = PREORDER) -> CertExpr:
    """``g^(k+1) (g N + sign*m)`` from ``g^k (g^2 N - m^2)``.

    Uses ``g^{k+1}(gN +- m) = 1/2 (g^{k+2}(N-1) + g^k(g^2 N - m^2) + g^k (m +- g)^2)``.
    """
    N = as_fraction(N)
    if N < 1:
        raise PreconditionError("the archimedean monomial identity needs N >= 1")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if isinstance(m, tuple):
        m = Polynomial.monomial(m)
    s = premise.s
    expected = g**k * (g * g * N - m * m)
    if premise.poly != expected:
        raise PreconditionError("premise does not denote g^k (g^2 N - m^2)")
    half = Fraction(1, 2)
    parts = [scale(half, premise),
             times_sos(SosPoly.square(m + g.scale(sign), half), power_expr(g_expr, g, k, s))]
    if N != 1:
        parts.append(scale((N - 1) / 2, power_expr(g_expr, g, k + 2, s)))
    lhs = g ** (k + 1) * (g.scale(N) + m.scale(sign))
    return _rule("arch_monomial", lhs, add(*parts), data=dict(N=N, k=k, sign=sign))


def arch_square_rule(g: Polynomial, a: Polynomial, N, k: int, l: int, plus: CertExpr,
                     minus: CertExpr) -> CertExpr:
    """``g^{k+l}(g^{2l} N^2 - a^2)`` from memberships of ``g^{k+l} N +- g^k a``.

    ``g^{k+l}(g^{2l}N^2 - a^2) = 1/(2N) ((g^l N + a)^2 (g^{k+l}N - g^k a)
    + (g^l N - a)^2 (g^{k+l} N + g^k a))``.
    """
    N = as_fraction(N)
    if N <= 0:
        raise PreconditionError("N must be positive")
    gl = g**l
    gk = g**k
    if plus.poly != gk * gl.scale(N) + gk * a:
        raise PreconditionError("'plus' premise does not denote g^{k+l} N + g^k a")
    if minus.poly != gk * gl.scale(N) - gk * a:
        raise PreconditionError("'minus' premise does not denote g^{k+l} N - g^k a")
    w = 1 / (2 * N)
    rhs = add(times_sos(SosPoly.square(gl.scale(N) + a, w), minus),
              times_sos(SosPoly.square(gl.scale(N) - a, w), plus))
    lhs = gk * gl * (gl * gl * (N * N) - a * a)
    return _rule("arch_square", lhs, rhs, data=dict(N=N, k=k, l=l))


def arch_sum_rule(g: Polynomial, l: int, first: tuple, second: tuple) -> CertExpr:
    """Closure of the archimedean set under sums.

    ``first = (k1, N1, a1, expr1)`` with ``expr1`` denoting ``g^{k1}(g^l N1 + a1)``
    (likewise ``second``); the result denotes ``g^{k1+k2}(g^l (N1+N2) + a1 + a2)``.
    Only even exponents are multiplied in, so no membership of ``g`` is required
    when both ``k1`` and ``k2`` are even.
    """
    k1, N1, a1, e1 = first
    k2, N2, a2, e2 = second
    gl = g**l
    if e1.poly != g**k1 * (gl.scale(N1) + a1) or e2.poly != g**k2 * (gl.scale(N2) + a2):
        raise PreconditionError("premise shape mismatch")
    if k1 % 2 or k2 % 2:
        raise PreconditionError("odd exponents need an explicit product; use product_rule")
    rhs = add(times_sos(SosPoly.square(g ** (k2 // 2)), e1), times_sos(SosPoly.square(g ** (k1 // 2)), e2))
    lhs = g ** (k1 + k2) * (gl.scale(as_fraction(N1) + as_fraction(N2)) + a1 + a2)
    return _rule("arch_sum", lhs, rhs)


def descent_step(f: Polynomial, g: Polynomial, t: Polynomial, kappa, k0: int, ki: int, ri,
                 l: int, m: int, p_kappa: CertExpr, p_r: CertExpr, p_t: CertExpr,
                 t_expr: CertExpr, g_expr: CertExpr | None = None,
                 S: GeneratorSet | None = None, mode: str = PREORDER):
    """One step lowering ``r`` by ``1/kappa``.

    Premises: ``p_kappa`` denotes ``g^{k0+m} kappa - g^{k0} t``, ``p_r`` denotes
    ``g^{ki+l} ri + g^{ki} f``, ``p_t`` denotes ``f t - g^{l+m}`` and ``t_expr``
    denotes ``t``.  Returns ``(expr, r_next)`` where ``expr`` denotes
    ``g^{ki+k0+m}(g^l r_next + f)`` and ``r_next = ri - 1/kappa``.
    """
    kappa = as_fraction(kappa)
    ri = as_fraction(ri)
    if kappa <= 0:
        raise PreconditionError("kappa must be positive")
    if ri < 0:
        raise PreconditionError("descent needs r_i >= 0")
    s = p_r.s
    if p_kappa.poly != g ** (k0 + m) * kappa - g**k0 * t:
        raise PreconditionError("kappa premise shape mismatch")
    if p_r.poly != g ** (ki + l) * ri + g**ki * f:
        raise PreconditionError("r premise shape mismatch")
    if p_t.poly != f * t - g ** (l + m):
        raise PreconditionError("t premise shape mismatch")
    if t_expr.poly != t:
        raise PreconditionError("t membership does not denote t")
    if S is None:
        raise PreconditionError("descent_step needs the generator set")
    parts = [product_rule(p_kappa, p_r, S, mode),
             _times_expr(power_expr(g_expr, g, ki + k0, s), p_t, S, mode)]
    if ri:
        parts.append(scale(ri, _times_expr(power_expr(g_expr, g, ki + k0 + l, s), t_expr, S, mode)))
    rhs = scale(1 / kappa, add(*parts))
    r_next = ri - 1 / kappa
    lhs = g ** (ki + k0 + m) * (g**l * r_next + f)
    return _rule("descent", lhs, rhs, data=dict(kappa=kappa, r=ri, r_next=r_next)), r_next


def descent_loop(f, g, t, kappa, k0, m, l, k1, r1, p_kappa, p_r1, p_t, t_expr, S,
                 g_expr=None, mode=PREORDER, max_steps=10_000):
    """Iterate :func:`descent_step` until ``r < 0``, then drop the negative g-power.

    Returns ``(expr, N)`` with ``expr`` denoting ``g^N f``.
    """
    expr, k, r = p_r1, k1, as_fraction(r1)
    steps = 0
    while r >= 0:
        if steps >= max_steps:
            raise PreconditionError("descent did not terminate within max_steps")
        expr, r = descent_step(f, g, t, kappa, k0, k, r, l, m, p_kappa, expr, p_t, t_expr,
                               g_expr=g_expr, S=S, mode=mode)
        k = k + k0 + m
        steps += 1
    # g^k (g^l r + f) + (-r) g^{k+l} = g^k f
    lhs = g**k * f
    rhs = add(expr, scale(-r, power_expr(g_expr, g, k + l, expr.s)))
    return _rule("descent_finish", lhs, rhs, data=dict(steps=steps)), k


def compose(cert, exprs: Sequence[CertExpr], S: GeneratorSet, mode: str = MODULE) -> CertExpr:
    """Substitute derived memberships for the generators of a flat certificate.

    ``cert`` is over generators ``h_1..h_t``; ``exprs[j]`` denotes ``h_{j+1}`` as
    a member of the cone over ``S``.
    """
    pre = cert.to_preorder() if isinstance(cert, ModuleCert) else cert
    parts = []
    for a, sig in pre.sigmas.items():
        if not sig:
            continue
        factors = [exprs[j] for j, v in enumerate(a) if v]
        if not factors:
            parts.append(sos_leaf(sig, S.s))
            continue
        node = factors[0]
        for fct in factors[1:]:
            node = product_rule(node, fct, S, mode)
        parts.append(times_sos(sig, node))
    if not parts:
        parts.append(sos_leaf(SosPoly.zero(S.nvars), S.s))
    out = add(*parts)
    if out.poly != cert.target:
        raise PoscertError("composed certificate does not denote the target")
    return out


# -- flattening -------------------------------------------------------------------------


def _merge(acc, a, sq):
    acc.setdefault(a, []).extend(sq)


def _flat_terms(e: CertExpr, S: GeneratorSet, memo) -> dict:
    key = id(e)
    if key in memo:
        return memo[key]
    s = S.s
    if e.kind == "generator":
        out = {_ones(e.data - 1, s): [(Fraction(1), Polynomial.const(1, S.nvars))]}
    elif e.kind == "sos":
        out = {(0,) * s: list(e.data.squares)}
    elif e.kind == "cert":
        out = {a: list(sig.squares) for a, sig in e.data.items()}
    elif e.kind == "sum":
        out = {}
        for c in e.children:
            for a, sq in _flat_terms(c, S, memo).items():
                _merge(out, a, sq)
    elif e.kind == "square_scale":
        inner = _flat_terms(e.children[0], S, memo)
        out = {a: [(w1 * w2, b1 * b2) for w1, b1 in e.data.squares for w2, b2 in sq]
               for a, sq in inner.items()}
    elif e.kind == "product":
        left = _flat_terms(e.children[0], S, memo)
        right = _flat_terms(e.children[1], S, memo)
        out = {}
        for a, sa in left.items():
            for b, sb in right.items():
                c = tuple(x + y for x, y in zip(a, b))
                _merge(out, c, [(w1 * w2, b1 * b2) for w1, b1 in sa for w2, b2 in sb])
    elif e.expansion is not None:
        out = _flat_terms(e.expansion, S, memo)
    else:
        raise PoscertError(f"cannot flatten node kind {e.kind!r}")
    memo[key] = out
    return out


def _reduce(terms: dict, S: GeneratorSet) -> dict:
    """Fold ``g^2`` factors into the squares so every exponent is 0 or 1."""
    out = {}
    for a, sq in terms.items():
        half = tuple(v // 2 for v in a)
        red = tuple(v % 2 for v in a)
        if any(half):
            h = S.product(half)
            sq = [(w, b * h) for w, b in sq]
        _merge(out, red, sq)
    return out


def flatten(e: CertExpr, S: GeneratorSet, mode: str = MODULE, canonical: bool = True):
    """Expand a derivation into a flat :class:`ModuleCert` or :class:`PreorderCert`."""
    if e.s != S.s:
        raise PreconditionError("expression built over a different generator set")
    terms = _reduce(_flat_terms(e, S, {}), S)
    mk = (lambda sq: SosPoly(S.nvars, tuple(sq)).canonical()) if canonical else (
        lambda sq: SosPoly(S.nvars, tuple(sq)))
    if mode == PREORDER:
        return PreorderCert(e.poly, {a: mk(sq) for a, sq in terms.items()})
    if mode != MODULE:
        raise ValueError(f"unknown mode {mode!r}")
    sigmas = [[] for _ in range(S.s + 1)]
    for a, sq in terms.items():
        ones = [i for i, v in enumerate(a) if v]
        if len(ones) > 1:
            raise ModeError(f"derivation uses the generator product {a}, which is not in the quadratic module")
        sigmas[ones[0] + 1 if ones else 0].extend(sq)
    return ModuleCert(e.poly, tuple(mk(sq) for sq in sigmas))
