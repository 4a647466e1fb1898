"""Tools for non-compact sets.

Natural generators on the line, tentacle multipliers and degree bounds in the
plane, elimination of squares on certificates, polynomial automorphisms, and the
unimodular / triple-intersection checks for logarithmic polyhedra.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy
from scipy.optimize import linprog

from . import certs, linalg
from .certs import GeneratorSet, ModuleCert, PreorderCert, SosPoly
from .errors import CertificationFailure, ParseError, PreconditionError
from .poly import Polynomial, as_fraction, parse_rational

# -- the line ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalUnion:
    """Closed pieces ``(a, b)``; ``None`` stands for an infinite end."""

    pieces: tuple

    def __post_init__(self):
        ps = []
        for a, b in self.pieces:
            a = None if a is None else as_fraction(a)
            b = None if b is None else as_fraction(b)
            if a is not None and b is not None and a > b:
                raise PreconditionError(f"empty piece [{a}, {b}]")
            ps.append((a, b))
        ps.sort(key=lambda p: (p[0] is not None, p[0] if p[0] is not None else 0))
        for (a1, b1), (a2, b2) in zip(ps, ps[1:]):
            if b1 is None or a2 is None or a2 <= b1:
                raise PreconditionError("pieces overlap or touch; merge them first")
        object.__setattr__(self, "pieces", tuple(ps))

    @classmethod
    def parse(cls, text: str) -> "IntervalUnion":
        """``[0,1]u[2,inf)``, ``(-inf,3]``, ``R``; open ends only at infinity."""
        t = text.replace(" ", "")
        if t in ("R", "(-inf,inf)"):
            return cls((((None, None)),))
        if not t:
            raise ParseError("empty interval list", 1, 1)
        pieces = []
        pos = 0
        pat = re.compile(r"([\[\(])([^,\]\)]+),([^\]\)]+)([\]\)])")
        while pos < len(t):
            m = pat.match(t, pos)
            if not m:
                raise ParseError(f"bad interval near {t[pos:pos + 12]!r}", 1, pos + 1)
            lb, a, b, rb = m.groups()
            lo = _endpoint(a, lb, pos, low=True)
            hi = _endpoint(b, rb, pos, low=False)
            pieces.append((lo, hi))
            pos = m.end()
            if pos < len(t):
                if t[pos] not in "uU∪":
                    raise ParseError(f"expected 'u' between intervals, got {t[pos]!r}", 1, pos + 1)
                pos += 1
        return cls(tuple(pieces))

    def __str__(self):
        if not self.pieces:
            return "{}"
        out = []
        for a, b in self.pieces:
            left = "(-inf" if a is None else f"[{a}"
            right = "inf)" if b is None else f"{b}]"
            out.append(f"{left},{right}")
        return "u".join(out)

    def contains(self, x) -> bool:
        x = as_fraction(x)
        return any((a is None or a <= x) and (b is None or x <= b) for a, b in self.pieces)

    def is_compact(self) -> bool:
        return bool(self.pieces) and self.pieces[0][0] is not None and self.pieces[-1][1] is not None


def _endpoint(text, bracket, pos, low):
    if text in ("inf", "+inf", "-inf", "∞", "-∞"):
        if low != text.startswith("-"):
            raise ParseError(f"infinite endpoint {text!r} on the wrong side", 1, pos + 1)
        if bracket not in "()":
            raise ParseError("infinite ends must be open", 1, pos + 1)
        return None
    if bracket in "()":
        raise ParseError("finite ends must be closed (the pieces are closed sets)", 1, pos + 1)
    try:
        return parse_rational(text)
    except ParseError as exc:
        raise ParseError(str(exc), 1, pos + 1) from None


def natural_generators(K: IntervalUnion) -> list:
    """Minimum ``x - a``, gaps ``(x - b)(x - a')``, maximum ``b - x``, in that order."""
    if not K.pieces:
        raise PreconditionError("empty interval union")
    x = Polynomial.var(0, 1)
    out = []
    first, last = K.pieces[0], K.pieces[-1]
    if first[0] is not None:
        out.append(x - first[0])
    for (_, b), (a, _) in zip(K.pieces, K.pieces[1:]):
        out.append((x - b) * (x - a))
    if last[1] is not None:
        out.append(Polynomial.const(last[1], 1) - x)
    return out


def _rational_roots(p: Polynomial):
    x = sympy.Symbol("x")
    expr = sum(sympy.Rational(c.numerator, c.denominator) * x ** e[0] for e, c in p.terms.items())
    roots = set()
    for r in sympy.Poly(expr, x).real_roots():
        if not r.is_Rational:
            raise PreconditionError(f"{p} has an irrational real root; endpoints must be rational")
        roots.add(Fraction(int(r.p), int(r.q)))
    return roots


def semialgebraic_set_1d(S: Sequence[Polynomial]) -> IntervalUnion:
    """``K_S`` on the line, computed exactly (rational roots only)."""
    for g in S:
        if g.nvars != 1:
            raise PreconditionError("expected univariate polynomials")
    crit = sorted(set().union(*(_rational_roots(g) for g in S if g.degree() > 0)) if S else set())

    def inside(t):
        return all(g.evaluate((t,)) >= 0 for g in S)

    if not crit:
        return IntervalUnion(((None, None),)) if inside(Fraction(0)) else IntervalUnion(())
    # cells: (-inf, c0), {c0}, (c0, c1), ..., {ck}, (ck, inf)
    cells = []
    cells.append(((None, crit[0]), inside(crit[0] - 1)))
    for i, c in enumerate(crit):
        cells.append(((c, c), inside(c)))
        nxt = crit[i + 1] if i + 1 < len(crit) else None
        probe = c + 1 if nxt is None else (c + nxt) / 2
        cells.append(((c, nxt), inside(probe)))
    pieces = []
    cur = None
    for (a, b), ok in cells:
        if ok:
            cur = (a, b) if cur is None else (cur[0], b)
        elif cur is not None:
            pieces.append(cur)
            cur = None
    if cur is not None:
        pieces.append(cur)
    return IntervalUnion(tuple(pieces))


@dataclass(frozen=True)
class PutinarVerdict:
    putinar: bool
    K: IntervalUnion
    natural: tuple
    missing: tuple
    note: str = ""

    def __bool__(self):
        return self.putinar


def _positive_multiple(p: Polynomial, q: Polynomial) -> bool:
    if p.is_zero() or q.is_zero() or p.degree() != q.degree():
        return False
    lead = next(iter(p.items()))
    c = q.coeff(lead[0]) / lead[1]
    return c > 0 and p.scale(c) == q


def is_putinar_1d(S: Sequence[Polynomial], K: IntervalUnion | None = None) -> PutinarVerdict:
    """Putinar-ness of ``S`` on the line for non-compact ``K_S``.

    ``K`` is always recomputed from ``S``; a supplied ``K`` that differs is noted
    in the verdict rather than used.
    """
    S = list(S)
    KS = semialgebraic_set_1d(S)
    note = ""
    if K is not None and K != KS:
        note = f"supplied K {K} differs from K_S = {KS}; using K_S"
    if not KS.pieces:
        raise PreconditionError("K_S is empty")
    if KS.is_compact():
        raise PreconditionError(f"K_S = {KS} is compact; the criterion covers non-compact sets only")
    nat = natural_generators(KS)
    missing = tuple(t for t in nat if not any(_positive_multiple(t, g) for g in S))
    return PutinarVerdict(not missing, KS, tuple(nat), missing, note)


# -- tentacles ----------------------------------------------------------------------------


@dataclass(frozen=True)
class TentacleSet:
    directions: tuple

    def __post_init__(self):
        dirs = tuple(tuple(int(v) for v in z) for z in self.directions)
        if not dirs:
            raise PreconditionError("no tentacle directions")
        n = len(dirs[0])
        if any(len(z) != n for z in dirs):
            raise PreconditionError("directions have different lengths")
        if any(not any(z) for z in dirs):
            raise PreconditionError("zero tentacle direction")
        object.__setattr__(self, "directions", dirs)

    @classmethod
    def parse(cls, text: str) -> "TentacleSet":
        """``(0,1);(1,-1)``"""
        dirs = []
        for k, chunk in enumerate(filter(None, (c.strip() for c in text.split(";")))):
            m = re.fullmatch(r"\(\s*(-?\d+(?:\s*,\s*-?\d+)*)\s*\)", chunk)
            if not m:
                raise ParseError(f"bad direction {chunk!r}", 1, k + 1)
            dirs.append(tuple(int(v) for v in m.group(1).split(",")))
        return cls(tuple(dirs))

    @property
    def nvars(self):
        return len(self.directions[0])


def _weighted(T: TentacleSet, r):
    return tuple(sum(ri * z[j] for ri, z in zip(r, T.directions)) for j in range(T.nvars))


def infeasibility_certificate(T: TentacleSet):
    """``y >= 0, y != 0`` with ``<z, y> <= 0`` for every direction, or None.

    Such a ``y`` rules out positive multipliers with a positive weighted sum.
    """
    Z = np.array(T.directions, dtype=float)
    n = T.nvars
    res = linprog(np.zeros(n), A_ub=Z, b_ub=np.zeros(len(Z)), A_eq=np.ones((1, n)), b_eq=[1.0],
                  bounds=[(0, None)] * n, method="highs")
    if not res.success:
        return None
    for den in (1, 2, 4, 8, 16, 64, 256, 1024):
        y = tuple(max(Fraction(0), Fraction(float(v)).limit_denominator(den)) for v in res.x)
        if any(y) and all(sum(a * b for a, b in zip(z, y)) <= 0 for z in T.directions):
            return y
    return None


def stability_multipliers(T: TentacleSet, bound: int = 20):
    """Lexicographically smallest ``r`` in ``[1..bound]^m`` with ``sum r_i z_i > 0``.

    Returns None when an exact infeasibility certificate exists; raises
    :class:`CertificationFailure` when the bound is exhausted without one.
    """
    m = len(T.directions)
    if bound ** m > 5_000_000:
        raise PreconditionError(f"enumeration of {bound}^{m} multipliers is too large")
    for r in itertools.product(range(1, bound + 1), repeat=m):
        if all(v > 0 for v in _weighted(T, r)):
            return r
    if infeasibility_certificate(T) is not None:
        return None
    raise CertificationFailure(f"inconclusive: no multipliers up to {bound} and no infeasibility certificate")


def stability_degree_bound(T: TentacleSet, r, d) -> Fraction:
    """Explicit bound ``d'`` for one or two tentacles in the plane."""
    if T.nvars != 2:
        raise PreconditionError("the closed-form bound is for n = 2")
    d = as_fraction(d)
    if d < 0:
        raise PreconditionError("d must be non-negative")
    dirs = T.directions
    if len(dirs) == 1:
        z1, z2 = dirs[0]
        lo, hi = min(z1, z2), max(z1, z2)
        if lo <= 0:
            raise PreconditionError("single tentacle needs both components positive")
        return d * Fraction(hi, lo)
    if len(dirs) != 2:
        raise PreconditionError("closed-form bound only for one or two tentacles")
    r = tuple(int(v) for v in r)
    if len(r) != 2 or any(v <= 0 for v in r):
        raise PreconditionError("need two positive multipliers")
    (a, ra), (b, rb) = (dirs[0], r[0]), (dirs[1], r[1])
    # role assignment: tentacle (1) has z_1 > 0, tentacle (2) has z_2 > 0
    if not (a[0] > 0 and b[1] > 0):
        if b[0] > 0 and a[1] > 0:
            (a, ra), (b, rb) = (b, rb), (a, ra)
        else:
            raise PreconditionError("no role assignment with z1 > 0 for one tentacle and z2 > 0 for the other")
    num = ra * a[0] + rb * b[1]
    den = min(ra * a[0] + rb * b[0], ra * a[1] + rb * b[1])
    if den <= 0:
        raise PreconditionError("weighted sum is not positive; multipliers are invalid")
    return d * Fraction(num, den)


# -- elimination of squares ----------------------------------------------------------------------


def desquared_set(S: GeneratorSet, var: int) -> GeneratorSet:
    """``{g_i(.., y, ..)} + {y}`` from generators ``g_i(.., y^2, ..)``."""
    gens = []
    for g in S.generators:
        if not g.is_even_in(var):
            raise PreconditionError(f"generator {g} is odd in the eliminated variable")
        gens.append(g.halve_in(var))
    gens.append(Polynomial.var(var, S.nvars))
    return GeneratorSet(S.nvars, tuple(gens), names=S.names)


def eliminate_squares(cert: ModuleCert, S: GeneratorSet, var: int) -> PreorderCert:
    """Certificate for ``f(x, y)`` over ``desquared_set(S, var)`` from one for ``f(x, y^2)`` over ``S``.

    Each square ``s = s_e(y^2) + y s_o(y^2)`` is averaged with its mirror image,
    giving ``s_e^2 + y^2 s_o^2``; then ``y^2`` becomes ``y``.
    """
    v = certs.verify_module(cert, S)
    if not v:
        raise PreconditionError(f"input certificate does not verify: {v.message}")
    if not cert.target.is_even_in(var):
        raise PreconditionError("target is odd in the eliminated variable")
    S2 = desquared_set(S, var)
    s = S.s
    sig = {}

    def put(alpha, w, b):
        if not b.is_zero():
            sig.setdefault(alpha, []).append((w, b))

    for i, sigma in enumerate(cert.sigmas):
        base = [0] * (s + 1)
        if i:
            base[i - 1] = 1
        with_y = list(base)
        with_y[s] = 1
        for w, b in sigma.squares:
            ev, od = b.even_odd_split(var)
            put(tuple(base), w, ev)
            put(tuple(with_y), w, od)
    out = PreorderCert(cert.target.halve_in(var), {a: SosPoly(S.nvars, tuple(sq)) for a, sq in sig.items()})
    v = certs.verify_preorder(out, S2)
    if not v:
        raise CertificationFailure(f"internal error: eliminated certificate failed: {v.message}")
    return out


# -- automorphisms ------------------------------------------------------------------------


@dataclass(frozen=True)
class Automorphism:
    """A polynomial automorphism given by the images of the variables under the
    point map and under its inverse."""

    kind: str
    forward: tuple
    inverse: tuple

    @classmethod
    def identity(cls, nvars):
        g = tuple(Polynomial.gens(nvars))
        return cls("identity", g, g)

    @classmethod
    def affine(cls, A, b=None):
        """``x -> A x + b`` with rational invertible ``A``."""
        A = [[as_fraction(v) for v in row] for row in A]
        n = len(A)
        b = [Fraction(0)] * n if b is None else [as_fraction(v) for v in b]
        if linalg.det(A) == 0:
            raise PreconditionError("affine map is singular")
        xs = Polynomial.gens(n)
        fwd = tuple(sum((x.scale(a) for x, a in zip(xs, row)), Polynomial.const(bi, n)) for row, bi in zip(A, b))
        # inverse: x -> A^{-1} (x - b)
        cols = [linalg.solve(A, [Fraction(int(i == j)) for i in range(n)]) for j in range(n)]
        Ainv = [[cols[j][i] for j in range(n)] for i in range(n)]
        shifted = [x - Polynomial.const(bi, n) for x, bi in zip(xs, b)]
        inv = tuple(sum((sx.scale(a) for sx, a in zip(shifted, row)), Polynomial.zero(n)) for row in Ainv)
        return cls("affine", fwd, inv)

    @classmethod
    def shear(cls, var: int, q: Polynomial):
        """``x_var -> x_var + q`` with ``q`` free of ``x_var``."""
        n = q.nvars
        if q.degree_in(var) > 0:
            raise PreconditionError("shear polynomial must not involve the sheared variable")
        xs = list(Polynomial.gens(n))
        fwd, inv = list(xs), list(xs)
        fwd[var] = xs[var] + q
        inv[var] = xs[var] - q
        return cls("shear", tuple(fwd), tuple(inv))

    def pull(self, p: Polynomial) -> Polynomial:
        """``p`` composed with the inverse map: how a set's describing polynomial moves."""
        return p.substitute(self.inverse)


def substitute_automorphism(cert, S: GeneratorSet, auto: Automorphism):
    """Move a certificate along an automorphism; returns ``(cert', S')``."""
    v = certs.verify(cert, S)
    if not v:
        raise PreconditionError(f"input certificate does not verify: {v.message}")
    S2 = S.with_generators([auto.pull(g) for g in S.generators])
    move = lambda sos: sos.map_bases(auto.pull)
    if isinstance(cert, ModuleCert):
        out = ModuleCert(auto.pull(cert.target), tuple(move(s) for s in cert.sigmas))
    else:
        out = PreorderCert(auto.pull(cert.target), {a: move(s) for a, s in cert.sigmas.items()})
    v = certs.verify(out, S2)
    if not v:
        raise CertificationFailure(f"internal error: transformed certificate failed: {v.message}")
    return out, S2


# -- logarithmic polyhedra ------------------------------------------------------------------


@dataclass(frozen=True)
class LogPolyhedron:
    """``X^(2 alpha_i) <= r_i`` in the plane."""

    alphas: tuple
    rs: tuple

    def __post_init__(self):
        al = tuple(tuple(int(v) for v in a) for a in self.alphas)
        rs = tuple(as_fraction(r) for r in self.rs)
        if len(al) != len(rs):
            raise PreconditionError("need one bound per exponent vector")
        if any(len(a) != 2 or min(a) < 0 for a in al):
            raise PreconditionError("exponents must be non-negative integer pairs")
        if any(r <= 0 for r in rs):
            raise PreconditionError("bounds must be positive")
        object.__setattr__(self, "alphas", al)
        object.__setattr__(self, "rs", rs)

    @classmethod
    def parse(cls, text: str) -> "LogPolyhedron":
        alphas, rs = [], []
        for ln, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.fullmatch(r"(\d+)\s+(\d+)\s*<=\s*(\S+)", line)
            if not m:
                raise ParseError("expected '<a1> <a2> <= <r>'", ln, 1)
            alphas.append((int(m.group(1)), int(m.group(2))))
            try:
                rs.append(parse_rational(m.group(3)))
            except ParseError as exc:
                raise ParseError(str(exc), ln, m.start(3) + 1) from None
        return cls(tuple(alphas), tuple(rs))


def _det(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _primitive(v):
    g = math.gcd(*v)
    return tuple(c // g for c in v)


@dataclass(frozen=True)
class UnimodularResult:
    unimodular: bool
    witness: tuple | None
    det: int | None

    def __bool__(self):
        return self.unimodular


def unimodular_cone_check(P: LogPolyhedron) -> UnimodularResult:
    """Extreme rays of the cone spanned by the exponents, as primitive vectors."""
    if not P.alphas:
        raise PreconditionError("need at least one exponent vector")
    if any(a == (0, 0) for a in P.alphas):
        raise PreconditionError("zero exponent vector")
    prims = sorted({_primitive(a) for a in P.alphas}, key=lambda v: (Fraction(v[1], v[0] + v[1]), v))
    # in the closed first quadrant the angle order is the order of y/(x+y)
    b1, b2 = prims[0], prims[-1]
    if b1 == b2:
        return UnimodularResult(True, (b1,), None)
    d = _det(b1, b2)
    return UnimodularResult(abs(d) == 1, (b1, b2), d)


def cone_coordinates(alpha, witness) -> tuple:
    """``(s, t)`` with ``alpha = s b1 + t b2`` (exact)."""
    b1, b2 = witness
    s, t = linalg.solve([[b1[0], b2[0]], [b1[1], b2[1]]], [alpha[0], alpha[1]])
    return s, t


@dataclass(frozen=True)
class TripleResult:
    ok: bool
    witnesses: tuple  # (i, j, k, kind, approximate point or None)

    def __bool__(self):
        return self.ok


def _log_point(alphas, rs):
    # (x^2, y^2) solving X^(2 a) = r for two independent rows, in floats
    A = np.array(alphas, dtype=float)
    u = np.linalg.solve(A, np.log([float(r) for r in rs]))
    return tuple(float(np.exp(v / 2)) for v in u)


def triple_intersection_check(P: LogPolyhedron) -> TripleResult:
    """Look for three curves ``X^(2 alpha) = r`` through one point of the open quadrant."""
    k = len(P.alphas)
    wit = []
    for i, j, l in itertools.combinations(range(k), 3):
        a = [P.alphas[t] for t in (i, j, l)]
        r = [P.rs[t] for t in (i, j, l)]
        if any(v == (0, 0) for v in a):
            continue
        c = (_det(a[1], a[2]), _det(a[2], a[0]), _det(a[0], a[1]))
        if any(c):
            prod = Fraction(1)
            for ci, ri in zip(c, r):
                prod *= ri**ci
            if prod == 1:
                idx = next((p, q) for p, q in ((0, 1), (0, 2), (1, 2)) if _det(a[p], a[q]))
                pt = _log_point([a[idx[0]], a[idx[1]]], [r[idx[0]], r[idx[1]]])
                wit.append((i, j, l, "point", pt))
        else:
            # all parallel: alpha_t = m_t * beta; common points iff r_t^(1/m_t) agree
            beta = _primitive(a[0])
            m = [max(v) // max(beta) for v in a]
            if all(r[p] ** m[q] == r[q] ** m[p] for p, q in ((0, 1), (0, 2))):
                wit.append((i, j, l, "coincident", None))
    return TripleResult(not wit, tuple(wit))
