"""Constructive Putinar chain.

The pieces, from the bottom up:

* :func:`tangent_plane_cert`: a tangent half-space of the ball lies in the ball's
  quadratic module.
* :func:`ball_certificate`: tangent planes around the ball form a simplex; peel
  the ball constraint off ``f`` on that simplex, then certify the rest with
  Handelman.
* :func:`inductive_reduce`: one-square multiplier for a single generator so that
  ``f - r^2 g`` stays positive on the set cut out by the other generators.
* :func:`putinar_search`: peel every generator, finish on the ball, compose.
* :func:`negative_at_infinity` / :func:`reduce_to_ball`: derive ``N - |x|^2``
  when no generator is a ball.
* :func:`geometric_series_extend`, :func:`sos_denominator`,
  :func:`projective_putinar_search`.

Fits are done in floating point and only decide which candidate to try; every
candidate is checked with exact arithmetic at rational grid points and the final
certificate is verified by exact expansion.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import certs
from .certs import (MODULE, PREORDER, CertExpr, GeneratorSet, ModuleCert, PreorderCert, SosPoly,
                    add, cert_leaf, compose, flatten, gen, product_rule, scale, sos_leaf, times_sos)
from .errors import CertificationFailure, PreconditionError
from .poly import (Polynomial, as_fraction, grlex_key, monomials_of_degree, monomials_upto,
                   sum_of_squares_of_vars)
from .gram import gram_certificate
from .polya import HabichtCert, PolyaFailure, SimplexSpec, habicht_certificate, handelman_simplex

log = logging.getLogger(__name__)

DENOMINATORS = (1, 2, 4, 8, 16, 32, 64, 128, 256, 1024, 4096, 10**4)


@dataclass
class SearchConfig:
    grid_resolution: int = 12
    degree_cap: int = 8
    denominators: tuple = DENOMINATORS
    handelman_max_n: int = 20
    habicht_max_n: int = 3
    sphere_resolution: int = 16
    multi_square: bool = True
    grid_refinements: int = 1
    gram_fallback: bool = True
    gram_degree_cap: int = 12


@dataclass(frozen=True)
class BallSpec:
    N: Fraction

    def __post_init__(self):
        N = as_fraction(self.N)
        if N <= 0:
            raise PreconditionError("ball radius^2 must be positive")
        object.__setattr__(self, "N", N)

    def poly(self, nvars) -> Polynomial:
        return Polynomial.const(self.N, nvars) - sum_of_squares_of_vars(nvars)

    def generator_set(self, nvars, names=None) -> GeneratorSet:
        return GeneratorSet(nvars, (self.poly(nvars),), names=names)

    def radius_bound(self) -> Fraction:
        """A rational number ``>= sqrt(N)``."""
        r = _rational_sqrt(self.N)
        if r is not None:
            return r
        # (isqrt(m) + 1)^2 > m >= 256 N, so the result squared exceeds N
        return Fraction(math.isqrt(math.ceil(256 * self.N)) + 1, 16)


@dataclass
class Problem:
    S: GeneratorSet
    f: Polynomial
    mode: str = MODULE
    degree_cap: int = 8
    grid_resolution: int = 12
    ball: Fraction | None = None

    def __post_init__(self):
        if self.mode not in (MODULE, PREORDER):
            raise PreconditionError(f"unknown mode {self.mode!r}")
        if self.f.nvars != self.S.nvars:
            raise PreconditionError("target and generators live in different rings")
        if self.degree_cap < self.f.degree():
            raise PreconditionError(f"degree_cap {self.degree_cap} is below deg f = {self.f.degree()}")
        if self.grid_resolution < 2:
            raise PreconditionError("grid resolution must be at least 2")
        if self.ball is not None:
            self.ball = as_fraction(self.ball)

    def config(self, base: SearchConfig | None = None) -> SearchConfig:
        cfg = SearchConfig() if base is None else SearchConfig(**vars(base))
        cfg.grid_resolution = self.grid_resolution
        cfg.degree_cap = self.degree_cap
        return cfg


@dataclass
class TraceStep:
    constraint: str
    multiplier: SosPoly | None
    remainder: Polynomial
    margin: Fraction | None
    verified: bool = False


@dataclass
class SearchTrace:
    steps: list = field(default_factory=list)
    ball_N: Fraction | None = None
    ball_source: str = ""

    def summary(self):
        out = [f"ball: N={self.ball_N} ({self.ball_source})"]
        for st in self.steps:
            mult = "0" if not st.multiplier else f"{len(st.multiplier)} square(s), degree {st.multiplier.degree()}"
            out.append(f"{st.constraint}: multiplier {mult}, margin {st.margin}, verified={st.verified}")
        return out


def _rational_sqrt(q: Fraction):
    q = Fraction(q)
    if q < 0:
        return None
    a, b = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if a * a == q.numerator and b * b == q.denominator:
        return Fraction(a, b)
    return None


# -- grids ------------------------------------------------------------------------------


class Grid:
    """Rational sample points with exact and float views."""

    def __init__(self, points: Sequence[tuple]):
        self.points = [tuple(Fraction(c) for c in p) for p in points]
        self.nvars = len(self.points[0]) if self.points else 0
        self._ints = []
        for p in self.points:
            q = math.lcm(*(c.denominator for c in p)) if p else 1
            self._ints.append((tuple(c.numerator * (q // c.denominator) for c in p), q))
        self.floats = np.array([[float(c) for c in p] for p in self.points], dtype=float).reshape(
            len(self.points), self.nvars)

    def __len__(self):
        return len(self.points)

    def subset(self, mask) -> "Grid":
        return Grid([p for p, m in zip(self.points, mask) if m])

    def values(self, p: Polynomial) -> list:
        """Exact values of ``p`` at every point (integer evaluation, one division per point)."""
        L = p.content_lcm()
        terms = [(int(c * L), e, sum(e)) for e, c in p.terms.items()]
        deg = max((t[2] for t in terms), default=0)
        out = []
        for nums, q in self._ints:
            tot = 0
            for c, e, de in terms:
                v = c
                for a, k in zip(nums, e):
                    if k:
                        v *= a**k
                if de < deg:
                    v *= q ** (deg - de)
                tot += v
            out.append(Fraction(tot, L * q**deg))
        return out

    def signs_ok(self, p: Polynomial) -> list:
        return [v >= 0 for v in self.values(p)]


def box_grid(nvars, R, res) -> Grid:
    R = Fraction(R)
    coords = [R * (Fraction(2 * j, res) - 1) for j in range(res + 1)]
    return Grid(list(itertools.product(coords, repeat=nvars)))


def simplex_grid(vertices, res) -> Grid:
    n = len(vertices) - 1
    pts = []
    for comp in itertools.product(range(res + 1), repeat=n + 1):
        if sum(comp) != res:
            continue
        pts.append(tuple(sum(Fraction(k, res) * v[j] for k, v in zip(comp, vertices)) for j in range(n)))
    return Grid(pts)


def _stereo(t: Sequence[Fraction]) -> tuple:
    # inverse stereographic projection from the north pole; exact point on the unit sphere
    s = sum(c * c for c in t)
    den = s + 1
    return tuple(2 * c / den for c in t) + ((s - 1) / den,)


def sphere_points(nvars, res) -> list:
    """Rational points covering the unit sphere up to the antipodal map.

    The lower hemisphere (with its equator) is the image of ``[-1,1]^(n-1)``.
    """
    if nvars == 1:
        return [(Fraction(-1),)]
    coords = [Fraction(2 * j, res) - 1 for j in range(res + 1)]
    return [_stereo(t) for t in itertools.product(coords, repeat=nvars - 1)]


def rational_unit_vector(direction: Sequence[float], max_den: int = 8) -> tuple:
    """A rational unit vector close to ``direction`` (stereographic rounding)."""
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    n = len(w)
    if n == 1:
        return (Fraction(1 if w[0] > 0 else -1),)
    if w[-1] > 1 - 1e-12:
        return tuple([Fraction(0)] * (n - 1) + [Fraction(1)])
    t = [Fraction(float(c / (1 - w[-1]))).limit_denominator(max_den) for c in w[:-1]]
    return _stereo(t)


# -- fitting helpers ------------------------------------------------------------------------


def _features(X, monos):
    if not monos:
        return np.zeros((len(X), 0))
    E = np.array(monos, dtype=float)
    if X.shape[1] == 0:
        return np.ones((len(X), len(monos)))
    return np.prod(X[:, None, :] ** E[None, :, :], axis=2)


def _rationalize(coeffs, den):
    return [Fraction(float(c)).limit_denominator(den) for c in coeffs]


def _poly_from(monos, coeffs, nvars):
    return Polynomial(nvars, {m: c for m, c in zip(monos, coeffs) if c})


def _one_square_candidates(X, target, monos, nvars, denominators):
    """Least-squares fit of ``r`` to ``target``; yields rationalized polynomials."""
    A = _features(X, monos)
    coef, *_ = np.linalg.lstsq(A, target, rcond=None)
    seen = set()
    for den in denominators:
        r = _poly_from(monos, _rationalize(coef, den), nvars)
        if r.is_zero() or r in seen:
            continue
        seen.add(r)
        yield SosPoly.square(r)


def _multi_square_candidates(X, fv, gv, monos, nvars, denominators):
    """Monomial squares with the largest worst-case margin (an LP), rationalized."""
    if not monos:
        return
    A = _features(X, monos) ** 2 * gv[:, None]
    scale_ = max(1.0, float(np.max(np.abs(fv))))
    k = len(monos)
    # variables: c_1..c_k >= 0, t; maximize t subject to A c + t <= f
    res = linprog(np.r_[np.zeros(k), -1.0], A_ub=np.c_[A, np.ones(len(fv))], b_ub=fv,
                  bounds=[(0, 1e4 * scale_)] * k + [(None, scale_)], method="highs")
    if not res.success or res.x[-1] <= 0:
        return
    seen = set()
    for den in denominators:
        cs = [max(Fraction(0), c) for c in _rationalize(res.x[:k], den)]
        sq = tuple((c, Polynomial.monomial(m)) for m, c in zip(monos, cs) if c > 0)
        if not sq or sq in seen:
            continue
        seen.add(sq)
        yield SosPoly(nvars, sq)


def simplest_between(lo: Fraction, hi: Fraction | None) -> Fraction:
    """The rational with the smallest denominator (then numerator) in the open
    interval ``(lo, hi)``; ``hi=None`` means no upper end.  Needs ``lo >= 0``."""
    fl = lo.numerator // lo.denominator
    if hi is None or fl + 1 < hi:
        return Fraction(fl + 1)
    frac = lo - fl
    inner_hi = None if frac == 0 else 1 / frac
    return fl + 1 / simplest_between(1 / (hi - fl), inner_hi)


def _constant_multiplier(fv, gv):
    """Exact feasible interval for a constant multiplier on the grid; picks a
    simple rational from its middle half."""
    lo, hi = Fraction(0), None
    for a, b in zip(fv, gv):
        if b > 0:
            hi = a / b if hi is None else min(hi, a / b)
        elif b < 0:
            lo = max(lo, a / b)
        elif a <= 0:
            return None
    if hi is not None and hi <= lo:
        return None
    if hi is None:
        return simplest_between(lo + max(lo / 4, Fraction(1, 4)), None)
    w = (hi - lo) / 4
    return simplest_between(lo + w, hi - w)


# -- the inductive step ----------------------------------------------------------------------


@dataclass(frozen=True)
class ReduceResult:
    sigma: SosPoly
    remainder: Polynomial
    margin: Fraction
    degree: int


def _peel(f: Polynomial, g: Polynomial, grid: Grid, degree_cap: int, cfg: SearchConfig,
          homogeneous=False, label="g") -> tuple:
    """Core of the inductive step on a fixed grid.

    Returns ``(sigma, pad, margin)``: ``rho^pad f - sigma g`` is positive on the
    grid (``pad`` is always 0 in the affine case).
    """
    if not len(grid):
        raise CertificationFailure(f"no grid points left for peeling {label}")
    n = f.nvars
    fv = grid.values(f)
    bad = [p for p, v in zip(grid.points, fv) if v <= 0]
    gv = grid.values(g)
    if not bad:
        return SosPoly.zero(n), 0, min(fv)
    for p, a, b in zip(grid.points, fv, gv):
        if a <= 0 and b >= 0:
            exc = CertificationFailure(
                f"target is {a} at {tuple(map(str, p))}, a point of the set; it is not positive there")
            exc.refuted = True
            raise exc
    neg = [a / b for a, b in zip(fv, gv) if b < 0]
    M = max(neg) + 1 if neg else Fraction(1)
    if M <= 0:
        M = Fraction(1)
    sig = np.array([float(min(M, a / (2 * b))) if b > 0 else float(M) for a, b in zip(fv, gv)])
    target = np.sqrt(np.maximum(sig, 0.0))
    X = grid.floats
    fa = np.array([float(v) for v in fv])
    ga = np.array([float(v) for v in gv])
    dg = g.degree()
    df = f.degree()
    tried = 0

    def check(sigma):
        sv = grid.values(sigma.expand())
        return min(a - s * b for a, s, b in zip(fv, sv, gv))

    for k in range(0, max(degree_cap, 0) + 1):
        if homogeneous:
            # b homogeneous of degree k; pad f by rho^pad to match 2k + deg g
            if (2 * k + dg - df) % 2 or 2 * k + dg < df:
                continue
            pad = (2 * k + dg - df) // 2
            monos = monomials_of_degree(n, k)
        else:
            if 2 * k + dg > max(degree_cap, dg):
                break
            pad = 0
            monos = monomials_upto(n, k)
        cands = []
        if k == 0:
            c = _constant_multiplier(fv, gv)
            if c is not None:
                cands.append([SosPoly.const(c, n)])
        cands.append(_one_square_candidates(X, target, monos, n, cfg.denominators))
        if cfg.multi_square:
            cands.append(_multi_square_candidates(X, fa, ga, monos, n, cfg.denominators))
        for it in cands:
            for sigma in it:
                tried += 1
                margin = check(sigma)
                if margin > 0:
                    log.debug("peeled %s with degree %d after %d candidates", label, k, tried)
                    return sigma, pad, margin
        if homogeneous and 2 * k + dg > degree_cap:
            break
    raise CertificationFailure(
        f"no multiplier for {label} with positive margin on the grid (degree cap {degree_cap}, {tried} candidates)")


def inductive_reduce(f: Polynomial, S: GeneratorSet, peel: int, grid_resolution: int = 12,
                     degree_cap: int = 8, bound=None, grid: Grid | None = None,
                     cfg: SearchConfig | None = None) -> ReduceResult:
    """Find ``sigma = r^2`` with ``f - sigma g_peel > 0`` on the grid of ``K`` without ``g_peel``.

    ``peel`` is 1-based.  Points come from ``grid`` if given, otherwise from a box
    ``[-bound, bound]^n`` filtered by the remaining generators.
    """
    cfg = cfg or SearchConfig()
    if not 1 <= peel <= S.s:
        raise PreconditionError(f"peel index {peel} out of range")
    g = S.generators[peel - 1]
    if grid is None:
        if bound is None:
            raise PreconditionError("no bounding box known for the remaining set")
        grid = box_grid(S.nvars, bound, grid_resolution)
    for j, h in enumerate(S.generators, start=1):
        if j != peel:
            grid = grid.subset(grid.signs_ok(h))
    sigma, _, margin = _peel(f, g, grid, degree_cap, cfg, label=f"g{peel}")
    rem = f - sigma.expand() * g
    return ReduceResult(sigma, rem, margin, sigma.degree())


# -- ball base case -------------------------------------------------------------------------


def tangent_plane_cert(u: Sequence, N=1, R=None) -> ModuleCert:
    """Certificate of the tangent half-space ``c - <u, x>`` in ``M_{N - |x|^2}``.

    ``c = (R^2 + N) / (2R)``; with ``R = sqrt(N)`` (the default when it is
    rational) this is the tangent plane itself.
    """
    u = tuple(as_fraction(c) for c in u)
    if sum(c * c for c in u) != 1:
        raise PreconditionError(f"{tuple(map(str, u))} is not a rational unit vector")
    N = as_fraction(N)
    n = len(u)
    if R is None:
        R = BallSpec(N).radius_bound()
    R = as_fraction(R)
    xs = Polynomial.gens(n)
    c = (R * R + N) / (2 * R)
    target = Polynomial.const(c, n) - sum((x.scale(ui) for x, ui in zip(xs, u)), Polynomial.zero(n))
    w = 1 / (2 * R)
    sig0 = SosPoly(n, tuple((w, x - Polynomial.const(R * ui, n)) for x, ui in zip(xs, u)))
    return ModuleCert(target, (sig0, SosPoly.const(w, n)))


def tangent_simplex(nvars, N=1, max_den=4):
    """Tangent half-spaces of the ball bounding a simplex; returns (SimplexSpec, certs)."""
    if nvars < 1:
        raise PreconditionError("need at least one variable")
    dirs = []
    for i in range(nvars):
        e = [Fraction(0)] * nvars
        e[i] = Fraction(-1)
        dirs.append(tuple(e))
    diag = rational_unit_vector([1.0] * nvars, max_den)
    if any(c <= 0 for c in diag):
        raise PreconditionError("no rational simplex found for this dimension")
    dirs.insert(0, diag)
    cs = [tangent_plane_cert(u, N) for u in dirs]
    return SimplexSpec(tuple(c.target for c in cs)), cs


def ball_certificate(f: Polynomial, ball, cfg: SearchConfig | None = None) -> ModuleCert:
    """Module certificate for ``f`` over the single generator ``N - |x|^2``."""
    cfg = cfg or SearchConfig()
    ball = ball if isinstance(ball, BallSpec) else BallSpec(ball)
    n = f.nvars
    B = ball.generator_set(n)
    if f.is_constant():
        c = f.constant_term()
        if c <= 0:
            raise CertificationFailure("constant target is not positive")
        return ModuleCert(f, (SosPoly.const(c, n), SosPoly.zero(n)))
    if f.degree() == 2:
        # f = a + c (N - |x|^2) needs no simplex
        c = -f.coeff((2,) + (0,) * (n - 1))
        rest = f - ball.poly(n).scale(c)
        if c > 0 and rest.is_constant() and rest.constant_term() > 0:
            return ModuleCert(f, (SosPoly.const(rest.constant_term(), n), SosPoly.const(c, n)))
    simplex, tcerts = tangent_simplex(n, ball.N)
    verts = simplex.vertices()
    lam_set = GeneratorSet(n, simplex.lambdas + (ball.poly(n),))
    res = cfg.grid_resolution
    last = None
    for _ in range(cfg.grid_refinements + 1):
        grid = simplex_grid(verts, res)
        try:
            red = inductive_reduce(f, lam_set, len(lam_set.generators), grid=grid,
                                   degree_cap=cfg.degree_cap, cfg=cfg)
            hand = handelman_simplex(red.remainder, simplex, N_max=cfg.handelman_max_n)
            break
        except PolyaFailure as exc:
            last = exc
            res *= 2
    else:
        if not cfg.gram_fallback:
            raise CertificationFailure(f"ball base case failed: {last}")
        log.info("Handelman base case inconclusive (%s); trying the Gram search", last)
        cert = gram_certificate(f, [ball.poly(n)], degree_cap=max(cfg.gram_degree_cap, f.degree()))
        return ModuleCert(f, cert.sigmas)
    # lambda^beta for beta in {0,1}^{n+1} lies in the principal module of the ball
    lam_exprs = [cert_leaf(c, B) for c in tcerts]
    pre = hand.to_preorder()
    parts = [times_sos(red.sigma, gen(B, 1))] if red.sigma else []
    for beta, sig in pre.sigmas.items():
        idx = [i for i, v in enumerate(beta) if v]
        if not idx:
            parts.append(sos_leaf(sig, 1))
            continue
        node = lam_exprs[idx[0]]
        for i in idx[1:]:
            node = product_rule(node, lam_exprs[i], B, MODULE)
        parts.append(times_sos(sig, node))
    cert = flatten(add(*parts), B, MODULE)
    if not certs.verify_module(cert, B):
        raise CertificationFailure("internal error: ball certificate failed verification")
    return cert


# -- the ball from negativity at infinity ----------------------------------------------------------------


def _is_ball_generator(g: Polynomial):
    """``c > 0`` and ``N`` with ``g == c (N - |x|^2)``, else None."""
    n = g.nvars
    if g.degree() != 2:
        return None
    top = g.highest_degree_part()
    c = -top.coeff((2,) + (0,) * (n - 1)) if n else 0
    if c <= 0 or top != -sum_of_squares_of_vars(n).scale(c):
        return None
    if any(sum(e) == 1 for e in g.terms):
        return None
    N = g.constant_term() / c
    if N <= 0:
        return None
    return c, N


def negative_at_infinity(S: GeneratorSet, grid_resolution: int = 16, degree_cap: int = 8,
                         cfg: SearchConfig | None = None) -> CertExpr:
    """A module element of even degree whose top part is negative on sample directions."""
    cfg = cfg or SearchConfig()
    n = S.nvars
    even = [i for i, g in enumerate(S.generators, start=1) if g.degree() > 0 and g.degree() % 2 == 0]
    if not even:
        raise CertificationFailure("no generator of positive even degree")
    grid = Grid(sphere_points(n, grid_resolution))
    tops = {i: grid.values(S.generators[i - 1].highest_degree_part()) for i in even}
    for j, p in enumerate(grid.points):
        if all(tops[i][j] >= 0 for i in even):
            raise CertificationFailure(
                f"coverage fails: no generator has negative top part in direction {tuple(map(str, p))}")
    rho = sum_of_squares_of_vars(n)

    def build(sigmas):
        return add(*[times_sos(s, gen(S, i)) for i, s in sigmas.items() if s])

    for i in even:
        if all(v < 0 for v in tops[i]):
            return build({i: SosPoly.const(1, n)})
    D = max(S.generators[i - 1].degree() for i in even)
    pad = {i: SosPoly.from_monomial_squares(rho ** ((D - S.generators[i - 1].degree()) // 2)) for i in even}
    if all(sum(tops[i][j] for i in even) < 0 for j in range(len(grid))):
        return build(pad)
    a = {i: np.array([max(0.0, -float(v)) for v in tops[i]]) for i in even}
    X = grid.floats
    for D in range(D, max(degree_cap, D) + 1, 2):
        cands = {}
        for i in even:
            e = (D - S.generators[i - 1].degree()) // 2
            monos = monomials_of_degree(n, e)
            cands[i] = (X, np.sqrt(a[i]), monos)
        for den in cfg.denominators:
            sig = {}
            for i, (X_, tgt, monos) in cands.items():
                A = _features(X_, monos)
                coef, *_ = np.linalg.lstsq(A, tgt, rcond=None)
                b = _poly_from(monos, _rationalize(coef, den), n)
                sig[i] = SosPoly.square(b) if not b.is_zero() else SosPoly.zero(n)
            vals = [Fraction(0)] * len(grid)
            for i, s in sig.items():
                if s:
                    sv = grid.values(s.expand())
                    vals = [v + a_ * t for v, a_, t in zip(vals, sv, tops[i])]
            if all(v < 0 for v in vals):
                return build(sig)
    raise CertificationFailure("no combination with negative top part found on the sphere grid")


def _v2(k):
    return (k & -k).bit_length() - 1


class _NoSlack(Exception):
    pass


def _trivial_witness(neg: Polynomial):
    try:
        M1 = SosPoly.from_monomial_squares(neg)
    except PreconditionError:
        return None
    n = neg.nvars
    return HabichtCert(neg, M1, SosPoly.const(1, n), SosPoly.zero(n), SosPoly.zero(n), neg.degree() // 2)


def reduce_to_ball(p_expr: CertExpr, witness: HabichtCert | None = None,
                   habicht_max_n: int = 3) -> CertExpr:
    """Turn a module element ``p`` that is negative at infinity into ``N - |x|^2``.

    ``witness`` is a Habicht identity for ``-p^g``; when omitted a monomial one
    is used if ``-p^g`` is a sum of monomial squares, otherwise one is computed.
    """
    p = p_expr.poly
    n = p.nvars
    if p.is_zero() or p.degree() % 2 or p.degree() == 0:
        raise PreconditionError("p must have positive even degree")
    neg = -p.highest_degree_part()
    deg = neg.degree()
    for i in range(n):
        e = [0] * n
        e[i] = deg
        if neg.coeff(e) <= 0:
            raise PreconditionError(
                f"top part of p is not negative away from the origin (fails at the unit vector e_{i + 1})")
    for pt in sphere_points(n, 4):
        if neg.evaluate(pt) <= 0:
            raise PreconditionError(
                f"top part of p is not negative away from the origin (fails at {tuple(map(str, pt))})")
    if witness is not None:
        if witness.f != neg or not witness.verify():
            raise PreconditionError("Habicht witness is invalid for -p^g")
        return _reduce_with(p_expr, witness)
    triv = _trivial_witness(neg)
    if triv is not None:
        try:
            return _reduce_with(p_expr, triv)
        except _NoSlack:
            pass
    return _reduce_with(p_expr, habicht_certificate(neg, max_n=habicht_max_n))


def _reduce_with(p_expr: CertExpr, w: HabichtCert) -> CertExpr:
    n = p_expr.poly.nvars
    s = p_expr.s
    den = w.M2 + w.R2
    E = p_expr if den.expand() == 1 else times_sos(den, p_expr)
    if w.R1:
        E = add(E, sos_leaf(w.R1, s))
    P = E.poly
    degP = P.degree()
    d = max(1, (degP - 1).bit_length())
    top = 2**d
    k = (top - degP) // 2
    rho = sum_of_squares_of_vars(n)
    if k:
        E = times_sos(SosPoly.from_monomial_squares(rho**k), E)
    T = dict(E.poly.terms)
    added = []

    def add_square(wt, base):
        added.append((wt, base))
        for e, c in (base * base).terms.items():
            v = T.get(e, 0) + wt * c
            if v:
                T[e] = v
            else:
                T.pop(e, None)

    for i in range(d):
        todo = sorted((e for e in T if 0 < sum(e) < top and _v2(sum(e)) == i), key=grlex_key, reverse=True)
        for e in todo:
            c = T.get(e)
            if not c:
                continue
            dm = sum(e)
            k1 = (dm - 2**i) // 2
            best = None
            for e1 in _sub_exponents(e, k1):
                e2 = tuple(a - b for a, b in zip(e, e1))
                if 2 * sum(e2) == top:
                    slack = -T.get(tuple(2 * v for v in e2), 0)
                    if slack <= 0:
                        continue
                else:
                    slack = None
                key = (slack is not None, -(slack or 0))
                if best is None or key < best[0]:
                    best = (key, e1, e2, slack)
            if best is None:
                raise _NoSlack()
            _, e1, e2, slack = best
            m1, m2 = Polynomial.monomial(e1), Polynomial.monomial(e2)
            if slack is None:
                wt, t = abs(c) / 2, Fraction(-1 if c > 0 else 1)
            else:
                wt = c * c / (2 * slack)
                t = -c / (2 * wt)
            add_square(wt, m1 + m2.scale(t))
    for e in T:
        if 0 < sum(e) < top:
            raise CertificationFailure("internal error: elimination left a lower-degree monomial")
    for e, c in list(T.items()):
        if sum(e) == top and (c >= 0 or any(v % 2 for v in e)):
            raise CertificationFailure("internal error: top part lost its negative square shape")
    pure = {}
    for e, c in list(T.items()):
        if sum(e) != top:
            continue
        nz = [j for j, v in enumerate(e) if v]
        if len(nz) > 1:
            add_square(-c, Polynomial.monomial(tuple(v // 2 for v in e)))
        else:
            pure[nz[0]] = -c
    if len(pure) != n:
        raise _NoSlack()
    cmin = min(pure.values())
    for j, c in pure.items():
        if c > cmin:
            e = [0] * n
            e[j] = top // 2
            add_square(c - cmin, Polynomial.monomial(e))
    N0 = T.get((0,) * n, Fraction(0))
    if N0 <= 0:
        raise CertificationFailure("reduction produced a non-positive constant; the set is empty")
    if added:
        E = add(E, sos_leaf(SosPoly(n, tuple(added)), s))
    if cmin != 1:
        E = scale(1 / cmin, E)
    desc = []
    xs = Polynomial.gens(n)
    for j in range(d - 1, 0, -1):
        for x in xs:
            desc.append((Fraction(1), x ** (2**j) - Polynomial.const(Fraction(1, 2), n)))
    if desc:
        E = add(E, sos_leaf(SosPoly(n, tuple(desc)), s))
    if _is_ball_generator(E.poly) is None or E.poly.highest_degree_part() != -sum_of_squares_of_vars(n):
        raise CertificationFailure("internal error: reduction did not reach N - |x|^2")
    return E


def _sub_exponents(e, k):
    """All ``e1 <= e`` (componentwise) with ``|e1| == k``, in a fixed order."""
    ranges = [range(v, -1, -1) for v in e]
    for e1 in itertools.product(*ranges):
        if sum(e1) == k:
            yield e1


def _is_sphere_generator(g: Polynomial):
    """``c > 0`` and ``a > 0`` with ``g == -c (a - |x|^2)^2``, else None."""
    n = g.nvars
    if g.degree() != 4:
        return None
    c = -g.coeff((4,) + (0,) * (n - 1))
    if c <= 0:
        return None
    a = g.constant_term() / -c
    if a <= 0:
        return None
    if g != ((Polynomial.const(a, n) - sum_of_squares_of_vars(n)) ** 2).scale(-c):
        return None
    return c, a


def ball_radius(expr: CertExpr) -> Fraction:
    info = _is_ball_generator(expr.poly)
    if info is None:
        raise PreconditionError("expression does not denote N - |x|^2")
    return info[1] * info[0]


def find_ball(S: GeneratorSet, cfg: SearchConfig | None = None, hint=None):
    """``(N, expr, source)`` with ``expr`` denoting ``N - |x|^2`` over ``S``."""
    cfg = cfg or SearchConfig()
    n = S.nvars
    for i, g in enumerate(S.generators, start=1):
        info = _is_ball_generator(g)
        if info is not None:
            c, N = info
            expr = gen(S, i) if c == 1 else scale(1 / c, gen(S, i))
            return N, expr, f"generator {i}"
    for i, g in enumerate(S.generators, start=1):
        info = _is_sphere_generator(g)
        if info is not None:
            # (|x|^2 - a - 1/2)^2 - (a - |x|^2)^2 == a + 1/4 - |x|^2
            c, a = info
            sq = SosPoly.square(sum_of_squares_of_vars(n) - Polynomial.const(a + Fraction(1, 2), n))
            expr = add(sos_leaf(sq, S.s), scale(1 / c, gen(S, i)))
            return a + Fraction(1, 4), expr, f"squared sphere generator {i}"
    p_expr = negative_at_infinity(S, cfg.sphere_resolution, cfg.degree_cap, cfg)
    expr = reduce_to_ball(p_expr, habicht_max_n=cfg.habicht_max_n)
    N = expr.poly.constant_term()
    src = "derived via negativity at infinity"
    if hint is not None and as_fraction(hint) > N:
        expr = add(expr, sos_leaf(SosPoly.const(as_fraction(hint) - N, n), S.s))
        N = as_fraction(hint)
        src += ", relaxed to the requested N"
    return N, expr, src


# -- the search ----------------------------------------------------------------------------


def putinar_search(problem: Problem, cfg: SearchConfig | None = None):
    """``(SearchTrace, certificate)`` for ``problem.f`` over ``problem.S``.

    The certificate is a :class:`ModuleCert` (a :class:`PreorderCert` in preorder
    mode) and has passed exact verification.  Failure says nothing about
    membership.
    """
    cfg = problem.config(cfg)
    S, f = problem.S, problem.f
    n = S.nvars
    trace = SearchTrace()
    N, ball_expr, src = find_ball(S, cfg, problem.ball)
    trace.ball_N, trace.ball_source = N, src
    ball_idx = None
    if src.startswith("generator"):
        ball_idx = int(src.split()[1])
    bsp = BallSpec(N)
    R = bsp.radius_bound()
    grid = box_grid(n, R, cfg.grid_resolution)
    grid = grid.subset(grid.signs_ok(bsp.poly(n)))
    order = sorted((i for i in range(1, S.s + 1) if i != ball_idx),
                   key=lambda i: (S.generators[i - 1].degree(), i))
    parts = []
    cur = f
    for pos, i in enumerate(order):
        rest = order[pos + 1:]
        sub = grid
        for j in rest:
            sub = sub.subset(sub.signs_ok(S.generators[j - 1]))
        g = S.generators[i - 1]
        sigma, _, margin = _peel(cur, g, sub, cfg.degree_cap, cfg, label=f"g{i}")
        cur = cur - sigma.expand() * g
        trace.steps.append(TraceStep(f"g{i}", sigma, cur, margin))
        if sigma:
            parts.append(times_sos(sigma, gen(S, i)))
    bcert = ball_certificate(cur, bsp, cfg)
    trace.steps.append(TraceStep("ball", bcert.sigmas[1], cur, None, True))
    parts.append(compose(bcert, [ball_expr], S, MODULE))
    expr = add(*parts)
    cert = flatten(expr, S, MODULE)
    if problem.mode == PREORDER:
        cert = cert.to_preorder()
    verdict = certs.verify(cert, S)
    for st in trace.steps:
        st.verified = bool(verdict)
    if not verdict:
        raise CertificationFailure(f"internal error: composed certificate failed verification: {verdict.message}")
    return trace, cert


# -- preorder extension and denominators ----------------------------------------------------------------


def geometric_series_extend(p_cert: PreorderCert, q_cert: PreorderCert, S: GeneratorSet, N,
                            l: int | None = None) -> CertExpr:
    """``N p - 1 - y - ... - y^(l+1)`` in ``T_S`` with ``y = |x|^2 / N``.

    Needs ``p (N - |x|^2) == 1 + q`` exactly; ``l`` defaults to ``ceil(deg p / 2)``.
    """
    N = as_fraction(N)
    n = S.nvars
    for name, c in (("p", p_cert), ("q", q_cert)):
        v = certs.verify(c, S)
        if not v:
            raise PreconditionError(f"certificate for {name} does not verify: {v.message}")
    p, q = p_cert.target, q_cert.target
    rho = sum_of_squares_of_vars(n)
    if p * (Polynomial.const(N, n) - rho) != q + 1:
        raise PreconditionError("identity p (N - |x|^2) = 1 + q does not hold")
    if l is None:
        l = -(-p.degree() // 2)
    if l < 0:
        raise PreconditionError("l must be non-negative")
    if 2 * (l + 1) <= p.degree():
        log.warning("l=%d is too small for a negative top part (deg p = %d)", l, p.degree())
    q_leaf = cert_leaf(q_cert, S)
    p_leaf = cert_leaf(p_cert, S)
    rho_sos = SosPoly.from_monomial_squares(rho)
    y_sos = rho_sos.scale(1 / N)
    E = add(q_leaf, times_sos(rho_sos, p_leaf))  # N p - 1
    for _ in range(l + 1):
        E = add(q_leaf, times_sos(y_sos, E))
    y = rho.scale(1 / N)
    expected = p.scale(N) - 1 - sum((y**j for j in range(1, l + 2)), Polynomial.zero(n))
    if E.poly != expected:
        raise CertificationFailure("internal error: geometric series expression mismatch")
    return E


def sphere_generator(nvars) -> Polynomial:
    """``-(1 - |x|^2)^2``, non-negative exactly on the unit sphere."""
    return -((Polynomial.const(1, nvars) - sum_of_squares_of_vars(nvars)) ** 2)


def sos_denominator(f: Polynomial, cert: ModuleCert):
    """``(N, sigma)`` with ``|x|^2N f == sigma`` from a sphere certificate of ``f``."""
    n = f.nvars
    if f.is_zero() or not f.is_homogeneous() or f.degree() % 2:
        raise PreconditionError("f must be a nonzero homogeneous form of even degree")
    g = sphere_generator(n)
    S = GeneratorSet(n, (g,))
    v = certs.verify_module(cert, S)
    if not v or cert.target != f:
        raise PreconditionError("supplied sphere certificate does not verify for f")
    e = f.degree() // 2
    s0, s1 = cert.sigmas
    E = max(e, s0.degree() // 2, s1.degree() // 2 + 2 if s1 else 0)
    rho = sum_of_squares_of_vars(n)
    images = [rho] + list(Polynomial.gens(n))
    out = []
    odd = Polynomial.zero(n + 1)

    def split(base, degree):
        h = base.homogenize(degree=degree)
        ev, od = h.even_odd_split(0)
        return ev, od

    for wt, b in s0.squares:
        ev, od = split(b, E)
        odd = odd + (ev * od).scale(2 * wt)
        out.append((wt, ev.substitute(images)))
        oz = od.substitute(images)
        out.extend((wt, x * oz) for x in Polynomial.gens(n))
    for wt, c in s1.squares:
        ev, od = split(c, E - 2)
        odd = odd - ((ev * od).scale(2 * wt) * _sphere_slot(n))
    if not odd.is_zero():
        raise CertificationFailure("parity extraction left a nonzero odd part; certificate malformed")
    sos = SosPoly(n, tuple((w, b) for w, b in out if not b.is_zero())).canonical()
    Nexp = E - e
    if sos.expand() != rho**Nexp * f:
        raise CertificationFailure("internal error: denominator identity failed")
    return Nexp, sos


def _sphere_slot(n):
    # (z^2 - rho)^2 with slot 0 standing for z^2
    zz = Polynomial.var(0, n + 1)
    rho = sum_of_squares_of_vars(n + 1, range(1, n + 1))
    return (zz - rho) ** 2


def sphere_certificate(f: Polynomial, cfg: SearchConfig | None = None) -> ModuleCert:
    """Certificate of ``f`` over ``{-(1 - |x|^2)^2}`` via the affine search."""
    n = f.nvars
    S = GeneratorSet(n, (sphere_generator(n),))
    cfg = cfg or SearchConfig()
    prob = Problem(S, f, MODULE, max(cfg.degree_cap, f.degree()), cfg.grid_resolution)
    return putinar_search(prob, cfg)[1]


def projective_putinar_search(problem: Problem, cfg: SearchConfig | None = None):
    """``(N, ModuleCert)`` with ``|x|^(2N) f`` in the homogeneous module of ``S``."""
    cfg = problem.config(cfg)
    S, f = problem.S, problem.f
    n = S.nvars
    if f.is_zero() or not f.is_homogeneous() or f.degree() % 2:
        raise PreconditionError("projective search needs a homogeneous target of even degree")
    for g in S.generators:
        if not g.is_homogeneous() or g.degree() % 2:
            raise PreconditionError(f"generator {g} is not homogeneous of even degree")
    Sh = S.with_generators(S.generators, homogeneous=True)
    rho = sum_of_squares_of_vars(n)
    grid = Grid(sphere_points(n, cfg.sphere_resolution))
    order = sorted(range(1, S.s + 1), key=lambda i: (S.generators[i - 1].degree(), i))
    parts = {}  # generator index -> SosPoly (0 is the pure square part)
    pad = 0
    cur = f

    def pad_all(k):
        if not k:
            return
        r = SosPoly.from_monomial_squares(rho**k)
        for key in parts:
            parts[key] = parts[key] * r

    trace = SearchTrace()
    for pos, i in enumerate(order):
        sub = grid
        for j in order[pos + 1:]:
            sub = sub.subset(sub.signs_ok(S.generators[j - 1]))
        g = S.generators[i - 1]
        sigma, k, margin = _peel(cur, g, sub, cfg.degree_cap, cfg, homogeneous=True, label=f"g{i}")
        if not sigma:
            continue
        pad_all(k)
        pad += k
        cur = rho**k * cur - sigma.expand() * g
        parts[i] = parts.get(i, SosPoly.zero(n)) + sigma
        trace.steps.append(TraceStep(f"g{i}", sigma, cur, margin))
    if cur.is_zero():
        sos = SosPoly.zero(n)
        Nd = 0
    elif all(c > 0 and not any(k % 2 for k in e) for e, c in cur.terms.items()):
        sos = SosPoly.from_monomial_squares(cur)
        Nd = 0
    else:
        Nd, sos = sos_denominator(cur, sphere_certificate(cur, cfg))
    pad_all(Nd)
    pad += Nd
    sig = [sos] + [parts.get(i, SosPoly.zero(n)) for i in range(1, S.s + 1)]
    target = rho**pad * f
    cert = ModuleCert(target, tuple(s.canonical() for s in sig))
    v = certs.verify_module(cert, Sh)
    if not v:
        raise CertificationFailure(f"internal error: projective certificate failed verification: {v.message}")
    return pad, cert
