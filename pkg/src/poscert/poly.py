"""Sparse multivariate polynomials with exact rational coefficients.

A :class:`Polynomial` is an immutable map from exponent tuples to nonzero
``Fraction`` coefficients.  Variables are addressed by index; names only appear
at the parse/format boundary.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError, PreconditionError

Monomial = tuple  # tuple[int, ...]
Grading = tuple  # tuple[int, ...], one weight per variable

_SCALARS = (int, Fraction)


def as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, bool):
        raise TypeError("bool is not a coefficient")
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return parse_rational(c)
    raise TypeError(f"expected an exact rational, got {type(c).__name__}")


def grlex_key(exps):
    """Sort key putting higher total degree first, then lexicographically larger."""
    return (-sum(exps), tuple(-e for e in exps))


class Polynomial:
    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping | None = None):
        if nvars < 0:
            raise ValueError("nvars must be non-negative")
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise ValueError(f"monomial {exps} does not have {nvars} exponents")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            c = as_fraction(c)
            if c:
                clean[exps] = clean.get(exps, 0) + c
                if not clean[exps]:
                    del clean[exps]
        self.nvars = nvars
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, nvars, terms):
        # trusted constructor: terms already canonical
        p = object.__new__(cls)
        p.nvars = nvars
        p._terms = terms
        p._hash = None
        return p

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, nvars):
        return cls._raw(nvars, {})

    @classmethod
    def const(cls, c, nvars):
        c = as_fraction(c)
        return cls._raw(nvars, {(0,) * nvars: c} if c else {})

    @classmethod
    def var(cls, i, nvars):
        if not 0 <= i < nvars:
            raise IndexError(f"variable index {i} out of range for {nvars} variables")
        e = [0] * nvars
        e[i] = 1
        return cls._raw(nvars, {tuple(e): Fraction(1)})

    @classmethod
    def monomial(cls, exps, coef=1):
        exps = tuple(exps)
        return cls(len(exps), {exps: coef})

    @classmethod
    def gens(cls, nvars):
        return [cls.var(i, nvars) for i in range(nvars)]

    # -- basic queries --------------------------------------------------------
    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        """Terms in canonical (graded lexicographic, descending) order."""
        return sorted(self._terms.items(), key=lambda t: grlex_key(t[0]))

    def coeff(self, exps) -> Fraction:
        return self._terms.get(tuple(exps), Fraction(0))

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def is_zero(self):
        return not self._terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def min_degree(self) -> int:
        if not self._terms:
            return -1
        return min(sum(e) for e in self._terms)

    def degree_in(self, var) -> int:
        if not self._terms:
            return -1
        return max(e[var] for e in self._terms)

    def is_constant(self):
        return all(sum(e) == 0 for e in self._terms)

    def constant_term(self) -> Fraction:
        return self._terms.get((0,) * self.nvars, Fraction(0))

    def is_homogeneous(self):
        return len({sum(e) for e in self._terms}) <= 1

    def leading_term(self):
        return self.items()[0]

    def content_lcm(self) -> int:
        """Least common multiple of coefficient denominators."""
        return math.lcm(*(c.denominator for c in self._terms.values())) if self._terms else 1

    # -- arithmetic -------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, _SCALARS) and not isinstance(other, bool):
            return Polynomial.const(other, self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for e, c in other._terms.items():
            v = out.get(e)
            if v is None:
                out[e] = c
            else:
                v += c
                if v:
                    out[e] = v
                else:
                    del out[e]
        return Polynomial._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def scale(self, c):
        c = as_fraction(c)
        if not c:
            return Polynomial.zero(self.nvars)
        return Polynomial._raw(self.nvars, {e: v * c for e, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, _SCALARS) and not isinstance(other, bool):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self._terms, other._terms
        if len(a) < len(b):
            a, b = b, a
        out = {}
        get = out.get
        for e2, c2 in b.items():
            for e1, c1 in a.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                out[e] = get(e, 0) + c1 * c2
        return Polynomial._raw(self.nvars, {e: c for e, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.const(1, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __truediv__(self, c):
        if isinstance(c, _SCALARS) and not isinstance(c, bool):
            return self.scale(1 / as_fraction(c))
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self._terms == other._terms
        if isinstance(other, _SCALARS) and not isinstance(other, bool):
            return self._terms == Polynomial.const(other, self.nvars)._terms
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    # -- evaluation -------------------------------------------------------------
    def evaluate(self, point: Sequence) -> Fraction:
        if len(point) != self.nvars:
            raise ValueError(f"point has {len(point)} coordinates, expected {self.nvars}")
        pt = [as_fraction(v) if not isinstance(v, Fraction) else v for v in point]
        total = Fraction(0)
        for e, c in self._terms.items():
            term = c
            for v, k in zip(pt, e):
                if k:
                    term *= v ** k
            total += term
        return total

    __call__ = evaluate

    def eval_float(self, points) -> np.ndarray:
        """Evaluate at each row of a float array of shape (m, nvars)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self._terms:
            return np.zeros(pts.shape[0])
        exps = np.array(list(self._terms.keys()), dtype=float)
        coefs = np.array([float(c) for c in self._terms.values()])
        vals = np.ones((pts.shape[0], len(coefs)))
        for j in range(self.nvars):
            col = exps[:, j]
            if col.any():
                vals *= pts[:, [j]] ** col[None, :]
        return vals @ coefs

    # -- structural operations ----------------------------------------------------
    def highest_degree_part(self):
        if not self._terms:
            raise PreconditionError("highest degree part of the zero polynomial")
        d = self.degree()
        return Polynomial._raw(self.nvars, {e: c for e, c in self._terms.items() if sum(e) == d})

    def homogeneous_part(self, d):
        return Polynomial._raw(self.nvars, {e: c for e, c in self._terms.items() if sum(e) == d})

    def homogenize(self, even=False, degree=None):
        """Homogenize with a new variable inserted at index 0.

        With ``even=True`` the target degree is rounded up to the next even number.
        """
        if not self._terms:
            raise PreconditionError("cannot homogenize the zero polynomial")
        d = self.degree() if degree is None else degree
        if d < self.degree():
            raise PreconditionError(f"target degree {d} below polynomial degree {self.degree()}")
        if even and d % 2:
            d += 1
        return Polynomial._raw(
            self.nvars + 1, {(d - sum(e),) + e: c for e, c in self._terms.items()}
        )

    def dehomogenize(self, var=0):
        if not 0 <= var < self.nvars:
            raise IndexError(f"bad variable index {var}")
        out = {}
        for e, c in self._terms.items():
            k = e[:var] + e[var + 1 :]
            out[k] = out.get(k, 0) + c
        return Polynomial(self.nvars - 1, out)

    def sign_flip(self, tau: Sequence[int]):
        if len(tau) != self.nvars:
            raise ValueError(f"sign vector has length {len(tau)}, expected {self.nvars}")
        if any(t not in (1, -1) for t in tau):
            raise ValueError("sign vector entries must be +1 or -1")
        out = {}
        for e, c in self._terms.items():
            neg = sum(k for t, k in zip(tau, e) if t < 0) % 2
            out[e] = -c if neg else c
        return Polynomial._raw(self.nvars, out)

    def substitute(self, images: Sequence["Polynomial"]):
        """Compose: replace variable i by ``images[i]`` (all images share one ring)."""
        if len(images) != self.nvars:
            raise ValueError(f"need {self.nvars} images, got {len(images)}")
        if self.nvars == 0:
            raise ValueError("use the constant term to substitute into a 0-variable polynomial")
        m = images[0].nvars
        if any(q.nvars != m for q in images):
            raise ValueError("substitution images live in different rings")
        cache = {}

        def pw(i, k):
            key = (i, k)
            if key not in cache:
                cache[key] = images[i] ** k
            return cache[key]

        out = Polynomial.zero(m)
        for e, c in self._terms.items():
            term = Polynomial.const(c, m)
            for i, k in enumerate(e):
                if k:
                    term = term * pw(i, k)
            out = out + term
        return out

    def embed(self, nvars, index_map: Sequence[int]):
        """Move variable i to index ``index_map[i]`` of a ring with ``nvars`` variables."""
        if len(index_map) != self.nvars:
            raise ValueError("index map length mismatch")
        out = {}
        for e, c in self._terms.items():
            ne = [0] * nvars
            for i, k in enumerate(e):
                ne[index_map[i]] += k
            out[tuple(ne)] = c
        return Polynomial._raw(nvars, out)

    def is_even_in(self, var):
        return all(e[var] % 2 == 0 for e in self._terms)

    def even_odd_split(self, var):
        """Split ``p = E(.., var^2, ..) + var * O(.., var^2, ..)``.

        Returns ``(E, O)`` where the ``var`` slot of each output stands for ``var^2``.
        """
        if not 0 <= var < self.nvars:
            raise IndexError(f"bad variable index {var}")
        even, odd = {}, {}
        for e, c in self._terms.items():
            k = e[var]
            target = even if k % 2 == 0 else odd
            ne = list(e)
            ne[var] = k // 2
            target[tuple(ne)] = c
        return Polynomial._raw(self.nvars, even), Polynomial._raw(self.nvars, odd)

    def square_slot(self, var):
        """Inverse of the slot convention: replace ``var`` by ``var^2``."""
        out = {}
        for e, c in self._terms.items():
            ne = list(e)
            ne[var] *= 2
            out[tuple(ne)] = c
        return Polynomial._raw(self.nvars, out)

    def halve_in(self, var):
        """Replace ``var^2`` by ``var``; requires every exponent of ``var`` to be even."""
        if not self.is_even_in(var):
            raise PreconditionError(f"polynomial is not even in variable {var}")
        return self.even_odd_split(var)[0]

    def weighted_degree(self, weights: Sequence[int]) -> int:
        if not self._terms:
            raise PreconditionError("weighted degree of the zero polynomial")
        if len(weights) != self.nvars:
            raise ValueError("grading length mismatch")
        return max(sum(w * k for w, k in zip(weights, e)) for e in self._terms)

    def map_coefficients(self, fn):
        return Polynomial(self.nvars, {e: fn(c) for e, c in self._terms.items()})

    # -- printing -----------------------------------------------------------------
    def to_str(self, names=None):
        return format_poly(self, names)

    def __str__(self):
        return format_poly(self)

    def __repr__(self):
        return f"Polynomial({self.nvars}, {format_poly(self)!r})"


def default_names(nvars):
    return [f"x{i}" for i in range(nvars)]


def _format_rational(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_poly(p: Polynomial, names=None) -> str:
    names = list(names) if names is not None else default_names(p.nvars)
    if len(names) != p.nvars:
        raise ValueError("wrong number of variable names")
    if not p._terms:
        return "0"
    parts = []
    for idx, (e, c) in enumerate(p.items()):
        factors = []
        for name, k in zip(names, e):
            if k == 1:
                factors.append(name)
            elif k > 1:
                factors.append(f"{name}^{k}")
        mag = abs(c)
        if factors:
            body = "*".join(factors)
            if mag != 1:
                body = f"{_format_rational(mag)}*{body}"
        else:
            body = _format_rational(mag)
        if idx == 0:
            parts.append(f"-{body}" if c < 0 else body)
        else:
            parts.append(f" - {body}" if c < 0 else f" + {body}")
    return "".join(parts)


# -- helpers on monomials -------------------------------------------------------


def monomials_of_degree(nvars, d):
    """All exponent tuples of total degree ``d``, in grlex-descending order."""
    if nvars == 0:
        return [()] if d == 0 else []
    out = []
    for first in range(d, -1, -1):
        for rest in monomials_of_degree(nvars - 1, d - first):
            out.append((first,) + rest)
    return out


def monomials_upto(nvars, d):
    out = []
    for k in range(d, -1, -1):
        out.extend(monomials_of_degree(nvars, k))
    return out


def elementary_symmetric(ps: Sequence[Polynomial], k: int) -> Polynomial:
    if not 1 <= k <= len(ps):
        raise PreconditionError(f"k={k} out of range 1..{len(ps)}")
    return elementary_symmetric_all(ps)[k]


def elementary_symmetric_all(ps: Sequence[Polynomial]) -> list:
    """``[e_0, e_1, ..., e_m]`` of the given polynomials (``e_0 = 1``)."""
    if not ps:
        raise PreconditionError("need at least one polynomial")
    n = ps[0].nvars
    e = [Polynomial.const(1, n)]
    for p in ps:
        nxt = e + [Polynomial.zero(n)]
        for j in range(len(e), 0, -1):
            nxt[j] = nxt[j] + p * e[j - 1]
        e = nxt
    return e


def sum_of_squares_of_vars(nvars, indices=None) -> Polynomial:
    idx = range(nvars) if indices is None else indices
    out = {}
    for i in idx:
        ex = [0] * nvars
        ex[i] = 2
        out[tuple(ex)] = Fraction(1)
    return Polynomial._raw(nvars, out)


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+)|(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


def parse_rational(text: str) -> Fraction:
    text = text.strip()
    m = re.fullmatch(r"([+-]?\d+)(?:/(\d+))?", text)
    if not m:
        raise ParseError(f"not an exact rational: {text!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) else 1
    if den == 0:
        raise ParseError("zero denominator")
    return Fraction(num, den)


def _tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        col = m.start() + (len(m.group(0)) - len(m.group(0).lstrip()))
        if m.group(1):
            raise ParseError(f"decimal literal {m.group(1)!r} not allowed; use a/b", column=col + 1)
        if m.group(2):
            toks.append(("num", int(m.group(2)), col))
        elif m.group(3):
            toks.append(("id", m.group(3), col))
        else:
            toks.append(("op", m.group(4), col))
        pos = m.end()
    toks.append(("end", None, len(text)))
    return toks


class _Parser:
    def __init__(self, text, names):
        self.toks = _tokenize(text)
        self.i = 0
        self.index = {n: k for k, n in enumerate(names)}
        self.nvars = len(names)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, op):
        t = self.take()
        if t[0] != "op" or t[1] != op:
            raise ParseError(f"expected {op!r}", column=t[2] + 1)
        return t

    def parse(self):
        p = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ParseError(f"unexpected token {t[1]!r}", column=t[2] + 1)
        return p

    def expr(self):
        t = self.peek()
        if t[0] == "end":
            raise ParseError("empty expression", column=t[2] + 1)
        p = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self):
        p = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            p = p * self.unary()
        return p

    def unary(self):
        t = self.peek()
        if t[0] == "op" and t[1] in "+-":
            self.take()
            p = self.unary()
            return -p if t[1] == "-" else p
        return self.power()

    def power(self):
        p = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            t = self.take()
            if t[0] != "num":
                raise ParseError("exponent must be a non-negative integer", column=t[2] + 1)
            p = p ** t[1]
        return p

    def atom(self):
        t = self.take()
        if t[0] == "num":
            val = Fraction(t[1])
            if self.peek()[0] == "op" and self.peek()[1] == "/":
                self.take()
                d = self.take()
                if d[0] != "num":
                    raise ParseError("division only allowed between integer literals", column=d[2] + 1)
                if d[1] == 0:
                    raise ParseError("zero denominator", column=d[2] + 1)
                val = Fraction(t[1], d[1])
            return Polynomial.const(val, self.nvars)
        if t[0] == "id":
            if t[1] not in self.index:
                raise ParseError(f"unknown variable {t[1]!r}", column=t[2] + 1)
            return Polynomial.var(self.index[t[1]], self.nvars)
        if t[0] == "op" and t[1] == "(":
            p = self.expr()
            self.expect(")")
            return p
        raise ParseError(f"unexpected token {t[1]!r}", column=t[2] + 1)


def parse_poly(text: str, names: Sequence[str]) -> Polynomial:
    """Parse ``3/2*x^2*y - y + 7`` style text over the given variable names."""
    return _Parser(text, list(names)).parse()


def find_variables(texts: Iterable[str]) -> list:
    """Identifiers in order of first appearance."""
    seen = []
    for text in texts:
        for kind, val, _ in _tokenize(text):
            if kind == "id" and val not in seen:
                seen.append(val)
    return seen


def poly(text: str, names: Sequence[str] | str) -> Polynomial:
    """Shorthand: ``poly("x^2 - y", "x y")``."""
    if isinstance(names, str):
        names = names.split()
    return parse_poly(text, names)
