"""Gram-matrix search for module certificates, rounded to exact rationals.

The semidefinite program runs in floating point (cvxpy).  Its output is only a
proposal: multipliers of the non-trivial generators are rounded and checked
positive semidefinite exactly, the pure square part is rounded and then
projected onto the affine space of Gram matrices that reproduce the residual
exactly, and every Gram matrix is split into weighted squares by an exact
``L D L^T`` factorization.  Nothing is accepted without that exact check.
"""
from __future__ import annotations

import logging
import warnings
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import certs
from .certs import GeneratorSet, ModuleCert, SosPoly
from .errors import CertificationFailure
from .poly import Polynomial, monomials_upto

log = logging.getLogger(__name__)

DENOMINATORS = (2**6, 2**10, 2**14, 2**20, 2**26)


def ldl_squares(Q, basis, nvars):
    """Weighted squares with ``sum w b^2 == basis^T Q basis``, or None if ``Q`` is not PSD."""
    n = len(Q)
    A = [list(row) for row in Q]
    out = []
    for k in range(n):
        d = A[k][k]
        if d < 0:
            return None
        if d == 0:
            if any(A[k][j] for j in range(k + 1, n)):
                return None
            continue
        col = [A[j][k] / d for j in range(k + 1, n)]
        for a, j in enumerate(range(k + 1, n)):
            if not col[a]:
                continue
            f = A[j][k]
            row = A[j]
            for b, l in enumerate(range(k + 1, n)):
                if col[b]:
                    row[l] -= f * col[b]
        terms = {basis[k]: Fraction(1)}
        for a, j in enumerate(range(k + 1, n)):
            if col[a]:
                terms[basis[j]] = col[a]
        out.append((d, Polynomial(nvars, terms)))
    return out


def _gram_poly(Q, basis, nvars):
    terms = {}
    for i, bi in enumerate(basis):
        for j, bj in enumerate(basis):
            if Q[i][j]:
                m = tuple(a + b for a, b in zip(bi, bj))
                terms[m] = terms.get(m, 0) + Q[i][j]
    return Polynomial(nvars, terms)


def _round(M, den):
    n = M.shape[0]
    R = [[Fraction(round(float(M[i, j]) * den), den) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            R[i][j] = R[j][i] = (R[i][j] + R[j][i]) / 2
    return R


def _project(Q, basis, residual: Polynomial):
    """Least-change update of ``Q`` so that ``basis^T Q basis == residual``."""
    cells = {}
    for i, bi in enumerate(basis):
        for j, bj in enumerate(basis):
            cells.setdefault(tuple(a + b for a, b in zip(bi, bj)), []).append((i, j))
    cur = _gram_poly(Q, basis, residual.nvars)
    diff = residual - cur
    Q = [list(row) for row in Q]
    for m, c in diff.terms.items():
        if m not in cells:
            return None
        share = c / len(cells[m])
        for i, j in cells[m]:
            Q[i][j] += share
    return Q


def _bases(f, gens, D):
    n = f.nvars
    out = [sorted(monomials_upto(n, D // 2))]
    for g in gens:
        k = (D - g.degree()) // 2
        out.append(sorted(monomials_upto(n, k)) if k >= 0 else [])
    return out


def _solve_sdp(f, gens, bases, D):
    import cvxpy as cp

    n = f.nvars
    polys = [Polynomial.const(1, n)] + list(gens)
    Qs = [cp.Variable((len(b), len(b)), symmetric=True) if b else None for b in bases]
    t = cp.Variable()
    expr = {}
    for Q, g, b in zip(Qs, polys, bases):
        if Q is None:
            continue
        for i, bi in enumerate(b):
            for j, bj in enumerate(b):
                for e, c in g.terms.items():
                    m = tuple(x + y + z for x, y, z in zip(bi, bj, e))
                    expr.setdefault(m, []).append((float(c), Q[i, j]))
    cons = []
    for m in set(expr) | set(f.terms):
        lhs = sum(c * v for c, v in expr.get(m, [])) if m in expr else 0
        cons.append(lhs == float(f.coeff(m)))
    for Q in Qs:
        if Q is not None:
            cons.append(Q - t * np.eye(Q.shape[0]) >> 0)
    cons.append(t <= 1)
    prob = cp.Problem(cp.Maximize(t), cons)
    for solver in ("CLARABEL", "SCS"):
        if solver not in cp.installed_solvers():
            continue
        try:
            with warnings.catch_warnings():
                # inaccurate solutions are fine: the exact check decides
                warnings.simplefilter("ignore", UserWarning)
                prob.solve(solver=solver)
        except cp.error.SolverError:
            continue
        if prob.status in ("optimal", "optimal_inaccurate") and t.value is not None:
            return [None if Q is None else np.asarray(Q.value) for Q in Qs], float(t.value)
    return None, None


def gram_certificate(f: Polynomial, gens: Sequence[Polynomial], degree=None, degree_cap=12,
                     denominators=DENOMINATORS) -> ModuleCert:
    """Module certificate of ``f`` over ``gens`` (σ_i of degree ≤ ``degree``)."""
    try:
        import cvxpy  # noqa: F401
    except ImportError:
        raise CertificationFailure("Gram search needs cvxpy, which is not installed") from None
    n = f.nvars
    S = GeneratorSet(n, tuple(gens))
    D = degree if degree is not None else max([f.degree()] + [g.degree() for g in gens])
    D += D % 2
    last = "no strictly feasible Gram matrices"
    while D <= degree_cap:
        bases = _bases(f, gens, D)
        mats, t = _solve_sdp(f, gens, bases, D)
        log.debug("gram: degree %d, margin %s", D, t)
        if mats is not None and t > 1e-9:
            for den in denominators:
                cert = _round_certificate(f, S, mats, bases, den)
                if cert is not None:
                    return cert
            last = f"rounding failed at degree {D} (margin {t:.3g})"
        D += 2
    raise CertificationFailure(f"inconclusive: Gram search up to degree {degree_cap}: {last}")


def _round_certificate(f, S, mats, bases, den):
    n = S.nvars
    sig = []
    residual = f
    for k in range(1, S.s + 1):
        M, b = mats[k], bases[k]
        if M is None:
            sig.append(SosPoly.zero(n))
            continue
        Q = _round(M, den)
        sq = ldl_squares(Q, b, n)
        if sq is None:
            return None
        sos = SosPoly(n, tuple(sq))
        sig.append(sos)
        residual = residual - sos.expand() * S.generators[k - 1]
    Q0 = _project(_round(mats[0], den), bases[0], residual)
    if Q0 is None:
        return None
    sq = ldl_squares(Q0, bases[0], n)
    if sq is None:
        return None
    cert = ModuleCert(f, (SosPoly(n, tuple(sq)), *sig))
    return cert if certs.verify_module(cert, S) else None
