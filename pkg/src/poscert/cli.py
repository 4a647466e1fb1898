"""``poscert`` command line.

Exit codes: 0 found/verified, 1 failed/inconclusive/error, 2 parse error,
3 resource cap.  ``--json`` prints the run report as one JSON document.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from . import certs, noncompact, polya, putinar
from .certs import GeneratorSet, ModuleCert
from .errors import CertificationFailure, ParseError, PoscertError, ResourceCapError
from .formats import parse_cert, parse_polyfile, parse_problem, serialize_cert, write_atomic
from .poly import format_poly, parse_poly

EXIT = {"verified": 0, "found": 0, "failed": 1, "inconclusive": 1, "error": 1}


@dataclass
class RunReport:
    verb: str
    verdict: str = "error"
    certificate: list = field(default_factory=list)
    seconds: float = 0.0
    trace: list = field(default_factory=list)
    reason: str = ""
    result: dict = field(default_factory=dict)
    exit_code: int = 1


def _q(c):
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _read(path):
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _max_degree():
    v = os.environ.get("POSCERT_MAX_DEGREE")
    if not v:
        return None
    if not v.isdigit():
        raise ParseError(f"POSCERT_MAX_DEGREE must be a non-negative integer, got {v!r}")
    return int(v)


def _emit(rep, path, cert, S):
    """Write only after an in-process exact verification."""
    v = certs.verify(cert, S)
    if not v:
        raise CertificationFailure(f"refusing to write an unverified certificate: {v.message}")
    if path:
        write_atomic(path, serialize_cert(cert, S))
        rep.certificate.append(path)


def _cap_polya(n_max, f):
    cap = _max_degree()
    if cap is None:
        return n_max
    room = cap - f.degree()
    if room < 0:
        raise ResourceCapError(f"degree {f.degree()} exceeds POSCERT_MAX_DEGREE={cap}")
    return min(n_max, room)


def _polya_call(fn, n_max, f, *args, **kw):
    """Run ``fn`` with the capped exponent; a stall caused by the cap is a resource cap."""
    capped = _cap_polya(n_max, f)
    try:
        return fn(*args, N_max=capped, **kw)
    except polya.PolyaFailure as exc:
        if capped < n_max and not exc.refuted:
            raise ResourceCapError(f"POSCERT_MAX_DEGREE stopped the search: {exc}") from None
        raise


# -- verbs ----------------------------------------------------------------------------------


def cmd_verify(a, rep):
    cf = parse_cert(_read(a.certfile))
    v = certs.verify(cf.cert, cf.S)
    rep.result = {"mode": cf.mode, "generators": cf.S.s}
    if v:
        rep.verdict = "verified"
    else:
        rep.verdict = "failed"
        rep.reason = v.message


def cmd_polya(a, rep):
    f, names = parse_polyfile(_read(a.polyfile))
    res = _polya_call(polya.polya_exponent, a.max_n, f, f, strict=not a.nonstrict)
    rep.verdict = "found"
    rep.result = {"N": res.N, "product": format_poly(res.product, names)}


def cmd_habicht(a, rep):
    f, names = parse_polyfile(_read(a.polyfile))
    h = _polya_call(polya.habicht_certificate, a.max_n, f, f)
    if not h.verify():
        raise CertificationFailure("Habicht identity did not verify")
    n = f.nvars
    S = GeneratorSet(n, (), names=tuple(names))
    num = ModuleCert(h.numerator(), ((h.M1 + h.R1),))
    den = ModuleCert(h.denominator(), ((h.M2 + h.R2),))
    prefix = a.prefix
    _emit(rep, prefix and prefix + ".num.cert", num, S)
    _emit(rep, prefix and prefix + ".den.cert", den, S)
    rep.verdict = "found"
    rep.result = {"D": h.D, "polya_exponents": list(h.polya_exponents),
                  "identity": "denominator * f == numerator",
                  "denominator_degree": h.denominator().degree()}


def cmd_handelman(a, rep):
    prob = parse_problem(_read(a.problemfile))
    simplex = polya.SimplexSpec(prob.S.generators)
    h = _polya_call(polya.handelman_simplex, a.max_n, prob.f, prob.f, simplex)
    names = prob.S.names
    rep.result = {"N": h.N, "coefficients": {"".join(map(str, k)) if len(k) < 10 else str(k): _q(v)
                                             for k, v in sorted(h.coefficients.items())}}
    _emit(rep, a.emit, h.to_preorder(), GeneratorSet(prob.S.nvars, h.lambdas, names=names))
    rep.verdict = "found"


def _problem_with_caps(a):
    prob = parse_problem(_read(a.problemfile))
    cap = _max_degree()
    if cap is not None:
        if cap < prob.f.degree():
            raise ResourceCapError(f"deg f = {prob.f.degree()} exceeds POSCERT_MAX_DEGREE={cap}")
        prob.degree_cap = cap
    if getattr(a, "grid", None):
        prob.grid_resolution = a.grid
    return prob


def cmd_putinar(a, rep):
    prob = _problem_with_caps(a)
    trace, cert = putinar.putinar_search(prob)
    rep.trace = trace.summary()
    _emit(rep, a.emit, cert, prob.S)
    rep.verdict = "found"
    rep.result = {"ball_N": _q(trace.ball_N), "mode": prob.mode}


def cmd_projective(a, rep):
    prob = _problem_with_caps(a)
    pad, cert = putinar.projective_putinar_search(prob)
    S = prob.S.with_generators(prob.S.generators, homogeneous=True)
    _emit(rep, a.emit, cert, S)
    rep.verdict = "found"
    rep.result = {"denominator_power": pad, "identity": f"(sum x_i^2)^{pad} * target in the homogeneous module"}


def cmd_natgen(a, rep):
    K = noncompact.IntervalUnion.parse(a.intervals)
    names = [a.var]
    gens = noncompact.natural_generators(K)
    rep.result = {"K": str(K), "generators": [format_poly(g, names) for g in gens]}
    rep.verdict = "found"
    if a.gens is not None:
        S = [parse_poly(t, names) for t in a.gens.split(";") if t.strip()]
        v = noncompact.is_putinar_1d(S, K)
        rep.result.update({"K_S": str(v.K), "putinar": v.putinar,
                           "missing": [format_poly(g, names) for g in v.missing]})
        if v.note:
            rep.trace.append(v.note)
        rep.verdict = "verified" if v.putinar else "failed"


def cmd_stability(a, rep):
    T = noncompact.TentacleSet.parse(a.dirs)
    r = noncompact.stability_multipliers(T, a.bound)
    if r is None:
        rep.verdict = "failed"
        rep.reason = "no positive multipliers exist (exact infeasibility certificate)"
        rep.result = {"multipliers": None,
                      "certificate": [_q(v) for v in noncompact.infeasibility_certificate(T)]}
        return
    total = [sum(ri * z[j] for ri, z in zip(r, T.directions)) for j in range(T.nvars)]
    rep.result = {"multipliers": list(r), "sum": total}
    if a.degree is not None:
        rep.result["degree_bound"] = _q(noncompact.stability_degree_bound(T, r, a.degree))
    rep.verdict = "found"


def cmd_desquare(a, rep):
    cf = parse_cert(_read(a.certfile))
    names = list(cf.S.names)
    if a.var not in names:
        raise ParseError(f"unknown variable {a.var!r}")
    if not isinstance(cf.cert, ModuleCert):
        raise CertificationFailure("desquare expects a module certificate")
    var = names.index(a.var)
    out = noncompact.eliminate_squares(cf.cert, cf.S, var)
    S2 = noncompact.desquared_set(cf.S, var)
    _emit(rep, a.emit, out, S2)
    rep.verdict = "found"
    rep.result = {"generators": [format_poly(g, names) for g in S2.generators],
                  "target": format_poly(out.target, names)}


def cmd_logpoly(a, rep):
    P = noncompact.LogPolyhedron.parse(_read(a.file))
    u = noncompact.unimodular_cone_check(P)
    t = noncompact.triple_intersection_check(P)
    rep.result = {
        "unimodular": u.unimodular,
        "rays": [list(b) for b in u.witness] if u.witness else None,
        "det": u.det,
        "triples_ok": t.ok,
        "triple_witnesses": [{"curves": [i + 1, j + 1, k + 1], "kind": kind, "point": pt}
                             for i, j, k, kind, pt in t.witnesses],
    }
    rep.verdict = "verified" if (u.unimodular and t.ok) else "failed"


def cmd_homogenize(a, rep):
    f, names = parse_polyfile(_read(a.polyfile))
    h = f.homogenize(even=a.even)
    new = a.new_var
    if new in names:
        raise ParseError(f"variable name {new!r} is already in use")
    rep.result = {"poly": format_poly(h, [new] + list(names)), "degree": h.degree()}
    rep.verdict = "found"


# -- plumbing ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="poscert", description="Construct and exactly verify positivity certificates.")
    p.add_argument("--json", action="store_true", help="print the run report as JSON")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("verify", help="exactly verify a certificate file")
    s.add_argument("certfile")

    s = sub.add_parser("polya", help="least Pólya exponent of a form")
    s.add_argument("polyfile")
    s.add_argument("--max-n", type=int, default=50)
    s.add_argument("--nonstrict", action="store_true", help="only ask for non-negative coefficients")

    s = sub.add_parser("habicht", help="quotient-of-squares certificate of a positive definite form")
    s.add_argument("polyfile")
    s.add_argument("--max-n", type=int, default=200)
    s.add_argument("--prefix", help="write <prefix>.num.cert and <prefix>.den.cert")

    s = sub.add_parser("handelman", help="Handelman representation on a simplex (gen: lines are the facets)")
    s.add_argument("problemfile")
    s.add_argument("--max-n", type=int, default=200)
    s.add_argument("--emit")

    for verb, hlp in (("putinar", "Putinar search for a module/preorder certificate"),
                      ("projective", "homogeneous certificate with a sphere denominator")):
        s = sub.add_parser(verb, help=hlp)
        s.add_argument("problemfile")
        s.add_argument("--emit")
        s.add_argument("--grid", type=int)

    s = sub.add_parser("natgen", help="natural generators of a union of intervals")
    s.add_argument("intervals")
    s.add_argument("--var", default="x")
    s.add_argument("--gens", help="';'-separated S to test for the Putinar property")

    s = sub.add_parser("stability", help="tentacle multipliers and degree bound")
    s.add_argument("--dirs", required=True)
    s.add_argument("--degree", type=int)
    s.add_argument("--bound", type=int, default=20)

    s = sub.add_parser("desquare", help="eliminate squares of a variable from a certificate")
    s.add_argument("certfile")
    s.add_argument("--var", required=True)
    s.add_argument("--emit")

    s = sub.add_parser("logpoly", help="unimodularity and triple intersections of a log polyhedron")
    s.add_argument("file")

    s = sub.add_parser("homogenize", help="homogenize a polynomial with a new leading variable")
    s.add_argument("polyfile")
    s.add_argument("--even", action="store_true", help="pad to even degree")
    s.add_argument("--new-var", default="x0")
    return p


VERBS = {
    "verify": cmd_verify, "polya": cmd_polya, "habicht": cmd_habicht, "handelman": cmd_handelman,
    "putinar": cmd_putinar, "projective": cmd_projective, "natgen": cmd_natgen,
    "stability": cmd_stability, "desquare": cmd_desquare, "logpoly": cmd_logpoly,
    "homogenize": cmd_homogenize,
}


def run(args) -> RunReport:
    rep = RunReport(args.verb)
    t0 = time.perf_counter()
    try:
        VERBS[args.verb](args, rep)
        rep.exit_code = EXIT[rep.verdict]
    except ParseError as exc:
        rep.verdict, rep.reason, rep.exit_code = "error", f"parse error: {exc}", 2
    except ResourceCapError as exc:
        rep.verdict, rep.reason, rep.exit_code = "inconclusive", f"resource cap: {exc}", 3
    except CertificationFailure as exc:
        rep.verdict = "failed" if exc.refuted else "inconclusive"
        rep.reason = str(exc)
        rep.exit_code = 1
    except (PoscertError, OSError) as exc:
        rep.verdict, rep.reason, rep.exit_code = "error", str(exc), 1
    rep.seconds = round(time.perf_counter() - t0, 3)
    return rep


def _print_text(rep, out):
    print(f"{rep.verb}: {rep.verdict}", file=out)
    for k, v in rep.result.items():
        print(f"  {k}: {v}", file=out)
    for line in rep.trace:
        print(f"  trace: {line}", file=out)
    for path in rep.certificate:
        print(f"  wrote {path}", file=out)
    if rep.reason:
        print(f"  reason: {rep.reason}", file=out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    rep = run(args)
    if args.json:
        print(json.dumps(asdict(rep), sort_keys=True))
    else:
        _print_text(rep, sys.stdout)
        print(f"  time: {rep.seconds}s", file=sys.stderr)
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
