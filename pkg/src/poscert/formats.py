"""Line-oriented text formats for problems and certificates.

Problem file::

    vars: x y
    gen: 1 - x^2 - y^2
    gen: x
    target: x + 1/10
    mode: module
    ball: 1            # optional
    degree_cap: 8      # optional
    grid: 12           # optional

Certificate file (the ``vars``/``gen`` header makes it self-contained)::

    vars: x y
    gen: 1 - x^2 - y^2
    mode: module
    target: -x + 1
    sigma 0:
    weight 1/2 square x - 1
    weight 1/2 square y
    sigma 1:
    weight 1/2 square 1

Module blocks are indexed ``0..s``; preorder blocks by an ``s``-character
bitstring (``sigma 01:``).  Comments start with ``#``.
"""
from __future__ import annotations

import os
import re
import tempfile
from dataclasses import dataclass
from fractions import Fraction

from .certs import MODULE, PREORDER, GeneratorSet, ModuleCert, PreorderCert, SosPoly
from .errors import ParseError, PreconditionError
from .poly import find_variables, format_poly, parse_poly, parse_rational
from .putinar import Problem

_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


def _fmt_q(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _lines(text):
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if line.strip():
            yield ln, line


def _kv(line, ln):
    key, sep, val = line.partition(":")
    if not sep:
        raise ParseError("expected 'key: value'", ln, 1)
    return key.strip(), val.strip(), line.index(":") + 2


def _poly_at(text, names, ln, col):
    try:
        return parse_poly(text, names)
    except ParseError as exc:
        msg = str(exc).split(" (")[0]
        raise ParseError(msg, ln, col + (exc.column or 1) - 1) from None


def _vars(val, ln):
    names = val.split()
    if not names:
        raise ParseError("no variables declared", ln, 1)
    for n in names:
        if not _NAME.fullmatch(n):
            raise ParseError(f"bad variable name {n!r}", ln, 1)
    if len(set(names)) != len(names):
        raise ParseError("duplicate variable name", ln, 1)
    return names


def _int(val, ln, col, key):
    if not re.fullmatch(r"\d+", val):
        raise ParseError(f"{key} must be a non-negative integer", ln, col)
    return int(val)


# -- problems ---------------------------------------------------------------------------


def parse_problem(text: str) -> Problem:
    names, gens, target, mode, extra = None, [], None, MODULE, {}
    for ln, line in _lines(text):
        key, val, col = _kv(line, ln)
        if key == "vars":
            if names is not None:
                raise ParseError("vars declared twice", ln, 1)
            names = _vars(val, ln)
            continue
        if names is None and key in ("gen", "target"):
            raise ParseError("vars must be declared before polynomials", ln, 1)
        if key == "gen":
            gens.append(_poly_at(val, names, ln, col))
        elif key == "target":
            if target is not None:
                raise ParseError("target given twice", ln, 1)
            target = _poly_at(val, names, ln, col)
        elif key == "mode":
            if val not in (MODULE, PREORDER):
                raise ParseError(f"mode must be module or preorder, got {val!r}", ln, col)
            mode = val
        elif key == "ball":
            try:
                extra["ball"] = parse_rational(val)
            except ParseError:
                raise ParseError(f"ball must be an exact rational, got {val!r}", ln, col) from None
        elif key == "degree_cap":
            extra["degree_cap"] = _int(val, ln, col, key)
        elif key == "grid":
            extra["grid_resolution"] = _int(val, ln, col, key)
        else:
            raise ParseError(f"unknown key {key!r}", ln, 1)
    if names is None:
        raise ParseError("missing 'vars:' line", 1, 1)
    if target is None:
        raise ParseError("missing 'target:' line", 1, 1)
    S = GeneratorSet(len(names), tuple(gens), names=tuple(names))
    extra.setdefault("degree_cap", max(8, target.degree()))
    return Problem(S, target, mode, **extra)


def serialize_problem(p: Problem) -> str:
    names = p.S.names or tuple(f"x{i}" for i in range(p.S.nvars))
    out = [f"vars: {' '.join(names)}"]
    out += [f"gen: {format_poly(g, names)}" for g in p.S.generators]
    out.append(f"target: {format_poly(p.f, names)}")
    out.append(f"mode: {p.mode}")
    if p.ball is not None:
        out.append(f"ball: {_fmt_q(p.ball)}")
    out.append(f"degree_cap: {p.degree_cap}")
    out.append(f"grid: {p.grid_resolution}")
    return "\n".join(out) + "\n"


def parse_polyfile(text: str):
    """``(poly, names)`` from either ``vars:``/``poly:`` lines or a bare polynomial."""
    body = [(ln, line) for ln, line in _lines(text)]
    if not body:
        raise ParseError("empty polynomial file", 1, 1)
    if any(":" in line for _, line in body):
        names, p = None, None
        for ln, line in body:
            key, val, col = _kv(line, ln)
            if key == "vars":
                names = _vars(val, ln)
            elif key == "poly":
                if names is None:
                    raise ParseError("vars must be declared before the polynomial", ln, 1)
                p = _poly_at(val, names, ln, col)
            else:
                raise ParseError(f"unknown key {key!r}", ln, 1)
        if p is None:
            raise ParseError("missing 'poly:' line", 1, 1)
        return p, names
    if len(body) != 1:
        raise ParseError("a bare polynomial file holds one line", body[1][0], 1)
    ln, line = body[0]
    names = find_variables([line]) or ["x"]
    return _poly_at(line, names, ln, 1), names


# -- certificates -----------------------------------------------------------------------


@dataclass(frozen=True)
class CertFile:
    S: GeneratorSet
    cert: object

    @property
    def mode(self):
        return MODULE if isinstance(self.cert, ModuleCert) else PREORDER


def _sos_lines(sos: SosPoly, names):
    return [f"weight {_fmt_q(w)} square {format_poly(b, names)}" for w, b in sos.squares]


def serialize_cert(cert, S: GeneratorSet) -> str:
    names = S.names or tuple(f"x{i}" for i in range(S.nvars))
    out = [f"vars: {' '.join(names)}"]
    out += [f"gen: {format_poly(g, names)}" for g in S.generators]
    if S.homogeneous:
        out.append("homogeneous: true")
    if isinstance(cert, ModuleCert):
        out += ["mode: module", f"target: {format_poly(cert.target, names)}"]
        for i, sos in enumerate(cert.sigmas):
            if sos.squares:
                out.append(f"sigma {i}:")
                out += _sos_lines(sos, names)
    elif isinstance(cert, PreorderCert):
        out += ["mode: preorder", f"target: {format_poly(cert.target, names)}"]
        for alpha in sorted(cert.sigmas, key=lambda a: (sum(a), a)):
            sos = cert.sigmas[alpha]
            if sos.squares:
                out.append(f"sigma {''.join(str(k) for k in alpha) or '-'}:")
                out += _sos_lines(sos, names)
    else:
        raise TypeError(f"not a certificate: {type(cert).__name__}")
    return "\n".join(out) + "\n"


def parse_cert(text: str) -> CertFile:
    names, gens, mode, target, homog = None, [], None, None, False
    blocks = {}
    cur = None
    sq = re.compile(r"weight\s+(\S+)\s+square\s+(.*)")
    for ln, line in _lines(text):
        s = line.strip()
        m = re.fullmatch(r"sigma\s+(\S+)\s*:", s)
        if m:
            if mode is None or target is None:
                raise ParseError("sigma block before 'mode:' and 'target:'", ln, 1)
            key = m.group(1)
            nb = len(gens)
            if mode == MODULE:
                if not key.isdigit() or int(key) > nb:
                    raise ParseError(f"module index must be 0..{nb}", ln, 7)
                cur = int(key)
            else:
                if key == "-" and nb == 0:
                    cur = ()
                elif re.fullmatch(r"[01]+", key) and len(key) == nb:
                    cur = tuple(int(ch) for ch in key)
                else:
                    raise ParseError(f"preorder index must be a {nb}-character 0/1 string", ln, 7)
            if cur in blocks:
                raise ParseError(f"sigma {key} given twice", ln, 1)
            blocks[cur] = []
            continue
        m = sq.fullmatch(s)
        if m:
            if cur is None:
                raise ParseError("square outside a sigma block", ln, 1)
            try:
                w = parse_rational(m.group(1))
            except ParseError:
                raise ParseError(f"bad weight {m.group(1)!r}", ln, line.index(m.group(1)) + 1) from None
            blocks[cur].append((w, _poly_at(m.group(2), names, ln, line.index(m.group(2)) + 1)))
            continue
        if cur is not None:
            raise ParseError("expected 'weight <q> square <poly>' or a new sigma block", ln, 1)
        key, val, col = _kv(line, ln)
        if key == "vars":
            names = _vars(val, ln)
        elif names is None:
            raise ParseError("vars must come first", ln, 1)
        elif key == "gen":
            if mode is not None:
                raise ParseError("generators must precede 'mode:'", ln, 1)
            gens.append(_poly_at(val, names, ln, col))
        elif key == "homogeneous":
            if val not in ("true", "false"):
                raise ParseError("homogeneous must be true or false", ln, col)
            homog = val == "true"
        elif key == "mode":
            if val not in (MODULE, PREORDER):
                raise ParseError(f"mode must be module or preorder, got {val!r}", ln, col)
            mode = val
        elif key == "target":
            target = _poly_at(val, names, ln, col)
        else:
            raise ParseError(f"unknown key {key!r}", ln, 1)
    if names is None or mode is None or target is None:
        raise ParseError("certificate needs 'vars:', 'mode:' and 'target:'", 1, 1)
    n = len(names)
    try:
        S = GeneratorSet(n, tuple(gens), homogeneous=homog, names=tuple(names))
    except PreconditionError as exc:
        raise ParseError(str(exc), 1, 1) from None
    if mode == MODULE:
        sig = tuple(SosPoly(n, tuple(blocks.get(i, ()))) for i in range(len(gens) + 1))
        cert = ModuleCert(target, sig)
    else:
        cert = PreorderCert(target, {a: SosPoly(n, tuple(sq)) for a, sq in blocks.items()})
    return CertFile(S, cert)


def write_atomic(path, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".poscert-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
