"""Text format for N-partite pure states.

Grammar (whitespace-insensitive, ``#`` comments to end of line)::

    source  := header ";" expr | expr
    header  := "parties" (NAME ":" INT)+
    expr    := ["+"|"-"] term (("+"|"-") term)*
    term    := [scalar ["*"]] atom
    atom    := primary ("(x)" primary)*
    primary := ket | family | "(" expr ")"
    ket     := "|" DIGIT+ ">"
    family  := ("ghz"|"toast"|"schmidt"|"epr"|"pairs"|"etoast") "(" args ")"
    scalar  := decimal, complex literal (e.g. "0.5j"), "1/2", "sqrt(2)/2", "(1/2)", ...

Each header entry declares one tensor factor; repeating a party name gives
that party another factor. Without a header every ket digit is a qubit of
its own party, named A, B, C, ... by position.

States whose factors exceed ten levels use the amplitude-table format
instead::

    dims 5 5 5 ; owner A B C
    0 0.35 0.0
    124 0.1 0.0

Each data line is ``index re im`` with the index in mixed radix (factor 0
most significant); unlisted indices are zero. An optional trailing
``; parties B A`` clause fixes the party order, which otherwise follows
first appearance in the owner list.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import statekit as sk
from .errors import DimensionLimitError, ParseError, StateError
from .statekit import StateTensor

FAMILIES = ("ghz", "toast", "schmidt", "epr", "pairs", "etoast")
# (min, max) argument counts; None means unbounded
ARITY = {"ghz": (1, 2), "toast": (1, 1), "schmidt": (3, None), "etoast": (1, 1),
         "epr": (2, 2), "pairs": (1, None)}
MAX_DEPTH = 200

# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<tensor>\(x\))
  | (?P<ket>\|[0-9]*>?)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?[ij]?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[;:+\-*/(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ket | number | name | op | tensor | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col, text[pos])
        kind = m.lastgroup
        tok = m.group()
        if kind == "ket" and not re.fullmatch(r"\|[0-9]+>", tok):
            raise ParseError("malformed ket, expected |digits>", line, col, tok)
        if kind != "ws":
            tokens.append(Token(kind, tok, line, col))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    # end of input is reported at the last character of the final token
    if tokens:
        last = tokens[-1]
        tail = last.text.split("\n")
        eof_line = last.line + len(tail) - 1
        eof_col = (last.col if len(tail) == 1 else 1) + len(tail[-1]) - 1
    else:
        eof_line, eof_col = 1, 1
    tokens.append(Token("eof", "", eof_line, eof_col))
    return tokens


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    line: int
    col: int


@dataclass(frozen=True)
class Ket(Node):
    digits: str


@dataclass(frozen=True)
class Family(Node):
    name: str
    args: tuple  # ints, complex scalars, party names, or (name, name) pairs


@dataclass(frozen=True)
class Scaled(Node):
    scalar: complex
    atom: Node


@dataclass(frozen=True)
class Sum(Node):
    terms: tuple[tuple[int, Node], ...]  # (sign, term)


@dataclass(frozen=True)
class Tensor(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Header(Node):
    entries: tuple[tuple[str, int], ...]  # one (party, dim) per factor


@dataclass(frozen=True)
class StateExpr:
    """Parsed source: optional header plus an expression, or an amplitude table."""

    header: Header | None
    expr: Node | None
    table: AmplitudeTable | None = None


@dataclass(frozen=True)
class AmplitudeTable(Node):
    dims: tuple[int, ...]
    owners: tuple[str, ...]
    entries: tuple[tuple[int, complex, int], ...]  # (index, amplitude, source line)
    parties: tuple[str, ...] | None = None


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Backtrack(Exception):
    pass


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.depth = 0

    # -- helpers ----------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col, t.text)

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        if not self.at(kind, text):
            want = what or (repr(text) if text else kind)
            found = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
            raise self.error(f"expected {want}, found {found}")
        t = self.tok
        self.i += 1
        return t

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise self.error("expression nested too deeply")

    def leave(self):
        self.depth -= 1

    # -- grammar ----------------------------------------------------------
    def source(self) -> StateExpr:
        header = None
        if self.at("name", "parties"):
            header = self.header()
            self.expect("op", ";")
        expr = self.expr()
        if not self.at("eof"):
            raise self.error(f"unexpected {self.tok.text!r} after expression")
        return StateExpr(header, expr)

    def header(self) -> Header:
        start = self.expect("name", "parties")
        entries = []
        while self.at("name"):
            name = self.tok.text
            self.i += 1
            self.expect("op", ":")
            t = self.expect("number", what="a dimension")
            if not t.text.isdigit() or int(t.text) < 2:
                raise self.error("dimension must be an integer >= 2", t)
            entries.append((name, int(t.text)))
        if not entries:
            raise self.error("header needs at least one NAME:DIM entry")
        return Header(start.line, start.col, tuple(entries))

    def expr(self) -> Node:
        self.enter()
        start = self.tok
        terms = []
        sign = 1
        if self.at("op", "+") or self.at("op", "-"):
            sign = -1 if self.tok.text == "-" else 1
            self.i += 1
        terms.append((sign, self.term()))
        while self.at("op", "+") or self.at("op", "-"):
            sign = -1 if self.tok.text == "-" else 1
            self.i += 1
            terms.append((sign, self.term()))
        self.leave()
        if len(terms) == 1 and terms[0][0] == 1:
            return terms[0][1]
        return Sum(start.line, start.col, tuple(terms))

    def _starts_atom(self) -> bool:
        t = self.tok
        return t.kind == "ket" or (t.kind == "name" and t.text in FAMILIES) or t.kind == "tensor" \
            or (t.kind == "op" and t.text == "(")

    def term(self) -> Node:
        start = self.tok
        if self.at("number") or self.at("name", "sqrt") or self.at("op", "("):
            saved = self.i
            furthest = None
            try:
                value = self.scalar_product()
                if self.at("op", "*"):
                    self.i += 1
                if not self._starts_atom():
                    raise _Backtrack
                atom = self.atom()
                return Scaled(start.line, start.col, value, atom)
            except (_Backtrack, ParseError) as exc:
                furthest = (self.i, exc)
                self.i = saved
            try:
                return self.atom()
            except ParseError as exc:
                # report whichever reading got further into the input
                if isinstance(furthest[1], ParseError) and furthest[0] > self.i:
                    raise furthest[1] from None
                raise exc
        return self.atom()

    def atom(self) -> Node:
        left = self.primary()
        while self.at("tensor"):
            t = self.tok
            self.i += 1
            right = self.primary()
            left = Tensor(t.line, t.col, left, right)
        return left

    def primary(self) -> Node:
        t = self.tok
        if t.kind == "ket":
            self.i += 1
            return Ket(t.line, t.col, t.text[1:-1])
        if t.kind == "name" and t.text in FAMILIES:
            return self.family()
        if self.at("op", "("):
            self.i += 1
            self.enter()
            inner = self.expr()
            self.leave()
            self.expect("op", ")")
            return inner
        if t.kind == "name":
            raise self.error(f"unknown family {t.text!r}")
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise self.error(f"expected a ket, family call or '(', found {found}")

    def family(self) -> Family:
        t = self.expect("name")
        self.expect("op", "(")
        args = []
        if not self.at("op", ")"):
            args.append(self.family_arg())
            while self.at("op", ","):
                self.i += 1
                args.append(self.family_arg())
        self.expect("op", ")")
        lo, hi = ARITY[t.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = str(lo) if lo == hi else f"{lo}..{hi}" if hi else f"at least {lo}"
            raise self.error(f"{t.text} takes {want} arguments, got {len(args)}", t)
        if t.text == "epr" and not all(isinstance(x, str) for x in args):
            raise self.error("epr takes two party names", t)
        if t.text == "pairs" and not all(isinstance(x, tuple) for x in args):
            raise self.error("pairs takes NAME-NAME arguments", t)
        if t.text not in ("epr", "pairs") and not all(isinstance(x, complex) for x in args):
            raise self.error(f"{t.text} takes numeric arguments", t)
        return Family(t.line, t.col, t.text, tuple(args))

    def family_arg(self):
        if self.at("name") and self.tok.text != "sqrt":
            a = self.tok.text
            self.i += 1
            if self.at("op", "-") and self.peek().kind == "name":
                self.i += 1
                b = self.tok.text
                self.i += 1
                return (a, b)
            return a
        return self.scalar_sum()

    # -- scalars ----------------------------------------------------------
    def scalar_sum(self) -> complex:
        self.enter()
        v = self.scalar_product()
        while self.at("op", "+") or self.at("op", "-"):
            neg = self.tok.text == "-"
            self.i += 1
            w = self.scalar_product()
            v = v - w if neg else v + w
        self.leave()
        return v

    def scalar_product(self) -> complex:
        v = self.scalar_unary()
        while True:
            if self.at("op", "/"):
                t = self.tok
                self.i += 1
                w = self.scalar_unary()
                if w == 0:
                    raise self.error("division by zero", t)
                v = v / w
            elif self.at("op", "*") and not self._atom_after_star():
                self.i += 1
                v = v * self.scalar_unary()
            else:
                return v

    def _atom_after_star(self) -> bool:
        nxt = self.peek()
        return nxt.kind == "ket" or (nxt.kind == "name" and nxt.text in FAMILIES) or (
            nxt.kind == "op" and nxt.text == "(" and not self._paren_is_scalar(self.i + 1))

    def _paren_is_scalar(self, i: int) -> bool:
        saved = self.i
        self.i = i
        try:
            self.scalar_unary()
            return True
        except ParseError:
            return False
        finally:
            self.i = saved

    def scalar_unary(self) -> complex:
        if self.at("op", "-"):
            self.i += 1
            return -self.scalar_unary()
        if self.at("op", "+"):
            self.i += 1
            return self.scalar_unary()
        return self.scalar_primary()

    def scalar_primary(self) -> complex:
        t = self.tok
        if t.kind == "number":
            self.i += 1
            if t.text[-1] in "ij":
                return complex(0.0, float(t.text[:-1]))
            return complex(float(t.text))
        if t.kind == "name" and t.text == "sqrt":
            self.i += 1
            self.expect("op", "(")
            v = self.scalar_sum()
            self.expect("op", ")")
            if v.imag != 0 or v.real < 0:
                raise self.error("sqrt needs a nonnegative real argument", t)
            return complex(math.sqrt(v.real))
        if self.at("op", "("):
            self.i += 1
            v = self.scalar_sum()
            self.expect("op", ")")
            return v
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise self.error(f"expected a number, found {found}")


def _parse_table(text: str) -> StateExpr:
    lines = text.splitlines()
    dims = owners = None
    entries = []
    for ln, raw in enumerate(lines, 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        col = raw.index(body[0]) + 1
        if dims is None:
            m = re.fullmatch(r"dims\s+([0-9\s]+?)\s*;\s*owner\s+([^;]+?)(?:\s*;\s*parties\s+(.+))?",
                             body)
            if not m:
                raise ParseError("expected 'dims d0 d1 ... ; owner p0 p1 ...'", ln, col, body[:20])
            dims = tuple(int(x) for x in m.group(1).split())
            owners = tuple(m.group(2).split())
            order = tuple(m.group(3).split()) if m.group(3) else None
            if len(owners) != len(dims):
                raise ParseError(f"{len(dims)} dims but {len(owners)} owners", ln, col)
            if order is not None and (len(set(order)) != len(order) or set(order) != set(owners)):
                raise ParseError("parties clause must list each owner exactly once", ln, col)
            if any(d < 2 for d in dims):
                raise ParseError("dimensions must be >= 2", ln, col)
            continue
        parts = body.split()
        if len(parts) != 3:
            raise ParseError("expected 'index re im'", ln, col, body[:20])
        try:
            idx = int(parts[0])
            amp = complex(float(parts[1]), float(parts[2]))
        except ValueError:
            raise ParseError("malformed amplitude line", ln, col, body[:20]) from None
        entries.append((idx, amp, ln))
    if dims is None:
        raise ParseError("empty amplitude table", 1, 1)
    return StateExpr(None, None, AmplitudeTable(1, 1, dims, owners, tuple(entries), order))


def parse(text: str) -> StateExpr:
    """Parse a state description into an AST; raises :class:`ParseError`."""
    stripped = "\n".join(l.split("#", 1)[0] for l in text.splitlines()).lstrip()
    if re.match(r"dims\b", stripped):
        return _parse_table(text)
    toks = tokenize(text)
    if toks[0].kind == "eof":
        raise ParseError("empty input", 1, 1)
    return _Parser(toks).source()


# ---------------------------------------------------------------------------
# Elaboration
# ---------------------------------------------------------------------------


@dataclass
class _Vec:
    factors: list[tuple[str, int]]  # (party name, dim) per factor
    amps: np.ndarray


def _from_state(s: StateTensor) -> _Vec:
    return _Vec([(s.party_names[p], d) for p, d in zip(s.owner, s.factor_dims)],
                np.array(s.amplitudes))


def _int_arg(node: Family, v, what: str) -> int:
    if isinstance(v, complex) and v.imag == 0 and float(v.real).is_integer():
        return int(v.real)
    raise ParseError(f"{node.name}: {what} must be an integer", node.line, node.col, node.name)


def _real_arg(node: Family, v, what: str) -> float:
    if isinstance(v, complex) and v.imag == 0:
        return float(v.real)
    raise ParseError(f"{node.name}: {what} must be a real number", node.line, node.col, node.name)


class _Elaborator:
    def __init__(self, header: Header | None, max_total_dim: int):
        self.header = header
        self.cap = max_total_dim

    def fail(self, node: Node, msg: str) -> ParseError:
        return ParseError(msg, node.line, node.col)

    def eval(self, node: Node) -> _Vec:
        if isinstance(node, Ket):
            return self.ket(node)
        if isinstance(node, Family):
            return self.family(node)
        if isinstance(node, Scaled):
            v = self.eval(node.atom)
            return _Vec(v.factors, v.amps * node.scalar)
        if isinstance(node, Tensor):
            a, b = self.eval(node.left), self.eval(node.right)
            if a.amps.size * b.amps.size > self.cap:
                raise DimensionLimitError(f"tensor product exceeds the dimension cap {self.cap}")
            return _Vec(a.factors + b.factors, np.kron(a.amps, b.amps))
        if isinstance(node, Sum):
            acc = None
            for sign, term in node.terms:
                ket, scale = (term.atom, term.scalar) if isinstance(term, Scaled) else (term, 1.0)
                if acc is not None and isinstance(ket, Ket):
                    # add a weighted basis vector in place instead of building it densely
                    factors, idx = self.ket_index(ket)
                    if factors != acc.factors:
                        raise self.fail(term, "terms of a sum must share the same factor structure")
                    acc.amps[idx] += sign * scale
                    continue
                v = self.eval(term)
                if acc is None:
                    acc = _Vec(v.factors, sign * v.amps)
                elif v.factors != acc.factors:
                    raise self.fail(term, "terms of a sum must share the same factor structure")
                else:
                    acc.amps = acc.amps + sign * v.amps
            return acc
        raise TypeError(f"unknown node {node!r}")

    def ket(self, node: Ket) -> _Vec:
        factors, idx = self.ket_index(node)
        amps = np.zeros(math.prod(d for _, d in factors), dtype=np.complex128)
        amps[idx] = 1.0
        return _Vec(factors, amps)

    def ket_index(self, node: Ket) -> tuple[list[tuple[str, int]], int]:
        if self.header is not None:
            factors = list(self.header.entries)
            if len(node.digits) != len(factors):
                raise self.fail(node, f"ket has {len(node.digits)} digits but the header declares "
                                      f"{len(factors)} factors")
        else:
            factors = list(zip(sk.default_party_names(len(node.digits)), [2] * len(node.digits)))
        dims = [d for _, d in factors]
        total = math.prod(dims)
        if total > self.cap:
            raise DimensionLimitError(f"ket space of dimension {total} exceeds cap {self.cap}")
        idx = 0
        for k, (ch, d) in enumerate(zip(node.digits, dims)):
            if int(ch) >= d:
                raise self.fail(node, f"digit {ch} exceeds dimension {d} of factor {k + 1}")
            idx = idx * d + int(ch)
        return factors, idx

    def family(self, node: Family) -> _Vec:
        a = node.args
        name = node.name
        try:
            if name == "ghz":
                n = _int_arg(node, a[0], "N")
                k = _int_arg(node, a[1], "k") if len(a) > 1 else 2
                s = sk.ghz(n, k, max_total_dim=self.cap)
            elif name == "toast":
                s = sk.toast(_int_arg(node, a[0], "N"), max_total_dim=self.cap)
            elif name == "schmidt":
                n = _int_arg(node, a[0], "N")
                s = sk.schmidt_state(n, [_real_arg(node, x, "coefficient") for x in a[1:]],
                                     max_total_dim=self.cap)
            elif name == "etoast":
                s = sk.epsilon_toast(_real_arg(node, a[0], "eps"))
            elif name == "epr":
                s = self._pairs(node, [tuple(a)])
            else:  # pairs
                s = self._pairs(node, list(a))
        except StateError as exc:
            raise self.fail(node, f"{name}: {exc}") from None
        return _from_state(s)

    def _pairs(self, node: Family, pairs: list[tuple[str, str]]) -> StateTensor:
        names: list[str] = []
        for x, y in pairs:
            for nm in (x, y):
                if nm not in names:
                    names.append(nm)
        if self.header is not None:
            # keep the header's party order where possible
            order = [nm for nm, _ in self.header.entries]
            names.sort(key=lambda nm: order.index(nm) if nm in order else len(order))
        idx = [(names.index(x), names.index(y)) for x, y in pairs]
        return sk.pair_graph_state(len(names), idx, party_names=names, max_total_dim=self.cap)


def elaborate(expr: StateExpr, *, renormalize: bool = False,
              max_total_dim: int = sk.MAX_TOTAL_DIM) -> StateTensor:
    """Build the state an AST describes.

    Party order follows the header, or first appearance without one. Norm
    handling follows :func:`statekit.make_state`.
    """
    if expr.table is not None:
        return _elaborate_table(expr.table, renormalize, max_total_dim)
    vec = _Elaborator(expr.header, max_total_dim).eval(expr.expr)
    factors = vec.factors
    amps = vec.amps
    where = expr.header or expr.expr

    if expr.header is not None:
        want = list(expr.header.entries)
        have_parties = {p for p, _ in factors}
        for p, _ in want:
            if p not in have_parties:
                raise ParseError(f"party {p} owns no factor", where.line, where.col)
        # match each header factor to the next unused factor of that party and dim
        used = [False] * len(factors)
        order = []
        for p, d in want:
            for j, f in enumerate(factors):
                if not used[j] and f == (p, d):
                    used[j] = True
                    order.append(j)
                    break
            else:
                raise ParseError(f"header factor {p}:{d} has no matching factor in the expression",
                                 where.line, where.col)
        if not all(used):
            extra = factors[used.index(False)]
            raise ParseError(f"factor {extra[0]}:{extra[1]} is not declared in the header",
                             where.line, where.col)
        if order != list(range(len(factors))):
            amps = np.transpose(amps.reshape([d for _, d in factors]), order).reshape(-1)
            factors = [factors[j] for j in order]

    names: list[str] = []
    for p, _ in factors:
        if p not in names:
            names.append(p)
    try:
        return sk.make_state([d for _, d in factors], [names.index(p) for p, _ in factors], amps,
                             party_names=names, renormalize=renormalize, max_total_dim=max_total_dim)
    except StateError as exc:
        raise ParseError(str(exc), where.line, where.col) from None


def _elaborate_table(tab: AmplitudeTable, renormalize: bool, cap: int) -> StateTensor:
    total = math.prod(tab.dims)
    if total > cap:
        raise DimensionLimitError(f"total dimension {total} exceeds cap {cap}")
    amps = np.zeros(total, dtype=np.complex128)
    for idx, amp, ln in tab.entries:
        if not 0 <= idx < total:
            raise ParseError(f"index {idx} outside 0..{total - 1}", ln, 1, str(idx))
        amps[idx] += amp
    if tab.parties is None and all(o.isdigit() for o in tab.owners):
        own = [int(o) for o in tab.owners]
        names = None
    else:
        names = list(tab.parties or ())
        for o in tab.owners:
            if o not in names:
                names.append(o)
        own = [names.index(o) for o in tab.owners]
    try:
        return sk.make_state(tab.dims, own, amps, party_names=names, renormalize=renormalize,
                             max_total_dim=cap)
    except StateError as exc:
        raise ParseError(str(exc), 1, 1) from None


def loads(text: str, *, renormalize: bool = False, max_total_dim: int = sk.MAX_TOTAL_DIM) -> StateTensor:
    """Parse and elaborate in one call."""
    return elaborate(parse(text), renormalize=renormalize, max_total_dim=max_total_dim)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


def _fmt_amp(z: complex) -> tuple[int, str]:
    """Sign and magnitude text such that sign * text re-parses to ``z`` exactly."""
    re_, im = float(z.real), float(z.imag)
    if im == 0.0:
        return (-1 if re_ < 0 else 1), repr(abs(re_))
    if re_ == 0.0:
        return (-1 if im < 0 else 1), f"{abs(im)!r}j"
    return 1, f"({re_!r}{'-' if im < 0 else '+'}{abs(im)!r}j)"


def render(state: StateTensor) -> str:
    """Explicit-amplitude text that re-parses to ``state``.

    Uses ket notation when every factor has at most ten levels and party
    names are plain identifiers in first-appearance order, the amplitude
    table otherwise.
    """
    names = state.party_names
    ket_ok = all(d <= 10 for d in state.factor_dims) and all(
        _NAME_RE.fullmatch(n) and n != "parties" and n not in FAMILIES and n != "sqrt" for n in names)
    first_seen = list(dict.fromkeys(state.owner))
    ket_ok = ket_ok and first_seen == list(range(state.num_parties))
    nz = np.flatnonzero(state.amplitudes)
    if not ket_ok:
        lines = [f"dims {' '.join(map(str, state.factor_dims))} ; owner "
                 + " ".join(names[p] for p in state.owner) + " ; parties " + " ".join(names)]
        for i in nz:
            z = state.amplitudes[i]
            lines.append(f"{i} {float(z.real)!r} {float(z.imag)!r}")
        return "\n".join(lines) + "\n"

    header = "parties " + " ".join(f"{names[p]}:{d}" for p, d in zip(state.owner, state.factor_dims))
    dims = state.factor_dims
    parts = []
    for i in nz:
        digits = "".join(map(str, np.unravel_index(int(i), dims)))
        sign, mag = _fmt_amp(complex(state.amplitudes[i]))
        if not parts:
            parts.append(("-" if sign < 0 else "") + f"{mag}|{digits}>")
        else:
            parts.append(("- " if sign < 0 else "+ ") + f"{mag}|{digits}>")
    return f"{header}; {' '.join(parts)}"


# ---------------------------------------------------------------------------
# Embedding files
# ---------------------------------------------------------------------------


def parse_embeddings(text: str, state: StateTensor) -> dict[int, sk.IsometrySpec]:
    """Read ``isometry <party> <d> <D-dims...>`` blocks.

    Each block is followed by ``index re im`` lines, the index running
    column-major over the D x d matrix (``index = column * D + row``).
    Parties without a block keep the identity.
    """
    blocks: list[tuple[int, int, int, tuple[int, ...], list]] = []
    for ln, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if parts[0] == "isometry":
            if len(parts) < 4:
                raise ParseError("expected 'isometry <party> <d> <D-dims...>'", ln, 1, body[:20])
            try:
                party = state.party_index(parts[1])
                d = int(parts[2])
                out = tuple(int(x) for x in parts[3:])
            except (StateError, ValueError) as exc:
                raise ParseError(f"bad isometry header: {exc}", ln, 1, body[:20]) from None
            blocks.append((ln, party, d, out, []))
            continue
        if not blocks:
            raise ParseError("entry before any isometry header", ln, 1, body[:20])
        if len(parts) != 3:
            raise ParseError("expected 'index re im'", ln, 1, body[:20])
        try:
            blocks[-1][4].append((int(parts[0]), complex(float(parts[1]), float(parts[2])), ln))
        except ValueError:
            raise ParseError("malformed matrix entry", ln, 1, body[:20]) from None

    specs: dict[int, sk.IsometrySpec] = {}
    for ln, party, d, out, entries in blocks:
        if party in specs:
            raise ParseError(f"second isometry for party {state.party_names[party]}", ln, 1)
        big_d = math.prod(out)
        if big_d > sk.MAX_MATRIX_DIM or d > sk.MAX_MATRIX_DIM:
            raise DimensionLimitError(f"isometry of size {big_d}x{d} exceeds cap")
        v = np.zeros((big_d, d), dtype=np.complex128)
        for idx, z, eln in entries:
            if not 0 <= idx < big_d * d:
                raise ParseError(f"index {idx} outside the {big_d}x{d} matrix", eln, 1, str(idx))
            v[idx % big_d, idx // big_d] += z
        try:
            specs[party] = sk.IsometrySpec(party, d, out, v)
        except StateError as exc:
            raise ParseError(str(exc), ln, 1) from None
    return specs


def format_embeddings(specs, state: StateTensor) -> str:
    """Text form of isometries, readable by :func:`parse_embeddings`."""
    lines = []
    for spec in specs:
        if spec is None:
            continue
        lines.append(f"isometry {state.party_names[spec.party]} {spec.input_dim} "
                     + " ".join(map(str, spec.output_factor_dims)))
        flat = spec.columns.T.reshape(-1)  # column-major
        for i in np.flatnonzero(flat):
            lines.append(f"{i} {float(flat[i].real)!r} {float(flat[i].imag)!r}")
    return "\n".join(lines) + "\n"
