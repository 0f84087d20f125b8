"""
A small text format for fermionic/bosonic models.

Example::

    # two conjugate fermions with a mass-like coupling
    model interacting {
        param k : real;
        fermion psi1 conj psi2;
        lagrangian { i*(psi1*d(psi2) + psi2*d(psi1)) + k*psi1*psi2 }
    }

Products keep their source order, so ``psi2*psi1`` becomes ``-psi1*psi2``
after canonicalization. ``d(x)`` is the velocity of ``x``; ``i`` and ``t`` are
reserved for the imaginary unit and time.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterator

from . import scalar as sx
from .grassmann import NonInvertibleError
from .poly import GrassmannPoly, OddSymbolTable

KEYWORDS = {"model", "param", "boson", "fermion", "conj", "lagrangian", "real", "complex", "i", "t", "d"}


class ModelError(ValueError):
    """Raised by :func:`parse_model` when the source has error diagnostics."""

    def __init__(self, diagnostics: list["Diagnostic"]):
        self.diagnostics = diagnostics
        first = next((d for d in diagnostics if d.severity == "error"), diagnostics[0])
        super().__init__(first.text())


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning | info
    message: str
    line: int = 0
    col: int = 0

    def to_json(self) -> dict:
        return {"severity": self.severity, "message": self.message, "line": self.line, "col": self.col}

    def text(self) -> str:
        where = f"{self.line}:{self.col}: " if self.line else ""
        return f"{where}{self.severity}: {self.message}"


# ---------------------------------------------------------------------------
# lexer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # NUM, NAME, OP, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[{}();:*+\-/^,])"
)


class _SyntaxError(Exception):
    def __init__(self, message, line, col):
        super().__init__(message)
        self.diag = Diagnostic("error", message, line, col)


def tokenize(text: str) -> Iterator[Token]:
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise _SyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind == "num":
                yield Token("NUM", tok, line, col)
            elif kind == "name":
                yield Token("NAME", tok, line, col)
            elif kind == "op":
                yield Token("OP", tok, line, col)
            col += len(tok)
        pos = m.end()
    yield Token("EOF", "", line, col)


# ---------------------------------------------------------------------------
# expression AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    line: int
    col: int


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Imag(Node):
    pass


@dataclass(frozen=True)
class TimeVar(Node):
    pass


@dataclass(frozen=True)
class Name(Node):
    name: str


@dataclass(frozen=True)
class Vel(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class PowOp(Node):
    base: Node
    exp: int


class _Parser:
    def __init__(self, text: str):
        self.toks = list(tokenize(text))
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return _SyntaxError(msg, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        t = self.tok
        if t.text != text or t.kind == "NUM":
            shown = t.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.next()

    def name(self, what: str) -> Token:
        t = self.tok
        if t.kind != "NAME":
            raise self.error(f"expected {what}, found {t.text or 'end of input'!r}")
        if t.text in KEYWORDS:
            raise self.error(f"{t.text!r} is reserved and cannot be used as {what}")
        return self.next()

    # expr := term (('+'|'-') term)*
    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "OP" and self.tok.text in "+-":
            op = self.next()
            node = BinOp(node.line, node.col, op.text, node, self.term())
        return node

    # term := unary (('*'|'/') unary)*
    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "OP" and self.tok.text in "*/":
            op = self.next()
            node = BinOp(node.line, node.col, op.text, node, self.unary())
        return node

    # unary := '-' unary | power
    def unary(self) -> Node:
        if self.tok.kind == "OP" and self.tok.text == "-":
            op = self.next()
            return Neg(op.line, op.col, self.unary())
        if self.tok.kind == "OP" and self.tok.text == "+":
            self.next()
            return self.unary()
        return self.power()

    # power := atom ('^' ['-'] INT)?
    def power(self) -> Node:
        node = self.atom()
        if self.tok.kind == "OP" and self.tok.text == "^":
            self.next()
            sign = 1
            if self.tok.text == "-":
                self.next()
                sign = -1
            t = self.tok
            if t.kind != "NUM" or not t.text.isdigit():
                raise self.error("exponent must be an integer literal")
            self.next()
            node = PowOp(node.line, node.col, node, sign * int(t.text))
        return node

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "NUM":
            self.next()
            return Num(t.line, t.col, float(t.text))
        if t.kind == "OP" and t.text == "(":
            self.next()
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "NAME":
            if t.text == "i":
                self.next()
                return Imag(t.line, t.col)
            if t.text == "t":
                self.next()
                return TimeVar(t.line, t.col)
            if t.text == "d":
                self.next()
                self.expect("(")
                nm = self.name("a variable name")
                self.expect(")")
                return Vel(t.line, t.col, nm.text)
            if t.text in KEYWORDS:
                raise self.error(f"unexpected keyword {t.text!r}")
            self.next()
            return Name(t.line, t.col, t.text)
        raise self.error(f"unexpected {t.text or 'end of input'!r} in expression")


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

def velocity_name(name: str) -> str:
    return f"d({name})"


def momentum_name(name: str) -> str:
    return f"pi_{name}"


def boson_momentum(name: str) -> sx.Fn:
    return sx.Fn(f"p_{name}", 0, True)


@dataclass
class ModelSpec:
    """Parsed model with its Lagrangian over the mechanics symbol table.

    The table lists fermion coordinates, then their velocities, then their
    momenta. Bosons enter coefficients as real time functions ``q`` / ``d(q)``.
    """

    name: str
    params: dict[str, str]
    bosons: tuple[str, ...]
    fermions: tuple[str, ...]
    pairs: dict[str, tuple[int, str]]
    table: OddSymbolTable
    lagrangian: GrassmannPoly
    positions: dict[str, tuple[int, int]] = field(default_factory=dict)
    ast: Node | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)
    metric: list[list[sx.Expr]] | None = None
    reality: str = "skipped"

    @property
    def mu(self) -> int:
        return len(self.fermions)

    @property
    def velocities(self) -> list[str]:
        return [velocity_name(f) for f in self.fermions]

    @property
    def momenta(self) -> list[str]:
        return [momentum_name(f) for f in self.fermions]

    def param_atom(self, name: str) -> sx.Param:
        return sx.Param(name, self.params[name] == "real")

    def boson_atom(self, name: str, order: int = 0) -> sx.Fn:
        return sx.Fn(name, order, True)

    def partner(self, fermion: str) -> tuple[int, str]:
        return self.pairs.get(fermion, (1, fermion))

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    def symbol(self, name: str) -> GrassmannPoly:
        return GrassmannPoly.symbol(self.table, name)


def mechanics_table(fermions, pairs) -> OddSymbolTable:
    entries = [(f, "coordinate") for f in fermions]
    entries += [(velocity_name(f), "velocity") for f in fermions]
    entries += [(momentum_name(f), "momentum") for f in fermions]
    conj = {}
    for a, (s, b) in pairs.items():
        conj[a] = (s, b)
        conj[velocity_name(a)] = (s, velocity_name(b))
        conj[momentum_name(a)] = (-s, momentum_name(b))
    for f in fermions:
        # a real fermion has a real velocity and an imaginary momentum
        if f not in pairs:
            conj[momentum_name(f)] = (-1, momentum_name(f))
    return OddSymbolTable.build(entries, conj)


def _parse_source(text: str):
    p = _Parser(text)
    p.expect("model")
    name = p.name("a model name").text
    p.expect("{")
    params: dict[str, str] = {}
    bosons: list[str] = []
    fermions: list[str] = []
    pairs: dict[str, tuple[int, str]] = {}
    positions: dict[str, tuple[int, int]] = {}
    ast = None
    lag_tok = None

    def declare(tok: Token):
        if tok.text in positions:
            l, c = positions[tok.text]
            raise _SyntaxError(f"{tok.text!r} already declared at {l}:{c}", tok.line, tok.col)
        positions[tok.text] = (tok.line, tok.col)

    while not (p.tok.kind == "OP" and p.tok.text == "}"):
        kw = p.tok
        if kw.kind == "EOF":
            raise p.error("unexpected end of input; missing '}'")
        if kw.text == "param":
            p.next()
            nm = p.name("a parameter name")
            declare(nm)
            p.expect(":")
            kind = p.tok
            if kind.text not in ("real", "complex"):
                raise p.error("parameter kind must be 'real' or 'complex'")
            p.next()
            params[nm.text] = kind.text
            p.expect(";")
        elif kw.text == "boson":
            p.next()
            nm = p.name("a boson name")
            declare(nm)
            bosons.append(nm.text)
            p.expect(";")
        elif kw.text == "fermion":
            p.next()
            nm = p.name("a fermion name")
            declare(nm)
            fermions.append(nm.text)
            if p.tok.text == "conj":
                p.next()
                sign = 1
                if p.tok.text == "-":
                    p.next()
                    sign = -1
                other = p.name("a fermion name")
                declare(other)
                fermions.append(other.text)
                pairs[nm.text] = (sign, other.text)
                pairs[other.text] = (sign, nm.text)
            p.expect(";")
        elif kw.text == "lagrangian":
            if ast is not None:
                raise p.error("duplicate lagrangian block")
            lag_tok = p.next()
            p.expect("{")
            ast = p.expr()
            p.expect("}")
            if p.tok.text == ";":
                p.next()
        else:
            raise p.error(f"expected a declaration, found {kw.text or 'end of input'!r}")
    p.expect("}")
    if p.tok.kind != "EOF":
        raise p.error(f"unexpected {p.tok.text!r} after model block")
    if ast is None:
        raise _SyntaxError("model has no lagrangian block", 1, 1)
    return name, params, bosons, fermions, pairs, positions, ast, lag_tok


class _Builder:
    """Turns an expression AST into a polynomial over the mechanics table."""

    def __init__(self, table, params, bosons, fermions):
        self.table = table
        self.params = params
        self.bosons = set(bosons)
        self.fermions = set(fermions)

    def build(self, n: Node) -> GrassmannPoly:
        t = self.table
        if isinstance(n, Num):
            return GrassmannPoly.const(t, n.value)
        if isinstance(n, Imag):
            return GrassmannPoly.const(t, 1j)
        if isinstance(n, TimeVar):
            return GrassmannPoly.const(t, sx.T)
        if isinstance(n, Name):
            if n.name in self.params:
                return GrassmannPoly.const(t, sx.Param(n.name, self.params[n.name] == "real"))
            if n.name in self.bosons:
                return GrassmannPoly.const(t, sx.Fn(n.name, 0, True))
            if n.name in self.fermions:
                return GrassmannPoly.symbol(t, n.name)
            raise _SyntaxError(f"unknown identifier {n.name!r}", n.line, n.col)
        if isinstance(n, Vel):
            if n.name in self.bosons:
                return GrassmannPoly.const(t, sx.Fn(n.name, 1, True))
            if n.name in self.fermions:
                return GrassmannPoly.symbol(t, velocity_name(n.name))
            raise _SyntaxError(f"d() needs a declared variable, got {n.name!r}", n.line, n.col)
        if isinstance(n, Neg):
            return -self.build(n.arg)
        if isinstance(n, PowOp):
            base = self.build(n.base)
            try:
                return base ** n.exp
            except (NonInvertibleError, ZeroDivisionError, ValueError) as exc:
                raise _SyntaxError(f"cannot raise to power {n.exp}: {exc}", n.line, n.col) from None
        if isinstance(n, BinOp):
            a, b = self.build(n.left), self.build(n.right)
            if n.op == "+":
                return a + b
            if n.op == "-":
                return a - b
            if n.op == "*":
                return a * b
            if n.op == "/":
                if b.parity() != "even":
                    raise _SyntaxError("division by an odd quantity", n.line, n.col)
                try:
                    return a * b.invert_even()
                except (NonInvertibleError, ZeroDivisionError):
                    raise _SyntaxError("division by zero", n.line, n.col) from None
        raise TypeError(type(n))


def _additive_terms(n: Node, sign=1):
    if isinstance(n, BinOp) and n.op in "+-":
        yield from _additive_terms(n.left, sign)
        yield from _additive_terms(n.right, sign if n.op == "+" else -sign)
    else:
        yield sign, n


def velocity_degree(n: Node, fermions) -> int:
    """Total degree in fermionic velocities, computed before canonicalization."""
    if isinstance(n, Vel):
        return 1 if n.name in fermions else 0
    if isinstance(n, Neg):
        return velocity_degree(n.arg, fermions)
    if isinstance(n, PowOp):
        return max(n.exp, 0) * velocity_degree(n.base, fermions)
    if isinstance(n, BinOp):
        a = velocity_degree(n.left, fermions)
        b = velocity_degree(n.right, fermions)
        if n.op in "+-":
            return max(a, b)
        if n.op == "*":
            return a + b
        return a + 10 * b  # velocities in a denominator are never first order
    return 0


def _check_ast(ast: Node, fermions) -> list[Diagnostic]:
    out = []
    for _, term in _additive_terms(ast):
        deg = velocity_degree(term, fermions)
        if deg > 1:
            out.append(Diagnostic(
                "error",
                "Lagrangian must be at most linear in fermionic velocities "
                f"(term has velocity degree {deg})",
                term.line, term.col,
            ))
    return out


def parse_model(text: str, check: bool = True) -> ModelSpec:
    """Parse model source. With ``check`` set, error diagnostics raise :class:`ModelError`."""
    try:
        name, params, bosons, fermions, pairs, positions, ast, lag_tok = _parse_source(text)
        table = mechanics_table(fermions, pairs)
        builder = _Builder(table, params, bosons, fermions)
        lag = builder.build(ast)
    except _SyntaxError as exc:
        if check:
            raise ModelError([exc.diag]) from None
        return ModelSpec("", {}, (), (), {}, OddSymbolTable(()), GrassmannPoly.zero(OddSymbolTable(())),
                         diagnostics=[exc.diag])
    spec = ModelSpec(name, params, tuple(bosons), tuple(fermions), pairs, table, lag, positions, ast)
    diags = _check_ast(ast, fermions)
    for sign, term in _additive_terms(ast):
        if builder.build(term).is_zero() and not (isinstance(term, Num) and term.value == 0):
            diags.append(Diagnostic("warning", "term is identically zero after canonicalization",
                                    term.line, term.col))
    spec.diagnostics = diags
    spec.diagnostics.extend(validate(spec))
    if check and spec.errors:
        raise ModelError(spec.errors)
    return spec


def load_model(path, check: bool = True) -> ModelSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), check=check)


def parse_expression(text: str, spec: ModelSpec) -> GrassmannPoly:
    """Parse a standalone expression against the declarations of ``spec``."""
    try:
        p = _Parser(text)
        ast = p.expr()
        if p.tok.kind != "EOF":
            raise p.error(f"unexpected {p.tok.text!r}")
        return _Builder(spec.table, spec.params, spec.bosons, spec.fermions).build(ast)
    except _SyntaxError as exc:
        raise ModelError([exc.diag]) from None


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def kinetic_metric(spec: ModelSpec) -> list[list[sx.Expr]] | None:
    """g^{ab} with L_kin = (i/2) g^{ab} psi_a d(psi_b), or None if not of that form."""
    mu = spec.mu
    if mu == 0:
        return []
    vel_idx = {spec.table.index(v) for v in spec.velocities}
    psi_idx = {spec.table.index(f): a for a, f in enumerate(spec.fermions)}
    g = [[sx.ZERO] * mu for _ in range(mu)]
    found = False
    for m, c in spec.lagrangian.items():
        idx = [j for j in range(spec.table.size) if m >> j & 1]
        vs = [j for j in idx if j in vel_idx]
        if not vs:
            continue
        if len(idx) != 2 or len(vs) != 1 or idx[0] not in psi_idx:
            return None
        if not sx.is_constant(c):
            return None
        a = psi_idx[idx[0]]
        b = spec.velocities.index(spec.table.names[vs[0]])
        g[a][b] = sx.mul(-2j, c)
        found = True
    return g if found else None


def validate(spec: ModelSpec) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    lag = spec.lagrangian
    line, col = (spec.ast.line, spec.ast.col) if spec.ast is not None else (0, 0)
    if lag.parity() != "even":
        out.append(Diagnostic("error", f"Lagrangian must be even, got {lag.parity()} parity", line, col))
    if spec.velocities and lag.degree_in(spec.velocities) > 1:
        out.append(Diagnostic("error", "Lagrangian is not first order in the fermionic velocities", line, col))
    if spec.momenta and lag.degree_in(spec.momenta) > 0:
        out.append(Diagnostic("error", "Lagrangian may not contain momentum symbols", line, col))

    g = kinetic_metric(spec)
    spec.metric = g
    if g is None:
        out.append(Diagnostic("warning", "no standard kinetic term (i/2) g psi d(psi) recognized", line, col))
    elif g:
        text = json.dumps([[sx.to_text(x) for x in row] for row in g])
        out.append(Diagnostic("info", f"kinetic metric g = {text}", line, col))
        if any(not _is_real_const(x) for row in g for x in row):
            out.append(Diagnostic("warning", "kinetic metric is not a real matrix", line, col))

    if spec.pairs:
        diff = (lag.conjugate() - lag).expand()
        spec.reality = "pass" if diff.is_zero() else "fail"
        if spec.reality == "fail":
            out.append(Diagnostic("warning", "Lagrangian is not real under the declared conjugation", line, col))
    else:
        spec.reality = "skipped"
    return out


def _is_real_const(x: sx.Expr) -> bool:
    if isinstance(x, sx.Const):
        return x.value.imag == 0
    return sx.conj(x) == x


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

def pretty_print(spec: ModelSpec) -> str:
    lines = [f"model {spec.name} {{"]
    for nm, kind in spec.params.items():
        lines.append(f"    param {nm} : {kind};")
    for b in spec.bosons:
        lines.append(f"    boson {b};")
    done = set()
    for f in spec.fermions:
        if f in done:
            continue
        if f in spec.pairs and spec.pairs[f][1] != f:
            s, other = spec.pairs[f]
            lines.append(f"    fermion {f} conj {'-' if s < 0 else ''}{other};")
            done |= {f, other}
        else:
            lines.append(f"    fermion {f};")
            done.add(f)
    lines.append(f"    lagrangian {{ {spec.lagrangian.to_text()} }}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def structurally_equal(a: ModelSpec, b: ModelSpec) -> bool:
    return (
        a.name == b.name
        and a.params == b.params
        and a.bosons == b.bosons
        and a.fermions == b.fermions
        and a.pairs == b.pairs
        and a.lagrangian == b.lagrangian
    )
