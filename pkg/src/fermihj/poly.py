"""
Grassmann polynomials over named odd symbols with symbolic scalar coefficients.

This is the representation used for Lagrangians, Hamiltonians and generating
functions. The monomial bookkeeping is shared with :mod:`fermihj.grassmann`;
coefficients are :class:`fermihj.scalar.Expr` trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import scalar as sx
from .grassmann import (
    CONSTANT,
    DYNAMICAL,
    GeneratorBasis,
    GrassmannElement,
    NonInvertibleError,
    ParityError,
    indices_of,
    left_sign,
    ordered_product,
    product_sign,
    right_sign,
)

ROLES = ("coordinate", "velocity", "momentum", "constant", "endpoint", "generator")
_DYNAMICAL_ROLES = {"coordinate", "velocity", "momentum"}


class TableMismatchError(ValueError):
    pass


class UnknownSymbolError(KeyError):
    pass


# ---------------------------------------------------------------------------
# symbol table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OddSymbolTable:
    """Ordered odd symbols with a role each and a signed conjugation pairing."""

    names: tuple[str, ...]
    roles: tuple[str, ...] = ()
    conj_map: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        n = len(self.names)
        if not self.roles:
            object.__setattr__(self, "roles", ("generator",) * n)
        for r in self.roles:
            if r not in ROLES:
                raise ValueError(f"unknown symbol role {r!r}")
        # the basis constructor validates the pairing
        basis = GeneratorBasis(
            self.names,
            self.conj_map,
            tuple(DYNAMICAL if r in _DYNAMICAL_ROLES else CONSTANT for r in self.roles),
        )
        object.__setattr__(self, "conj_map", basis.conj_map)
        object.__setattr__(self, "_basis", basis)
        object.__setattr__(self, "_index", {nm: j for j, nm in enumerate(self.names)})

    @classmethod
    def build(cls, entries: Sequence[tuple[str, str]],
              pairs: Mapping[str, tuple[int, str]] | None = None) -> "OddSymbolTable":
        """``entries`` is a list of (name, role); ``pairs`` maps name -> (sign, partner)."""
        names = tuple(nm for nm, _ in entries)
        roles = tuple(r for _, r in entries)
        idx = {nm: j for j, nm in enumerate(names)}
        conj = [(1, j) for j in range(len(names))]
        for nm, (s, other) in (pairs or {}).items():
            conj[idx[nm]] = (s, idx[other])
            conj[idx[other]] = (s, idx[nm])
        return cls(names, roles, tuple(conj))

    @property
    def basis(self) -> GeneratorBasis:
        return self._basis

    @property
    def size(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownSymbolError(f"unknown odd symbol {name!r}; table has {list(self.names)}") from None

    def __contains__(self, name) -> bool:
        return name in self._index

    def with_role(self, role: str) -> list[str]:
        return [nm for nm, r in zip(self.names, self.roles) if r == role]

    def describe(self, mask: int) -> str:
        return "*".join(self.names[j] for j in indices_of(mask)) if mask else "1"

    def mask(self, names: Sequence[str]) -> tuple[int, int]:
        return ordered_product([self.index(n) for n in names])


# ---------------------------------------------------------------------------
# polynomial
# ---------------------------------------------------------------------------

def _mono_key(m: int):
    return (m.bit_count(), indices_of(m))


class GrassmannPoly:
    """Immutable map from canonical monomial (bitmask) to a scalar expression."""

    __slots__ = ("table", "_terms")

    def __init__(self, table: OddSymbolTable, terms: Mapping[int, Any] | None = None):
        self.table = table
        clean = {}
        for m, c in (terms or {}).items():
            c = sx.as_expr(c)
            if not c.is_zero:
                clean[m] = c
        self._terms = clean

    # -- constructors ----------------------------------------------------------

    @classmethod
    def zero(cls, table) -> "GrassmannPoly":
        return cls(table, {})

    @classmethod
    def const(cls, table, c) -> "GrassmannPoly":
        return cls(table, {0: sx.as_expr(c)})

    @classmethod
    def symbol(cls, table, name: str, coeff=1) -> "GrassmannPoly":
        return cls(table, {1 << table.index(name): sx.as_expr(coeff)})

    @classmethod
    def monomial(cls, table, names: Sequence[str], coeff=1) -> "GrassmannPoly":
        s, m = table.mask(names)
        return cls(table, {m: sx.mul(s, coeff)} if s else {})

    # -- access ----------------------------------------------------------------

    @property
    def terms(self) -> dict[int, sx.Expr]:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items(), key=lambda kv: _mono_key(kv[0]))

    def coefficient(self, names: Sequence[str] | int = ()) -> sx.Expr:
        if isinstance(names, int):
            return self._terms.get(names, sx.ZERO)
        s, m = self.table.mask(names)
        if not s:
            return sx.ZERO
        return sx.mul(s, self._terms.get(m, sx.ZERO))

    @property
    def scalar_part(self) -> sx.Expr:
        return self._terms.get(0, sx.ZERO)

    def is_zero(self) -> bool:
        return not self._terms

    def is_scalar(self) -> bool:
        return all(m == 0 for m in self._terms)

    def parity(self) -> str:
        kinds = {m.bit_count() & 1 for m in self._terms}
        if not kinds or kinds == {0}:
            return "even"
        if kinds == {1}:
            return "odd"
        return "mixed"

    def symbols(self) -> set[str]:
        mask = 0
        for m in self._terms:
            mask |= m
        return {self.table.names[j] for j in indices_of(mask)}

    def degree_in(self, names: Iterable[str]) -> int:
        sel = 0
        for n in names:
            sel |= 1 << self.table.index(n)
        return max(((m & sel).bit_count() for m in self._terms), default=0)

    def atoms(self) -> set:
        out = set()
        for c in self._terms.values():
            out |= sx.atoms(c)
        return out

    # -- arithmetic ------------------------------------------------------------

    def _check(self, other: "GrassmannPoly"):
        if other.table is not self.table and other.table != self.table:
            raise TableMismatchError(
                f"symbol table mismatch: {self.table.names} vs {other.table.names}"
            )

    def _coerce(self, other):
        if isinstance(other, GrassmannPoly):
            self._check(other)
            return other
        if isinstance(other, (int, float, complex, np.number, sx.Expr)):
            return GrassmannPoly.const(self.table, other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = sx.add(out[m], c) if m in out else c
        return GrassmannPoly(self.table, out)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannPoly(self.table, {m: sx.neg(c) for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number, sx.Expr)):
            c = sx.as_expr(other)
            return GrassmannPoly(self.table, {m: sx.mul(v, c) for m, v in self._terms.items()})
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return poly_multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number, sx.Expr)):
            c = sx.as_expr(other)
            return GrassmannPoly(self.table, {m: sx.mul(c, v) for m, v in self._terms.items()})
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex, np.number, sx.Expr)):
            return self * sx.div(1, other)
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return poly_multiply(self, other.invert_even())

    def __pow__(self, n: int):
        if n < 0:
            return self.invert_even() ** (-n)
        out = GrassmannPoly.const(self.table, 1)
        for _ in range(n):
            out = poly_multiply(out, self)
        return out

    def __eq__(self, other):
        if not isinstance(other, GrassmannPoly):
            return NotImplemented
        return self.table == other.table and self._terms == other._terms

    __hash__ = None

    # -- calculus --------------------------------------------------------------

    def derive_left(self, sym: str) -> "GrassmannPoly":
        g = self.table.index(sym)
        bit = 1 << g
        out = {}
        for m, c in self._terms.items():
            if m & bit:
                out[m ^ bit] = sx.mul(left_sign(g, m), c)
        return GrassmannPoly(self.table, out)

    def derive_right(self, sym: str) -> "GrassmannPoly":
        g = self.table.index(sym)
        bit = 1 << g
        out = {}
        for m, c in self._terms.items():
            if m & bit:
                out[m ^ bit] = sx.mul(right_sign(g, m), c)
        return GrassmannPoly(self.table, out)

    def derive(self, sym: str, convention: str = "left") -> "GrassmannPoly":
        if convention == "left":
            return self.derive_left(sym)
        if convention == "right":
            return self.derive_right(sym)
        raise ValueError(f"unknown derivative convention {convention!r}")

    def partial_t(self, frozen: Iterable[str] = ()) -> "GrassmannPoly":
        """Time derivative of the coefficients only; odd symbols are untouched."""
        frozen = tuple(frozen)
        return self.map_coefficients(lambda c: sx.diff_t(c, frozen))

    def total_dt(self, velocity_of: Mapping[str, str], frozen: Iterable[str] = ()) -> "GrassmannPoly":
        """d/dt acting on coefficients and on odd symbols through ``velocity_of``.

        d/dt is an even derivation, so no signs arise when it passes odd factors.
        """
        out = self.partial_t(frozen)
        for m, c in self._terms.items():
            idx = indices_of(m)
            for pos, j in enumerate(idx):
                name = self.table.names[j]
                if name not in velocity_of:
                    continue
                v = self.table.index(velocity_of[name])
                new = list(idx)
                new[pos] = v
                s, mm = ordered_product(new)
                if s:
                    out = out + GrassmannPoly(self.table, {mm: sx.mul(s, c)})
        return out

    # -- structural maps -------------------------------------------------------

    def map_coefficients(self, f) -> "GrassmannPoly":
        return GrassmannPoly(self.table, {m: f(c) for m, c in self._terms.items()})

    def scalar_subs(self, mapping: Mapping) -> "GrassmannPoly":
        return self.map_coefficients(lambda c: sx.subs(c, mapping))

    def expand(self) -> "GrassmannPoly":
        return self.map_coefficients(sx.expand)

    def conjugate(self) -> "GrassmannPoly":
        cmap = self.table.conj_map
        out: dict[int, sx.Expr] = {}
        for m, c in self._terms.items():
            sign, mapped = 1, []
            for j in reversed(indices_of(m)):
                s, k = cmap[j]
                sign *= s
                mapped.append(k)
            s, mm = ordered_product(mapped)
            if s:
                term = sx.mul(sign * s, sx.conj(c))
                out[mm] = sx.add(out[mm], term) if mm in out else term
        return GrassmannPoly(self.table, out)

    def substitute(self, bindings: Mapping[str, "GrassmannPoly"],
                   target: OddSymbolTable | None = None,
                   atoms: Mapping[sx.Expr, "GrassmannPoly"] | None = None) -> "GrassmannPoly":
        """Replace odd symbols by polynomials (over ``target``).

        Unbound symbols are carried over by name; they must exist in ``target``.
        Bindings must be odd so that the graded structure is preserved.
        ``atoms`` optionally replaces scalar atoms inside coefficients by even
        polynomials (used for Grassmann-valued bosons).
        """
        target = target or self.table
        images: dict[int, GrassmannPoly] = {}
        for name, p in bindings.items():
            j = self.table.index(name)
            if p.table != target:
                raise TableMismatchError(f"binding for {name!r} is not over the target table")
            if p.parity() != "odd" and not p.is_zero():
                raise ParityError(f"binding for odd symbol {name!r} has {p.parity()} parity")
            images[j] = p
        for j, name in enumerate(self.table.names):
            if j not in images and any(m >> j & 1 for m in self._terms):
                if name not in target:
                    raise UnknownSymbolError(f"symbol {name!r} has no binding and is absent from the target table")
                images[j] = GrassmannPoly.symbol(target, name)
        out = GrassmannPoly.zero(target)
        for m, c in self.items():
            term = lift(c, target, atoms) if atoms else GrassmannPoly.const(target, c)
            for j in indices_of(m):
                term = poly_multiply(term, images[j])
                if term.is_zero():
                    break
            out = out + term
        return out

    def retable(self, target: OddSymbolTable) -> "GrassmannPoly":
        """Same polynomial expressed over another table (symbols matched by name)."""
        return self.substitute({}, target)

    def invert_even(self) -> "GrassmannPoly":
        if self.parity() != "even":
            raise ParityError(f"invert_even requires an even polynomial, got {self.parity()} parity")
        a0 = self.scalar_part
        if a0.is_zero:
            raise NonInvertibleError("even polynomial with structurally zero scalar part is not invertible")
        inv0 = sx.power(a0, -1)
        nil = GrassmannPoly(self.table, {m: c for m, c in self._terms.items() if m})
        step = nil * sx.neg(inv0)
        total = GrassmannPoly.const(self.table, 1)
        pw = GrassmannPoly.const(self.table, 1)
        while True:
            pw = poly_multiply(pw, step)
            if pw.is_zero():
                break
            total = total + pw
        return total * inv0

    # -- numeric ---------------------------------------------------------------

    def evaluate_coefficients(self, env: sx.Env) -> dict[int, Any]:
        return {m: sx.evaluate(c, env) for m, c in self._terms.items()}

    def evaluate(self, env: sx.Env, images: Mapping[str, GrassmannElement] | None = None,
                 basis: GeneratorBasis | None = None) -> GrassmannElement:
        """Numeric element at a single time; odd symbols map to ``images``."""
        if images is None:
            basis = self.table.basis
            vals = self.evaluate_coefficients(env)
            return GrassmannElement(basis, {m: complex(v) for m, v in vals.items()})
        if basis is None:
            basis = next(iter(images.values())).basis
        out = basis.zero()
        for m, c in self._terms.items():
            term = basis.scalar(complex(sx.evaluate(c, env)))
            for j in indices_of(m):
                name = self.table.names[j]
                if name not in images:
                    raise sx.EvaluationError(f"no numeric image for odd symbol {name!r}")
                term = term * images[name]
            out = out + term
        return out

    # -- text ------------------------------------------------------------------

    def to_text(self) -> str:
        if not self._terms:
            return "0"
        out = ""
        for k, (m, c) in enumerate(self.items()):
            s = _term_text(c, self.table.describe(m) if m else "")
            if k == 0:
                out = s
            elif s.startswith("-"):
                out += " - " + s[1:]
            else:
                out += " + " + s
        return out

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"GrassmannPoly({self.to_text()})"


def _term_text(c: sx.Expr, mono: str) -> str:
    if not mono:
        return sx.to_text(c)
    if c.is_one:
        return mono
    if isinstance(c, sx.Const) and c.value == -1:
        return "-" + mono
    text = sx.to_text(c)
    if isinstance(c, sx.Add):
        text = f"({text})"
    elif isinstance(c, sx.Mul) and "/" in text:
        # keep a/b*psi from reading as a/(b*psi)
        text = f"({text})" if not text.startswith("-") else f"-({text[1:]})"
    return f"{text}*{mono}"


def poly_multiply(a: GrassmannPoly, b: GrassmannPoly) -> GrassmannPoly:
    a._check(b)
    out: dict[int, sx.Expr] = {}
    for ma, ca in a._terms.items():
        for mb, cb in b._terms.items():
            s = product_sign(ma, mb)
            if s:
                m = ma | mb
                term = sx.mul(s, ca, cb)
                out[m] = sx.add(out[m], term) if m in out else term
    return GrassmannPoly(a.table, out)


def poly_add(a: GrassmannPoly, b: GrassmannPoly) -> GrassmannPoly:
    a._check(b)
    return a + b


@dataclass(frozen=True)
class MatchedEquation:
    """Scalar equation ``expr = 0`` attached to an odd monomial."""

    monomial: str
    expr: sx.Expr

    def to_text(self) -> str:
        return f"[{self.monomial}] {sx.to_text(self.expr)} = 0"


def match_monomials(lhs: GrassmannPoly, rhs: GrassmannPoly, expand: bool = False) -> list[MatchedEquation]:
    """One scalar equation per monomial surviving in ``lhs - rhs``."""
    diff = lhs - rhs
    if expand:
        diff = diff.expand()
    return [MatchedEquation(diff.table.describe(m), c) for m, c in diff.items()]


def lift(expr: sx.Expr, table: OddSymbolTable, mapping: Mapping[sx.Expr, GrassmannPoly]) -> GrassmannPoly:
    """Rebuild a scalar expression over ``table`` with some atoms replaced by polynomials."""
    if not any(a in mapping for a in sx.atoms(expr)):
        return GrassmannPoly.const(table, expr)

    def go(e) -> GrassmannPoly:
        if e in mapping:
            return mapping[e]
        if isinstance(e, (sx.Const, sx.Param, sx.Time, sx.Fn)) or not any(a in mapping for a in sx.atoms(e)):
            return GrassmannPoly.const(table, e)
        if isinstance(e, sx.Add):
            out = GrassmannPoly.zero(table)
            for t in e.terms:
                out = out + go(t)
            return out
        if isinstance(e, sx.Mul):
            out = GrassmannPoly.const(table, e.coeff)
            for f in e.factors:
                out = out * go(f)
            return out
        if isinstance(e, sx.Pow):
            return go(e.base) ** e.exp
        if isinstance(e, sx.Conj):
            return go(e.arg).conjugate()
        raise TypeError(type(e))

    return go(expr)
