"""
Scalar (commuting) expression trees used as coefficients of Grassmann polynomials.

Trees are immutable and built through smart constructors that keep a light
normal form: sums and products are flattened, literals folded, identical
factors merged into integer powers, and syntactically identical terms
cancelled. Nothing stronger than that is attempted; identities that need real
algebra are checked numerically.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

ZERO_TOL = 1e-14
FD_STEP = 1e-6


class EvaluationError(ValueError):
    pass


class Expr:
    """Base class. Subclasses are frozen dataclasses."""

    __slots__ = ()

    # arithmetic builds normalized trees
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)

    def __str__(self):
        return to_text(self)

    @property
    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0

    @property
    def is_one(self) -> bool:
        return isinstance(self, Const) and self.value == 1


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True, eq=True)
class Param(Expr):
    name: str
    real: bool = True


@dataclass(frozen=True, eq=True)
class Time(Expr):
    pass


@dataclass(frozen=True, eq=True)
class Fn(Expr):
    """Named function of time, with a derivative order (s, s', s'', ...)."""

    name: str
    order: int = 0
    real: bool = False


@dataclass(frozen=True, eq=True)
class Add(Expr):
    terms: tuple


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    coeff: complex
    factors: tuple


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exp: int


@dataclass(frozen=True, eq=True)
class Conj(Expr):
    arg: Expr


ZERO = Const(0)
ONE = Const(1)
I = Const(1j)
T = Time()


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, complex, np.number)):
        return Const(complex(x))
    raise TypeError(f"cannot convert {type(x).__name__} to a scalar expression")


# ---------------------------------------------------------------------------
# ordering
# ---------------------------------------------------------------------------

_RANK = {Const: 0, Time: 1, Param: 2, Fn: 3, Conj: 4, Pow: 5, Mul: 6, Add: 7}


@functools.lru_cache(maxsize=None)
def sort_key(e: Expr) -> tuple:
    if isinstance(e, Pow):
        # keep powers next to their base
        return sort_key(e.base) + (e.exp,)
    return (_RANK[type(e)], to_text(e))


# ---------------------------------------------------------------------------
# smart constructors
# ---------------------------------------------------------------------------

def _split_coeff(e: Expr) -> tuple[complex, Expr]:
    if isinstance(e, Mul):
        core = e.factors[0] if len(e.factors) == 1 else Mul(1 + 0j, e.factors)
        return e.coeff, core
    return 1 + 0j, e


def add(*xs) -> Expr:
    const = 0j
    acc: dict[Expr, complex] = {}
    order: list[Expr] = []
    stack = [as_expr(x) for x in reversed(xs)]
    while stack:
        x = stack.pop()
        if isinstance(x, Add):
            stack.extend(reversed(x.terms))
            continue
        if isinstance(x, Const):
            const += x.value
            continue
        c, core = _split_coeff(x)
        if core not in acc:
            acc[core] = 0j
            order.append(core)
        acc[core] += c
    terms = []
    for core in order:
        c = acc[core]
        if abs(c) <= ZERO_TOL:
            continue
        terms.append(mul(Const(c), core))
    terms.sort(key=sort_key)
    if abs(const) <= ZERO_TOL:
        const = 0j
    if const != 0:
        terms.append(Const(const))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(tuple(terms))


def mul(*xs) -> Expr:
    coeff = 1 + 0j
    exps: dict[Expr, int] = {}
    order: list[Expr] = []
    stack = [as_expr(x) for x in reversed(xs)]
    while stack:
        x = stack.pop()
        if isinstance(x, Const):
            coeff *= x.value
            continue
        if isinstance(x, Mul):
            coeff *= x.coeff
            stack.extend(reversed(x.factors))
            continue
        base, n = (x.base, x.exp) if isinstance(x, Pow) else (x, 1)
        if base not in exps:
            exps[base] = 0
            order.append(base)
        exps[base] += n
    if coeff == 0:
        return ZERO
    factors = []
    for base in order:
        n = exps[base]
        if n == 0:
            continue
        factors.append(base if n == 1 else Pow(base, n))
    factors.sort(key=sort_key)
    if not factors:
        return Const(coeff)
    if coeff == 1 and len(factors) == 1:
        return factors[0]
    return Mul(coeff, tuple(factors))


def neg(x: Expr) -> Expr:
    return mul(Const(-1), x)


def power(b, n: int) -> Expr:
    if not isinstance(n, (int, np.integer)):
        raise TypeError("only integer powers are supported")
    n = int(n)
    b = as_expr(b)
    if n == 0:
        return ONE
    if n == 1:
        return b
    if isinstance(b, Const):
        if b.value == 0 and n < 0:
            raise ZeroDivisionError("structural division by zero")
        return Const(b.value ** n)
    if isinstance(b, Pow):
        return power(b.base, b.exp * n)
    if isinstance(b, Mul):
        return mul(Const(b.coeff ** n), *(power(f, n) for f in b.factors))
    return Pow(b, n)


def div(a, b) -> Expr:
    b = as_expr(b)
    if b.is_zero:
        raise ZeroDivisionError("structural division by zero")
    return mul(a, power(b, -1))


def conj(x) -> Expr:
    x = as_expr(x)
    if isinstance(x, Const):
        return Const(x.value.conjugate())
    if isinstance(x, Time):
        return x
    if isinstance(x, (Param, Fn)):
        return x if x.real else Conj(x)
    if isinstance(x, Conj):
        return x.arg
    if isinstance(x, Add):
        return add(*(conj(t) for t in x.terms))
    if isinstance(x, Mul):
        return mul(Const(x.coeff.conjugate()), *(conj(f) for f in x.factors))
    if isinstance(x, Pow):
        return power(conj(x.base), x.exp)
    raise TypeError(type(x))


def fn(name: str, order: int = 0, real: bool = False) -> Fn:
    return Fn(name, order, real)


def param(name: str, real: bool = True) -> Param:
    return Param(name, real)


# ---------------------------------------------------------------------------
# calculus and rewriting
# ---------------------------------------------------------------------------

def _children_rebuild(e: Expr, f: Callable[[Expr], Expr]) -> Expr:
    if isinstance(e, Add):
        return add(*(f(t) for t in e.terms))
    if isinstance(e, Mul):
        return mul(Const(e.coeff), *(f(x) for x in e.factors))
    if isinstance(e, Pow):
        return power(f(e.base), e.exp)
    if isinstance(e, Conj):
        return conj(f(e.arg))
    return e


def diff_t(e: Expr, frozen: Iterable[str] = ()) -> Expr:
    """Total time derivative; functions named in ``frozen`` are held fixed."""
    frozen = frozenset(frozen)
    return _diff(e, None, frozen)


def diff(e: Expr, atom: Expr) -> Expr:
    """Partial derivative with respect to an atom (Fn, Param or Time)."""
    if not isinstance(atom, (Fn, Param, Time)):
        raise TypeError("can only differentiate with respect to an atom")
    return _diff(e, atom, frozenset())


def _diff(e: Expr, atom, frozen) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if atom is None:
        if isinstance(e, Time):
            return ONE
        if isinstance(e, Param):
            return ZERO
        if isinstance(e, Fn):
            return ZERO if e.name in frozen else Fn(e.name, e.order + 1, e.real)
    elif isinstance(e, (Time, Param, Fn)):
        return ONE if e == atom else ZERO
    if isinstance(e, Add):
        return add(*(_diff(t, atom, frozen) for t in e.terms))
    if isinstance(e, Mul):
        out = []
        fs = e.factors
        for i, f in enumerate(fs):
            df = _diff(f, atom, frozen)
            if df.is_zero:
                continue
            out.append(mul(Const(e.coeff), df, *fs[:i], *fs[i + 1:]))
        return add(*out)
    if isinstance(e, Pow):
        db = _diff(e.base, atom, frozen)
        if db.is_zero:
            return ZERO
        return mul(Const(e.exp), power(e.base, e.exp - 1), db)
    if isinstance(e, Conj):
        if atom is not None and isinstance(atom, (Fn, Param)) and e.arg == atom:
            # conj(x) is treated as independent of x
            return ZERO
        return conj(_diff(e.arg, atom, frozen))
    raise TypeError(type(e))


def subs(e: Expr, mapping: Mapping[Expr, Any]) -> Expr:
    """Replace atoms (Fn/Param/Time nodes) by expressions."""
    if not mapping:
        return e
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    return _subs(e, mapping)


def _subs(e, mapping):
    if isinstance(e, (Fn, Param, Time)):
        return mapping.get(e, e)
    if isinstance(e, Const):
        return e
    return _children_rebuild(e, lambda x: _subs(x, mapping))


def atoms(e: Expr) -> set:
    out = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, (Fn, Param, Time)):
            out.add(x)
        elif isinstance(x, Add):
            stack.extend(x.terms)
        elif isinstance(x, Mul):
            stack.extend(x.factors)
        elif isinstance(x, Pow):
            stack.append(x.base)
        elif isinstance(x, Conj):
            stack.append(x.arg)
    return out


def is_constant(e: Expr) -> bool:
    """True when the expression has no time dependence (params allowed)."""
    return all(isinstance(a, Param) for a in atoms(e))


def expand(e: Expr) -> Expr:
    """Distribute products over sums (non-negative integer powers of sums too)."""
    if isinstance(e, Add):
        return add(*(expand(t) for t in e.terms))
    if isinstance(e, Mul):
        parts = [[Const(e.coeff)]]
        for f in e.factors:
            f = expand(f)
            terms = f.terms if isinstance(f, Add) else (f,)
            parts = [p + [t] for p in parts for t in terms]
        return add(*(mul(*p) for p in parts))
    if isinstance(e, Pow):
        b = expand(e.base)
        if isinstance(b, Add) and e.exp > 1:
            return expand(mul(*([b] * e.exp)))
        return power(b, e.exp)
    if isinstance(e, Conj):
        return conj(expand(e.arg))
    return e


# ---------------------------------------------------------------------------
# numeric evaluation
# ---------------------------------------------------------------------------

@dataclass
class FunctionSpec:
    """Numeric realization of a named time function.

    ``derivatives[n-1]`` is the n-th derivative; missing orders fall back to
    central differences of the next lower order.
    """

    value: Callable[[Any], Any]
    derivatives: Sequence[Callable[[Any], Any]] = ()

    def __call__(self, t, order: int = 0):
        if order == 0:
            return self.value(t)
        if order <= len(self.derivatives):
            return self.derivatives[order - 1](t)
        h = FD_STEP if order == 1 else FD_STEP ** (1.0 / order)
        return (self(t + h, order - 1) - self(t - h, order - 1)) / (2 * h)

    @classmethod
    def constant(cls, c) -> "FunctionSpec":
        c = complex(c)
        return cls(lambda t: np.full(np.shape(t), c) if np.ndim(t) else c,
                   (lambda t: np.zeros(np.shape(t), complex) if np.ndim(t) else 0j,) * 3)

    @classmethod
    def tabulated(cls, grid, values) -> "FunctionSpec":
        grid = np.asarray(grid, float)
        values = np.asarray(values, complex)

        def f(t):
            return np.interp(t, grid, values.real) + 1j * np.interp(t, grid, values.imag)

        return cls(f)


@dataclass
class Env:
    """Bindings for numeric evaluation.

    ``values`` maps ``(name, order)`` to already-computed values and takes
    precedence over ``functions``.
    """

    params: Mapping[str, Any] = None
    functions: Mapping[str, Any] = None
    t: Any = 0.0
    values: Mapping[tuple[str, int], Any] = None

    def fn_value(self, name: str, order: int):
        if self.values and (name, order) in self.values:
            return self.values[(name, order)]
        spec = (self.functions or {}).get(name)
        if spec is None:
            raise EvaluationError(f"unbound function {name!r} (derivative order {order})")
        if not isinstance(spec, FunctionSpec):
            if callable(spec):
                spec = FunctionSpec(spec)
            else:
                spec = FunctionSpec.constant(spec)
        return spec(self.t, order)

    def param_value(self, name: str):
        if not self.params or name not in self.params:
            raise EvaluationError(f"unbound parameter {name!r}")
        return self.params[name]


def _conj_value(v):
    if hasattr(v, "conjugate") and not isinstance(v, np.ndarray):
        return v.conjugate()
    return np.conj(v)


def _nonzero_check(v):
    if isinstance(v, np.ndarray):
        if np.any(v == 0):
            raise EvaluationError("division by zero in numeric evaluation")
    elif isinstance(v, (int, float, complex, np.number)):
        if v == 0:
            raise EvaluationError("division by zero in numeric evaluation")


def evaluate(e: Expr, env: Env):
    if isinstance(e, Const):
        v = e.value
        return v.real if v.imag == 0 else v
    if isinstance(e, Param):
        return env.param_value(e.name)
    if isinstance(e, Time):
        return env.t
    if isinstance(e, Fn):
        return env.fn_value(e.name, e.order)
    if isinstance(e, Add):
        out = evaluate(e.terms[0], env)
        for x in e.terms[1:]:
            out = out + evaluate(x, env)
        return out
    if isinstance(e, Mul):
        out = evaluate(e.factors[0], env)
        for x in e.factors[1:]:
            out = out * evaluate(x, env)
        return e.coeff * out if e.coeff != 1 else out
    if isinstance(e, Pow):
        b = evaluate(e.base, env)
        if e.exp < 0:
            _nonzero_check(b)
            if isinstance(b, (int, float, complex, np.number, np.ndarray)):
                return 1 / (b ** (-e.exp))
        return b ** e.exp
    if isinstance(e, Conj):
        return _conj_value(evaluate(e.arg, env))
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# code generation for fast repeated evaluation
# ---------------------------------------------------------------------------

def to_python(e: Expr, names: Mapping[tuple[str, int], str], params: Mapping[str, str] | None = None) -> str:
    """Python source for ``e``; ``names`` maps (fn name, order) to a source fragment."""
    params = params or {}

    def go(x):
        if isinstance(x, Const):
            return repr(x.value)
        if isinstance(x, Param):
            if x.name not in params:
                raise EvaluationError(f"unbound parameter {x.name!r}")
            return params[x.name]
        if isinstance(x, Time):
            return "t"
        if isinstance(x, Fn):
            key = (x.name, x.order)
            if key not in names:
                raise EvaluationError(f"unbound function {x.name!r} (order {x.order})")
            return names[key]
        if isinstance(x, Add):
            return "(" + " + ".join(go(y) for y in x.terms) + ")"
        if isinstance(x, Mul):
            return "(" + " * ".join([repr(x.coeff)] + [go(y) for y in x.factors]) + ")"
        if isinstance(x, Pow):
            if x.exp < 0:
                return f"(1 / ({go(x.base)}) ** {-x.exp})"
            return f"(({go(x.base)}) ** {x.exp})"
        if isinstance(x, Conj):
            return f"np.conj({go(x.arg)})"
        raise TypeError(type(x))

    return go(e)


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

def format_number(v: complex) -> str:
    v = complex(v)
    re, im = v.real, v.imag
    if im == 0:
        return _fmt_real(re)
    if re == 0:
        if im == 1:
            return "i"
        if im == -1:
            return "-i"
        return f"{_fmt_real(im)}*i"
    sign = "+" if im >= 0 else "-"
    mag = abs(im)
    imag = "i" if mag == 1 else f"{_fmt_real(mag)}*i"
    return f"({_fmt_real(re)} {sign} {imag})"


def _fmt_real(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def fn_text(name: str, order: int) -> str:
    out = name
    for _ in range(order):
        out = f"d({out})"
    return out


def _atom_text(e: Expr) -> str:
    """Text with parentheses when needed inside a product."""
    s = to_text(e)
    if isinstance(e, Add):
        return f"({s})"
    if isinstance(e, Const) and (s.startswith("-") or "*" in s):
        return f"({s})"
    return s


def _pow_text(base: Expr, n: int) -> str:
    b = _atom_text(base)
    if isinstance(base, (Mul, Pow)):
        b = f"({to_text(base)})"
    return b if n == 1 else f"{b}^{n}"


@functools.lru_cache(maxsize=None)
def to_text(e: Expr) -> str:
    if isinstance(e, Const):
        return format_number(e.value)
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Time):
        return "t"
    if isinstance(e, Fn):
        return fn_text(e.name, e.order)
    if isinstance(e, Conj):
        return f"conj({to_text(e.arg)})"
    if isinstance(e, Pow):
        if e.exp < 0:
            return f"1/{_pow_text(e.base, -e.exp)}"
        return _pow_text(e.base, e.exp)
    if isinstance(e, Mul):
        num = [f for f in e.factors if not (isinstance(f, Pow) and f.exp < 0)]
        den = [f for f in e.factors if isinstance(f, Pow) and f.exp < 0]
        c = e.coeff
        lead = ""
        parts = []
        if c == -1:
            lead = "-"
        elif c != 1:
            cs = format_number(c)
            if cs.startswith("-") and "*" not in cs and "(" not in cs:
                lead = "-"
                parts.append(cs[1:])
            else:
                parts.append(cs if not (cs.startswith("-") and "*" in cs) else f"({cs})")
        parts.extend(_pow_text(f.base, f.exp) if isinstance(f, Pow) else _atom_text(f) for f in num)
        text = "*".join(parts) if parts else "1"
        if den:
            dens = [_pow_text(f.base, -f.exp) for f in den]
            dtext = dens[0] if len(dens) == 1 else "(" + "*".join(dens) + ")"
            text = f"{text}/{dtext}"
        return lead + text
    if isinstance(e, Add):
        out = ""
        for k, t in enumerate(e.terms):
            s = to_text(t)
            if k == 0:
                out = s
            elif s.startswith("-"):
                out += " - " + s[1:]
            else:
                out += " + " + s
        return out
    raise TypeError(type(e))
