"""
Finite Grassmann (exterior) algebra over named odd generators.

Elements are sparse maps from canonical monomials to complex coefficients.
A monomial is stored as a bitmask over the generator indices; bit ``j`` set
means the generator ``j`` is present. Canonical order is increasing index,
and the permutation sign of any reordering is absorbed into the coefficient.
"""

from __future__ import annotations

__all__ = [
    "GeneratorBasis",
    "GrassmannElement",
    "BasisMismatchError",
    "ParityError",
    "NonInvertibleError",
    "PRUNE_TOL",
    "EQ_TOL",
    "multiply",
    "add",
    "scale",
    "derive_left",
    "derive_right",
    "conjugate",
    "grassmann_exp",
    "invert_even",
    "coefficient",
    "parity",
    "mask_of",
    "indices_of",
    "product_sign",
    "ordered_product",
]

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

PRUNE_TOL = 1e-14
EQ_TOL = 1e-12

DYNAMICAL = "dynamical-odd"
CONSTANT = "constant-odd"


class BasisMismatchError(ValueError):
    pass


class ParityError(ValueError):
    pass


class NonInvertibleError(ZeroDivisionError):
    pass


# ---------------------------------------------------------------------------
# monomial helpers (shared with the symbolic layer)
# ---------------------------------------------------------------------------

def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for j in indices:
        m |= 1 << j
    return m


def indices_of(mask: int) -> tuple[int, ...]:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return tuple(out)


def product_sign(a: int, b: int) -> int:
    """Sign of ``mono(a) * mono(b)`` after sorting; 0 if they share a generator."""
    if a & b:
        return 0
    swaps = 0
    bb = b
    while bb:
        low = bb & -bb
        j = low.bit_length() - 1
        swaps += (a >> (j + 1)).bit_count()
        bb ^= low
    return -1 if swaps & 1 else 1


def ordered_product(indices: Sequence[int]) -> tuple[int, int]:
    """Canonicalize the ordered product of generators; returns (sign, mask)."""
    sign, mask = 1, 0
    for j in indices:
        bit = 1 << j
        if mask & bit:
            return 0, 0
        if (mask >> (j + 1)).bit_count() & 1:
            sign = -sign
        mask |= bit
    return sign, mask


def left_sign(g: int, mask: int) -> int:
    return -1 if (mask & ((1 << g) - 1)).bit_count() & 1 else 1


def right_sign(g: int, mask: int) -> int:
    return -1 if (mask >> (g + 1)).bit_count() & 1 else 1


def reversal_sign(k: int) -> int:
    return -1 if (k * (k - 1) // 2) & 1 else 1


# ---------------------------------------------------------------------------
# basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorBasis:
    """Ordered odd generators with an optional signed conjugation pairing.

    ``conj_map[j] = (sign, k)`` means ``theta_j^* = sign * theta_k``. When not
    given, every generator is treated as self-conjugate with sign +1.
    """

    generators: tuple[str, ...]
    conj_map: tuple[tuple[int, int], ...] = ()
    kinds: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.generators)
        if n > 63:
            raise ValueError(f"at most 63 generators are supported, got {n}")
        if len(set(self.generators)) != n:
            raise ValueError(f"duplicate generator names in {self.generators}")
        if not self.conj_map:
            object.__setattr__(self, "conj_map", tuple((1, j) for j in range(n)))
        if not self.kinds:
            object.__setattr__(self, "kinds", (CONSTANT,) * n)
        if len(self.conj_map) != n or len(self.kinds) != n:
            raise ValueError("conj_map and kinds must have one entry per generator")
        for j, (s, k) in enumerate(self.conj_map):
            if s not in (1, -1) or not 0 <= k < n:
                raise ValueError(f"bad conjugation entry {j}: {(s, k)}")
            s2, back = self.conj_map[k]
            if back != j or s * s2 != 1:
                raise ValueError(
                    f"conjugation is not a signed involution at {self.generators[j]!r}"
                )
        for kind in self.kinds:
            if kind not in (DYNAMICAL, CONSTANT):
                raise ValueError(f"unknown generator kind {kind!r}")

    @classmethod
    def from_names(cls, names: Iterable[str], pairs: Mapping[str, tuple[int, str]] | None = None,
                   kind: str = CONSTANT) -> "GeneratorBasis":
        """Build a basis; ``pairs`` maps a name to ``(sign, partner)``."""
        names = tuple(names)
        idx = {nm: j for j, nm in enumerate(names)}
        conj = [(1, j) for j in range(len(names))]
        for nm, (s, other) in (pairs or {}).items():
            conj[idx[nm]] = (s, idx[other])
            conj[idx[other]] = (s, idx[nm])
        return cls(names, tuple(conj), (kind,) * len(names))

    @property
    def size(self) -> int:
        return len(self.generators)

    def index(self, name: str) -> int:
        try:
            return self.generators.index(name)
        except ValueError:
            raise KeyError(f"unknown generator {name!r} in basis {self.generators}") from None

    def generator(self, g: int | str) -> "GrassmannElement":
        if isinstance(g, str):
            g = self.index(g)
        return GrassmannElement(self, {1 << g: 1.0 + 0j})

    def scalar(self, c: complex) -> "GrassmannElement":
        return GrassmannElement(self, {0: complex(c)})

    def zero(self) -> "GrassmannElement":
        return GrassmannElement(self, {})

    def monomial(self, names: Sequence[str | int]) -> "GrassmannElement":
        idx = [self.index(n) if isinstance(n, str) else n for n in names]
        s, m = ordered_product(idx)
        return GrassmannElement(self, {m: complex(s)} if s else {})

    def describe(self, mask: int) -> str:
        if mask == 0:
            return "1"
        return "*".join(self.generators[j] for j in indices_of(mask))


# ---------------------------------------------------------------------------
# elements
# ---------------------------------------------------------------------------

class GrassmannElement:
    """Immutable sparse element of the Grassmann algebra over ``basis``."""

    __slots__ = ("basis", "_terms")

    def __init__(self, basis: GeneratorBasis, terms: Mapping[int, complex] | None = None,
                 *, prune: float = PRUNE_TOL):
        self.basis = basis
        clean = {}
        for m, c in (terms or {}).items():
            c = complex(c)
            if abs(c) > prune:
                clean[m] = c
        self._terms = clean

    # -- access --------------------------------------------------------------

    @property
    def terms(self) -> dict[int, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def coefficient(self, monomial: int | Sequence[int | str]) -> complex:
        if isinstance(monomial, int):
            return self._terms.get(monomial, 0j)
        idx = [self.basis.index(g) if isinstance(g, str) else g for g in monomial]
        s, m = ordered_product(idx)
        return s * self._terms.get(m, 0j) if s else 0j

    @property
    def scalar_part(self) -> complex:
        return self._terms.get(0, 0j)

    def parity(self) -> str:
        kinds = {m.bit_count() & 1 for m in self._terms}
        if not kinds or kinds == {0}:
            return "even"
        if kinds == {1}:
            return "odd"
        return "mixed"

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self._terms.values())

    def max_abs(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # -- arithmetic ----------------------------------------------------------

    def _check(self, other: "GrassmannElement"):
        if other.basis is not self.basis and other.basis != self.basis:
            raise BasisMismatchError(
                f"basis mismatch: {self.basis.generators} vs {other.basis.generators}"
            )

    def _coerce(self, other) -> "GrassmannElement | None":
        if isinstance(other, GrassmannElement):
            self._check(other)
            return other
        if isinstance(other, (int, float, complex)):
            return self.basis.scalar(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0j) + c
        return GrassmannElement(self.basis, out)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.basis, {m: -c for m, c in self._terms.items()})

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
        if isinstance(other, (int, float, complex)):
            return scale(other, self)
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return scale(other, self)
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, float, complex)):
            if other == 0:
                raise ZeroDivisionError("division of a Grassmann element by zero")
            return scale(1 / other, self)
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return multiply(self, invert_even(other))

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return multiply(other, invert_even(self))

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return invert_even(self) ** (-n)
        out = self.basis.scalar(1)
        for _ in range(n):
            out = multiply(out, self)
        return out

    def conjugate(self) -> "GrassmannElement":
        return conjugate(self)

    def equals(self, other: "GrassmannElement", tol: float = EQ_TOL) -> bool:
        other = self._coerce(other)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(m, 0j) - other._terms.get(m, 0j)) <= tol for m in keys)

    def __eq__(self, other):
        if not isinstance(other, (GrassmannElement, int, float, complex)):
            return NotImplemented
        try:
            return self.equals(other)
        except BasisMismatchError:
            return False

    __hash__ = None

    def __repr__(self):
        return f"GrassmannElement({self})"

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for m in sorted(self._terms, key=lambda m: (m.bit_count(), indices_of(m))):
            c = self._terms[m]
            cs = f"({c.real:.6g}{c.imag:+.6g}j)"
            parts.append(cs if m == 0 else f"{cs}*{self.basis.describe(m)}")
        return " + ".join(parts)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> list[dict]:
        rows = []
        for m in sorted(self._terms, key=lambda m: (m.bit_count(), indices_of(m))):
            c = self._terms[m]
            rows.append({"monomial": list(indices_of(m)), "re": c.real, "im": c.imag})
        return rows

    @classmethod
    def from_json(cls, basis: GeneratorBasis, rows: Iterable[Mapping]) -> "GrassmannElement":
        terms: dict[int, complex] = {}
        for row in rows:
            s, m = ordered_product(row["monomial"])
            if s:
                terms[m] = terms.get(m, 0j) + s * complex(row["re"], row["im"])
        return cls(basis, terms)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def multiply(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    a._check(b)
    out: dict[int, complex] = {}
    for ma, ca in a._terms.items():
        for mb, cb in b._terms.items():
            s = product_sign(ma, mb)
            if s:
                m = ma | mb
                out[m] = out.get(m, 0j) + s * ca * cb
    return GrassmannElement(a.basis, out)


def add(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    a._check(b)
    return a + b


def scale(c: complex, a: GrassmannElement) -> GrassmannElement:
    c = complex(c)
    return GrassmannElement(a.basis, {m: c * v for m, v in a._terms.items()})


def _check_index(a: GrassmannElement, g: int) -> int:
    if isinstance(g, str):
        g = a.basis.index(g)
    if not 0 <= g < a.basis.size:
        raise IndexError(f"generator index {g} out of range for {a.basis.generators}")
    return g


def derive_left(g: int | str, a: GrassmannElement) -> GrassmannElement:
    g = _check_index(a, g)
    bit = 1 << g
    out = {}
    for m, c in a._terms.items():
        if m & bit:
            out[m ^ bit] = left_sign(g, m) * c
    return GrassmannElement(a.basis, out)


def derive_right(g: int | str, a: GrassmannElement) -> GrassmannElement:
    g = _check_index(a, g)
    bit = 1 << g
    out = {}
    for m, c in a._terms.items():
        if m & bit:
            out[m ^ bit] = right_sign(g, m) * c
    return GrassmannElement(a.basis, out)


def conjugate(a: GrassmannElement) -> GrassmannElement:
    """Graded anti-automorphism: (xy)^* = y^* x^*, coefficients conjugated."""
    cmap = a.basis.conj_map
    out: dict[int, complex] = {}
    for m, c in a._terms.items():
        idx = indices_of(m)
        sign = 1
        mapped = []
        for j in reversed(idx):
            s, k = cmap[j]
            sign *= s
            mapped.append(k)
        s, mm = ordered_product(mapped)
        if s:
            out[mm] = out.get(mm, 0j) + sign * s * c.conjugate()
    return GrassmannElement(a.basis, out)


def _split_even(a: GrassmannElement, what: str) -> tuple[complex, GrassmannElement]:
    if a.parity() != "even":
        raise ParityError(f"{what} requires an even element, got {a.parity()} parity")
    a0 = a.scalar_part
    nil = GrassmannElement(a.basis, {m: c for m, c in a._terms.items() if m})
    return a0, nil


def grassmann_exp(a: GrassmannElement) -> GrassmannElement:
    """exp(a) for even ``a``: exp of the scalar part times the finite series of the rest."""
    a0, nil = _split_even(a, "grassmann_exp")
    total = a.basis.scalar(1)
    power = a.basis.scalar(1)
    k = 0
    while True:
        k += 1
        power = multiply(power, nil)
        if not power._terms:
            break
        total = total + scale(1 / math.factorial(k), power)
    return scale(cmath.exp(a0), total)


def invert_even(a: GrassmannElement) -> GrassmannElement:
    a0, nil = _split_even(a, "invert_even")
    if a0 == 0:
        raise NonInvertibleError("even element with zero scalar part is not invertible")
    inv0 = 1 / a0
    step = scale(-inv0, nil)
    total = a.basis.scalar(1)
    power = a.basis.scalar(1)
    while True:
        power = multiply(power, step)
        if not power._terms:
            break
        total = total + power
    return scale(inv0, total)


def coefficient(a: GrassmannElement, monomial) -> complex:
    return a.coefficient(monomial)


def parity(a: GrassmannElement) -> str:
    return a.parity()
