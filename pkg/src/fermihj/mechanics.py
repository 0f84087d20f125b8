"""
Lagrangian to Hamiltonian pipeline for models with odd (fermionic) variables.

Conventions
-----------
Graded derivatives act from the left unless ``convention="right"``.

``el_sign`` fixes the orientation of the time derivative in the derived
equations. The Euler-Lagrange operator d/dt(dL/d(vel)) - dL/d(coord) is
computed as usual; afterwards every velocity is rescaled by ``el_sign`` (so an
n-th time derivative picks up ``el_sign**n``). The Hamilton-Jacobi equation is
assembled consistently as ``el_sign * dF/dt + H = 0``. With ``el_sign=+1`` the
equations follow the plain variational orientation. The default ``-1`` gives
the orientation in which the two-fermion model evolves as
``psi1 ~ exp(+i k t / 2)``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import scalar as sx
from .model import ModelSpec, boson_momentum, momentum_name, velocity_name
from .poly import GrassmannPoly, OddSymbolTable, lift

DEFAULT_EL_SIGN = -1


class UnsupportedModelError(ValueError):
    pass


def _check_flags(convention: str, el_sign: int):
    if convention not in ("left", "right"):
        raise ValueError(f"convention must be 'left' or 'right', got {convention!r}")
    if el_sign not in (1, -1):
        raise ValueError(f"el_sign must be +1 or -1, got {el_sign!r}")


def orient(p: GrassmannPoly, velocities: list[str], el_sign: int) -> GrassmannPoly:
    """Rescale fermionic velocities and boson time derivatives by ``el_sign``."""
    if el_sign == 1:
        return p
    vel_mask = 0
    for v in velocities:
        vel_mask |= 1 << p.table.index(v)
    out = {}
    for m, c in p.items():
        fmap = {a: sx.mul(el_sign ** a.order, a) for a in sx.atoms(c) if isinstance(a, sx.Fn) and a.order % 2}
        c = sx.subs(c, fmap) if fmap else c
        out[m] = sx.mul(el_sign ** (m & vel_mask).bit_count(), c)
    return GrassmannPoly(p.table, out)


@dataclass
class ELEquation:
    variable: str
    raw: GrassmannPoly
    equation: GrassmannPoly
    kind: str  # fermion | boson

    def to_text(self) -> str:
        return f"{self.equation.to_text()} = 0"


def _normalize(p: GrassmannPoly, lead_masks: list[int], lead_atom: sx.Fn | None = None) -> GrassmannPoly:
    """Scale so the first velocity coefficient has unit modulus and positive orientation."""
    c = None
    for m in lead_masks:
        if m in p.terms:
            c = p.terms[m]
            if lead_atom is not None:
                c = sx.diff(c, lead_atom)
            break
    if c is None and lead_atom is not None:
        c = sx.diff(p.scalar_part, lead_atom)
    if c is None or not isinstance(c, sx.Const) or c.value == 0:
        return p
    v = c.value
    scale = 1 / abs(v)
    if v.real < 0 or (v.real == 0 and v.imag < 0):
        scale = -scale
    return (p * scale).expand()


def euler_lagrange(spec: ModelSpec, convention: str = "left", el_sign: int = DEFAULT_EL_SIGN) -> list[ELEquation]:
    _check_flags(convention, el_sign)
    L = spec.lagrangian
    vel_of = {f: velocity_name(f) for f in spec.fermions}
    out = []
    vel_masks = [1 << spec.table.index(v) for v in spec.velocities]
    for f in spec.fermions:
        dl_dv = L.derive(velocity_name(f), convention)
        if dl_dv.degree_in(spec.velocities):
            raise UnsupportedModelError(f"momentum of {f!r} depends on velocities")
        raw = (dl_dv.total_dt(vel_of) - L.derive(f, convention)).expand()
        eq = orient(raw, spec.velocities, el_sign)
        # leading velocity term: lowest-index velocity monomial present
        leads = sorted(m for m in eq.terms if any(m == vm for vm in vel_masks))
        out.append(ELEquation(f, raw, _normalize(eq, leads), "fermion"))
    for q in spec.bosons:
        qd = spec.boson_atom(q, 1)
        qa = spec.boson_atom(q, 0)
        dl_dqd = L.map_coefficients(lambda c: sx.diff(c, qd))
        dl_dq = L.map_coefficients(lambda c: sx.diff(c, qa))
        raw = (dl_dqd.total_dt(vel_of) - dl_dq).expand()
        eq = orient(raw, spec.velocities, el_sign)
        out.append(ELEquation(q, raw, _normalize(eq, [0], spec.boson_atom(q, 2)), "boson"))
    return out


@dataclass
class CanonicalSystem:
    spec: ModelSpec
    convention: str
    el_sign: int
    momenta: dict[str, GrassmannPoly]          # pi_psi -> f(psi, q)
    constraints: dict[str, GrassmannPoly]      # pi_psi -> pi - f
    boson_momenta: dict[str, GrassmannPoly]    # q -> p(q, dq, psi)
    boson_velocities: dict[str, GrassmannPoly]  # q -> dq(q, p, psi)
    hamiltonian: GrassmannPoly
    hamiltonian_full: GrassmannPoly
    boundary: GrassmannPoly | None
    h_independent_of_fermionic_momenta: bool
    legendre_residual: float
    notes: list[str] = field(default_factory=list)

    @property
    def table(self) -> OddSymbolTable:
        return self.spec.table


def _velocity_free_check(p: GrassmannPoly, velocities: list[str], params: dict, bosons, rng=None) -> float:
    """Max |coefficient| of velocity-containing monomials under random instantiation."""
    rng = rng or random.Random(7)
    sel = 0
    for v in velocities:
        sel |= 1 << p.table.index(v)
    worst = 0.0
    for _ in range(3):
        env = sx.Env(
            params={k: complex(rng.uniform(-2, 2), rng.uniform(-2, 2) if kind == "complex" else 0.0)
                    for k, kind in params.items()},
            functions={},
            t=rng.uniform(0, 1),
            values={},
        )
        for m, c in p.terms.items():
            if not m & sel:
                continue
            vals = {}
            for a in sx.atoms(c):
                if isinstance(a, sx.Fn):
                    vals[(a.name, a.order)] = rng.uniform(-2, 2)
            env.values = vals
            worst = max(worst, abs(complex(sx.evaluate(c, env))))
    return worst


def legendre(spec: ModelSpec, convention: str = "left", el_sign: int = DEFAULT_EL_SIGN) -> CanonicalSystem:
    _check_flags(convention, el_sign)
    L = spec.lagrangian
    table = spec.table
    notes = []

    # fermionic momenta and primary constraints
    momenta, constraints = {}, {}
    for f in spec.fermions:
        fa = L.derive(velocity_name(f), convention)
        if fa.degree_in(spec.velocities):
            raise UnsupportedModelError(f"momentum of {f!r} depends on velocities")
        pi = momentum_name(f)
        momenta[pi] = fa.expand()
        constraints[pi] = (GrassmannPoly.symbol(table, pi) - fa).expand()

    # bosonic momenta, solved for the velocities
    boson_momenta, boson_vel = {}, {}
    for q in spec.bosons:
        qd = spec.boson_atom(q, 1)
        p = L.map_coefficients(lambda c: sx.diff(c, qd)).expand()
        A = p.map_coefficients(lambda c: sx.diff(c, qd)).expand()
        if not A.is_scalar() or not sx.is_constant(A.scalar_part) or A.scalar_part.is_zero:
            raise UnsupportedModelError(
                f"bosonic kinetic form for {q!r} is not a nonzero constant; cannot solve for d({q})"
            )
        for q2 in spec.bosons:
            if q2 != q and not A.map_coefficients(lambda c: sx.diff(c, spec.boson_atom(q2, 1))).is_zero():
                raise UnsupportedModelError("non-diagonal bosonic kinetic form is not supported")
            if q2 != q and not p.map_coefficients(lambda c: sx.diff(c, spec.boson_atom(q2, 1))).is_zero():
                raise UnsupportedModelError("non-diagonal bosonic kinetic form is not supported")
        B = p.scalar_subs({qd: 0})
        boson_momenta[q] = p
        boson_vel[q] = ((GrassmannPoly.const(table, boson_momentum(q)) - B) * sx.power(A.scalar_part, -1)).expand()

    # H_full = dq p + d(psi) pi - L, with dq eliminated
    H = GrassmannPoly.zero(table)
    for q in spec.bosons:
        H = H + boson_vel[q] * boson_momentum(q)
    for f in spec.fermions:
        v = GrassmannPoly.symbol(table, velocity_name(f))
        pi = GrassmannPoly.symbol(table, momentum_name(f))
        H = H + (v * pi if convention == "left" else pi * v)
    vel_map = {spec.boson_atom(q, 1): boson_vel[q] for q in spec.bosons}
    Lq = GrassmannPoly.zero(table)
    for m, c in L.items():
        Lq = Lq + lift(c, table, vel_map) * GrassmannPoly(table, {m: 1})
    H_full = (H - Lq).expand()

    # canonical H: the part that survives with fermionic velocities set to zero
    zero = GrassmannPoly.zero(table)
    H_canon = H_full.substitute({v: zero for v in spec.velocities}).expand()
    flag = H_canon.degree_in(spec.momenta) == 0 if spec.momenta else True

    # consistency: on the constraint surface H_full must not depend on velocities
    on_shell = H_full.substitute(momenta).expand() if momenta else H_full
    residual = _velocity_free_check(on_shell, spec.velocities, spec.params, spec.bosons) if spec.velocities else 0.0
    if residual > 1e-10:
        notes.append(f"Hamiltonian keeps velocity dependence on the constraint surface (max {residual:.3g})")

    try:
        bt = boundary_term(spec)
    except UnsupportedModelError as exc:
        bt = None
        notes.append(str(exc))
    return CanonicalSystem(spec, convention, el_sign, momenta, constraints, boson_momenta, boson_vel,
                           H_canon, H_full, bt, flag, residual, notes)


def endpoint_table(spec: ModelSpec) -> OddSymbolTable:
    entries = [(f"{f}@t1", "endpoint") for f in spec.fermions]
    entries += [(f"{f}@t2", "endpoint") for f in spec.fermions]
    pairs = {}
    for a, (s, b) in spec.pairs.items():
        for e in ("t1", "t2"):
            pairs[f"{a}@{e}"] = (s, f"{b}@{e}")
    return OddSymbolTable.build(entries, pairs)


def boundary_term(spec: ModelSpec) -> GrassmannPoly:
    """BT = -(i/2) g^{ab} psi_a(t1) psi_b(t2) over endpoint symbols."""
    from .model import kinetic_metric

    table = endpoint_table(spec)
    g = spec.metric if spec.metric is not None else kinetic_metric(spec)
    if g is None:
        raise UnsupportedModelError("no recognizable kinetic metric; boundary term is not defined")
    bt = GrassmannPoly.zero(table)
    for a, fa in enumerate(spec.fermions):
        for b, fb in enumerate(spec.fermions):
            if g[a][b].is_zero:
                continue
            bt = bt + GrassmannPoly.monomial(table, [f"{fa}@t1", f"{fb}@t2"], sx.mul(-0.5j, g[a][b]))
    return bt
