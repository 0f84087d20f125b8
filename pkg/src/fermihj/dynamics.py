"""
Component realization of Grassmann-valued trajectories.

Every odd variable is expanded over the odd monomials of a constant generator
basis (psi = c1(t) xi1 + c2(t) xi2 + ...), every boson over the even ones. The
equations of motion then split into ordinary complex ODEs for the component
functions, which are integrated with fixed-step RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import scalar as sx
from .grassmann import GeneratorBasis, GrassmannElement, indices_of, ordered_product
from .mechanics import ELEquation, UnsupportedModelError
from .model import ModelSpec, velocity_name
from .poly import GrassmannPoly, OddSymbolTable

DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class Grid:
    """Uniform time grid including both endpoints."""

    t0: float
    t1: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a grid needs at least 2 points")
        if not self.t1 > self.t0:
            raise ValueError("grid end must be after its start")

    @classmethod
    def from_dt(cls, t0: float, t1: float, dt: float = DEFAULT_DT) -> "Grid":
        return cls(t0, t1, int(round((t1 - t0) / dt)) + 1)

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / (self.n - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n)


def default_basis(spec: ModelSpec) -> GeneratorBasis:
    """One constant generator per fermion, paired like the fermions."""
    names = ["xi"] if spec.mu == 1 else [f"xi{j + 1}" for j in range(spec.mu)]
    rename = dict(zip(spec.fermions, names))
    pairs = {rename[a]: (s, rename[b]) for a, (s, b) in spec.pairs.items()}
    return GeneratorBasis.from_names(names, pairs)


def component_name(var: str, basis: GeneratorBasis, mask: int) -> str:
    return f"{var}[{basis.describe(mask)}]"


def _masks(n: int, parity: int) -> list[int]:
    out = [m for m in range(1 << n) if m.bit_count() % 2 == parity]
    return sorted(out, key=lambda m: (m.bit_count(), indices_of(m)))


@dataclass
class ComponentSystem:
    """Explicit first-order ODE system for the component functions."""

    spec: ModelSpec
    basis: GeneratorBasis
    xi_table: OddSymbolTable
    equations: list[ELEquation]
    params: dict[str, complex]
    slots: list[tuple[str, int, int]]   # (variable, monomial mask, derivative order) per state entry
    rhs: list[sx.Expr]                  # time derivative of each state entry
    expansions: dict[str, GrassmannPoly] = field(default_factory=dict)
    atom_map: dict[sx.Expr, GrassmannPoly] = field(default_factory=dict)
    _fn: Callable | None = None

    @property
    def size(self) -> int:
        return len(self.slots)

    def slot_name(self, k: int) -> str:
        var, m, order = self.slots[k]
        name = component_name(var, self.basis, m)
        return name if order == 0 else sx.fn_text(name, order)

    def expand(self, p: GrassmannPoly) -> GrassmannPoly:
        """Rewrite a polynomial over the mechanics table in component form."""
        binds = {k: v for k, v in self.expansions.items() if k in p.table}
        return p.substitute(binds, self.xi_table, self.atom_map or None)

    def state_names(self) -> dict[tuple[str, int], str]:
        names = {}
        for k, (var, m, order) in enumerate(self.slots):
            names[(component_name(var, self.basis, m), order)] = f"y[{k}]"
        return names

    def compile(self) -> Callable:
        if self._fn is None:
            names = self.state_names()
            pnames = {k: f"P[{k!r}]" for k in self.params}
            lines = ["def rhs(t, y):", "    out = np.empty((len(y),) + np.shape(y[0]), dtype=complex)"]
            for k, e in enumerate(self.rhs):
                lines.append(f"    out[{k}] = {sx.to_python(e, names, pnames)}")
            lines.append("    return out")
            ns = {"np": np, "P": dict(self.params)}
            exec(compile("\n".join(lines), "<component-rhs>", "exec"), ns)
            self._fn = ns["rhs"]
        return self._fn

    def __call__(self, t, y):
        return self.compile()(t, y)


def _env_params(spec: ModelSpec, params: Mapping[str, complex] | None) -> dict[str, complex]:
    params = dict(params or {})
    missing = [p for p in spec.params if p not in params]
    if missing:
        raise sx.EvaluationError(f"unbound parameters: {', '.join(missing)}")
    return {k: complex(v) for k, v in params.items()}


def extract_component_odes(equations: Sequence[ELEquation], spec: ModelSpec,
                           basis: GeneratorBasis | None = None,
                           params: Mapping[str, complex] | None = None) -> ComponentSystem:
    basis = basis or default_basis(spec)
    params = _env_params(spec, params)
    xi_table = OddSymbolTable(basis.generators, ("generator",) * basis.size, basis.conj_map)
    odd, even = _masks(basis.size, 1), _masks(basis.size, 0)

    expansions: dict[str, GrassmannPoly] = {}
    unknowns: list[sx.Fn] = []
    slots: list[tuple[str, int, int]] = []
    for f in spec.fermions:
        pos = GrassmannPoly.zero(xi_table)
        vel = GrassmannPoly.zero(xi_table)
        for m in odd:
            nm = component_name(f, basis, m)
            pos = pos + GrassmannPoly(xi_table, {m: sx.Fn(nm, 0)})
            vel = vel + GrassmannPoly(xi_table, {m: sx.Fn(nm, 1)})
            unknowns.append(sx.Fn(nm, 1))
            slots.append((f, m, 0))
        expansions[f] = pos
        expansions[velocity_name(f)] = vel
    atom_map: dict[sx.Expr, GrassmannPoly] = {}
    for q in spec.bosons:
        for order in (0, 1, 2):
            atom_map[spec.boson_atom(q, order)] = sum(
                (GrassmannPoly(xi_table, {m: sx.Fn(component_name(q, basis, m), order)}) for m in even),
                GrassmannPoly.zero(xi_table),
            )
        for m in even:
            unknowns.append(sx.Fn(component_name(q, basis, m), 2))
            slots.append((q, m, 0))
        for m in even:
            slots.append((q, m, 1))

    system = ComponentSystem(spec, basis, xi_table, list(equations), params, slots, [], expansions, atom_map)

    # scalar component equations
    rows: list[tuple[str, sx.Expr]] = []
    for eq in equations:
        poly = eq.equation if isinstance(eq, ELEquation) else eq
        comp = system.expand(poly)
        if isinstance(eq, ELEquation):
            is_odd = eq.kind == "fermion"
        else:
            is_odd = poly.parity() == "odd"
        targets = odd if is_odd else even
        label = eq.variable if isinstance(eq, ELEquation) else poly.to_text()
        for m in targets:
            rows.append((f"{label}[{basis.describe(m)}]", comp.coefficient(m)))
    if len(rows) != len(unknowns):
        raise UnsupportedModelError(
            f"{len(rows)} component equations for {len(unknowns)} unknown derivatives"
        )

    env = sx.Env(params=params)
    M = np.zeros((len(rows), len(unknowns)), complex)
    rests = []
    zero_unknowns = {u: 0 for u in unknowns}
    for i, (label, e) in enumerate(rows):
        for j, u in enumerate(unknowns):
            d = sx.diff(e, u)
            if d.is_zero:
                continue
            if not sx.is_constant(d):
                raise UnsupportedModelError(f"equation {label} is not linear in the velocities with constant coefficients")
            M[i, j] = complex(sx.evaluate(d, env))
        rest = sx.subs(e, zero_unknowns)
        if any(a in unknowns for a in sx.atoms(rest)):
            raise UnsupportedModelError(f"equation {label} is nonlinear in the velocities")
        rests.append(rest)
    if len(rows) and abs(np.linalg.det(M)) < 1e-12:
        bad = rows[int(np.argmin(np.abs(M).sum(axis=1)))][0]
        raise UnsupportedModelError(f"velocities cannot be solved for; check equation {bad}")
    Minv = np.linalg.inv(M) if len(rows) else M
    solved = []
    for i in range(len(unknowns)):
        terms = [sx.mul(complex(-Minv[i, j]), rests[j]) for j in range(len(rests)) if abs(Minv[i, j]) > 0]
        solved.append(sx.add(*terms))
    by_unknown = dict(zip(unknowns, solved))

    rhs = []
    for var, m, order in slots:
        nm = component_name(var, basis, m)
        if var in spec.fermions:
            rhs.append(by_unknown[sx.Fn(nm, 1)])
        elif order == 0:
            rhs.append(sx.Fn(nm, 1))
        else:
            rhs.append(by_unknown[sx.Fn(nm, 2)])
    system.rhs = rhs
    return system


@dataclass
class ComponentTrajectory:
    """Component arrays on a grid. ``values[var][mask]`` is a complex array."""

    times: np.ndarray
    basis: GeneratorBasis
    values: dict[str, dict[int, np.ndarray]]
    derivatives: dict[str, dict[int, np.ndarray]]
    status: str = "ok"

    def element(self, var: str, k: int) -> GrassmannElement:
        return GrassmannElement(self.basis, {m: complex(v[k]) for m, v in self.values[var].items()})

    def value_map(self) -> dict[tuple[str, int], np.ndarray]:
        """(component name, derivative order) -> array, for scalar evaluation.

        Components not stored are zero, so closed forms may list only their support.
        """
        out = {}
        zero = np.zeros_like(self.times, dtype=complex)
        for var in self.values:
            base, order = _split_var(var)
            for m in range(1 << self.basis.size):
                name = component_name(base, self.basis, m)
                out[(name, order)] = zero
                out[(name, order + 1)] = zero
        for var, comps in self.values.items():
            base, order = _split_var(var)
            for m, arr in comps.items():
                out[(component_name(base, self.basis, m), order)] = arr
        for var, comps in self.derivatives.items():
            base, order = _split_var(var)
            for m, arr in comps.items():
                out[(component_name(base, self.basis, m), order + 1)] = arr
        return out

    @classmethod
    def from_functions(cls, basis: GeneratorBasis, times, components: Mapping[str, Mapping]) -> "ComponentTrajectory":
        """Build from closed forms: ``components[var][monomial] = (f, df)``.

        Monomials are masks or sequences of generator names.
        """
        times = np.asarray(times, float)
        values, derivs = {}, {}
        for var, comps in components.items():
            values[var], derivs[var] = {}, {}
            for mono, (f, df) in comps.items():
                sign, m = 1, mono
                if not isinstance(mono, int):
                    sign, m = ordered_product([basis.index(g) for g in mono])
                values[var][m] = sign * np.asarray(f(times), complex) * np.ones_like(times)
                derivs[var][m] = sign * np.asarray(df(times), complex) * np.ones_like(times)
        return cls(times, basis, values, derivs)


def _split_var(var: str) -> tuple[str, int]:
    order = 0
    while var.startswith("d(") and var.endswith(")"):
        var = var[2:-1]
        order += 1
    return var, order


def default_initial(system: ComponentSystem) -> dict[str, GrassmannElement]:
    """psi_a(0) = xi_a for fermions; bosons start at 1 with zero velocity."""
    spec, basis = system.spec, system.basis
    out = {}
    for j, f in enumerate(spec.fermions):
        out[f] = basis.generator(j)
    for q in spec.bosons:
        out[q] = basis.scalar(1.0)
        out[velocity_name(q)] = basis.zero()
    return out


def _initial_vector(system: ComponentSystem, initial: Mapping[str, GrassmannElement]) -> np.ndarray:
    spec = system.spec
    y0 = np.zeros(system.size, complex)
    known = set(spec.fermions) | set(spec.bosons) | {velocity_name(q) for q in spec.bosons}
    for var in initial:
        if var not in known:
            raise KeyError(f"initial value for unknown variable {var!r}")
    for k, (var, m, order) in enumerate(system.slots):
        key = var if order == 0 else velocity_name(var)
        el = initial.get(key)
        if el is None:
            continue
        if el.basis != system.basis:
            raise ValueError(f"initial value for {key!r} is not over the trajectory basis")
        y0[k] = el.coefficient(m)
    for var, el in initial.items():
        want = "odd" if var in spec.fermions else "even"
        if el.parity() != want and len(el):
            raise ValueError(f"initial value for {var!r} must be {want}, got {el.parity()}")
    return y0


def rk4(f: Callable, y0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Classical fixed-step Runge-Kutta on the given (uniform) time points."""
    ys = np.empty((len(times), len(y0)), complex)
    ys[0] = y = np.asarray(y0, complex)
    for k in range(len(times) - 1):
        t, h = times[k], times[k + 1] - times[k]
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[k + 1] = y
    return ys


def integrate(system: ComponentSystem, initial: Mapping[str, GrassmannElement] | None = None,
              grid: Grid | None = None) -> ComponentTrajectory:
    grid = grid or Grid.from_dt(0.0, 10.0)
    initial = default_initial(system) if initial is None else initial
    y0 = _initial_vector(system, initial)
    times = grid.times
    f = system.compile()
    ys = rk4(f, y0, times) if system.size else np.zeros((len(times), 0), complex)
    dys = f(times, ys.T).T if system.size else ys
    values: dict[str, dict[int, np.ndarray]] = {}
    derivs: dict[str, dict[int, np.ndarray]] = {}
    for k, (var, m, order) in enumerate(system.slots):
        key = var if order == 0 else velocity_name(var)
        values.setdefault(key, {})[m] = ys[:, k]
        derivs.setdefault(key, {})[m] = dys[:, k]
    status = "ok" if np.all(np.isfinite(ys)) else "nan"
    return ComponentTrajectory(times, system.basis, values, derivs, status)


def evaluate_on_trajectory(p: GrassmannPoly, system: ComponentSystem, traj: ComponentTrajectory,
                           params: Mapping[str, complex] | None = None) -> dict[int, np.ndarray]:
    """Component arrays of a polynomial evaluated along a trajectory."""
    comp = system.expand(p)
    env = sx.Env(params=dict(params or system.params), t=traj.times, values=traj.value_map())
    out = {}
    for m, c in comp.terms.items():
        out[m] = np.asarray(sx.evaluate(c, env), complex) * np.ones_like(traj.times)
    return out


@dataclass
class ResidualReport:
    per_equation: dict[str, dict[str, float]]

    @property
    def max(self) -> float:
        return max((v for d in self.per_equation.values() for v in d.values()), default=0.0)

    def to_json(self) -> dict:
        return {"per_equation": self.per_equation, "max": self.max}


def residual_check(equations: Sequence[ELEquation | GrassmannPoly], system: ComponentSystem,
                   traj: ComponentTrajectory, params: Mapping[str, complex] | None = None) -> ResidualReport:
    """Max |component| of each equation along the trajectory (derivatives from the trajectory)."""
    out = {}
    for n, eq in enumerate(equations):
        poly = eq.equation if isinstance(eq, ELEquation) else eq
        label = eq.variable if isinstance(eq, ELEquation) else f"eq{n + 1}"
        comps = evaluate_on_trajectory(poly, system, traj, params)
        out[label] = {traj.basis.describe(m): float(np.max(np.abs(v))) for m, v in comps.items()}
        if not out[label]:
            out[label] = {"*": 0.0}
    return ResidualReport(out)


def closed_form_error(traj: ComponentTrajectory, var: str, mask: int, exact: Callable) -> float:
    return float(np.max(np.abs(traj.values[var][mask] - exact(traj.times))))


def convergence_ratio(system: ComponentSystem, var: str, mask: int, exact: Callable,
                      t1: float = 10.0, dt: float = 1e-2, initial=None) -> float:
    """Error ratio between step sizes dt and dt/2 (about 16 for a 4th order method)."""
    e1 = closed_form_error(integrate(system, initial, Grid.from_dt(0.0, t1, dt)), var, mask, exact)
    e2 = closed_form_error(integrate(system, initial, Grid.from_dt(0.0, t1, dt / 2)), var, mask, exact)
    return e1 / e2 if e2 > 0 else math.inf
