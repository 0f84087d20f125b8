"""
Canonical-transformation and wave-function reading of the two-fermion solution.

With the rho-only part of F and the psi1*psi2 coefficient gauged away, the
coordinates solved from the constant equations take the form

    psi_a = psi_a° + alpha dG/dpi_a°,   pi_a = pi_a° + alpha dG/dpsi_a°

with psi_a° = beta_a/s_a, pi_a° = -s_a rho_a, alpha = s3/(s1 s2) and
G = pi1° pi2° psi1° psi2°. Equivalently psi = psi° exp(alpha S) for an even S.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import scalar as sx
from .grassmann import GeneratorBasis, GrassmannElement, grassmann_exp
from .hj import InteractingClosedForm, generate_even_ansatz, solve_linear
from .poly import GrassmannPoly, OddSymbolTable

EXACT_TOL = 1e-12
GRID_TOL = 1e-9

FERMIONS = ("psi1", "psi2")
PAIRS = {"psi1": (1, "psi2"), "psi2": (1, "psi1")}
GAUGE = ("s0", "s01", "s30")

S1, S2, S3 = sx.Fn("s1", 0), sx.Fn("s2", 0), sx.Fn("s3", 0)
ALPHA = sx.div(S3, sx.mul(S1, S2))

CANON_TABLE = OddSymbolTable.build(
    [("rho1", "constant"), ("rho2", "constant"), ("beta1", "constant"), ("beta2", "constant")],
    {"rho1": (-1, "rho2"), "rho2": (-1, "rho1"), "beta1": (1, "beta2"), "beta2": (1, "beta1")},
)
# the "new" variables as independent symbols, used only to differentiate G
NEW_TABLE = OddSymbolTable.build(
    [("psi1o", "generator"), ("psi2o", "generator"), ("pi1o", "generator"), ("pi2o", "generator")]
)


class NonConstantCouplingError(ValueError):
    """The Schrodinger-form check needs s3 constant."""


# ---------------------------------------------------------------------------
# symbolic construction
# ---------------------------------------------------------------------------

def _sym(name: str, table: OddSymbolTable = CANON_TABLE) -> GrassmannPoly:
    return GrassmannPoly.symbol(table, name)


def generating_function(gauge: bool = True) -> tuple[GrassmannPoly, object]:
    """Two-fermion ansatz with cross terms pinned and (optionally) the gauge applied."""
    ans = generate_even_ansatz(FERMIONS, PAIRS)
    pins = {n: 0 for n in ans.cross_terms}
    if gauge:
        pins.update({n: 0 for n in GAUGE})
    ans = ans.pin(pins)
    return ans.F, ans


def solve_new_variables(F: GrassmannPoly, rhos: Sequence[str] = ("rho1", "rho2"),
                        betas: Sequence[str] = ("beta1", "beta2"),
                        fermions: Sequence[str] = FERMIONS) -> dict[str, GrassmannPoly]:
    """psi(rho, beta) from dF/drho_a = beta_a by fixed-point iteration.

    The equations are linear in psi up to nilpotent corrections, so each pass
    fixes one more order and the iteration is exact after table-size passes.
    """
    table = F.table
    zero = GrassmannPoly.zero(table)
    eqs = [(F.derive_left(r) - _sym(b, table)).expand() for r, b in zip(rhos, betas)]
    at0 = {f: zero for f in fermions}
    A = [[e.derive_right(f).substitute(at0).expand() for f in fermions] for e in eqs]
    rest = []
    for e, row in zip(eqs, A):
        lin = zero
        for f, a in zip(fermions, row):
            lin = lin + a * _sym(f, table)
        rest.append((e - lin).expand())
    psi = {f: zero for f in fermions}
    for _ in range(table.size + 1):
        rhs = [(-r.substitute(psi)).expand() for r in rest]
        psi = dict(zip(fermions, solve_linear(A, rhs)))
    return psi


@dataclass
class SymbolicCanonical:
    """Everything as polynomials over (rho1, rho2, beta1, beta2)."""

    F: GrassmannPoly
    psi: dict[str, GrassmannPoly]
    pi: dict[str, GrassmannPoly]
    psi0: dict[str, GrassmannPoly]
    pi0: dict[str, GrassmannPoly]
    alpha: sx.Expr
    G: GrassmannPoly
    dG: dict[str, GrassmannPoly]           # dG/d(new variable), mapped back to rho, beta
    S_wave: GrassmannPoly
    hamiltonian: GrassmannPoly

    @property
    def table(self) -> OddSymbolTable:
        return CANON_TABLE

    def identities(self) -> dict[str, GrassmannPoly]:
        """u - u° - alpha dG/du° for the four phase-space components."""
        a = self.alpha
        return {
            "psi1": (self.psi["psi1"] - self.psi0["psi1"] - self.dG["pi1o"] * a).expand(),
            "psi2": (self.psi["psi2"] - self.psi0["psi2"] - self.dG["pi2o"] * a).expand(),
            "pi1": (self.pi["psi1"] - self.pi0["psi1"] - self.dG["psi1o"] * a).expand(),
            "pi2": (self.pi["psi2"] - self.pi0["psi2"] - self.dG["psi2o"] * a).expand(),
        }

    def general_form(self) -> dict[str, GrassmannPoly]:
        """psi1 = beta1/s1 - s3/(s1^2 s2) rho2 beta1 beta2 and its mirror."""
        r1, r2, b1, b2 = (_sym(n) for n in ("rho1", "rho2", "beta1", "beta2"))
        return {
            "psi1": (b1 * sx.power(S1, -1) - r2 * b1 * b2 * sx.div(S3, sx.mul(S1, S1, S2))).expand(),
            "psi2": (b2 * sx.power(S2, -1) + r1 * b1 * b2 * sx.div(S3, sx.mul(S2, S2, S1))).expand(),
        }


def build_symbolic(gauge: bool = True, k: sx.Expr = sx.Param("k", True)) -> SymbolicCanonical:
    F, ans = generating_function(gauge)
    psi = solve_new_variables(F)
    pi = {}
    for f in FERMIONS:
        pi[f] = F.derive_left(f).substitute(psi).expand()
    psi = {f: p.retable(CANON_TABLE) for f, p in psi.items()}
    pi = {f: p.retable(CANON_TABLE) for f, p in pi.items()}

    r1, r2, b1, b2 = (_sym(n) for n in ("rho1", "rho2", "beta1", "beta2"))
    psi0 = {"psi1": b1 * sx.power(S1, -1), "psi2": b2 * sx.power(S2, -1)}
    pi0 = {"psi1": r1 * sx.neg(S1), "psi2": r2 * sx.neg(S2)}
    new = {"psi1o": psi0["psi1"], "psi2o": psi0["psi2"], "pi1o": pi0["psi1"], "pi2o": pi0["psi2"]}
    Gn = _sym("pi1o", NEW_TABLE) * _sym("pi2o", NEW_TABLE) * _sym("psi1o", NEW_TABLE) * _sym("psi2o", NEW_TABLE)
    G = Gn.substitute(new, CANON_TABLE).expand()
    dG = {n: Gn.derive_left(n).substitute(new, CANON_TABLE).expand() for n in new}
    S_wave = -(pi0["psi1"] * psi0["psi1"] + pi0["psi2"] * psi0["psi2"]
               + pi0["psi1"] * pi0["psi2"] * psi0["psi1"] * psi0["psi2"] * ALPHA)
    H = (psi["psi1"] * psi["psi2"] * sx.neg(k)).expand()
    return SymbolicCanonical(F, psi, pi, psi0, pi0, ALPHA, G, dG, S_wave.expand(), H)


# ---------------------------------------------------------------------------
# numeric data
# ---------------------------------------------------------------------------

def gauged_closed_form(cf: InteractingClosedForm) -> InteractingClosedForm:
    """Same family with s30 = 0 (and s0 = 0)."""
    return dataclasses.replace(cf, s30=sx.FunctionSpec.constant(0.0), s0=0.0)


def _functions(cf: InteractingClosedForm) -> dict[str, sx.FunctionSpec]:
    return cf.functions()


@dataclass
class CanonicalData:
    t: float
    basis: GeneratorBasis
    psi: dict[str, GrassmannElement]
    pi: dict[str, GrassmannElement]
    psi0: dict[str, GrassmannElement]
    pi0: dict[str, GrassmannElement]
    psi_general: dict[str, GrassmannElement]
    dG: dict[str, GrassmannElement]
    alpha: complex
    G: GrassmannElement
    S_wave: GrassmannElement
    hamiltonian: GrassmannElement
    values: dict[str, complex] = field(default_factory=dict)

    @property
    def u(self) -> tuple[GrassmannElement, ...]:
        return (self.psi["psi1"], self.psi["psi2"], self.pi["psi1"], self.pi["psi2"])

    @property
    def u0(self) -> tuple[GrassmannElement, ...]:
        return (self.psi0["psi1"], self.psi0["psi2"], self.pi0["psi1"], self.pi0["psi2"])


def evaluate_symbolic(sym: SymbolicCanonical, env: sx.Env, t: float) -> CanonicalData:
    def ev(p: GrassmannPoly) -> GrassmannElement:
        return p.evaluate(env)

    def evd(d):
        return {k: ev(v) for k, v in d.items()}

    values = {n: complex(env.fn_value(n, 0)) for n in ("s1", "s2", "s3")}
    if values["s1"] == 0 or values["s2"] == 0:
        raise sx.EvaluationError(f"s1 or s2 vanishes at t={t}")
    return CanonicalData(
        t, CANON_TABLE.basis, evd(sym.psi), evd(sym.pi), evd(sym.psi0), evd(sym.pi0), evd(sym.general_form()),
        evd(sym.dG), complex(sx.evaluate(sym.alpha, env)), ev(sym.G), ev(sym.S_wave), ev(sym.hamiltonian), values,
    )


def build_canonical_data(cf: InteractingClosedForm, t: float, sym: SymbolicCanonical | None = None) -> CanonicalData:
    cf = gauged_closed_form(cf)
    sym = sym or build_symbolic()
    env = sx.Env(params=cf.params(), functions=_functions(cf), t=float(t))
    return evaluate_symbolic(sym, env, t)


def data_from_values(s1: complex, s2: complex, s3: complex, k: float = 1.0,
                     sym: SymbolicCanonical | None = None) -> CanonicalData:
    """CanonicalData for arbitrary numeric coefficient values."""
    sym = sym or build_symbolic()
    env = sx.Env(params={"k": k}, functions={"s1": s1, "s2": s2, "s3": s3}, t=0.0)
    return evaluate_symbolic(sym, env, 0.0)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    residuals: dict[str, float]
    tolerance: float
    extra: dict[str, object] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tolerance

    def failures(self) -> list[tuple[str, float]]:
        return [(k, v) for k, v in self.residuals.items() if v > self.tolerance]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "residuals": self.residuals,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "ok": self.ok,
            **self.extra,
        }


def finite_canonical_residuals(data: CanonicalData) -> dict[str, float]:
    """Componentwise |u - u° - alpha J dG/du°| (J implicit in the pairing psi <-> pi)."""
    a = data.alpha
    return {
        "psi1": (data.psi["psi1"] - data.psi0["psi1"] - data.dG["pi1o"] * a).max_abs(),
        "psi2": (data.psi["psi2"] - data.psi0["psi2"] - data.dG["pi2o"] * a).max_abs(),
        "pi1": (data.pi["psi1"] - data.pi0["psi1"] - data.dG["psi1o"] * a).max_abs(),
        "pi2": (data.pi["psi2"] - data.pi0["psi2"] - data.dG["psi2o"] * a).max_abs(),
    }


def check_finite_canonical(data: CanonicalData | Sequence[CanonicalData], tol: float = EXACT_TOL) -> CheckReport:
    items = [data] if isinstance(data, CanonicalData) else list(data)
    res: dict[str, float] = {}
    for d in items:
        for k, v in finite_canonical_residuals(d).items():
            res[k] = max(res.get(k, 0.0), v)
        for k in ("psi1", "psi2"):
            res[f"general_form[{k}]"] = max(res.get(f"general_form[{k}]", 0.0),
                                           (d.psi[k] - d.psi_general[k]).max_abs())
        res["G^2"] = max(res.get("G^2", 0.0), (d.G * d.G).max_abs())
    return CheckReport("finite canonical transformation (componentwise)", res, tol,
                       {"times": [d.t for d in items]})


def wave_residuals(data: CanonicalData) -> dict[str, float]:
    E = grassmann_exp(data.S_wave * data.alpha)
    p1o, p2o = data.pi0["psi1"], data.pi0["psi2"]
    q1o, q2o = data.psi0["psi1"], data.psi0["psi2"]
    a = data.alpha
    return {
        "psi1 = psi1° exp(alpha S)": (q1o * E - data.psi["psi1"]).max_abs(),
        "psi2 = psi2° exp(alpha S)": (q2o * E - data.psi["psi2"]).max_abs(),
        "psi1° exp(alpha S) = psi1° + alpha pi2° psi1° psi2°": (q1o * E - (q1o + p2o * q1o * q2o * a)).max_abs(),
        "psi2° exp(alpha S) = psi2° - alpha pi1° psi1° psi2°": (q2o * E - (q2o - p1o * q1o * q2o * a)).max_abs(),
    }


def check_wave_relation(data: CanonicalData | Sequence[CanonicalData], tol: float = EXACT_TOL) -> CheckReport:
    items = [data] if isinstance(data, CanonicalData) else list(data)
    res: dict[str, float] = {}
    for d in items:
        for k, v in wave_residuals(d).items():
            res[k] = max(res.get(k, 0.0), v)
    return CheckReport("wave relation", res, tol)


def evolution_identity(sym: SymbolicCanonical | None = None) -> dict[str, GrassmannPoly]:
    """(1/alpha) dpsi/dt - (Sigma + (alpha'/alpha) S - H) psi for arbitrary s1, s2, s3(t).

    Returned as polynomials over (rho, beta); they vanish identically.
    """
    sym = sym or build_symbolic()
    a = sym.alpha
    adot_over_a = sx.div(sx.diff_t(a), a)
    sigma = {"psi1": sx.neg(sx.div(sx.Fn("s1", 1), S1)), "psi2": sx.neg(sx.div(sx.Fn("s2", 1), S2))}
    out = {}
    for f in FERMIONS:
        lhs = sym.psi[f].partial_t() * sx.power(a, -1)
        rhs = sym.psi[f] * sx.div(sigma[f], a) + sym.S_wave * sym.psi[f] * adot_over_a - sym.hamiltonian * sym.psi[f]
        out[f] = (lhs - rhs).expand()
    return out


def check_evolution_identity(functions: Mapping[str, object], times, k: float = 1.0,
                             tol: float = GRID_TOL) -> CheckReport:
    sym = build_symbolic()
    env = sx.Env(params={"k": k}, functions=dict(functions), t=np.asarray(times, float))
    res = {}
    for f, p in evolution_identity(sym).items():
        vals = [np.max(np.abs(np.asarray(sx.evaluate(c, env)) * np.ones_like(env.t))) for _, c in p.items()]
        res[f] = float(max(vals, default=0.0))
    return CheckReport("time evolution with Sigma + (alpha'/alpha) S - H", res, tol)


def _is_constant(spec, times) -> bool:
    d = np.asarray(spec(np.asarray(times, float), 1)) * np.ones(len(times))
    return bool(np.max(np.abs(d)) <= 1e-12)


def check_schrodinger_form(cf: InteractingClosedForm, times, tol: float = GRID_TOL) -> CheckReport:
    """Checks under the second-class constraints with s3 constant and s30 = 0.

    (a) s1'/s1 = i k/2 and s2'/s2 = -i k/2
    (b) Sigma = (i k / 2 alpha) sigma3
    (c) H psi = 0 in the algebra
    (d) (1/alpha) dpsi/dt = (i k/(2 alpha)) sigma3 psi - H psi on the grid
    """
    times = np.asarray(times, float)
    if not _is_constant(cf.s3, times):
        raise NonConstantCouplingError("the Schrodinger-form check assumes a constant s3")
    cf = gauged_closed_form(cf)
    k = cf.k
    fns = cf.functions()
    env = sx.Env(params=cf.params(), functions=fns, t=times)
    s1, s2, s3 = (np.asarray(env.fn_value(n, 0)) * np.ones_like(times) for n in ("s1", "s2", "s3"))
    ds1, ds2 = (np.asarray(env.fn_value(n, 1)) * np.ones_like(times) for n in ("s1", "s2"))
    alpha = s3 / (s1 * s2)
    res: dict[str, float] = {}
    res["(a) s1'/s1 - i k/2"] = float(np.max(np.abs(ds1 / s1 - 0.5j * k)))
    res["(a) s2'/s2 + i k/2"] = float(np.max(np.abs(ds2 / s2 + 0.5j * k)))
    sig1, sig2 = -ds1 / s1 / alpha, -ds2 / s2 / alpha
    target = 0.5j * k / alpha
    res["(b) Sigma - (i k/2 alpha) sigma3"] = float(max(np.max(np.abs(sig1 - target)), np.max(np.abs(sig2 + target))))

    # constrained wave vector: beta fixed by the reduction, psi = psi° exp(alpha S)
    sym = build_symbolic()
    t0 = sx.Env(params=cf.params(), functions=fns, t=float(times[0]))
    c1 = complex(sx.evaluate(sx.mul(-1j, S1, S2), t0))   # beta1 = -i s1 s2 rho2
    c2 = complex(sx.evaluate(sx.mul(1j, S1, S2), t0))    # beta2 = +i s1 s2 rho1
    r1, r2 = _sym("rho1"), _sym("rho2")
    bind = {"beta1": r2 * c1, "beta2": r1 * c2}
    psi = {f: sym.psi[f].substitute(bind).expand() for f in FERMIONS}
    H = sym.hamiltonian.substitute(bind).expand()
    sigma3 = {"psi1": 1, "psi2": -1}
    worst_d, worst_c, worst_c_free = 0.0, 0.0, 0.0
    for f in FERMIONS:
        Hpsi = (H * psi[f]).expand()
        Hpsi_free = (sym.hamiltonian * sym.psi[f]).expand()
        worst_c = max(worst_c, _poly_max(Hpsi, env))
        worst_c_free = max(worst_c_free, _poly_max(Hpsi_free, env))
        lhs = psi[f].partial_t() * sx.power(sym.alpha, -1)
        rhs = psi[f] * sx.div(0.5j * k * sigma3[f], sym.alpha) - Hpsi
        worst_d = max(worst_d, _poly_max((lhs - rhs).expand(), env))
    res["(c) H psi (constrained)"] = worst_c
    res["(c) H psi (general rho, beta)"] = worst_c_free
    res["(d) Schrodinger-form residual"] = worst_d
    hbar_formula = abs(cf.a) ** 2 / s3
    res["hbar: 1/alpha - |a|^2/s3"] = float(np.max(np.abs(1 / alpha - hbar_formula)))
    hbar = float(np.real(hbar_formula[0]))
    return CheckReport("Schrodinger-like form", res, tol, {"hbar": hbar, "k": k})


def _poly_max(p: GrassmannPoly, env: sx.Env) -> float:
    worst = 0.0
    for _, c in p.items():
        v = np.asarray(sx.evaluate(c, env)) * np.ones_like(env.t)
        worst = max(worst, float(np.max(np.abs(v))))
    return worst


def hbar(cf: InteractingClosedForm) -> float:
    """|a|^2 / s3 at t = 0."""
    return float(abs(cf.a) ** 2 / np.real(cf.s3(0.0)))
