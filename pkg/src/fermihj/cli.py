"""Command-line front end: ``fermi-hj <command> MODEL [options]``.

Exit status: 0 when every residual check passes, 2 when a check exceeds its
tolerance, 1 on usage, file or model errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from typing import Sequence

import numpy as np

from . import scalar as sx
from .bundled import resolve_model_path
from .dynamics import Grid, extract_component_odes, integrate, residual_check
from .mechanics import UnsupportedModelError, euler_lagrange, legendre
from .model import ModelError, ModelSpec, parse_model
from .poly import GrassmannPoly
from .report import EXACT_TOL, Check, RunConfig, default_tolerance, emit_report

EXIT_OK, EXIT_USAGE, EXIT_TOLERANCE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def parse_value(text: str) -> complex:
    t = text.strip().replace(" ", "")
    if t.endswith("i") and not t.endswith("j"):
        t = t[:-1] + "j"
        if t in ("j", "+j", "-j"):
            t = t.replace("j", "1j")
    try:
        z = complex(t)
    except ValueError:
        raise UsageError(f"cannot parse value {text!r}") from None
    return z


def parse_params(items: Sequence[str]) -> dict[str, complex]:
    out = {}
    for item in items or ():
        name, sep, val = item.partition("=")
        if not sep or not name:
            raise UsageError(f"parameter binding must look like name=value, got {item!r}")
        out[name.strip()] = parse_value(val)
    return out


def parse_grid(text: str) -> tuple[float, float, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError("--grid takes t0,t1,N")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"bad --grid {text!r}") from None


def parse_el_sign(text: str) -> int:
    table = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1}
    if text not in table:
        raise UsageError(f"--el-sign takes + or -, got {text!r}")
    return table[text]


def _real_params(params: dict[str, complex]) -> dict[str, float | complex]:
    return {k: (v.real if v.imag == 0 else v) for k, v in params.items()}


def bind_params(p: GrassmannPoly, spec: ModelSpec, params: dict[str, complex]) -> GrassmannPoly:
    mapping = {spec.param_atom(n): sx.Const(complex(v)) for n, v in params.items() if n in spec.params}
    return p.scalar_subs(mapping).expand() if mapping else p


def _const_poly_max(p: GrassmannPoly, params: dict | None = None) -> float:
    env = sx.Env(params=params or {}, functions={}, t=0.0)
    return max((abs(complex(sx.evaluate(c, env))) for _, c in p.items()), default=0.0)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def run_derive(spec: ModelSpec, cfg: RunConfig, params: dict[str, complex]):
    canon = legendre(spec, cfg.convention, cfg.el_sign)
    eqs = euler_lagrange(spec, cfg.convention, cfg.el_sign)
    results = {
        "model": {"name": spec.name, "fermions": list(spec.fermions), "bosons": list(spec.bosons),
                  "params": spec.params, "reality": spec.reality},
        "diagnostics": [d.to_json() for d in spec.diagnostics],
        "momenta": {pi: f.to_text() for pi, f in canon.momenta.items()},
        "constraints": {pi: f"{c.to_text()} = 0" for pi, c in canon.constraints.items()},
        "hamiltonian": canon.hamiltonian.to_text(),
        "hamiltonian_full": canon.hamiltonian_full.to_text(),
        "hamiltonian_independent_of_fermionic_momenta": canon.h_independent_of_fermionic_momenta,
        "euler_lagrange": {e.variable: e.to_text() for e in eqs},
        "boundary_term": None if canon.boundary is None else canon.boundary.to_text(),
        "notes": canon.notes,
    }
    for q, v in canon.boson_velocities.items():
        results.setdefault("boson_velocities", {})[q] = v.to_text()
    if params:
        results["hamiltonian_bound"] = bind_params(canon.hamiltonian, spec, params).to_text()
    checks = [Check("legendre: velocity independence on the constraint surface",
                    {"H_full": canon.legendre_residual}, EXACT_TOL)]
    return results, checks


def run_integrate(spec: ModelSpec, cfg: RunConfig, params: dict[str, complex]):
    eqs = euler_lagrange(spec, cfg.convention, cfg.el_sign)
    missing = [p for p in spec.params if p not in params]
    if missing:
        raise UsageError(f"integrate needs values for: {', '.join(missing)} (use -p name=value)")
    system = extract_component_odes(eqs, spec, params=params)
    grid = Grid(*cfg.grid)
    traj = integrate(system, grid=grid)
    res = residual_check(eqs, system, traj, params)
    change = {}
    final = {}
    for var, comps in traj.values.items():
        for m, arr in comps.items():
            label = f"{var}[{traj.basis.describe(m)}]"
            change[label] = float(np.max(np.abs(arr - arr[0])))
            final[label] = complex(arr[-1])
    checks = [Check("euler_lagrange residual", {f"{v}:{k}": x for v, d in res.per_equation.items()
                                                for k, x in d.items()}, cfg.tolerance)]
    results = {
        "equations": {e.variable: e.to_text() for e in eqs},
        "basis": list(traj.basis.generators),
        "status": traj.status,
        "steps": grid.n,
        "dt": grid.dt,
        "max_change": change,
        "final": final,
        "constant": all(v <= cfg.tolerance for v in change.values()),
    }
    if spec.fermions and not spec.bosons and not any(isinstance(a, sx.Time) for a in spec.lagrangian.atoms()):
        canon = legendre(spec, cfg.convention, cfg.el_sign)
        from .dynamics import evaluate_on_trajectory

        H = canon.hamiltonian
        comps = evaluate_on_trajectory(H, system, traj, params)
        drift = {traj.basis.describe(m): float(np.max(np.abs(v - v[0]))) for m, v in comps.items()}
        checks.append(Check("hamiltonian conservation", drift or {"*": 0.0}, cfg.tolerance))
    return results, checks, traj


def _closed_form(spec: ModelSpec, params: dict[str, complex]):
    from .hj import InteractingClosedForm, SimpleClosedForm

    p = _real_params(params)
    if spec.mu == 1 and not spec.bosons:
        return SimpleClosedForm(a=float(np.real(p.get("a", 1.0))), s0=float(np.real(p.get("s0", 0.0))))
    if spec.mu == 2 and not spec.bosons and spec.pairs:
        kw = {}
        for name in ("a", "u", "c", "k", "tau_rate"):
            if name in p:
                kw[name] = p[name]
        if "s3" in p:
            kw["s3"] = sx.FunctionSpec.constant(p["s3"])
        return InteractingClosedForm(**kw)
    raise UsageError("no bundled closed form for this model")


def _hj_pipeline(spec: ModelSpec, cfg: RunConfig):
    from . import hj

    canon = legendre(spec, cfg.convention, cfg.el_sign)
    if not spec.fermions:
        raise UsageError("the Hamilton-Jacobi stages need at least one fermion")
    ansatz = hj.generate_even_ansatz(spec.fermions, spec.pairs)
    if ansatz.cross_terms:
        ansatz = ansatz.pin({n: 0 for n in ansatz.cross_terms})
    return canon, ansatz, hj.assemble_hj_system(canon, ansatz)


def run_hj_assemble(spec, cfg, params):
    canon, ansatz, system = _hj_pipeline(spec, cfg)
    results = {
        "ansatz": ansatz.F.to_text(),
        "coefficients": ansatz.coefficients,
        "pinned": {k: sx.to_text(v) for k, v in ansatz.pinned.items()},
        "reality": [e.to_text() for e in ansatz.reality],
        "equations": system.equations_text(),
        "hamiltonian": system.hamiltonian.to_text(),
        "K": sx.to_text(system.K),
    }
    if spec.bosons:
        results["notes"] = ["bosonic dependence of F must be supplied explicitly; only fermionic terms are generated"]
    return results, []


def run_hj_reduce(spec, cfg, params):
    from . import hj

    canon, ansatz, system = _hj_pipeline(spec, cfg)
    sol = hj.solve_constraints_for_psi(system)
    rels = hj.constant_relations(system, sol)
    before, after = hj.free_constant_count(system, rels)
    red = hj.reduced_hpf(system, sol)
    results = {
        "ansatz": ansatz.F.to_text(),
        "pinned": {k: sx.to_text(v) for k, v in ansatz.pinned.items()},
        "solution": {f: p.to_text() for f, p in sol.bindings.items()},
        "relations": [r.to_text() for r in rels],
        "constancy_obligations": {f"{r.beta}:{m}": f"{sx.to_text(e)} = 0" for r in rels for m, e in r.obligations},
        "hj_matched": [e.to_text() for e in hj.match_hj_coefficients(system, sol)],
        "hj_matched_psi_independent": [e.to_text() for e in hj.match_hj_coefficients(system)],
        "free_odd_constants": {"before": before, "after": after},
        "reduced_hpf": red.to_text(),
    }
    try:
        results["reduced_hpf_in_psi"] = hj.express_in_psi(system, sol, red).to_text()
    except hj.SecondClassError as exc:
        results["reduced_hpf_in_psi"] = f"unavailable: {exc}"
    checks = []
    bc = hj.boundary_check(canon)
    if bc is not None:
        results["boundary"] = {"total": bc.total.to_text(), "F_only": bc.f_only.to_text(),
                               "BT_variation": bc.bt_variation.to_text()}
        checks.append(Check("boundary consistency", {"total": _const_poly_max(bc.total)}, EXACT_TOL))
    return results, checks


def run_hj_verify(spec, cfg, params):
    from . import hj

    if cfg.closed_form not in (None, "default"):
        raise UsageError(f"unknown closed form {cfg.closed_form!r}; only 'default' is bundled")
    canon, ansatz, system = _hj_pipeline(spec, cfg)
    cf = _closed_form(spec, params)
    model_params = {k: v for k, v in cf.params().items()}
    model_params.update({k: v for k, v in params.items() if k in spec.params})
    missing = [p for p in spec.params if p not in model_params]
    if missing:
        raise UsageError(f"hj verify needs values for: {', '.join(missing)}")
    rep = hj.verify_candidate(system, cf.functions(ansatz.cross_terms), Grid(*cfg.grid).times,
                              model_params, cfg.tolerance)
    results = {
        "closed_form": type(cf).__name__,
        "free_odd_constants": {"before": rep.free_constants[0], "after": rep.free_constants[1]},
        "boundary_holds": rep.boundary_holds,
        "pinned": rep.pinned,
        "max_residual": rep.max_residual,
    }
    checks = [Check(f"hj verify: {fam}", d, cfg.tolerance) for fam, d in sorted(rep.families.items())]
    if rep.boundary_holds is not None:
        checks.append(Check("boundary consistency", {"total": 0.0 if rep.boundary_holds else 1.0}, EXACT_TOL))
    free_ok = rep.free_constants[1] == spec.mu
    checks.append(Check("free odd constants", {"after - mu": 0.0 if free_ok else float(abs(rep.free_constants[1] - spec.mu))},
                        EXACT_TOL))
    return results, checks


def run_xform(spec, cfg, params):
    from . import canonical as C
    from . import hj

    if not (spec.mu == 2 and spec.pairs and not spec.bosons):
        raise UsageError("xform check applies to two conjugate fermions without bosons")
    cf = _closed_form(spec, params)
    times = Grid(*cfg.grid).times
    sym = C.build_symbolic()
    samples = np.linspace(times[0], times[-1], 5)
    data = [C.build_canonical_data(cf, t, sym) for t in samples]
    fin = C.check_finite_canonical(data)
    wave = C.check_wave_relation(data)
    rng = np.random.default_rng(0)
    c = rng.normal(size=6)
    evo = C.check_evolution_identity({
        "s1": sx.FunctionSpec(lambda t: (1.2 + c[0] * 0.1 * np.sin(t)) * np.exp(0.3j * t),
                              (lambda t: (c[0] * 0.1 * np.cos(t) + 0.3j * (1.2 + c[0] * 0.1 * np.sin(t))) * np.exp(0.3j * t),)),
        "s2": sx.FunctionSpec(lambda t: (0.9 + 0.05j * c[1] * t), (lambda t: 0.05j * c[1] + 0 * t,)),
        "s3": sx.FunctionSpec(lambda t: 0.5 + 0.1 * np.cos(t), (lambda t: -0.1 * np.sin(t),)),
    }, times, k=float(np.real(cf.k)), tol=cfg.tolerance)
    schr = C.check_schrodinger_form(cf, times, cfg.tolerance)
    results = {
        "psi": {f: p.to_text() for f, p in sym.psi.items()},
        "pi": {f: p.to_text() for f, p in sym.pi.items()},
        "alpha": sx.to_text(sym.alpha),
        "G": sym.G.to_text(),
        "S_wave": sym.S_wave.to_text(),
        "hbar": schr.extra["hbar"],
        "sample_times": samples,
        "note": "finite transformation checked componentwise (J implicit)",
    }
    checks = [
        Check("finite canonical transformation (componentwise)", fin.residuals, EXACT_TOL),
        Check("wave relation", wave.residuals, EXACT_TOL),
        Check("time evolution identity (arbitrary s1, s2, s3)", evo.residuals, cfg.tolerance),
        Check("schrodinger form", schr.residuals, cfg.tolerance),
    ]
    return results, checks


# ---------------------------------------------------------------------------
# main
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("model", help="model file (.fhj); bundled fixtures are found by name")
    common.add_argument("-p", "--param", action="append", default=[], metavar="NAME=VALUE")
    common.add_argument("--grid", default="0,10,2001", help="t0,t1,N (default 0,10,2001)")
    common.add_argument("--convention", choices=("left", "right"), default="left")
    common.add_argument("--el-sign", default="-", help="orientation of time derivatives: + or - (default -)")
    common.add_argument("--format", choices=("json", "text", "csv"), default="json")
    common.add_argument("-o", "--output", default=None)
    common.add_argument("--closed-form", default=None, help="closed-form family to verify (default)")
    common.add_argument("--tol", type=float, default=None, help="residual tolerance (env FERMI_HJ_TOL)")

    p = _Parser(prog="fermi-hj", description="Grassmann mechanics and Hamilton-Jacobi checks.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("derive", parents=[common], help="momenta, constraints, Hamiltonian, EL equations")
    sub.add_parser("integrate", parents=[common], help="RK4 integration of the component ODEs")
    hj = sub.add_parser("hj", help="Hamilton-Jacobi stages")
    hjs = hj.add_subparsers(dest="hj_command", parser_class=_Parser)
    for name, h in (("assemble", "assemble the HJ system"), ("reduce", "solve constraints and reduce"),
                    ("verify", "verify a closed-form solution")):
        hjs.add_parser(name, parents=[common], help=h)
    xf = sub.add_parser("xform", help="canonical-transformation checks")
    xfs = xf.add_subparsers(dest="xform_command", parser_class=_Parser)
    xfs.add_parser("check", parents=[common], help="finite canonical, wave and Schrodinger-form checks")
    return p


STAGES = {
    "derive": run_derive,
    "hj assemble": run_hj_assemble,
    "hj reduce": run_hj_reduce,
    "hj verify": run_hj_verify,
    "xform check": run_xform,
}


def _trajectory_csv(traj) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = [(var, m) for var in sorted(traj.values) for m in sorted(traj.values[var])]
    header = ["t"]
    for var, m in cols:
        label = f"{var}[{traj.basis.describe(m)}]"
        header += [f"{label}.re", f"{label}.im"]
    w.writerow(header)
    for k, t in enumerate(traj.times):
        row = [repr(float(t))]
        for var, m in cols:
            z = complex(traj.values[var][m][k])
            row += [repr(z.real), repr(z.imag)]
        w.writerow(row)
    return buf.getvalue().encode()


def _write(data: bytes, path: str | None):
    if path:
        with open(path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        command = args.command
        if command == "hj":
            if not args.hj_command:
                raise UsageError("hj needs a subcommand: assemble, reduce or verify")
            command = f"hj {args.hj_command}"
        elif command == "xform":
            if not args.xform_command:
                raise UsageError("xform needs a subcommand: check")
            command = "xform check"
        elif command is None:
            raise UsageError("missing command")
        params = parse_params(args.param)
        tol = args.tol if args.tol is not None else default_tolerance()
        cfg = RunConfig(command, args.model, _real_params(params), parse_grid(args.grid), args.convention,
                        parse_el_sign(args.el_sign), tol, args.format, args.output, args.closed_form)
        if cfg.format == "csv" and command != "integrate":
            raise UsageError("--format csv is only available for integrate")
        text, _ = resolve_model_path(args.model)
        spec = parse_model(text)
        if command == "integrate":
            results, checks, traj = run_integrate(spec, cfg, params)
            if cfg.format == "csv":
                _write(_trajectory_csv(traj), cfg.output)
                return EXIT_OK if all(c.ok for c in checks) else EXIT_TOLERANCE
        else:
            results, checks = STAGES[command](spec, cfg, params)
    except UsageError as exc:
        print(f"fermi-hj: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        for d in exc.diagnostics:
            print(f"{args.model}:{d.text()}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"fermi-hj: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnsupportedModelError, ValueError, sx.EvaluationError) as exc:
        print(f"fermi-hj: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _write(emit_report(command, results, checks, cfg), cfg.output)
    return EXIT_OK if all(c.ok for c in checks) else EXIT_TOLERANCE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
