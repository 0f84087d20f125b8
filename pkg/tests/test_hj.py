from __future__ import annotations

import numpy as np
import pytest

from fermihj import scalar as sx
from fermihj.dynamics import Grid, extract_component_odes, integrate
from fermihj.grassmann import GeneratorBasis
from fermihj.hj import (
    InteractingClosedForm,
    SecondClassError,
    SimpleClosedForm,
    SymbolMismatchError,
    ansatz_from_poly,
    assemble_hj_system,
    boson_constant_momentum,
    boson_coordinate,
    boundary_check,
    constant_relations,
    express_in_psi,
    free_constant_count,
    generate_even_ansatz,
    hj_table,
    match_hj_coefficients,
    reduced_hpf,
    solve_constraints_for_psi,
    standard_pipeline,
    verify_candidate,
)
from fermihj.mechanics import euler_lagrange, legendre
from fermihj.model import parse_model
from fermihj.poly import GrassmannPoly

GRID = np.linspace(0, 10, 2001)


@pytest.fixture(scope="module")
def pipeline(interacting):
    return standard_pipeline(legendre(interacting))


@pytest.fixture(scope="module")
def simple_pipeline(simple):
    return standard_pipeline(legendre(simple))


def fn_env(t, rng, k=1.3):
    """Random affine-in-t coefficient functions; s30 real."""
    fns = {}
    for name in ("s0", "s01", "s1", "s2", "s3", "s30"):
        c0, c1 = complex(*rng.uniform(-1, 1, 2)), complex(*rng.uniform(-1, 1, 2))
        if name == "s30":
            c0, c1 = c0.real, c1.real
        fns[name] = sx.FunctionSpec(lambda t, c0=c0, c1=c1: c0 + c1 * t, (lambda t, c1=c1: c1 + 0 * t,))
    return sx.Env(params={"k": k}, functions=fns, t=t), fns


class TestAnsatz:
    @pytest.mark.parametrize("mu", [0, 1, 2, 3])
    def test_monomial_count(self, mu):
        fermions = [f"psi{j}" for j in range(1, mu + 1)]
        a = generate_even_ansatz(fermions)
        assert len(a.coefficients) == max(1, 2 ** (2 * mu - 1))
        assert len(a.F.terms) == len(a.coefficients)

    def test_mu_zero_is_scalar(self):
        a = generate_even_ansatz([])
        assert a.coefficients == {"s0": "1"}

    def test_standard_names(self):
        a = generate_even_ansatz(["psi1", "psi2"], {"psi1": (1, "psi2")})
        assert set(a.coefficients) == {"s0", "s01", "s1", "s2", "s30", "s3", "s_rho1_psi2", "s_rho2_psi1"}
        assert a.coefficients["s3"] == "rho1*rho2*psi1*psi2"

    def test_rho_count_must_match(self):
        with pytest.raises(ValueError):
            generate_even_ansatz(["psi1", "psi2"], mu_rho=1)

    def test_pin_unknown(self):
        with pytest.raises(KeyError):
            generate_even_ansatz(["psi"]).pin({"zz": 0})

    def test_conjugation_table(self):
        tab = hj_table(["psi1", "psi2"], {"psi1": (1, "psi2")})
        def conj(name):
            sign, j = tab.conj_map[tab.names.index(name)]
            return sign, tab.names[j]

        assert conj("rho1") == (-1, "rho2")
        assert conj("psi2") == (1, "psi1")
        assert conj("beta1") == (1, "beta2")

    def test_mismatched_fermions(self, interacting):
        with pytest.raises(SymbolMismatchError):
            assemble_hj_system(legendre(interacting), generate_even_ansatz(["psi"]))


class TestInteractingSystem:
    def test_equations(self, pipeline):
        _, sys, _, _ = pipeline
        eq = sys.equations_text()
        assert eq["constraint[psi1]"] == "-s1*rho1 + (s30 + i)*psi2 + s3*rho1*rho2*psi2 = 0"
        assert eq["constraint[psi2]"] == "-s2*rho2 + (-s30 + i)*psi1 - s3*rho1*rho2*psi1 = 0"
        assert eq["constant[rho1]"] == "s01*rho2 + s1*psi1 - beta1 + s3*rho2*psi1*psi2 = 0"

    def test_bindings(self, pipeline):
        _, sys, sol, _ = pipeline
        rng = np.random.default_rng(0)
        env, _ = fn_env(0.4, rng)
        s = {n: complex(sx.evaluate(sx.fn(n), env)) for n in ("s1", "s2", "s30")}
        got1 = complex(sx.evaluate(sol.bindings["psi1"].coefficient(["rho2"]), env))
        got2 = complex(sx.evaluate(sol.bindings["psi2"].coefficient(["rho1"]), env))
        assert got1 == pytest.approx(s["s2"] / (-s["s30"] + 1j))
        assert got2 == pytest.approx(s["s1"] / (s["s30"] + 1j))

    def test_free_constants(self, pipeline):
        _, sys, _, rel = pipeline
        assert free_constant_count(sys, rel) == (4, 2)
        assert [set(r.value.symbols()) for r in rel] == [{"rho2"}, {"rho1"}]

    def test_s3_absent_from_bindings(self, pipeline):
        _, _, sol, rel = pipeline
        for p in list(sol.bindings.values()) + [r.value for r in rel]:
            assert "s3" not in {a.name for a in p.atoms() if isinstance(a, sx.Fn)}

    @pytest.mark.parametrize("value", [sx.I, -sx.I])
    def test_singular_constraint(self, interacting, value):
        a = generate_even_ansatz(["psi1", "psi2"], {"psi1": (1, "psi2")})
        a = a.pin({"s30": value, **{n: 0 for n in a.cross_terms}})
        sys = assemble_hj_system(legendre(interacting), a)
        with pytest.raises(SecondClassError):
            solve_constraints_for_psi(sys)

    def test_independent_psi_matching(self, pipeline):
        _, sys, _, _ = pipeline
        eqs = {e.monomial: sx.to_text(e.expr) for e in match_hj_coefficients(sys)}
        assert eqs["psi1*psi2"] == "-d(s30) - k"
        assert eqs["rho1*psi1"] == "-d(s1)"

    def test_reduced_equation_matches_reference_form(self, pipeline):
        """(s30^2+1) s01' - s30 (s1 s2' + s2 s1') + i (s1 s2' - s2 s1') + s1 s2 (s30' + k)."""
        _, sys, sol, _ = pipeline
        (eq,) = [e for e in match_hj_coefficients(sys, sol) if e.monomial == "rho1*rho2"]
        rng = np.random.default_rng(5)
        for t in (0.0, 0.7, 2.1):
            env, fns = fn_env(t, rng)
            v = {n: fns[n](t) for n in fns}
            d = {n: fns[n](t, 1) for n in fns}
            reference = ((v["s30"] ** 2 + 1) * d["s01"] - v["s30"] * (v["s1"] * d["s2"] + v["s2"] * d["s1"])
                       + 1j * (v["s1"] * d["s2"] - v["s2"] * d["s1"]) + v["s1"] * v["s2"] * (d["s30"] + 1.3))
            ours = complex(sx.evaluate(eq.expr, env))
            assert -(v["s30"] ** 2 + 1) * ours == pytest.approx(reference, abs=1e-12)


class TestClosedForm:
    def test_all_families_vanish(self, pipeline):
        a, sys, _, _ = pipeline
        cf = InteractingClosedForm()
        rep = verify_candidate(sys, cf.functions(a.cross_terms), GRID, cf.params())
        assert rep.ok and rep.max_residual <= 1e-9
        assert rep.free_constants == (4, 2)
        assert rep.boundary_holds
        assert set(rep.families) == {"constraint", "constant", "constancy", "hj", "reality"}

    @pytest.mark.parametrize("a_, rate", [(1.0, 0.0), (1.5, 0.2), (0.5 + 0.5j, -1.0)])
    def test_wrong_phase_rate_detected(self, pipeline, a_, rate):
        a, sys, _, _ = pipeline
        cf = InteractingClosedForm(a=a_, tau_rate=rate)
        rep = verify_candidate(sys, cf.functions(a.cross_terms), GRID, cf.params())
        assert rep.family_max("hj") == pytest.approx(cf.v * abs(2 * rate + cf.k), rel=1e-9)
        assert not rep.ok and rep.failures()

    def test_missing_function(self, pipeline):
        _, sys, _, _ = pipeline
        with pytest.raises(sx.EvaluationError, match="s3"):
            fns = InteractingClosedForm().functions(["s_rho1_psi2", "s_rho2_psi1"])
            del fns["s3"]
            verify_candidate(sys, fns, GRID, {"k": 1.0})

    def test_bindings_reproduce_solutions(self, pipeline):
        _, _, sol, _ = pipeline
        cf = InteractingClosedForm(a=0.8 - 0.3j, c=0.4)
        env = sx.Env(params=cf.params(), functions=cf.functions(), t=GRID)
        want = cf.psi_closed_form(GRID)
        for f, (rho, coef) in want.items():
            got = sx.evaluate(sol.bindings[f].coefficient([rho]), env)
            assert np.max(np.abs(got - coef)) <= 1e-12

    def test_agrees_with_integrated_dynamics(self, interacting, pipeline):
        cf = InteractingClosedForm(a=0.8 - 0.3j, c=0.4)
        basis = GeneratorBasis.from_names(["rho1", "rho2"], {"rho1": (-1, "rho2")})
        system = extract_component_odes(euler_lagrange(interacting), interacting, basis, cf.params())
        xi = cf.xi_coefficient()
        init = {"psi1": basis.generator("rho2") * xi, "psi2": basis.generator("rho1") * (-np.conj(xi))}
        traj = integrate(system, init, Grid.from_dt(0, 10, 1e-3))
        want = cf.psi_closed_form(traj.times)
        for f, (rho, coef) in want.items():
            m = 1 << basis.index(rho)
            assert np.max(np.abs(traj.values[f][m] - coef)) <= 1e-8


class TestHpf:
    def test_reduced_form(self, pipeline):
        _, sys, sol, _ = pipeline
        cf = InteractingClosedForm()
        hpf = reduced_hpf(sys, sol)
        env = sx.Env(params=cf.params(), functions=cf.functions(), t=GRID)
        assert np.max(np.abs(sx.evaluate(hpf.scalar_part, env) - cf.s0)) <= 1e-12
        assert np.max(np.abs(sx.evaluate(hpf.coefficient(["rho1", "rho2"]), env) - cf.u)) <= 1e-12

    @pytest.mark.parametrize("s30, s3", [(0.3, 0.5), (-1.2, 2.0), (4.0, -0.1)])
    def test_psi_form_independent_of_free_functions(self, pipeline, s30, s3):
        _, sys, sol, _ = pipeline
        cf = InteractingClosedForm(a=1.5, u=0.7, s30=sx.FunctionSpec.constant(s30), s3=sx.FunctionSpec.constant(s3))
        hpf = express_in_psi(sys, sol, reduced_hpf(sys, sol))
        env = sx.Env(params=cf.params(), functions=cf.functions(), t=GRID)
        coef = sx.evaluate(hpf.coefficient(["psi1", "psi2"]), env)
        # constant coefficient u/|a|^2 for every choice of s30 and s3
        assert np.max(np.abs(coef - cf.u / cf.v)) <= 1e-10
        assert set(hpf.symbols()) <= {"psi1", "psi2"}


class TestSimple:
    def test_pipeline(self, simple_pipeline):
        a, sys, sol, rel = simple_pipeline
        assert a.F.to_text() == "s0 + a*rho*psi"
        assert sol.bindings["psi"].to_text() == "a*rho"
        assert rel[0].to_text() == "beta = a^2*rho"
        assert free_constant_count(sys, rel) == (2, 1)

    def test_matching_forces_constant_a(self, simple_pipeline):
        _, sys, sol, rel = simple_pipeline
        eqs = {e.monomial: sx.to_text(e.expr) for e in match_hj_coefficients(sys)}
        assert eqs == {"1": "-d(s0)", "rho*psi": "-d(a)"}
        assert [sx.to_text(ob) for _, ob in rel[0].obligations] == ["2*a*d(a)"]

    def test_verify(self, simple_pipeline):
        a, sys, _, _ = simple_pipeline
        rep = verify_candidate(sys, SimpleClosedForm(a=1.3).functions(), GRID, {})
        assert rep.ok and rep.free_constants == (2, 1)

    def test_moving_a_detected(self, simple_pipeline):
        _, sys, _, _ = simple_pipeline
        fns = {"s0": 0.0, "a": sx.FunctionSpec(lambda t: 1 + 0.1 * t, (lambda t: 0.1 + 0 * t,))}
        assert verify_candidate(sys, fns, GRID, {}).family_max("constancy") > 0.1


class TestBoundary:
    def test_interacting(self, interacting):
        bc = boundary_check(legendre(interacting))
        assert bc.holds and not bc.f_only.is_zero()
        assert bc.f_only.to_text() == "-i*xi_psi1*delta_psi2 - i*xi_psi2*delta_psi1"

    def test_simple(self, simple):
        assert boundary_check(legendre(simple)).holds

    def test_bosonic_has_none(self):
        spec = parse_model("model free { boson q; lagrangian { 0.5*d(q)^2 } }")
        assert boundary_check(legendre(spec)) is None


class TestBosonic:
    SPEC = "model free { boson q; lagrangian { 0.5*d(q)^2 } }"

    @pytest.mark.parametrize("el_sign", [-1, 1])
    def test_free_particle(self, el_sign):
        canon = legendre(parse_model(self.SPEC), el_sign=el_sign)
        q, p = boson_coordinate("q"), boson_constant_momentum("q")
        tab = hj_table([])
        F = GrassmannPoly.const(tab, q * p - el_sign * 0.5 * sx.power(p, 2) * sx.T)
        sys = assemble_hj_system(canon, ansatz_from_poly(F, []))
        assert sys.hj_pde.is_zero()
        assert sys.even_constant_eqs["q"].to_text() == f"q - qtilde_q {'+' if el_sign == -1 else '-'} t*ptilde_q"

    def test_wrong_sign_leaves_residual(self):
        canon = legendre(parse_model(self.SPEC))
        q, p = boson_coordinate("q"), boson_constant_momentum("q")
        F = GrassmannPoly.const(hj_table([]), q * p - 0.5 * sx.power(p, 2) * sx.T)
        assert assemble_hj_system(canon, ansatz_from_poly(F, [])).hj_pde.to_text() == "ptilde_q^2"
