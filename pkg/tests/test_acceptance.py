"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (visible with ``-s`` and in
the terminal summary). Runtime budgets are part of each criterion.
"""

from __future__ import annotations

import functools
import itertools
import random
import time

import numpy as np
import pytest

import oracle
from fermihj import scalar as sx
from fermihj.bundled import load_fixture
from fermihj.dynamics import (
    ComponentTrajectory,
    Grid,
    closed_form_error,
    convergence_ratio,
    extract_component_odes,
    integrate,
    residual_check,
)
from fermihj.grassmann import (
    GeneratorBasis,
    GrassmannElement,
    conjugate,
    derive_left,
    derive_right,
    grassmann_exp,
    invert_even,
)
from fermihj.hj import (
    InteractingClosedForm,
    express_in_psi,
    match_hj_coefficients,
    reduced_hpf,
    standard_pipeline,
    verify_candidate,
)
from fermihj.canonical import (
    build_canonical_data,
    check_finite_canonical,
    check_schrodinger_form,
    check_wave_relation,
)
from fermihj.mechanics import euler_lagrange, legendre
from fermihj.model import parse_model, pretty_print, structurally_equal
from fermihj.poly import GrassmannPoly
from modelgen import random_model

RESULTS: dict[int, str] = {}
GRID = np.linspace(0.0, 10.0, 2001)


def criterion(number: int, title: str, budget: float):
    """Time the wrapped check, enforce its budget and record a one-line verdict."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            verdict, detail = "PASS", ""
            try:
                fn(*args, **kwargs)
                elapsed = time.perf_counter() - start
                assert elapsed < budget, f"runtime {elapsed:.2f}s over budget {budget}s"
            except BaseException as exc:
                verdict, detail = "FAIL", f": {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}"
                raise
            finally:
                elapsed = time.perf_counter() - start
                line = f"[{verdict}] {number}. {title} ({elapsed:.2f}s){detail}"
                RESULTS[number] = line
                print(line)

        return run

    return wrap


# -- 1 -------------------------------------------------------------------------

@criterion(1, "Legendre transform of the interacting fixture", 1.0)
def test_legendre_fixture():
    spec = load_fixture("interacting")
    c = legendre(spec)
    s, k = spec.symbol, spec.param_atom("k")
    assert c.momenta["pi_psi1"] == s("psi2") * -1j
    assert c.momenta["pi_psi2"] == s("psi1") * -1j
    assert c.hamiltonian == s("psi1") * s("psi2") * sx.neg(k)
    assert c.h_independent_of_fermionic_momenta is True


# -- 2 -------------------------------------------------------------------------

@criterion(2, "Single-fermion model: mechanics and HJ reduction", 1.0)
def test_simple_system():
    spec = load_fixture("simple")
    c = legendre(spec)
    s = spec.symbol
    assert c.momenta["pi_psi"] == -s("psi")
    assert c.constraints["pi_psi"] == s("pi_psi") + s("psi")
    (el,) = euler_lagrange(spec)
    assert el.equation.to_text() == "d(psi)"

    ansatz, sys, solution, relations = standard_pipeline(c)
    S = ansatz.F - GrassmannPoly.const(ansatz.table, ansatz.F.scalar_part)
    assert S.to_text() == "a*rho*psi"
    matched = {e.monomial: sx.to_text(e.expr) for e in match_hj_coefficients(sys)}
    assert matched["rho*psi"] == "-d(a)"
    assert relations[0].to_text() == "beta = a^2*rho"


# -- 3 -------------------------------------------------------------------------

@criterion(3, "Closed-form solutions and RK4 integration", 5.0)
def test_closed_form_solutions():
    spec = load_fixture("interacting")
    k = 1.0
    eqs = euler_lagrange(spec)
    xi_basis = GeneratorBasis.from_names(["xi1", "xi2"], {"xi1": (1, "xi2")})
    system = extract_component_odes(eqs, spec, xi_basis, {"k": k})

    # psi1 = xi e^{ikt/2}, psi2 = xi* e^{-ikt/2}
    w = 0.5j * k
    traj = ComponentTrajectory.from_functions(xi_basis, GRID, {
        "psi1": {("xi1",): (lambda t: np.exp(w * t), lambda t: w * np.exp(w * t))},
        "psi2": {("xi2",): (lambda t: np.exp(-w * t), lambda t: -w * np.exp(-w * t))},
    })
    assert residual_check(eqs, system, traj, {"k": k}).max <= 1e-12

    # coordinates recovered from the HJ constraints, differentiated symbolically
    cf = InteractingClosedForm(k=k)
    _, _, solution, _ = standard_pipeline(legendre(spec))
    rho_basis = GeneratorBasis.from_names(["rho1", "rho2"], {"rho1": (-1, "rho2")})
    rho_system = extract_component_odes(eqs, spec, rho_basis, {"k": k})
    env = sx.Env(params=cf.params(), functions=cf.functions(), t=GRID)
    comps = {}
    for f, rho in (("psi1", "rho2"), ("psi2", "rho1")):
        c = solution.bindings[f].coefficient([rho])
        val, der = sx.evaluate(c, env), sx.evaluate(sx.diff_t(c), env)
        comps[f] = {(rho,): (lambda t, v=val: v, lambda t, d=der: d)}
    hj_traj = ComponentTrajectory.from_functions(rho_basis, GRID, comps)
    assert residual_check(eqs, rho_system, hj_traj, {"k": k}).max <= 1e-12

    rk = integrate(system, grid=Grid.from_dt(0.0, 10.0, 1e-3))
    for f, m, sgn in (("psi1", 1, 1), ("psi2", 2, -1)):
        assert closed_form_error(rk, f, m, lambda t, s=sgn: np.exp(s * w * t)) <= 1e-8
    ratio = convergence_ratio(system, "psi1", 1, lambda t: np.exp(w * t), dt=1e-2)
    assert 15.0 <= ratio <= 17.0, ratio


# -- 4 -------------------------------------------------------------------------

@criterion(4, "HJ system verified on the closed-form family", 5.0)
def test_hj_verification():
    ansatz, sys, _, _ = standard_pipeline(legendre(load_fixture("interacting")))
    cf = InteractingClosedForm(a=1.0, u=0.7, c=0.0, k=1.0)
    rep = verify_candidate(sys, cf.functions(ansatz.cross_terms), GRID, cf.params(), tol=1e-9)
    for family in ("constraint", "constant", "constancy", "hj"):
        assert rep.families[family], family
        assert rep.family_max(family) <= 1e-9, (family, rep.family_max(family))
    assert rep.free_constants == (4, 2)


# -- 5 -------------------------------------------------------------------------

@criterion(5, "Reduced Hamilton principal function", 2.0)
def test_hpf_reduction():
    _, sys, solution, _ = standard_pipeline(legendre(load_fixture("interacting")))
    hpf = express_in_psi(sys, solution, reduced_hpf(sys, solution))
    coefs = []
    for s30, s3 in itertools.product((0.3, -1.1, 2.5), (0.5, -0.2, 3.0)):
        cf = InteractingClosedForm(a=1.0, u=0.7, s30=sx.FunctionSpec.constant(s30), s3=sx.FunctionSpec.constant(s3))
        env = sx.Env(params=cf.params(), functions=cf.functions(), t=GRID)
        coefs.append((sx.evaluate(hpf.scalar_part, env) * np.ones_like(GRID),
                      sx.evaluate(hpf.coefficient(["psi1", "psi2"]), env) * np.ones_like(GRID)))
    ref0, ref = coefs[0]
    for c0, c in coefs[1:]:
        assert np.max(np.abs(c0 - ref0)) <= 1e-10 and np.max(np.abs(c - ref)) <= 1e-10
    cf = InteractingClosedForm()
    assert set(hpf.symbols()) <= {"psi1", "psi2"}
    assert np.max(np.abs(ref0 - cf.s0)) <= 1e-10
    got = complex(ref[0])
    assert np.max(np.abs(ref - cf.expected_hpf_psi())) <= 1e-10, (
        f"psi1*psi2 coefficient is {got.real:+.6g}, expected {cf.expected_hpf_psi():+.6g}"
    )


# -- 6 -------------------------------------------------------------------------

@criterion(6, "Canonical transformation and Schrodinger-like form", 2.0)
def test_canonical_quantum():
    cf = InteractingClosedForm()
    data = [build_canonical_data(cf, t) for t in np.linspace(0.0, 10.0, 11)]
    problems = []
    fin = check_finite_canonical(data, tol=1e-12)
    wave = check_wave_relation(data, tol=1e-12)
    problems += [f"finite: {k}={v:.3g}" for k, v in fin.failures()]
    problems += [f"wave: {k}={v:.3g}" for k, v in wave.failures()]
    rep = check_schrodinger_form(cf, GRID, tol=1e-9)
    r = rep.residuals
    for key, tol in (("(a) s1'/s1 - i k/2", 1e-9), ("(a) s2'/s2 + i k/2", 1e-9),
                     ("(b) Sigma - (i k/2 alpha) sigma3", 1e-9), ("(d) Schrodinger-form residual", 1e-9)):
        if r[key] > tol:
            problems.append(f"{key}={r[key]:.3g}")
    if r["(c) H psi (constrained)"] != 0:
        problems.append(f"H psi = {r['(c) H psi (constrained)']:.3g}")
    if abs(rep.extra["hbar"] - 2.0) > 1e-12:
        problems.append(f"hbar={rep.extra['hbar']}")
    assert not problems, "; ".join(problems)


# -- 7 -------------------------------------------------------------------------

def _basis(n):
    return GeneratorBasis.from_names([f"t{j}" for j in range(n)])


BASES = {n: _basis(n) for n in range(1, 7)}


def _random_element(rng, n, parity=None, max_terms=10):
    masks = [m for m in range(1 << n) if parity is None or m.bit_count() % 2 == parity]
    picks = rng.sample(masks, min(len(masks), rng.randint(1, max_terms)))
    return GrassmannElement(BASES[n], {m: complex(rng.uniform(-2, 2), rng.uniform(-2, 2)) for m in picks})


@criterion(7, "Grassmann algebra laws and brute-force product oracle", 10.0)
def test_algebra_properties():
    rng = random.Random(2024)
    cases = 1000
    tol = 1e-12
    for _ in range(cases):
        n = rng.randint(1, 6)
        a, b, c = (_random_element(rng, n) for _ in range(3))
        assert ((a * b) * c).equals(a * (b * c), tol)
    for _ in range(cases):
        n = rng.randint(1, 6)
        pa, pb = rng.randint(0, 1), rng.randint(0, 1)
        a, b = _random_element(rng, n, pa), _random_element(rng, n, pb)
        assert (a * b).equals((b * a) * (-1) ** (pa * pb), tol)
    for _ in range(cases):
        n = rng.randint(1, 6)
        a, g = _random_element(rng, n), rng.randrange(n)
        assert derive_left(g, derive_left(g, a)).is_zero() and derive_right(g, derive_right(g, a)).is_zero()
    for _ in range(cases):
        n = rng.randint(1, 6)
        pa = rng.randint(0, 1)
        a, b, g = _random_element(rng, n, pa), _random_element(rng, n), rng.randrange(n)
        lhs = derive_left(g, a * b)
        assert lhs.equals(derive_left(g, a) * b + (-1) ** pa * (a * derive_left(g, b)), tol)
    for _ in range(cases):
        n = rng.randint(1, 6)
        a, b = _random_element(rng, n), _random_element(rng, n)
        assert conjugate(a * b).equals(conjugate(b) * conjugate(a), tol)
        assert conjugate(conjugate(a)).equals(a, tol)
    for _ in range(cases):
        n = rng.randint(1, 6)
        x = _random_element(rng, n, 0, max_terms=6) * 0.5
        one = BASES[n].scalar(1)
        assert (grassmann_exp(x) * grassmann_exp(-x)).equals(one, tol)
        y = x + 1.5
        inv = invert_even(y)
        assert (y * inv).equals(one, tol) and (inv * y).equals(one, tol)
    for n in range(1, 7):
        words = list(oracle.all_words(n))
        for wa, wb in itertools.product(words, words):
            got = oracle.from_element(BASES[n].monomial(wa) * BASES[n].monomial(wb))
            assert got == oracle.multiply({wa: 1}, {wb: 1}), (n, wa, wb)


# -- 8 -------------------------------------------------------------------------

@criterion(8, "Model parser round trip and exact interacting Lagrangian", 2.0)
def test_parser():
    for name in ("simple", "interacting"):
        spec = load_fixture(name)
        again = parse_model(pretty_print(spec))
        assert structurally_equal(spec, again) and pretty_print(again) == pretty_print(spec)
    rng = random.Random(7)
    for idx in range(500):
        spec = parse_model(random_model(rng, idx))
        text = pretty_print(spec)
        again = parse_model(text)
        assert structurally_equal(spec, again) and pretty_print(again) == text
    spec = load_fixture("interacting")
    s, k = spec.symbol, spec.param_atom("k")
    want = (s("psi1") * s("d(psi2)") + s("psi2") * s("d(psi1)")) * 1j + s("psi1") * s("psi2") * k
    assert spec.lagrangian == want.expand()


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
