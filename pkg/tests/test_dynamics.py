from __future__ import annotations

import numpy as np
import pytest

from fermihj.dynamics import (
    ComponentTrajectory,
    Grid,
    closed_form_error,
    convergence_ratio,
    default_initial,
    evaluate_on_trajectory,
    extract_component_odes,
    integrate,
    residual_check,
)
from fermihj.grassmann import GeneratorBasis
from fermihj.mechanics import UnsupportedModelError, euler_lagrange, legendre
from fermihj.model import parse_model
from fermihj import scalar as sx

K = 1.0


@pytest.fixture(scope="module")
def system(interacting):
    return extract_component_odes(euler_lagrange(interacting), interacting, params={"k": K})


def test_component_equations(system):
    rates = {system.slot_name(j): sx.to_text(e) for j, e in enumerate(system.rhs)}
    assert rates["psi1[xi1]"] == "0.5*i*k*psi1[xi1]"
    assert rates["psi2[xi2]"] == "(-0.5*i)*k*psi2[xi2]"
    env = sx.Env(params={"k": K}, values={(system.slot_name(j), 0): 1.0 for j in range(system.size)})
    got = [complex(sx.evaluate(e, env)) for e in system.rhs]
    assert got == [0.5j, 0.5j, -0.5j, -0.5j]


def test_simple_model_rates(simple):
    s = extract_component_odes(euler_lagrange(simple), simple)
    assert all(e == sx.ZERO for e in s.rhs)
    traj = integrate(s, grid=Grid(0, 10, 101))
    assert np.all(traj.values["psi"][1] == 1)


def test_rk4_accuracy(system):
    traj = integrate(system, grid=Grid.from_dt(0, 10, 1e-3))
    assert abs(traj.values["psi1"][1][-1] - np.exp(5j)) <= 1e-8
    err = closed_form_error(traj, "psi2", 2, lambda t: np.exp(-0.5j * K * t))
    assert err <= 1e-8


def test_convergence_order(system):
    ratio = convergence_ratio(system, "psi1", 1, lambda t: np.exp(0.5j * K * t), dt=1e-2)
    assert 15 < ratio < 17


def test_rk4_is_deterministic(system):
    a = integrate(system, grid=Grid(0, 2, 201))
    b = integrate(system, grid=Grid(0, 2, 201))
    assert all(np.array_equal(a.values[v][m], b.values[v][m]) for v in a.values for m in a.values[v])


def test_hamiltonian_conserved(interacting, system):
    traj = integrate(system, grid=Grid.from_dt(0, 10, 1e-3))
    H = legendre(interacting).hamiltonian
    comps = evaluate_on_trajectory(H, system, traj)
    h = comps[0b11]
    assert np.max(np.abs(h - h[0])) <= 1e-8
    assert h[0] == pytest.approx(-K)


def test_residual_zero_along_rk4(interacting, system):
    traj = integrate(system, grid=Grid(0, 10, 1001))
    assert residual_check(euler_lagrange(interacting), system, traj).max <= 1e-12


def test_perturbed_solution_detected(interacting, system):
    w = 0.5j * K
    traj = ComponentTrajectory.from_functions(system.basis, np.linspace(0, 10, 500), {
        "psi1": {("xi1",): (lambda t: 1.001 * np.exp(w * t), lambda t: w * np.exp(w * t))},
        "psi2": {("xi2",): (lambda t: np.exp(-w * t), lambda t: -w * np.exp(-w * t))},
    })
    r = residual_check(euler_lagrange(interacting), system, traj).max
    assert r == pytest.approx(5e-4 * K, rel=1e-6)


def test_zero_initial_data(interacting, system):
    zero = {v: system.basis.zero() for v in interacting.fermions}
    traj = integrate(system, zero, Grid(0, 1, 11))
    assert residual_check(euler_lagrange(interacting), system, traj).max == 0


def test_support_does_not_grow(system):
    init = default_initial(system)
    init["psi2"] = system.basis.zero()
    traj = integrate(system, init, Grid(0, 1, 11))
    assert np.all(traj.values["psi2"][1] == 0) and np.all(traj.values["psi2"][2] == 0)
    assert np.all(traj.values["psi1"][2] == 0)


def test_oscillator():
    spec = parse_model("model osc { boson q; lagrangian { 0.5*d(q)^2 - 0.5*q^2 } }")
    s = extract_component_odes(euler_lagrange(spec), spec)
    traj = integrate(s, grid=Grid.from_dt(0, 5, 1e-3))
    assert np.max(np.abs(traj.values["q"][0] - np.cos(traj.times))) <= 1e-9


def test_missing_parameter(interacting):
    with pytest.raises(sx.EvaluationError, match="k"):
        extract_component_odes(euler_lagrange(interacting), interacting)


def test_unsolvable_velocity():
    spec = parse_model("model z { fermion a; fermion b; lagrangian { a*b } }")
    with pytest.raises(UnsupportedModelError):
        extract_component_odes(euler_lagrange(spec), spec)


def test_initial_values_checked(system):
    with pytest.raises(ValueError):
        integrate(system, {"psi1": system.basis.scalar(1)}, Grid(0, 1, 3))
    with pytest.raises(KeyError):
        integrate(system, {"nope": system.basis.zero()}, Grid(0, 1, 3))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(0, 1, 1)
    with pytest.raises(ValueError):
        Grid(1, 0, 5)
