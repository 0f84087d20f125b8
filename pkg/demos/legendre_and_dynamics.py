"""Two coupled fermions: momenta, Hamiltonian, equations of motion and RK4.

Run: python demos/legendre_and_dynamics.py
"""

from __future__ import annotations

import numpy as np

from fermihj.bundled import load_fixture
from fermihj.dynamics import Grid, closed_form_error, convergence_ratio, extract_component_odes, integrate
from fermihj.mechanics import boundary_term, euler_lagrange, legendre

spec = load_fixture("interacting")
print("L =", spec.lagrangian.to_text())

canon = legendre(spec)
for pi, f in canon.momenta.items():
    print(f"{pi} = {f.to_text()}")
print("H =", canon.hamiltonian.to_text(), "| free of fermionic momenta:", canon.h_independent_of_fermionic_momenta)
print("BT =", boundary_term(spec).to_text())

eqs = euler_lagrange(spec)
for e in eqs:
    print(f"EL[{e.variable}]: {e.equation.to_text()} = 0")

# psi_a(0) = xi_a, so each component is a pure phase e^{+-ikt/2}
k = 1.0
system = extract_component_odes(eqs, spec, params={"k": k})
traj = integrate(system, grid=Grid.from_dt(0.0, 10.0, 1e-3))
err = closed_form_error(traj, "psi1", 1, lambda t: np.exp(0.5j * k * t))
ratio = convergence_ratio(system, "psi1", 1, lambda t: np.exp(0.5j * k * t), dt=1e-2)
print(f"RK4 error at dt=1e-3: {err:.2e}; error ratio when dt halves: {ratio:.2f}")
