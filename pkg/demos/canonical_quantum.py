"""Canonical-transformation and wave-function reading of the reduced solution.

Run: python demos/canonical_quantum.py
"""

from __future__ import annotations

import numpy as np

from fermihj.canonical import (
    build_canonical_data,
    build_symbolic,
    check_finite_canonical,
    check_schrodinger_form,
    check_wave_relation,
    evolution_identity,
)
from fermihj.hj import InteractingClosedForm

sym = build_symbolic()
for f in ("psi1", "psi2"):
    print(f"{f} = {sym.psi[f].to_text()}")
print("G =", sym.G.to_text())
print("evolution identity is a structural zero:", all(p.is_zero() for p in evolution_identity(sym).values()))

cf = InteractingClosedForm()
data = [build_canonical_data(cf, t) for t in np.linspace(0.0, 10.0, 11)]
for rep in (check_finite_canonical(data), check_wave_relation(data)):
    print(f"{rep.name}: max residual {rep.max_residual:.1e}")

rep = check_schrodinger_form(cf, np.linspace(0.0, 10.0, 2001))
for name, value in rep.residuals.items():
    print(f"  {name:<34} {value:.2e}")
print("hbar =", rep.extra["hbar"])
