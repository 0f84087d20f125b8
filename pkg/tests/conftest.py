from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from fermihj.bundled import load_fixture  # noqa: E402
from fermihj.grassmann import GeneratorBasis, GrassmannElement  # noqa: E402


@pytest.fixture(scope="session")
def interacting():
    return load_fixture("interacting")


@pytest.fixture(scope="session")
def simple():
    return load_fixture("simple")


def basis_of(n: int) -> GeneratorBasis:
    return GeneratorBasis.from_names([f"t{j}" for j in range(n)])


coeffs = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False).map(
    lambda z: complex(round(z.real, 6), round(z.imag, 6))
)


@st.composite
def elements(draw, n=None, parity=None, max_terms=8):
    n = draw(st.integers(1, 6)) if n is None else n
    masks = st.integers(0, (1 << n) - 1)
    if parity is not None:
        masks = masks.filter(lambda m: m.bit_count() % 2 == parity)
    terms = draw(st.dictionaries(masks, coeffs, max_size=max_terms))
    return GrassmannElement(basis_of(n), terms)


@st.composite
def element_tuples(draw, k=2, parity=None):
    n = draw(st.integers(1, 6))
    return tuple(draw(elements(n=n, parity=parity[i] if isinstance(parity, tuple) else parity)) for i in range(k))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
