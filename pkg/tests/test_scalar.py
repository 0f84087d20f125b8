from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermihj import scalar as sx

s1, s2 = sx.fn("s1"), sx.fn("s2")
s30 = sx.fn("s30", real=True)
k = sx.param("k")


@pytest.mark.parametrize(
    "expr, text",
    [
        (sx.div(s1, s30 + sx.I), "s1/(s30 + i)"),
        (s1 - s1, "0"),
        (sx.mul(2, s1) * 0 + 1, "1"),
        (sx.conj(s30), "s30"),
        (sx.power(s1, 2) * 3j - 2 * s2, "-2*s2 + 3*i*s1^2"),
        (sx.diff_t(s1), "d(s1)"),
    ],
)
def test_printing_and_simplification(expr, text):
    assert sx.to_text(expr) == text


def test_conj_involution():
    e = s1 * (2 + 1j) + sx.div(k, s2)
    assert sx.conj(sx.conj(e)) == e


def test_time_derivative_product_rule():
    e = s1 * s2
    d = sx.diff_t(e)
    env = sx.Env(functions={"s1": sx.FunctionSpec(np.sin, (np.cos,)), "s2": sx.FunctionSpec(np.exp, (np.exp,))}, t=0.4)
    want = math.cos(0.4) * math.exp(0.4) + math.sin(0.4) * math.exp(0.4)
    assert sx.evaluate(d, env) == pytest.approx(want, abs=1e-12)


def test_frozen_functions_are_constant_in_time():
    assert sx.diff_t(s1 * s2, frozen={"s1"}) == s1 * sx.fn("s2", 1)


def test_parameters_have_zero_time_derivative():
    assert sx.diff_t(k * sx.T) == k


def test_finite_difference_fallback():
    env = sx.Env(functions={"s1": lambda t: t ** 3}, t=2.0)
    assert sx.evaluate(sx.fn("s1", 1), env) == pytest.approx(12.0, rel=1e-7)


def test_division_by_zero_detected():
    env = sx.Env(params={"k": 0.0})
    with pytest.raises(sx.EvaluationError, match="division"):
        sx.evaluate(sx.div(1, k), env)


def test_unbound_function_named():
    with pytest.raises(sx.EvaluationError, match="s2"):
        sx.evaluate(s2, sx.Env(functions={}))


def test_vectorized_evaluation():
    t = np.linspace(0, 1, 5)
    env = sx.Env(functions={"s1": np.cos}, t=t)
    assert np.allclose(sx.evaluate(sx.conj(s1 * 1j), env), -1j * np.cos(t))


def test_subs_and_atoms():
    e = s1 * k + s2
    assert sx.atoms(sx.subs(e, {k: 2})) == {s1, s2}
    assert sx.is_constant(k * 2 + 1)
    assert not sx.is_constant(s1)


def test_expand():
    assert sx.expand((s1 + k) * (s1 - k)) == sx.power(s1, 2) - sx.power(k, 2)


def test_codegen_matches_evaluation():
    e = sx.div(s1 * k + 1, s30 + sx.I) - sx.conj(s1)
    src = sx.to_python(e, {("s1", 0): "a", ("s30", 0): "b"}, {"k": "kk"})
    got = eval(src, {"conj": np.conj, "np": np}, {"a": 0.3 + 0.2j, "b": 0.7, "kk": 1.5})
    env = sx.Env(params={"k": 1.5}, functions={"s1": 0.3 + 0.2j, "s30": 0.7})
    assert complex(got) == pytest.approx(complex(sx.evaluate(e, env)))


reals = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(reals, reals, reals)
def test_arithmetic_matches_python(a, b, c):
    e = (sx.Const(a) * s1 + b) * (s1 - c)
    env = sx.Env(functions={"s1": 0.7 - 0.1j})
    x = 0.7 - 0.1j
    assert complex(sx.evaluate(e, env)) == pytest.approx((a * x + b) * (x - c), abs=1e-12)
    assert complex(sx.evaluate(sx.expand(e), env)) == pytest.approx((a * x + b) * (x - c), abs=1e-12)
