"""Grassmann-valued classical mechanics and Hamilton-Jacobi tooling for fermionic models."""

from __future__ import annotations

__version__ = "0.1.0"

from .grassmann import GeneratorBasis, GrassmannElement, grassmann_exp, invert_even  # noqa: E402
from .model import ModelSpec, load_model, parse_model  # noqa: E402
from .mechanics import euler_lagrange, legendre  # noqa: E402
from .poly import GrassmannPoly, OddSymbolTable  # noqa: E402

__all__ = [
    "GeneratorBasis",
    "GrassmannElement",
    "GrassmannPoly",
    "ModelSpec",
    "OddSymbolTable",
    "euler_lagrange",
    "grassmann_exp",
    "invert_even",
    "legendre",
    "load_model",
    "parse_model",
]
