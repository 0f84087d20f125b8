"""Bundled model files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .model import ModelSpec, parse_model

FIXTURES = ("simple", "interacting")


def fixture_text(name: str) -> str:
    name = name.removesuffix(".fhj")
    return resources.files("fermihj").joinpath("fixtures", f"{name}.fhj").read_text()


def load_fixture(name: str) -> ModelSpec:
    return parse_model(fixture_text(name))


def resolve_model_path(path: str) -> tuple[str, str]:
    """Source text and display name for a path, falling back to bundled fixtures.

    ``fixtures/interacting.fhj`` resolves to the packaged copy when no such file
    exists relative to the working directory.
    """
    p = Path(path)
    if p.is_file():
        return p.read_text(), str(p)
    stem = p.name.removesuffix(".fhj")
    if stem in FIXTURES:
        return fixture_text(stem), f"<bundled {stem}.fhj>"
    raise FileNotFoundError(f"model file not found: {path}")
