"""Example designs shipped with the package."""

from __future__ import annotations

from importlib import resources

from ..ast import Program
from ..parser import parse

SUFFIX = ".cc.txt"


def names() -> list[str]:
    files = resources.files(__name__).iterdir()
    return sorted(f.name[: -len(SUFFIX)] for f in files if f.name.endswith(SUFFIX))


def source(name: str) -> str:
    return resources.files(__name__).joinpath(name + SUFFIX).read_text(encoding="utf-8")


def load(name: str) -> Program:
    return parse(source(name))
