"""Case-study problem files shipped with the package."""

from __future__ import annotations

from importlib import resources

from ..system import InputError
from .problem import ProblemFile, parse_problem

_SUFFIX = ".stab"


def _root():
    return resources.files("stabcert") / "corpus"


def corpus_list() -> list[str]:
    return sorted(p.name[: -len(_SUFFIX)] for p in _root().iterdir() if p.name.endswith(_SUFFIX))


def corpus_text(name: str) -> str:
    if name not in corpus_list():
        raise InputError(f"unknown corpus entry {name!r}; available: {', '.join(corpus_list())}")
    return (_root() / (name + _SUFFIX)).read_text(encoding="utf-8")


def corpus_get(name: str) -> ProblemFile:
    return parse_problem(corpus_text(name))
