from __future__ import annotations

from pathlib import Path

import pytest

from trilang import link, link_units, load_manifest, parse_asm, parse_host

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name / "manifest.json"


def load_fixture(name: str):
    return link(load_manifest(fixture_path(name)))


def link_text(entry: str, middles: tuple[str, ...] = (), asms: tuple[str, ...] = (),
              entry_function: str = "main"):
    """Link inline sources; the unit/module names come from the text itself."""
    return link_units(
        parse_host(entry),
        [parse_host(m) for m in middles],
        [parse_asm(a) for a in asms],
        entry_function,
    )


@pytest.fixture(scope="session")
def bridge_program():
    return load_fixture("bridge")


@pytest.fixture(scope="session")
def threehop_program():
    return load_fixture("threehop")


@pytest.fixture(scope="session")
def chagap_program():
    return load_fixture("chagap")


@pytest.fixture(scope="session")
def asmtaint_program():
    return load_fixture("asmtaint")


@pytest.fixture(scope="session")
def alias_program():
    return load_fixture("alias")
