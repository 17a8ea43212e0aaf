from __future__ import annotations

import pytest

from src.constants import T0_TWO_T
from src.core.types import HalfIntSym, hyperbolic
from src.utils.global_utils import p11_reps


def half(rows) -> HalfIntSym:
    """Builder from rows of 2T."""
    return HalfIntSym(two_t=rows)


def diag(*entries) -> HalfIntSym:
    return HalfIntSym.diag(*entries)


@pytest.fixture
def t0() -> HalfIntSym:
    return HalfIntSym(two_t=T0_TWO_T)


@pytest.fixture
def h1() -> HalfIntSym:
    return hyperbolic(1)


@pytest.fixture
def h2() -> HalfIntSym:
    return hyperbolic(2)


@pytest.fixture(scope="session")
def reps11():
    return p11_reps()


@pytest.fixture
def cache_path(tmp_path):
    return str(tmp_path / "cache" / "densities.jsonl")
