import os
from fractions import Fraction

import pytest

from src.core.exceptions import BudgetExceededError, DomainError, InputError
from src.core.types import hyperbolic
from src.utils.cache_utils import DensityCache
from src.utils.density_utils import (
    Budget,
    alpha,
    alpha_via_beta,
    beta,
    build_frame,
    count_solutions,
    fq_at_special,
    fq_interpolate,
    siegel_series_value,
)
from src.utils.local_utils import check_functional_equation_n3
from tests.conftest import diag, half


# =========================================================
# RAW COUNTS
# =========================================================
def test_count_solutions_small():
    assert count_solutions(diag(1), diag(1), 3, 1) == 2
    assert count_solutions(diag(1), diag(2), 3, 1) == 0
    # xy = 0 mod 3: 5 solutions
    assert count_solutions(hyperbolic(1), diag(3), 3, 1) == 5
    assert count_solutions(hyperbolic(1), diag(3), 3, 1, primitive_only=True) == 4


def test_count_solutions_rejects_bad_shapes():
    with pytest.raises(InputError):
        count_solutions(diag(1), diag(1, 1), 3, 1)
    with pytest.raises(InputError):
        count_solutions(diag(1), diag(1), 4, 1)
    with pytest.raises(InputError):
        count_solutions(diag(1), diag(1), 3, 0)


def test_build_frame_scales_rows():
    frame = build_frame(diag(1, 3), 3)
    assert frame.exps == (0, 1)
    assert frame.base_level == 2
    assert frame.shift == 1
    assert build_frame(diag(1, 3), 2).exps == (0, 0)


# =========================================================
# LOCAL DENSITIES
# =========================================================
BINARY_BATTERY = [
    (1, 3, Fraction(2, 3)),
    (3, 3, Fraction(4, 3)),
    (9, 3, Fraction(2)),
    (1, 2, Fraction(1, 2)),
    (2, 2, Fraction(1)),
    (4, 2, Fraction(3, 2)),
    (5, 5, Fraction(8, 5)),
    (25, 5, Fraction(12, 5)),
]


@pytest.mark.parametrize("t, q, expected", BINARY_BATTERY)
def test_alpha_hyperbolic_plane(h1, t, q, expected):
    result = alpha(h1, diag(t), q)
    assert result.value == expected
    assert result.q == q
    assert alpha_via_beta(h1, diag(t), q) == expected


# ord_q(det 2T) <= 2; the ord-2 entries are maximal at q so non-primitive classes die out
ORACLE_BATTERY = [
    (diag(1, 1), 3),
    (diag(1, 3), 3),
    (diag(3, 3), 3),
    (half([[2, 1], [1, 2]]), 3),
    (half([[2, 1], [1, 2]]), 2),
    (diag(1, 1), 2),
    (diag(1, 1), 5),
]


@pytest.mark.parametrize("t, q", ORACLE_BATTERY)
def test_alpha_matches_reduction_route_binary(h2, t, q):
    assert alpha(h2, t, q).value == alpha_via_beta(h2, t, q)


@pytest.mark.slow
@pytest.mark.parametrize(
    "t, q",
    [
        (diag(1, 1, 3), 3),
        (half([[2, 1, 0], [1, 2, 0], [0, 0, 2]]), 2),
        (diag(1, 1, 1), 5),
    ],
)
def test_alpha_matches_reduction_route_ternary(h2, t, q):
    assert alpha(h2, t, q).value == alpha_via_beta(h2, t, q)


def test_beta_hyperbolic_plane(h1):
    assert beta(h1, diag(1), 3).value == Fraction(2, 3)
    assert beta(h1, diag(3), 3).value == Fraction(4, 3)
    assert beta(h1, diag(9), 3).value == Fraction(4, 3)


def test_alpha_unramified_ternary(h2):
    t = diag(1, 1, 3)
    expected = Fraction(576, 625)
    assert alpha(h2, t, 5).value == expected
    assert alpha_via_beta(h2, t, 5) == expected


def test_alpha_budget_exceeded(h2):
    with pytest.raises(BudgetExceededError) as excinfo:
        alpha(h2, diag(1, 1, 3), 5, budget=Budget(limit=10, q=5))
    assert excinfo.value.partial["limit"] == 10
    assert excinfo.value.partial["q"] == 5


def test_alpha_uses_cache(h1, cache_path):
    first = alpha(h1, diag(9), 3, cache=DensityCache(cache_path))
    assert first.cache_hits == 0
    assert os.path.exists(cache_path)
    second = alpha(h1, diag(9), 3, cache=DensityCache(cache_path))
    assert second.cache_hits == 2
    assert second.value == first.value == 2


# =========================================================
# SIEGEL SERIES AND F_q
# =========================================================
@pytest.mark.parametrize(
    "t, q, coeffs",
    [(9, 3, (1, 3, 9)), (3, 3, (1, 3)), (4, 2, (1, 2, 4)), (1, 2, (1,)), (5, 3, (1,)), (25, 5, (1, 5, 25))],
)
def test_fq_unary(t, q, coeffs):
    assert fq_interpolate(diag(t), q).coeffs == coeffs


def test_fq_ternary_satisfies_functional_equation():
    t = diag(1, 1, 3)
    f = fq_interpolate(t, 3)
    assert f.coeffs == (1, -9)
    assert check_functional_equation_n3(f, t, 3)


def test_fq_interpolation_guard():
    with pytest.raises(BudgetExceededError):
        fq_interpolate(diag(27), 3, budget=1)


def test_siegel_series_needs_half_degree():
    with pytest.raises(InputError):
        siegel_series_value(diag(1, 1, 1), 3, 1)


def test_fq_at_special(t0):
    assert fq_at_special(t0, 2) == 1
    assert fq_at_special(t0, 11) == 0
    assert fq_at_special(diag(1, 1, 3), 3) == 0
    with pytest.raises(DomainError):
        fq_at_special(diag(1, 1, 1, 3), 3)
    with pytest.raises(DomainError):
        fq_at_special(diag(1, 1), 3)
