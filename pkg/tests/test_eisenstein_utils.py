from fractions import Fraction

import pytest
from sympy import divisor_sigma

from src.constants import T0_LIMIT
from src.core.exceptions import IncompleteTableError, InputError
from src.core.types import CoeffTable, HalfIntSym
from src.utils.arith_utils import bernoulli, ord
from src.utils.eisenstein_utils import (
    a_factor,
    chi_T,
    congruence_check,
    eis_coeff,
    k_sequence,
    limit_eis2_coeff,
    limit_report,
    limit_table,
    siegel_phi,
    theta_operator,
    vanishing_report,
    zero_table,
)
from src.utils.global_utils import genus_theta_coeff, theta_table
from tests.conftest import diag, half


def test_k_sequence():
    assert [k_sequence(11, m) for m in (1, 2, 3)] == [12, 112, 1212]
    assert k_sequence(5, 1) == 6
    with pytest.raises(InputError):
        k_sequence(5, 0)


def test_chi_T(h1):
    assert chi_T(diag(1, 1)).discriminant == -4
    assert chi_T(half([[2, 1], [1, 2]])).discriminant == -3
    assert chi_T(h1).is_trivial
    with pytest.raises(InputError):
        chi_T(diag(1, 1, 1))


# =========================================================
# FOURIER COEFFICIENTS
# =========================================================
@pytest.mark.parametrize("k", [4, 6, 8, 10])
def test_degree_one_matches_divisor_sums(k):
    for t in range(1, 21):
        expected = -Fraction(2 * k) / bernoulli(k) * int(divisor_sigma(t, k - 1))
        assert eis_coeff(1, k, diag(t)) == expected


def test_known_degree_one_values():
    assert eis_coeff(1, 4, diag(1)) == 240
    assert eis_coeff(1, 6, diag(2)) == -16632


def test_known_degree_two_values():
    assert eis_coeff(2, 4, half([[2, 1], [1, 2]])) == 13440
    assert eis_coeff(2, 4, diag(1, 1)) == 30240


@pytest.mark.parametrize("n, k", [(1, 2), (1, 5), (3, 2), (3, 4 + 1)])
def test_eis_coeff_rejects_weights(n, k):
    with pytest.raises(InputError):
        eis_coeff(n, k, diag(*([1] * n)))


def test_eis_coeff_rejects_indefinite(h1):
    with pytest.raises(InputError):
        eis_coeff(2, 4, h1)
    with pytest.raises(InputError):
        eis_coeff(2, 4, diag(1))


# =========================================================
# p-ADIC LIMITS
# =========================================================
def test_limit_degree_three(t0):
    assert limit_eis2_coeff(3, 11, t0) == T0_LIMIT
    assert limit_eis2_coeff(3, 3, diag(1, 1, 1)) == 0


def test_limit_degree_four(reps11):
    assert limit_eis2_coeff(4, 11, reps11[0].gram) == Fraction(288, 25)
    assert limit_eis2_coeff(4, 3, diag(1, 1, 1, 3)) == 0
    assert limit_eis2_coeff(4, 3, diag(1, 1, 1, 1)) == 0


def test_limit_rejects_bad_prime(t0):
    with pytest.raises(InputError):
        limit_eis2_coeff(3, 2, t0)
    with pytest.raises(InputError):
        limit_eis2_coeff(2, 11, diag(1, 1))


def test_limit_report_degree_one():
    rep = limit_report(1, 5, diag(1), 2)
    assert [k for _, k, _ in rep.terms] == [6, 22]
    assert [v for _, _, v in rep.terms] == [-504, -44 / bernoulli(22)]
    assert rep.terms[1][2] == Fraction(-552, 77683)
    # -552/77683 + 504 = 39151680/77683 and 5 || 39151680
    assert rep.cauchy_orders == (1,)
    assert rep.target is None and rep.target_orders == ()
    with pytest.raises(InputError):
        limit_report(1, 5, diag(1), 1)


@pytest.mark.slow
@pytest.mark.parametrize(
    "p, two_t",
    [
        (3, ((2, 0, 1), (0, 2, 0), (1, 0, 6))),
        (3, ((2, 0, 0), (0, 2, 0), (0, 0, 2))),
        (11, ((2, 0, 1), (0, 2, 0), (1, 0, 6))),
        (11, ((2, 0, 0), (0, 2, 0), (0, 0, 6))),
    ],
)
def test_limit_report_converges(p, two_t):
    t = half(two_t)
    rep = limit_report(3, p, t, 3)
    assert [k for _, k, _ in rep.terms] == [k_sequence(p, m) for m in (1, 2, 3)]
    assert rep.target == limit_eis2_coeff(3, p, t)
    # E_{k_m} agrees with the limit mod p^m
    assert all(o >= i + 1 for i, o in enumerate(rep.target_orders))
    assert all(o >= i + 1 for i, o in enumerate(rep.cauchy_orders))


def test_vanishing_orders_increase():
    report = vanishing_report(5, 7, 3)
    assert [o["ord"] for o in report["orders"]] == [1, 2, 3]
    assert report["genus_side"] is None
    with pytest.raises(InputError):
        vanishing_report(4, 7, 2)


def test_vanishing_report_genus_side(reps11):
    report = vanishing_report(5, 7, 2, reps=reps11)
    assert report["genus_side"] == "0"
    assert [o["ord"] for o in report["orders"]] == [1, 2]


@pytest.mark.parametrize(
    "t",
    [
        diag(1, 1, 1, 1, 1),
        diag(1, 1, 1, 1, 3),
        half([[2, 1, 0, 0, 0], [1, 2, 0, 0, 0], [0, 0, 2, 1, 0], [0, 0, 1, 2, 0], [0, 0, 0, 0, 2]]),
    ],
)
def test_genus_theta_vanishes_in_degree_five(reps11, t):
    assert genus_theta_coeff(reps11, t) == 0


def test_a_factor_needs_t_for_even_degree():
    assert a_factor(8, 1) == 8 / bernoulli(8)
    with pytest.raises(InputError):
        a_factor(8, 2)


# =========================================================
# TABLE OPERATORS
# =========================================================
def _table(n, bound, entries, label="t"):
    return CoeffTable(n=n, bound=bound, entries={k: Fraction(v) for k, v in entries.items()}, label=label)


def test_theta_operator():
    table = _table(2, 1, {(2, 1, 1, 2): 5, (2, 2, 2, 2): 7})
    out = theta_operator(table)
    assert out.entries[(2, 1, 1, 2)] == Fraction(15, 4)
    assert out.entries[(2, 2, 2, 2)] == 0


def test_siegel_phi_matches_lower_degree():
    s = diag(1, 1)
    phi = siegel_phi(theta_table(s, 2, 2))
    assert phi.entries == theta_table(s, 1, 2).entries


def test_siegel_phi_strict_and_lenient():
    table = _table(2, 1, {(2, 0, 0, 2): 1, (2, 0, 0, 0): 4})
    with pytest.raises(IncompleteTableError):
        siegel_phi(table)
    lenient = siegel_phi(table, strict=False)
    assert lenient.entries == {(0,): Fraction(0), (2,): Fraction(4)}
    top = siegel_phi(_table(1, 1, {(0,): 1, (2,): 6}))
    assert top.entries == {(): Fraction(1)}


def test_congruence_check():
    a = _table(1, 2, {(2,): 7, (4,): 26})
    b = _table(1, 2, {(2,): 2, (4,): 1})
    assert congruence_check(a, b, 5, 1)["ok"]
    result = congruence_check(a, b, 5, 2)
    assert result["keys_checked"] == 2
    assert [f["two_t"] for f in result["failures"]] == [[2]]
    assert congruence_check(a, zero_table(a), 13, 1)["failures"][0]["two_t"] == [2]


def test_congruence_check_errors():
    a = _table(1, 2, {(2,): Fraction(1, 5)})
    with pytest.raises(InputError):
        congruence_check(a, zero_table(a), 5, 1)
    with pytest.raises(InputError):
        congruence_check(a, _table(1, 2, {(4,): 1}), 5, 1)
    with pytest.raises(InputError):
        congruence_check(a, a, 5, 0)


@pytest.mark.slow
def test_degree_four_limit_supported_on_square_det():
    table = limit_table(4, 3, 2)
    assert table.entries
    for key, value in table.entries.items():
        if value:
            assert ord(HalfIntSym.from_key(4, key).det2, 3) >= 2
