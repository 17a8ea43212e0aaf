import json
import random
from fractions import Fraction

import pytest
import sympy

from src.constants import MASS_TABLE, T0_LIMIT
from src.core.exceptions import DomainError, InputError, NotFoundError
from src.core.types import HalfIntSym, hyperbolic
from src.utils.global_utils import (
    _siegel_prefactor,
    aut_count,
    construct_Sp,
    enumerate_keys,
    genus_theta_coeff,
    level,
    load_reps,
    mass,
    mass_closed_form,
    mass_formula_coeff,
    rep_count,
    short_vectors,
    siegel_weighted_average,
    theta_table,
    verify_genus_membership,
)
from src.utils.matrix_utils import congruent, identity
from tests.conftest import diag, half

A2 = ((2, 1), (1, 2))


# =========================================================
# SHORT VECTORS AND REPRESENTATION COUNTS
# =========================================================
def test_short_vectors():
    assert short_vectors(diag(1, 1), 2) == ((-1, 0), (0, -1), (0, 1), (1, 0))
    assert short_vectors(diag(1, 1), 0) == ((0, 0),)
    assert len(short_vectors(half(A2), 2)) == 6
    assert short_vectors(diag(1, 1), 3) == ()


@pytest.mark.parametrize("s, expected", [(diag(1, 1), 8), (diag(1, 2), 4), (half(A2), 12)])
def test_aut_count_binary(s, expected):
    assert aut_count(s) == expected


def test_aut_count_genus_reps(reps11):
    assert [aut_count(r.gram) for r in reps11] == [32, 72, 24]


def test_rep_count_t0(reps11, t0):
    assert [rep_count(r.gram, t0) for r in reps11] == [16, 0, 0]


def _random_unimodular(rng, n, steps=4):
    u = identity(n)
    for _ in range(steps):
        i, j = rng.sample(range(n), 2)
        c = rng.choice((-1, 1))
        for row in u:
            row[i] += c * row[j]
    return u


@pytest.mark.parametrize("seed", range(3))
def test_rep_count_is_gl_invariant(reps11, t0, seed):
    rng = random.Random(seed)
    s = reps11[0].gram
    moved_s = half(congruent(s.two_t, _random_unimodular(rng, 4)))
    moved_t = half(congruent(t0.two_t, _random_unimodular(rng, 3)))
    assert rep_count(moved_s, t0) == 16
    assert rep_count(s, moved_t) == 16
    for t in (diag(1), diag(3), half(A2)):
        assert rep_count(moved_s, t) == rep_count(s, t)


def _automorphisms(s: HalfIntSym):
    g = s.two_t
    columns = [short_vectors(s, g[k][k]) for k in range(s.n)]
    found = []

    def extend(cols):
        k = len(cols)
        if k == s.n:
            found.append(tuple(cols))
            return
        for x in columns[k]:
            gx = [sum(g[i][j] * x[j] for j in range(s.n)) for i in range(s.n)]
            if all(sum(a * b for a, b in zip(gx, c)) == g[k][l] for l, c in enumerate(cols)):
                extend(cols + [x])

    extend([])
    return found


def _act(cols, v):
    return tuple(sum(cols[k][i] * v[k] for k in range(len(v))) for i in range(len(v)))


@pytest.mark.parametrize("index", [0, 2])
def test_orbits_of_represented_vectors_divide_aut_count(reps11, index):
    s = reps11[index].gram
    group = _automorphisms(s)
    assert len(group) == aut_count(s) == reps11[index].aut_count
    for norm in (2, 4, 6):
        vectors = set(short_vectors(s, norm))
        covered = set()
        for v in vectors:
            orbit = {_act(cols, v) for cols in group}
            assert orbit <= vectors
            assert len(group) % len(orbit) == 0
            covered |= orbit
        assert covered == vectors
        assert len(vectors) == rep_count(s, diag(norm // 2))


def test_rep_count_rejects_indefinite(h1):
    with pytest.raises(InputError):
        rep_count(h1, diag(1))


def test_theta_table_unary():
    table = theta_table(diag(1), 1, 4)
    assert table.entries == {
        (0,): Fraction(1),
        (2,): Fraction(2),
        (4,): Fraction(0),
        (6,): Fraction(0),
        (8,): Fraction(2),
    }


# =========================================================
# KEYS
# =========================================================
def test_enumerate_keys():
    assert [t.key for t in enumerate_keys(1, 3)] == [(0,), (2,), (4,), (6,)]
    assert len(enumerate_keys(1, 3, positive_only=True)) == 3
    assert len(enumerate_keys(2, 1)) == 8
    assert [t.key for t in enumerate_keys(2, 1, positive_only=True)] == [(2, -1, -1, 2), (2, 0, 0, 2), (2, 1, 1, 2)]
    with pytest.raises(InputError):
        enumerate_keys(2, 0)


# =========================================================
# GENUS AVERAGES
# =========================================================
def test_mass(reps11):
    assert mass(reps11) == Fraction(25, 288)
    assert 1 / mass(reps11) == MASS_TABLE[11]


@pytest.mark.parametrize("p", sorted(MASS_TABLE))
def test_mass_closed_form(p):
    assert mass_closed_form(p) == MASS_TABLE[p]


def test_genus_theta_coeff(reps11, t0):
    assert genus_theta_coeff(reps11, t0) == T0_LIMIT


def test_level(reps11):
    assert level(hyperbolic(2)) == 1
    assert level(reps11[0].gram) == 11
    assert level(diag(1, 1, 1, 1)) == 4
    assert level(HalfIntSym.block_sum(half(A2), half(A2))) == 3


def test_genus_membership(reps11):
    assert all(verify_genus_membership(r.gram, 11) for r in reps11)
    assert verify_genus_membership(HalfIntSym.block_sum(half(A2), half(A2)), 3)
    assert not verify_genus_membership(reps11[0].gram, 13)
    assert not verify_genus_membership(diag(1, 1, 1, 1), 3)


def test_construct_sp_three():
    s = construct_Sp(3, 6)
    assert verify_genus_membership(s, 3)
    assert s.det2 == 9
    assert sum(s.two_t[i][i] for i in range(4)) == 8


def test_construct_sp_bad_input():
    with pytest.raises(InputError):
        construct_Sp(9, 6)
    with pytest.raises(NotFoundError):
        construct_Sp(31, 2)


@pytest.mark.slow
def test_construct_sp_five():
    s = construct_Sp(5, 6)
    assert verify_genus_membership(s, 5)


def test_load_reps(tmp_path, reps11):
    path = tmp_path / "reps.json"
    s1 = reps11[0].gram.to_json()
    s2 = reps11[1].gram.to_json()
    path.write_text(json.dumps([s1, {"two_s": s2, "aut": 72, "name": "second"}]))
    reps = load_reps(str(path))
    assert [r.aut_count for r in reps] == [32, 72]
    assert [r.name for r in reps] == ["S1", "second"]
    assert reps[0].gram == reps11[0].gram


def test_load_reps_errors(tmp_path):
    with pytest.raises(InputError):
        load_reps(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([[[1, 0], [0, 2]]]))
    with pytest.raises(InputError):
        load_reps(str(bad))
    empty = tmp_path / "empty.json"
    empty.write_text("[]")
    with pytest.raises(InputError):
        load_reps(str(empty))


# =========================================================
# SIEGEL'S FORMULA
# =========================================================
def test_mass_formula_coeff(t0):
    assert mass_formula_coeff(t0, 11) == T0_LIMIT
    with pytest.raises(DomainError):
        mass_formula_coeff(diag(1, 1), 11)


def test_siegel_weighted_average(reps11, t0):
    s1 = reps11[0].gram
    assert siegel_weighted_average(s1, t0, reps11) == Fraction(144, 25)
    assert siegel_weighted_average(s1, s1, reps11) == Fraction(288, 25)


def test_siegel_weighted_average_outside_genus(reps11, t0):
    with pytest.raises(DomainError):
        siegel_weighted_average(diag(1, 1, 1, 1), t0, reps11)


def test_siegel_prefactor():
    # Gamma(3/2) Gamma(1) in degree 3, times Gamma(1/2) in degree 4
    assert sympy.simplify(_siegel_prefactor(4, 3, 121, 44) - 8 * sympy.pi ** 4 / 1331) == 0
    assert sympy.simplify(_siegel_prefactor(4, 4, 121, 121) - 16 * sympy.pi ** 4 / (121 ** 2 * 11)) == 0
