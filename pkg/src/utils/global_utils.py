import json
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from fractions import Fraction
from functools import lru_cache
from itertools import product

import sympy

from src.constants import P11_REPRESENTATIVES
from src.core.config import settings
from src.core.exceptions import BudgetExceededError, ConsistencyError, DomainError, InputError, NotFoundError
from src.core.logger import logging
from src.core.types import CoeffTable, GenusRep, HalfIntSym, hyperbolic
from src.utils.arith_utils import chi_q, is_odd_prime, relevant_places
from src.utils.density_utils import Budget, alpha_via_beta
from src.utils.local_utils import alpha_p_closed, local_invariants
from src.utils.matrix_utils import is_positive_definite, is_positive_semidefinite, rational_inverse


# =========================================================
# SHORT VECTORS
# =========================================================
def _fincke_pohst(g):
    """Rational coefficients q with x^T g x = sum_i q_ii (x_i + sum_{j>i} q_ij x_j)^2."""
    m = len(g)
    q = [[Fraction(x) for x in row] for row in g]
    for i in range(m):
        for j in range(i + 1, m):
            q[j][i] = q[i][j]
            q[i][j] = q[i][j] / q[i][i]
        for k in range(i + 1, m):
            for l in range(k, m):
                q[k][l] -= q[k][i] * q[i][l]
    return q


def _lattice_point_estimate(s: HalfIntSym, value: int) -> float:
    m = s.n
    if value == 0:
        return 1.0
    vol = math.pi ** (m / 2) / math.gamma(m / 2 + 1)
    return vol * (value + 2 * m) ** (m / 2) / math.sqrt(s.det2)


@lru_cache(maxsize=None)
def short_vectors(s: HalfIntSym, value: int) -> tuple[tuple[int, ...], ...]:
    """
    Every x in Z^m with x^T (2S) x = value, for positive-definite S.

    Coordinates are fixed from the last one down; each range comes from an
    integer square root of the remaining budget, and membership is checked
    exactly.
    """
    m = s.n
    if value < 0:
        return ()
    if value == 0:
        return ((0,) * m,)
    q = _fincke_pohst(s.two_t)
    out = []
    x = [0] * m

    def search(i, remaining):
        if i < 0:
            if remaining == 0:
                out.append(tuple(x))
            return
        center = -sum(q[i][j] * x[j] for j in range(i + 1, m))
        radius = math.isqrt(math.floor(remaining / q[i][i])) + 1
        for xi in range(math.floor(center) - radius, math.ceil(center) + radius + 1):
            used = q[i][i] * (xi - center) ** 2
            if used <= remaining:
                x[i] = xi
                search(i - 1, remaining - used)
        x[i] = 0

    search(m - 1, Fraction(value))
    return tuple(sorted(out))


# =========================================================
# REPRESENTATION COUNTS
# =========================================================
def _check_definite(s: HalfIntSym):
    if not is_positive_definite(s.two_t):
        raise InputError(f"S must be positive definite, got 2S={s.to_json()}")


def rep_count(s: HalfIntSym, t: HalfIntSym, budget: Budget | None = None, threads: int | None = None) -> int:
    """
    #{X in M_{m,n}(Z) : S[X] = T}.

    Args:
        s (HalfIntSym): positive-definite S of degree m.
        t (HalfIntSym): semi-positive T of degree n.

    Returns:
        int: exact count by column backtracking over short vectors.
    """
    _check_definite(s)
    if t.n < 1:
        raise InputError("T must have degree at least 1")
    g = s.two_t
    two_t = t.two_t
    n = t.n
    budget = budget or Budget(task="rep_count", two_s=s.to_json(), two_t=t.to_json())
    for k in range(n):
        if _lattice_point_estimate(s, two_t[k][k]) > budget.limit:
            raise BudgetExceededError(
                f"too many vectors of norm {two_t[k][k]} for the enumeration budget",
                {"two_s": s.to_json(), "norm": two_t[k][k], "limit": budget.limit},
            )
    columns = [short_vectors(s, two_t[k][k]) for k in range(n)]
    budget.spend(sum(len(c) for c in columns))
    images = {}
    for col in columns:
        for x in col:
            if x not in images:
                images[x] = tuple(sum(gi[j] * x[j] for j in range(s.n)) for gi in g)

    def search_from(first):
        count = 0
        chosen = [first]

        def extend(k):
            nonlocal count
            if k == n:
                count += 1
                return
            for x in columns[k]:
                if all(sum(a * b for a, b in zip(images[chosen[l]], x)) == two_t[l][k] for l in range(k)):
                    chosen.append(x)
                    extend(k + 1)
                    chosen.pop()

        extend(1)
        return count

    total = 0
    with ThreadPoolExecutor(max_workers=threads or settings.THREAD_COUNT) as executor:
        futures = {executor.submit(search_from, x): x for x in columns[0]}
        for future in as_completed(futures):
            total += future.result()
    return total


def aut_count(s: HalfIntSym) -> int:
    return rep_count(s, s)


# =========================================================
# THETA TABLES
# =========================================================
def enumerate_keys(n: int, bound: int, positive_only: bool = False) -> list[HalfIntSym]:
    """
    Half-integral T of degree n with 0 <= t_ii <= bound, semi-positive
    (or positive definite), sorted by their 2T key.
    """
    if bound < 1:
        raise InputError("bound must be at least 1")
    low = 1 if positive_only else 0
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    out = []
    for diag in product(range(low, bound + 1), repeat=n):
        ranges = []
        for i, j in pairs:
            cap = 4 * diag[i] * diag[j]
            lim = math.isqrt(cap - 1) if positive_only else math.isqrt(cap)
            ranges.append(range(-lim, lim + 1))
        for offs in product(*ranges):
            rows = [[0] * n for _ in range(n)]
            for i in range(n):
                rows[i][i] = 2 * diag[i]
            for (i, j), v in zip(pairs, offs):
                rows[i][j] = rows[j][i] = v
            ok = is_positive_definite(rows) if positive_only else is_positive_semidefinite(rows)
            if ok:
                out.append(HalfIntSym(two_t=rows))
    return sorted(out, key=lambda t: t.key)


def theta_table(s: HalfIntSym, n: int, bound: int, threads: int | None = None) -> CoeffTable:
    """Degree-n theta coefficients of S on every semi-positive T with diagonal <= bound."""
    _check_definite(s)
    keys = enumerate_keys(n, bound)
    logging.info(f"Theta table of degree {n} for 2S={s.to_json()}: {len(keys)} keys")
    entries = {}
    with ThreadPoolExecutor(max_workers=threads or settings.THREAD_COUNT) as executor:
        futures = {executor.submit(rep_count, s, t, None, 1): t for t in keys}
        for future in as_completed(futures):
            entries[futures[future].key] = Fraction(future.result())
    return CoeffTable(n=n, bound=bound, entries={k: entries[k] for k in sorted(entries)}, label="theta")


# =========================================================
# GENUS AVERAGES
# =========================================================
def mass(reps) -> Fraction:
    if not reps:
        raise InputError("need at least one representative")
    return sum((Fraction(1, r.aut_count) for r in reps), Fraction(0))


def genus_theta_coeff(reps, t: HalfIntSym) -> Fraction:
    """Automorphism-weighted average of rep_count(S_i, T) over the representatives."""
    total = Fraction(0)
    for r in reps:
        total += Fraction(rep_count(r.gram, t), r.aut_count)
    return total / mass(reps)


def level(s: HalfIntSym) -> int:
    """Least N with N (2S)^{-1} integral with even diagonal."""
    if s.det2 == 0:
        raise InputError("S must be nondegenerate")
    inv = rational_inverse(s.two_t)
    n = s.n
    dens = [(inv[i][j] if i != j else inv[i][i] / 2).denominator for i in range(n) for j in range(n)]
    return math.lcm(*dens)


def verify_genus_membership(s: HalfIntSym, p: int) -> bool:
    """
    True iff S has degree 4, det S = p^2/16, level p, Hasse invariant -1
    exactly at 2 and p, and det(2S)/p^2 a square unit everywhere.
    """
    if s.n != 4 or not is_odd_prime(p):
        return False
    if not is_positive_definite(s.two_t) or s.det2 != p * p:
        return False
    if level(s) != p:
        return False
    for q in relevant_places(s.det2)[:-1]:
        if (local_invariants(s, q).hasse == -1) != (q in (2, p)):
            return False
        if chi_q(Fraction(s.det2, p * p), q) != 1:
            return False
    return True


def construct_Sp(p: int, search_bound: int) -> HalfIntSym:
    """
    A quaternary S in the genus of S^(p), by exhaustive search.

    Candidates 2S have even diagonal d_1 <= ... <= d_4 and every entry of
    absolute value <= search_bound. Traces are tried in increasing order;
    within a trace the diagonal runs lexicographically, then the entries above
    it row by row from the most negative value up.

    Raises:
        NotFoundError: nothing in the genus within the bound.
    """
    if not is_odd_prime(p):
        raise InputError(f"p must be an odd prime, got {p}")
    if search_bound < 2:
        raise InputError("search bound must be at least 2")
    diag_values = list(range(2, search_bound + 1, 2))
    rows = [[0] * 4 for _ in range(4)]

    def leading_ok(k):
        return is_positive_definite([r[:k] for r in rows[:k]])

    def fill(pos, diag):
        # pos walks the upper triangle row by row: (i, j) with j >= i
        if pos == len(slots):
            if leading_ok(4) and verify_genus_membership(HalfIntSym(two_t=rows), p):
                return HalfIntSym(two_t=rows)
            return None
        i, j = slots[pos]
        if i == j:
            rows[i][i] = diag[i]
            if i > 0 and not leading_ok(i + 1):
                return None
            return fill(pos + 1, diag)
        lim = min(search_bound, math.isqrt(diag[i] * diag[j] - 1))
        for v in range(-lim, lim + 1):
            rows[i][j] = rows[j][i] = v
            found = fill(pos + 1, diag)
            if found is not None:
                return found
        rows[i][j] = rows[j][i] = 0
        return None

    slots = [(i, j) for i in range(4) for j in range(i, 4)]
    for trace in range(8, 4 * search_bound + 1, 2):
        diags = sorted(
            d for d in product(diag_values, repeat=4) if sum(d) == trace and list(d) == sorted(d)
        )
        for diag in diags:
            found = fill(0, diag)
            if found is not None:
                logging.info(f"Found S^({p}) candidate with trace {trace}: {found.to_json()}")
                return found
    raise NotFoundError(f"no form in the genus of S^({p}) with entries <= {search_bound}; try a larger bound")


# =========================================================
# REPRESENTATIVES
# =========================================================
def p11_reps() -> list[GenusRep]:
    return [GenusRep(gram=HalfIntSym(two_t=rows), aut_count=aut, name=name) for name, rows, aut in P11_REPRESENTATIVES]


def load_reps(path: str) -> list[GenusRep]:
    """
    Representatives from a JSON file.

    Each item is either a list of rows of 2S or an object
    {"two_s": rows, "aut": int, "name": str}; missing automorphism counts are computed.
    """
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        logging.error(f"Could not read representatives from {path}: {e}")
        raise InputError(f"could not read representatives from {path}: {e}") from e
    if not isinstance(data, list) or not data:
        raise InputError("representative file must hold a nonempty JSON list")
    reps = []
    for idx, item in enumerate(data):
        if isinstance(item, dict):
            rows, aut, name = item.get("two_s"), item.get("aut"), item.get("name", f"S{idx + 1}")
        else:
            rows, aut, name = item, None, f"S{idx + 1}"
        try:
            gram = HalfIntSym(two_t=rows)
        except ValueError as e:
            raise InputError(f"representative {idx}: {e}") from e
        reps.append(GenusRep(gram=gram, aut_count=aut or aut_count(gram), name=name))
    return reps


# =========================================================
# SIEGEL'S FORMULA FOR THE GENUS OF S^(p)
# =========================================================
def _siegel_prefactor(m: int, n: int, det2_s: int, det2_t: int):
    """2^n eps pi^{n(2m-n+1)/4} prod_{i=1}^{n-1} Gamma((m-i)/2)^{-1} det(2S)^{-n/2} det(2T)^{(m-n-1)/2}, symbolic."""
    eps = sympy.Rational(1, 2) if m == n + 1 or m == n > 1 else 1
    value = 2 ** n * eps * sympy.pi ** sympy.Rational(n * (2 * m - n + 1), 4)
    for i in range(1, n):
        value /= sympy.gamma(sympy.Rational(m - i, 2))
    value *= sympy.Integer(det2_s) ** sympy.Rational(-n, 2)
    value *= sympy.Integer(det2_t) ** sympy.Rational(m - n - 1, 2)
    return value


def _to_fraction(value, what: str) -> Fraction:
    value = sympy.simplify(value)
    if not value.is_Rational:
        logging.error(f"{what} did not cancel to a rational: {value}")
        raise ConsistencyError(f"{what} left a transcendental or irrational factor: {value}")
    return Fraction(int(value.p), int(value.q))


def mass_formula_coeff(t: HalfIntSym, p: int) -> Fraction:
    """
    Genus-average coefficient at T for the genus of S^(p), from local densities.

    alpha at p comes from the closed form; every other prime uses alpha(H_2, T)
    since S^(p) is locally hyperbolic away from p. Primes prime to 2p det(2T)
    contribute (1 - q^-2)^2 each, summed up through zeta(2)^-2 = 36/pi^4.
    """
    n = t.n
    if n not in (3, 4):
        raise DomainError("the product route is implemented for degree 3 and 4")
    if not is_positive_definite(t.two_t):
        raise InputError("T must be positive definite")
    local = Fraction(alpha_p_closed(t, p))
    primes = [q for q in relevant_places(t.det2, p) if q != math.inf]
    for q in primes:
        if q != p and local:
            local *= alpha_via_beta(hyperbolic(2), t, q)
    if local == 0:
        return Fraction(0)
    tail = sympy.Integer(36) / sympy.pi ** 4
    for q in primes:
        tail /= (1 - sympy.Rational(1, q * q)) ** 2
    value = _siegel_prefactor(4, n, p * p, t.det2) * sympy.Rational(local.numerator, local.denominator) * tail
    return _to_fraction(value, f"Siegel product at 2T={t.to_json()}")


def mass_closed_form(p: int) -> Fraction:
    return Fraction(1152, (p - 1) ** 2)


def siegel_weighted_average(s: HalfIntSym, t: HalfIntSym, reps) -> Fraction:
    """
    The genus average of representation numbers, computed twice.

    Route one weights rep_count over the representatives; route two is the
    local-density product. They must agree exactly.

    Raises:
        ConsistencyError: the two routes differ.
    """
    p = math.isqrt(s.det2)
    if not verify_genus_membership(s, p):
        raise DomainError("S is not in the genus of some S^(p)")
    if t.n > s.n:
        raise InputError("need deg T <= deg S")
    by_reps = genus_theta_coeff(reps, t)
    by_product = mass_formula_coeff(t, p)
    if by_reps != by_product:
        logging.error(f"Siegel average mismatch at 2T={t.to_json()}: {by_reps} vs {by_product}")
        raise ConsistencyError(f"representatives give {by_reps}, local densities give {by_product}")
    return by_reps
