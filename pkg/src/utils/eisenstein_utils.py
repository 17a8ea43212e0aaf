import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from fractions import Fraction

import sympy

from src.core.config import settings
from src.core.exceptions import ConsistencyError, DomainError, IncompleteTableError, InputError
from src.core.logger import logging
from src.core.types import CoeffTable, HalfIntSym, LimitReport, QuadChar, val_to_json
from src.utils.arith_utils import bernoulli, fundamental_discriminant, gen_bernoulli, is_odd_prime, ord
from src.utils.density_utils import fq_at_special, fq_interpolate, siegel_series_value
from src.utils.global_utils import enumerate_keys, genus_theta_coeff, theta_table
from src.utils.local_utils import eta, gamma_poly, poly_eval
from src.utils.matrix_utils import is_positive_definite


def k_sequence(p: int, m: int) -> int:
    """k_m = 2 + (p-1) p^{m-1}."""
    if m < 1:
        raise InputError("m starts at 1")
    return 2 + (p - 1) * p ** (m - 1)


def chi_T(t: HalfIntSym) -> QuadChar:
    """Character of Q(sqrt((-1)^{n/2} det 2T)) for even n."""
    if t.n % 2:
        raise InputError("chi_T is defined for even degree")
    if t.det2 == 0:
        raise InputError("T must be nondegenerate")
    return QuadChar(discriminant=fundamental_discriminant((-1) ** (t.n // 2) * t.det2))


def _require_definite(t: HalfIntSym):
    if not is_positive_definite(t.two_t):
        raise InputError(f"T must be positive definite, got 2T={t.to_json()}")


def _primes_of(x: int) -> list[int]:
    return sorted(sympy.factorint(abs(x)))


def _check_unramified_prime(t: HalfIntSym):
    """At the least prime prime to det(2T) the Siegel series is gamma_q alone."""
    q = next(q for q in sympy.primerange(2, 10 ** 6) if t.det2 % q)
    k = math.ceil(t.n / 2)
    x = Fraction(1, q ** k)
    g = poly_eval(gamma_poly(t, q), x)
    if g and siegel_series_value(t, q, k) != g:
        raise ConsistencyError(f"F_{q}(2T={t.to_json()}) is not 1 at a prime prime to det(2T)")


# =========================================================
# FOURIER COEFFICIENTS OF E_k^(n)
# =========================================================
def eis_coeff(n: int, k: int, t: HalfIntSym, check_extra_prime: bool = True) -> Fraction:
    """
    Fourier coefficient a(E_k^(n), T) at positive-definite T.

    Args:
        n (int): degree, 1..4.
        k (int): even weight, k >= n + 1 and k >= 4.
        t (HalfIntSym): positive-definite T of degree n.

    Returns:
        Fraction: the exact coefficient. F_q(T, q^{k-n-1}) enters only for q | det(2T).
    """
    if n not in (1, 2, 3, 4) or t.n != n:
        raise InputError(f"degree must be 1..4 and match T, got n={n}, deg T={t.n}")
    if k % 2 or k < n + 1 or k < 4:
        raise InputError(f"weight must be even with k >= max(4, n+1), got {k}")
    _require_definite(t)
    half = n // 2
    value = Fraction((-1) ** ((n + 1) // 2) * 2 ** (n - half))
    value *= k / bernoulli(k)
    for i in range(1, half + 1):
        value *= (2 * k - 2 * i) / bernoulli(2 * k - 2 * i)
    for q in _primes_of(t.det2):
        f = fq_interpolate(t, q)
        value *= f(Fraction(q) ** (k - n - 1))
    if n % 2 == 0:
        kk = k - half
        value *= gen_bernoulli(kk, chi_T(t)) / kk
    if check_extra_prime and n > 1:
        _check_unramified_prime(t)
    return value


def a_factor(k: int, n: int, t: HalfIntSym | None = None) -> Fraction:
    """
    A_{k,n}(T) = k/B_k * prod_{i<=[n/2]} (k-i)/B_{2k-2i}, times B_{k-n/2,chi_T}/(k-n/2) for even n.

    Only the order of vanishing along k_m is used.
    """
    value = k / bernoulli(k)
    for i in range(1, n // 2 + 1):
        value *= (k - i) / bernoulli(2 * k - 2 * i)
    if n % 2 == 0:
        if t is None:
            raise InputError("even degree needs T for chi_T")
        kk = k - n // 2
        value *= gen_bernoulli(kk, chi_T(t)) / kk
    return value


# =========================================================
# LIMITS OF E_{k_m}
# =========================================================
def limit_eis2_coeff(n: int, p: int, t: HalfIntSym) -> Fraction:
    """
    Coefficient at T of the p-adic limit of E_{k_m}^(n), n = 3 or 4.

    Degree 3: 576/(1-p)^2 prod_{q != p} F_q(T, q^-2), zero when eta_p(T) = 1.
    Degree 4: 1152/(1-p)^2 prod_{q != p} F_q(T, q^-3) when det(2T) is a square
    divisible by p and eta_p(T) = -1, zero otherwise.
    """
    if not is_odd_prime(p):
        raise InputError(f"p must be an odd prime, got {p}")
    if t.n != n or n not in (3, 4):
        raise InputError("the limit formula covers degree 3 and 4")
    _require_definite(t)
    others = [q for q in _primes_of(t.det2) if q != p]
    if n == 3:
        product = Fraction(1)
        for q in others:
            product *= fq_at_special(t, q)
        if eta(t, p) == 1:
            if product != 0:
                logging.error(f"eta_{p}=1 but prod F_q(T, q^-2) = {product} at 2T={t.to_json()}")
                raise ConsistencyError("vanishing at eta_p = 1 not reflected by the F_q product")
            return Fraction(0)
        return Fraction(576, (1 - p) ** 2) * product
    root = math.isqrt(t.det2)
    if root * root != t.det2 or t.det2 % p or eta(t, p) == 1:
        return Fraction(0)
    product = Fraction(1)
    for q in others:
        try:
            product *= fq_at_special(t, q)
        except DomainError as e:
            raise ConsistencyError(f"det(2T) is a square but not at q={q}: {e}") from e
    return Fraction(1152, (1 - p) ** 2) * product


def limit_report(n: int, p: int, t: HalfIntSym, terms: int) -> LimitReport:
    """a(E_{k_m}, T) for m = 1..terms, their successive p-adic distances and the distance to the limit."""
    if terms < 2:
        raise InputError("need at least two terms")
    if not is_odd_prime(p):
        raise InputError(f"p must be an odd prime, got {p}")
    values = []
    for m in range(1, terms + 1):
        k = k_sequence(p, m)
        logging.info(f"a(E_{k}^({n}), T) for m={m}")
        values.append((m, k, eis_coeff(n, k, t)))
    cauchy = tuple(ord(values[i + 1][2] - values[i][2], p) for i in range(terms - 1))
    target = limit_eis2_coeff(n, p, t) if n in (3, 4) else None
    target_orders = tuple(ord(v - target, p) for _, _, v in values) if target is not None else ()
    return LimitReport(
        p=p, two_t=t.two_t, target=target, terms=tuple(values), cauchy_orders=cauchy, target_orders=target_orders
    )


# =========================================================
# TABLES AND OPERATORS
# =========================================================
def _table(n, bound, fn, label, positive_only=True, threads=None) -> CoeffTable:
    keys = enumerate_keys(n, bound, positive_only=positive_only)
    entries = {}
    with ThreadPoolExecutor(max_workers=threads or settings.THREAD_COUNT) as executor:
        futures = {executor.submit(fn, t): t for t in keys}
        for future in as_completed(futures):
            entries[futures[future].key] = Fraction(future.result())
    return CoeffTable(n=n, bound=bound, entries={k: entries[k] for k in sorted(entries)}, label=label)


def eis_table(n: int, k: int, bound: int, threads: int | None = None) -> CoeffTable:
    logging.info(f"Eisenstein table n={n}, k={k}, bound={bound}")
    return _table(n, bound, lambda t: eis_coeff(n, k, t), f"E_{k}", threads=threads)


def limit_table(n: int, p: int, bound: int, threads: int | None = None) -> CoeffTable:
    logging.info(f"Limit table n={n}, p={p}, bound={bound}")
    return _table(n, bound, lambda t: limit_eis2_coeff(n, p, t), f"E2_limit_p{p}", threads=threads)


def genus_table(reps, n: int, bound: int, threads: int | None = None) -> CoeffTable:
    """Genus theta coefficients on all semi-positive T with diagonal <= bound."""
    tables = [theta_table(r.gram, n, bound, threads) for r in reps]
    weights = [Fraction(1, r.aut_count) for r in reps]
    total = sum(weights)
    entries = {
        key: sum((w * tab.entries[key] for w, tab in zip(weights, tables)), Fraction(0)) / total
        for key in tables[0].sorted_keys()
    }
    return CoeffTable(n=n, bound=bound, entries=entries, label="genus_theta")


def theta_operator(table: CoeffTable) -> CoeffTable:
    """a(F, T) -> a(F, T) det(T)."""
    entries = {}
    for key, value in table.entries.items():
        t = HalfIntSym.from_key(table.n, key)
        entries[key] = value * t.det
    return CoeffTable(n=table.n, bound=table.bound, entries=entries, label=f"theta({table.label})")


def _pad_zero(key, n):
    """Key of T' _|_ 0 for a degree-(n-1) key."""
    m = n - 1
    rows = [list(key[i * m:(i + 1) * m]) + [0] for i in range(m)] + [[0] * n]
    return tuple(x for row in rows for x in row)


def siegel_phi(table: CoeffTable, strict: bool = True) -> CoeffTable:
    """
    a(Phi F, T') = a(F, T' _|_ 0).

    Args:
        table (CoeffTable): degree n >= 1.
        strict (bool): raise on a missing T' _|_ 0; otherwise missing keys read as 0.

    Raises:
        IncompleteTableError: strict and some semi-positive T' within the bound is not covered.
    """
    n = table.n
    if n < 1:
        raise InputError("Siegel Phi needs degree >= 1")
    if n == 1:
        keys = [()]
    else:
        keys = [t.key for t in enumerate_keys(n - 1, table.bound)]
    entries = {}
    for key in keys:
        padded = _pad_zero(key, n)
        if padded in table.entries:
            entries[key] = table.entries[padded]
        elif strict:
            raise IncompleteTableError(f"table has no entry at T'_|_0 with 2T' = {list(key)}")
        else:
            entries[key] = Fraction(0)
    return CoeffTable(n=n - 1, bound=table.bound, entries=entries, label=f"phi({table.label})")


def congruence_check(a: CoeffTable, b: CoeffTable, p: int, power: int) -> dict:
    """
    Entry-wise ord_p(a - b) >= power on the shared keys.

    Raises:
        InputError: no shared keys, or some value is not p-integral.
    """
    if power < 1:
        raise InputError("power must be positive")
    shared = sorted(set(a.entries) & set(b.entries))
    if not shared:
        raise InputError("the tables share no keys")
    for table in (a, b):
        for key in shared:
            if ord(table.entries[key], p) < 0:
                raise InputError(f"{table.label} is not {p}-integral at 2T={list(key)}: {table.entries[key]}")
    failures = []
    for key in shared:
        diff_ord = ord(a.entries[key] - b.entries[key], p)
        if diff_ord < power:
            failures.append(
                {
                    "two_t": list(key),
                    "left": str(a.entries[key]),
                    "right": str(b.entries[key]),
                    "ord": val_to_json(diff_ord),
                }
            )
    return {"keys_checked": len(shared), "failures": failures, "ok": not failures}


def zero_table(like: CoeffTable) -> CoeffTable:
    return CoeffTable(n=like.n, bound=like.bound, entries={k: Fraction(0) for k in like.entries}, label="zero")


def vanishing_report(n: int, p: int, terms: int, t: HalfIntSym | None = None, reps=None) -> dict:
    """
    Orders ord_p A_{k_m,n}(T) for m = 1..terms, n >= 5, and the genus side at T.

    The genus side is 0 at positive-definite T because a quaternary form has
    no rank-n representations for n >= 5.
    """
    if n < 5:
        raise InputError("the vanishing report is for degree >= 5")
    t = t or HalfIntSym.diag(*([1] * n))
    _require_definite(t)
    orders = []
    for m in range(1, terms + 1):
        k = k_sequence(p, m)
        orders.append({"m": m, "k": k, "ord": val_to_json(ord(a_factor(k, n, t), p))})
    genus_side = genus_theta_coeff(reps, t) if reps else None
    return {
        "n": n,
        "p": p,
        "two_t": t.to_json(),
        "orders": orders,
        "genus_side": str(genus_side) if genus_side is not None else None,
    }
