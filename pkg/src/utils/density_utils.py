import threading
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor, as_completed
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import ceil
from typing import NamedTuple

import sympy

from src.core.config import settings
from src.core.exceptions import BudgetExceededError, ConsistencyError, DomainError, InputError
from src.core.logger import logging
from src.core.types import DensityResult, FqPoly, HalfIntSym, hyperbolic
from src.utils.arith_utils import chi_q, legendre, ord, require_prime
from src.utils.cache_utils import DensityCache
from src.utils.local_utils import gamma_poly, is_unimodular, jordan_decompose, overforms, poly_eval
from src.utils.matrix_utils import det_mod, rank_mod, solve_mod


# =========================================================
# BUDGET
# =========================================================
class Budget:
    """Thread-safe node counter; raises once the cap is crossed."""

    def __init__(self, limit: int | None = None, **context):
        self.limit = limit or settings.DEFAULT_BUDGET
        self.used = 0
        self.context = context
        self._lock = threading.Lock()

    def spend(self, nodes: int = 1):
        with self._lock:
            self.used += nodes
            if self.used > self.limit:
                partial = dict(self.context, nodes=self.used, limit=self.limit)
                logging.warning(f"Enumeration budget exceeded: {partial}")
                raise BudgetExceededError(f"enumeration budget of {self.limit} nodes exceeded", partial)


# =========================================================
# COUNTING FRAME
# =========================================================
class CountingFrame(NamedTuple):
    q: int
    g: tuple  # integer matrix standing for 2S
    w: tuple  # lifting weights: 2S with the q-power of each row removed
    exps: tuple  # row i matters modulo q^{e - exps[i]}

    @property
    def m(self) -> int:
        return len(self.g)

    @property
    def base_level(self) -> int:
        return 1 + max(self.exps)

    @property
    def shift(self) -> int:
        return sum(self.exps)


def build_frame(s: HalfIntSym, q: int) -> CountingFrame:
    """Jordan diagonal frame for odd q and non-unimodular S, S itself otherwise."""
    if q != 2 and not is_unimodular(s, q):
        jf = jordan_decompose(s, q)
        m = s.n
        g = tuple(tuple(2 * u * q ** a if i == j else 0 for j in range(m)) for i, (a, u) in enumerate(jf.blocks))
        w = tuple(tuple(2 * u if i == j else 0 for j in range(m)) for i, (_, u) in enumerate(jf.blocks))
        return CountingFrame(q=q, g=g, w=w, exps=jf.exponents)
    return CountingFrame(q=q, g=s.two_t, w=s.two_t, exps=(0,) * s.n)


def _mat_vec(g, x):
    return tuple(sum(gi[k] * x[k] for k in range(len(x))) for gi in g)


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _gram(g, cols):
    gx = [_mat_vec(g, c) for c in cols]
    return [[_dot(gx[k], cols[l]) for l in range(len(cols))] for k in range(len(cols))]


def _classify(frame: CountingFrame, cols) -> tuple[bool, bool]:
    """(primitive, good) for a solution given by its columns."""
    q = frame.q
    x_rows = [[c[i] % q for c in cols] for i in range(frame.m)]
    n = len(cols)
    primitive = rank_mod(x_rows, q) == n
    if not primitive:
        return False, False
    p_rows = [[sum(frame.w[i][r] * x_rows[r][k] for r in range(frame.m)) % q for k in range(n)] for i in range(frame.m)]
    return True, rank_mod(p_rows, q) == n


# =========================================================
# LEVEL ENUMERATION
# =========================================================
def _enumerate_level(frame, t, level, mods, primitive_only, classify, budget, threads):
    """
    Column-by-column search for solutions at one level.

    Returns:
        (good_count, bad_nodes, total): with classify=False every admissible
        solution is counted in total and the first two entries are unused.
    """
    q, g, n = frame.q, frame.g, t.n
    two_t = t.two_t
    mod_off = q ** level
    mod_diag = 2 * mod_off

    space = 1
    for mod in mods:
        space *= mod
    budget.spend(space)
    buckets = defaultdict(list)
    for x in product(*(range(mod) for mod in mods)):
        gx = _mat_vec(g, x)
        buckets[_dot(x, gx) % mod_diag].append((x, gx))

    targets = [two_t[k][k] % mod_diag for k in range(n)]
    first = buckets.get(targets[0], [])

    def search_from(seed):
        good, bad, total, spent = 0, [], 0, 0
        cols, gxs = [seed[0]], [seed[1]]

        def extend(k):
            nonlocal good, total, spent
            if k == n:
                if primitive_only or classify:
                    primitive, is_good = _classify(frame, cols)
                    if primitive_only and not primitive:
                        return
                    if classify:
                        if is_good:
                            good += 1
                        else:
                            bad.append(tuple(cols))
                total += 1
                return
            for x, gx in buckets.get(targets[k], ()):
                spent += 1
                if spent >= 4096:
                    budget.spend(spent)
                    spent = 0
                if all((_dot(gxs[l], x) - two_t[l][k]) % mod_off == 0 for l in range(k)):
                    cols.append(x)
                    gxs.append(gx)
                    extend(k + 1)
                    cols.pop()
                    gxs.pop()

        extend(1)
        budget.spend(spent)
        return good, bad, total

    good, bad, total = 0, [], 0
    results = {}
    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = {executor.submit(search_from, seed): idx for idx, seed in enumerate(first)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    for idx in sorted(results):
        g_i, b_i, t_i = results[idx]
        good += g_i
        bad.extend(b_i)
        total += t_i
    return good, bad, total


# =========================================================
# HENSEL LIFTING
# =========================================================
def _lift_system(frame: CountingFrame, t: HalfIntSym, cols, level: int):
    """
    Affine system over F_q for the next digit of every row.

    Unknown (i, k) is the new digit of row i in column k.
    """
    q, m, n = frame.q, frame.m, t.n
    gram = _gram(frame.g, cols)
    qj = q ** level
    p_mat = [[sum(frame.w[i][r] * cols[k][r] for r in range(m)) % q for k in range(n)] for i in range(m)]
    rows, rhs = [], []
    for k in range(n):
        for l in range(k, n):
            delta = gram[k][l] - t.two_t[k][l]
            row = [0] * (m * n)
            if k == l:
                if delta % (2 * qj):
                    raise ConsistencyError("lifted node is not a solution at its level")
                for i in range(m):
                    row[i * n + k] = p_mat[i][k]
                rhs.append((-delta // (2 * qj)) % q)
            else:
                if delta % qj:
                    raise ConsistencyError("lifted node is not a solution at its level")
                for i in range(m):
                    row[i * n + l] = (row[i * n + l] + p_mat[i][k]) % q
                    row[i * n + k] = (row[i * n + k] + p_mat[i][l]) % q
                rhs.append((-delta // qj) % q)
            rows.append(row)
    return solve_mod(rows, rhs, q, m * n)


def _children(frame, cols, level, particular, kernel):
    q, m, n = frame.q, frame.m, len(cols)
    steps = [q ** (level - a) for a in frame.exps]
    for coeffs in product(range(q), repeat=len(kernel)):
        y = list(particular)
        for c, v in zip(coeffs, kernel):
            if c:
                y = [(a + c * b) % q for a, b in zip(y, v)]
        yield tuple(tuple(cols[k][i] + steps[i] * y[i * n + k] for i in range(m)) for k in range(n))


def _count_levels(frame, t, e_max, primitive_only, budget, threads):
    """Reduced-row counts at every level from the base level up to e_max."""
    q, m, n = frame.q, frame.m, t.n
    b = frame.base_level
    mods = [q ** (b - a) for a in frame.exps]
    good, bad, _ = _enumerate_level(frame, t, b, mods, primitive_only, True, budget, threads)
    ratio = q ** (m * n - n * (n + 1) // 2)
    counts = {}
    for e in range(b, e_max + 1):
        counts[e] = good * ratio ** (e - b)
    counts[b] += len(bad)
    logging.info(f"Base level {b} at q={q}: {good} good classes, {len(bad)} to lift explicitly")

    level = b
    while bad and level < e_max:
        next_bad = []
        for cols in bad:
            budget.spend()
            sol = _lift_system(frame, t, cols, level)
            if sol is None:
                continue
            particular, kernel = sol
            if level + 1 == e_max:
                counts[e_max] += q ** len(kernel)
                continue
            budget.spend(q ** len(kernel))
            next_bad.extend(_children(frame, cols, level, particular, kernel))
        level += 1
        if level < e_max:
            counts[level] += len(next_bad)
        bad = next_bad
    return counts


def _check_shapes(s: HalfIntSym, t: HalfIntSym):
    if s.n < t.n:
        raise InputError(f"need m >= n, got m={s.n}, n={t.n}")
    if s.det2 == 0:
        raise InputError("S must be nondegenerate")


def count_solutions(
    s: HalfIntSym,
    t: HalfIntSym,
    q: int,
    e: int,
    primitive_only: bool = False,
    budget: Budget | None = None,
    threads: int | None = None,
) -> int:
    """
    Number of X in M_{m,n}(Z/q^e) with S[X] = T mod q^e H_n(Z_q).

    Args:
        s, t (HalfIntSym): S of degree m and T of degree n <= m.
        q (int): prime.
        e (int): exponent, e >= 1.
        primitive_only (bool): count only X of rank n mod q.

    Returns:
        int: the raw count A_e (or B_e).
    """
    require_prime(q)
    _check_shapes(s, t)
    if e < 1:
        raise InputError("e must be positive")
    budget = budget or Budget(q=q, e=e)
    threads = threads or settings.THREAD_COUNT
    frame = build_frame(s, q)
    if e < frame.base_level:
        _, _, total = _enumerate_level(frame, t, e, [q ** e] * s.n, primitive_only, False, budget, threads)
        return total
    counts = _count_levels(frame, t, e, primitive_only, budget, threads)
    return counts[e] * q ** (t.n * frame.shift)


def _scaled(raw: int, m: int, n: int, q: int, e: int) -> Fraction:
    value = Fraction(raw) * Fraction(q) ** (e * (-m * n + n * (n + 1) // 2))
    return value / 2 if m == n else value


# =========================================================
# LOCAL DENSITIES BY DIRECT COUNTING
# =========================================================
def alpha(
    s: HalfIntSym,
    t: HalfIntSym,
    q: int,
    budget: Budget | None = None,
    cache: DensityCache | None = None,
    threads: int | None = None,
) -> DensityResult:
    """
    alpha_q(S, T) certified at two consecutive exponents.

    Args:
        s, t (HalfIntSym): nondegenerate S, T with deg S >= deg T.
        q (int): prime.
        budget (Budget): node cap for the enumeration.
        cache (DensityCache): optional raw-count cache.

    Returns:
        DensityResult: value at e0 = max(base level, 2 ord_q(det 2T) + 1), equal to the value at e0 + 1.
    """
    require_prime(q)
    _check_shapes(s, t)
    if t.det2 == 0:
        raise InputError("T must be nondegenerate")
    m, n = s.n, t.n
    frame = build_frame(s, q)
    e0 = max(frame.base_level, 2 * ord(t.det2, q) + 1)
    keys = [DensityCache.make_key(s, t, q, e, False) for e in (e0, e0 + 1)]
    raws = [cache.get(k) if cache is not None else None for k in keys]
    hits = sum(r is not None for r in raws)
    if hits < 2:
        budget = budget or Budget(q=q, e=e0 + 1, two_s=s.to_json(), two_t=t.to_json())
        counts = _count_levels(frame, t, e0 + 1, False, budget, threads or settings.THREAD_COUNT)
        scale = q ** (n * frame.shift)
        raws = [counts[e0] * scale, counts[e0 + 1] * scale]
        if cache is not None:
            for k, r in zip(keys, raws):
                cache.put(k, r)
    v0, v1 = _scaled(raws[0], m, n, q, e0), _scaled(raws[1], m, n, q, e0 + 1)
    if v0 != v1:
        logging.error(f"alpha_{q} did not stabilize: {v0} at e={e0}, {v1} at e={e0 + 1}")
        raise ConsistencyError(f"alpha_{q} did not stabilize between e={e0} and e={e0 + 1}")
    return DensityResult(value=v0, e_certified=e0, raw_count=raws[0], q=q, cache_hits=hits)


# =========================================================
# PRIMITIVE DENSITIES OVER F_q (UNIMODULAR S)
# =========================================================
def _vec_mod(v, q):
    return tuple(x % q for x in v)


def _bil(g, x, y, q):
    return _dot(_mat_vec(g, x), y) % q


def _qform(g, x, q):
    return (_dot(_mat_vec(g, x), x) // 2) % q


def _combine(basis, coeffs, q, size):
    out = [0] * size
    for c, v in zip(coeffs, basis):
        if c:
            out = [(a + c * b) % q for a, b in zip(out, v)]
    return tuple(out)


def _arf(g, basis, q):
    """Arf invariant of a nondegenerate quadratic space over F_2 by symplectic reduction."""
    arf = 0
    vs = [tuple(v) for v in basis]
    while vs:
        e = vs.pop(0)
        idx = next(i for i, w in enumerate(vs) if _bil(g, e, w, q))
        f = vs.pop(idx)
        arf ^= (_qform(g, e, q) * _qform(g, f, q)) % 2
        vs = [
            tuple((wi + _bil(g, w, f, q) * ei + _bil(g, w, e, q) * fi) % 2 for wi, ei, fi in zip(w, e, f))
            for w in vs
        ]
    return arf


def _quadric_points(g, basis, q, c) -> int:
    """#{u in span(basis) : Q(u) = c} for a nondegenerate restriction of Q."""
    d = len(basis)
    c %= q
    if d == 0:
        return 1 if c == 0 else 0
    if q == 2:
        s = d // 2
        sign = -1 if _arf(g, basis, q) else 1
        nu = 1 if c == 0 else -1
        return 2 ** (2 * s - 1) + sign * nu * 2 ** (s - 1)
    gram = [[_bil(g, u, v, q) for v in basis] for u in basis]
    disc = det_mod(gram, q) * pow(pow(2, d, q), -1, q) % q
    if d % 2 == 0:
        nu = q - 1 if c == 0 else -1
        return q ** (d - 1) + nu * q ** ((d - 2) // 2) * legendre((-1) ** (d // 2) * disc, q)
    return q ** (d - 1) + q ** ((d - 1) // 2) * legendre((-1) ** ((d - 1) // 2) * c * disc, q)


def _affine_quadric_points(g, q, x0, u_basis, a) -> int:
    """#{x in x0 + span(u_basis) : Q(x) = a}."""
    k = len(u_basis)
    m = len(x0)
    if k == 0:
        return 1 if _qform(g, x0, q) == a % q else 0
    gram = [[_bil(g, u, v, q) for v in u_basis] for u in u_basis]
    sol = solve_mod(gram, [0] * k, q, k)
    radical = [_combine(u_basis, c, q, m) for c in sol[1]]
    rad_coeffs = list(sol[1])
    complement = []
    for s in range(k):
        unit = [int(i == s) for i in range(k)]
        if rank_mod(rad_coeffs + [unit], q) > len(rad_coeffs):
            rad_coeffs.append(unit)
            complement.append(u_basis[s])
    for r in radical:
        if (_qform(g, r, q) + _bil(g, x0, r, q)) % q:
            return q ** (k - 1)
    d = len(complement)
    if d:
        gram0 = [[_bil(g, u, v, q) for v in complement] for u in complement]
        ell = [_bil(g, x0, u, q) for u in complement]
        lam = solve_mod(gram0, ell, q, d)[0]
        v = _combine(complement, lam, q, m)
        shift = _qform(g, v, q)
    else:
        shift = 0
    c = (a - _qform(g, x0, q) + shift) % q
    return q ** len(radical) * _quadric_points(g, complement, q, c)


def _witt_primitive_count(s: HalfIntSym, t: HalfIntSym, q: int) -> int:
    """
    Primitive solutions mod q for unimodular S.

    Extends one fixed partial solution column by column; Witt's theorem makes
    the number of extensions independent of the partial solution chosen.
    """
    g = s.two_t
    m, n = s.n, t.n
    chain: list[tuple] = []
    total = 1
    for j in range(n):
        a = (t.two_t[j][j] // 2) % q
        b = [t.two_t[i][j] % q for i in range(j)]
        if chain:
            rows = [list(_mat_vec(g, x)) for x in chain]
            sol = solve_mod(rows, b, q, m)
            if sol is None:
                return 0
            x0, u_basis = tuple(sol[0]), [tuple(v) for v in sol[1]]
        else:
            x0, u_basis = (0,) * m, [tuple(int(i == k) for i in range(m)) for k in range(m)]
        count = _affine_quadric_points(g, q, x0, u_basis, a)
        for coeffs in product(range(q), repeat=len(chain)):
            w = _combine(chain, coeffs, q, m)
            if _qform(g, w, q) == a and all(_bil(g, x, w, q) == bi for x, bi in zip(chain, b)):
                count -= 1
        if count == 0:
            return 0
        total *= count
        if j < n - 1:
            for coeffs in product(range(q), repeat=len(u_basis)):
                x = _vec_mod(tuple(p + c for p, c in zip(x0, _combine(u_basis, coeffs, q, m))), q)
                if _qform(g, x, q) == a and rank_mod([list(v) for v in chain] + [list(x)], q) == j + 1:
                    chain.append(x)
                    break
            else:
                raise ConsistencyError("no extension found although the count is positive")
    return total


def _reduced_key(t: HalfIntSym, q: int) -> HalfIntSym:
    n = t.n
    return HalfIntSym(
        two_t=[[t.two_t[i][j] % (2 * q if i == j else q) for j in range(n)] for i in range(n)]
    )


@lru_cache(maxsize=None)
def _beta_witt(s: HalfIntSym, t_mod: HalfIntSym, q: int) -> DensityResult:
    m, n = s.n, t_mod.n
    raw = _witt_primitive_count(s, t_mod, q)
    return DensityResult(value=_scaled(raw, m, n, q, 1), e_certified=1, raw_count=raw, q=q)


def beta(
    s: HalfIntSym,
    t: HalfIntSym,
    q: int,
    budget: Budget | None = None,
    threads: int | None = None,
) -> DensityResult:
    """
    Primitive local density beta_q(S, T).

    Unimodular S goes through the closed point counts over F_q. For odd q the
    primitive classes are enumerated at the base level of the Jordan frame and
    all of them lift uniformly from there. At q = 2 the count is certified at
    two consecutive levels like alpha.
    """
    require_prime(q)
    _check_shapes(s, t)
    if is_unimodular(s, q):
        return _beta_witt(s, _reduced_key(t, q), q)
    m, n = s.n, t.n
    frame = build_frame(s, q)
    b = frame.base_level
    top = b
    if q == 2:
        top = max(b, 2 * ord(t.det2, q) + 1 if t.det2 else b) + 1
    budget = budget or Budget(q=q, e=top, two_s=s.to_json(), two_t=t.to_json())
    counts = _count_levels(frame, t, top, True, budget, threads or settings.THREAD_COUNT)
    scale = q ** (n * frame.shift)
    e = top if top == b else top - 1
    value = _scaled(counts[e] * scale, m, n, q, e)
    if e != top and value != _scaled(counts[top] * scale, m, n, q, top):
        raise ConsistencyError(f"beta_{q} did not stabilize between e={e} and e={top}")
    return DensityResult(value=value, e_certified=e, raw_count=counts[e] * scale, q=q)


@lru_cache(maxsize=None)
def alpha_via_beta(s: HalfIntSym, t: HalfIntSym, q: int) -> Fraction:
    """
    alpha_q(S, T) as the sum over reduced g with T[g^{-1}] half-integral of
    q^{(-m+n+1) ord_q(det g)} beta_q(S, T[g^{-1}]).
    """
    require_prime(q)
    _check_shapes(s, t)
    if t.det2 == 0:
        raise InputError("T must be nondegenerate")
    m, n = s.n, t.n
    total = Fraction(0)
    for t_exp, _, image in overforms(t, q):
        total += Fraction(q) ** ((-m + n + 1) * t_exp) * beta(s, image, q).value
    return total


# =========================================================
# SIEGEL SERIES AND F_q
# =========================================================
def siegel_series_value(t: HalfIntSym, q: int, k: int) -> Fraction:
    """b~_q(T, q^-k) = 2^{delta_{2k,n}} alpha_q(H_k, T), for k >= n/2."""
    if 2 * k < t.n:
        raise InputError(f"k={k} is below n/2")
    value = alpha_via_beta(hyperbolic(k), t, q)
    return 2 * value if 2 * k == t.n else value


def fq_at_special(t: HalfIntSym, q: int) -> Fraction:
    """
    F_q(T, q^-2) for degree 3 and F_q(T, q^-3) for degree 4, read off alpha_q(H_2, T).

    Raises:
        DomainError: degree 4 with det(2T) not a square in Z_q.
    """
    require_prime(q)
    one = 1 - Fraction(1, q ** 2)
    if t.n == 3:
        return alpha_via_beta(hyperbolic(2), t, q) / one ** 2
    if t.n == 4:
        d = ord(t.det2, q)
        if d % 2 or chi_q(t.det2, q) != 1:
            raise DomainError(f"det(2T) = {t.det2} is not a square in Z_{q}")
        return alpha_via_beta(hyperbolic(2), t, q) / (one ** 2 * Fraction(q) ** (d // 2))
    raise DomainError("special values are defined for degree 3 and 4")


def _guard_interpolation(t: HalfIntSym, q: int, d: int, budget: int):
    cost = q ** ((t.n - 1) * (d // 2)) * (d + 1)
    if cost > budget:
        raise BudgetExceededError(
            f"F_q interpolation at q={q} needs about {cost} reduced matrices",
            {"q": q, "ord_det": d, "n": t.n, "estimate": cost, "limit": budget},
        )


@lru_cache(maxsize=None)
def fq_interpolate(t: HalfIntSym, q: int, budget: int | None = None) -> FqPoly:
    """
    F_q(T, X) recovered from ord_q(det 2T) + 1 samples of the Siegel series.

    Samples are taken at X = q^-k for k = ceil(n/2), ceil(n/2) + 1, ...,
    skipping zeros of gamma_q.

    Raises:
        ConsistencyError: the interpolant is not integral with constant term 1.
    """
    require_prime(q)
    if t.det2 == 0:
        raise InputError("T must be nondegenerate")
    d = ord(t.det2, q)
    if d == 0:
        return FqPoly(q=q, coeffs=(1,))
    _guard_interpolation(t, q, d, budget or settings.DEFAULT_BUDGET)
    gamma = gamma_poly(t, q)
    points = []
    k = ceil(t.n / 2)
    while len(points) < d + 1:
        x = Fraction(1, q ** k)
        gx = poly_eval(gamma, x)
        if gx != 0:
            points.append((x, siegel_series_value(t, q, k) / gx))
        k += 1
    sym_x = sympy.Symbol("X")
    expr = sympy.interpolate(
        [(sympy.Rational(x.numerator, x.denominator), sympy.Rational(y.numerator, y.denominator)) for x, y in points],
        sym_x,
    )
    coeffs = [Fraction(int(c.p), int(c.q)) for c in reversed(sympy.Poly(expr, sym_x).all_coeffs())]
    if any(c.denominator != 1 for c in coeffs) or coeffs[0] != 1:
        logging.error(f"Non-integral F_{q} for 2T={t.to_json()}: {coeffs}")
        raise ConsistencyError(f"interpolated F_{q} is not an integral polynomial with constant term 1: {coeffs}")
    return FqPoly(q=q, coeffs=tuple(int(c) for c in coeffs))
