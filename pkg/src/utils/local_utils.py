from fractions import Fraction
from itertools import product
from typing import NamedTuple

from src.core.exceptions import DomainError, InputError
from src.core.types import FqPoly, HalfIntSym, JordanForm, ReducedMatrix
from src.utils.arith_utils import INF, chi_q, hilbert_symbol, legendre, ord
from src.utils.matrix_utils import diagonalize_rational, rational_inverse


class LocalInvariants(NamedTuple):
    hasse: int
    epsilon: int
    eta: int


def _half_matrix(t: HalfIntSym) -> list[list[Fraction]]:
    return [[Fraction(x, 2) for x in row] for row in t.two_t]


def _require_nondegenerate(t: HalfIntSym):
    if t.det2 == 0:
        raise InputError(f"degenerate form {t.to_json()}")


def least_nonresidue(q: int) -> int:
    return next(a for a in range(2, q) if legendre(a, q) == -1)


# =========================================================
# JORDAN SPLITTING (ODD q)
# =========================================================
def jordan_decompose(t: HalfIntSym, q: int) -> JordanForm:
    """
    Diagonalizes T over Z_q for odd q.

    Pivots on an entry of minimal valuation; an off-diagonal minimum is first
    moved to the diagonal by e_i -> e_i + e_j. Units are returned as 1 or the
    least quadratic non-residue mod q, which fixes each square class.

    Args:
        t (HalfIntSym): nondegenerate form.
        q (int): odd prime.

    Returns:
        JordanForm: blocks (exponent, unit) sorted by exponent.
    """
    if q == 2:
        raise InputError("Jordan splitting is only implemented for odd q")
    _require_nondegenerate(t)
    n = t.n
    m = _half_matrix(t)
    diag = []
    for pos in range(n):
        entries = [(ord(m[i][j], q), i, j) for i in range(pos, n) for j in range(i, n) if m[i][j] != 0]
        if not entries:
            raise InputError("degenerate form")
        v_min = min(e[0] for e in entries)
        on_diag = [i for v, i, j in entries if v == v_min and i == j]
        if on_diag:
            i = on_diag[0]
        else:
            _, i, j = next(e for e in entries if e[0] == v_min)
            for c in range(n):
                m[i][c] += m[j][c]
            for r in range(n):
                m[r][i] += m[r][j]
        m[pos], m[i] = m[i], m[pos]
        for row in m:
            row[pos], row[i] = row[i], row[pos]
        piv = m[pos][pos]
        for r in range(pos + 1, n):
            for c in range(pos + 1, n):
                m[r][c] -= m[r][pos] * m[pos][c] / piv
        for k in range(pos + 1, n):
            m[k][pos] = m[pos][k] = Fraction(0)
        diag.append(piv)

    nonresidue = least_nonresidue(q)
    blocks = []
    for d in diag:
        a = ord(d, q)
        u = d / Fraction(q) ** a
        unit = 1 if legendre(u.numerator * u.denominator, q) == 1 else nonresidue
        blocks.append((a, unit))
    blocks.sort(key=lambda b: b[0])
    return JordanForm(q=q, blocks=tuple(blocks))


def is_unimodular(t: HalfIntSym, q: int) -> bool:
    return t.det2 % q != 0


# =========================================================
# HASSE / CLIFFORD INVARIANTS
# =========================================================
def local_invariants(t: HalfIntSym, place) -> LocalInvariants:
    """
    h, eps and eta of T at a prime or at math.inf.

    eta follows the parity-split expression in <-1,-1>, <., det T> and eps.
    With that expression the product of eta over the finite primes is -1 for
    positive-definite T of degree 3 or 4.
    """
    _require_nondegenerate(t)
    b = diagonalize_rational(_half_matrix(t))
    n = t.n
    hasse = 1
    eps = 1
    for i in range(n):
        for j in range(i, n):
            s = hilbert_symbol(b[i], b[j], place)
            hasse *= s
            if i < j:
                eps *= s
    det = t.det
    minus = hilbert_symbol(-1, -1, place)
    if n % 2:
        k = (n - 1) // 2
        eta = minus ** (k * (k + 1) // 2 % 2) * hilbert_symbol((-1) ** k, det, place) * eps
    else:
        k = n // 2
        eta = minus ** (k * (k - 1) // 2 % 2) * hilbert_symbol((-1) ** (k + 1), det, place) * eps
    return LocalInvariants(hasse, eps, eta)


def eta(t: HalfIntSym, place) -> int:
    return local_invariants(t, place).eta


def xi(t: HalfIntSym, q: int) -> int:
    """xi_q(T) = chi_q((-1)^{n/2} det(2T)) for even n."""
    if t.n % 2:
        raise InputError("xi is defined for even degree only")
    return chi_q((-1) ** (t.n // 2) * t.det2, q)


# =========================================================
# REDUCED MATRICES AND MAXIMALITY
# =========================================================
def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_reduced(n: int, q: int, total_exponent: int) -> list[ReducedMatrix]:
    """
    All reduced n x n matrices with ord_q(det) = total_exponent.

    Diagonal entries are q^{e_j}; an entry above the diagonal in column j runs
    over 0..q^{e_j}-1.
    """
    out = []
    for exps in _compositions(total_exponent, n):
        slots = [(i, j) for j in range(n) for i in range(j)]
        ranges = [range(q ** exps[j]) for _, j in slots]
        for values in product(*ranges):
            rows = [[0] * n for _ in range(n)]
            for j in range(n):
                rows[j][j] = q ** exps[j]
            for (i, j), v in zip(slots, values):
                rows[i][j] = v
            out.append(ReducedMatrix(q=q, entries=tuple(tuple(r) for r in rows)))
    return out


def transform_by_inverse(t: HalfIntSym, g: ReducedMatrix) -> HalfIntSym | None:
    """T[g^{-1}] when it is half-integral, else None."""
    inv = rational_inverse(g.entries)
    n = t.n
    two_t = t.two_t
    rows = []
    for a in range(n):
        row = []
        for b in range(n):
            v = sum(
                inv[i][a] * two_t[i][j] * inv[j][b] for i in range(n) if inv[i][a] for j in range(n) if inv[j][b]
            )
            if v.denominator != 1 or (a == b and v.numerator % 2):
                return None
            row.append(int(v))
        rows.append(row)
    return HalfIntSym(two_t=rows)


def is_maximal(t: HalfIntSym, q: int) -> bool:
    """No index-q step keeps T half-integral."""
    _require_nondegenerate(t)
    return all(transform_by_inverse(t, g) is None for g in enumerate_reduced(t.n, q, 1))


def overforms(t: HalfIntSym, q: int):
    """
    Every reduced g with T[g^{-1}] half-integral, grouped by ord_q(det g).

    Yields:
        (t_exp, ReducedMatrix, HalfIntSym) for t_exp = 0 .. floor(ord_q(det 2T) / 2).
    """
    _require_nondegenerate(t)
    d = ord(t.det2, q)
    for t_exp in range(d // 2 + 1):
        for g in enumerate_reduced(t.n, q, t_exp):
            image = transform_by_inverse(t, g)
            if image is not None:
                yield t_exp, g, image


def maximal_overforms(t: HalfIntSym, q: int) -> list[tuple[ReducedMatrix, HalfIntSym]]:
    return [(g, image) for _, g, image in overforms(t, q) if is_maximal(image, q)]


def maximal_case(t: HalfIntSym, q: int) -> tuple[int | None, int | None]:
    """
    Shape of a maximal T of degree 3 or 4 at odd q.

    Returns:
        (case, eta): case 1 for units only, 2 for one q-scaled unit, 3 for two
        q-scaled units with chi_q(-e e') = -1. (None, None) when T is not maximal.
    """
    if t.n not in (3, 4) or q == 2:
        raise InputError("maximal_case handles degree 3 or 4 at odd q")
    if not is_maximal(t, q):
        return None, None
    jf = jordan_decompose(t, q)
    exps = jf.exponents
    units = jf.units
    n_scaled = sum(1 for a in exps if a == 1)
    if any(a > 1 for a in exps) or n_scaled > 2:
        raise InputError(f"maximal form with unexpected Jordan shape {jf.blocks}")
    case = n_scaled + 1
    if t.n == 4:
        return case, eta(t, q)
    if case == 1:
        return 1, 1
    if case == 2:
        return 2, chi_q(-units[0] * units[1], q)
    return 3, -1


# =========================================================
# gamma_q AND F_q HELPERS
# =========================================================
def poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def poly_eval(coeffs, x) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def gamma_poly(t: HalfIntSym, q: int) -> tuple[Fraction, ...]:
    """
    gamma_q(T, X) as coefficients, constant term first.

    For even n the division by (1 - q^{n/2} xi X) is carried out on the last
    factor (1 - q^n X^2), leaving (1 + q^{n/2} xi X); with xi = 0 nothing divides.
    """
    _require_nondegenerate(t)
    n = t.n
    poly = [Fraction(1), Fraction(-1)]
    if n % 2:
        for i in range(1, (n - 1) // 2 + 1):
            poly = poly_mul(poly, [1, 0, -Fraction(q) ** (2 * i)])
        return tuple(poly)
    half = n // 2
    for i in range(1, half):
        poly = poly_mul(poly, [1, 0, -Fraction(q) ** (2 * i)])
    x = xi(t, q)
    if x == 0:
        poly = poly_mul(poly, [1, 0, -Fraction(q) ** n])
    else:
        poly = poly_mul(poly, [1, x * Fraction(q) ** half])
    return tuple(poly)


def functional_equation_report(f: FqPoly, t: HalfIntSym, q: int) -> dict:
    """
    Coefficient-wise check of F(q^-4 X^-1) = eta (q^2 X)^-d F(X) for degree 3,
    d = ord_q(4 det T): c_{d-i} = eta q^{2d-4i} c_i and nothing above degree d.
    """
    if t.n != 3:
        raise InputError("the functional equation check is for degree 3")
    d = ord(4 * t.det, q)
    e = eta(t, q)
    c = list(f.coeffs) + [0] * max(0, d + 1 - len(f.coeffs))
    mismatches = []
    if len(f.coeffs) > d + 1:
        mismatches.append({"reason": "degree exceeds d", "degree": f.degree})
    for i in range(d + 1):
        lhs = Fraction(c[d - i])
        rhs = e * Fraction(q) ** (2 * d - 4 * i) * c[i]
        if lhs != rhs:
            mismatches.append({"index": d - i, "have": str(lhs), "expected": str(rhs)})
    return {"ok": not mismatches, "d": d, "eta": e, "q": q, "coeffs": list(f.coeffs), "mismatches": mismatches}


def check_functional_equation_n3(f: FqPoly, t: HalfIntSym, q: int) -> bool:
    return functional_equation_report(f, t, q)["ok"]


# =========================================================
# CLOSED FORMS AT p FOR U0 _|_ pU0
# =========================================================
def u0_unit(p: int) -> int:
    """Smallest positive eps with chi_p(-eps) = -1."""
    return next(e for e in range(1, p) if chi_q(-e, p) == -1)


def u0_form(p: int) -> HalfIntSym:
    """U0 _|_ pU0 with U0 = 1 _|_ eps."""
    eps = u0_unit(p)
    return HalfIntSym.diag(1, eps, p, p * eps)


def alpha_p_closed(t: HalfIntSym, p: int) -> Fraction:
    """
    alpha_p(U0 _|_ pU0, T) in closed form for degree 3 and 4.

    Args:
        t (HalfIntSym): nondegenerate T.
        p (int): odd prime.

    Returns:
        Fraction: (1+p)(1+1/p)(1-eta) for n = 3; for n = 4,
        2(1+1/p)^2 p^{m+2} when det(2T) = p^{2m} xi^2 with m >= 1 and eta = -1, else 0.
    """
    if p == 2:
        raise InputError("p must be odd")
    _require_nondegenerate(t)
    pf = Fraction(p)
    if t.n == 3:
        return (1 + pf) * (1 + 1 / pf) * (1 - eta(t, p))
    if t.n == 4:
        d = ord(t.det2, p)
        if d < 2 or d % 2 or chi_q(t.det2, p) != 1 or eta(t, p) != -1:
            return Fraction(0)
        return 2 * (1 + 1 / pf) ** 2 * pf ** (d // 2 + 2)
    raise DomainError("closed form at p exists for degree 3 and 4 only")
