import math
from fractions import Fraction
from functools import lru_cache
from math import comb

import sympy
from sympy.functions.combinatorial.numbers import jacobi_symbol
from sympy.ntheory import factorint, isprime

from src.core.exceptions import InputError
from src.core.types import QuadChar, Valuation

INF = math.inf


# =========================================================
# VALUATIONS
# =========================================================
def _int_ord(n: int, q: int) -> int:
    e = 0
    while n % q == 0:
        n //= q
        e += 1
    return e


def ord(x, q: int) -> Valuation:
    """
    q-adic valuation of a rational.

    Args:
        x: int or Fraction.
        q: a prime.

    Returns:
        int, or math.inf when x == 0.
    """
    x = Fraction(x)
    if x == 0:
        return INF
    return _int_ord(x.numerator, q) - _int_ord(x.denominator, q)


def unit_part(x, q: int) -> tuple[int, Fraction]:
    """Split nonzero x as q^a * u with u a q-unit."""
    x = Fraction(x)
    a = ord(x, q)
    return a, x / Fraction(q) ** a


def padic_distance_order(x, y, p: int) -> Valuation:
    return ord(Fraction(x) - Fraction(y), p)


def is_odd_prime(p) -> bool:
    return isinstance(p, int) and p > 2 and isprime(p)


def require_prime(q) -> int:
    if not isinstance(q, int) or not isprime(q):
        raise InputError(f"{q} is not a prime")
    return q


# =========================================================
# BERNOULLI NUMBERS
# =========================================================
@lru_cache(maxsize=None)
def bernoulli(k: int) -> Fraction:
    """
    Exact Bernoulli number B_k, convention B_1 = -1/2.

    sympy's own B_1 convention changed across releases, so index 1 is pinned here.
    """
    if k < 0:
        raise InputError("Bernoulli index must be non-negative")
    if k == 1:
        return Fraction(-1, 2)
    b = sympy.bernoulli(k)
    return Fraction(int(b.p), int(b.q))


def bernoulli_poly(k: int, x) -> Fraction:
    x = Fraction(x)
    return sum((comb(k, j) * bernoulli(j) * x ** (k - j) for j in range(k + 1)), Fraction(0))


def gen_bernoulli(k: int, chi: QuadChar) -> Fraction:
    """
    Generalized Bernoulli number B_{k,chi}.

    Args:
        k (int): index, k >= 1.
        chi (QuadChar): the character; the trivial one gives B_k itself.

    Returns:
        Fraction: f^{k-1} * sum_{a=1..f} chi(a) B_k(a/f), f the conductor.
    """
    if k < 1:
        raise InputError("generalized Bernoulli index must be positive")
    if chi.is_trivial:
        return bernoulli(k)
    f = chi.conductor
    total = Fraction(0)
    for a in range(1, f + 1):
        c = kronecker(chi.discriminant, a)
        if c:
            total += c * bernoulli_poly(k, Fraction(a, f))
    return Fraction(f) ** (k - 1) * total


# =========================================================
# QUADRATIC SYMBOLS
# =========================================================
def legendre(a: int, q: int) -> int:
    """(a/q) for an odd prime q; 0 when q | a."""
    return int(jacobi_symbol(a % q, q))


def kronecker(d: int, m: int) -> int:
    """Kronecker symbol (d/m)."""
    if m == 0:
        return 1 if abs(d) == 1 else 0
    result = 1
    if m < 0:
        m = -m
        if d < 0:
            result = -result
    e = _int_ord(m, 2)
    m >>= e
    if e:
        if d % 2 == 0:
            return 0
        if e % 2 and d % 8 in (3, 5):
            result = -result
    if m == 1:
        return result
    return result * int(jacobi_symbol(d % m, m))


def _unit_residue(u: Fraction, modulus: int) -> int:
    # n/d and n*d share their Legendre symbol and their class mod 8
    return (u.numerator * u.denominator) % modulus


def hilbert_symbol(a, b, place) -> int:
    """
    Hilbert symbol <a,b> over Q_place.

    Args:
        a, b: nonzero rationals.
        place: a prime, or math.inf / the string "inf" for the real place.

    Returns:
        int: 1 or -1.
    """
    a, b = Fraction(a), Fraction(b)
    if a == 0 or b == 0:
        raise InputError("Hilbert symbol needs nonzero arguments")
    if place == INF or place == "inf":
        return -1 if a < 0 and b < 0 else 1
    q = place
    alpha, u = unit_part(a, q)
    beta, v = unit_part(b, q)
    if q != 2:
        sign = -1 if (alpha * beta * (q - 1) // 2) % 2 else 1
        lu = legendre(_unit_residue(u, q), q)
        lv = legendre(_unit_residue(v, q), q)
        return sign * lu ** (beta % 2) * lv ** (alpha % 2)
    u8, v8 = _unit_residue(u, 8), _unit_residue(v, 8)
    eps_u, eps_v = (u8 - 1) // 2 % 2, (v8 - 1) // 2 % 2
    om_u, om_v = (u8 * u8 - 1) // 8 % 2, (v8 * v8 - 1) // 8 % 2
    exponent = eps_u * eps_v + alpha * om_v + beta * om_u
    return -1 if exponent % 2 else 1


def chi_q(a, q: int) -> int:
    """1 if a is a square in Q_q, -1 if Q_q(sqrt a) is unramified quadratic, 0 if ramified."""
    a = Fraction(a)
    if a == 0:
        raise InputError("chi_q needs a nonzero argument")
    alpha, u = unit_part(a, q)
    if alpha % 2:
        return 0
    if q != 2:
        return legendre(_unit_residue(u, q), q)
    u8 = _unit_residue(u, 8)
    if u8 == 1:
        return 1
    if u8 == 5:
        return -1
    return 0


def relevant_places(*values) -> list:
    """Primes dividing numerator or denominator of any value, plus 2 and the real place."""
    primes = {2}
    for x in values:
        x = Fraction(x)
        for n in (abs(x.numerator), x.denominator):
            if n > 1:
                primes.update(factorint(n))
    return sorted(primes) + [INF]


def squarefree_kernel(x) -> int:
    """Signed squarefree integer d with x = d * (rational square)."""
    x = Fraction(x)
    if x == 0:
        raise InputError("zero has no squarefree kernel")
    n = abs(x.numerator) * x.denominator
    d = 1
    for prime, e in factorint(n).items():
        if e % 2:
            d *= prime
    return d if x > 0 else -d


def fundamental_discriminant(x) -> int:
    """Discriminant of Q(sqrt x); 1 when x is a rational square."""
    d = squarefree_kernel(x)
    if d == 1:
        return 1
    return d if d % 4 == 1 else 4 * d
