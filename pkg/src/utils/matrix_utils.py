from fractions import Fraction
from itertools import combinations

# =========================================================
# EXACT INTEGER / RATIONAL MATRICES
# =========================================================
def transpose(m):
    return [list(col) for col in zip(*m)]


def mat_mul(a, b):
    bt = transpose(b)
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def congruent(m, g):
    """g^T m g."""
    return mat_mul(mat_mul(transpose(g), m), g)


def identity(n):
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def int_det(m):
    """
    Fraction-free (Bareiss) determinant of an integer matrix.

    Args:
        m: square list of integer rows.

    Returns:
        int: the exact determinant.
    """
    n = len(m)
    if n == 0:
        return 1
    a = [list(row) for row in m]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def rational_inverse(m):
    """Gauss-Jordan inverse over Q. Raises ZeroDivisionError on a singular matrix."""
    n = len(m)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        a[c], a[piv] = a[piv], a[c]
        inv = 1 / a[c][c]
        a[c] = [x * inv for x in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return [row[n:] for row in a]


def diagonalize_rational(m):
    """
    Diagonal entries b_1..b_n of a form GL_n(Q)-equivalent to the symmetric matrix m.

    A zero pivot with a nonzero entry further along its row is fixed by
    replacing e_i with e_i + e_j (or e_j itself when a_jj != 0).
    """
    n = len(m)
    a = [[Fraction(x) for x in row] for row in m]
    out = []
    for i in range(n):
        if a[i][i] == 0:
            j = next((j for j in range(i + 1, n) if a[j][j] != 0), None)
            if j is not None:
                a[i], a[j] = a[j], a[i]
                for row in a:
                    row[i], row[j] = row[j], row[i]
            else:
                j = next((j for j in range(i + 1, n) if a[i][j] != 0), None)
                if j is None:
                    raise ZeroDivisionError("degenerate form")
                for c in range(n):
                    a[i][c] += a[j][c]
                for r in range(n):
                    a[r][i] += a[r][j]
        piv = a[i][i]
        out.append(piv)
        for r in range(i + 1, n):
            if a[r][i] == 0:
                continue
            for c in range(i + 1, n):
                a[r][c] -= a[r][i] * a[i][c] / piv
        for k in range(i + 1, n):
            a[k][i] = a[i][k] = Fraction(0)
    return out


def is_positive_definite(m):
    n = len(m)
    return all(int_det([row[:k] for row in m[:k]]) > 0 for k in range(1, n + 1))


def is_positive_semidefinite(m):
    n = len(m)
    for k in range(1, n + 1):
        for idx in combinations(range(n), k):
            if int_det([[m[i][j] for j in idx] for i in idx]) < 0:
                return False
    return True


# =========================================================
# LINEAR ALGEBRA OVER F_p
# =========================================================
def row_echelon_mod(m, p, t=None):
    """
    In-place row echelon form of m over F_p; t (right-hand side) follows the
    row operations. Returns the list of free (non-pivot) columns.
    """
    free_vars = []
    n_rows = len(m)
    n_cols = len(m[0]) if n_rows else 0
    piv_r = 0
    for piv_c in range(n_cols):
        for i_row in range(piv_r, n_rows):
            if m[i_row][piv_c] % p:
                break
        else:
            free_vars.append(piv_c)
            continue
        if i_row != piv_r:
            m[piv_r], m[i_row] = m[i_row], m[piv_r]
            if t is not None:
                t[piv_r], t[i_row] = t[i_row], t[piv_r]
        inv = pow(m[piv_r][piv_c], -1, p)
        m[piv_r] = [(x * inv) % p for x in m[piv_r]]
        if t is not None:
            t[piv_r] = (t[piv_r] * inv) % p
        for r in range(n_rows):
            if r == piv_r:
                continue
            fr = m[r][piv_c] % p
            if fr == 0:
                continue
            m[r] = [(x - fr * y) % p for x, y in zip(m[r], m[piv_r])]
            if t is not None:
                t[r] = (t[r] - fr * t[piv_r]) % p
        piv_r += 1
        if piv_r == n_rows:
            free_vars.extend(range(piv_c + 1, n_cols))
            break
    return free_vars


def solve_mod(a, b, p, n_cols=None):
    """
    Affine solution set of a x = b over F_p.

    Returns:
        None when inconsistent, else (particular, basis) with basis spanning
        the kernel.
    """
    n_cols = n_cols if n_cols is not None else (len(a[0]) if a else 0)
    m = [[x % p for x in row] for row in a]
    t = [x % p for x in b]
    if not m:
        return [0] * n_cols, [[int(i == j) for j in range(n_cols)] for i in range(n_cols)]
    free_vars = row_echelon_mod(m, p, t)
    rank = n_cols - len(free_vars)
    if any(t[r] for r in range(rank, len(m))):
        return None
    free_set = set(free_vars)
    piv_cols = [c for c in range(n_cols) if c not in free_set]
    particular = [0] * n_cols
    for r, c in enumerate(piv_cols):
        particular[c] = t[r]
    basis = []
    for f in free_vars:
        v = [0] * n_cols
        v[f] = 1
        for r, c in enumerate(piv_cols):
            v[c] = (-m[r][f]) % p
        basis.append(v)
    return particular, basis


def rank_mod(a, p):
    if not a:
        return 0
    m = [[x % p for x in row] for row in a]
    return len(a[0]) - len(row_echelon_mod(m, p))


def det_mod(a, p):
    n = len(a)
    m = [[x % p for x in row] for row in a]
    det = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c]), None)
        if piv is None:
            return 0
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det = det * m[c][c] % p
        inv = pow(m[c][c], -1, p)
        for r in range(c + 1, n):
            f = m[r][c] * inv % p
            if f:
                m[r] = [(x - f * y) % p for x, y in zip(m[r], m[c])]
    return det % p
