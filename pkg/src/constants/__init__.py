from fractions import Fraction

# Genus representatives of S^(11) as printed (rows of 2S) with their automorphism counts
P11_REPRESENTATIVES = (
    ("S1", ((2, 0, 1, 0), (0, 2, 0, 1), (1, 0, 6, 0), (0, 1, 0, 6)), 32),
    ("S2", ((2, 1, 1, 1), (1, 2, 0, 1), (1, 0, 8, 4), (1, 1, 4, 8)), 72),
    ("S3", ((4, 2, 1, 1), (2, 4, 0, 1), (1, 0, 4, 2), (1, 1, 2, 4)), 24),
)

# 2T0, det(T0) = 11/4
T0_TWO_T = ((2, 0, 1), (0, 2, 0), (1, 0, 6))
T0_LIMIT = Fraction(144, 25)

# M(S^(p))^{-1} for small p
MASS_TABLE = {
    3: Fraction(288),
    5: Fraction(72),
    7: Fraction(32),
    11: Fraction(288, 25),
    13: Fraction(8),
}

# Exit codes
EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3

# Defaults
DEFAULT_BOUND = 3
DEFAULT_SEARCH_BOUND = 6
DEFAULT_LIMIT_TERMS = 2
