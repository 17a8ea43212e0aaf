"""Immutable domain types shared by the utils modules."""
import math
from fractions import Fraction
from typing import Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.utils.matrix_utils import int_det

Valuation = Union[int, float]  # float only for math.inf


def rat_to_json(x: Fraction) -> dict:
    x = Fraction(x)
    return {"num": str(x.numerator), "den": str(x.denominator)}


def rat_from_json(d: dict) -> Fraction:
    return Fraction(int(d["num"]), int(d["den"]))


def val_to_json(v: Valuation):
    return "inf" if v == math.inf else int(v)


class HalfIntSym(BaseModel):
    """Half-integral symmetric T, stored as the integer matrix 2T."""

    model_config = ConfigDict(frozen=True)

    two_t: tuple[tuple[int, ...], ...]

    @field_validator("two_t", mode="before")
    @classmethod
    def coerce_rows(cls, v):
        return tuple(tuple(int(x) for x in row) for row in v)

    @field_validator("two_t")
    @classmethod
    def check_shape(cls, v):
        n = len(v)
        if any(len(row) != n for row in v):
            raise ValueError("2T must be square")
        for i in range(n):
            if v[i][i] % 2:
                raise ValueError(f"2T has odd diagonal entry at ({i},{i})")
            for j in range(i):
                if v[i][j] != v[j][i]:
                    raise ValueError("2T must be symmetric")
        return v

    @classmethod
    def from_key(cls, n: int, key) -> "HalfIntSym":
        return cls(two_t=[key[i * n:(i + 1) * n] for i in range(n)])

    @classmethod
    def diag(cls, *entries: int) -> "HalfIntSym":
        n = len(entries)
        return cls(two_t=[[2 * entries[i] if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def block_sum(cls, *forms: "HalfIntSym") -> "HalfIntSym":
        n = sum(f.n for f in forms)
        rows = [[0] * n for _ in range(n)]
        off = 0
        for f in forms:
            for i in range(f.n):
                for j in range(f.n):
                    rows[off + i][off + j] = f.two_t[i][j]
            off += f.n
        return cls(two_t=rows)

    @property
    def n(self) -> int:
        return len(self.two_t)

    @property
    def key(self) -> tuple[int, ...]:
        return tuple(x for row in self.two_t for x in row)

    @property
    def det2(self) -> int:
        """det(2T)."""
        return int_det(self.two_t)

    @property
    def det(self) -> Fraction:
        return Fraction(self.det2, 2 ** self.n)

    def entry(self, i: int, j: int) -> Fraction:
        return Fraction(self.two_t[i][j], 2)

    def scaled(self, c: int) -> "HalfIntSym":
        return HalfIntSym(two_t=[[c * x for x in row] for row in self.two_t])

    def rows(self) -> list[list[int]]:
        return [list(row) for row in self.two_t]

    def to_json(self):
        return [list(row) for row in self.two_t]


def hyperbolic(k: int) -> HalfIntSym:
    """H_k = H ⊥ ... ⊥ H with H = [[0,1/2],[1/2,0]]."""
    h = HalfIntSym(two_t=[[0, 1], [1, 0]])
    return HalfIntSym.block_sum(*([h] * k)) if k else HalfIntSym(two_t=[])


class JordanForm(BaseModel):
    model_config = ConfigDict(frozen=True)

    q: int
    blocks: tuple[tuple[int, int], ...]  # (exponent, unit)

    @field_validator("blocks")
    @classmethod
    def check_blocks(cls, v, info):
        q = info.data.get("q")
        if list(v) != sorted(v, key=lambda b: b[0]):
            raise ValueError("blocks must be sorted by exponent")
        if q and any(u % q == 0 for _, u in v):
            raise ValueError("block units must be prime to q")
        return v

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.blocks)

    @property
    def units(self) -> tuple[int, ...]:
        return tuple(u for _, u in self.blocks)

    def to_form(self) -> HalfIntSym:
        return HalfIntSym.diag(*(u * self.q ** a for a, u in self.blocks))


class ReducedMatrix(BaseModel):
    model_config = ConfigDict(frozen=True)

    q: int
    entries: tuple[tuple[int, ...], ...]

    @model_validator(mode="after")
    def check_reduced(self):
        n = len(self.entries)
        for j in range(n):
            d = self.entries[j][j]
            e = self.exponent_of(d)
            if e is None:
                raise ValueError("diagonal entries must be powers of q")
            for i in range(n):
                x = self.entries[i][j]
                if i > j and x != 0:
                    raise ValueError("reduced matrices are upper triangular")
                if i < j and not 0 <= x < d:
                    raise ValueError("off-diagonal entry out of range")
        return self

    def exponent_of(self, d: int):
        e = 0
        while d > 1 and d % self.q == 0:
            d //= self.q
            e += 1
        return e if d == 1 else None

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(self.exponent_of(self.entries[i][i]) for i in range(self.n))

    @property
    def total_exponent(self) -> int:
        return sum(self.exponents)


class DensityResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: Fraction
    e_certified: int = Field(ge=1)
    raw_count: int = Field(ge=0)
    q: int
    cache_hits: int = 0

    def to_json(self):
        return {
            "value": rat_to_json(self.value),
            "e_certified": self.e_certified,
            "raw_count": str(self.raw_count),
            "q": self.q,
            "cache_hits": self.cache_hits,
        }


class FqPoly(BaseModel):
    model_config = ConfigDict(frozen=True)

    q: int
    coeffs: tuple[int, ...]

    @field_validator("coeffs")
    @classmethod
    def check_coeffs(cls, v):
        if not v or v[0] != 1:
            raise ValueError("F_q has constant term 1")
        while len(v) > 1 and v[-1] == 0:
            v = v[:-1]
        return v

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc


class QuadChar(BaseModel):
    """Kronecker character of a fundamental discriminant; 1 is the trivial character."""

    model_config = ConfigDict(frozen=True)

    discriminant: int

    @field_validator("discriminant")
    @classmethod
    def check_disc(cls, v):
        if v == 0 or v % 4 not in (0, 1):
            raise ValueError(f"{v} is not a discriminant")
        return v

    @property
    def conductor(self) -> int:
        return abs(self.discriminant)

    @property
    def is_trivial(self) -> bool:
        return self.discriminant == 1


class GenusRep(BaseModel):
    model_config = ConfigDict(frozen=True)

    gram: HalfIntSym
    aut_count: int
    name: str = ""

    @field_validator("aut_count")
    @classmethod
    def check_aut(cls, v):
        if v < 2 or v % 2:
            raise ValueError("automorphism counts are even and at least 2")
        return v


class CoeffTable(BaseModel):
    """Truncated Fourier expansion: 2T keys (row-major) to exact values."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int
    bound: int
    entries: dict[tuple[int, ...], Fraction]
    label: str = ""

    def __getitem__(self, t: HalfIntSym) -> Fraction:
        return self.entries[t.key]

    def get(self, t: HalfIntSym, default=None):
        return self.entries.get(t.key, default)

    def sorted_keys(self):
        return sorted(self.entries)

    def to_json(self):
        return {
            "n": self.n,
            "bound": self.bound,
            "label": self.label,
            "entries": [
                {"two_t": list(k), "value": rat_to_json(self.entries[k])} for k in self.sorted_keys()
            ],
        }

    def csv_rows(self):
        yield ["two_t", "det_2t", "num", "den"]
        for k in self.sorted_keys():
            v = self.entries[k]
            t = HalfIntSym.from_key(self.n, k)
            yield [" ".join(map(str, k)), str(t.det2), str(v.numerator), str(v.denominator)]


class LimitReport(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p: int
    two_t: tuple[tuple[int, ...], ...]
    target: Fraction | None
    terms: tuple[tuple[int, int, Fraction], ...]
    cauchy_orders: tuple[Valuation, ...]
    target_orders: tuple[Valuation, ...] = ()

    def to_json(self):
        return {
            "p": self.p,
            "two_t": [list(r) for r in self.two_t],
            "target": rat_to_json(self.target) if self.target is not None else None,
            "terms": [{"m": m, "k": k, "value": rat_to_json(v)} for m, k, v in self.terms],
            "cauchy_orders": [val_to_json(v) for v in self.cauchy_orders],
            "target_orders": [val_to_json(v) for v in self.target_orders],
        }
