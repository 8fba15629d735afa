"""Query-counted access to a hidden matrix through matrix-vector products."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .numerics import Field, Matrix, as_matrix


class OracleError(Exception):
    pass


class DimensionMismatch(OracleError, ValueError):
    pass


class FieldMismatch(OracleError, TypeError):
    pass


class BudgetExhausted(OracleError):
    pass


class SideNotPermitted(OracleError):
    pass


class NotSquare(OracleError, ValueError):
    pass


class NonFiniteResponse(OracleError, ArithmeticError):
    pass


class Side(enum.Enum):
    RIGHT_ONLY = "right"
    BOTH = "both"


@dataclass(frozen=True)
class QueryRecord:
    side: str
    query: np.ndarray
    response: np.ndarray


class MatVecOracle:
    """Answers ``M @ v`` (and ``u @ M`` when both sides are allowed), counting every product.

    A query that would push the counter past ``budget`` raises ``BudgetExhausted``
    before anything is computed; failed queries never increment the counter.
    Transcript recording is off unless ``record=True``.
    """

    def __init__(self, matrix, side: Side = Side.RIGHT_ONLY, budget: int | None = None,
                 record: bool = False, field: Field | None = None):
        if matrix is not None:
            matrix = as_matrix(matrix, field or Field.REAL)
            self._matrix = matrix
            self._shape = matrix.shape
            self._field = matrix.field
        if budget is not None and budget < 0:
            raise ValueError("budget must be non-negative")
        self.side = Side(side)
        self.budget = budget
        self._used = 0
        self.transcript: list[QueryRecord] | None = [] if record else None

    # -- public surface --------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self._shape

    @property
    def m(self) -> int:
        return self._shape[0]

    @property
    def n(self) -> int:
        return self._shape[1]

    @property
    def field(self) -> Field:
        return self._field

    @property
    def queries_used(self) -> int:
        return self._used

    @property
    def remaining(self) -> int | None:
        return None if self.budget is None else self.budget - self._used

    def stats(self) -> tuple[int, int | None]:
        return self._used, self.budget

    def reset_counter(self) -> None:
        self._used = 0
        if self.transcript is not None:
            self.transcript.clear()

    def require_square(self) -> int:
        if self.m != self.n:
            raise NotSquare(f"oracle matrix is {self.m}x{self.n}, expected square")
        return self.n

    def query_right(self, v) -> np.ndarray:
        v = self._coerce(v, self.n)
        if v.ndim != 1:
            raise DimensionMismatch("query_right takes a single vector; use query_right_many")
        return self.query_right_many(v[:, None])[:, 0]

    def query_right_many(self, vs) -> np.ndarray:
        """Answer every column of ``vs`` (shape (n, q)); costs q queries."""
        vs = self._coerce(vs, self.n)
        if vs.ndim == 1:
            vs = vs[:, None]
        q = vs.shape[1]
        self._reserve(q)
        out = self._apply_right(vs)
        self._used += q
        self._log("right", vs, out)
        return out

    def query_left(self, u) -> np.ndarray:
        if self.side is not Side.BOTH:
            raise SideNotPermitted("left queries need an oracle built with Side.BOTH")
        u = self._coerce(u, self.m)
        if u.ndim != 1:
            raise DimensionMismatch("query_left takes a single vector")
        self._reserve(1)
        out = self._apply_left(u)
        self._used += 1
        self._log("left", u[:, None], out[:, None])
        return out

    # -- internals -------------------------------------------------------

    def _reserve(self, q: int) -> None:
        if self.budget is not None and self._used + q > self.budget:
            raise BudgetExhausted(
                f"{q} more queries would exceed budget {self.budget} (used {self._used})")

    def _log(self, side, queries, responses):
        if self.transcript is None:
            return
        for k in range(queries.shape[1]):
            self.transcript.append(QueryRecord(side, queries[:, k].copy(), responses[:, k].copy()))

    def _coerce(self, v, length: int) -> np.ndarray:
        v = np.asarray(v)
        if v.ndim not in (1, 2) or v.shape[0] != length:
            raise DimensionMismatch(f"query has shape {v.shape}, expected leading dimension {length}")
        kind = v.dtype.kind
        if self._field is Field.GF2:
            if kind not in "biu":
                raise FieldMismatch(f"GF2 oracle needs integer 0/1 queries, got dtype {v.dtype}")
            if not np.all((v == 0) | (v == 1)):
                raise FieldMismatch("GF2 query entries must be 0 or 1")
            return v.astype(np.uint8)
        if kind not in "biuf":
            raise FieldMismatch(f"real oracle cannot take dtype {v.dtype}")
        return v.astype(np.float64)

    def _apply_right(self, vs: np.ndarray) -> np.ndarray:
        if self._field is Field.GF2:
            return kernels.gf2_matmat(self._matrix.packed, kernels.pack_bits(vs.T))
        return self._matrix.entries @ vs

    def _apply_left(self, u: np.ndarray) -> np.ndarray:
        if self._field is Field.GF2:
            words = kernels.gf2_vecmat(self._matrix.packed, u)
            return kernels.unpack_bits(words[None, :], self.n)[0]
        return u @ self._matrix.entries


class PowerOracle(MatVecOracle):
    """Answers ``A^k v`` by chaining k queries to a square base oracle.

    The derived counter counts derived queries; the base oracle's counter rises by
    k for each of them, so the total base cost stays observable on ``base``.
    """

    def __init__(self, base: MatVecOracle, k: int, budget: int | None = None,
                 record: bool = False):
        if k < 1:
            raise ValueError("power must be >= 1")
        base.require_square()
        self.base = base
        self.power = k
        self._shape = base.shape
        self._field = base.field
        super().__init__(None, side=base.side, budget=budget, record=record)

    def _reserve(self, q: int) -> None:
        super()._reserve(q)
        self.base._reserve(q * self.power)

    def _coerce(self, v, length):
        return self.base._coerce(v, length)

    def _apply_right(self, vs):
        out = vs
        for _ in range(self.power):
            out = self.base.query_right_many(out)
        return out

    def _apply_left(self, u):
        out = u
        for _ in range(self.power):
            out = self.base.query_left(out)
        return out


def power_oracle(o: MatVecOracle, k: int) -> PowerOracle:
    return PowerOracle(o, k)
