"""Field-tagged dense matrices, seeded generators and small numerical kernels."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import kernels

DEFAULT_RANK_TOL = 1e-8
MATRIX_MAGIC = "matvecprobe-matrix"
MATRIX_VERSION = "v1"


class Field(enum.Enum):
    REAL = "real"
    GF2 = "gf2"


def make_rng(seed=None) -> np.random.Generator:
    """PCG64 generator; ``seed`` may be an int, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed, count: int) -> list[np.random.Generator]:
    """Independent child streams, stable in (seed, index) regardless of order of use."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [make_rng(child) for child in ss.spawn(count)]


def trial_rng(base_seed: int, index: int) -> np.random.Generator:
    return make_rng(np.random.SeedSequence([int(base_seed), int(index)]))


@dataclass(frozen=True, eq=False)
class Matrix:
    """Immutable m x n matrix over REAL or GF2.

    GF2 entries are stored as uint8 in {0, 1}; the 64-bit packed row form used by
    the products is built once and cached.
    """

    entries: np.ndarray
    field: Field = Field.REAL
    _packed: np.ndarray | None = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"matrix must be 2-D with m, n >= 1, got shape {a.shape}")
        if self.field is Field.GF2:
            if a.dtype.kind == "f" and not np.all(np.isin(a, (0.0, 1.0))):
                raise ValueError("GF2 entries must be 0 or 1")
            if a.dtype.kind in "iub" and not np.all((a == 0) | (a == 1)):
                raise ValueError("GF2 entries must be 0 or 1")
            a = a.astype(np.uint8)
            object.__setattr__(self, "_packed", kernels.pack_bits(a))
        else:
            if np.iscomplexobj(a):
                raise ValueError("complex matrices are not supported")
            a = a.astype(np.float64)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def packed(self) -> np.ndarray:
        if self._packed is None:
            raise AttributeError("only GF2 matrices carry a packed form")
        return self._packed

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.field is other.field and np.array_equal(self.entries, other.entries)

    __hash__ = None


def as_matrix(a, field: Field = Field.REAL) -> Matrix:
    if isinstance(a, Matrix):
        return a
    return Matrix(np.asarray(a), field)


# -- generators -------------------------------------------------------------


def gaussian_matrix(rng, m: int, n: int) -> Matrix:
    _check_dims(m, n)
    return Matrix(make_rng(rng).standard_normal((m, n)), Field.REAL)


def bernoulli_matrix(rng, m: int, n: int, field: Field = Field.GF2) -> Matrix:
    _check_dims(m, n)
    bits = make_rng(rng).integers(0, 2, size=(m, n), dtype=np.uint8)
    return Matrix(bits, field)


def random_orthonormal(rng, n: int, k: int | None = None) -> Matrix:
    """Haar-distributed n x k matrix with orthonormal columns.

    QR of a Gaussian matrix with the sign of R's diagonal folded into Q, followed by
    one re-orthogonalization pass.
    """
    k = n if k is None else k
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    g = make_rng(rng).standard_normal((n, k))
    q = _signed_qr(g)
    q = _signed_qr(q)
    return Matrix(q, Field.REAL)


def _signed_qr(a: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(a, mode="reduced")
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def _check_dims(m, n):
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be >= 1, got ({m}, {n})")


# -- kernels ----------------------------------------------------------------


def numerical_rank(a, tol: float = DEFAULT_RANK_TOL) -> int:
    """Count of |R_ii| > tol * |R_00| in a column-pivoted QR of ``a``."""
    a = a.entries if isinstance(a, Matrix) else np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return 0
    r = scipy.linalg.qr(a, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(r))
    if d.size == 0 or d[0] == 0.0:
        return 0
    return int(np.count_nonzero(d > tol * d[0]))


def row_norms_exact(a) -> np.ndarray:
    a = a.entries if isinstance(a, Matrix) else np.asarray(a, dtype=np.float64)
    return np.sqrt(np.einsum("ij,ij->i", a, a))


def gf2_rank(a) -> int:
    """Rank over GF(2) by XOR elimination on packed rows."""
    a = a.entries if isinstance(a, Matrix) else np.asarray(a)
    rows = [int("".join(map(str, r)), 2) if len(r) else 0 for r in (a.astype(np.uint8) % 2)]
    rank = 0
    while rows:
        pivot = max(rows)
        rows.remove(pivot)
        if pivot == 0:
            break
        rank += 1
        top = pivot.bit_length() - 1
        rows = [r ^ pivot if (r >> top) & 1 else r for r in rows]
    return rank


# -- text interchange -------------------------------------------------------


def write_matrix(a: Matrix, path) -> None:
    lines = [f"{MATRIX_MAGIC} {MATRIX_VERSION} {a.field.value} {a.m} {a.n}"]
    if a.field is Field.GF2:
        lines.extend(" ".join(str(int(x)) for x in row) for row in a.entries)
    else:
        lines.extend(" ".join(repr(float(x)) for x in row) for row in a.entries)
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> Matrix:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty matrix file")
    header = text[0].split()
    if len(header) != 5 or header[0] != MATRIX_MAGIC or header[1] != MATRIX_VERSION:
        raise ValueError(f"{path}: bad header {text[0]!r}")
    fld = Field(header[2])
    m, n = int(header[3]), int(header[4])
    body = [ln for ln in text[1:] if ln.strip()]
    if len(body) != m:
        raise ValueError(f"{path}: expected {m} rows, found {len(body)}")
    dtype = np.uint8 if fld is Field.GF2 else np.float64
    rows = []
    for i, ln in enumerate(body):
        vals = ln.split()
        if len(vals) != n:
            raise ValueError(f"{path}: row {i + 1} has {len(vals)} entries, expected {n}")
        rows.append([int(v) for v in vals] if fld is Field.GF2 else [float(v) for v in vals])
    return Matrix(np.array(rows, dtype=dtype), fld)
