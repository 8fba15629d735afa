"""Generators for the lower-bound constructions, with ground-truth labels."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Any, Callable

import numpy as np

from .numerics import Field, Matrix, make_rng, random_orthonormal


@dataclass(frozen=True)
class WishartPairConfig:
    n: int
    p: int
    z: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if not 0 <= self.p < self.n:
            raise ValueError(f"need 0 <= p < n, got p={self.p}, n={self.n}")
        if self.z is not None and not self.z > 0:
            raise ValueError("z must be positive")

    @property
    def scale(self) -> float:
        return float(self.n) ** 4 if self.z is None else float(self.z)


@dataclass(frozen=True)
class InstancePair:
    """Two matrix distributions of equal shape and field.

    ``samplers[w](rng)`` draws a world-w matrix. Given the same rng state both
    worlds consume identical random draws, so same-seed samples are coupled.
    """

    name: str
    samplers: tuple[Callable[[Any], Matrix], Callable[[Any], Matrix]]
    truth: tuple[str, str]
    shape: tuple[int, int]
    field: Field = Field.REAL
    params: dict = dc_field(default_factory=dict)

    def sample(self, world: int, rng) -> Matrix:
        return self.samplers[world](make_rng(rng))


def wishart_factors(cfg: WishartPairConfig, rng):
    rng = make_rng(rng)
    n, p = cfg.n, cfg.p
    basis = random_orthonormal(rng, n, n).entries
    u, u_perp = basis[:, :p], basis[:, p:]
    g = rng.standard_normal((n, p))
    h = rng.standard_normal((n, n - p))
    return u, u_perp, g, h


def gen_wishart_rank_pair(cfg: WishartPairConfig) -> InstancePair:
    """World 0: U G^T (rank <= p). World 1: U G^T + U_perp H^T / z (rank n a.s.).

    [U, U_perp] is a Haar orthonormal basis split at column p; G is n x p and
    H is n x (n - p), both standard Gaussian.
    """

    def world0(rng):
        u, _, g, _ = wishart_factors(cfg, rng)
        return Matrix(u @ g.T)

    def world1(rng):
        u, u_perp, g, h = wishart_factors(cfg, rng)
        return Matrix(u @ g.T + (u_perp @ h.T) / cfg.scale)

    return InstancePair("wishart_rank", (world0, world1), ("at_most_p", "at_least_p_plus_1"),
                        (cfg.n, cfg.n), Field.REAL,
                        {"n": cfg.n, "p": cfg.p, "z": cfg.scale})


def _bits(x, name) -> np.ndarray:
    a = np.asarray(x, dtype=np.int64)
    if a.ndim != 1 or not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must be a 0/1 vector")
    return a.astype(np.uint8)


def _same_length(x, y):
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")


def gen_disjointness_all_ones_column(x, y, m: int, field: Field = Field.GF2) -> Matrix:
    """First m-1 rows equal x, last row y: column j is all ones iff x_j = y_j = 1."""
    x, y = _bits(x, "x"), _bits(y, "y")
    _same_length(x, y)
    if m < 2:
        raise ValueError("m must be >= 2")
    return Matrix(np.vstack([np.tile(x, (m - 1, 1)), y[None, :]]), field)


def _expand(x: np.ndarray, rows: int, rng) -> np.ndarray:
    block = np.empty((rows, x.size + 1), dtype=np.uint8)
    block[:, 0] = 1
    block[0, 1:] = x
    if rows > 1:
        noise = rng.integers(0, 2, size=(rows - 1, x.size), dtype=np.uint8)
        block[1:, 1:] = np.where(x[None, :] == 1, 1, noise)
    return block


def gen_identical_columns_instance(x, y, m: int, rng=None, field: Field = Field.GF2) -> Matrix:
    """m x (n+1) matrix: all-ones lead column over an x-block stacked on a y-block.

    Each block's first row is (1, x); later rows keep x's ones and randomize its
    zeros. Columns j+1 and 1 coincide iff x_j = y_j = 1; other coincidences have
    probability <= n^2 / 2^(m/2), below eps once m >= 4 log2(n / eps).
    """
    x, y = _bits(x, "x"), _bits(y, "y")
    _same_length(x, y)
    if m < 2 or m % 2:
        raise ValueError("m must be even and >= 2")
    rng = make_rng(rng)
    return Matrix(np.vstack([_expand(x, m // 2, rng), _expand(y, m // 2, rng)]), field)


def gen_majority_columns_instance(x, y, m: int, field: Field = Field.REAL) -> Matrix:
    x, y = _bits(x, "x"), _bits(y, "y")
    _same_length(x, y)
    if m < 2 or m % 2:
        raise ValueError("m must be even and >= 2")
    return Matrix(np.vstack([np.tile(x, (m // 2, 1)), np.tile(y, (m // 2, 1))]), field)


def gen_bipartite_connectivity_instance(u, v, field: Field = Field.REAL) -> Matrix:
    """n x n bipartite adjacency: first n//2 rows u, the rest v, last column all ones.

    Disconnected iff u and v share a zero position.
    """
    u, v = _bits(u, "u"), _bits(v, "v")
    _same_length(u, v)
    n = u.size + 1
    a = np.ones((n, n), dtype=np.uint8)
    top = n // 2
    a[:top, :-1] = u
    a[top:, :-1] = v
    return Matrix(a, field)


def gen_triangle_instance(n: int, with_triangle: bool, rng=None, density: float = 0.5) -> Matrix:
    """Symmetric 0/1 adjacency with zero diagonal.

    The base graph is bipartite over a random split (hence triangle-free); a planted
    triangle on three random vertices is added when ``with_triangle``.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    rng = make_rng(rng)
    side = rng.integers(0, 2, size=n)
    across = side[:, None] != side[None, :]
    coins = np.triu(rng.random((n, n)) < density, 1)
    a = (coins | coins.T) & across
    if with_triangle:
        i, j, k = rng.choice(n, size=3, replace=False)
        for s, t in ((i, j), (j, k), (i, k)):
            a[s, t] = a[t, s] = True
    return Matrix(a.astype(np.float64), Field.REAL)
