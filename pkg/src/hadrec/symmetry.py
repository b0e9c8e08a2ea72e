"""Row/column permutation pairs, negation pairs, and their actions on matrices.

The group elements are pairs (row permutation, column permutation); acting on
a matrix sends row i to row row_perm[i] and column j to column col_perm[j],
i.e. out[i, j] = M[row_perm^-1(i), col_perm^-1(j)].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrices import SignMatrix


class SizeMismatchError(ValueError):
    """Permutation or sign vector size does not match the matrix order."""


def _check_perm(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.int64)
    n = p.shape[0]
    if p.ndim != 1 or not np.array_equal(np.sort(p), np.arange(n)):
        raise ValueError(f"not a permutation of 0..{n - 1}: {p}")
    return p


@dataclass(frozen=True, eq=False)
class PermPair:
    """A pair of permutations stored as forward maps (i -> new position of i)."""

    row_perm: np.ndarray
    col_perm: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_perm", _check_perm(self.row_perm))
        object.__setattr__(self, "col_perm", _check_perm(self.col_perm))
        if self.row_perm.shape[0] != self.col_perm.shape[0]:
            raise ValueError("row and column permutations must have equal size")

    @property
    def size(self) -> int:
        return self.row_perm.shape[0]

    @staticmethod
    def identity(n: int) -> "PermPair":
        return PermPair(np.arange(n), np.arange(n))

    def compose(self, other: "PermPair") -> "PermPair":
        """self after other: (self o other)(i) = self(other(i))."""
        if self.size != other.size:
            raise SizeMismatchError("cannot compose permutation pairs of different sizes")
        return PermPair(self.row_perm[other.row_perm], self.col_perm[other.col_perm])

    def inverse(self) -> "PermPair":
        inv_r = np.empty_like(self.row_perm)
        inv_c = np.empty_like(self.col_perm)
        inv_r[self.row_perm] = np.arange(self.size)
        inv_c[self.col_perm] = np.arange(self.size)
        return PermPair(inv_r, inv_c)

    def __eq__(self, other):
        if not isinstance(other, PermPair):
            return NotImplemented
        return np.array_equal(self.row_perm, other.row_perm) and np.array_equal(
            self.col_perm, other.col_perm
        )


@dataclass(frozen=True, eq=False)
class SignMaskPair:
    """Row and column sign vectors over {-1, +1}."""

    row_signs: np.ndarray
    col_signs: np.ndarray

    def __post_init__(self):
        rs = np.asarray(self.row_signs, dtype=np.int64)
        cs = np.asarray(self.col_signs, dtype=np.int64)
        for v in (rs, cs):
            if v.ndim != 1 or not np.isin(v, (-1, 1)).all():
                raise ValueError("sign vectors must be 1-D over {-1, +1}")
        if rs.shape[0] != cs.shape[0]:
            raise ValueError("row and column sign vectors must have equal size")
        object.__setattr__(self, "row_signs", rs)
        object.__setattr__(self, "col_signs", cs)

    @property
    def size(self) -> int:
        return self.row_signs.shape[0]


def act(p: PermPair, m: SignMatrix) -> SignMatrix:
    """Apply the permutation pair: out[p.row_perm[i], p.col_perm[j]] = m[i, j]."""
    if p.size != m.order:
        raise SizeMismatchError(f"permutation size {p.size} != matrix order {m.order}")
    out = np.empty_like(m.entries)
    out[np.ix_(p.row_perm, p.col_perm)] = m.entries
    return SignMatrix(out)


def act_grid(p: PermPair, grid: np.ndarray) -> np.ndarray:
    """Same action on an (n, n, ...) real array (feature grids, prediction grids)."""
    if p.size != grid.shape[0] or grid.shape[0] != grid.shape[1]:
        raise SizeMismatchError("grid shape does not match permutation size")
    out = np.empty_like(grid)
    out[np.ix_(p.row_perm, p.col_perm)] = grid
    return out


def negate(s: SignMaskPair, m: SignMatrix) -> SignMatrix:
    """out[i, j] = row_signs[i] * col_signs[j] * m[i, j]; zeros stay zero."""
    if s.size != m.order:
        raise SizeMismatchError(f"sign vector size {s.size} != matrix order {m.order}")
    out = np.outer(s.row_signs, s.col_signs) * m.entries.astype(np.int64)
    return SignMatrix(out)


def random_perm_pair(rng: np.random.Generator, n: int) -> PermPair:
    """Uniform draw from the product of two symmetric groups (Fisher-Yates shuffles)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return PermPair(rng.permutation(n), rng.permutation(n))


def random_signs(rng: np.random.Generator, n: int) -> SignMaskPair:
    """Independent uniform draws from {-1, +1} for every row and column."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return SignMaskPair(
        rng.integers(0, 2, size=n) * 2 - 1,
        rng.integers(0, 2, size=n) * 2 - 1,
    )
