"""Brute-force completion oracle: enumerate every way to fill the zeros.

Independent of both reconstruction methods; used to validate them. Cost is
2^k over k deletions, so callers keep k small.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .matrices import SignMatrix, is_hadamard

ENUMERATION_LIMIT = 24  # 2^24 completions is already ~17M; refuse beyond


def enumerate_completions(masked: SignMatrix, limit: int = ENUMERATION_LIMIT) -> list[SignMatrix]:
    """All sign assignments to the zero positions that yield a Hadamard matrix."""
    positions = masked.mask()
    if len(positions) > limit:
        raise ValueError(f"{len(positions)} deletions exceed enumeration limit {limit}")
    if not positions:
        return [masked] if is_hadamard(masked) else []
    found = []
    base = masked.entries.astype(np.int64)
    for signs in product((-1, 1), repeat=len(positions)):
        candidate = base.copy()
        for (i, j), s in zip(positions, signs):
            candidate[i, j] = s
        m = SignMatrix(candidate)
        if is_hadamard(m):
            found.append(m)
    return found


def unique_completion(masked: SignMatrix, limit: int = ENUMERATION_LIMIT) -> SignMatrix | None:
    """The single Hadamard completion if exactly one exists, else None."""
    completions = enumerate_completions(masked, limit)
    return completions[0] if len(completions) == 1 else None
