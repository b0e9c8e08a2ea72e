"""Algebraic completion of zeroed Hadamard entries via the inverse-discrepancy signal.

For a complete Hadamard matrix X of order n, X^T - n*X^{-1} vanishes; deleting
entries makes the discrepancy light up, to first order, at the transposed
positions of the deletions with magnitude ~1, against background noise of
magnitude ~k/n. Thresholding the discrepancy and applying the surviving signs
at the (transposed) zero positions recovers the erased values; iterating
handles entries whose signal only clears the threshold once earlier fills have
reduced the noise.

The correction is applied transposed: X - sign(t_s(X^T - n X^{-1}))^T. The
untransposed variant (correction applied where the signal sits, not where the
deletion sits) is available for comparison via ``transpose_correction=False``
but fails single-deletion recovery whenever the mask is asymmetric.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .autodiff import SingularMatrixError, invert
from .matrices import SignMatrix, is_hadamard

DEFAULT_THRESHOLD = 0.5


class KlineStatus(enum.Enum):
    SUCCESS = "success"
    STALLED = "stalled"
    SINGULAR = "singular"
    INCONSISTENT = "inconsistent"


@dataclass(frozen=True)
class KlineConfig:
    threshold: float = DEFAULT_THRESHOLD
    max_iters: int | None = None  # defaults to n*n at run time
    transpose_correction: bool = True

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class KlineOutcome:
    status: KlineStatus
    matrix: SignMatrix
    iterations: int
    fills: list[tuple[tuple[int, int], int]] = field(default_factory=list)
    off_mask_corrections: int = 0  # thresholded signal at non-zero positions (diagnostic)


def kline_step(
    x: SignMatrix,
    threshold: float = DEFAULT_THRESHOLD,
    transpose_correction: bool = True,
) -> tuple[SignMatrix, list[tuple[tuple[int, int], int]], int]:
    """One thresholded correction pass.

    Returns (candidate, fills made this pass, off-mask correction count).
    Raises SingularMatrixError when X is not invertible as a real matrix.
    """
    n = x.order
    xr = x.entries.astype(np.float64)
    discrepancy = xr.T - n * invert(xr)
    signal = np.where(np.abs(discrepancy) < threshold, 0.0, np.sign(discrepancy))
    correction = signal.T if transpose_correction else signal
    zero_mask = x.entries == 0
    off_mask = int(np.count_nonzero(correction[~zero_mask]))
    filled = x.entries.astype(np.int64)
    fills = []
    for i, j in np.argwhere(zero_mask & (correction != 0)):
        value = -int(correction[i, j])
        filled[i, j] = value
        fills.append(((int(i), int(j)), value))
    return SignMatrix(filled), fills, off_mask


def kline_reconstruct(x: SignMatrix, cfg: KlineConfig = KlineConfig()) -> KlineOutcome:
    """Iterate kline_step until no zeros remain, progress stops, or max_iters."""
    max_iters = cfg.max_iters if cfg.max_iters is not None else x.order * x.order
    current = x
    all_fills: list[tuple[tuple[int, int], int]] = []
    off_mask_total = 0
    iterations = 0
    while current.zero_count() > 0 and iterations < max_iters:
        try:
            nxt, fills, off_mask = kline_step(
                current, cfg.threshold, cfg.transpose_correction
            )
        except SingularMatrixError:
            return KlineOutcome(
                KlineStatus.SINGULAR, current, iterations, all_fills, off_mask_total
            )
        iterations += 1
        off_mask_total += off_mask
        if not fills:
            return KlineOutcome(
                KlineStatus.STALLED, current, iterations, all_fills, off_mask_total
            )
        all_fills.extend(fills)
        current = nxt
    if current.zero_count() > 0:
        return KlineOutcome(KlineStatus.STALLED, current, iterations, all_fills, off_mask_total)
    status = KlineStatus.SUCCESS if is_hadamard(current) else KlineStatus.INCONSISTENT
    return KlineOutcome(status, current, iterations, all_fills, off_mask_total)
