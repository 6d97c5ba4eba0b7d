"""Ground-truth overlap measures: Dice similarity coefficient and Jaccard
index over exact confusion counts.

Convention: when prediction and truth are both empty (tp=fp=fn=0) both
measures are 1.0, i.e. perfect agreement on nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rasters import BinaryMask


@dataclass(frozen=True)
class OverlapCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def overlap(pred: BinaryMask, truth: BinaryMask) -> OverlapCounts:
    """Exact pixel confusion counts; masks must share dimensions."""
    if pred.bits.shape != truth.bits.shape:
        raise ValueError(
            f"mask dimensions differ: {pred.width}x{pred.height} vs {truth.width}x{truth.height}"
        )
    p, t = pred.bits, truth.bits
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = p.size - tp - fp - fn
    return OverlapCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def dsc(counts: OverlapCounts) -> float:
    """Dice similarity coefficient 2tp / (2tp + fp + fn)."""
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        return 1.0
    return 2.0 * counts.tp / denom


def ji(counts: OverlapCounts) -> float:
    """Jaccard index tp / (tp + fp + fn)."""
    denom = counts.tp + counts.fp + counts.fn
    if denom == 0:
        return 1.0
    return counts.tp / denom


@dataclass(frozen=True)
class MetricsReport:
    dsc: float
    ji: float
    counts: OverlapCounts

    def to_dict(self) -> dict:
        return {
            "dsc": self.dsc,
            "ji": self.ji,
            "counts": {"tp": self.counts.tp, "fp": self.counts.fp, "fn": self.counts.fn, "tn": self.counts.tn},
        }

    def to_csv_line(self) -> str:
        c = self.counts
        return f"{self.dsc},{self.ji},{c.tp},{c.fp},{c.fn},{c.tn}"


def compare(pred: BinaryMask, truth: BinaryMask) -> MetricsReport:
    counts = overlap(pred, truth)
    return MetricsReport(dsc=dsc(counts), ji=ji(counts), counts=counts)
