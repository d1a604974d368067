"""Per-iteration chain statistics and Gelman-Rubin convergence checks.

Traces record scalar summaries of a chain after every sweep. The shrink
factor compares within-chain and between-chain variances of one
statistic across two or more chains; values near 1 indicate the chains
have mixed into the same distribution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateTraceError, ValidationError

__all__ = ["ChainTrace", "shrink_factor", "rolling_shrink"]

STATISTICS = ("K", "eta_l2", "residual_l2", "alpha", "gamma")


@dataclass
class ChainTrace:
    """Scalar statistics recorded once per sweep."""

    K: list[int] = field(default_factory=list)
    eta_l2: list[float] = field(default_factory=list)
    residual_l2: list[float] = field(default_factory=list)
    alpha: list[float] = field(default_factory=list)
    gamma: list[float] = field(default_factory=list)

    def append(self, K, eta_l2, residual_l2, alpha, gamma) -> None:
        self.K.append(int(K))
        self.eta_l2.append(float(eta_l2))
        self.residual_l2.append(float(residual_l2))
        self.alpha.append(float(alpha))
        self.gamma.append(float(gamma))

    def __len__(self) -> int:
        return len(self.K)

    def series(self, statistic: str) -> np.ndarray:
        if statistic not in STATISTICS:
            raise ValidationError(
                f"unknown statistic {statistic!r}; expected one of {STATISTICS}"
            )
        return np.asarray(getattr(self, statistic), dtype=np.float64)

    def truncated(self, length: int) -> "ChainTrace":
        return ChainTrace(
            K=self.K[:length],
            eta_l2=self.eta_l2[:length],
            residual_l2=self.residual_l2[:length],
            alpha=self.alpha[:length],
            gamma=self.gamma[:length],
        )

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "K", "eta_l2", "residual_l2", "alpha", "gamma"])
            for i in range(len(self)):
                writer.writerow(
                    [
                        i,
                        self.K[i],
                        repr(self.eta_l2[i]),
                        repr(self.residual_l2[i]),
                        repr(self.alpha[i]),
                        repr(self.gamma[i]),
                    ]
                )

    @classmethod
    def from_csv(cls, path) -> "ChainTrace":
        trace = cls()
        with Path(path).open("r", newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            required = {"K", "eta_l2", "residual_l2", "alpha", "gamma"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise ValidationError(f"{path}: not a chain trace CSV")
            for row in reader:
                trace.append(
                    K=int(row["K"]),
                    eta_l2=float(row["eta_l2"]),
                    residual_l2=float(row["residual_l2"]),
                    alpha=float(row["alpha"]),
                    gamma=float(row["gamma"]),
                )
        return trace


def _stacked(traces, statistic, window):
    if len(traces) < 2:
        raise ValidationError("shrink factor needs at least two chains")
    series = [t.series(statistic) for t in traces]
    length = len(series[0])
    if any(len(s) != length for s in series):
        raise ValidationError("chains must have equal length; truncate first")
    lo, hi = (0, length) if window is None else window
    if not (0 <= lo < hi <= length):
        raise ValidationError(f"window {window!r} out of range for length {length}")
    if hi - lo < 10:
        raise ValidationError("window must span at least 10 iterations")
    return np.vstack([s[lo:hi] for s in series])


def shrink_factor(traces, statistic: str, window: tuple[int, int] | None = None) -> float:
    """Gelman-Rubin potential scale reduction factor for one statistic.

    The first half of the window is discarded as burn-in. With W the
    mean within-chain variance and B/N the variance of the chain means,
    returns sqrt(((N-1)/N * W + B/N) / W).
    """
    seg = _stacked(traces, statistic, window)
    n_kept = seg.shape[1] - seg.shape[1] // 2
    seg = seg[:, seg.shape[1] // 2 :]
    within = seg.var(axis=1, ddof=1).mean()
    if within == 0.0:
        raise DegenerateTraceError(
            f"statistic {statistic!r} has zero within-chain variance"
        )
    between_over_n = seg.mean(axis=1).var(ddof=1)
    return float(np.sqrt(((n_kept - 1) / n_kept * within + between_over_n) / within))


def rolling_shrink(traces, statistic: str, step: int) -> list[tuple[int, float]]:
    """Shrink factor on growing prefixes, evaluated every ``step`` iterations.

    Produces ceil(N / step) points; prefixes too short (or degenerate)
    yield NaN so the series keeps its expected length.
    """
    if step < 1:
        raise ValidationError("step must be >= 1")
    length = min(len(t) for t in traces)
    if length == 0:
        raise ValidationError("empty traces")
    aligned = [t.truncated(length) for t in traces]
    points = []
    end = step
    while True:
        end = min(end, length)
        try:
            rhat = shrink_factor(aligned, statistic, (0, end))
        except (ValidationError, DegenerateTraceError):
            rhat = float("nan")
        points.append((end, rhat))
        if end == length:
            break
        end += step
    return points
