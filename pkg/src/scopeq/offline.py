"""Per-procedure offline quality and cohort-level reports.

The offline score of a procedure is the sum of its online window scores
over windows ending inside the withdrawal interval; the duration-normalized
mean is reported alongside.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InsufficientDataError

__all__ = [
    "ProcedureScore",
    "offline_score",
    "quintile_report",
    "score_distribution_report",
    "DistributionReport",
]


@dataclass(frozen=True)
class ProcedureScore:
    procedure_id: str
    q_offline_sum: float
    q_offline_mean: float
    n_windows: int
    polyps_detected: int = 0

    def __post_init__(self):
        if self.n_windows < 1:
            raise InsufficientDataError("a procedure score needs at least one window")
        if self.q_offline_sum < 0 or not (0.0 <= self.q_offline_mean <= 1.0):
            raise DegenerateInputError("offline quality out of range")
        if abs(self.q_offline_sum - self.q_offline_mean * self.n_windows) > 1e-9 * max(
            1.0, self.q_offline_sum
        ):
            raise DegenerateInputError("sum, mean and window count disagree")
        if self.polyps_detected < 0:
            raise DegenerateInputError("polyps_detected must be >= 0")


def offline_score(
    window_scores,
    withdrawal,
    procedure_id: str = "",
    polyps_detected: int = 0,
) -> ProcedureScore:
    """Aggregate (window_end_ms, q) pairs whose end lies in the withdrawal.

    The withdrawal interval [start_ms, end_ms] is closed on both sides.
    """
    start_ms, end_ms = withdrawal
    qs = [float(q) for end, q in window_scores if start_ms <= end <= end_ms]
    if not qs:
        raise InsufficientDataError(
            f"no windows end inside withdrawal [{start_ms}, {end_ms}]"
        )
    total = float(np.sum(qs))
    return ProcedureScore(
        procedure_id=procedure_id,
        q_offline_sum=total,
        q_offline_mean=total / len(qs),
        n_windows=len(qs),
        polyps_detected=polyps_detected,
    )


def quintile_report(scores):
    """Five rows (range_lo, range_hi, mean_ppc, n) over ascending quintiles.

    Procedures are sorted by (q_offline_sum, procedure_id); any remainder
    after the even split goes to the lowest groups, one extra each.
    """
    scores = list(scores)
    if len(scores) < 5:
        raise InsufficientDataError(f"quintile report needs >= 5 procedures, got {len(scores)}")
    ordered = sorted(scores, key=lambda s: (s.q_offline_sum, s.procedure_id))
    base, extra = divmod(len(ordered), 5)
    rows = []
    at = 0
    for g in range(5):
        size = base + (1 if g < extra else 0)
        group = ordered[at : at + size]
        at += size
        rows.append(
            (
                group[0].q_offline_sum,
                group[-1].q_offline_sum,
                float(np.mean([s.polyps_detected for s in group])),
                size,
            )
        )
    return rows


@dataclass(frozen=True)
class DistributionReport:
    bin_edges: np.ndarray
    freq_no_polyp: np.ndarray | None  # None marks an absent group
    freq_polyp: np.ndarray | None


def score_distribution_report(scores, n_bins: int = 10) -> DistributionReport:
    """Normalized q_offline_sum histograms of polyp-free vs polyp procedures.

    Shared equal-width bins span all scores. An empty group yields None for
    its histogram rather than an error.
    """
    scores = list(scores)
    if not scores:
        raise InsufficientDataError("no procedure scores")
    if n_bins < 1:
        raise DegenerateInputError("n_bins must be positive")
    values = np.asarray([s.q_offline_sum for s in scores], dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, n_bins + 1)

    def freq(group):
        if not group:
            return None
        vals = np.asarray([s.q_offline_sum for s in group], dtype=float)
        idx = np.searchsorted(edges, vals, side="right") - 1
        idx[vals == edges[-1]] = n_bins - 1
        counts = np.bincount(idx, minlength=n_bins).astype(float)
        return counts / counts.sum()

    return DistributionReport(
        bin_edges=edges,
        freq_no_polyp=freq([s for s in scores if s.polyps_detected == 0]),
        freq_polyp=freq([s for s in scores if s.polyps_detected > 0]),
    )
