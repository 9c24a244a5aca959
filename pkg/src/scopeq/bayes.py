"""Histogram-ratio estimate of the chance a present polyp gets detected.

Per bin over a shared 10-bin grid: likelihood = pds * P(Q|D) / P(Q),
clamped to [0, 1]. pds is the detected-to-existing ratio P(D)/P(E). Bins
where P(Q) has no mass carry no estimate and stay None.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, RangeError

__all__ = ["BayesTable", "histogram", "fit_bayes", "p_detect_given_exists"]


def _bin_index(edges: np.ndarray, value: float) -> int:
    """Bins are [e_i, e_i+1); the last bin also takes its right edge."""
    n_bins = len(edges) - 1
    if value < edges[0] or value > edges[-1]:
        raise RangeError(f"value {value!r} outside bin range [{edges[0]}, {edges[-1]}]")
    idx = int(np.searchsorted(edges, value, side="right")) - 1
    return n_bins - 1 if idx == n_bins else idx


def histogram(values, bin_edges) -> np.ndarray:
    """Normalized bin frequencies; every value must land in some bin."""
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise DegenerateInputError("bin edges must be strictly increasing")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DegenerateInputError("histogram needs at least one value")
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    for v in values:
        counts[_bin_index(edges, float(v))] += 1
    return counts / counts.sum()


@dataclass(frozen=True)
class BayesTable:
    bin_edges: np.ndarray  # 11 ascending reals
    p_q: np.ndarray  # P(Q) per bin
    p_q_given_d: np.ndarray  # P(Q|D) per bin
    pds: float  # P(D)/P(E)
    p_d_given_e_q: tuple  # per-bin likelihood, None where P(Q) = 0

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        pq = np.asarray(self.p_q, dtype=float)
        pqd = np.asarray(self.p_q_given_d, dtype=float)
        if np.any(np.diff(edges) <= 0):
            raise DegenerateInputError("bin edges must be strictly increasing")
        if len(pq) != len(edges) - 1 or len(pqd) != len(edges) - 1:
            raise DegenerateInputError("histogram length must match bin count")
        for h in (pq, pqd):
            if abs(float(h.sum()) - 1.0) > 1e-9 or np.any(h < 0):
                raise DegenerateInputError("histograms must be normalized")
        if not (0.0 < self.pds <= 1.0):
            raise RangeError(f"pds must be in (0, 1], got {self.pds}")
        vals = tuple(self.p_d_given_e_q)
        for v in vals:
            if v is not None and not (0.0 <= v <= 1.0):
                raise RangeError(f"likelihood {v} outside [0, 1]")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "p_q", pq)
        object.__setattr__(self, "p_q_given_d", pqd)
        object.__setattr__(self, "p_d_given_e_q", vals)

    @property
    def bin_centers(self) -> np.ndarray:
        return (self.bin_edges[:-1] + self.bin_edges[1:]) / 2.0


def fit_bayes(
    q_random,
    q_pre_polyp,
    pds: float = 0.775,
    n_bins: int = 10,
    smoothing: bool = False,
) -> BayesTable:
    """Fit the likelihood table from the two Q samples.

    Bin edges are equal-width over the pooled min/max of both samples.
    smoothing=True adds one pseudo-count to every bin of both histograms
    instead of leaving zero-mass bins undefined.
    """
    q_random = np.asarray(q_random, dtype=float)
    q_pre_polyp = np.asarray(q_pre_polyp, dtype=float)
    if q_random.size == 0 or q_pre_polyp.size == 0:
        raise DegenerateInputError("both Q samples must be non-empty")
    if not (0.0 < pds <= 1.0):
        raise RangeError(f"pds must be in (0, 1], got {pds}")
    if n_bins < 1:
        raise DegenerateInputError("n_bins must be positive")

    lo = min(q_random.min(), q_pre_polyp.min())
    hi = max(q_random.max(), q_pre_polyp.max())
    if lo == hi:
        # All mass at one point; widen so the grid stays strictly increasing.
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, n_bins + 1)

    def freq(values):
        counts = np.zeros(n_bins, dtype=float)
        for v in values:
            counts[_bin_index(edges, float(v))] += 1
        if smoothing:
            counts += 1.0
        return counts / counts.sum()

    p_q = freq(q_random)
    p_q_given_d = freq(q_pre_polyp)
    likelihood = []
    for k in range(n_bins):
        if p_q[k] == 0.0:
            likelihood.append(None)
        else:
            # Ratio first: identical histograms then give exactly pds per bin.
            likelihood.append(float(min(1.0, max(0.0, pds * (p_q_given_d[k] / p_q[k])))))
    return BayesTable(
        bin_edges=edges,
        p_q=p_q,
        p_q_given_d=p_q_given_d,
        pds=pds,
        p_d_given_e_q=tuple(likelihood),
    )


def p_detect_given_exists(table: BayesTable, q: float):
    """Bin lookup of q; returns the stored likelihood or None."""
    return table.p_d_given_e_q[_bin_index(table.bin_edges, float(q))]
