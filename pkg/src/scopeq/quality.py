"""Windowed online quality: features, labels, the Q classifier, scoring.

A window is the half-open interval (end - window_len_ms, end]. Its feature
is the unweighted mean of the soft assignments of frames inside it. A
window is labeled positive when a polyp-visibility event starts within
horizon_ms after the window end, excluded when the window itself touches a
polyp-visibility or exclusion interval, negative otherwise.
"""

from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterModel, assign_stream
from .errors import (
    DegenerateTrainingError,
    InsufficientDataError,
    OrderingError,
    SamplingError,
    ShapeMismatchError,
)
from .optim import AdamConfig, adam_init, adam_step
from .records import ProcedureAnnotation

__all__ = [
    "WindowSample",
    "QualityModel",
    "QTrainConfig",
    "window_average",
    "label_window",
    "build_training_set",
    "train_q",
    "q_forward",
    "score_assigned",
    "score_online",
]

_LABELS = ("positive", "negative", "excluded")

WINDOW_LEN_MS = 10_000
HORIZON_MS = 2_000
MIN_FRAMES = 5


@dataclass(frozen=True)
class WindowSample:
    procedure_id: str
    window_end_ms: int
    r_bar: np.ndarray
    label: str

    def __post_init__(self):
        r = np.asarray(self.r_bar, dtype=float)
        if self.label not in _LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if abs(float(r.sum()) - 1.0) > 1e-9 or np.any(r < 0):
            raise ValueError("r_bar must lie on the probability simplex")
        object.__setattr__(self, "r_bar", r)


@dataclass(frozen=True)
class QualityModel:
    weights: np.ndarray
    bias: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or not np.isfinite(self.bias):
            raise ValueError("quality model needs a finite weight vector and bias")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))


@dataclass(frozen=True)
class QTrainConfig:
    epochs: int = 500
    batch_size: int = 64
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


def _window_slice(timestamps: np.ndarray, window_end_ms: int, window_len_ms: int):
    lo = np.searchsorted(timestamps, window_end_ms - window_len_ms, side="right")
    hi = np.searchsorted(timestamps, window_end_ms, side="right")
    return int(lo), int(hi)


def window_average(
    frames,
    window_end_ms: int,
    window_len_ms: int = WINDOW_LEN_MS,
    min_frames: int = MIN_FRAMES,
) -> np.ndarray:
    """Mean soft assignment over (end - len, end] of a time-sorted stream."""
    ts = np.asarray([t for t, _ in frames], dtype=np.int64)
    if np.any(np.diff(ts) < 0):
        raise OrderingError("frame timestamps must be non-decreasing")
    lo, hi = _window_slice(ts, window_end_ms, window_len_ms)
    if hi - lo < max(min_frames, 1):
        raise InsufficientDataError(
            f"window ending at {window_end_ms} holds {hi - lo} frames, need {max(min_frames, 1)}"
        )
    rows = np.asarray([r for _, r in frames[lo:hi]], dtype=float)
    return rows.mean(axis=0)


def _overlaps_window(intervals, w_start: int, w_end: int) -> bool:
    # Strict interior: an event starting exactly at the window end, or
    # ending exactly at the window start, leaves the window clean.
    return any(s < w_end and e > w_start for s, e in intervals)


def label_window(
    window_end_ms: int,
    annotation: ProcedureAnnotation,
    horizon_ms: int = HORIZON_MS,
    window_len_ms: int = WINDOW_LEN_MS,
) -> str:
    for s, _ in annotation.polyp_events:
        if window_end_ms < s <= window_end_ms + horizon_ms:
            return "positive"
    blocked = list(annotation.polyp_events) + list(annotation.exclusion_intervals)
    if _overlaps_window(blocked, window_end_ms - window_len_ms, window_end_ms):
        return "excluded"
    return "negative"


def _procedure_arrays(stream):
    ts = np.asarray([t for t, _ in stream], dtype=np.int64)
    rs = np.asarray([r for _, r in stream], dtype=float)
    if np.any(np.diff(ts) < 0):
        raise OrderingError("frame timestamps must be non-decreasing")
    return ts, rs


def _mean_over(rs: np.ndarray, lo: int, hi: int) -> np.ndarray:
    return rs[lo:hi].mean(axis=0)


def build_training_set(
    procedures: dict,
    annotations: dict,
    n_per_class: int,
    seed: int = 0,
    window_len_ms: int = WINDOW_LEN_MS,
    horizon_ms: int = HORIZON_MS,
    min_frames: int = MIN_FRAMES,
):
    """Balanced window samples: n_per_class positives and negatives.

    Positive windows end exactly at a polyp-visibility start. Negative
    window ends are drawn uniformly from frame timestamps whose window is
    clean: labeled negative, not an event start, and holding enough frames.
    Deterministic for a fixed seed.
    """
    positives = []
    negatives = []
    for pid in sorted(procedures):
        if pid not in annotations:
            continue
        ann = annotations[pid]
        ts, rs = _procedure_arrays(procedures[pid])
        if len(ts) == 0:
            continue
        blocked = list(ann.polyp_events) + list(ann.exclusion_intervals)

        seen_ends = set()
        for s, e in ann.polyp_events:
            if s in seen_ends:
                continue
            lo, hi = _window_slice(ts, s, window_len_ms)
            if hi - lo < min_frames:
                continue
            if _overlaps_window(blocked, s - window_len_ms, s):
                continue
            seen_ends.add(s)
            positives.append((pid, int(s), _mean_over(rs, lo, hi)))

        ends = np.unique(ts)
        lo_idx = np.searchsorted(ts, ends - window_len_ms, side="right")
        hi_idx = np.searchsorted(ts, ends, side="right")
        ok = (hi_idx - lo_idx) >= min_frames
        for s, e in ann.polyp_events:
            ok &= ~((ends < s) & (s <= ends + horizon_ms))  # would be positive
            ok &= ends != s
        for s, e in blocked:
            ok &= ~((s < ends) & (e > ends - window_len_ms))  # would be excluded
        for j in np.flatnonzero(ok):
            negatives.append((pid, int(ends[j]), (int(lo_idx[j]), int(hi_idx[j])), rs))

    if len(positives) < n_per_class or len(negatives) < n_per_class:
        raise SamplingError(
            f"need {n_per_class} per class, have {len(positives)} positive "
            f"and {len(negatives)} negative windows"
        )

    rng = np.random.default_rng([seed, 0])
    pos_take = rng.choice(len(positives), size=n_per_class, replace=False)
    neg_take = rng.choice(len(negatives), size=n_per_class, replace=False)
    samples = [
        WindowSample(pid, end, r_bar, "positive")
        for pid, end, r_bar in (positives[i] for i in sorted(pos_take))
    ]
    for i in sorted(neg_take):
        pid, end, (lo, hi), rs = negatives[i]
        samples.append(WindowSample(pid, end, _mean_over(rs, lo, hi), "negative"))
    return samples


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    # Keep the output strictly inside (0, 1) even where exp saturates.
    return np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def q_forward(model: QualityModel, r_bar) -> float:
    """sigmoid(w . r_bar + b), strictly inside (0, 1)."""
    r = np.asarray(r_bar, dtype=float)
    if r.shape != model.weights.shape:
        raise ShapeMismatchError(
            f"r_bar has length {r.shape}, model expects {model.weights.shape}"
        )
    return float(_sigmoid(np.dot(model.weights, r) + model.bias))


def _q_forward_batch(model: QualityModel, features: np.ndarray) -> np.ndarray:
    return _sigmoid(features @ model.weights + model.bias)


def train_q(samples, cfg: QTrainConfig):
    """Binary cross-entropy fit of the linear classifier with Adam.

    Returns (QualityModel, per-epoch mean loss). Starts from zero weights;
    runs shuffled minibatches, reshuffled each epoch from one seeded stream.
    """
    usable = [s for s in samples if s.label != "excluded"]
    if not usable:
        raise DegenerateTrainingError("no labeled samples")
    x = np.stack([s.r_bar for s in usable])
    y = np.asarray([1.0 if s.label == "positive" else 0.0 for s in usable])
    if len(np.unique(y)) < 2:
        raise DegenerateTrainingError("training needs both classes present")

    k = x.shape[1]
    state = adam_init([np.zeros(k), np.zeros(1)])
    rng = np.random.default_rng([cfg.seed, 0])
    trace = []
    n = len(y)
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            w, b = state.params
            z = xb @ w + b[0]
            # softplus(z) - y z is the stable negative log-likelihood
            total += float(np.sum(np.logaddexp(0.0, z) - yb * z))
            g = _sigmoid(z) - yb
            gw = xb.T @ g / len(idx)
            gb = np.asarray([g.mean()])
            state = adam_step(state, [gw, gb], cfg.adam)
        trace.append(total / n)
    w, b = state.params
    return QualityModel(weights=w, bias=float(b[0])), trace


def score_assigned(
    assigned,
    q_model: QualityModel,
    stride_ms: int = 1000,
    window_len_ms: int = WINDOW_LEN_MS,
    min_frames: int = MIN_FRAMES,
):
    """Sliding-window quality over a time-sorted (timestamp, r) stream.

    Window ends run from first_ts + window_len_ms to the last timestamp in
    stride_ms steps. Returns (scores, skipped): scores as (window_end_ms, q)
    pairs, skipped as the window ends that held too few frames.
    """
    if stride_ms < 1:
        raise ValueError("stride_ms must be positive")
    ts, rs = _procedure_arrays(assigned)
    if len(ts) == 0:
        return [], []
    scores = []
    skipped = []
    end = int(ts[0]) + window_len_ms
    while end <= int(ts[-1]):
        lo, hi = _window_slice(ts, end, window_len_ms)
        if hi - lo < max(min_frames, 1):
            skipped.append(end)
        else:
            scores.append((end, q_forward(q_model, _mean_over(rs, lo, hi))))
        end += stride_ms
    return scores, skipped


def score_online(
    frames,
    cluster_model: ClusterModel,
    q_model: QualityModel,
    stride_ms: int = 1000,
    window_len_ms: int = WINDOW_LEN_MS,
    min_frames: int = MIN_FRAMES,
):
    """Sliding-window quality over a time-sorted embedding stream.

    frames is a sequence of (timestamp_ms, embedding); soft assignment runs
    through the cluster model, then windows are scored as in score_assigned.
    """
    ts = [t for t, _ in frames]
    if len(ts) == 0:
        return [], []
    emb = np.asarray([e for _, e in frames], dtype=float)
    rs = assign_stream(emb, cluster_model)
    return score_assigned(
        list(zip(ts, rs)), q_model, stride_ms, window_len_ms, min_frames
    )
