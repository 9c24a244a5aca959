"""Synthetic procedure generator with planted ground truth.

Frames are Gaussian draws around planted cluster centers placed at exact
pairwise distance cluster_separation (orthonormal directions scaled by
separation / sqrt(2)). Inspection alternates between informative and
non-informative segments via a two-state chain whose stationary informative
fraction is drawn per procedure, so cohorts spread over the quality axis.
Each planted polyp is detected with probability sigmoid(a * q + b), where
q is the informative occupancy of the 10 s before it; detected polyps
become visibility events in the annotation, all land in the truth list.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError
from .quality import _sigmoid
from .records import FrameRecord, FrameTensor, ProcedureAnnotation

__all__ = [
    "SimConfig",
    "PolypTruth",
    "SimProcedure",
    "generate_cohort",
    "truth_detection_curve",
]


@dataclass(frozen=True)
class SimConfig:
    n_clusters: int = 10
    embed_dim: int = 16
    cluster_separation: float = 10.0
    informative_cluster_ids: tuple = (0, 1, 2, 3, 4)
    frame_rate_hz: float = 5.0
    procedure_len_s: float = 240.0
    withdrawal_fraction: float = 0.5
    polyp_rate_per_procedure: float = 2.0
    detection_link: tuple = (10.0, -4.0)
    seed: int = 0
    noise_sigma: float = 1.0
    dwell_informative_s: float = 8.0
    informative_fraction_range: tuple = (0.2, 0.9)
    polyp_visibility_ms: int = 3000
    exclusion_rate_per_procedure: float = 0.0
    exclusion_len_ms: int = 2000
    emit_raw: bool = False
    raw_dim: int = 64

    def __post_init__(self):
        ids = tuple(sorted(int(c) for c in self.informative_cluster_ids))
        if self.n_clusters < 2:
            raise SchemaError("n_clusters must be >= 2")
        if self.embed_dim < self.n_clusters:
            raise SchemaError(
                "embed_dim must be >= n_clusters to place centers at one exact separation"
            )
        if not ids or len(ids) >= self.n_clusters:
            raise SchemaError("informative clusters must be a non-empty proper subset")
        if any(c < 0 or c >= self.n_clusters for c in ids):
            raise SchemaError("informative cluster id out of range")
        if self.frame_rate_hz <= 0 or self.procedure_len_s <= 0:
            raise SchemaError("frame rate and procedure length must be positive")
        if round(1000.0 / self.frame_rate_hz) < 1:
            raise SchemaError("frame rate above 1000 Hz is not representable in ms")
        if not (0.0 < self.withdrawal_fraction <= 1.0):
            raise SchemaError("withdrawal_fraction must be in (0, 1]")
        if self.polyp_rate_per_procedure < 0 or self.exclusion_rate_per_procedure < 0:
            raise SchemaError("event rates must be >= 0")
        if self.cluster_separation <= 0 or self.noise_sigma < 0:
            raise SchemaError("separation must be positive, noise sigma >= 0")
        lo, hi = self.informative_fraction_range
        if not (0.0 < lo <= hi < 1.0):
            raise SchemaError("informative_fraction_range must satisfy 0 < lo <= hi < 1")
        if self.dwell_informative_s <= 0:
            raise SchemaError("dwell_informative_s must be positive")
        if self.polyp_visibility_ms < 1 or self.exclusion_len_ms < 1:
            raise SchemaError("interval lengths must be positive")
        if self.emit_raw and self.raw_dim < self.n_clusters:
            raise SchemaError("raw_dim must be >= n_clusters in raw mode")
        object.__setattr__(self, "informative_cluster_ids", ids)

    @property
    def step_ms(self) -> int:
        return int(round(1000.0 / self.frame_rate_hz))


@dataclass(frozen=True)
class PolypTruth:
    exists_at_ms: int
    true_window_quality: float
    detected: bool


@dataclass(frozen=True)
class SimProcedure:
    frames: list
    annotation: ProcedureAnnotation
    truth: list
    cluster_labels: np.ndarray = field(default=None, repr=False)
    informative_mask: np.ndarray = field(default=None, repr=False)


def _planted_centers(rng: np.random.Generator, dim: int, k: int, separation: float):
    """k centers in dim-space, every pair exactly `separation` apart."""
    g = rng.normal(size=(dim, dim))
    q, _ = np.linalg.qr(g)
    return q[:, :k].T * (separation / np.sqrt(2.0))


def _occupancy(ts: np.ndarray, mask: np.ndarray, t: int, window_ms: int = 10_000) -> float:
    lo = np.searchsorted(ts, t - window_ms, side="right")
    hi = np.searchsorted(ts, t, side="right")
    if hi <= lo:
        return 0.0
    return float(mask[lo:hi].mean())


def _simulate_states(cfg: SimConfig, rng: np.random.Generator, n_frames: int):
    """Per-frame informative flag and per-frame cluster id."""
    pi = float(rng.uniform(*cfg.informative_fraction_range))
    rate = cfg.frame_rate_hz
    p_leave_inf = min(1.0, 1.0 / (cfg.dwell_informative_s * rate))
    dwell_non = cfg.dwell_informative_s * (1.0 - pi) / pi
    p_leave_non = min(1.0, 1.0 / (dwell_non * rate))

    informative = list(cfg.informative_cluster_ids)
    other = [c for c in range(cfg.n_clusters) if c not in cfg.informative_cluster_ids]
    state = bool(rng.random() < pi)
    u_state = rng.random(n_frames)
    u_cluster = rng.random(n_frames)

    mask = np.empty(n_frames, dtype=bool)
    labels = np.empty(n_frames, dtype=np.int64)
    pool = informative if state else other
    cluster = pool[int(u_cluster[0] * len(pool))]
    for j in range(n_frames):
        mask[j] = state
        labels[j] = cluster
        flip = u_state[j] < (p_leave_inf if state else p_leave_non)
        if flip:
            state = not state
            pool = informative if state else other
            cluster = pool[int(u_cluster[j] * len(pool))]
    return mask, labels


def _intervals_mask(ts: np.ndarray, intervals) -> np.ndarray:
    out = np.zeros(len(ts), dtype=bool)
    for s, e in intervals:
        out |= (ts >= s) & (ts < e)
    return out


def generate_cohort(cfg: SimConfig, n_procedures: int):
    """Deterministic list of SimProcedures for (cfg.seed, n_procedures)."""
    if n_procedures < 1:
        raise SchemaError("n_procedures must be positive")
    rng_centers = np.random.default_rng([cfg.seed, 0])
    centers = _planted_centers(rng_centers, cfg.embed_dim, cfg.n_clusters, cfg.cluster_separation)
    if cfg.emit_raw:
        raw_centers = _planted_centers(
            rng_centers, cfg.raw_dim, cfg.n_clusters, cfg.cluster_separation
        )

    n_frames = int(round(cfg.procedure_len_s * cfg.frame_rate_hz))
    ts = np.arange(n_frames, dtype=np.int64) * cfg.step_ms
    a, b = cfg.detection_link

    cohort = []
    for i in range(n_procedures):
        rng = np.random.default_rng([cfg.seed, 1, i])
        pid = f"sim-{i:04d}"
        mask, labels = _simulate_states(cfg, rng, n_frames)

        w_start = int(ts[int(np.floor(n_frames * (1.0 - cfg.withdrawal_fraction)))])
        w_end = int(ts[-1])

        n_polyps = int(rng.poisson(cfg.polyp_rate_per_procedure))
        span = w_end - w_start + 1
        n_polyps = min(n_polyps, span)
        times = np.sort(rng.choice(span, size=n_polyps, replace=False)) + w_start
        qualities = np.asarray([_occupancy(ts, mask, int(t)) for t in times])
        detected = rng.random(n_polyps) < _sigmoid(a * qualities + b)

        n_excl = int(rng.poisson(cfg.exclusion_rate_per_procedure))
        excl = []
        for _ in range(n_excl):
            s = int(rng.integers(0, max(1, w_end - cfg.exclusion_len_ms)))
            excl.append((s, s + cfg.exclusion_len_ms))
        excl.sort()

        events = [
            (int(t), int(t) + cfg.polyp_visibility_ms)
            for t, d in zip(times, detected)
            if d
        ]
        annotation = ProcedureAnnotation(
            procedure_id=pid,
            withdrawal_start_ms=w_start,
            withdrawal_end_ms=w_end,
            polyp_events=events,
            exclusion_intervals=excl,
        )
        truth = [
            PolypTruth(exists_at_ms=int(t), true_window_quality=float(q), detected=bool(d))
            for t, q, d in zip(times, qualities, detected)
        ]

        excluded = _intervals_mask(ts, events + excl)
        if cfg.emit_raw:
            payload = raw_centers[labels] + rng.normal(0.0, cfg.noise_sigma, (n_frames, cfg.raw_dim))
            frames = [
                FrameRecord(
                    procedure_id=pid,
                    frame_idx=j,
                    timestamp_ms=int(ts[j]),
                    frame=FrameTensor(payload[j]),
                    excluded=bool(excluded[j]),
                )
                for j in range(n_frames)
            ]
        else:
            payload = centers[labels] + rng.normal(0.0, cfg.noise_sigma, (n_frames, cfg.embed_dim))
            frames = [
                FrameRecord(
                    procedure_id=pid,
                    frame_idx=j,
                    timestamp_ms=int(ts[j]),
                    embedding=payload[j],
                    excluded=bool(excluded[j]),
                )
                for j in range(n_frames)
            ]
        cohort.append(
            SimProcedure(
                frames=frames,
                annotation=annotation,
                truth=truth,
                cluster_labels=labels,
                informative_mask=mask,
            )
        )
    return cohort


def truth_detection_curve(cfg: SimConfig):
    """The planted detection probability as a function of true quality."""
    a, b = cfg.detection_link

    def curve(q):
        return _sigmoid(a * np.asarray(q, dtype=float) + b)

    return curve
