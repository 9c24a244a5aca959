"""Command-line surface: every pipeline stage as a subcommand.

Exit codes: 0 success, 1 usage problem, 2 data or processing error. All
stages re-run from their input files alone, and a fixed seed makes every
output byte-identical across runs. SCOPEQ_SEED overrides the default seed;
--config takes a JSON file whose keys mirror the long flag names.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import storage
from .augment import AugmentConfig
from .bayes import fit_bayes
from .clustering import ClusterModel, assign_stream, kmeans_fit
from .contrastive import ContrastiveConfig
from .encoder import embed_batch, encoder_init, train_encoder
from .errors import InsufficientDataError, ScopeqError
from .offline import offline_score, quintile_report, score_distribution_report
from .optim import AdamConfig
from .quality import (
    QTrainConfig,
    build_training_set,
    q_forward,
    score_assigned,
    score_online,
    train_q,
    window_average,
)
from .records import FrameRecord
from .simulate import SimConfig, generate_cohort

__all__ = ["main", "cli_dispatch"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _default_seed() -> int:
    return int(os.environ.get("SCOPEQ_SEED", "0"))


def _add_common(parser: _Parser):
    parser.add_argument("--seed", type=int, default=_default_seed())
    parser.add_argument("--config", help="JSON file of flag defaults (keys = flag names)")


def _apply_config(parser: _Parser, argv):
    """Use --config values as defaults; explicit flags still win."""
    probe = _Parser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    with open(known.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise _UsageError(f"config {known.config} must hold a JSON object")
    defaults = {key.lstrip("-").replace("-", "_"): value for key, value in raw.items()}
    valid = {a.dest for a in parser._actions}
    unknown = set(defaults) - valid
    if unknown:
        raise _UsageError(f"config {known.config}: unknown option(s) {sorted(unknown)}")
    parser.set_defaults(**defaults)


def _frame_input(rec: FrameRecord) -> np.ndarray:
    return rec.embedding if rec.embedding is not None else rec.frame.flat


def _embeddings_only(frames_by_pid: dict, path: str, drop_excluded: bool):
    pids, rows = [], []
    for pid, recs in frames_by_pid.items():
        for rec in recs:
            if rec.embedding is None:
                raise InsufficientDataError(
                    f"{path}: holds raw frames, not embeddings; run embed first"
                )
            if drop_excluded and rec.excluded:
                continue
            pids.append(pid)
            rows.append(rec)
    return pids, rows


# --- subcommands -------------------------------------------------------------


def _cmd_simulate(argv) -> int:
    p = _Parser(prog="scopeq simulate")
    p.add_argument("--out-frames", required=True)
    p.add_argument("--out-annotations", required=True)
    p.add_argument("--out-truth")
    p.add_argument("--n-procedures", type=int, default=200)
    p.add_argument("--n-clusters", type=int, default=10)
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--informative-ids", default="0,1,2,3,4")
    p.add_argument("--frame-rate", type=float, default=5.0)
    p.add_argument("--procedure-len-s", type=float, default=240.0)
    p.add_argument("--withdrawal-fraction", type=float, default=0.5)
    p.add_argument("--polyp-rate", type=float, default=2.0)
    p.add_argument("--link-a", type=float, default=10.0)
    p.add_argument("--link-b", type=float, default=-4.0)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--dwell-informative-s", type=float, default=8.0)
    p.add_argument("--informative-fraction-lo", type=float, default=0.2)
    p.add_argument("--informative-fraction-hi", type=float, default=0.9)
    p.add_argument("--polyp-visibility-ms", type=int, default=3000)
    p.add_argument("--exclusion-rate", type=float, default=0.0)
    p.add_argument("--raw", action="store_true", help="emit raw frame vectors")
    p.add_argument("--raw-dim", type=int, default=64)
    _add_common(p)
    _apply_config(p, argv)
    args = p.parse_args(argv)

    cfg = SimConfig(
        n_clusters=args.n_clusters,
        embed_dim=args.embed_dim,
        cluster_separation=args.separation,
        informative_cluster_ids=tuple(int(s) for s in args.informative_ids.split(",")),
        frame_rate_hz=args.frame_rate,
        procedure_len_s=args.procedure_len_s,
        withdrawal_fraction=args.withdrawal_fraction,
        polyp_rate_per_procedure=args.polyp_rate,
        detection_link=(args.link_a, args.link_b),
        seed=args.seed,
        noise_sigma=args.noise_sigma,
        dwell_informative_s=args.dwell_informative_s,
        informative_fraction_range=(args.informative_fraction_lo, args.informative_fraction_hi),
        polyp_visibility_ms=args.polyp_visibility_ms,
        exclusion_rate_per_procedure=args.exclusion_rate,
        emit_raw=args.raw,
        raw_dim=args.raw_dim,
    )
    cohort = generate_cohort(cfg, args.n_procedures)
    storage.save_frames(args.out_frames, (rec for proc in cohort for rec in proc.frames))
    storage.save_annotations(args.out_annotations, (proc.annotation for proc in cohort))
    if args.out_truth:
        storage.save_truth(
            args.out_truth, {proc.annotation.procedure_id: proc.truth for proc in cohort}
        )
    n_frames = sum(len(proc.frames) for proc in cohort)
    print(f"simulated {len(cohort)} procedures, {n_frames} frames")
    return 0


def _cmd_train_encoder(argv) -> int:
    p = _Parser(prog="scopeq train-encoder")
    p.add_argument("--frames", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-trace")
    p.add_argument("--hidden-dims", default="32")
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--proj-hidden", type=int, default=16)
    p.add_argument("--proj-dim", type=int, default=16)
    p.add_argument("--activation", default="tanh", choices=["tanh", "relu", "identity"])
    p.add_argument("--temperature", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--aug-noise-sigma", type=float, default=0.05)
    p.add_argument("--aug-jitter-lo", type=float, default=0.9)
    p.add_argument("--aug-jitter-hi", type=float, default=1.1)
    p.add_argument("--aug-cutout", type=float, default=0.1)
    p.add_argument("--aug-cutout-fill-sigma", type=float, default=0.05)
    p.add_argument("--aug-geometric", action="store_true")
    _add_common(p)
    _apply_config(p, argv)
    args = p.parse_args(argv)

    frames_by_pid = storage.load_frames(args.frames)
    inputs = [
        _frame_input(rec)
        for recs in frames_by_pid.values()
        for rec in recs
        if not rec.excluded
    ]
    if not inputs:
        raise InsufficientDataError(f"{args.frames}: no trainable frames")
    cfg = ContrastiveConfig(
        temperature=args.temperature,
        batch_size=args.batch_size,
        epochs=args.epochs,
        adam=AdamConfig(learning_rate=args.lr),
        augmentation=AugmentConfig(
            gaussian_noise_sigma=args.aug_noise_sigma,
            scale_jitter_range=(args.aug_jitter_lo, args.aug_jitter_hi),
            cutout_fraction=args.aug_cutout,
            cutout_fill_sigma=args.aug_cutout_fill_sigma,
            geometric_ops_enabled=args.aug_geometric,
        ),
        seed=args.seed,
    )
    hidden = tuple(int(s) for s in args.hidden_dims.split(",") if s)
    init = encoder_init(
        input_dim=len(inputs[0]),
        hidden_dims=hidden,
        embed_dim=args.embed_dim,
        proj_hidden_dim=args.proj_hidden,
        proj_dim=args.proj_dim,
        activation=args.activation,
        seed=args.seed,
    )
    params, trace = train_encoder(inputs, cfg, init)
    storage.save_encoder_params(args.out_model, params)
    if args.out_trace:
        with open(args.out_trace, "w", encoding="utf-8") as fh:
            json.dump({"epoch_loss": [float(v) for v in trace]}, fh, indent=2)
            fh.write("\n")
    print(f"trained encoder on {len(inputs)} frames; final loss {trace[-1]!r}")
    return 0


def _cmd_embed(argv) -> int:
    p = _Parser(prog="scopeq embed")
    p.add_argument("--frames", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv-out", help="also write embeddings as CSV for external projection")
    _add_common(p)
    _apply_config(p, argv)
    args = p.parse_args(argv)

    params = storage.load_encoder_params(args.model)
    frames_by_pid = storage.load_frames(args.frames)
    out_records = []
    for pid, recs in frames_by_pid.items():
        emb = embed_batch(params, [_frame_input(r) for r in recs])
        for rec, row in zip(recs, emb):
            out_records.append(
                FrameRecord(
                    procedure_id=pid,
                    frame_idx=rec.frame_idx,
                    timestamp_ms=rec.timestamp_ms,
                    embedding=row,
                    excluded=rec.excluded,
                )
            )
    storage.save_frames(args.out, out_records)
    if args.csv_out:
        with open(args.csv_out, "w", encoding="utf-8") as fh:
            dim = params.embed_dim
            header = ["procedure_id", "frame_idx", "timestamp_ms"] + [f"e{i}" for i in range(dim)]
            fh.write(",".join(header) + "\n")
            for rec in out_records:
                cells = [rec.procedure_id, str(rec.frame_idx), str(rec.timestamp_ms)]
                cells += [repr(float(v)) for v in rec.embedding]
                fh.write(",".join(cells) + "\n")
    print(f"embedded {len(out_records)} frames")
    return 0


def _cmd_fit_clusters(argv) -> int:
    p = _Parser(prog="scopeq fit-clusters")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=16.0)
    p.add_argument("--epsilon", type=float, default=1e-12)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    _add_common(p)
    _apply_config(p, argv)
    args = p.parse_args(argv)

    frames_by_pid = storage.load_frames(args.embeddings)
    _, rows = _embeddings_only(frames_by_pid, args.embeddings, drop_excluded=True)
    if not rows:
        raise InsufficientDataError(f"{args.embeddings}: no embeddings to cluster")
    x = np.stack([r.embedding for r in rows])
    model, trace = kmeans_fit(
        x, k=args.k, seed=args.seed, max_iters=args.max_iters, tol=args.tol,
        alpha=args.alpha, epsilon=args.epsilon,
    )
    storage.save_cluster_model(args.out_model, model)
    print(f"fit {args.k} clusters on {len(x)} embeddings; inertia {trace[-1]!r}")
    return 0


def _cmd_assign(argv) -> int:
    p = _Parser(prog="scopeq assign")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    _apply_config(p, argv)
    args = p.parse_args(argv)

    model = storage.load_cluster_model(args.model)
    frames_by_pid = storage.load_frames(args.embeddings)
    assigned = {}
    total = 0
    for pid, recs in frames_by_pid.items():
        for rec in recs:
            if rec.embedding is None:
                raise InsufficientDataError(
                    f"{args.embeddings}: holds raw frames, not embeddings; run embed first"
                )
        rs = assign_stream(np.stack([r.embedding for r in recs]), model)
        assigned[pid] = [
            storage.AssignedFrame(
                procedure_id=pid,
                frame_idx=rec.frame_idx,
                timestamp_ms=rec.timestamp_ms,
                r=row,
                excluded=rec.excluded,
            )
            for rec, row in zip(recs, rs)
        ]
        total += len(recs)
    storage.save_assignments(args.out, assigned)
    print(f"assigned {total} frames to {model.k} clusters")
    return 0


def _pairs(assigned_frames):
    return [(f.timestamp_ms, f.r) for f in assigned_frames]


def _cmd_train_q(argv) -> int:
    p = _Parser(prog="scopeq train-q")
    p.add_argument("--assignments", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-trace")
    p.add_argument("--n-per-class", type=int, default=500)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--window-ms", type=int, default=10000)
    p.add_argument("--horizon-ms", type=int, default=2000)
    p.add_argument("--min-frames", type=int, default=5)
    _add_common(p)
    _apply_config(p, argv)
    args = p.parse_args(argv)

    assigned = storage.load_assignments(args.assignments)
    annotations = storage.load_annotations(args.annotations)
    procedures = {pid: _pairs(frames) for pid, frames in assigned.items()}
    samples = build_training_set(
        procedures,
        annotations,
        n_per_class=args.n_per_class,
        seed=args.seed,
        window_len_ms=args.window_ms,
        horizon_ms=args.horizon_ms,
        min_frames=args.min_frames,
    )
    cfg = QTrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        adam=AdamConfig(learning_rate=args.lr),
        seed=args.seed,
    )
    model, trace = train_q(samples, cfg)
    storage.save_quality_model(args.out_model, model)
    if args.out_trace:
        with open(args.out_trace, "w", encoding="utf-8") as fh:
            json.dump({"epoch_loss": [float(v) for v in trace]}, fh, indent=2)
            fh.write("\n")
    print(f"trained Q on {len(samples)} windows; final loss {trace[-1]!r}")
    return 0


def _cmd_fit_bayes(argv) -> int:
    p = _Parser(prog="scopeq fit-bayes")
    p.add_argument("--assignments", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--q-model", required=True)
    p.add_argument("--out-table", required=True)
    p.add_argument("--n-random", type=int, default=2000)
    p.add_argument("--pds", type=float, default=0.775)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--smoothing", action="store_true")
    p.add_argument("--window-ms", type=int, default=10000)
    p.add_argument("--min-frames", type=int, default=5)
    _add_common(p)
    _apply_config(p, argv)
    args = p.parse_args(argv)

    assigned = storage.load_assignments(args.assignments)
    annotations = storage.load_annotations(args.annotations)
    q_model = storage.load_quality_model(args.q_model)

    q_pre_polyp = []
    candidates = []
    for pid in sorted(assigned):
        pairs = _pairs(assigned[pid])
        ts = np.asarray([t for t, _ in pairs], dtype=np.int64)
        lo = np.searchsorted(ts, ts - args.window_ms, side="right")
        hi = np.searchsorted(ts, ts, side="right")
        for j in np.flatnonzero((hi - lo) >= args.min_frames):
            candidates.append((pid, int(ts[j])))
        if pid not in annotations:
            continue
        for s, _ in annotations[pid].polyp_events:
            try:
                r_bar = window_average(pairs, s, args.window_ms, args.min_frames)
            except InsufficientDataError:
                continue
            q_pre_polyp.append(q_forward(q_model, r_bar))

    if not candidates:
        raise InsufficientDataError("no candidate windows for the Q histogram")
    rng = np.random.default_rng([args.seed, 0])
    take = rng.choice(len(candidates), size=min(args.n_random, len(candidates)), replace=False)
    q_random = []
    for i in sorted(take):
        pid, end = candidates[i]
        r_bar = window_average(_pairs(assigned[pid]), end, args.window_ms, args.min_frames)
        q_random.append(q_forward(q_model, r_bar))

    table = fit_bayes(
        q_random, q_pre_polyp, pds=args.pds, n_bins=args.bins, smoothing=args.smoothing
    )
    storage.save_bayes_table(args.out_table, table)
    print(
        f"fit likelihood table from {len(q_random)} random and "
        f"{len(q_pre_polyp)} pre-polyp windows"
    )
    return 0


def _cmd_score_online(argv) -> int:
    p = _Parser(prog="scopeq score-online")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--cluster-model", required=True)
    p.add_argument("--q-model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stride-ms", type=int, default=1000)
    p.add_argument("--window-ms", type=int, default=10000)
    p.add_argument("--min-frames", type=int, default=5)
    _add_common(p)
    _apply_config(p, argv)
    args = p.parse_args(argv)

    cluster_model = storage.load_cluster_model(args.cluster_model)
    q_model = storage.load_quality_model(args.q_model)
    frames_by_pid = storage.load_frames(args.embeddings)
    scores = {}
    n_skipped = 0
    for pid, recs in frames_by_pid.items():
        for rec in recs:
            if rec.embedding is None:
                raise InsufficientDataError(
                    f"{args.embeddings}: holds raw frames, not embeddings; run embed first"
                )
        stream = [(rec.timestamp_ms, rec.embedding) for rec in recs]
        got, skipped = score_online(
            stream, cluster_model, q_model,
            stride_ms=args.stride_ms, window_len_ms=args.window_ms,
            min_frames=args.min_frames,
        )
        scores[pid] = got
        n_skipped += len(skipped)
    storage.save_window_scores(args.out, scores)
    total = sum(len(v) for v in scores.values())
    print(f"scored {total} windows ({n_skipped} skipped)")
    return 0


def _cmd_score_offline(argv) -> int:
    p = _Parser(prog="scopeq score-offline")
    p.add_argument("--assignments", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--q-model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stride-ms", type=int, default=1000)
    p.add_argument("--window-ms", type=int, default=10000)
    p.add_argument("--min-frames", type=int, default=5)
    _add_common(p)
    _apply_config(p, argv)
    args = p.parse_args(argv)

    assigned = storage.load_assignments(args.assignments)
    annotations = storage.load_annotations(args.annotations)
    q_model = storage.load_quality_model(args.q_model)
    scores = []
    for pid in sorted(assigned):
        if pid not in annotations:
            print(f"warning: {pid} has no annotation, skipped", file=sys.stderr)
            continue
        ann = annotations[pid]
        window_scores, _ = score_assigned(
            _pairs(assigned[pid]), q_model,
            stride_ms=args.stride_ms, window_len_ms=args.window_ms,
            min_frames=args.min_frames,
        )
        try:
            scores.append(
                offline_score(
                    window_scores,
                    (ann.withdrawal_start_ms, ann.withdrawal_end_ms),
                    procedure_id=pid,
                    polyps_detected=len(ann.polyp_events),
                )
            )
        except InsufficientDataError as exc:
            print(f"warning: {pid}: {exc}", file=sys.stderr)
    if not scores:
        raise InsufficientDataError("no procedure produced an offline score")
    storage.save_procedure_scores(args.out, scores)
    print(f"scored {len(scores)} procedures")
    return 0


def _cmd_report(argv) -> int:
    p = _Parser(prog="scopeq report")
    p.add_argument("--scores", required=True)
    p.add_argument("--out-quintiles", required=True)
    p.add_argument("--out-distribution", required=True)
    p.add_argument("--bayes-table")
    p.add_argument("--out-curve")
    p.add_argument("--bins", type=int, default=10)
    _add_common(p)
    _apply_config(p, argv)
    args = p.parse_args(argv)

    scores = storage.load_procedure_scores(args.scores)
    storage.save_quintile_report(args.out_quintiles, quintile_report(scores))
    storage.save_distribution_report(
        args.out_distribution, score_distribution_report(scores, n_bins=args.bins)
    )
    if args.bayes_table:
        if not args.out_curve:
            raise _UsageError("scopeq report: --bayes-table needs --out-curve")
        storage.save_bayes_curve(args.out_curve, storage.load_bayes_table(args.bayes_table))
    print(f"reported on {len(scores)} procedures")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train-encoder": _cmd_train_encoder,
    "embed": _cmd_embed,
    "fit-clusters": _cmd_fit_clusters,
    "assign": _cmd_assign,
    "train-q": _cmd_train_q,
    "fit-bayes": _cmd_fit_bayes,
    "score-online": _cmd_score_online,
    "score-offline": _cmd_score_offline,
    "report": _cmd_report,
}

_USAGE = "usage: scopeq <command> [options]\ncommands: " + ", ".join(sorted(_COMMANDS))


def cli_dispatch(argv) -> int:
    if not argv or argv[0] in ("-h", "--help"):
        print(_USAGE, file=sys.stderr)
        return 1
    command = argv[0]
    if command not in _COMMANDS:
        print(f"unknown command {command!r}\n{_USAGE}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[command](argv[1:])
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help goes through here
        return int(exc.code or 0)
    except ScopeqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))
