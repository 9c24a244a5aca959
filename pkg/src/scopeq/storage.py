"""File formats: JSONL streams, JSON models, CSV reports.

Floats are serialized with their shortest round-trip decimal repr, so a
save/load cycle reproduces every value exactly and identical data always
produces identical bytes.
"""

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .bayes import BayesTable
from .clustering import ClusterModel
from .encoder import DenseLayer, EncoderParams
from .errors import ParseError, SchemaError
from .offline import DistributionReport, ProcedureScore
from .quality import QualityModel
from .records import FrameRecord, FrameTensor, ProcedureAnnotation
from .simulate import PolypTruth

__all__ = [
    "AssignedFrame",
    "load_frames",
    "save_frames",
    "load_annotations",
    "save_annotations",
    "load_truth",
    "save_truth",
    "load_assignments",
    "save_assignments",
    "load_window_scores",
    "save_window_scores",
    "load_procedure_scores",
    "save_procedure_scores",
    "save_quintile_report",
    "save_distribution_report",
    "save_bayes_curve",
    "save_encoder_params",
    "load_encoder_params",
    "save_cluster_model",
    "load_cluster_model",
    "save_quality_model",
    "load_quality_model",
    "save_bayes_table",
    "load_bayes_table",
]


def _floats(arr) -> list:
    return [float(v) for v in np.asarray(arr, dtype=float).reshape(-1)]


def _matrix(arr) -> list:
    return [[float(v) for v in row] for row in np.asarray(arr, dtype=float)]


def _dump_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _parse_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def _take(obj: dict, path: str, lineno: int, key: str, kind):
    if key not in obj:
        raise ParseError(f"{path}:{lineno}: missing field {key!r}")
    value = obj[key]
    try:
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ParseError(f"{path}:{lineno}: field {key!r} is not {kind.__name__}") from None


def _warn_unknown(path: str, unknown: set):
    if unknown:
        warnings.warn(f"{path}: ignoring unknown field(s) {sorted(unknown)}", stacklevel=3)


# --- frame streams ---------------------------------------------------------

_FRAME_FIELDS = {"procedure_id", "frame_idx", "timestamp_ms", "embedding", "frame", "excluded"}


def save_frames(path: str, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "procedure_id": rec.procedure_id,
                "frame_idx": rec.frame_idx,
                "timestamp_ms": rec.timestamp_ms,
            }
            if rec.embedding is not None:
                obj["embedding"] = _floats(rec.embedding)
            else:
                values = rec.frame.values
                obj["frame"] = {
                    "layout": rec.frame.layout_tag,
                    "values": _matrix(values) if values.ndim == 2 else _floats(values),
                }
            obj["excluded"] = bool(rec.excluded)
            fh.write(_dump_line(obj) + "\n")


def load_frames(path: str) -> dict:
    """Frames grouped per procedure, in file order."""
    out: dict = {}
    unknown = set()
    payload_dim = None
    last_ts: dict = {}
    for lineno, obj in _parse_lines(path):
        if not isinstance(obj, dict):
            raise ParseError(f"{path}:{lineno}: expected a JSON object")
        unknown |= set(obj) - _FRAME_FIELDS
        pid = _take(obj, path, lineno, "procedure_id", str)
        idx = _take(obj, path, lineno, "frame_idx", int)
        ts = _take(obj, path, lineno, "timestamp_ms", int)
        excluded = bool(obj.get("excluded", False))
        has_emb = "embedding" in obj
        has_frame = "frame" in obj
        if has_emb == has_frame:
            raise ParseError(
                f"{path}:{lineno}: need exactly one of 'embedding' or 'frame'"
            )
        try:
            if has_emb:
                payload = np.asarray(obj["embedding"], dtype=float)
                if payload.ndim != 1:
                    raise ValueError
                rec = FrameRecord(pid, idx, ts, embedding=payload, excluded=excluded)
            else:
                frame_obj = obj["frame"]
                payload = np.asarray(frame_obj["values"], dtype=float)
                rec = FrameRecord(
                    pid,
                    idx,
                    ts,
                    frame=FrameTensor(payload, frame_obj.get("layout", "vector")),
                    excluded=excluded,
                )
        except (ValueError, TypeError, KeyError, SchemaError) as exc:
            raise ParseError(f"{path}:{lineno}: bad payload ({exc})") from exc
        if payload_dim is None:
            payload_dim = payload.size
        elif payload.size != payload_dim:
            raise SchemaError(
                f"{path}: payload length {payload.size} at frame_idx {idx} "
                f"differs from {payload_dim}"
            )
        if pid in last_ts and ts < last_ts[pid]:
            raise SchemaError(
                f"{path}: timestamps go backwards at frame_idx {idx} of {pid}"
            )
        last_ts[pid] = ts
        out.setdefault(pid, []).append(rec)
    _warn_unknown(path, unknown)
    return out


# --- annotations -----------------------------------------------------------

_ANN_FIELDS = {
    "procedure_id",
    "withdrawal_start_ms",
    "withdrawal_end_ms",
    "polyp_events",
    "exclusion_intervals",
}


def save_annotations(path: str, annotations):
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(
                _dump_line(
                    {
                        "procedure_id": ann.procedure_id,
                        "withdrawal_start_ms": ann.withdrawal_start_ms,
                        "withdrawal_end_ms": ann.withdrawal_end_ms,
                        "polyp_events": [[s, e] for s, e in ann.polyp_events],
                        "exclusion_intervals": [[s, e] for s, e in ann.exclusion_intervals],
                    }
                )
                + "\n"
            )


def _interval_list(obj, path, lineno, key):
    raw = obj.get(key, [])
    try:
        return [(int(s), int(e)) for s, e in raw]
    except (TypeError, ValueError):
        raise ParseError(f"{path}:{lineno}: field {key!r} must be [start, end] pairs") from None


def load_annotations(path: str) -> dict:
    out = {}
    unknown = set()
    for lineno, obj in _parse_lines(path):
        unknown |= set(obj) - _ANN_FIELDS
        pid = _take(obj, path, lineno, "procedure_id", str)
        try:
            ann = ProcedureAnnotation(
                procedure_id=pid,
                withdrawal_start_ms=_take(obj, path, lineno, "withdrawal_start_ms", int),
                withdrawal_end_ms=_take(obj, path, lineno, "withdrawal_end_ms", int),
                polyp_events=_interval_list(obj, path, lineno, "polyp_events"),
                exclusion_intervals=_interval_list(obj, path, lineno, "exclusion_intervals"),
            )
        except SchemaError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from exc
        if pid in out:
            raise SchemaError(f"{path}:{lineno}: duplicate annotation for {pid}")
        out[pid] = ann
    _warn_unknown(path, unknown)
    return out


# --- simulator truth -------------------------------------------------------


def save_truth(path: str, truth_by_procedure: dict):
    with open(path, "w", encoding="utf-8") as fh:
        for pid in truth_by_procedure:
            fh.write(
                _dump_line(
                    {
                        "procedure_id": pid,
                        "polyps": [
                            {
                                "exists_at_ms": p.exists_at_ms,
                                "true_window_quality": float(p.true_window_quality),
                                "detected": bool(p.detected),
                            }
                            for p in truth_by_procedure[pid]
                        ],
                    }
                )
                + "\n"
            )


def load_truth(path: str) -> dict:
    out = {}
    for lineno, obj in _parse_lines(path):
        pid = _take(obj, path, lineno, "procedure_id", str)
        polyps = []
        for p in obj.get("polyps", []):
            try:
                polyps.append(
                    PolypTruth(
                        exists_at_ms=int(p["exists_at_ms"]),
                        true_window_quality=float(p["true_window_quality"]),
                        detected=bool(p["detected"]),
                    )
                )
            except (TypeError, ValueError, KeyError):
                raise ParseError(f"{path}:{lineno}: bad polyp record") from None
        out[pid] = polyps
    return out


# --- soft assignment streams -----------------------------------------------

_ASSIGN_FIELDS = {"procedure_id", "frame_idx", "timestamp_ms", "r", "excluded"}


@dataclass(frozen=True)
class AssignedFrame:
    procedure_id: str
    frame_idx: int
    timestamp_ms: int
    r: np.ndarray
    excluded: bool = False


def save_assignments(path: str, assigned_by_procedure: dict):
    with open(path, "w", encoding="utf-8") as fh:
        for pid in assigned_by_procedure:
            for frame in assigned_by_procedure[pid]:
                fh.write(
                    _dump_line(
                        {
                            "procedure_id": frame.procedure_id,
                            "frame_idx": frame.frame_idx,
                            "timestamp_ms": frame.timestamp_ms,
                            "r": _floats(frame.r),
                            "excluded": bool(frame.excluded),
                        }
                    )
                    + "\n"
                )


def load_assignments(path: str) -> dict:
    out: dict = {}
    unknown = set()
    k = None
    for lineno, obj in _parse_lines(path):
        unknown |= set(obj) - _ASSIGN_FIELDS
        pid = _take(obj, path, lineno, "procedure_id", str)
        idx = _take(obj, path, lineno, "frame_idx", int)
        if "r" not in obj:
            raise ParseError(f"{path}:{lineno}: missing field 'r'")
        r = np.asarray(obj["r"], dtype=float)
        if k is None:
            k = r.size
        elif r.size != k:
            raise SchemaError(
                f"{path}: assignment length {r.size} at frame_idx {idx} differs from {k}"
            )
        out.setdefault(pid, []).append(
            AssignedFrame(
                procedure_id=pid,
                frame_idx=idx,
                timestamp_ms=_take(obj, path, lineno, "timestamp_ms", int),
                r=r,
                excluded=bool(obj.get("excluded", False)),
            )
        )
    _warn_unknown(path, unknown)
    return out


# --- window scores ---------------------------------------------------------


def save_window_scores(path: str, scores_by_procedure: dict):
    with open(path, "w", encoding="utf-8") as fh:
        for pid in scores_by_procedure:
            for end, q in scores_by_procedure[pid]:
                fh.write(
                    _dump_line(
                        {"procedure_id": pid, "window_end_ms": int(end), "q": float(q)}
                    )
                    + "\n"
                )


def load_window_scores(path: str) -> dict:
    out: dict = {}
    for lineno, obj in _parse_lines(path):
        pid = _take(obj, path, lineno, "procedure_id", str)
        end = _take(obj, path, lineno, "window_end_ms", int)
        q = _take(obj, path, lineno, "q", float)
        out.setdefault(pid, []).append((end, q))
    return out


# --- procedure scores and reports (CSV) -------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def save_procedure_scores(path: str, scores):
    _write_csv(
        path,
        ["procedure_id", "q_offline_sum", "q_offline_mean", "n_windows", "polyps_detected"],
        [
            (s.procedure_id, s.q_offline_sum, s.q_offline_mean, s.n_windows, s.polyps_detected)
            for s in scores
        ],
    )


def load_procedure_scores(path: str):
    scores = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty scores file")
        for lineno, row in enumerate(reader, start=2):
            try:
                scores.append(
                    ProcedureScore(
                        procedure_id=row[0],
                        q_offline_sum=float(row[1]),
                        q_offline_mean=float(row[2]),
                        n_windows=int(row[3]),
                        polyps_detected=int(row[4]),
                    )
                )
            except (IndexError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad score row ({exc})") from exc
    return scores


def save_quintile_report(path: str, rows):
    _write_csv(
        path,
        ["range_lo", "range_hi", "mean_ppc", "n"],
        [(lo, hi, ppc, n) for lo, hi, ppc, n in rows],
    )


def save_distribution_report(path: str, report: DistributionReport):
    edges = report.bin_edges

    def cell(freqs, i):
        return "" if freqs is None else repr(float(freqs[i]))

    rows = [
        (
            float(edges[i]),
            float(edges[i + 1]),
            cell(report.freq_no_polyp, i),
            cell(report.freq_polyp, i),
        )
        for i in range(len(edges) - 1)
    ]
    _write_csv(path, ["bin_lo", "bin_hi", "freq_no_polyp", "freq_polyp"], rows)


def save_bayes_curve(path: str, table: BayesTable):
    edges = table.bin_edges
    rows = []
    for i in range(len(edges) - 1):
        like = table.p_d_given_e_q[i]
        rows.append(
            (
                float(edges[i]),
                float(edges[i + 1]),
                float(table.bin_centers[i]),
                float(table.p_q[i]),
                float(table.p_q_given_d[i]),
                "" if like is None else repr(float(like)),
            )
        )
    _write_csv(
        path,
        ["bin_lo", "bin_hi", "bin_center", "p_q", "p_q_given_d", "p_d_given_e_q"],
        rows,
    )


# --- model persistence (JSON) ------------------------------------------------


def _write_json(path: str, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _read_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc.msg})") from exc


def _layer_obj(layer: DenseLayer) -> dict:
    return {
        "weights": _matrix(layer.weights),
        "bias": _floats(layer.bias),
        "activation": layer.activation,
    }


def _layer_from(obj, path) -> DenseLayer:
    try:
        return DenseLayer(
            weights=np.asarray(obj["weights"], dtype=float),
            bias=np.asarray(obj["bias"], dtype=float),
            activation=obj.get("activation", "identity"),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise SchemaError(f"{path}: bad layer ({exc})") from exc


def save_encoder_params(path: str, params: EncoderParams):
    _write_json(
        path,
        {
            "embed_dim": params.embed_dim,
            "encoder_layers": [_layer_obj(l) for l in params.encoder_layers],
            "projection_layers": [_layer_obj(l) for l in params.projection_layers],
        },
    )


def load_encoder_params(path: str) -> EncoderParams:
    obj = _read_json(path)
    try:
        return EncoderParams(
            encoder_layers=[_layer_from(l, path) for l in obj["encoder_layers"]],
            projection_layers=[_layer_from(l, path) for l in obj["projection_layers"]],
            embed_dim=int(obj["embed_dim"]),
        )
    except KeyError as exc:
        raise SchemaError(f"{path}: missing field {exc}") from exc


def save_cluster_model(path: str, model: ClusterModel):
    _write_json(
        path,
        {
            "k": model.k,
            "alpha": float(model.alpha),
            "epsilon": float(model.epsilon),
            "centers": _matrix(model.centers),
        },
    )


def load_cluster_model(path: str) -> ClusterModel:
    obj = _read_json(path)
    try:
        return ClusterModel(
            centers=np.asarray(obj["centers"], dtype=float),
            k=int(obj["k"]),
            alpha=float(obj["alpha"]),
            epsilon=float(obj["epsilon"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: bad cluster model ({exc})") from exc


def save_quality_model(path: str, model: QualityModel):
    _write_json(path, {"weights": _floats(model.weights), "bias": float(model.bias)})


def load_quality_model(path: str) -> QualityModel:
    obj = _read_json(path)
    try:
        return QualityModel(
            weights=np.asarray(obj["weights"], dtype=float), bias=float(obj["bias"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: bad quality model ({exc})") from exc


def save_bayes_table(path: str, table: BayesTable):
    _write_json(
        path,
        {
            "bin_edges": _floats(table.bin_edges),
            "p_q": _floats(table.p_q),
            "p_q_given_d": _floats(table.p_q_given_d),
            "pds": float(table.pds),
            "p_d_given_e_q": [
                None if v is None else float(v) for v in table.p_d_given_e_q
            ],
        },
    )


def load_bayes_table(path: str) -> BayesTable:
    obj = _read_json(path)
    try:
        return BayesTable(
            bin_edges=np.asarray(obj["bin_edges"], dtype=float),
            p_q=np.asarray(obj["p_q"], dtype=float),
            p_q_given_d=np.asarray(obj["p_q_given_d"], dtype=float),
            pds=float(obj["pds"]),
            p_d_given_e_q=tuple(
                None if v is None else float(v) for v in obj["p_d_given_e_q"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: bad likelihood table ({exc})") from exc
