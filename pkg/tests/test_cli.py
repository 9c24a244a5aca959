import json

import numpy as np
import pytest

from scopeq import fit_bayes
from scopeq.cli import cli_dispatch
from scopeq.offline import ProcedureScore
from scopeq.storage import (
    load_annotations,
    load_assignments,
    load_cluster_model,
    load_encoder_params,
    load_frames,
    load_procedure_scores,
    load_quality_model,
    load_window_scores,
    save_bayes_table,
    save_procedure_scores,
)


def _simulate(out, seed=5, n=4, len_s=60, extra=()):
    return cli_dispatch(
        [
            "simulate",
            "--out-frames", str(out / "frames.jsonl"),
            "--out-annotations", str(out / "ann.jsonl"),
            "--out-truth", str(out / "truth.jsonl"),
            "--n-procedures", str(n),
            "--procedure-len-s", str(len_s),
            "--polyp-rate", "2.0",
            "--seed", str(seed),
            *extra,
        ]
    )


# --- dispatch and exit codes ---------------------------------------------------


def test_no_arguments_prints_usage(capsys):
    assert cli_dispatch([]) == 1
    assert "usage: scopeq" in capsys.readouterr().err


def test_unknown_command_rejected(capsys):
    assert cli_dispatch(["frobnicate"]) == 1
    assert "unknown command" in capsys.readouterr().err


def test_subcommand_help_exits_zero(capsys):
    assert cli_dispatch(["simulate", "-h"]) == 0
    assert "--n-procedures" in capsys.readouterr().out


def test_missing_input_file_is_exit_2(tmp_path, capsys):
    rc = cli_dispatch(
        ["fit-clusters", "--embeddings", str(tmp_path / "nope.jsonl"),
         "--out-model", str(tmp_path / "m.json")]
    )
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")


def test_corrupt_input_is_exit_2(tmp_path, capsys):
    bad = tmp_path / "frames.jsonl"
    bad.write_text("{not json\n")
    rc = cli_dispatch(
        ["fit-clusters", "--embeddings", str(bad), "--out-model", str(tmp_path / "m.json")]
    )
    assert rc == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_report_bayes_table_requires_curve_path(tmp_path, capsys):
    scores = tmp_path / "scores.csv"
    save_procedure_scores(str(scores), [ProcedureScore(f"p{i}", float(i), i / 10, 10, 0) for i in range(6)])
    table = tmp_path / "table.json"
    save_bayes_table(str(table), fit_bayes(np.linspace(0, 0.5, 30), np.linspace(0.4, 1, 10), pds=0.5))
    rc = cli_dispatch(
        ["report", "--scores", str(scores),
         "--out-quintiles", str(tmp_path / "q.csv"),
         "--out-distribution", str(tmp_path / "d.csv"),
         "--bayes-table", str(table)]
    )
    assert rc == 1
    assert "--out-curve" in capsys.readouterr().err


# --- seeding and config files ----------------------------------------------------


def test_env_seed_matches_explicit_flag(tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    monkeypatch.delenv("SCOPEQ_SEED", raising=False)
    assert _simulate(a, seed=99) == 0
    monkeypatch.setenv("SCOPEQ_SEED", "99")
    rc = cli_dispatch(
        ["simulate",
         "--out-frames", str(b / "frames.jsonl"),
         "--out-annotations", str(b / "ann.jsonl"),
         "--out-truth", str(b / "truth.jsonl"),
         "--n-procedures", "4", "--procedure-len-s", "60", "--polyp-rate", "2.0"]
    )
    assert rc == 0
    for name in ("frames.jsonl", "ann.jsonl", "truth.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_file_sets_defaults_but_flags_win(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n-procedures": 2, "seed": 7, "procedure-len-s": 60}))
    out = tmp_path / "out"
    out.mkdir()
    rc = cli_dispatch(
        ["simulate", "--config", str(cfg),
         "--out-frames", str(out / "frames.jsonl"),
         "--out-annotations", str(out / "ann.jsonl"),
         "--polyp-rate", "1.0"]
    )
    assert rc == 0
    assert len(load_frames(str(out / "frames.jsonl"))) == 2

    explicit = tmp_path / "explicit"
    explicit.mkdir()
    rc = cli_dispatch(
        ["simulate", "--config", str(cfg),
         "--out-frames", str(explicit / "frames.jsonl"),
         "--out-annotations", str(explicit / "ann.jsonl"),
         "--polyp-rate", "1.0",
         "--n-procedures", "3"]
    )
    assert rc == 0
    assert len(load_frames(str(explicit / "frames.jsonl"))) == 3


def test_config_unknown_key_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"banana": 1}))
    rc = cli_dispatch(
        ["simulate", "--config", str(cfg),
         "--out-frames", str(tmp_path / "f.jsonl"),
         "--out-annotations", str(tmp_path / "a.jsonl")]
    )
    assert rc == 1
    assert "unknown option" in capsys.readouterr().err


# --- end-to-end smoke --------------------------------------------------------------


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run the full command chain once on a small cohort."""
    d = tmp_path_factory.mktemp("pipeline")
    assert _simulate(d, seed=5, n=6, len_s=240) == 0
    assert cli_dispatch(
        ["fit-clusters", "--embeddings", str(d / "frames.jsonl"),
         "--out-model", str(d / "clusters.json"), "--k", "6", "--seed", "1"]
    ) == 0
    assert cli_dispatch(
        ["assign", "--embeddings", str(d / "frames.jsonl"),
         "--model", str(d / "clusters.json"), "--out", str(d / "assigned.jsonl")]
    ) == 0
    assert cli_dispatch(
        ["train-q", "--assignments", str(d / "assigned.jsonl"),
         "--annotations", str(d / "ann.jsonl"),
         "--out-model", str(d / "q.json"), "--out-trace", str(d / "trace.csv"),
         "--n-per-class", "10", "--epochs", "5", "--seed", "1"]
    ) == 0
    assert cli_dispatch(
        ["fit-bayes", "--assignments", str(d / "assigned.jsonl"),
         "--annotations", str(d / "ann.jsonl"), "--q-model", str(d / "q.json"),
         "--out-table", str(d / "table.json"), "--n-random", "200",
         "--pds", "0.7", "--bins", "6", "--seed", "1"]
    ) == 0
    assert cli_dispatch(
        ["score-online", "--embeddings", str(d / "frames.jsonl"),
         "--cluster-model", str(d / "clusters.json"), "--q-model", str(d / "q.json"),
         "--out", str(d / "online.jsonl")]
    ) == 0
    assert cli_dispatch(
        ["score-offline", "--assignments", str(d / "assigned.jsonl"),
         "--annotations", str(d / "ann.jsonl"), "--q-model", str(d / "q.json"),
         "--out", str(d / "scores.csv")]
    ) == 0
    assert cli_dispatch(
        ["report", "--scores", str(d / "scores.csv"),
         "--out-quintiles", str(d / "quintiles.csv"),
         "--out-distribution", str(d / "dist.csv"),
         "--bayes-table", str(d / "table.json"), "--out-curve", str(d / "curve.csv"),
         "--bins", "5"]
    ) == 0
    return d


def test_pipeline_artifacts_load(pipeline):
    d = pipeline
    frames = load_frames(str(d / "frames.jsonl"))
    assert len(frames) == 6
    assert sorted(load_annotations(str(d / "ann.jsonl"))) == sorted(frames)
    model = load_cluster_model(str(d / "clusters.json"))
    assert model.k == 6
    assigned = load_assignments(str(d / "assigned.jsonl"))
    assert sorted(assigned) == sorted(frames)
    for pid, rows in assigned.items():
        assert len(rows) == len(frames[pid])
    qm = load_quality_model(str(d / "q.json"))
    assert qm.weights.shape == (6,)


def test_pipeline_scores_are_consistent(pipeline):
    d = pipeline
    online = load_window_scores(str(d / "online.jsonl"))
    assert all(0.0 < q < 1.0 for rows in online.values() for _, q in rows)
    scores = load_procedure_scores(str(d / "scores.csv"))
    assert len(scores) == 6
    for s in scores:
        assert s.n_windows > 0
        assert s.q_offline_sum == pytest.approx(s.q_offline_mean * s.n_windows)


def test_pipeline_reports_exist(pipeline):
    d = pipeline
    quintiles = (d / "quintiles.csv").read_text().splitlines()
    assert quintiles[0] == "range_lo,range_hi,mean_ppc,n"
    assert len(quintiles) == 6  # 5 bands
    dist = (d / "dist.csv").read_text().splitlines()
    assert dist[0] == "bin_lo,bin_hi,freq_no_polyp,freq_polyp"
    curve = (d / "curve.csv").read_text().splitlines()
    assert curve[0].startswith("bin_lo,bin_hi,bin_center")
    assert len(curve) == 7  # 6 bins


def test_raw_pipeline_through_encoder(tmp_path):
    d = tmp_path
    rc = _simulate(d, seed=3, n=2, extra=["--raw", "--raw-dim", "16"])
    assert rc == 0
    rc = cli_dispatch(
        ["train-encoder", "--frames", str(d / "frames.jsonl"),
         "--out-model", str(d / "enc.json"), "--out-trace", str(d / "enc-trace.csv"),
         "--hidden-dims", "8", "--embed-dim", "4", "--proj-hidden", "4",
         "--proj-dim", "3", "--epochs", "2", "--batch-size", "16", "--seed", "2"]
    )
    assert rc == 0
    params = load_encoder_params(str(d / "enc.json"))
    assert params.embed_dim == 4
    rc = cli_dispatch(
        ["embed", "--frames", str(d / "frames.jsonl"),
         "--model", str(d / "enc.json"), "--out", str(d / "emb.jsonl")]
    )
    assert rc == 0
    embedded = load_frames(str(d / "emb.jsonl"))
    assert all(r.embedding.shape == (4,) for rows in embedded.values() for r in rows)
    trace = json.loads((d / "enc-trace.csv").read_text())
    assert len(trace["epoch_loss"]) == 2
