import numpy as np
import pytest

from aadnet.exceptions import ParameterError
from aadnet.harness import evaluate as E
from aadnet.harness.embedding import class_separation, export_embedding
from aadnet.harness.reports import (
    RunManifest,
    metric_rows,
    read_embedding,
    read_manifest_text,
    write_ablation,
    write_embedding,
    write_metrics,
    write_roc,
)
from aadnet.harness.training import TrainConfig, train
from aadnet.model import ModelConfig, init_model

FAST = TrainConfig(epochs=2)


@pytest.fixture(scope="module")
def fbcsp_report(small_windows):
    return E.evaluate_outer(small_windows, E.EvalSpec(task="OA", window_s=0.5, model="fbcsp", seed=1))


def test_report_shape(fbcsp_report, small_windows):
    assert len(fbcsp_report.subjects) == len(small_windows.subjects())
    rows = metric_rows([fbcsp_report])
    assert [r["subject"] for r in rows] == small_windows.subjects() + ["mean", "sd"]
    for r in fbcsp_report.subjects:
        assert r.counts.total == len(small_windows.for_subject(r.subject))


def test_aggregate_uses_sample_sd(fbcsp_report):
    accs = np.array([r.values["ACC"] for r in fbcsp_report.subjects])
    assert fbcsp_report.mean["ACC"] == pytest.approx(accs.mean())
    assert fbcsp_report.sd["ACC"] == pytest.approx(accs.std(ddof=1))


def test_serial_and_parallel_agree(small_windows, tmp_path):
    spec = E.EvalSpec(task="TA", window_s=0.5, model="pca", seed=2)
    a = E.evaluate_outer(small_windows, spec, n_jobs=1)
    b = E.evaluate_outer(small_windows, spec, n_jobs=2)
    write_metrics(tmp_path / "a.csv", [a])
    write_metrics(tmp_path / "b.csv", [b])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.plan_digests == b.plan_digests


def test_unit_seeds_distinct():
    seeds = {E.unit_seed(0, "train", s, j) for s in ("S01", "S02") for j in range(5)}
    assert len(seeds) == 10
    assert E.unit_seed(0, "x") == E.unit_seed(0, "x")


def test_plan_matches_evaluated_partition(fbcsp_report, small_windows):
    spec = E.EvalSpec(task="OA", window_s=0.5, seed=1)
    for r in fbcsp_report.subjects:
        assert E.plan_for(small_windows, r.subject, spec).digest() == r.plan_digest


def test_invalid_specs(small_windows):
    with pytest.raises(ParameterError):
        E.evaluate_outer(small_windows, E.EvalSpec(task="OA", window_s=0.5, model="svm"))
    with pytest.raises(ParameterError):
        E.evaluate_outer(small_windows, E.EvalSpec(task="OA", window_s=0.5, model="pca", variant="M1"))
    with pytest.raises(ParameterError):
        E.evaluate_outer(small_windows, E.EvalSpec(task="OA", window_s=0.5, cv_unit="subject"))


def test_ablation_shares_plans(small_windows, tmp_path):
    one = small_windows.for_subject(small_windows.subjects()[0])
    rep = E.run_ablation(one, E.EvalSpec(task="OA", window_s=0.5, cfg=FAST, seed=3))
    assert rep.plans_match()
    rows = rep.rows()
    assert [r["variant"] for r in rows] == ["M1", "M2", "M3"]
    assert all(set(r) == {"task", "variant", *rep.TABLE_COLUMNS} for r in rows)
    assert set(rep.acc_drops()) == {"M1", "M2", "M3"}
    text = write_ablation(tmp_path / "abl.csv", rep).read_text().splitlines()
    assert len(text) == 4 and text[0].startswith("task,variant,ACC,ACC_sd,SPE")


def test_report_files(fbcsp_report, tmp_path):
    lines = write_metrics(tmp_path / "m.csv", [fbcsp_report]).read_text().splitlines()
    assert lines[0] == "subject,task,window_s,model,variant,ACC,F1,PRE,SEN,SPE,AUC"
    roc_lines = write_roc(tmp_path / "r.tsv", [fbcsp_report]).read_text().splitlines()
    assert roc_lines[0].split("\t") == ["model", "variant", "window_s", "subject", "fpr", "tpr"]
    assert len(roc_lines) - 1 == sum(len(r.fpr) for r in fbcsp_report.subjects)


def test_embedding_separates_classes(small_windows, tmp_path):
    sub = small_windows.for_subject(small_windows.subjects()[0])
    cfg = ModelConfig(n_channels=sub.X.shape[1], window_samples=sub.X.shape[2])
    params, _ = train(init_model(cfg, 0), sub.X, sub.label_oa, cfg=TrainConfig(epochs=15))
    points, labels, pca = export_embedding(params, sub.X, sub.label_oa)
    assert points.shape == (len(sub), 2)
    np.testing.assert_allclose(pca.components @ pca.components.T, np.eye(2), atol=1e-10)
    dist, radius = class_separation(points, labels)
    assert dist >= 2 * radius
    path = write_embedding(tmp_path / "e.tsv", points, labels)
    header, rows = read_embedding(path)
    assert header == ["x", "y", "label"] and len(rows) == len(sub)


def test_run_manifest_round_trip(tmp_path):
    m = RunManifest(tmp_path / "manifest.txt")
    m.update("run", {"command": "run", "seed": 3}).append_log(["filter: x", "segment: y"])
    m.write()
    back = read_manifest_text(tmp_path / "manifest.txt")
    assert back["run"] == {"command": "run", "seed": "3"}
    assert list(back["stage_log"].values()) == ["filter: x", "segment: y"]
