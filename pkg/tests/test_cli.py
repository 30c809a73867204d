import hashlib
import json
import os
import subprocess
import sys

import pytest

from aadnet import cli
from aadnet.harness.reports import read_embedding, read_manifest_text


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    argv = ["synth", "--out", str(out), "--subjects", "1", "--trials", "4", "--seconds", "10", "--seed", "7"]
    assert cli.main(argv) == 0
    return out


def _digests(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*.aadb"))}


def test_synth_files_and_determinism(dataset, tmp_path, capsys):
    assert len(_digests(dataset)) == 4
    again = tmp_path / "again"
    assert cli.main(["synth", "--out", str(again), "--subjects", "1", "--trials", "4",
                     "--seconds", "10", "--seed", "7"]) == 0
    assert _digests(again) == _digests(dataset)
    assert "4 trial files" in capsys.readouterr().out
    assert read_manifest_text(again / "manifest.txt")["run"]["status"] == "complete"


def test_synth_default_file_count():
    args = cli.parse_args(["synth", "--out", "x"])
    assert args.subjects * args.trials == 192


def test_unwritable_output_is_usage_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["synth", "--out", str(blocker / "sub"), "--subjects", "1", "--trials", "4"]) == 2


@pytest.mark.parametrize("argv", [
    ["run", "--data", "d", "--task", "oa", "--window", "0.05", "--out", "o"],
    ["run", "--data", "d", "--task", "oa", "--window", "2.5", "--out", "o"],
    ["run", "--data", "d", "--task", "xa", "--out", "o"],
    ["run", "--data", "d", "--task", "oa", "--model", "lda", "--out", "o"],
    ["synth", "--out", "o", "--trials", "6"],
    ["frobnicate"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == 2


def test_run_reports_and_rerun_identical(dataset, tmp_path):
    out = tmp_path / "run"
    argv = ["run", "--data", str(dataset), "--task", "oa", "--window", "0.5", "--model", "fbcsp",
            "--seed", "3", "--out", str(out), "--jobs", "1"]
    names = ("metrics.csv", "roc.tsv", "manifest.txt")
    snapshots = []
    for _ in range(2):
        assert cli.main(argv) == 0
        snapshots.append({n: (out / n).read_bytes() for n in names})
    assert snapshots[0] == snapshots[1]
    man = read_manifest_text(out / "manifest.txt")
    assert man["run"]["status"] == "complete"
    stages = [v.split(":")[0] for v in man["stage_log"].values()]
    assert stages == ["filter", "reference", "artifact", "segment"]
    assert "fbcsp/baseline/S01" in man["folds"]
    assert man["config"]["seed"] == "3"


def test_runtime_failure_leaves_marker(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", "--data", str(tmp_path / "missing"), "--task", "oa", "--out", str(out)]) == 1
    assert (out / "manifest.txt").exists()
    assert "stage: load" in (out / "FAILED").read_text()
    assert read_manifest_text(out / "manifest.txt")["run"]["status"] == "failed"


def test_config_file_overridden_by_flags(dataset, tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"model": "pca", "seed": 11, "window": 1.0}))
    args = cli.parse_args(["--config", str(conf), "run", "--data", str(dataset), "--task", "ta",
                           "--out", "o", "--seed", "5"])
    assert (args.model, args.seed, args.window) == ("pca", 5, 1.0)
    conf.write_text(json.dumps({"window": 0.01}))
    assert cli.main(["--config", str(conf), "run", "--data", "d", "--task", "ta", "--out", "o"]) == 2
    conf.write_text(json.dumps({"nonsense": 1}))
    assert cli.main(["--config", str(conf), "run", "--data", "d", "--task", "ta", "--out", "o"]) == 2


def test_train_then_embed(dataset, tmp_path):
    model_dir = tmp_path / "model"
    assert cli.main(["train", "--data", str(dataset), "--task", "oa", "--window", "0.5",
                     "--epochs", "2", "--out", str(model_dir)]) == 0
    ckpt = model_dir / cli.CHECKPOINT_NAME
    paths = [tmp_path / "e1" / "embed.tsv", tmp_path / "e2"]
    for p in paths:
        assert cli.main(["embed", "--checkpoint", str(ckpt), "--data", str(dataset), "--task", "oa",
                         "--out", str(p)]) == 0
    first, second = paths[0], paths[1] / "embed.tsv"
    assert first.read_bytes() == second.read_bytes()
    header, rows = read_embedding(first)
    assert header == ["x", "y", "label"] and len(rows) == 80


def test_embed_checkpoint_mismatch(dataset, tmp_path):
    from aadnet.model import ModelConfig, init_model, save_model

    ckpt = save_model(init_model(ModelConfig(n_channels=8, window_samples=250), 0), tmp_path / "m.aadm")
    assert cli.main(["embed", "--checkpoint", str(ckpt), "--data", str(dataset), "--task", "oa",
                     "--out", str(tmp_path / "e")]) == 1
    assert cli.main(["embed", "--checkpoint", str(tmp_path / "none.aadm"), "--data", str(dataset),
                     "--task", "oa", "--out", str(tmp_path / "e")]) == 1


def test_gradcheck_command(capsys):
    assert cli.main(["gradcheck", "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert "max_rel_err" in out and "elu" in out and "aadnet_full" in out


def test_module_entry_point(tmp_path):
    env = dict(os.environ, AAD_LOG_LEVEL="debug")
    res = subprocess.run([sys.executable, "-m", "aadnet", "run", "--data", "x", "--task", "oa",
                          "--window", "0.05", "--out", str(tmp_path)], capture_output=True, text=True, env=env)
    assert res.returncode == 2
    assert "window must lie in" in res.stderr
