import json

import pandas as pd
import pytest

from oneclass_rec.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, SYNTH_DEFAULTS, RunManifest, execute, main
from oneclass_rec.experiments import SyntheticConfig, synthetic_train_config
from oneclass_rec.interactions import load_interactions


def test_gradcheck_passes_and_is_deterministic(capsys):
    assert main(["gradcheck"]) == EXIT_OK
    first = capsys.readouterr().out
    assert main(["gradcheck"]) == EXIT_OK
    assert capsys.readouterr().out == first
    names = [line.split()[0] for line in first.strip().splitlines()]
    assert "hinge-pairwise" in names and "orth" in names and "total" in names
    assert "FAIL" not in first


def test_gradcheck_flags_corrupted_term(capsys):
    assert main(["gradcheck", "--dim", "4", "--corrupt-term", "orth"]) == EXIT_NUMERICAL
    captured = capsys.readouterr()
    assert any(line.startswith("orth ") and line.endswith("FAIL") for line in captured.out.splitlines())
    assert "orth" in captured.err
    assert main(["gradcheck", "--corrupt-term", "nothing"]) == EXIT_CONFIG


def test_missing_data_fails_without_artifacts(tmp_path):
    out_dir = tmp_path / "run"
    code, manifest = execute(["train", "--data", str(tmp_path / "absent.txt"), "--out-dir", str(out_dir)])
    assert code == EXIT_CONFIG
    assert manifest is None
    assert not out_dir.exists()
    assert main(["train", "--out-dir", str(out_dir)]) == EXIT_CONFIG


def test_invalid_settings_are_config_errors(tmp_path, write_text):
    data = write_text("pairs.txt", "u1 i1\nu2 i2\n")
    assert main(["train", "--data", str(data), "--epochs", "0", "--out-dir", str(tmp_path / "a")]) == EXIT_CONFIG
    assert main(["train", "--data", str(data), "--patience", "2", "--out-dir", str(tmp_path / "b")]) == EXIT_CONFIG


def test_manifest_run_id_depends_on_config():
    a = RunManifest("train", {"lr": 0.5})
    assert a.run_id == RunManifest("train", {"lr": 0.5}).run_id
    assert a.run_id != RunManifest("train", {"lr": 0.25}).run_id
    assert len(a.run_id) == 12


def test_config_file_precedence(tmp_path, write_text):
    data = write_text("pairs.txt", "u1 i1\nu1 i2\nu2 i2\nu3 i3\n")
    config = write_text("train.env", "epochs=3\nlr=0.2\ndim=4\nbatch=2\n")
    code, manifest = execute([
        "train", "--data", str(data), "--config", str(config), "--epochs", "1", "--out-dir", str(tmp_path / "run"),
    ])
    assert code == EXIT_OK
    assert manifest.config["epochs"] == 1
    assert manifest.config["lr"] == 0.2
    assert manifest.config["dim"] == 4
    assert manifest.config["margin_p"] == 0.01
    history = pd.read_csv(tmp_path / "run" / "diagnostics.csv")
    assert len(history) == 1

    bad = write_text("bad.env", "colour=blue\n")
    assert main(["train", "--data", str(data), "--config", str(bad)]) == EXIT_CONFIG


def test_end_to_end_pipeline(tmp_path):
    synth_dir, split_dir = tmp_path / "synth", tmp_path / "split"
    train_dir, eval_dir, diag_dir = tmp_path / "train", tmp_path / "eval", tmp_path / "diag"

    code, manifest = execute([
        "synth", "--components", "2", "--users-per", "10", "--items-per", "10", "--edge-prob", "0.5",
        "--out-dir", str(synth_dir),
    ])
    assert code == EXIT_OK
    data = manifest.artifacts["data"]
    assert (synth_dir / "components.csv").is_file()
    assert not (synth_dir / "synthetic_report.json").exists()

    assert main(["prepare", "--data", data, "--kind", "warm", "--candidates", "5", "--out-dir", str(split_dir)]) == 0
    split = str(split_dir / "split.json")
    assert (split_dir / "train.txt").is_file()

    code, manifest = execute([
        "train", "--data", data, "--split", split, "--epochs", "2", "--dim", "4", "--batch", "16",
        "--snapshot-every", "1", "--out-dir", str(train_dir),
    ])
    assert code == EXIT_OK
    for name in ("checkpoint_final.npz", "checkpoint_epoch001.npz", "diagnostics.csv", "collapse.json"):
        assert (train_dir / name).is_file()
    stored = json.loads((train_dir / "manifest.json").read_text())
    assert stored["run_id"] == manifest.run_id
    assert stored["seeds"] == {"train": 0}

    eval_args = [
        "eval", "--data", data, "--split", split, "--checkpoint", str(train_dir / "checkpoint_final.npz"),
        "--k", "1", "--k", "5", "--out-dir", str(eval_dir),
    ]
    assert main(eval_args) == EXIT_OK
    first = (eval_dir / "metrics.jsonl").read_text()
    rows = [json.loads(line) for line in first.strip().splitlines()]
    assert [(r["metric"], r["k"], r["epoch"]) for r in rows] == [("hr", 1, 2), ("hr", 5, 2)]
    assert rows[0]["value"] <= rows[1]["value"]
    assert main(eval_args) == EXIT_OK
    assert (eval_dir / "metrics.jsonl").read_text() == first

    assert main(["diagnose", "--checkpoint", str(train_dir / "checkpoint_final.npz"), "--out-dir", str(diag_dir)]) == 0
    report = json.loads((diag_dir / "collapse.json").read_text())
    assert report["verdict"] in ("healthy", "collapsed", "partially_collapsed", "shrinking")
    assert report["num_rows"] == 40


def test_eval_rejects_mismatched_checkpoint(tmp_path, write_text):
    small = write_text("small.txt", "u1 i1\nu1 i2\nu2 i2\nu2 i3\n")
    other = write_text("other.txt", "a x\na y\nb y\nb z\nc z\nc x\n")
    assert main(["prepare", "--data", str(other), "--candidates", "0", "--out-dir", str(tmp_path / "split")]) == 0
    assert main([
        "train", "--data", str(small), "--epochs", "1", "--dim", "2", "--batch", "2", "--out-dir", str(tmp_path / "t"),
    ]) == 0
    code = main([
        "eval", "--data", str(other), "--split", str(tmp_path / "split" / "split.json"),
        "--checkpoint", str(tmp_path / "t" / "checkpoint_final.npz"), "--k", "1",
    ])
    assert code == EXIT_CONFIG


@pytest.mark.parametrize("argv", [["synth", "--ablate", "sideways"], ["nonsense"]])
def test_parser_rejects_unknown_choices(argv):
    with pytest.raises(SystemExit):
        execute(argv)


def test_prepared_train_file_reloads_with_its_split(tmp_path, write_text):
    data = write_text("ring.txt", "u1 i1\nu1 i2\nu2 i2\nu2 i3\nu3 i3\nu3 i1\n")
    split_dir = tmp_path / "split"
    assert main(["prepare", "--data", str(data), "--candidates", "0", "--out-dir", str(split_dir)]) == EXIT_OK
    train_file = split_dir / "train.txt"
    assert load_interactions(train_file).item_ids == ("i1", "i2", "i3")
    code = main([
        "train", "--data", str(train_file), "--split", str(split_dir / "split.json"),
        "--epochs", "1", "--dim", "2", "--batch", "2", "--out-dir", str(tmp_path / "train"),
    ])
    assert code == EXIT_OK


def test_undecodable_data_is_a_config_error(tmp_path):
    path = tmp_path / "latin1.txt"
    path.write_bytes(b"u1 i1\nu\xe9 i2\n")
    assert main(["train", "--data", str(path), "--out-dir", str(tmp_path / "run")]) == EXIT_CONFIG


def test_synth_ablate_alone_trains_and_reports(tmp_path):
    out_dir = tmp_path / "synth"
    code, manifest = execute([
        "synth", "--components", "1", "--ablate", "only-cont", "--epochs", "2", "--out-dir", str(out_dir),
    ])
    assert code == EXIT_OK
    assert manifest.config["train"] is True
    report = json.loads((out_dir / "synthetic_report.json").read_text())
    assert list(report["outcomes"]) == ["only-cont"]
    assert report["dataset"]["components"] == 1


def test_synth_defaults_match_the_experiment_defaults():
    synthetic, train = SyntheticConfig(), synthetic_train_config()
    assert SYNTH_DEFAULTS["components"] == synthetic.num_components
    assert SYNTH_DEFAULTS["head_edge_prob"] == synthetic.head_edge_prob
    assert (SYNTH_DEFAULTS["dim"], SYNTH_DEFAULTS["batch"], SYNTH_DEFAULTS["epochs"]) == (
        train.dim, train.batch_size, train.epochs
    )
    assert SYNTH_DEFAULTS["init_scale"] == train.init_scale
    assert (SYNTH_DEFAULTS["lambda1"], SYNTH_DEFAULTS["lambda2"], SYNTH_DEFAULTS["margin_p"]) == (
        train.objective.lambda1, train.objective.lambda2, train.objective.margin_p
    )


def test_synth_four_components_with_default_settings(tmp_path, capsys):
    out_dir = tmp_path / "synth"
    code, _ = execute([
        "synth", "--components", "4", "--ablate", "none", "--ablate", "no-orth", "--out-dir", str(out_dir),
    ])
    assert code == EXIT_OK
    assert "4 components" in capsys.readouterr().out
    outcomes = json.loads((out_dir / "synthetic_report.json").read_text())["outcomes"]
    assert outcomes["none"]["collapse"]["verdict"] == "healthy"
    assert outcomes["none"]["collapse"]["mean_abs_correlation"] < 0.3
    assert outcomes["no-orth"]["collapse"]["mean_abs_correlation"] > 0.9


def test_contrastive_free_training_collapses_synthetic_data(tmp_path):
    code, manifest = execute(["synth", "--out-dir", str(tmp_path / "synth")])
    assert code == EXIT_OK
    train_dir = tmp_path / "train"
    code = main([
        "train", "--data", manifest.artifacts["data"], "--base", "cont", "--lambda2", "0", "--lambda3", "0",
        "--lambda1", "1", "--batch", "16", "--dim", "8", "--out-dir", str(train_dir),
    ])
    assert code == EXIT_OK
    report = json.loads((train_dir / "collapse.json").read_text())
    assert report["verdict"] == "collapsed"


def test_eval_results_ledger_records_each_run_once(tmp_path, write_text):
    data = write_text("pairs.txt", "u1 i1\nu1 i2\nu2 i2\nu2 i3\nu3 i3\nu3 i1\nu3 i4\n")
    assert main(["prepare", "--data", str(data), "--candidates", "1", "--out-dir", str(tmp_path / "split")]) == 0
    assert main([
        "train", "--data", str(data), "--epochs", "1", "--dim", "2", "--batch", "2", "--out-dir", str(tmp_path / "t"),
    ]) == 0
    ledger = tmp_path / "results.jsonl"
    eval_args = [
        "eval", "--data", str(data), "--split", str(tmp_path / "split" / "split.json"),
        "--checkpoint", str(tmp_path / "t" / "checkpoint_final.npz"), "--k", "1", "--k", "2",
        "--results", str(ledger), "--out-dir", str(tmp_path / "eval"),
    ]
    code, manifest = execute(eval_args)
    assert code == EXIT_OK
    assert manifest.artifacts["results"] == str(ledger)
    assert main(eval_args) == EXIT_OK
    rows = pd.read_json(ledger, lines=True, dtype={"run_id": str})
    assert len(rows) == 2
    assert set(rows["run_id"]) == {manifest.run_id}
    assert sorted(rows["k"]) == [1, 2]

    other = eval_args[:-2] + ["--mapping", "cosine", "--out-dir", str(tmp_path / "eval2")]
    assert main(other) == EXIT_OK
    assert len(pd.read_json(ledger, lines=True)) == 4
