import json

import pytest

from oneclass_rec.base import ConfigError
from oneclass_rec.config import Ablation
from oneclass_rec.diagnostics import Verdict
from oneclass_rec.experiments import (
    SyntheticConfig,
    run_seed_sweep,
    run_size_sweep,
    run_synthetic_ablation,
    summarize_seed_sweep,
    synthetic_dataset,
    synthetic_train_config,
)


def test_synthetic_config_validation():
    assert SyntheticConfig().validate().num_components == 4
    with pytest.raises(ConfigError):
        SyntheticConfig(num_components=0).validate()
    with pytest.raises(ConfigError):
        SyntheticConfig(edge_prob=1.5).validate()


def test_synthetic_train_defaults_and_overrides():
    config = synthetic_train_config(epochs=3)
    assert (config.epochs, config.dim, config.batch_size, config.init_scale) == (3, 2, 16, 1e-4)
    objective = config.objective
    assert (objective.lambda1, objective.lambda2, objective.lambda3, objective.margin_p) == (2.0, 10.0, 1.0, 0.05)
    assert SyntheticConfig().head_edge_prob == 1.0
    with pytest.raises(ConfigError):
        SyntheticConfig(head_edge_prob=0.0).validate()


def test_ablations_share_data_and_report_verdicts(tmp_path):
    synthetic = SyntheticConfig(num_components=2, users_per=10, items_per=10, edge_prob=0.5, seed=3)
    report = run_synthetic_ablation(
        synthetic,
        ablations=[Ablation.NONE, "no-orth", "only-cont"],
        train=synthetic_train_config(epochs=3),
        evaluate=True,
    )
    assert list(report.outcomes) == ["none", "no-orth", "only-cont"]
    assert report.dataset["num_users"] == 20
    assert report.dataset["components"] == 2
    valid = {v.value for v in Verdict}
    for outcome in report.outcomes.values():
        assert outcome.epochs == 3
        assert outcome.collapse.verdict in valid
        assert 0.0 <= outcome.hit_ratio <= 1.0
    assert set(report.verdicts()) == set(report.outcomes)

    report.write_json(tmp_path / "report.json")
    stored = json.loads((tmp_path / "report.json").read_text())
    assert stored["synthetic"]["num_components"] == 2
    assert stored["outcomes"]["only-cont"]["ablation"] == "only-cont"


def test_ablation_runs_are_reproducible():
    synthetic = SyntheticConfig(num_components=1, users_per=8, items_per=8, edge_prob=0.6)
    train = synthetic_train_config(epochs=2)
    a = run_synthetic_ablation(synthetic, train=train)
    b = run_synthetic_ablation(synthetic, train=train)
    assert a.outcomes["none"].final_loss == b.outcomes["none"].final_loss
    assert a.outcomes["none"].hit_ratio is None


def test_seed_sweep_reports_every_seed_and_ablation():
    synthetic = SyntheticConfig(num_components=2, users_per=8, items_per=8, edge_prob=0.5)
    table = run_seed_sweep(synthetic, seeds=[0, 1], train=synthetic_train_config(epochs=2), k=5)
    assert len(table) == 6
    assert set(table["seed"]) == {0, 1}
    assert table["hit_ratio"].between(0.0, 1.0).all()
    summary = summarize_seed_sweep(table)
    assert summary["ablation"].tolist() == ["none", "no-orth", "only-cont"]
    assert summary["count"].tolist() == [2, 2, 2]
    with pytest.raises(ConfigError):
        run_seed_sweep(synthetic, seeds=[])


def test_size_sweep_grows_training_pairs_for_each_method():
    ds = synthetic_dataset(SyntheticConfig(num_components=2, users_per=10, items_per=10, edge_prob=0.5, seed=1))
    table = run_size_sweep(ds, fractions=(0.5, 1.0), negatives=(1, 3), train=synthetic_train_config(epochs=2), k=5)
    assert table["method"].unique().tolist() == ["cont+reg", "contrastive-neg1", "contrastive-neg3"]
    assert len(table) == 6
    sizes = table.groupby("fraction")["num_pairs"].first()
    assert sizes[0.5] < sizes[1.0]
    assert table["hit_ratio"].between(0.0, 1.0).all()
