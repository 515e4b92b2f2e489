import numpy as np
import pytest

from oneclass_rec.base import ConfigError, EmptyDatasetError, MappingError
from oneclass_rec.config import ObjectiveConfig, TrainConfig
from oneclass_rec.encoder import EmbeddingModel, init_model
from oneclass_rec.evaluation import (
    EvalProtocol,
    aggregate_user_table,
    append_metrics_jsonl,
    evaluate_run,
    hit_ratio_at_k,
    load_metrics_jsonl,
    recall_at_k,
    write_metrics_jsonl,
)
from oneclass_rec.interactions import ColdSplit, InteractionDataset, cold_start_split, leave_one_out_split
from oneclass_rec.trainer import fit
from tests.conftest import random_dataset


@pytest.fixture
def warm_split(warm_ds):
    return leave_one_out_split(warm_ds, candidates_per_case=99, rng_seed=0)


def test_k_equal_to_candidate_count_always_hits(warm_split):
    model = init_model(50, 120, 8, rng_seed=1)
    result = hit_ratio_at_k(model, warm_split, 100)
    assert result.value == 1.0
    assert result.successes == result.num_cases == warm_split.num_cases


def test_held_out_with_unique_max_score_is_a_hit(warm_split):
    user_table = np.zeros((50, 120))
    user_table[warm_split.users, warm_split.held_out] = 1.0
    model = EmbeddingModel(user_table, np.eye(120))
    assert hit_ratio_at_k(model, warm_split, 1).value == 1.0


def test_ties_break_by_item_index(warm_split):
    model = EmbeddingModel(np.zeros((50, 3)), np.zeros((120, 3)))
    positions = np.argmax(warm_split.candidates == warm_split.held_out[:, None], axis=1)
    for k in (1, 10, 50):
        assert hit_ratio_at_k(model, warm_split, k).value == pytest.approx(np.mean(positions < k))


def test_hit_ratio_monotone_and_scale_invariant(warm_split):
    model = init_model(50, 120, 8, rng_seed=2)
    hr5 = hit_ratio_at_k(model, warm_split, 5).value
    hr10 = hit_ratio_at_k(model, warm_split, 10).value
    assert hr5 <= hr10
    scaled = EmbeddingModel(3.0 * model.user_table, 3.0 * model.item_table)
    assert hit_ratio_at_k(scaled, warm_split, 10).value == hr10
    assert hit_ratio_at_k(model, warm_split, 10, chunk_size=7).value == hr10


def test_k_out_of_range(warm_split):
    model = init_model(50, 120, 4, rng_seed=0)
    with pytest.raises(ConfigError):
        hit_ratio_at_k(model, warm_split, 101)
    with pytest.raises(ConfigError):
        hit_ratio_at_k(model, warm_split, 0)


def test_random_model_hit_ratio_is_chance_level():
    ds = random_dataset(num_users=4000, num_items=200, per_user=2, seed=11)
    split = leave_one_out_split(ds, candidates_per_case=99, rng_seed=11)
    model = init_model(4000, 200, 16, rng_seed=12)
    result = hit_ratio_at_k(model, split, 10)
    assert result.num_cases == 4000
    assert result.value == pytest.approx(0.10, abs=0.02)


def empty_dataset(m, n):
    return InteractionDataset(
        num_users=m,
        num_items=n,
        pairs=np.empty((0, 2), dtype=np.int64),
        user_ids=tuple(str(j) for j in range(m)),
        item_ids=tuple(str(k) for k in range(n)),
    )


def test_random_model_recall_matches_hypergeometric_mean():
    rng = np.random.default_rng(5)
    m, n = 1000, 800
    truth = {k: np.sort(rng.choice(m, size=10, replace=False)) for k in range(n)}
    split = ColdSplit(
        train=empty_dataset(m, n),
        cold_items=np.arange(n),
        ground_truth=truth,
        candidate_users={k: np.arange(m) for k in range(n)},
        seed=5,
        candidate_pool=m,
    )
    model = init_model(m, n, 16, rng_seed=6)
    result = recall_at_k(model, split, 50)
    assert result.value == pytest.approx(0.05, abs=0.01)


def test_recall_examples(warm_ds):
    split = cold_start_split(warm_ds, cold_fraction=0.3, candidate_pool=10, rng_seed=3)
    model = init_model(50, 120, 6, rng_seed=3)
    assert recall_at_k(model, split, 50).value == 1.0

    item = next(iter(split.ground_truth))
    user = int(split.ground_truth[item][0])
    single = ColdSplit(
        train=split.train,
        cold_items=np.array([item]),
        ground_truth={item: np.array([user])},
        candidate_users={item: split.candidate_users[item]},
        seed=3,
        candidate_pool=10,
    )
    user_table = np.zeros((50, 2))
    user_table[user] = [1.0, 0.0]
    item_table = np.zeros((120, 2))
    item_table[item] = [1.0, 0.0]
    assert recall_at_k(EmbeddingModel(user_table, item_table), single, 1).value == 1.0


def test_recall_excludes_empty_ground_truth(warm_ds):
    split = ColdSplit(
        train=warm_ds,
        cold_items=np.array([0]),
        ground_truth={},
        candidate_users={},
        seed=0,
        candidate_pool=5,
    )
    with pytest.raises(EmptyDatasetError):
        recall_at_k(init_model(50, 120, 3), split, 5)


def test_aggregate_users_average_history_with_fallback():
    ds = InteractionDataset(
        num_users=3,
        num_items=4,
        pairs=np.array([[0, 1], [0, 3], [1, 2]]),
        user_ids=("a", "b", "c"),
        item_ids=("w", "x", "y", "z"),
    )
    model = init_model(3, 4, 2, rng_seed=0)
    reps = aggregate_user_table(model, ds)
    assert reps[0] == pytest.approx(model.item_table[[1, 3]].mean(axis=0))
    assert reps[1] == pytest.approx(model.item_table[2])
    assert reps[2] == pytest.approx(model.user_table[2])


def test_recall_in_aggregate_mode(warm_ds):
    split = cold_start_split(warm_ds, cold_fraction=0.3, candidate_pool=20, rng_seed=1)
    model = init_model(50, 120, 6, rng_seed=1)
    result = recall_at_k(model, split, 5, user_mode="aggregate")
    assert 0.0 <= result.value <= 1.0
    with pytest.raises(ConfigError):
        recall_at_k(model, split, 5, user_mode="median")


def test_evaluate_run_over_snapshots(warm_split):
    config = TrainConfig(epochs=2, dim=4, batch_size=32, snapshot_every=1, objective=ObjectiveConfig())
    state = fit(warm_split.train, config)
    protocol = EvalProtocol(kind="warm", ks=(5, 10), include_snapshots=True)
    results = evaluate_run(state, warm_split, protocol)
    assert [(r.epoch, r.k) for r in results] == [(1, 5), (1, 10), (2, 5), (2, 10)]
    again = evaluate_run(state, warm_split, protocol)
    assert [r.value for r in again] == [r.value for r in results]
    assert len(state.metrics) == 8
    final = evaluate_run(state, warm_split, EvalProtocol(ks=(5, 10)))
    assert final[0].value <= final[1].value


def test_protocol_validation():
    with pytest.raises(ConfigError):
        EvalProtocol(kind="lukewarm").validate()
    with pytest.raises(ConfigError):
        EvalProtocol(ks=(0,)).validate()


def test_metrics_jsonl_write_and_append(tmp_path, warm_split):
    model = init_model(50, 120, 4, rng_seed=0)
    results = [hit_ratio_at_k(model, warm_split, k) for k in (5, 10)]
    path = tmp_path / "metrics.jsonl"
    write_metrics_jsonl(results, path, "run-a")
    first = path.read_text()
    write_metrics_jsonl(results, path, "run-a")
    assert path.read_text() == first
    append_metrics_jsonl(results[:1], path, "run-b")
    frame = load_metrics_jsonl(path)
    assert frame["run_id"].tolist() == ["run-a", "run-a", "run-b"]
    assert frame["k"].tolist() == [5, 10, 5]
    assert frame["value"].iloc[1] == pytest.approx(results[1].value)


def test_cosine_with_zero_rows_fails_for_both_metrics(warm_ds, warm_split):
    model = EmbeddingModel(np.zeros((50, 3)), np.ones((120, 3)))
    with pytest.raises(MappingError):
        hit_ratio_at_k(model, warm_split, 10, mapping="cosine")
    cold = cold_start_split(warm_ds, cold_fraction=0.3, candidate_pool=10, rng_seed=3)
    with pytest.raises(MappingError):
        recall_at_k(model, cold, 5, mapping="cosine")
    assert 0.0 <= hit_ratio_at_k(model, warm_split, 10, mapping="dot").value <= 1.0
