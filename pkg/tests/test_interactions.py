import numpy as np
import pytest

from oneclass_rec.base import (
    ConfigError,
    DataFileNotFoundError,
    DataFormatError,
    EmptyDatasetError,
    GenerationError,
    SamplingError,
)
from oneclass_rec.interactions import (
    Batch,
    ColdSplit,
    WarmSplit,
    build_dataset,
    cold_start_split,
    component_count,
    gen_synthetic_components,
    leave_one_out_split,
    load_interactions,
    load_item_features,
    load_split,
    make_batches,
    sample_negatives,
    sample_unobserved,
    save_component_labels,
    save_interactions,
    save_split,
    subsample_pairs,
)
from tests.conftest import random_dataset


def test_load_pair_list_skips_comments_and_duplicates(write_text):
    path = write_text("pairs.txt", "# header\nu1 i1\nu1 i1 4.0\n\nu2 i2 1700000000\n")
    ds = load_interactions(path)
    assert (ds.num_users, ds.num_items, ds.num_pairs) == (2, 2, 2)
    assert ds.has_pair(ds.user_index["u1"], ds.item_index["i1"])
    assert not ds.has_pair(ds.user_index["u1"], ds.item_index["i2"])


def test_malformed_line_reports_line_number(write_text):
    path = write_text("bad.txt", "u1 i1\nlonely\n")
    with pytest.raises(DataFormatError) as excinfo:
        load_interactions(path)
    assert excinfo.value.line == 2


def test_empty_and_missing_files(write_text, tmp_path):
    with pytest.raises(EmptyDatasetError):
        load_interactions(write_text("empty.txt", "# nothing\n\n"))
    with pytest.raises(DataFileNotFoundError):
        load_interactions(tmp_path / "absent.txt")


def test_matrix_rows_keeps_users_without_items(write_text):
    ds = load_interactions(write_text("rows.txt", "10: 1,2\n2:\n"), fmt="matrix-rows")
    assert ds.num_users == 2
    assert ds.user_ids == ("2", "10")
    assert ds.num_pairs == 2
    assert len(ds.user_items(ds.user_index["2"])) == 0


def test_unknown_format_rejected(write_text):
    with pytest.raises(ConfigError):
        load_interactions(write_text("x.txt", "a b\n"), fmt="csv")


def test_save_then_load_preserves_index_structure(tmp_path, warm_ds):
    path = tmp_path / "out.txt"
    save_interactions(warm_ds, path)
    again = load_interactions(path)
    assert again.user_ids == warm_ds.user_ids
    assert again.item_ids == warm_ds.item_ids
    assert np.array_equal(again.pairs, warm_ds.pairs)


@pytest.mark.parametrize("fmt", ["pair-list", "matrix-rows"])
def test_round_trip_keeps_pairless_users_and_items(tmp_path, write_text, fmt):
    ds = load_interactions(write_text("rows.txt", "u1: i1,i2\nu2:\nu3: i2\n"), fmt="matrix-rows")
    ds = build_dataset(
        [(ds.user_ids[j], ds.item_ids[k]) for j, k in ds.pairs], extra_users=ds.user_ids, extra_items=["i9"]
    )
    assert ds.user_ids == ("u1", "u2", "u3")
    save_interactions(ds, tmp_path / "out.txt", fmt=fmt)
    again = load_interactions(tmp_path / "out.txt", fmt=fmt)
    assert again.user_ids == ("u1", "u2", "u3")
    assert again.item_ids == ("i1", "i2", "i9")
    assert np.array_equal(again.pairs, ds.pairs)


def test_invalid_utf8_reports_line_number(tmp_path):
    path = tmp_path / "binary.txt"
    path.write_bytes(b"u1 i1\nu2 \xff\xfe\n")
    with pytest.raises(DataFormatError) as excinfo:
        load_interactions(path)
    assert excinfo.value.line == 2


def test_csr_views_agree(tiny_ds):
    j = tiny_ds.user_index["u1"]
    items = [tiny_ds.item_ids[k] for k in tiny_ds.user_items(j)]
    assert items == ["i1", "i2"]
    k = tiny_ds.item_index["i2"]
    assert sorted(tiny_ds.user_ids[u] for u in tiny_ds.item_users(k)) == ["u1", "u2"]
    assert tiny_ds.user_degree.sum() == tiny_ds.item_degree.sum() == tiny_ds.num_pairs


def test_sample_unobserved_draws_distinct_unobserved(warm_ds):
    rng = np.random.default_rng(0)
    drawn = sample_unobserved(warm_ds, ("user", 3), 50, rng)
    assert len(set(drawn.tolist())) == 50
    assert not np.isin(drawn, warm_ds.user_items(3)).any()


def test_sample_unobserved_pool_too_small(tiny_ds):
    rng = np.random.default_rng(0)
    j = tiny_ds.user_index["u1"]
    assert len(sample_unobserved(tiny_ds, ("user", j), 1, rng)) == 1
    with pytest.raises(SamplingError):
        sample_unobserved(tiny_ds, ("user", j), 2, rng)


def test_sample_negatives_avoid_observed(warm_ds):
    rng = np.random.default_rng(5)
    batch = Batch.from_pairs(warm_ds.pairs[:20])
    negatives = sample_negatives(warm_ds, batch, 4, rng)
    assert negatives.shape == (20, 4)
    for (j, _), row in zip(batch.pairs, negatives):
        assert not np.isin(row, warm_ds.user_items(int(j))).any()


def test_leave_one_out_split_contract(warm_ds):
    split = leave_one_out_split(warm_ds, candidates_per_case=99, rng_seed=7)
    assert isinstance(split, WarmSplit)
    assert split.num_cases == warm_ds.num_users
    assert split.candidates.shape == (warm_ds.num_users, 100)
    assert split.train.num_pairs == warm_ds.num_pairs - split.num_cases
    for j, held, cands in split.test_cases:
        assert held in cands
        assert warm_ds.has_pair(j, held)
        assert not split.train.has_pair(j, held)
        others = [c for c in cands if c != held]
        assert not any(warm_ds.has_pair(j, c) for c in others)


def test_leave_one_out_is_deterministic(warm_ds):
    a = leave_one_out_split(warm_ds, 20, rng_seed=3)
    b = leave_one_out_split(warm_ds, 20, rng_seed=3)
    assert np.array_equal(a.candidates, b.candidates)
    assert np.array_equal(a.held_out, b.held_out)


def test_leave_one_out_candidate_deficiency():
    ds = random_dataset(num_users=4, num_items=5, per_user=3, seed=0)
    assert leave_one_out_split(ds, candidates_per_case=2).candidates.shape == (4, 3)
    with pytest.raises(SamplingError):
        leave_one_out_split(ds, candidates_per_case=3)


def test_single_interaction_users_stay_in_train(tiny_ds):
    split = leave_one_out_split(tiny_ds, candidates_per_case=0)
    assert tiny_ds.user_index["u2"] not in split.users.tolist()
    assert split.train.has_pair(tiny_ds.user_index["u2"], tiny_ds.item_index["i2"])


def test_cold_start_split_removes_cold_items(warm_ds):
    split = cold_start_split(warm_ds, cold_fraction=0.2, candidate_pool=30, rng_seed=2)
    assert isinstance(split, ColdSplit)
    assert split.train.num_items == warm_ds.num_items
    assert not np.isin(split.train.pairs[:, 1], split.cold_items).any()
    for k, truth in split.ground_truth.items():
        assert np.array_equal(truth, warm_ds.item_users(k))
        assert np.isin(truth, split.candidate_users[k]).all()
        assert len(split.candidate_users[k]) == len(truth) + min(30, warm_ds.num_users - len(truth))


def test_split_round_trip(tmp_path, warm_ds):
    warm = leave_one_out_split(warm_ds, 10, rng_seed=1)
    save_split(warm, tmp_path / "warm.json")
    loaded = load_split(tmp_path / "warm.json", warm_ds)
    assert np.array_equal(loaded.candidates, warm.candidates)
    assert np.array_equal(loaded.train.pairs, warm.train.pairs)

    cold = cold_start_split(warm_ds, cold_items=[0, 1, 2], candidate_pool=5, rng_seed=1)
    save_split(cold, tmp_path / "cold.json")
    loaded = load_split(tmp_path / "cold.json", warm_ds)
    assert loaded.cold_items.tolist() == [0, 1, 2]
    assert loaded.ground_truth.keys() == cold.ground_truth.keys()


def test_make_batches_cover_every_pair_once(warm_ds):
    batches = make_batches(warm_ds, 16, np.random.default_rng(0))
    stacked = np.vstack([b.pairs for b in batches])
    assert len(stacked) == warm_ds.num_pairs
    assert len(np.unique(stacked, axis=0)) == warm_ds.num_pairs
    assert all(b.size == 16 for b in batches[:-1])
    with pytest.raises(ConfigError):
        make_batches(warm_ds, 0, np.random.default_rng(0))


def test_batch_unique_rows():
    batch = Batch.from_pairs([(0, 1), (0, 2), (3, 1)])
    assert batch.unique_users.tolist() == [0, 3]
    assert batch.unique_items.tolist() == [1, 2]
    assert batch.block_size == 4


@pytest.mark.parametrize("components", [1, 3])
def test_synthetic_components_are_disjoint(components):
    ds = gen_synthetic_components(components, 10, 12, 0.4, rng_seed=4)
    assert component_count(ds) == components
    assert np.array_equal(ds.user_labels[ds.pairs[:, 0]], ds.item_labels[ds.pairs[:, 1]])


def test_synthetic_generator_errors():
    with pytest.raises(ConfigError):
        gen_synthetic_components(2, 10, 10, 0.0)
    with pytest.raises(GenerationError):
        gen_synthetic_components(1, 10, 10, 0.001, rng_seed=0, max_retries=2)


def test_component_labels_file(tmp_path):
    ds = gen_synthetic_components(2, 5, 5, 0.6, rng_seed=0)
    save_component_labels(ds, tmp_path / "labels.csv")
    lines = (tmp_path / "labels.csv").read_text().strip().splitlines()
    assert lines[0] == "kind,id,component"
    assert len(lines) == 1 + ds.num_users + ds.num_items
    with pytest.raises(ConfigError):
        save_component_labels(build_dataset([("a", "b")]), tmp_path / "none.csv")


def test_load_item_features_from_csv(tiny_ds, write_text):
    path = write_text("features.csv", "i2,1.0,2.0\ni1,3.0,4.0\nzzz,9.0,9.0\n")
    features = load_item_features(path, tiny_ds)
    assert features.shape == (3, 2)
    assert features[tiny_ds.item_index["i1"]].tolist() == [3.0, 4.0]
    assert features[tiny_ds.item_index["i3"]].tolist() == [0.0, 0.0]


def test_load_item_features_row_mismatch(tiny_ds, tmp_path):
    np.save(tmp_path / "f.npy", np.ones((2, 4)))
    with pytest.raises(DataFormatError):
        load_item_features(tmp_path / "f.npy", tiny_ds)


def test_sample_unobserved_is_uniform():
    ds = random_dataset(num_users=1, num_items=11, per_user=1, seed=0)
    rng = np.random.default_rng(1)
    draws = np.concatenate([sample_unobserved(ds, ("user", 0), 1, rng) for _ in range(10000)])
    pool = np.setdiff1d(np.arange(11), ds.user_items(0))
    freq = np.bincount(draws, minlength=11)[pool] / len(draws)
    assert len(pool) == 10
    assert np.allclose(freq, 0.1, atol=0.02)
    assert len(sample_unobserved(ds, ("user", 0), 0, rng)) == 0


def test_batch_sizes_partition_pairs():
    ds = random_dataset(num_users=5, num_items=4, per_user=2, seed=2)
    sizes = [b.size for b in make_batches(ds, 3, np.random.default_rng(0))]
    assert sizes == [3, 3, 3, 1]
    assert [b.size for b in make_batches(ds, 50, np.random.default_rng(0))] == [10]


def test_head_component_uses_its_own_density():
    ds = gen_synthetic_components(3, 8, 8, 0.3, rng_seed=1, head_edge_prob=1.0)
    assert component_count(ds) == 3
    head_pairs = np.count_nonzero(ds.user_labels[ds.pairs[:, 0]] == 0)
    assert head_pairs == 64
    assert ds.num_pairs - head_pairs < 2 * 64
    with pytest.raises(ConfigError):
        gen_synthetic_components(2, 5, 5, 0.5, head_edge_prob=1.5)


def test_subsample_pairs_keeps_id_space(warm_ds):
    half = subsample_pairs(warm_ds, 0.5, rng_seed=4)
    assert half.num_pairs == round(0.5 * warm_ds.num_pairs)
    assert (half.num_users, half.num_items) == (warm_ds.num_users, warm_ds.num_items)
    assert all(warm_ds.has_pair(int(j), int(k)) for j, k in half.pairs)
    assert np.array_equal(subsample_pairs(warm_ds, 0.5, rng_seed=4).pairs, half.pairs)
    assert subsample_pairs(warm_ds, 1.0) is warm_ds
    with pytest.raises(ConfigError):
        subsample_pairs(warm_ds, 0.0)
