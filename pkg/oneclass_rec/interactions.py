"""
交互数据
读取隐式反馈数据，构建稀疏结构、训练/测试划分、批次、负样本与合成连通分量图
"""

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .base import (
    ConfigError,
    DataFileNotFoundError,
    DataFormatError,
    EmptyDatasetError,
    GenerationError,
    IndexOutOfRangeError,
    SamplingError,
    ToolkitError,
)

logger = logging.getLogger(__name__)

FORMATS = ("pair-list", "matrix-rows")

Anchor = Tuple[str, int]


def _sorted_ids(ids: Iterable[str]) -> List[str]:
    """外部ID排序：全部为整数时按数值排序"""
    unique = set(ids)
    try:
        return sorted(unique, key=int)
    except ValueError:
        return sorted(unique)


def _as_pair_array(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    return arr.reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class InteractionDataset:
    """相似对集合 S+ 及其索引结构"""
    num_users: int
    num_items: int
    pairs: np.ndarray
    user_ids: Tuple[str, ...]
    item_ids: Tuple[str, ...]
    user_labels: Optional[np.ndarray] = None
    item_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pairs = _as_pair_array(self.pairs)
        if len(self.user_ids) != self.num_users or len(self.item_ids) != self.num_items:
            raise ToolkitError("id tables do not match dataset shape", code=400)
        if len(pairs):
            if pairs.min() < 0 or pairs[:, 0].max() >= self.num_users or pairs[:, 1].max() >= self.num_items:
                raise IndexOutOfRangeError("pair index outside the user/item range")
            unique = np.unique(pairs, axis=0)
            if len(unique) != len(pairs):
                raise ToolkitError("duplicate (user, item) pairs", code=400)
            pairs = unique
        pairs = pairs.copy()
        pairs.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)

    @property
    def num_pairs(self) -> int:
        return int(len(self.pairs))

    @property
    def sparsity(self) -> float:
        return 1.0 - self.num_pairs / float(self.num_users * self.num_items)

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        """用户 × 物品 CSR 矩阵，取值为 1"""
        data = np.ones(self.num_pairs, dtype=np.float64)
        mat = sparse.csr_matrix(
            (data, (self.pairs[:, 0], self.pairs[:, 1])),
            shape=(self.num_users, self.num_items),
        )
        mat.sort_indices()
        return mat

    @cached_property
    def item_major(self) -> sparse.csr_matrix:
        mat = self.matrix.T.tocsr()
        mat.sort_indices()
        return mat

    @cached_property
    def user_degree(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    @cached_property
    def item_degree(self) -> np.ndarray:
        return np.diff(self.item_major.indptr)

    @cached_property
    def user_index(self) -> Dict[str, int]:
        return {uid: j for j, uid in enumerate(self.user_ids)}

    @cached_property
    def item_index(self) -> Dict[str, int]:
        return {iid: k for k, iid in enumerate(self.item_ids)}

    def user_items(self, j: int) -> np.ndarray:
        """用户 j 交互过的物品（升序）"""
        if not 0 <= j < self.num_users:
            raise IndexOutOfRangeError(f"user index {j} out of range")
        mat = self.matrix
        return mat.indices[mat.indptr[j]:mat.indptr[j + 1]].astype(np.int64)

    def item_users(self, k: int) -> np.ndarray:
        """与物品 k 交互过的用户（升序）"""
        if not 0 <= k < self.num_items:
            raise IndexOutOfRangeError(f"item index {k} out of range")
        mat = self.item_major
        return mat.indices[mat.indptr[k]:mat.indptr[k + 1]].astype(np.int64)

    def has_pair(self, j: int, k: int) -> bool:
        items = self.user_items(j)
        pos = np.searchsorted(items, k)
        return bool(pos < len(items) and items[pos] == k)

    def with_pairs(self, pairs) -> "InteractionDataset":
        """保留索引空间，替换相似对"""
        return InteractionDataset(
            num_users=self.num_users,
            num_items=self.num_items,
            pairs=_as_pair_array(pairs),
            user_ids=self.user_ids,
            item_ids=self.item_ids,
            user_labels=self.user_labels,
            item_labels=self.item_labels,
        )

    def describe(self) -> Dict[str, float]:
        return {
            "num_users": self.num_users,
            "num_items": self.num_items,
            "num_pairs": self.num_pairs,
            "sparsity": self.sparsity,
        }


@dataclass(frozen=True, eq=False)
class Batch:
    """一个小批次的相似对"""
    pairs: np.ndarray
    unique_users: np.ndarray
    unique_items: np.ndarray
    user_pos: np.ndarray
    item_pos: np.ndarray

    @classmethod
    def from_pairs(cls, pairs) -> "Batch":
        pairs = _as_pair_array(pairs)
        unique_users, user_pos = np.unique(pairs[:, 0], return_inverse=True)
        unique_items, item_pos = np.unique(pairs[:, 1], return_inverse=True)
        return cls(
            pairs=pairs,
            unique_users=unique_users,
            unique_items=unique_items,
            user_pos=user_pos.reshape(-1),
            item_pos=item_pos.reshape(-1),
        )

    @property
    def size(self) -> int:
        return int(len(self.pairs))

    @property
    def block_size(self) -> int:
        return int(len(self.unique_users) + len(self.unique_items))


@dataclass(frozen=True, eq=False)
class WarmSplit:
    """留一法划分：每个合格用户留出一个物品"""
    train: InteractionDataset
    users: np.ndarray
    held_out: np.ndarray
    candidates: np.ndarray
    seed: int
    candidates_per_case: int

    @property
    def num_cases(self) -> int:
        return int(len(self.users))

    @property
    def test_cases(self) -> List[Tuple[int, int, List[int]]]:
        return [
            (int(j), int(k), [int(c) for c in cands])
            for j, k, cands in zip(self.users, self.held_out, self.candidates)
        ]


@dataclass(frozen=True, eq=False)
class ColdSplit:
    """冷启动划分：冷物品从训练集中移除"""
    train: InteractionDataset
    cold_items: np.ndarray
    ground_truth: Dict[int, np.ndarray]
    candidate_users: Dict[int, np.ndarray]
    seed: int
    candidate_pool: int

    @property
    def num_cases(self) -> int:
        return len(self.ground_truth)


def build_dataset(
    raw_pairs: Iterable[Tuple[str, str]],
    extra_users: Sequence[str] = (),
    extra_items: Sequence[str] = (),
) -> InteractionDataset:
    """由外部ID对构建数据集：去重，按排序后的ID分配索引"""
    raw_pairs = list(raw_pairs)
    user_ids = _sorted_ids([u for u, _ in raw_pairs] + list(extra_users))
    item_ids = _sorted_ids([i for _, i in raw_pairs] + list(extra_items))
    user_index = {uid: j for j, uid in enumerate(user_ids)}
    item_index = {iid: k for k, iid in enumerate(item_ids)}
    pairs = _as_pair_array([(user_index[u], item_index[i]) for u, i in raw_pairs])
    if len(pairs):
        pairs = np.unique(pairs, axis=0)
    return InteractionDataset(
        num_users=len(user_ids),
        num_items=len(item_ids),
        pairs=pairs,
        user_ids=tuple(user_ids),
        item_ids=tuple(item_ids),
    )


def _id_directive(text: str) -> Optional[Tuple[str, str]]:
    """解析 `# user <id>` / `# item <id>` 行，用于保留无交互的用户或物品"""
    tokens = text.lstrip("#").split()
    if len(tokens) == 2 and tokens[0] in ("user", "item"):
        return tokens[0], tokens[1]
    return None


def load_interactions(path: Union[str, Path], fmt: str = "pair-list") -> InteractionDataset:
    """读取交互文件（pair-list 或 matrix-rows 格式）"""
    if fmt not in FORMATS:
        raise ConfigError(f"Unknown interaction format: {fmt}")
    path = Path(path)
    if not path.is_file():
        raise DataFileNotFoundError(f"Interaction file not found: {path}", data={"path": str(path)})

    raw: List[Tuple[str, str]] = []
    extra_users: List[str] = []
    extra_items: List[str] = []
    with path.open("rb") as fh:
        for lineno, encoded in enumerate(fh, start=1):
            try:
                line = encoded.decode("utf-8")
            except UnicodeDecodeError as e:
                raise DataFormatError(
                    f"Line {lineno}: invalid UTF-8 ({e.reason})", line=lineno, path=str(path)
                ) from e
            stripped = line.strip()
            if stripped.startswith("#"):
                directive = _id_directive(stripped)
                if directive is not None:
                    (extra_users if directive[0] == "user" else extra_items).append(directive[1])
                continue
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if fmt == "pair-list":
                tokens = text.split()
                # 额外列（评分、时间戳）忽略，取值二值化为 1
                if len(tokens) < 2:
                    raise DataFormatError(
                        f"Line {lineno}: expected 'user_id item_id'", line=lineno, path=str(path)
                    )
                raw.append((tokens[0], tokens[1]))
            else:
                user, sep, rest = text.partition(":")
                user = user.strip()
                if not sep or not user or any(ch.isspace() for ch in user):
                    raise DataFormatError(
                        f"Line {lineno}: expected 'user_id: i1,i2,...'", line=lineno, path=str(path)
                    )
                extra_users.append(user)
                for token in rest.split(","):
                    item = token.strip()
                    if not item:
                        continue
                    if any(ch.isspace() for ch in item):
                        raise DataFormatError(
                            f"Line {lineno}: malformed item id '{item}'", line=lineno, path=str(path)
                        )
                    raw.append((user, item))

    if not raw:
        raise EmptyDatasetError(f"No interactions in {path}", data={"path": str(path)})

    ds = build_dataset(raw, extra_users=extra_users, extra_items=extra_items)
    duplicates = len(raw) - ds.num_pairs
    logger.info(
        f"Loaded {path.name}: {ds.num_users} users, {ds.num_items} items, "
        f"{ds.num_pairs} pairs ({duplicates} duplicates dropped), sparsity {ds.sparsity:.4%}"
    )
    return ds


def save_interactions(ds: InteractionDataset, path: Union[str, Path], fmt: str = "pair-list"):
    """写出交互文件；无交互的用户和物品写成 `# user <id>` / `# item <id>` 行"""
    if fmt not in FORMATS:
        raise ConfigError(f"Unknown interaction format: {fmt}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# users={ds.num_users} items={ds.num_items} pairs={ds.num_pairs}\n")
        for j in np.flatnonzero(ds.user_degree == 0):
            fh.write(f"# user {ds.user_ids[j]}\n")
        for k in np.flatnonzero(ds.item_degree == 0):
            fh.write(f"# item {ds.item_ids[k]}\n")
        if fmt == "pair-list":
            for j, k in ds.pairs:
                fh.write(f"{ds.user_ids[j]}\t{ds.item_ids[k]}\n")
        else:
            for j in range(ds.num_users):
                items = ",".join(ds.item_ids[k] for k in ds.user_items(j))
                fh.write(f"{ds.user_ids[j]}: {items}\n")


def sample_unobserved(ds: InteractionDataset, anchor: Anchor, count: int, rng: np.random.Generator) -> np.ndarray:
    """对锚点（用户或物品）无放回均匀采样未观测的对端索引"""
    kind, index = anchor
    if kind == "user":
        observed, universe = ds.user_items(index), ds.num_items
    elif kind == "item":
        observed, universe = ds.item_users(index), ds.num_users
    else:
        raise ConfigError(f"Unknown anchor kind: {kind}")
    if count < 0:
        raise ConfigError("count must be non-negative")
    pool = universe - len(observed)
    if count > pool:
        raise SamplingError(
            f"Cannot sample {count} unobserved counterparts for {kind} {index}: only {pool} available",
            data={"anchor": kind, "index": int(index), "pool": int(pool)},
        )
    if count == 0:
        return np.empty(0, dtype=np.int64)
    complement = np.setdiff1d(np.arange(universe, dtype=np.int64), observed, assume_unique=True)
    return rng.choice(complement, size=count, replace=False).astype(np.int64)


def sample_negatives(
    ds: InteractionDataset, batch: Batch, per_pair: int, rng: np.random.Generator
) -> np.ndarray:
    """为批次中每个相似对采样 per_pair 个未观测物品（基线训练用）"""
    out = np.empty((batch.size, per_pair), dtype=np.int64)
    for row, j in enumerate(batch.pairs[:, 0]):
        observed = ds.user_items(int(j))
        if len(observed) >= ds.num_items:
            raise SamplingError(f"User {j} has no unobserved items", data={"user": int(j)})
        draws = rng.integers(ds.num_items, size=2 * per_pair + 4)
        if len(observed):
            pos = np.minimum(np.searchsorted(observed, draws), len(observed) - 1)
            hit = observed[pos] == draws
        else:
            hit = np.zeros(len(draws), dtype=bool)
        accepted = draws[~hit]
        if len(accepted) >= per_pair:
            out[row] = accepted[:per_pair]
        else:
            out[row] = rng.choice(
                np.setdiff1d(np.arange(ds.num_items), observed, assume_unique=True),
                size=per_pair,
                replace=True,
            )
    return out


def leave_one_out_split(ds: InteractionDataset, candidates_per_case: int = 99, rng_seed: int = 0) -> WarmSplit:
    """留一法划分，候选集为留出物品加采样的未观测物品"""
    if candidates_per_case < 0:
        raise ConfigError("candidates_per_case must be non-negative")
    eligible = np.flatnonzero(ds.user_degree >= 2)
    for j in eligible:
        pool = ds.num_items - ds.user_degree[j]
        if candidates_per_case > pool:
            raise SamplingError(
                f"User {j} has only {pool} unobserved items, {candidates_per_case} candidates requested",
                data={"user": int(j), "pool": int(pool)},
            )

    rng = np.random.default_rng(rng_seed)
    users, held_out, candidates = [], [], []
    for j in eligible:
        items = ds.user_items(int(j))
        held = int(items[rng.integers(len(items))])
        negatives = sample_unobserved(ds, ("user", int(j)), candidates_per_case, rng)
        users.append(int(j))
        held_out.append(held)
        candidates.append(np.sort(np.concatenate([[held], negatives])))

    skipped = ds.num_users - len(eligible)
    if skipped:
        logger.warning(f"{skipped} users with fewer than 2 interactions kept in train without a test case")

    users_arr = np.asarray(users, dtype=np.int64)
    held_arr = np.asarray(held_out, dtype=np.int64)
    train = _remove_pairs(ds, users_arr, held_arr)
    cand_arr = (
        np.vstack(candidates) if candidates else np.empty((0, candidates_per_case + 1), dtype=np.int64)
    )
    logger.info(f"Leave-one-out split: {len(users)} test cases, {candidates_per_case + 1} candidates each")
    return WarmSplit(
        train=train,
        users=users_arr,
        held_out=held_arr,
        candidates=cand_arr,
        seed=rng_seed,
        candidates_per_case=candidates_per_case,
    )


def _remove_pairs(ds: InteractionDataset, users: np.ndarray, items: np.ndarray) -> InteractionDataset:
    keys = ds.pairs[:, 0] * ds.num_items + ds.pairs[:, 1]
    removed = users * ds.num_items + items
    return ds.with_pairs(ds.pairs[~np.isin(keys, removed)])


def subsample_pairs(ds: InteractionDataset, fraction: float, rng_seed: int = 0) -> InteractionDataset:
    """按比例随机保留交互对，ID空间不变"""
    if not 0 < fraction <= 1:
        raise ConfigError("pair fraction must lie in (0, 1]")
    if fraction == 1:
        return ds
    keep = max(1, int(round(fraction * ds.num_pairs)))
    rng = np.random.default_rng(rng_seed)
    chosen = np.sort(rng.choice(ds.num_pairs, size=keep, replace=False))
    logger.info(f"Subsampled {keep}/{ds.num_pairs} pairs (fraction={fraction})")
    return ds.with_pairs(ds.pairs[chosen])


def cold_start_split(
    ds: InteractionDataset,
    cold_items: Optional[Sequence[int]] = None,
    cold_fraction: float = 0.2,
    candidate_pool: int = 1000,
    rng_seed: int = 0,
) -> ColdSplit:
    """冷启动划分：冷物品的全部交互移出训练集，索引空间保持不变"""
    rng = np.random.default_rng(rng_seed)
    if cold_items is None:
        if not 0 < cold_fraction < 1:
            raise ConfigError("cold_fraction must lie in (0, 1)")
        active = np.flatnonzero(ds.item_degree > 0)
        count = max(1, int(round(cold_fraction * len(active))))
        cold = np.sort(rng.choice(active, size=count, replace=False))
    else:
        cold = np.unique(np.asarray(cold_items, dtype=np.int64))
        if len(cold) and (cold.min() < 0 or cold.max() >= ds.num_items):
            raise IndexOutOfRangeError("cold item index out of range")

    train = ds.with_pairs(ds.pairs[~np.isin(ds.pairs[:, 1], cold)])
    ground_truth: Dict[int, np.ndarray] = {}
    candidate_users: Dict[int, np.ndarray] = {}
    empty = 0
    for k in cold:
        truth = ds.item_users(int(k))
        if len(truth) == 0:
            empty += 1
            continue
        extra = min(candidate_pool, ds.num_users - len(truth))
        sampled = sample_unobserved(ds, ("item", int(k)), extra, rng)
        ground_truth[int(k)] = truth
        candidate_users[int(k)] = np.sort(np.concatenate([truth, sampled]))
    if empty:
        logger.warning(f"{empty} cold items without interactions excluded from evaluation")
    logger.info(f"Cold-start split: {len(cold)} cold items, {train.num_pairs} training pairs")
    return ColdSplit(
        train=train,
        cold_items=cold,
        ground_truth=ground_truth,
        candidate_users=candidate_users,
        seed=rng_seed,
        candidate_pool=candidate_pool,
    )


def make_batches(ds: InteractionDataset, batch_size: int, rng: np.random.Generator) -> List[Batch]:
    """打乱后切分一个 epoch 的批次，每个相似对恰好出现一次"""
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    order = rng.permutation(ds.num_pairs)
    shuffled = ds.pairs[order]
    return [
        Batch.from_pairs(shuffled[start:start + batch_size])
        for start in range(0, ds.num_pairs, batch_size)
    ]


def _bipartite_component_count(mask: np.ndarray) -> int:
    block = sparse.csr_matrix(mask.astype(np.int8))
    graph = sparse.bmat([[None, block], [block.T, None]], format="csr")
    count, _ = connected_components(graph, directed=False)
    return int(count)


def gen_synthetic_components(
    num_components: int,
    users_per: int,
    items_per: int,
    edge_prob: float,
    rng_seed: int = 0,
    max_retries: int = 100,
    head_edge_prob: Optional[float] = None,
) -> InteractionDataset:
    """生成 V 个互不相连的二部图连通分量；head_edge_prob 给第 0 个分量单独的边概率"""
    if num_components < 1 or users_per < 1 or items_per < 1:
        raise ConfigError("num_components, users_per and items_per must be >= 1")
    for name, prob in (("edge_prob", edge_prob), ("head_edge_prob", head_edge_prob)):
        if prob is not None and not 0 < prob <= 1:
            raise ConfigError(f"{name} must lie in (0, 1]")

    rng = np.random.default_rng(rng_seed)
    pairs = []
    for c in range(num_components):
        prob = head_edge_prob if c == 0 and head_edge_prob is not None else edge_prob
        for attempt in range(max_retries):
            mask = rng.random((users_per, items_per)) < prob
            if _bipartite_component_count(mask) == 1:
                break
        else:
            raise GenerationError(
                f"Component {c} not connected after {max_retries} attempts (edge_prob={prob})",
                data={"component": c, "edge_prob": prob},
            )
        rows, cols = np.nonzero(mask)
        pairs.append(np.column_stack([rows + c * users_per, cols + c * items_per]))

    num_users = num_components * users_per
    num_items = num_components * items_per
    ds = InteractionDataset(
        num_users=num_users,
        num_items=num_items,
        pairs=np.vstack(pairs),
        user_ids=tuple(str(j) for j in range(num_users)),
        item_ids=tuple(str(k) for k in range(num_items)),
        user_labels=np.repeat(np.arange(num_components), users_per),
        item_labels=np.repeat(np.arange(num_components), items_per),
    )
    logger.info(
        f"Generated {num_components} components: {num_users} users, {num_items} items, {ds.num_pairs} pairs"
    )
    return ds


def component_count(ds: InteractionDataset) -> int:
    """用户-物品二部图的连通分量数（孤立节点各算一个）"""
    mat = ds.matrix
    graph = sparse.bmat([[None, mat], [mat.T, None]], format="csr")
    count, _ = connected_components(graph, directed=False)
    return int(count)


def save_component_labels(ds: InteractionDataset, path: Union[str, Path]):
    """写出合成图的分量标签"""
    if ds.user_labels is None or ds.item_labels is None:
        raise ConfigError("Dataset has no component labels")
    frame = pd.concat([
        pd.DataFrame({"kind": "user", "id": ds.user_ids, "component": ds.user_labels}),
        pd.DataFrame({"kind": "item", "id": ds.item_ids, "component": ds.item_labels}),
    ], ignore_index=True)
    frame.to_csv(path, index=False)


def load_item_features(path: Union[str, Path], ds: InteractionDataset):
    """读取物品特征，按物品索引对齐（.npy / .npz 稀疏 / CSV 首列为物品ID）"""
    path = Path(path)
    if not path.is_file():
        raise DataFileNotFoundError(f"Feature file not found: {path}", data={"path": str(path)})
    if path.suffix == ".npy":
        features = np.load(path).astype(np.float64)
    elif path.suffix == ".npz":
        features = sparse.load_npz(path).tocsr().astype(np.float64)
    else:
        sep = "\t" if path.suffix in (".tsv", ".txt") else ","
        frame = pd.read_csv(path, sep=sep, header=None, dtype={0: str})
        features = np.zeros((ds.num_items, frame.shape[1] - 1), dtype=np.float64)
        rows = frame[0].map(ds.item_index)
        known = rows.notna().to_numpy()
        if not known.all():
            logger.warning(f"{int((~known).sum())} feature rows reference unknown items and were ignored")
        features[rows[known].astype(int).to_numpy()] = frame.loc[known, 1:].to_numpy(dtype=np.float64)
    if features.shape[0] != ds.num_items:
        raise DataFormatError(
            f"Feature rows ({features.shape[0]}) do not match item count ({ds.num_items})", path=str(path)
        )
    return features


def save_split(split: Union[WarmSplit, ColdSplit], path: Union[str, Path]):
    """划分写为 JSON（记录随机种子）"""
    if isinstance(split, WarmSplit):
        payload = {
            "kind": "warm",
            "seed": split.seed,
            "candidates_per_case": split.candidates_per_case,
            "num_users": split.train.num_users,
            "num_items": split.train.num_items,
            "cases": [
                {"user": j, "held_out": k, "candidates": cands}
                for j, k, cands in split.test_cases
            ],
        }
    else:
        payload = {
            "kind": "cold",
            "seed": split.seed,
            "candidate_pool": split.candidate_pool,
            "num_users": split.train.num_users,
            "num_items": split.train.num_items,
            "cold_items": [int(k) for k in split.cold_items],
            "ground_truth": {str(k): v.tolist() for k, v in split.ground_truth.items()},
            "candidate_users": {str(k): v.tolist() for k, v in split.candidate_users.items()},
        }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload), encoding="utf-8")


def load_split(path: Union[str, Path], ds: InteractionDataset) -> Union[WarmSplit, ColdSplit]:
    """读取 JSON 划分并在完整数据集上重建训练集"""
    path = Path(path)
    if not path.is_file():
        raise DataFileNotFoundError(f"Split file not found: {path}", data={"path": str(path)})
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload["num_users"] != ds.num_users or payload["num_items"] != ds.num_items:
        raise DataFormatError(
            f"Split {path.name} was built for {payload['num_users']}x{payload['num_items']}, "
            f"dataset is {ds.num_users}x{ds.num_items}",
            path=str(path),
        )
    if payload["kind"] == "warm":
        cases = payload["cases"]
        users = np.asarray([c["user"] for c in cases], dtype=np.int64)
        held = np.asarray([c["held_out"] for c in cases], dtype=np.int64)
        cands = (
            np.asarray([c["candidates"] for c in cases], dtype=np.int64)
            if cases else np.empty((0, payload["candidates_per_case"] + 1), dtype=np.int64)
        )
        return WarmSplit(
            train=_remove_pairs(ds, users, held),
            users=users,
            held_out=held,
            candidates=cands,
            seed=payload["seed"],
            candidates_per_case=payload["candidates_per_case"],
        )
    cold = np.asarray(payload["cold_items"], dtype=np.int64)
    return ColdSplit(
        train=ds.with_pairs(ds.pairs[~np.isin(ds.pairs[:, 1], cold)]),
        cold_items=cold,
        ground_truth={int(k): np.asarray(v, dtype=np.int64) for k, v in payload["ground_truth"].items()},
        candidate_users={int(k): np.asarray(v, dtype=np.int64) for k, v in payload["candidate_users"].items()},
        seed=payload["seed"],
        candidate_pool=payload["candidate_pool"],
    )
