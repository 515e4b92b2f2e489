"""
排序评估
暖启动留一法 HR@K 与冷启动物品 recall@K
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .base import ConfigError, EmptyDatasetError, MappingError
from .encoder import EmbeddingModel, Mapping, aggregate_user_rep, all_item_reps, item_reps, score_candidates, user_reps
from .interactions import ColdSplit, WarmSplit

logger = logging.getLogger(__name__)

USER_MODES = ("table", "aggregate")


@dataclass
class MetricResult:
    metric: str
    k: int
    value: float
    num_cases: int
    seed: int
    successes: float = 0.0
    epoch: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EvalProtocol:
    """评估协议"""
    kind: str = "warm"
    ks: Tuple[int, ...] = (10,)
    mapping: Mapping = Mapping.DOT
    user_mode: str = "table"
    include_snapshots: bool = False
    chunk_size: int = 1024

    def __post_init__(self):
        self.mapping = Mapping(self.mapping)
        self.ks = tuple(int(k) for k in self.ks)

    def validate(self) -> "EvalProtocol":
        if self.kind not in ("warm", "cold"):
            raise ConfigError(f"Unknown evaluation kind: {self.kind}")
        if not self.ks or min(self.ks) < 1:
            raise ConfigError("K values must be >= 1")
        if self.user_mode not in USER_MODES:
            raise ConfigError(f"Unknown user mode: {self.user_mode}")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be >= 1")
        return self


def _score_blocks(u_rows: np.ndarray, cand_reps: np.ndarray, mapping: Mapping) -> np.ndarray:
    """u_rows: c×d，cand_reps: c×L×d → c×L 分数"""
    scores = np.einsum("cd,cld->cl", u_rows, cand_reps)
    if mapping is Mapping.COSINE:
        norms = np.linalg.norm(u_rows, axis=1)[:, None] * np.linalg.norm(cand_reps, axis=2)
        if np.any(norms == 0):
            raise MappingError("Cosine mapping requires non-zero representation norms")
        scores = scores / norms
    return scores


def hit_ratio_at_k(
    model: EmbeddingModel,
    split: WarmSplit,
    k: int,
    mapping: Union[Mapping, str] = Mapping.DOT,
    features=None,
    chunk_size: int = 1024,
) -> MetricResult:
    """留出物品进入前 K 的比例；同分时物品索引小者在前"""
    mapping = Mapping(mapping)
    if split.num_cases == 0:
        raise EmptyDatasetError("Warm split has no test cases")
    num_candidates = split.candidates.shape[1]
    if not 1 <= k <= num_candidates:
        raise ConfigError(f"K={k} must lie in [1, {num_candidates}] (candidates per case)")

    items = all_item_reps(model, features)
    hits = 0
    for start in range(0, split.num_cases, chunk_size):
        users = split.users[start:start + chunk_size]
        held = split.held_out[start:start + chunk_size]
        cands = split.candidates[start:start + chunk_size]
        scores = _score_blocks(user_reps(model, users), items[cands], mapping)

        held_pos = np.argmax(cands == held[:, None], axis=1)
        held_score = scores[np.arange(len(held)), held_pos]
        above = scores > held_score[:, None]
        tied_before = (scores == held_score[:, None]) & (cands < held[:, None])
        rank = above.sum(axis=1) + tied_before.sum(axis=1)
        hits += int(np.sum(rank < k))

    return MetricResult(
        metric="hr",
        k=k,
        value=hits / split.num_cases,
        num_cases=split.num_cases,
        seed=split.seed,
        successes=float(hits),
    )


def aggregate_user_table(model: EmbeddingModel, train, features=None, users=None) -> np.ndarray:
    """用户表示取训练历史物品表示的均值；无历史的用户退回用户表"""
    users = range(train.num_users) if users is None else users
    reps = model.user_table.copy()
    empty = 0
    for j in users:
        history = train.user_items(int(j))
        if len(history):
            reps[j] = aggregate_user_rep(model, history, features)
        else:
            empty += 1
    if empty:
        logger.warning(f"{empty} users without training history fall back to the user table")
    return reps


def recall_at_k(
    model: EmbeddingModel,
    split: ColdSplit,
    k: int,
    mapping: Union[Mapping, str] = Mapping.DOT,
    features=None,
    user_mode: str = "table",
    chunk_size: int = 1024,
) -> MetricResult:
    """冷物品对候选用户排序，前 K 中真实用户所占比例，按物品取平均"""
    mapping = Mapping(mapping)
    if k < 1:
        raise ConfigError("K must be >= 1")
    if user_mode not in USER_MODES:
        raise ConfigError(f"Unknown user mode: {user_mode}")

    cold = [int(c) for c in split.cold_items if len(split.ground_truth.get(int(c), ())) > 0]
    excluded = len(split.cold_items) - len(cold)
    if excluded:
        logger.warning(f"{excluded} cold items with empty ground truth excluded")
    if not cold:
        raise EmptyDatasetError("Cold split has no evaluable items")

    user_table = model.user_table
    if user_mode == "aggregate":
        candidates = np.unique(np.concatenate([split.candidate_users[c] for c in cold]))
        user_table = aggregate_user_table(model, split.train, features, users=candidates)
    total = 0.0
    for start in range(0, len(cold), chunk_size):
        chunk = cold[start:start + chunk_size]
        reps = item_reps(model, chunk, features)
        for item, rep in zip(chunk, reps):
            cands = split.candidate_users[item]
            scores = score_candidates(rep, user_table[cands], mapping)
            top = cands[np.lexsort((cands, -scores))[:k]]
            truth = split.ground_truth[item]
            total += np.isin(truth, top).sum() / len(truth)

    return MetricResult(
        metric="recall",
        k=k,
        value=total / len(cold),
        num_cases=len(cold),
        seed=split.seed,
        successes=float(total),
    )


def evaluate_run(
    state,
    split: Union[WarmSplit, ColdSplit],
    protocol: Optional[EvalProtocol] = None,
    features=None,
) -> List[MetricResult]:
    """对最终模型（及可选的中间快照）计算协议中的每个 K，结果追加到训练状态"""
    protocol = (protocol or EvalProtocol()).validate()
    snapshots = [(state.epoch, state.model)]
    if protocol.include_snapshots:
        snapshots = sorted(state.snapshots.items()) + [
            item for item in snapshots if item[0] not in state.snapshots
        ]

    results = []
    for epoch, model in snapshots:
        for k in protocol.ks:
            if protocol.kind == "warm":
                result = hit_ratio_at_k(model, split, k, protocol.mapping, features, protocol.chunk_size)
            else:
                result = recall_at_k(
                    model, split, k, protocol.mapping, features, protocol.user_mode, protocol.chunk_size
                )
            result.epoch = epoch
            results.append(result)
            logger.info(f"Epoch {epoch}: {result.metric}@{k} = {result.value:.4f} over {result.num_cases} cases")
    state.metrics.extend(results)
    return results


def _metrics_frame(results: Sequence[MetricResult], run_id: str) -> pd.DataFrame:
    rows = [dict(run_id=run_id, **r.to_dict()) for r in results]
    return pd.DataFrame(rows, columns=["run_id", "epoch", "metric", "k", "value", "num_cases", "successes", "seed"])


def _write_jsonl(frame: pd.DataFrame, path: Union[str, Path], mode: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = frame.to_json(orient="records", lines=True, double_precision=15) if len(frame) else ""
    if text and not text.endswith("\n"):
        text += "\n"
    with path.open(mode, encoding="utf-8") as fh:
        fh.write(text)


def append_metrics_jsonl(results: Sequence[MetricResult], path: Union[str, Path], run_id: str):
    """按 run id 追加到 JSON-lines 结果文件"""
    _write_jsonl(_metrics_frame(results, run_id), path, "a")


def write_metrics_jsonl(results: Sequence[MetricResult], path: Union[str, Path], run_id: str):
    _write_jsonl(_metrics_frame(results, run_id), path, "w")


def load_metrics_jsonl(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_json(Path(path), orient="records", lines=True, dtype={"run_id": str})
