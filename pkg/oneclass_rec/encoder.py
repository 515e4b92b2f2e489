"""
表示编码器
用户/物品嵌入表、线性物品特征编码器，以及点积/余弦打分
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from .base import (
    CheckpointMismatchError,
    ConfigError,
    DataFileNotFoundError,
    IndexOutOfRangeError,
    MappingError,
    NumericalError,
)

logger = logging.getLogger(__name__)

ITEM_SOURCES = ("table", "features")


class Mapping(str, Enum):
    """表示到交互分数的映射"""
    DOT = "dot"
    COSINE = "cosine"


@dataclass(eq=False)
class FeatureEncoder:
    """线性物品特征编码器：z = xᵀW + b"""
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.weight.ndim != 2 or self.weight.shape[1] != self.bias.shape[0]:
            raise ConfigError("encoder weight must be f x d with a d-vector bias")

    @property
    def feature_dim(self) -> int:
        return int(self.weight.shape[0])

    @property
    def dim(self) -> int:
        return int(self.weight.shape[1])

    def encode(self, rows) -> np.ndarray:
        """编码特征行（稠密或CSR）"""
        out = rows @ self.weight
        return np.asarray(out, dtype=np.float64) + self.bias


@dataclass(eq=False)
class EmbeddingModel:
    """用户表 Z^u（m×d）与物品表 Z^i（n×d）"""
    user_table: np.ndarray
    item_table: np.ndarray
    feature_encoder: Optional[FeatureEncoder] = None
    item_source: str = "table"
    lineage: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.user_table = np.asarray(self.user_table, dtype=np.float64)
        self.item_table = np.asarray(self.item_table, dtype=np.float64)
        if self.user_table.ndim != 2 or self.item_table.ndim != 2:
            raise ConfigError("embedding tables must be 2-D")
        if self.user_table.shape[1] != self.item_table.shape[1]:
            raise ConfigError("user and item tables must share the dimension")
        if self.feature_encoder is not None and self.feature_encoder.dim != self.dim:
            raise ConfigError("encoder output dimension differs from the table dimension")
        if self.item_source not in ITEM_SOURCES:
            raise ConfigError(f"Unknown item source: {self.item_source}")
        if self.item_source == "features" and self.feature_encoder is None:
            raise ConfigError("item_source='features' requires a feature encoder")

    @property
    def num_users(self) -> int:
        return int(self.user_table.shape[0])

    @property
    def num_items(self) -> int:
        return int(self.item_table.shape[0])

    @property
    def dim(self) -> int:
        return int(self.user_table.shape[1])

    def snapshot(self) -> "EmbeddingModel":
        """冻结副本，供评估与诊断使用"""
        encoder = None
        if self.feature_encoder is not None:
            encoder = FeatureEncoder(self.feature_encoder.weight.copy(), self.feature_encoder.bias.copy())
        return EmbeddingModel(
            user_table=self.user_table.copy(),
            item_table=self.item_table.copy(),
            feature_encoder=encoder,
            item_source=self.item_source,
            lineage=dict(self.lineage),
        )

    def check_finite(self):
        arrays = [self.user_table, self.item_table]
        if self.feature_encoder is not None:
            arrays += [self.feature_encoder.weight, self.feature_encoder.bias]
        for arr in arrays:
            if not np.all(np.isfinite(arr)):
                raise NumericalError("Model parameters contain non-finite values")


def init_feature_encoder(f: int, d: int, init_scale: float = 0.1, rng_seed=0) -> FeatureEncoder:
    """线性编码器：权重均匀初始化，偏置为 0"""
    if f < 1 or d < 1:
        raise ConfigError("feature and output dimensions must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return FeatureEncoder(weight=rng.uniform(-init_scale, init_scale, size=(f, d)), bias=np.zeros(d))


def init_model(
    m: int,
    n: int,
    d: int,
    init_scale: float = 0.1,
    rng_seed: int = 0,
    feature_dim: Optional[int] = None,
) -> EmbeddingModel:
    """均匀分布 [-init_scale, init_scale] 初始化"""
    if d < 1:
        raise ConfigError("dim must be >= 1")
    if init_scale <= 0:
        raise ConfigError("init_scale must be > 0")
    rng = np.random.default_rng(rng_seed)
    user_table = rng.uniform(-init_scale, init_scale, size=(m, d))
    item_table = rng.uniform(-init_scale, init_scale, size=(n, d))
    encoder = None
    if feature_dim is not None:
        encoder = init_feature_encoder(feature_dim, d, init_scale, rng)
    return EmbeddingModel(
        user_table=user_table,
        item_table=item_table,
        feature_encoder=encoder,
        item_source="features" if encoder is not None else "table",
        lineage={"init_seed": rng_seed, "init_scale": init_scale},
    )


def user_rep(model: EmbeddingModel, j: int) -> np.ndarray:
    """用户表第 j 行（视图）"""
    if not 0 <= j < model.num_users:
        raise IndexOutOfRangeError(f"user index {j} out of range")
    return model.user_table[j]


def item_rep(model: EmbeddingModel, k: int) -> np.ndarray:
    """物品表第 k 行（视图）"""
    if not 0 <= k < model.num_items:
        raise IndexOutOfRangeError(f"item index {k} out of range")
    return model.item_table[k]


def user_reps(model: EmbeddingModel, users) -> np.ndarray:
    return model.user_table[np.asarray(users, dtype=np.int64)]


def item_reps(model: EmbeddingModel, items, features=None) -> np.ndarray:
    """批量物品表示；item_source='features' 时由编码器生成"""
    items = np.asarray(items, dtype=np.int64)
    if model.item_source == "features":
        if features is None:
            raise ConfigError("Feature-encoded items need the item feature matrix")
        return model.feature_encoder.encode(features[items])
    return model.item_table[items]


def all_item_reps(model: EmbeddingModel, features=None) -> np.ndarray:
    return item_reps(model, np.arange(model.num_items), features)


def aggregate_user_rep(model: EmbeddingModel, history: Sequence[int], features=None) -> np.ndarray:
    """用户表示 = 历史物品表示的算术平均"""
    history = np.asarray(history, dtype=np.int64)
    if history.size == 0:
        raise ConfigError("Cannot aggregate an empty history")
    if history.min() < 0 or history.max() >= model.num_items:
        raise IndexOutOfRangeError("history item index out of range")
    return item_reps(model, history, features).mean(axis=0)


def encode_item_features(model: EmbeddingModel, features) -> np.ndarray:
    """单个物品特征向量经线性编码器得到表示"""
    if model.feature_encoder is None:
        raise ConfigError("Model has no feature encoder")
    if sparse.issparse(features):
        row = features.reshape(1, -1)
    else:
        row = np.asarray(features, dtype=np.float64).reshape(1, -1)
    if row.shape[1] != model.feature_encoder.feature_dim:
        raise ConfigError(
            f"Feature length {row.shape[1]} differs from encoder input {model.feature_encoder.feature_dim}"
        )
    return model.feature_encoder.encode(row)[0]


def predict_score(z_u, z_i, mapping: Union[Mapping, str] = Mapping.DOT) -> float:
    """单对打分"""
    scores, _, _ = score_rows(
        np.asarray(z_u, dtype=np.float64).reshape(1, -1),
        np.asarray(z_i, dtype=np.float64).reshape(1, -1),
        mapping,
    )
    return float(scores[0])


def score_rows(
    user_rows: np.ndarray, item_rows: np.ndarray, mapping: Union[Mapping, str] = Mapping.DOT
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """逐行打分，并返回分数对两侧行的解析导数"""
    mapping = Mapping(mapping)
    dots = np.einsum("bd,bd->b", user_rows, item_rows)
    if mapping is Mapping.DOT:
        return dots, item_rows.copy(), user_rows.copy()

    nu = np.linalg.norm(user_rows, axis=1)
    ni = np.linalg.norm(item_rows, axis=1)
    if np.any(nu == 0) or np.any(ni == 0):
        raise MappingError("Cosine mapping requires non-zero representation norms")
    scores = dots / (nu * ni)
    d_user = item_rows / (nu * ni)[:, None] - scores[:, None] * user_rows / (nu ** 2)[:, None]
    d_item = user_rows / (nu * ni)[:, None] - scores[:, None] * item_rows / (ni ** 2)[:, None]
    return scores, d_user, d_item


def score_candidates(z_u: np.ndarray, candidates: np.ndarray, mapping: Union[Mapping, str] = Mapping.DOT) -> np.ndarray:
    """一个查询表示对多个候选表示打分"""
    mapping = Mapping(mapping)
    scores = candidates @ z_u
    if mapping is Mapping.COSINE:
        norms = np.linalg.norm(candidates, axis=1) * np.linalg.norm(z_u)
        if np.any(norms == 0):
            raise MappingError("Cosine mapping requires non-zero representation norms")
        scores = scores / norms
    return scores


def save_checkpoint(model: EmbeddingModel, path: Union[str, Path], meta: Optional[Dict[str, Any]] = None):
    """模型检查点（.npz），元数据以JSON存放"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "dim": model.dim,
        "num_users": model.num_users,
        "num_items": model.num_items,
        "item_source": model.item_source,
        "lineage": model.lineage,
    }
    payload.update(meta or {})
    arrays = {
        "user_table": model.user_table,
        "item_table": model.item_table,
        "meta": np.array(json.dumps(payload, sort_keys=True)),
    }
    if model.feature_encoder is not None:
        arrays["encoder_weight"] = model.feature_encoder.weight
        arrays["encoder_bias"] = model.feature_encoder.bias
    with path.open("wb") as fh:
        np.savez(fh, **arrays)
    logger.info(f"Checkpoint written: {path}")


def load_checkpoint(path: Union[str, Path]) -> Tuple[EmbeddingModel, Dict[str, Any]]:
    path = Path(path)
    if not path.is_file():
        raise DataFileNotFoundError(f"Checkpoint not found: {path}", data={"path": str(path)})
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        encoder = None
        if "encoder_weight" in data.files:
            encoder = FeatureEncoder(data["encoder_weight"], data["encoder_bias"])
        model = EmbeddingModel(
            user_table=data["user_table"],
            item_table=data["item_table"],
            feature_encoder=encoder,
            item_source=meta.get("item_source", "table"),
            lineage=meta.get("lineage", {}),
        )
    if model.dim != meta["dim"] or model.num_users != meta["num_users"] or model.num_items != meta["num_items"]:
        raise CheckpointMismatchError(f"Checkpoint {path.name} metadata does not match its tables")
    return model, meta
