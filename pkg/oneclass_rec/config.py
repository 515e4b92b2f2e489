"""
配置
目标函数/训练配置数据类，消融预设，以及 key=value 配置文件解析
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

from dotenv import dotenv_values

from .base import ConfigError, DataFileNotFoundError
from .encoder import Mapping

logger = logging.getLogger(__name__)

BASE_LOSSES = ("cont", "mse", "bce", "bpr", "contrastive")
SIMILAR_ONLY_LOSSES = ("cont", "mse")
ORTH_VARIANTS = ("squared", "raw")

CITEULIKE_MARGIN_P = 0.1
DEFAULT_MARGIN_P = 0.01


@dataclass
class ObjectiveConfig:
    """目标函数配置：total = λ1·base + λ2·hinge + λ3·orth"""
    base_loss: str = "cont"
    lambda1: float = 0.01
    lambda2: float = 1.0
    lambda3: float = 1.0
    margin_p: float = DEFAULT_MARGIN_P
    margin_d: float = 1.0
    mapping: Mapping = Mapping.DOT
    baseline_neg_weight: float = 1.0
    orth_variant: str = "squared"
    num_negatives: int = 1
    regularize_baselines: bool = False

    def __post_init__(self):
        try:
            self.mapping = Mapping(self.mapping)
        except ValueError:
            raise ConfigError(f"Unknown mapping: {self.mapping}")

    def validate(self) -> "ObjectiveConfig":
        if self.base_loss not in BASE_LOSSES:
            raise ConfigError(f"Unknown base loss: {self.base_loss}")
        if self.orth_variant not in ORTH_VARIANTS:
            raise ConfigError(f"Unknown orthogonality variant: {self.orth_variant}")
        lambdas = (self.lambda1, self.lambda2, self.lambda3)
        if any(lam < 0 for lam in lambdas):
            raise ConfigError("lambda1..3 must be non-negative")
        if not any(lam > 0 for lam in lambdas):
            raise ConfigError("At least one of lambda1..3 must be positive")
        if self.margin_p < 0 or self.margin_d < 0:
            raise ConfigError("Margins must be non-negative")
        if self.base_loss == "contrastive" and self.margin_d <= 0:
            raise ConfigError("The contrastive baseline needs margin_d > 0")
        if self.uses_negatives and self.num_negatives < 1:
            raise ConfigError("Baseline losses need num_negatives >= 1")
        return self

    @property
    def uses_negatives(self) -> bool:
        return self.base_loss not in SIMILAR_ONLY_LOSSES

    def effective_lambdas(self) -> Tuple[float, float, float]:
        """基线损失默认不加 hinge/orth 正则"""
        if self.uses_negatives and not self.regularize_baselines:
            return self.lambda1, 0.0, 0.0
        return self.lambda1, self.lambda2, self.lambda3


class Ablation(str, Enum):
    """消融预设"""
    NONE = "none"
    NO_ORTH = "no-orth"
    NO_HINGE = "no-hinge"
    ONLY_CONT = "only-cont"

    def apply(self, objective: ObjectiveConfig) -> ObjectiveConfig:
        if self is Ablation.NO_ORTH:
            return replace(objective, lambda3=0.0)
        if self is Ablation.NO_HINGE:
            return replace(objective, lambda2=0.0)
        if self is Ablation.ONLY_CONT:
            return replace(objective, base_loss="cont", lambda2=0.0, lambda3=0.0)
        return replace(objective)


@dataclass
class TrainConfig:
    """训练配置：小批量 SGD"""
    epochs: int = 50
    learning_rate: float = 0.5
    batch_size: int = 128
    dim: int = 100
    init_scale: float = 0.1
    seed: int = 0
    snapshot_every: int = 0
    patience: Optional[int] = None
    pair_fraction: float = 1.0
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)

    def validate(self) -> "TrainConfig":
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.init_scale <= 0:
            raise ConfigError("init_scale must be > 0")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be >= 1 when given")
        if not 0 < self.pair_fraction <= 1:
            raise ConfigError("pair_fraction must lie in (0, 1]")
        self.objective.validate()
        return self


def default_margin_p(data_path: Optional[Union[str, Path]]) -> float:
    """按数据集选择 m_p：CiteULike 类数据 0.1，其余 0.01"""
    if data_path is not None and "citeulike" in Path(data_path).name.lower():
        return CITEULIKE_MARGIN_P
    return DEFAULT_MARGIN_P


def load_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """读取扁平 key=value 配置文件"""
    path = Path(path)
    if not path.is_file():
        raise DataFileNotFoundError(f"Config file not found: {path}", data={"path": str(path)})
    values = dotenv_values(path)
    return {
        key.strip().lower().replace("-", "_"): value
        for key, value in values.items()
        if value is not None
    }


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw}")


def _parse_int_list(raw: str):
    return [int(tok) for tok in raw.replace(",", " ").split()]


def _parse_float_list(raw: str):
    return [float(tok) for tok in raw.replace(",", " ").split()]


COERCERS: Dict[str, Callable[[str], Any]] = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "int_list": _parse_int_list,
    "float_list": _parse_float_list,
}


def resolve_settings(
    cli: Dict[str, Any],
    file_values: Dict[str, str],
    defaults: Dict[str, Any],
    kinds: Dict[str, str],
) -> Dict[str, Any]:
    """优先级：命令行 > 配置文件 > 内置默认值"""
    resolved = dict(defaults)
    for key, raw in file_values.items():
        if key not in kinds:
            raise ConfigError(f"Unknown config key: {key}", data={"key": key})
        try:
            resolved[key] = COERCERS[kinds[key]](raw)
        except ValueError as e:
            raise ConfigError(f"Bad value for {key}: {raw}", data={"key": key, "details": str(e)})
    for key, value in cli.items():
        if value is not None:
            resolved[key] = value
    return resolved
