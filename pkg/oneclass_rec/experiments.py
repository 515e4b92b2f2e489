"""
合成实验
在互不相连的连通分量图上复现三种坍塌形态，并对比消融配置
"""

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import pandas as pd

from .base import ConfigError
from .config import Ablation, ObjectiveConfig, TrainConfig
from .diagnostics import CollapseReport, CollapseThresholds, collapse_report, joint_representations
from .evaluation import hit_ratio_at_k
from .interactions import InteractionDataset, component_count, gen_synthetic_components, leave_one_out_split
from .trainer import fit

logger = logging.getLogger(__name__)


@dataclass
class SyntheticConfig:
    """合成图参数：V 个分量，每个 users_per × items_per，边概率 edge_prob，第 0 个分量用 head_edge_prob"""
    num_components: int = 4
    users_per: int = 25
    items_per: int = 25
    edge_prob: float = 0.2
    head_edge_prob: Optional[float] = 1.0
    seed: int = 0

    def validate(self) -> "SyntheticConfig":
        if self.num_components < 1 or self.users_per < 1 or self.items_per < 1:
            raise ConfigError("num_components, users_per and items_per must be >= 1")
        if not 0 < self.edge_prob <= 1:
            raise ConfigError("edge_prob must lie in (0, 1]")
        if self.head_edge_prob is not None and not 0 < self.head_edge_prob <= 1:
            raise ConfigError("head_edge_prob must lie in (0, 1]")
        return self


def synthetic_train_config(**overrides) -> TrainConfig:
    """合成实验默认训练配置

    初始化取极小尺度、m_p 远大于初始 d_p：hinge 放大最快的分量间方向，
    不加 orth 时各维度收敛到同一方向，加 orth 后维度间去相关。
    """
    base = TrainConfig(
        epochs=50,
        learning_rate=0.5,
        batch_size=16,
        dim=2,
        init_scale=1e-4,
        objective=ObjectiveConfig(lambda1=2.0, lambda2=10.0, lambda3=1.0, margin_p=0.05),
    )
    return replace(base, **overrides)


@dataclass
class AblationOutcome:
    ablation: str
    collapse: CollapseReport
    epochs: int
    final_loss: float
    hit_ratio: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SyntheticReport:
    synthetic: SyntheticConfig
    dataset: Dict[str, float]
    outcomes: Dict[str, AblationOutcome] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "synthetic": asdict(self.synthetic),
            "dataset": self.dataset,
            "outcomes": {name: outcome.to_dict() for name, outcome in self.outcomes.items()},
        }

    def verdicts(self) -> Dict[str, str]:
        return {name: outcome.collapse.verdict for name, outcome in self.outcomes.items()}

    def write_json(self, path: Union[str, Path]):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def synthetic_dataset(synthetic: SyntheticConfig) -> InteractionDataset:
    synthetic.validate()
    return gen_synthetic_components(
        synthetic.num_components,
        synthetic.users_per,
        synthetic.items_per,
        synthetic.edge_prob,
        rng_seed=synthetic.seed,
        head_edge_prob=synthetic.head_edge_prob,
    )


def _warm_split(ds: InteractionDataset, seed: int):
    """每个用户留一，候选数受最小未观测池限制"""
    pool = int(ds.num_items - ds.user_degree.max())
    return leave_one_out_split(ds, candidates_per_case=min(99, pool), rng_seed=seed)


def run_synthetic_ablation(
    synthetic: SyntheticConfig,
    ablations: Sequence[Union[Ablation, str]] = (Ablation.NONE,),
    train: Optional[TrainConfig] = None,
    evaluate: bool = False,
    k: int = 10,
    thresholds: Optional[CollapseThresholds] = None,
) -> SyntheticReport:
    """同一份合成数据、同一种子，每个消融各训练一次并给出最终诊断"""
    train = train or synthetic_train_config()
    ds = synthetic_dataset(synthetic)
    report = SyntheticReport(synthetic=synthetic, dataset={**ds.describe(), "components": component_count(ds)})

    split = None
    train_ds = ds
    if evaluate:
        split = _warm_split(ds, synthetic.seed)
        train_ds = split.train
        k = min(k, split.candidates.shape[1])

    for ablation in ablations:
        ablation = Ablation(ablation)
        config = replace(train, objective=ablation.apply(train.objective))
        state = fit(train_ds, config)
        outcome = AblationOutcome(
            ablation=ablation.value,
            collapse=collapse_report(joint_representations(state.model), thresholds),
            epochs=state.epoch,
            final_loss=state.history[-1].total,
        )
        if split is not None:
            outcome.hit_ratio = hit_ratio_at_k(state.model, split, k, config.objective.mapping).value
        report.outcomes[ablation.value] = outcome
        logger.info(
            f"Ablation {ablation.value}: verdict={outcome.collapse.verdict}, "
            f"corr={outcome.collapse.mean_abs_correlation:.4f}, var={outcome.collapse.mean_dim_variance:.3e}"
        )
    return report


def run_seed_sweep(
    synthetic: SyntheticConfig,
    seeds: Sequence[int],
    ablations: Sequence[Union[Ablation, str]] = (Ablation.NONE, Ablation.NO_ORTH, Ablation.ONLY_CONT),
    train: Optional[TrainConfig] = None,
    k: int = 10,
) -> pd.DataFrame:
    """多个数据/训练种子下重复消融，返回每个 (seed, ablation) 一行"""
    if not seeds:
        raise ConfigError("seeds must not be empty")
    train = train or synthetic_train_config()
    rows = []
    for seed in seeds:
        report = run_synthetic_ablation(
            replace(synthetic, seed=int(seed)), ablations, replace(train, seed=int(seed)), evaluate=True, k=k
        )
        for name, outcome in report.outcomes.items():
            rows.append(
                {
                    "seed": int(seed),
                    "ablation": name,
                    "hit_ratio": outcome.hit_ratio,
                    "verdict": outcome.collapse.verdict,
                    "mean_abs_correlation": outcome.collapse.mean_abs_correlation,
                }
            )
    return pd.DataFrame(rows)


def summarize_seed_sweep(table: pd.DataFrame) -> pd.DataFrame:
    """按消融汇总 HR 均值与标准差"""
    return table.groupby("ablation", sort=False)["hit_ratio"].agg(["mean", "std", "count"]).reset_index()


def run_size_sweep(
    ds: InteractionDataset,
    fractions: Sequence[float] = (0.25, 0.5, 1.0),
    negatives: Sequence[int] = (1, 3),
    train: Optional[TrainConfig] = None,
    baseline_lambda1: float = 1.0,
    k: int = 10,
    seed: int = 0,
) -> pd.DataFrame:
    """训练集规模扫描：同一测试集，按比例保留训练对，对比 cont+正则 与对比损失基线"""
    if not fractions:
        raise ConfigError("fractions must not be empty")
    train = train or synthetic_train_config()
    split = _warm_split(ds, seed)
    k = min(k, split.candidates.shape[1])
    methods = [("cont+reg", replace(train.objective, base_loss="cont"))]
    for n in negatives:
        baseline = replace(train.objective, base_loss="contrastive", lambda1=baseline_lambda1, num_negatives=n)
        methods.append((f"contrastive-neg{n}", baseline))

    rows = []
    for fraction in fractions:
        for name, objective in methods:
            config = replace(train, pair_fraction=float(fraction), objective=objective, seed=seed)
            state = fit(split.train, config)
            rows.append(
                {
                    "fraction": float(fraction),
                    "num_pairs": max(1, int(round(fraction * split.train.num_pairs))),
                    "method": name,
                    "hit_ratio": hit_ratio_at_k(state.model, split, k, objective.mapping).value,
                    "verdict": state.history[-1].verdict,
                }
            )
            logger.info(f"Size sweep fraction={fraction} {name}: HR@{k}={rows[-1]['hit_ratio']:.4f}")
    return pd.DataFrame(rows)
