"""
训练循环
小批量 SGD：打乱相似对、逐批计算目标函数、只更新批次触及的行
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .base import NumericalError
from .config import TrainConfig
from .diagnostics import collapse_report, joint_representations
from .encoder import EmbeddingModel, init_model, save_checkpoint
from .evaluation import hit_ratio_at_k
from .interactions import InteractionDataset, WarmSplit, make_batches, sample_negatives, subsample_pairs
from .objective import Gradients, total_objective

logger = logging.getLogger(__name__)

LOSS_TERMS = ("cont", "base", "hinge", "orth", "total")


@dataclass
class EpochReport:
    """单个 epoch 的损失均值与结束时的诊断"""
    epoch: int
    cont: float
    base: float
    hinge: float
    orth: float
    total: float
    batch_d_p: float
    d_p: float
    mean_dim_variance: float
    mean_abs_correlation: float
    verdict: str
    num_batches: int
    validation: Optional[float] = None

    def to_row(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(eq=False)
class TrainState:
    model: EmbeddingModel
    epoch: int = 0
    history: List[EpochReport] = field(default_factory=list)
    snapshots: Dict[int, EmbeddingModel] = field(default_factory=dict)
    metrics: List[Any] = field(default_factory=list)
    best_validation: Optional[float] = None
    stopped_early: bool = False


def apply_gradients(model: EmbeddingModel, grad: Gradients, learning_rate: float, features=None):
    """θ ← θ − lr·g，只写入批次触及的行；特征编码物品经链式法则更新编码器"""
    model.user_table[grad.users] -= learning_rate * grad.d_users
    if model.item_source == "features":
        rows = features[grad.items]
        model.feature_encoder.weight -= learning_rate * np.asarray(rows.T @ grad.d_items)
        model.feature_encoder.bias -= learning_rate * grad.d_items.sum(axis=0)
    else:
        model.item_table[grad.items] -= learning_rate * grad.d_items


def train_epoch(
    state: TrainState,
    ds: InteractionDataset,
    config: TrainConfig,
    rng: np.random.Generator,
    features=None,
) -> EpochReport:
    """跑完一个打乱后的 epoch 并追加报告"""
    objective = config.objective
    batches = make_batches(ds, config.batch_size, rng)
    sums = dict.fromkeys(LOSS_TERMS + ("d_p",), 0.0)

    for index, batch in enumerate(batches):
        negatives = sample_negatives(ds, batch, objective.num_negatives, rng) if objective.uses_negatives else None
        breakdown, grad = total_objective(objective, batch, state.model, features, negatives)
        if not np.isfinite(breakdown.total) or not grad.is_finite():
            raise NumericalError(
                f"Non-finite loss or gradient in epoch {state.epoch + 1}, batch {index}",
                batch=index,
                data={"epoch": state.epoch + 1},
            )
        apply_gradients(state.model, grad, config.learning_rate, features)
        try:
            state.model.check_finite()
        except NumericalError as e:
            raise NumericalError(
                f"Parameters became non-finite in epoch {state.epoch + 1}, batch {index}",
                batch=index,
                data={"epoch": state.epoch + 1},
            ) from e
        for term in LOSS_TERMS:
            sums[term] += getattr(breakdown, term)
        sums["d_p"] += breakdown.d_p

    state.epoch += 1
    n = max(len(batches), 1)
    diag = collapse_report(joint_representations(state.model, features))
    report = EpochReport(
        epoch=state.epoch,
        cont=sums["cont"] / n,
        base=sums["base"] / n,
        hinge=sums["hinge"] / n,
        orth=sums["orth"] / n,
        total=sums["total"] / n,
        batch_d_p=sums["d_p"] / n,
        d_p=diag.d_p,
        mean_dim_variance=diag.mean_dim_variance,
        mean_abs_correlation=diag.mean_abs_correlation,
        verdict=diag.verdict,
        num_batches=len(batches),
    )
    state.history.append(report)
    return report


def write_history_csv(history: List[EpochReport], path: Union[str, Path]):
    """逐 epoch 诊断 CSV，供外部绘图"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([r.to_row() for r in history]).to_csv(path, index=False)


def fit(
    ds: InteractionDataset,
    config: TrainConfig,
    features=None,
    validation: Optional[WarmSplit] = None,
    validation_k: int = 10,
    out_dir: Optional[Union[str, Path]] = None,
    on_epoch: Optional[Callable[[EpochReport], None]] = None,
) -> TrainState:
    """按种子确定地训练 config.epochs 轮"""
    config.validate()
    ds = subsample_pairs(ds, config.pair_fraction, config.seed)
    init_seq, batch_seq = np.random.SeedSequence(config.seed).spawn(2)
    init_seed = int(init_seq.generate_state(1)[0])
    feature_dim = features.shape[1] if features is not None else None
    model = init_model(ds.num_users, ds.num_items, config.dim, config.init_scale, init_seed, feature_dim)
    model.lineage.update({"seed": config.seed, "batch_seed_spawn_key": list(batch_seq.spawn_key)})
    rng = np.random.default_rng(batch_seq)
    state = TrainState(model=model)
    out_dir = Path(out_dir) if out_dir is not None else None

    logger.info(
        f"Training {config.epochs} epochs on {ds.num_pairs} pairs: dim={config.dim}, "
        f"batch={config.batch_size}, lr={config.learning_rate}, base={config.objective.base_loss}"
    )
    stale = 0
    for _ in range(config.epochs):
        report = train_epoch(state, ds, config, rng, features)

        if validation is not None:
            report.validation = hit_ratio_at_k(
                state.model, validation, validation_k, config.objective.mapping, features
            ).value
        if config.snapshot_every and state.epoch % config.snapshot_every == 0:
            state.snapshots[state.epoch] = state.model.snapshot()
            if out_dir is not None:
                save_checkpoint(
                    state.model, out_dir / f"checkpoint_epoch{state.epoch:03d}.npz", meta={"epoch": state.epoch}
                )

        logger.info(
            f"Epoch {report.epoch}: total={report.total:.6f} cont={report.cont:.6f} "
            f"d_p={report.d_p:.6f} corr={report.mean_abs_correlation:.4f} verdict={report.verdict}"
        )
        if on_epoch is not None:
            on_epoch(report)

        if report.validation is not None and config.patience is not None:
            if state.best_validation is None or report.validation > state.best_validation:
                state.best_validation = report.validation
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    state.stopped_early = True
                    logger.info(f"Early stop at epoch {state.epoch}: no improvement for {stale} epochs")
                    break

    if out_dir is not None:
        save_checkpoint(state.model, out_dir / "checkpoint_final.npz", meta={"epoch": state.epoch})
        write_history_csv(state.history, out_dir / "diagnostics.csv")
    return state
