"""
目标函数
仅相似对的基础损失、带负样本的基线损失、hinge 平均两两距离损失、正交损失，
全部附带解析梯度，以及中心差分梯度校验
"""

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Dict, NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import expit, log_expit

from .base import ConfigError, NumericalError
from .config import ObjectiveConfig
from .encoder import EmbeddingModel, Mapping, init_model, item_reps, score_rows, user_reps
from .interactions import Batch

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Gradients:
    """行稀疏梯度：只覆盖批次触及的用户行与物品行"""
    users: np.ndarray
    items: np.ndarray
    d_users: np.ndarray
    d_items: np.ndarray

    @classmethod
    def zeros(cls, users, items, dim: int) -> "Gradients":
        users = np.unique(np.asarray(users, dtype=np.int64))
        items = np.unique(np.asarray(items, dtype=np.int64))
        return cls(users, items, np.zeros((len(users), dim)), np.zeros((len(items), dim)))

    @classmethod
    def from_rows(cls, user_idx, item_idx, user_rows: np.ndarray, item_rows: np.ndarray) -> "Gradients":
        """按行索引累加（同一行多次出现时求和）"""
        user_idx = np.asarray(user_idx, dtype=np.int64)
        item_idx = np.asarray(item_idx, dtype=np.int64)
        grad = cls.zeros(user_idx, item_idx, user_rows.shape[1])
        np.add.at(grad.d_users, np.searchsorted(grad.users, user_idx), user_rows)
        np.add.at(grad.d_items, np.searchsorted(grad.items, item_idx), item_rows)
        return grad

    @classmethod
    def from_block(cls, users: np.ndarray, items: np.ndarray, block_grad: np.ndarray) -> "Gradients":
        nu = len(users)
        return cls(users, items, block_grad[:nu].copy(), block_grad[nu:].copy())

    @property
    def dim(self) -> int:
        return int(self.d_users.shape[1])

    def scaled(self, alpha: float) -> "Gradients":
        return Gradients(self.users, self.items, alpha * self.d_users, alpha * self.d_items)

    def add(self, other: "Gradients", alpha: float = 1.0) -> "Gradients":
        """返回 self + alpha·other，索引取并集"""
        users = np.union1d(self.users, other.users)
        items = np.union1d(self.items, other.items)
        out = Gradients.zeros(users, items, self.dim)
        out.d_users[np.searchsorted(users, self.users)] += self.d_users
        out.d_items[np.searchsorted(items, self.items)] += self.d_items
        out.d_users[np.searchsorted(users, other.users)] += alpha * other.d_users
        out.d_items[np.searchsorted(items, other.items)] += alpha * other.d_items
        return out

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.d_users)) and np.all(np.isfinite(self.d_items)))


class LossTerm(NamedTuple):
    value: float
    grad: Gradients


@dataclass(eq=False)
class BatchStats:
    """批次表示块 Z（b×d）的逐维统计量"""
    block: np.ndarray
    per_dim_mean: np.ndarray
    per_dim_var: np.ndarray
    centered: np.ndarray
    centered_gram: np.ndarray

    @property
    def b(self) -> int:
        return int(self.block.shape[0])

    @property
    def d(self) -> int:
        return int(self.block.shape[1])

    @property
    def d_p(self) -> float:
        """平均两两距离 = 2·Σ_q var_q"""
        return float(2.0 * self.per_dim_var.sum())


@dataclass
class LossBreakdown:
    cont: float
    base: float
    hinge: float
    orth: float
    total: float
    d_p: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def _pair_rows(users, items, model: EmbeddingModel, features=None) -> Tuple[np.ndarray, np.ndarray]:
    return user_reps(model, users), item_reps(model, items, features)


def loss_cont(batch: Batch, model: EmbeddingModel, features=None) -> LossTerm:
    """E_cont：相似对表示间的平方距离，按批次大小归一"""
    users, items = batch.pairs[:, 0], batch.pairs[:, 1]
    u_rows, i_rows = _pair_rows(users, items, model, features)
    diff = u_rows - i_rows
    size = max(batch.size, 1)
    value = float(np.sum(diff ** 2) / size)
    g = 2.0 * diff / size
    return LossTerm(value, Gradients.from_rows(users, items, g, -g))


def loss_mse_similar(batch: Batch, model: EmbeddingModel, mapping=Mapping.DOT, features=None) -> LossTerm:
    """E_MSE：相似对的 (score − 1)²"""
    users, items = batch.pairs[:, 0], batch.pairs[:, 1]
    u_rows, i_rows = _pair_rows(users, items, model, features)
    scores, d_user, d_item = score_rows(u_rows, i_rows, mapping)
    size = max(batch.size, 1)
    resid = scores - 1.0
    value = float(np.sum(resid ** 2) / size)
    coef = (2.0 * resid / size)[:, None]
    return LossTerm(value, Gradients.from_rows(users, items, coef * d_user, coef * d_item))


def loss_bce(users, items, labels, model: EmbeddingModel, mapping=Mapping.DOT, features=None) -> LossTerm:
    """二元交叉熵，ŷ = σ(score)；log σ 使用稳定实现"""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.float64)
    u_rows, i_rows = _pair_rows(users, items, model, features)
    scores, d_user, d_item = score_rows(u_rows, i_rows, mapping)
    n = max(len(labels), 1)
    losses = -(labels * log_expit(scores) + (1.0 - labels) * log_expit(-scores))
    coef = ((expit(scores) - labels) / n)[:, None]
    return LossTerm(float(losses.sum() / n), Gradients.from_rows(users, items, coef * d_user, coef * d_item))


def loss_bpr(users, pos_items, neg_items, model: EmbeddingModel, mapping=Mapping.DOT, features=None) -> LossTerm:
    """BPR：mean −ln σ(ŷ_jk − ŷ_jl)"""
    users = np.asarray(users, dtype=np.int64)
    pos_items = np.asarray(pos_items, dtype=np.int64)
    neg_items = np.asarray(neg_items, dtype=np.int64)
    u_rows = user_reps(model, users)
    p_rows = item_reps(model, pos_items, features)
    n_rows = item_reps(model, neg_items, features)
    s_pos, du_pos, di_pos = score_rows(u_rows, p_rows, mapping)
    s_neg, du_neg, di_neg = score_rows(u_rows, n_rows, mapping)
    x = s_pos - s_neg
    n = max(len(x), 1)
    value = float(-log_expit(x).sum() / n)
    coef = (-expit(-x) / n)[:, None]
    grad = Gradients.from_rows(
        users,
        np.concatenate([pos_items, neg_items]),
        coef * (du_pos - du_neg),
        np.vstack([coef * di_pos, -coef * di_neg]),
    )
    return LossTerm(value, grad)


def loss_contrastive_neg(
    users, items, labels, model: EmbeddingModel, margin_d: float, neg_weight: float = 1.0, features=None
) -> LossTerm:
    """带负样本的对比损失：y‖Δ‖² + (1−y)·λ·max(0, m_d − ‖Δ‖)²"""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.float64)
    u_rows, i_rows = _pair_rows(users, items, model, features)
    diff = u_rows - i_rows
    dist = np.linalg.norm(diff, axis=1)
    gap = np.maximum(0.0, margin_d - dist)
    n = max(len(labels), 1)
    value = float(np.sum(labels * dist ** 2 + (1.0 - labels) * neg_weight * gap ** 2) / n)

    # ‖Δ‖ = 0 的负对取次梯度 0
    safe = np.where(dist > 0, dist, 1.0)
    neg_coef = np.where(dist > 0, -2.0 * neg_weight * gap / safe, 0.0)
    coef = (labels * 2.0 + (1.0 - labels) * neg_coef) / n
    g = coef[:, None] * diff
    return LossTerm(value, Gradients.from_rows(users, items, g, -g))


def batch_stats(block: np.ndarray) -> BatchStats:
    """逐维均值、总体方差（除以 b）与中心化叉积矩阵"""
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] < 2:
        raise ConfigError("batch_stats needs a block with at least 2 rows")
    mean = block.mean(axis=0)
    centered = block - mean
    var = np.mean(centered ** 2, axis=0)
    gram = centered.T @ centered
    return BatchStats(block=block, per_dim_mean=mean, per_dim_var=var, centered=centered, centered_gram=gram)


def loss_hinge_pairwise(stats: BatchStats, margin_p: float) -> Tuple[float, np.ndarray]:
    """max(0, m_p − d_p)²；d_p ≥ m_p 时梯度为 0"""
    gap = margin_p - stats.d_p
    if gap <= 0:
        return 0.0, np.zeros_like(stats.block)
    # ∂d_p/∂z_lq = (4/b)(z_lq − mean_q)
    grad = -2.0 * gap * (4.0 / stats.b) * stats.centered
    return float(gap ** 2), grad


def loss_orth(stats: BatchStats, variant: str = "squared") -> Tuple[float, np.ndarray]:
    """中心化列叉积的严格上三角和（raw）或平方和（squared），除以 d(d−1)/2"""
    d = stats.d
    if d < 2:
        return 0.0, np.zeros_like(stats.block)
    num_pairs = d * (d - 1) / 2.0
    gram = stats.centered_gram
    if variant == "raw":
        value = (gram.sum() - np.trace(gram)) / 2.0
        grad = stats.centered.sum(axis=1, keepdims=True) - stats.centered
    elif variant == "squared":
        off = gram - np.diag(np.diag(gram))
        value = np.sum(off ** 2) / 2.0
        grad = 2.0 * stats.centered @ off
    else:
        raise ConfigError(f"Unknown orthogonality variant: {variant}")
    return float(value / num_pairs), grad / num_pairs


def batch_block(batch: Batch, model: EmbeddingModel, features=None) -> np.ndarray:
    """批次内去重后的用户表示与物品表示纵向拼接"""
    return np.vstack([
        user_reps(model, batch.unique_users),
        item_reps(model, batch.unique_items, features),
    ])


def _base_term(
    config: ObjectiveConfig, batch: Batch, model: EmbeddingModel, features, negatives, cont: LossTerm
) -> LossTerm:
    if config.base_loss == "cont":
        return cont
    if config.base_loss == "mse":
        return loss_mse_similar(batch, model, config.mapping, features)

    if negatives is None:
        raise ConfigError(f"Base loss '{config.base_loss}' needs sampled negatives")
    negatives = np.asarray(negatives, dtype=np.int64).reshape(batch.size, -1)
    per_pair = negatives.shape[1]
    pos_users, pos_items = batch.pairs[:, 0], batch.pairs[:, 1]
    neg_users = np.repeat(pos_users, per_pair)
    neg_items = negatives.reshape(-1)

    if config.base_loss == "bpr":
        return loss_bpr(neg_users, np.repeat(pos_items, per_pair), neg_items, model, config.mapping, features)

    users = np.concatenate([pos_users, neg_users])
    items = np.concatenate([pos_items, neg_items])
    labels = np.concatenate([np.ones(batch.size), np.zeros(len(neg_items))])
    if config.base_loss == "bce":
        return loss_bce(users, items, labels, model, config.mapping, features)
    return loss_contrastive_neg(
        users, items, labels, model, config.margin_d, config.baseline_neg_weight, features
    )


def total_objective(
    config: ObjectiveConfig,
    batch: Batch,
    model: EmbeddingModel,
    features=None,
    negatives: Optional[np.ndarray] = None,
) -> Tuple[LossBreakdown, Gradients]:
    """total = λ1·base + λ2·hinge + λ3·orth；hinge/orth 在批次去重表示块上计算"""
    lambda1, lambda2, lambda3 = config.effective_lambdas()
    cont = loss_cont(batch, model, features)
    base = _base_term(config, batch, model, features, negatives, cont)

    stats = batch_stats(batch_block(batch, model, features))
    hinge_value, hinge_grad = loss_hinge_pairwise(stats, config.margin_p)
    orth_value, orth_grad = loss_orth(stats, config.orth_variant)
    block_grad = Gradients.from_block(
        batch.unique_users, batch.unique_items, lambda2 * hinge_grad + lambda3 * orth_grad
    )
    grad = block_grad.add(base.grad, lambda1)

    breakdown = LossBreakdown(
        cont=cont.value,
        base=base.value,
        hinge=hinge_value,
        orth=orth_value,
        total=lambda1 * base.value + lambda2 * hinge_value + lambda3 * orth_value,
        d_p=stats.d_p,
    )
    return breakdown, grad


def block_loss_op(batch: Batch, fn: Callable[[BatchStats], Tuple[float, np.ndarray]]):
    """把作用在表示块上的损失包装成模型上的损失"""
    def op(model: EmbeddingModel) -> LossTerm:
        value, block_grad = fn(batch_stats(batch_block(batch, model)))
        return LossTerm(value, Gradients.from_block(batch.unique_users, batch.unique_items, block_grad))
    return op


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    checked: int
    skipped: bool = False
    reason: str = ""

    def passed(self, threshold: float) -> bool:
        return self.skipped or self.max_rel_error < threshold


def finite_difference_check(
    loss_op: Callable[[EmbeddingModel], LossTerm],
    model: EmbeddingModel,
    eps: float = 1e-5,
    near_kink: Optional[Callable[[EmbeddingModel], bool]] = None,
    floor: float = 1e-5,
    name: str = "loss",
) -> GradCheckResult:
    """中心差分 (f(θ+εe) − f(θ−εe))/2ε 与解析梯度逐坐标比较，返回最大相对误差"""
    if eps <= 0:
        raise ConfigError("eps must be > 0")
    if near_kink is not None and near_kink(model):
        return GradCheckResult(name, 0.0, 0, skipped=True, reason="non-differentiable point")

    value, grad = loss_op(model)
    if not np.isfinite(value):
        raise NumericalError(f"{name}: non-finite loss value")

    worst = 0.0
    checked = 0
    for table, rows, analytic in (
        (model.user_table, grad.users, grad.d_users),
        (model.item_table, grad.items, grad.d_items),
    ):
        for pos, row in enumerate(rows):
            for q in range(table.shape[1]):
                original = table[row, q]
                table[row, q] = original + eps
                f_plus = loss_op(model).value
                table[row, q] = original - eps
                f_minus = loss_op(model).value
                table[row, q] = original
                if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                    raise NumericalError(f"{name}: non-finite loss under perturbation")
                numeric = (f_plus - f_minus) / (2.0 * eps)
                exact = analytic[pos, q]
                err = abs(numeric - exact) / max(abs(numeric), abs(exact), floor)
                worst = max(worst, err)
                checked += 1
    return GradCheckResult(name, float(worst), checked)


def _corrupted(op, factor: float = 1.01):
    def wrapped(model):
        term = op(model)
        return LossTerm(term.value, term.grad.scaled(factor))
    return wrapped


def gradient_check_suite(
    dim: int = 5,
    num_users: int = 6,
    num_items: int = 6,
    seed: int = 0,
    eps: float = 1e-5,
    corrupt: Optional[str] = None,
) -> Dict[str, GradCheckResult]:
    """在带种子的小模型上校验每一项损失的解析梯度"""
    rng = np.random.default_rng(seed)
    model = init_model(num_users, num_items, dim, init_scale=1.0, rng_seed=seed)

    num_pos = max(2, (num_users * num_items) // 3)
    cells = rng.choice(num_users * num_items, size=2 * num_pos, replace=False)
    pos_cells, neg_cells = cells[:num_pos], cells[num_pos:]
    batch = Batch.from_pairs(np.column_stack([pos_cells // num_items, pos_cells % num_items]))
    neg_users, neg_items = neg_cells // num_items, neg_cells % num_items
    users = np.concatenate([batch.pairs[:, 0], neg_users])
    items = np.concatenate([batch.pairs[:, 1], neg_items])
    labels = np.concatenate([np.ones(num_pos), np.zeros(num_pos)])

    neg_dist = np.linalg.norm(model.user_table[neg_users] - model.item_table[neg_items], axis=1)
    margin_d = float(np.median(neg_dist))

    d_p0 = batch_stats(batch_block(batch, model)).d_p
    margin_p = 2.0 * d_p0 + 1.0
    full_config = ObjectiveConfig(
        base_loss="cont", lambda1=1.0, lambda2=1.0, lambda3=1.0, margin_p=margin_p
    )

    def contrastive_kink(m):
        dist = np.linalg.norm(m.user_table[neg_users] - m.item_table[neg_items], axis=1)
        return bool(np.any(np.abs(dist - margin_d) < 1e-3))

    def hinge_kink(m):
        return abs(batch_stats(batch_block(batch, m)).d_p - margin_p) < 1e-4

    def total_op(m):
        breakdown, grad = total_objective(full_config, batch, m)
        return LossTerm(breakdown.total, grad)

    probes = {
        "cont": (lambda m: loss_cont(batch, m), None),
        "mse-similar": (lambda m: loss_mse_similar(batch, m, Mapping.DOT), None),
        "mse-cosine": (lambda m: loss_mse_similar(batch, m, Mapping.COSINE), None),
        "bce": (lambda m: loss_bce(users, items, labels, m), None),
        "bpr": (lambda m: loss_bpr(batch.pairs[:, 0], batch.pairs[:, 1], neg_items, m), None),
        "contrastive-neg": (
            lambda m: loss_contrastive_neg(users, items, labels, m, margin_d, 0.5), contrastive_kink
        ),
        "hinge-pairwise": (block_loss_op(batch, lambda s: loss_hinge_pairwise(s, margin_p)), hinge_kink),
        "orth": (block_loss_op(batch, lambda s: loss_orth(s, "squared")), None),
        "orth-raw": (block_loss_op(batch, lambda s: loss_orth(s, "raw")), None),
        "total": (total_op, hinge_kink),
    }
    if corrupt is not None and corrupt not in probes:
        raise ConfigError(f"Unknown loss term to corrupt: {corrupt}")

    results = {}
    for name, (op, kink) in probes.items():
        if name == corrupt:
            op = _corrupted(op)
        results[name] = finite_difference_check(op, model, eps=eps, near_kink=kink, name=name)
        logger.info(f"Gradient check {name}: max relative error {results[name].max_rel_error:.3e}")
    return results
