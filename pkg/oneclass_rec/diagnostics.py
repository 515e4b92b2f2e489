"""
坍塌诊断
逐维方差、维度间平均绝对相关系数、两两距离暴力校验，以及坍塌类型判定
"""

import json
import logging
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .base import ConfigError
from .encoder import EmbeddingModel, all_item_reps

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    HEALTHY = "healthy"
    COLLAPSED = "collapsed"
    PARTIALLY_COLLAPSED = "partially_collapsed"
    SHRINKING = "shrinking"


@dataclass
class CollapseThresholds:
    """判定阈值"""
    var_floor: float = 1e-4
    corr_ceiling: float = 0.95
    shrink_floor: float = 1e-6
    unique_rtol: float = 1e-6
    dispersion_floor: float = 0.1
    unique_cap: int = 64

    def validate(self) -> "CollapseThresholds":
        if min(self.var_floor, self.shrink_floor, self.unique_rtol, self.dispersion_floor) < 0:
            raise ConfigError("Collapse thresholds must be non-negative")
        if not 0 <= self.corr_ceiling <= 1:
            raise ConfigError("corr_ceiling must lie in [0, 1]")
        if self.unique_cap < 2:
            raise ConfigError("unique_cap must be >= 2")
        return self


@dataclass
class CollapseReport:
    mean_dim_variance: float
    mean_abs_correlation: float
    d_p: float
    unique_rep_estimate: int
    centroid_norm: float
    dispersion: float
    num_rows: int
    dim: int
    verdict: str = Verdict.HEALTHY.value

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _as_matrix(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise ConfigError("Representation matrix must be 2-D")
    return Z


def mean_dim_variance(Z) -> float:
    """(1/d)·Σ_q 第 q 列总体方差"""
    Z = _as_matrix(Z)
    if Z.shape[0] < 2:
        raise ConfigError("mean_dim_variance needs at least 2 rows")
    return float(Z.var(axis=0).mean())


def mean_abs_correlation(Z) -> float:
    """q<s 维度对 Pearson 相关系数绝对值的均值；常数列记为 0"""
    Z = _as_matrix(Z)
    n, d = Z.shape
    if n < 2:
        raise ConfigError("mean_abs_correlation needs at least 2 rows")
    if d < 2:
        raise ConfigError("mean_abs_correlation needs at least 2 dimensions")

    centered = Z - Z.mean(axis=0)
    std = np.sqrt(np.mean(centered ** 2, axis=0))
    scale = np.max(np.abs(Z), axis=0)
    live = std > 1e-12 * np.maximum(scale, np.finfo(np.float64).tiny)

    corr = np.zeros((d, d))
    if live.sum() >= 2:
        normed = centered[:, live] / std[live]
        corr[np.ix_(live, live)] = normed.T @ normed / n
    upper = np.abs(corr[np.triu_indices(d, k=1)])
    return float(np.clip(upper.mean(), 0.0, 1.0))


def pairwise_distance_bruteforce(Z, chunk_size: int = 256) -> float:
    """(1/N²)·Σ_l Σ_s ‖z_l − z_s‖²，包含自身对"""
    Z = _as_matrix(Z)
    n = Z.shape[0]
    if n == 0:
        raise ConfigError("pairwise_distance_bruteforce needs at least 1 row")
    total = 0.0
    for start in range(0, n, chunk_size):
        diff = Z[start:start + chunk_size, None, :] - Z[None, :, :]
        total += float(np.sum(diff ** 2))
    return total / (n * n)


def unique_rows_estimate(Z, rtol: float = 1e-6, cap: int = 64) -> int:
    """贪心统计容差意义下互异的行数，超过 cap 时返回 cap"""
    Z = _as_matrix(Z)
    if Z.shape[0] == 0:
        return 0
    tol = rtol * max(float(np.max(np.abs(Z))), np.finfo(np.float64).tiny)
    remaining = Z
    count = 0
    while len(remaining) and count < cap:
        close = np.max(np.abs(remaining - remaining[0]), axis=1) <= tol
        remaining = remaining[~close]
        count += 1
    return count


def classify_collapse(report: CollapseReport, thresholds: Optional[CollapseThresholds] = None) -> Verdict:
    """按顺序应用规则，先命中者为准"""
    t = thresholds or CollapseThresholds()
    if report.unique_rep_estimate <= 1:
        return Verdict.COLLAPSED
    # 紧密聚在同一个非零点附近
    if report.mean_dim_variance < t.var_floor and report.dispersion < t.dispersion_floor:
        return Verdict.COLLAPSED
    if report.unique_rep_estimate == 2:
        return Verdict.PARTIALLY_COLLAPSED
    if report.mean_dim_variance < t.shrink_floor and report.mean_abs_correlation <= t.corr_ceiling:
        return Verdict.SHRINKING
    if report.mean_abs_correlation > t.corr_ceiling:
        return Verdict.PARTIALLY_COLLAPSED
    if report.mean_dim_variance < t.var_floor:
        return Verdict.COLLAPSED
    return Verdict.HEALTHY


def collapse_report(Z, thresholds: Optional[CollapseThresholds] = None) -> CollapseReport:
    """在完整表示矩阵上计算全部指标并给出判定"""
    t = (thresholds or CollapseThresholds()).validate()
    Z = _as_matrix(Z)
    variance = mean_dim_variance(Z)
    correlation = mean_abs_correlation(Z) if Z.shape[1] >= 2 else 0.0
    d_p = 2.0 * Z.shape[1] * variance
    centroid_norm = float(np.linalg.norm(Z.mean(axis=0)))
    dispersion = float(np.sqrt(d_p) / centroid_norm) if centroid_norm > 0 else float("inf")

    report = CollapseReport(
        mean_dim_variance=variance,
        mean_abs_correlation=correlation,
        d_p=d_p,
        unique_rep_estimate=unique_rows_estimate(Z, t.unique_rtol, t.unique_cap),
        centroid_norm=centroid_norm,
        dispersion=dispersion,
        num_rows=int(Z.shape[0]),
        dim=int(Z.shape[1]),
    )
    report.verdict = classify_collapse(report, t).value
    return report


def joint_representations(model: EmbeddingModel, features=None) -> np.ndarray:
    """用户表示与物品表示拼接成 (m+n)×d 矩阵"""
    return np.vstack([model.user_table, all_item_reps(model, features)])


def report_to_json(report: CollapseReport, path: Optional[Union[str, Path]] = None) -> str:
    text = json.dumps(report.to_dict(), indent=2)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info(f"Collapse report written: {path}")
    return text
