"""
命令行入口
prepare / train / eval / diagnose / synth / gradcheck / serve
"""

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv

from .base import (
    CheckpointMismatchError,
    ConfigError,
    GradientCheckError,
    NumericalError,
    ToolkitError,
)
from .config import (
    BASE_LOSSES,
    ORTH_VARIANTS,
    Ablation,
    ObjectiveConfig,
    TrainConfig,
    default_margin_p,
    load_config_file,
    resolve_settings,
)
from .diagnostics import collapse_report, joint_representations, report_to_json
from .encoder import Mapping, load_checkpoint
from .evaluation import (
    USER_MODES,
    EvalProtocol,
    append_metrics_jsonl,
    evaluate_run,
    load_metrics_jsonl,
    write_metrics_jsonl,
)
from .experiments import (
    SyntheticConfig,
    run_seed_sweep,
    run_size_sweep,
    run_synthetic_ablation,
    summarize_seed_sweep,
    synthetic_dataset,
    synthetic_train_config,
)
from .interactions import (
    FORMATS,
    WarmSplit,
    cold_start_split,
    component_count,
    leave_one_out_split,
    load_interactions,
    load_item_features,
    load_split,
    save_component_labels,
    save_interactions,
    save_split,
)
from .objective import gradient_check_suite
from .trainer import TrainState, fit

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

LOG_LEVEL_ENV = "ONECLASS_REC_LOG_LEVEL"
GRADCHECK_THRESHOLD = 1e-4

# 配置文件允许出现的全部键
SETTING_KINDS = {
    "data": "str",
    "format": "str",
    "features": "str",
    "split": "str",
    "checkpoint": "str",
    "out_dir": "str",
    "dim": "int",
    "batch": "int",
    "lr": "float",
    "epochs": "int",
    "init_scale": "float",
    "lambda1": "float",
    "lambda2": "float",
    "lambda3": "float",
    "margin_p": "float",
    "margin_d": "float",
    "base": "str",
    "mapping": "str",
    "ablate": "str",
    "negatives": "int",
    "neg_weight": "float",
    "regularize_baselines": "bool",
    "orth_variant": "str",
    "snapshot_every": "int",
    "patience": "int",
    "seed": "int",
    "kind": "str",
    "candidates": "int",
    "cold_fraction": "float",
    "k": "int_list",
    "user_mode": "str",
    "results": "str",
    "components": "int",
    "users_per": "int",
    "items_per": "int",
    "edge_prob": "float",
    "head_edge_prob": "float",
    "pair_fraction": "float",
    "repeats": "int",
    "size_sweep": "float_list",
}

TRAIN_DEFAULTS = {
    "data": None,
    "format": "pair-list",
    "features": None,
    "split": None,
    "out_dir": None,
    "dim": 100,
    "batch": 128,
    "lr": 0.5,
    "epochs": 50,
    "init_scale": 0.1,
    "lambda1": 0.01,
    "lambda2": 1.0,
    "lambda3": 1.0,
    "margin_p": None,
    "margin_d": 1.0,
    "base": "cont",
    "mapping": "dot",
    "ablate": "none",
    "negatives": 1,
    "neg_weight": 1.0,
    "regularize_baselines": False,
    "orth_variant": "squared",
    "snapshot_every": 0,
    "patience": None,
    "pair_fraction": 1.0,
    "seed": 0,
}

PREPARE_DEFAULTS = {
    "data": None,
    "format": "pair-list",
    "out_dir": None,
    "kind": "warm",
    "candidates": None,
    "cold_fraction": 0.2,
    "seed": 0,
}

EVAL_DEFAULTS = {
    "data": None,
    "format": "pair-list",
    "split": None,
    "checkpoint": None,
    "features": None,
    "out_dir": None,
    "k": [10],
    "mapping": "dot",
    "user_mode": "table",
    "results": None,
}

DIAGNOSE_DEFAULTS = {
    "checkpoint": None,
    "data": None,
    "format": "pair-list",
    "features": None,
    "out_dir": None,
}

_SYNTHETIC = SyntheticConfig()
_SYNTHETIC_TRAIN = synthetic_train_config()

SYNTH_DEFAULTS = {
    "components": _SYNTHETIC.num_components,
    "users_per": _SYNTHETIC.users_per,
    "items_per": _SYNTHETIC.items_per,
    "edge_prob": _SYNTHETIC.edge_prob,
    "head_edge_prob": _SYNTHETIC.head_edge_prob,
    "seed": _SYNTHETIC.seed,
    "out_dir": None,
    "dim": _SYNTHETIC_TRAIN.dim,
    "batch": _SYNTHETIC_TRAIN.batch_size,
    "lr": _SYNTHETIC_TRAIN.learning_rate,
    "epochs": _SYNTHETIC_TRAIN.epochs,
    "init_scale": _SYNTHETIC_TRAIN.init_scale,
    "lambda1": _SYNTHETIC_TRAIN.objective.lambda1,
    "lambda2": _SYNTHETIC_TRAIN.objective.lambda2,
    "lambda3": _SYNTHETIC_TRAIN.objective.lambda3,
    "margin_p": _SYNTHETIC_TRAIN.objective.margin_p,
    "orth_variant": _SYNTHETIC_TRAIN.objective.orth_variant,
    "pair_fraction": _SYNTHETIC_TRAIN.pair_fraction,
    "repeats": 1,
    "size_sweep": None,
}


@dataclass
class RunManifest:
    """一次运行的完整记录：解析后的配置、种子与产物路径"""
    command: str
    config: Dict[str, Any]
    seeds: Dict[str, int] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)

    @property
    def run_id(self) -> str:
        payload = json.dumps({"command": self.command, "config": self.config}, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]

    def to_dict(self) -> Dict[str, Any]:
        return dict(run_id=self.run_id, **asdict(self))

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        self.artifacts["manifest"] = str(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, default=str), encoding="utf-8")
        return path


def _resolve(args: argparse.Namespace, defaults: Dict[str, Any]) -> Dict[str, Any]:
    """命令行 > 配置文件 > 默认值，只保留本命令的键"""
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    cli = {key: getattr(args, key, None) for key in defaults}
    resolved = resolve_settings(cli, file_values, defaults, SETTING_KINDS)
    return {key: resolved[key] for key in defaults}


def _require(settings: Dict[str, Any], *keys: str):
    for key in keys:
        if settings.get(key) is None:
            raise ConfigError(f"--{key.replace('_', '-')} is required")


def _out_dir(settings: Dict[str, Any], manifest: RunManifest) -> Path:
    out_dir = Path(settings["out_dir"] or Path("runs") / f"{manifest.command}-{manifest.run_id}")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _load_features(path: Optional[str], ds):
    return load_item_features(path, ds) if path else None


def cmd_prepare(args: argparse.Namespace) -> int:
    """构建暖启动或冷启动划分"""
    settings = _resolve(args, PREPARE_DEFAULTS)
    _require(settings, "data")
    ds = load_interactions(settings["data"], settings["format"])
    if settings["kind"] == "warm":
        candidates = 99 if settings["candidates"] is None else settings["candidates"]
        split = leave_one_out_split(ds, candidates_per_case=candidates, rng_seed=settings["seed"])
    elif settings["kind"] == "cold":
        pool = 1000 if settings["candidates"] is None else settings["candidates"]
        split = cold_start_split(
            ds, cold_fraction=settings["cold_fraction"], candidate_pool=pool, rng_seed=settings["seed"]
        )
    else:
        raise ConfigError(f"Unknown split kind: {settings['kind']}")

    manifest = RunManifest("prepare", settings, seeds={"split": settings["seed"]})
    out_dir = _out_dir(settings, manifest)
    save_split(split, out_dir / "split.json")
    save_interactions(split.train, out_dir / "train.txt")
    manifest.artifacts.update({"split": str(out_dir / "split.json"), "train": str(out_dir / "train.txt")})
    manifest.write(out_dir)
    args.manifest = manifest
    print(f"{settings['kind']} split: {split.num_cases} test cases -> {out_dir / 'split.json'}")
    return EXIT_OK


def build_train_config(settings: Dict[str, Any]) -> TrainConfig:
    try:
        ablation = Ablation(settings["ablate"])
    except ValueError:
        raise ConfigError(f"Unknown ablation: {settings['ablate']}")
    objective = ObjectiveConfig(
        base_loss=settings["base"],
        lambda1=settings["lambda1"],
        lambda2=settings["lambda2"],
        lambda3=settings["lambda3"],
        margin_p=settings["margin_p"],
        margin_d=settings["margin_d"],
        mapping=settings["mapping"],
        baseline_neg_weight=settings["neg_weight"],
        orth_variant=settings["orth_variant"],
        num_negatives=settings["negatives"],
        regularize_baselines=settings["regularize_baselines"],
    )
    config = TrainConfig(
        epochs=settings["epochs"],
        learning_rate=settings["lr"],
        batch_size=settings["batch"],
        dim=settings["dim"],
        init_scale=settings["init_scale"],
        seed=settings["seed"],
        snapshot_every=settings["snapshot_every"],
        patience=settings["patience"],
        pair_fraction=settings["pair_fraction"],
        objective=ablation.apply(objective),
    )
    return config.validate()


def cmd_train(args: argparse.Namespace) -> int:
    """训练并写出检查点、诊断 CSV、坍塌报告与清单"""
    settings = _resolve(args, TRAIN_DEFAULTS)
    _require(settings, "data")
    if settings["margin_p"] is None:
        settings["margin_p"] = default_margin_p(settings["data"])
    config = build_train_config(settings)

    ds = load_interactions(settings["data"], settings["format"])
    features = _load_features(settings["features"], ds)
    train_ds, validation = ds, None
    if settings["split"]:
        split = load_split(settings["split"], ds)
        train_ds = split.train
        if config.patience is not None and isinstance(split, WarmSplit):
            validation = split
    elif config.patience is not None:
        raise ConfigError("--patience needs a warm --split for validation")

    manifest = RunManifest("train", settings, seeds={"train": config.seed})
    out_dir = _out_dir(settings, manifest)
    state = fit(train_ds, config, features=features, validation=validation, out_dir=out_dir)

    report = collapse_report(joint_representations(state.model, features))
    report_to_json(report, out_dir / "collapse.json")
    manifest.artifacts.update({
        "checkpoint": str(out_dir / "checkpoint_final.npz"),
        "diagnostics_csv": str(out_dir / "diagnostics.csv"),
        "collapse_report": str(out_dir / "collapse.json"),
    })
    manifest.artifacts.update({
        f"checkpoint_epoch{epoch:03d}": str(out_dir / f"checkpoint_epoch{epoch:03d}.npz")
        for epoch in state.snapshots
    })
    manifest.write(out_dir)
    args.manifest = manifest
    print(f"Trained {state.epoch} epochs: final loss {state.history[-1].total:.6f}, verdict {report.verdict}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """在冻结检查点上计算 HR@K 或 recall@K"""
    settings = _resolve(args, EVAL_DEFAULTS)
    _require(settings, "data", "split", "checkpoint")
    protocol = EvalProtocol(ks=tuple(settings["k"]), mapping=settings["mapping"], user_mode=settings["user_mode"])
    ds = load_interactions(settings["data"], settings["format"])
    split = load_split(settings["split"], ds)
    protocol.kind = "warm" if isinstance(split, WarmSplit) else "cold"
    protocol.validate()
    model, meta = load_checkpoint(settings["checkpoint"])
    if model.num_users != ds.num_users or model.num_items != ds.num_items:
        raise CheckpointMismatchError(
            f"Checkpoint is {model.num_users}x{model.num_items}, dataset is {ds.num_users}x{ds.num_items}"
        )
    features = _load_features(settings["features"], ds)
    if model.feature_encoder is not None and features is not None:
        if features.shape[1] != model.feature_encoder.feature_dim:
            raise CheckpointMismatchError(
                f"Checkpoint encoder expects {model.feature_encoder.feature_dim} features, got {features.shape[1]}"
            )

    state = TrainState(model=model, epoch=int(meta.get("epoch") or 0))
    results = evaluate_run(state, split, protocol, features)

    manifest = RunManifest("eval", settings, seeds={"split": split.seed})
    out_dir = _out_dir(settings, manifest)
    write_metrics_jsonl(results, out_dir / "metrics.jsonl", manifest.run_id)
    manifest.artifacts["metrics"] = str(out_dir / "metrics.jsonl")
    if settings["results"]:
        ledger = Path(settings["results"])
        if ledger.is_file() and ledger.stat().st_size and manifest.run_id in set(load_metrics_jsonl(ledger)["run_id"]):
            logger.info(f"Run {manifest.run_id} already recorded in {ledger}")
        else:
            append_metrics_jsonl(results, ledger, manifest.run_id)
        manifest.artifacts["results"] = str(ledger)
    manifest.write(out_dir)
    args.manifest = manifest
    for result in results:
        print(f"{result.metric}@{result.k}: {result.value:.4f} ({result.num_cases} cases)")
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    """检查点 → 坍塌报告 JSON"""
    settings = _resolve(args, DIAGNOSE_DEFAULTS)
    _require(settings, "checkpoint")
    model, _ = load_checkpoint(settings["checkpoint"])
    features = None
    if model.item_source == "features" or settings["features"]:
        _require(settings, "data", "features")
        features = _load_features(settings["features"], load_interactions(settings["data"], settings["format"]))

    report = collapse_report(joint_representations(model, features))
    manifest = RunManifest("diagnose", settings)
    out_dir = _out_dir(settings, manifest)
    report_to_json(report, out_dir / "collapse.json")
    manifest.artifacts["collapse_report"] = str(out_dir / "collapse.json")
    manifest.write(out_dir)
    args.manifest = manifest
    print(
        f"verdict={report.verdict} variance={report.mean_dim_variance:.3e} "
        f"correlation={report.mean_abs_correlation:.4f} unique={report.unique_rep_estimate}"
    )
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    """生成合成连通分量数据；--train 时接着训练每个消融并给出判定"""
    settings = _resolve(args, SYNTH_DEFAULTS)
    synthetic = SyntheticConfig(
        num_components=settings["components"],
        users_per=settings["users_per"],
        items_per=settings["items_per"],
        edge_prob=settings["edge_prob"],
        head_edge_prob=settings["head_edge_prob"],
        seed=settings["seed"],
    ).validate()
    if settings["repeats"] < 1:
        raise ConfigError("--repeats must be >= 1")
    ablations = [Ablation(a) for a in (args.ablate or ["none"])]
    settings["ablate"] = [a.value for a in ablations]
    settings["evaluate"] = bool(args.evaluate or settings["repeats"] > 1)
    settings["train"] = bool(args.train or settings["evaluate"] or args.ablate)

    ds = synthetic_dataset(synthetic)
    manifest = RunManifest("synth", settings, seeds={"generator": synthetic.seed, "train": synthetic.seed})
    out_dir = _out_dir(settings, manifest)
    save_interactions(ds, out_dir / "synthetic.txt")
    save_component_labels(ds, out_dir / "components.csv")
    manifest.artifacts.update({"data": str(out_dir / "synthetic.txt"), "labels": str(out_dir / "components.csv")})
    print(
        f"Synthetic graph: {ds.num_users} users, {ds.num_items} items, {ds.num_pairs} pairs, "
        f"{component_count(ds)} components"
    )
    if not settings["train"] and not settings["size_sweep"]:
        manifest.write(out_dir)
        args.manifest = manifest
        return EXIT_OK

    train = synthetic_train_config(
        epochs=settings["epochs"],
        learning_rate=settings["lr"],
        batch_size=settings["batch"],
        dim=settings["dim"],
        init_scale=settings["init_scale"],
        pair_fraction=settings["pair_fraction"],
        seed=synthetic.seed,
        objective=ObjectiveConfig(
            lambda1=settings["lambda1"],
            lambda2=settings["lambda2"],
            lambda3=settings["lambda3"],
            margin_p=settings["margin_p"],
            orth_variant=settings["orth_variant"],
        ),
    ).validate()

    if settings["train"]:
        report = run_synthetic_ablation(synthetic, ablations, train, evaluate=settings["evaluate"])
        report.write_json(out_dir / "synthetic_report.json")
        manifest.artifacts["report"] = str(out_dir / "synthetic_report.json")
        for name, outcome in report.outcomes.items():
            hr = f" hr@10={outcome.hit_ratio:.4f}" if outcome.hit_ratio is not None else ""
            print(
                f"{name}: verdict={outcome.collapse.verdict} "
                f"corr={outcome.collapse.mean_abs_correlation:.4f} "
                f"variance={outcome.collapse.mean_dim_variance:.3e}{hr}"
            )

    if settings["repeats"] > 1:
        seeds = range(synthetic.seed, synthetic.seed + settings["repeats"])
        table = run_seed_sweep(synthetic, list(seeds), ablations, train)
        table.to_csv(out_dir / "seed_sweep.csv", index=False)
        manifest.artifacts["seed_sweep"] = str(out_dir / "seed_sweep.csv")
        for row in summarize_seed_sweep(table).itertuples():
            print(f"{row.ablation}: mean hr@10={row.mean:.4f} over {row.count} seeds")

    if settings["size_sweep"]:
        table = run_size_sweep(ds, settings["size_sweep"], train=train, seed=synthetic.seed)
        table.to_csv(out_dir / "size_sweep.csv", index=False)
        manifest.artifacts["size_sweep"] = str(out_dir / "size_sweep.csv")
        for row in table.itertuples():
            print(f"{row.method} fraction={row.fraction:g} pairs={row.num_pairs}: hr@10={row.hit_ratio:.4f}")

    manifest.write(out_dir)
    args.manifest = manifest
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    """逐项中心差分梯度校验；全部低于阈值时返回 0"""
    results = gradient_check_suite(
        dim=args.dim,
        num_users=args.users,
        num_items=args.items,
        seed=args.seed,
        eps=args.eps,
        corrupt=args.corrupt_term,
    )
    failed = []
    for name, result in results.items():
        status = "skipped" if result.skipped else ("ok" if result.passed(args.threshold) else "FAIL")
        print(f"{name:16s} {result.max_rel_error:.3e} {status}")
        if not result.passed(args.threshold):
            failed.append(name)
    if failed:
        raise GradientCheckError(
            f"Gradient check failed for: {', '.join(failed)}", data={"terms": failed, "threshold": args.threshold}
        )
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    """启动 HTTP 工具网关"""
    from .gateway import serve

    serve(host=args.host, port=args.port)
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--log-level", default=None, help="logging level (default INFO)")
    parser.add_argument("--out-dir", dest="out_dir")


def _add_data(parser: argparse.ArgumentParser):
    parser.add_argument("--data")
    parser.add_argument("--format", choices=FORMATS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oneclass-rec", description="One-class recommendation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build a warm or cold evaluation split")
    _add_common(p)
    _add_data(p)
    p.add_argument("--kind", choices=("warm", "cold"))
    p.add_argument("--candidates", type=int, help="negatives per warm case / cold candidate pool")
    p.add_argument("--cold-fraction", dest="cold_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_prepare)

    p = sub.add_parser("train", help="train representations")
    _add_common(p)
    _add_data(p)
    p.add_argument("--features")
    p.add_argument("--split")
    p.add_argument("--dim", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--init-scale", dest="init_scale", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--lambda3", type=float)
    p.add_argument("--margin-p", dest="margin_p", type=float)
    p.add_argument("--margin-d", dest="margin_d", type=float)
    p.add_argument("--base", choices=BASE_LOSSES)
    p.add_argument("--mapping", choices=[m.value for m in Mapping])
    p.add_argument("--ablate", choices=[a.value for a in Ablation])
    p.add_argument("--negatives", type=int)
    p.add_argument("--neg-weight", dest="neg_weight", type=float)
    p.add_argument("--regularize-baselines", dest="regularize_baselines", action="store_true", default=None)
    p.add_argument("--orth-variant", dest="orth_variant", choices=ORTH_VARIANTS)
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--pair-fraction", dest="pair_fraction", type=float, help="train on a seeded fraction of the pairs")
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    _add_common(p)
    _add_data(p)
    p.add_argument("--split")
    p.add_argument("--checkpoint")
    p.add_argument("--features")
    p.add_argument("--k", type=int, action="append")
    p.add_argument("--mapping", choices=[m.value for m in Mapping])
    p.add_argument("--user-mode", dest="user_mode", choices=USER_MODES)
    p.add_argument("--results", help="shared JSON-lines ledger, appended once per run id")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("diagnose", help="collapse report of a checkpoint")
    _add_common(p)
    _add_data(p)
    p.add_argument("--checkpoint")
    p.add_argument("--features")
    p.set_defaults(handler=cmd_diagnose)

    p = sub.add_parser("synth", help="synthetic component graphs and ablation runs")
    _add_common(p)
    p.add_argument("--components", type=int)
    p.add_argument("--users-per", dest="users_per", type=int)
    p.add_argument("--items-per", dest="items_per", type=int)
    p.add_argument("--edge-prob", dest="edge_prob", type=float)
    p.add_argument("--head-edge-prob", dest="head_edge_prob", type=float, help="edge probability of component 0")
    p.add_argument("--seed", type=int)
    p.add_argument(
        "--ablate", action="append", choices=[a.value for a in Ablation], help="ablation to train (implies --train)"
    )
    p.add_argument("--train", action="store_true")
    p.add_argument("--evaluate", action="store_true", help="also report within-component HR@10 (implies --train)")
    p.add_argument("--dim", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--init-scale", dest="init_scale", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--lambda3", type=float)
    p.add_argument("--margin-p", dest="margin_p", type=float)
    p.add_argument("--orth-variant", dest="orth_variant", choices=ORTH_VARIANTS)
    p.add_argument("--pair-fraction", dest="pair_fraction", type=float)
    p.add_argument("--repeats", type=int, help="repeat the evaluated ablations over consecutive seeds")
    p.add_argument(
        "--size-sweep", dest="size_sweep", type=float, action="append", help="training pair fraction to sweep"
    )
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference check of every loss gradient")
    p.add_argument("--log-level", default=None)
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--users", type=int, default=6)
    p.add_argument("--items", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--threshold", type=float, default=GRADCHECK_THRESHOLD)
    p.add_argument("--corrupt-term", dest="corrupt_term", default=None, help=argparse.SUPPRESS)
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("serve", help="start the HTTP tool gateway")
    p.add_argument("--log-level", default=None)
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=8088)
    p.set_defaults(handler=cmd_serve)
    return parser


def setup_logging(level: Optional[str] = None):
    level = (level or os.environ.get(LOG_LEVEL_ENV) or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def execute(argv: Optional[List[str]] = None) -> Tuple[int, Optional[RunManifest]]:
    """运行一条命令，返回退出码与运行清单"""
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        code = args.handler(args)
    except (NumericalError, GradientCheckError) as e:
        logger.error(e.message)
        print(f"error: {e.message}", file=sys.stderr)
        code = EXIT_NUMERICAL
    except ToolkitError as e:
        logger.error(e.message)
        print(f"error: {e.message}", file=sys.stderr)
        code = EXIT_CONFIG
    except Exception as e:
        logger.exception(f"Command {args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_UNEXPECTED
    return code, getattr(args, "manifest", None)


def main(argv: Optional[List[str]] = None) -> int:
    return execute(argv)[0]
