"""Experiment orchestration: single runs with JSONL/CSV telemetry, method
comparison tables, alpha grid search, and the frequency-filter sweep."""
from __future__ import annotations

import copy
import csv
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import datagen
from .datagen import Dataset, SynthSpec, filter_by_frequency
from .estimator import SparseCTRClassifier
from .metrics import (
    EvalRecord,
    auc,
    embedding_norms,
    feature_stats,
    logloss,
    write_feature_stats_csv,
)
from .optim import OptimizerConfig

DEFAULT_ALPHA_GRID = [1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]


@dataclass
class ExperimentConfig:
    synth: SynthSpec | None = None
    csv_path: str | None = None
    csv_has_header: bool = False
    split_fraction: float = 0.8
    hidden_sizes: tuple[int, ...] = (512, 256, 128)
    embedding_dim: int = 32
    use_bias: bool = False
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    epochs: int = 4
    batch_size: int = 2048
    eval_every: int | None = None
    init_seed: int = 0
    shuffle_seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if (self.synth is None) == (self.csv_path is None):
            raise ValueError("exactly one of synth / csv_path must be set")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError(f"split_fraction must be in (0, 1), got {self.split_fraction}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.eval_every is not None and self.eval_every < 1:
            raise ValueError("eval_every must be >= 1 or None")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        if self.synth is not None:
            d["synth"]["features"] = [asdict(f) for f in self.synth.features]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = copy.deepcopy(d)
        if d.get("synth"):
            feats = [datagen.FeatureSpec(**f) for f in d["synth"].pop("features")]
            d["synth"] = SynthSpec(features=tuple(feats), **d["synth"])
        if d.get("optimizer"):
            d["optimizer"] = OptimizerConfig(**d["optimizer"])
        if "hidden_sizes" in d:
            d["hidden_sizes"] = tuple(d["hidden_sizes"])
        return cls(**d)


@dataclass
class ExperimentReport:
    config: dict
    epoch_test_auc: list[float]
    epoch_test_logloss: list[float]
    records: list[EvalRecord]
    final_emb_l2_sum: float
    final_emb_sq_sum: float
    feature_stats: list
    wall_clock: float
    estimator: SparseCTRClassifier | None = None

    def summary_dict(self) -> dict:
        return {
            "config": self.config,
            "epoch_test_auc": self.epoch_test_auc,
            "epoch_test_logloss": self.epoch_test_logloss,
            "final_emb_l2_sum": self.final_emb_l2_sum,
            "final_emb_sq_sum": self.final_emb_sq_sum,
            "wall_clock": self.wall_clock,
        }


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.synth is not None:
        return datagen.generate_synthetic(cfg.synth)
    return datagen.load_csv(cfg.csv_path, has_header=cfg.csv_has_header)


def split_dataset(ds: Dataset, split_fraction: float) -> tuple[Dataset, Dataset]:
    """Time-ordered split: first fraction for training, rest held out."""
    cut = int(ds.num_samples * split_fraction)
    if cut < 1 or cut >= ds.num_samples:
        raise ValueError("split leaves an empty train or test set")
    return ds.slice(0, cut), ds.slice(cut, ds.num_samples)


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None) -> ExperimentReport:
    """Train once, evaluating on both splits at every eval point and at each
    epoch end; optionally write metrics.jsonl / report.json / curves.csv /
    feature_stats.csv to cfg.output_dir."""
    start = time.perf_counter()
    ds = dataset if dataset is not None else load_dataset(cfg)
    train_ds, test_ds = split_dataset(ds, cfg.split_fraction)

    est = SparseCTRClassifier(
        hidden_sizes=cfg.hidden_sizes,
        embedding_dim=cfg.embedding_dim,
        optimizer=cfg.optimizer.family,
        learning_rate=cfg.optimizer.learning_rate,
        alpha=cfg.optimizer.alpha,
        weight_decay=cfg.optimizer.weight_decay,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        use_bias=cfg.use_bias,
        meda=cfg.optimizer.meda_enabled,
        update_mode=cfg.optimizer.update_mode,
        init_seed=cfg.init_seed,
        shuffle_seed=cfg.shuffle_seed,
        feature_cards=list(ds.feature_cards),
    )

    records: list[EvalRecord] = []
    epoch_auc: list[float] = []
    epoch_ll: list[float] = []
    seen_epoch_ends: set[int] = set()

    def evaluate(estimator, epoch, step):
        l2_sum, sq_sum, _ = embedding_norms(estimator.tables_)
        for split, split_ds in (("train", train_ds), ("test", test_ds)):
            scores = estimator.score_logits(split_ds)
            rec = EvalRecord(
                epoch=epoch,
                step=step,
                split=split,
                auc=auc(scores, split_ds.labels),
                logloss=logloss(scores, split_ds.labels),
                emb_l2_sum=l2_sum,
                emb_sq_sum=sq_sum,
            )
            records.append(rec)
            if split == "test" and epoch not in seen_epoch_ends and _is_epoch_end(estimator, epoch, step):
                epoch_auc.append(rec.auc)
                epoch_ll.append(rec.logloss)
                seen_epoch_ends.add(epoch)

    steps_per_epoch = -(-train_ds.num_samples // cfg.batch_size)

    def _is_epoch_end(estimator, epoch, step):
        return step == epoch * steps_per_epoch

    X = _stack_columns(train_ds)
    est.fit(X, train_ds.labels, eval_every=cfg.eval_every, eval_hook=evaluate)

    l2_sum, sq_sum, _ = embedding_norms(est.tables_)
    stats = feature_stats(train_ds, cfg.batch_size)
    report = ExperimentReport(
        config=cfg.to_dict(),
        epoch_test_auc=epoch_auc,
        epoch_test_logloss=epoch_ll,
        records=records,
        final_emb_l2_sum=l2_sum,
        final_emb_sq_sum=sq_sum,
        feature_stats=stats,
        wall_clock=time.perf_counter() - start,
        estimator=est,
    )
    if cfg.output_dir is not None:
        _write_outputs(cfg, report)
    return report


def _stack_columns(ds: Dataset):
    import numpy as np

    return np.column_stack(ds.columns)


def _write_outputs(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for rec in report.records:
            fh.write(rec.to_json() + "\n")
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.summary_dict(), fh, indent=2)
        fh.write("\n")
    with open(out / "config_echo.json", "w", encoding="utf-8") as fh:
        json.dump(report.config, fh, indent=2)
        fh.write("\n")
    with open(out / "curves.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "step", "split", "auc", "logloss", "emb_l2_sum", "emb_sq_sum"])
        for rec in report.records:
            writer.writerow(
                [rec.epoch, rec.step, rec.split, repr(rec.auc), repr(rec.logloss), repr(rec.emb_l2_sum), repr(rec.emb_sq_sum)]
            )
    write_feature_stats_csv(report.feature_stats, out / "feature_stats.csv")


@dataclass
class ComparisonTable:
    method_names: list[str]
    epoch_auc: list[list[float]]
    best_per_epoch: list[int]
    reports: list[ExperimentReport]

    def render(self) -> str:
        epochs = len(self.epoch_auc[0])
        lines = ["method," + ",".join(f"E{e + 1}" for e in range(epochs))]
        for row, name in enumerate(self.method_names):
            cells = []
            for e in range(epochs):
                mark = "*" if self.best_per_epoch[e] == row else ""
                cells.append(f"{self.epoch_auc[row][e]:.4f}{mark}")
            lines.append(f"{name}," + ",".join(cells))
        return "\n".join(lines)


def compare_methods(base_cfg: ExperimentConfig, methods: list[OptimizerConfig]) -> ComparisonTable:
    """Run each optimizer on identical data and seeds; mark the per-epoch
    column maximum."""
    if len(methods) < 2:
        raise ValueError("need at least 2 methods to compare")
    ds = load_dataset(base_cfg)
    reports = []
    names = []
    for i, opt in enumerate(methods):
        cfg = replace(base_cfg, optimizer=opt, output_dir=_subdir(base_cfg, f"method_{i}_{opt.family}"))
        reports.append(run_experiment(cfg, dataset=ds))
        names.append(opt.family + ("+meda" if opt.meda_enabled else ""))
    epoch_auc = [r.epoch_test_auc for r in reports]
    best = [max(range(len(methods)), key=lambda m: epoch_auc[m][e]) for e in range(base_cfg.epochs)]
    return ComparisonTable(method_names=names, epoch_auc=epoch_auc, best_per_epoch=best, reports=reports)


def grid_search_alpha(
    base_cfg: ExperimentConfig,
    grid: list[float] | None = None,
    selection_epoch: int | None = None,
) -> tuple[float, list[tuple[float, list[float]]]]:
    """Evaluate each alpha with identical seeds and pick the one maximizing
    test AUC at selection_epoch; ties go to the smaller alpha."""
    grid = DEFAULT_ALPHA_GRID if grid is None else list(grid)
    if not grid:
        raise ValueError("alpha grid must be non-empty")
    for a in grid:
        if not 0.0 <= a < 1.0:
            raise ValueError(f"alpha {a} outside [0, 1)")
    if selection_epoch is None:
        selection_epoch = base_cfg.epochs
    if not 1 <= selection_epoch <= base_cfg.epochs:
        raise ValueError(f"selection_epoch {selection_epoch} outside [1, {base_cfg.epochs}]")

    ds = load_dataset(base_cfg)
    table = []
    for a in sorted(grid):
        opt = replace(base_cfg.optimizer, alpha=a)
        cfg = replace(base_cfg, optimizer=opt, output_dir=_subdir(base_cfg, f"alpha_{a:g}"))
        report = run_experiment(cfg, dataset=ds)
        table.append((a, report.epoch_test_auc))
    best_alpha, best_auc = None, -1.0
    for a, aucs in table:
        if aucs[selection_epoch - 1] > best_auc:
            best_alpha, best_auc = a, aucs[selection_epoch - 1]
    return best_alpha, table


def filter_ratio_sweep(
    base_cfg: ExperimentConfig, feature_index: int, ratios: list[float]
) -> list[tuple[float, ExperimentReport]]:
    """Re-run the experiment with the chosen feature filtered at each ratio."""
    if not ratios:
        raise ValueError("ratios must be non-empty")
    base_ds = load_dataset(base_cfg)
    results = []
    for r in ratios:
        ds = filter_by_frequency(base_ds, feature_index, r)
        cfg = replace(base_cfg, output_dir=_subdir(base_cfg, f"ratio_{r:g}"))
        results.append((r, run_experiment(cfg, dataset=ds)))
    return results


def _subdir(cfg: ExperimentConfig, name: str) -> str | None:
    if cfg.output_dir is None:
        return None
    return str(Path(cfg.output_dir) / name)
