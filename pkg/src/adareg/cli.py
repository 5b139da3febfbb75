"""Command-line entry point.

Subcommands: gen-data, train, compare, sweep-alpha, sweep-filter, stats,
bound. Experiment subcommands read a JSON config (schema mirrors
ExperimentConfig; see README) and accept trailing dotted-path overrides like
``optimizer.alpha=0.01``. All randomness comes from config seeds.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import datagen
from .harness import (
    DEFAULT_ALPHA_GRID,
    ExperimentConfig,
    compare_methods,
    filter_ratio_sweep,
    grid_search_alpha,
    run_experiment,
)
from .metrics import BoundInputs, feature_stats, rademacher_bound, write_feature_stats_csv
from .optim import OptimizerConfig

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _coerce(raw: str, current):
    if isinstance(current, bool):
        if raw.lower() in ("true", "1"):
            return True
        if raw.lower() in ("false", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, str) or current is None:
        return raw
    if isinstance(current, list):
        return json.loads(raw)
    raise ValueError(f"cannot override value of type {type(current).__name__}")


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.path=value`` overrides in place, type-checked against
    the existing value."""
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ValueError(f"unknown config key {key!r}")
            node = node[part]
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ValueError(f"unknown config key {key!r}")
        try:
            node[leaf] = _coerce(raw, node[leaf])
        except (ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"bad value for {key!r}: {exc}") from None
    return config


def _load_config(path: str, overrides: list[str], out_dir: str | None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    extras = {
        k: raw.pop(k)
        for k in ("methods", "alpha_grid", "selection_epoch", "filter_feature", "filter_ratios")
        if k in raw
    }
    raw = apply_overrides(raw, overrides)
    if out_dir is not None:
        raw["output_dir"] = out_dir
    cfg = ExperimentConfig.from_dict(raw)
    cfg._extras = extras
    return cfg


def _cmd_gen_data(args) -> int:
    cfg = _load_config(args.config, args.overrides, None)
    if cfg.synth is None:
        raise ValueError("gen-data requires a synth section in the config")
    ds = datagen.generate_synthetic(cfg.synth)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    datagen.save_csv(ds, out, header=args.header)
    print(f"wrote {ds.num_samples} rows x {ds.num_features} features to {out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load_config(args.config, args.overrides, args.out)
    report = run_experiment(cfg)
    for e, a in enumerate(report.epoch_test_auc, start=1):
        print(f"E{e} test_auc={a:.4f} logloss={report.epoch_test_logloss[e - 1]:.4f}")
    print(f"final emb_sq_sum={report.final_emb_sq_sum:.6g}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _load_config(args.config, args.overrides, args.out)
    methods_raw = cfg._extras.get("methods")
    if not methods_raw:
        raise ValueError("compare requires a 'methods' list in the config")
    methods = [OptimizerConfig(**m) for m in methods_raw]
    table = compare_methods(cfg, methods)
    print(table.render())
    return EXIT_OK


def _cmd_sweep_alpha(args) -> int:
    cfg = _load_config(args.config, args.overrides, args.out)
    grid = cfg._extras.get("alpha_grid", DEFAULT_ALPHA_GRID)
    selection_epoch = cfg._extras.get("selection_epoch")
    best, table = grid_search_alpha(cfg, grid, selection_epoch)
    for a, aucs in table:
        print(f"alpha={a:g} " + " ".join(f"E{e + 1}={v:.4f}" for e, v in enumerate(aucs)))
    print(f"best_alpha={best:g}")
    return EXIT_OK


def _cmd_sweep_filter(args) -> int:
    cfg = _load_config(args.config, args.overrides, args.out)
    feature = args.feature if args.feature is not None else cfg._extras.get("filter_feature")
    ratios = cfg._extras.get("filter_ratios", [1.0, 0.5, 0.1, 0.0])
    if args.ratios:
        ratios = [float(r) for r in args.ratios.split(",")]
    if feature is None:
        raise ValueError("sweep-filter requires --feature or filter_feature in the config")
    results = filter_ratio_sweep(cfg, int(feature), ratios)
    for r, report in results:
        aucs = " ".join(f"E{e + 1}={v:.4f}" for e, v in enumerate(report.epoch_test_auc))
        print(f"r={r:g} {aucs} emb_sq_sum={report.final_emb_sq_sum:.6g}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    if args.config:
        cfg = _load_config(args.config, args.overrides, None)
        if cfg.synth is not None:
            ds = datagen.generate_synthetic(cfg.synth)
        else:
            ds = datagen.load_csv(cfg.csv_path, has_header=cfg.csv_has_header)
        batch_size = cfg.batch_size
    else:
        if not args.csv:
            raise ValueError("stats requires --config or --csv")
        ds = datagen.load_csv(args.csv, has_header=args.header)
        batch_size = args.batch_size
    stats = feature_stats(ds, batch_size)
    for s in stats:
        print(
            f"feature {s.feature_index}: unique_ids={s.unique_ids} "
            f"mean_occurrences={s.mean_occurrences:.3f} "
            f"mean_update_interval={s.mean_update_interval:.3f}"
        )
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_feature_stats_csv(stats, args.out)
    return EXIT_OK


def _cmd_bound(args) -> int:
    norms = [float(x) for x in args.frobenius.split(",")]
    value = rademacher_bound(
        BoundInputs(
            frobenius_norms=tuple(norms),
            sum_tau=args.sum_tau,
            num_features=args.num_features,
            num_samples=args.num_samples,
            num_layers=args.num_layers,
        )
    )
    print(f"{value:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adareg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_cmd(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("overrides", nargs="*", help="dotted key=value config overrides")
        p.set_defaults(func=func)
        return p

    p = add_config_cmd("gen-data", _cmd_gen_data, "write a synthetic dataset as CSV")
    p.add_argument("--header", action="store_true", help="write a header line")
    # gen-data writes the CSV to --out as a file path
    for action in p._actions:
        if action.dest == "out":
            action.required = True

    add_config_cmd("train", _cmd_train, "run one training experiment")
    add_config_cmd("compare", _cmd_compare, "compare optimizer methods on one dataset")
    add_config_cmd("sweep-alpha", _cmd_sweep_alpha, "grid-search the adaptive decay coefficient")
    p = add_config_cmd("sweep-filter", _cmd_sweep_filter, "sweep frequency-filter ratios")
    p.add_argument("--feature", type=int, default=None, help="feature index to filter")
    p.add_argument("--ratios", default=None, help="comma-separated ratios")

    p = sub.add_parser("stats", help="per-feature update-interval statistics")
    p.add_argument("--config", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--header", action="store_true")
    p.add_argument("--batch-size", type=int, default=2048)
    p.add_argument("--out", default=None, help="write feature_stats.csv here")
    p.add_argument("overrides", nargs="*")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("bound", help="evaluate the closed-form capacity bound")
    p.add_argument("--frobenius", required=True, help="comma-separated layer Frobenius norms")
    p.add_argument("--sum-tau", type=float, required=True)
    p.add_argument("--num-features", type=int, required=True)
    p.add_argument("--num-samples", type=int, required=True)
    p.add_argument("--num-layers", type=int, default=None)
    p.set_defaults(func=_cmd_bound)
    return parser


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"runtime-error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
