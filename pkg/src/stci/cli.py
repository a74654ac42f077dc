"""Command-line entry points for the benchmark workflow.

Subcommands:
    generate   simulate a paired factual/counterfactual dataset
    train      fit a model variant on a generated dataset
    evaluate   score a checkpoint against a dataset's built-in oracle
    ablate     train and score all five variants with a shared seed
    report     re-render figures and tables from saved outputs

Configuration is a JSON document whose blocks mirror the library types;
an empty document runs the default desk-scale experiment end to end.
Command-line flags override config fields, which override defaults:

    {
      "seed": 0,
      "grid": {"n_rows": 32, "n_cols": 32, "n_steps": 500, "lag": 1},
      "params": { ... DiffusionParams fields ... },
      "intervention": {"row_bounds": [10, 15], "col_bounds": [10, 15],
                       "update_factor": 0.6, "start_step": 0},
      "model": { ... ModelConfig fields ... }
    }

`evaluate` writes report.json holding exactly the keys date_pehe,
iate_pehe, late_pehe, rmse, oracle_date, oracle_iate, oracle_late,
predicted_date, predicted_iate, predicted_late, plus the effect-map
blobs and figures that `report` can re-render later.

Exit codes: 0 success, 2 validation or configuration error, 3 numerical
divergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import multiprocessing
import os
import sys

import numpy as np

from .core import (
    ConfigError,
    DivergenceError,
    GridSpec,
    InterventionSpec,
    MissingFileError,
    PersistenceError,
    ValidationError,
    check_region,
    read_dataset,
    region_mask,
    write_dataset,
)
from .datagen import DiffusionParams, generate, true_effects
from .effects import REPORT_KEYS, evaluation_report
from .stcinet import (
    VARIANTS,
    ModelConfig,
    load_checkpoint,
    predict_counterfactual,
    save_checkpoint,
    train,
)

FULL_STEPS = 4000
METRIC_KEYS = ("date_pehe", "iate_pehe", "late_pehe", "rmse")
CONFIG_KEYS = ("seed", "grid", "params", "intervention", "model")


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise PersistenceError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    unknown = sorted(set(config) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(
            f"unknown config keys: {', '.join(unknown)} "
            f"(known: {', '.join(CONFIG_KEYS)})"
        )
    return config


def _block(config, name):
    block = config.get(name, {})
    if not isinstance(block, dict):
        raise ConfigError(f"config block {name!r} must be an object")
    return dict(block)


def _merge_fields(cls, base, block, overrides, label):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown {label} config keys: {', '.join(unknown)}")
    merged = dict(base)
    merged.update(block)
    merged.update(overrides)
    return cls(**merged)


def _resolve_seed(args, config):
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    return seed


def _parse_region(text):
    """Parse 'i0:i1,j0:j1' into half-open row and column bounds."""
    try:
        row_part, col_part = text.split(",")
        r0, r1 = (int(v) for v in row_part.split(":"))
        c0, c1 = (int(v) for v in col_part.split(":"))
    except ValueError as exc:
        raise ConfigError(
            f"region {text!r} must look like i0:i1,j0:j1"
        ) from exc
    return (r0, r1), (c0, c1)


def _bounds_pair(value, label):
    try:
        lo, hi = (int(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{label} must be a [lo, hi] pair") from exc
    return lo, hi


def cmd_generate(args):
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)

    grid_base = {"n_rows": 32, "n_cols": 32, "n_steps": 500, "lag": 1}
    grid_over = {}
    if args.full:
        grid_over["n_steps"] = FULL_STEPS
    if args.steps is not None:
        grid_over["n_steps"] = args.steps
    grid = _merge_fields(GridSpec, grid_base, _block(config, "grid"), grid_over, "grid")

    params_base = dataclasses.asdict(DiffusionParams())
    params_base["lag"] = grid.lag
    params_over = {}
    if args.interference is not None:
        params_over["interference"] = args.interference
    params = _merge_fields(
        DiffusionParams, params_base, _block(config, "params"), params_over, "params"
    )
    if not params.interference:
        params = params.without_interference()

    iv_block = _block(config, "intervention")
    row_bounds = _bounds_pair(iv_block.pop("row_bounds", (10, 15)), "row_bounds")
    col_bounds = _bounds_pair(iv_block.pop("col_bounds", (10, 15)), "col_bounds")
    update_factor = iv_block.pop("update_factor", 0.6)
    start_step = iv_block.pop("start_step", 0)
    if iv_block:
        raise ConfigError(
            f"unknown intervention config keys: {', '.join(sorted(iv_block))}"
        )
    if args.region is not None:
        row_bounds, col_bounds = _parse_region(args.region)
    if args.update_factor is not None:
        update_factor = args.update_factor
    region = region_mask(grid.n_rows, grid.n_cols, row_bounds, col_bounds)
    spec = InterventionSpec(
        region=region, update_factor=float(update_factor), start_step=int(start_step)
    )

    dataset = generate(grid, params, spec, seed)
    write_dataset(dataset, args.out)
    oracle = true_effects(dataset)
    print(f"wrote dataset to {args.out}")
    print(f"grid {grid.n_rows}x{grid.n_cols}, steps {grid.n_steps}, seed {seed}, "
          f"interference {params.interference}")
    print(f"oracle DATE {oracle.date:+.6f}")
    print(f"oracle IATE {oracle.iate:+.6f}")
    print(f"oracle LATE {oracle.late:+.6f}")
    return 0


def _resolve_model_config(args, config, dataset, seed):
    base = ModelConfig().to_dict()
    base["lag"] = dataset.grid.lag
    base["seed"] = seed
    block = _block(config, "model")
    if "lambda1" in block and "lambda2" not in block:
        block["lambda2"] = 1.0 - float(block["lambda1"])
    overrides = {}
    if getattr(args, "variant", None) is not None:
        overrides["variant"] = args.variant.lower()
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    if getattr(args, "batch_size", None) is not None:
        overrides["batch_size"] = args.batch_size
    if getattr(args, "lambda1", None) is not None:
        overrides["lambda1"] = args.lambda1
        overrides["lambda2"] = 1.0 - args.lambda1
    return _merge_fields(ModelConfig, base, block, overrides, "model")


def cmd_train(args):
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    dataset = read_dataset(args.data)
    model_config = _resolve_model_config(args, config, dataset, seed)
    trained = train(dataset, model_config)
    save_checkpoint(trained, args.out)
    log_path = os.path.join(args.out, "training_log.json")
    with open(log_path, "w", encoding="utf-8") as fh:
        json.dump(trained.training_log, fh, indent=2)
    final = trained.training_log[-1]
    print(f"wrote checkpoint to {args.out}")
    print(f"variant {model_config.variant}, parameters {trained.parameter_count()}")
    print(f"epochs run {len(trained.training_log)}, final loss {final['loss']:.6f}")
    return 0


def _write_effect_arrays(out_dir, tau_true, tau_pred, region, start):
    meta = {
        "shape": list(tau_true.shape),
        "start": int(start),
        "region": region.astype(int).tolist(),
    }
    with open(os.path.join(out_dir, "arrays.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh)
    tau_true.astype("<f4").tofile(os.path.join(out_dir, "tau_true.f32"))
    tau_pred.astype("<f4").tofile(os.path.join(out_dir, "tau_pred.f32"))


def _read_effect_arrays(out_dir):
    meta_path = os.path.join(out_dir, "arrays.json")
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise MissingFileError(f"{meta_path} not found") from exc
    except OSError as exc:
        raise PersistenceError(f"cannot read {meta_path}: {exc}") from exc
    shape = tuple(int(v) for v in meta["shape"])
    arrays = []
    for name in ("tau_true.f32", "tau_pred.f32"):
        path = os.path.join(out_dir, name)
        try:
            arr = np.fromfile(path, dtype="<f4")
        except FileNotFoundError as exc:
            raise MissingFileError(f"{path} not found") from exc
        except OSError as exc:
            raise PersistenceError(f"cannot read {path}: {exc}") from exc
        if arr.size != int(np.prod(shape)):
            raise PersistenceError(f"{path} holds {arr.size} values, expected {shape}")
        arrays.append(arr.reshape(shape).astype(np.float64))
    region = check_region(np.asarray(meta["region"], dtype=bool))
    return arrays[0], arrays[1], region, int(meta["start"])


def _render_figures(out_dir, tau_true, tau_pred, region, start):
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    n_steps = tau_true.shape[0]
    picks = sorted({0, n_steps // 2, n_steps - 1})
    vmax = max(
        float(np.max(np.abs(tau_true[picks]))),
        float(np.max(np.abs(tau_pred[picks]))),
        1e-12,
    )

    fig, axes = plt.subplots(
        2, len(picks), figsize=(3.2 * len(picks), 6.0), squeeze=False
    )
    for col, step in enumerate(picks):
        for row, (label, tau) in enumerate(
            (("oracle", tau_true), ("predicted", tau_pred))
        ):
            ax = axes[row][col]
            im = ax.imshow(tau[step], cmap="RdBu_r", vmin=-vmax, vmax=vmax)
            ax.set_title(f"{label}, t={start + step}")
            ax.set_xticks([])
            ax.set_yticks([])
    fig.colorbar(im, ax=[ax for row in axes for ax in row], shrink=0.8)
    fig.savefig(os.path.join(out_dir, "effect_heatmaps.png"), dpi=110)
    plt.close(fig)

    times = start + np.arange(n_steps)
    flat_true = tau_true.reshape(n_steps, -1)
    flat_pred = tau_pred.reshape(n_steps, -1)
    series = {
        "DATE": (tau_true[:, region].mean(axis=1), tau_pred[:, region].mean(axis=1)),
        "IATE": (tau_true[:, ~region].mean(axis=1), tau_pred[:, ~region].mean(axis=1)),
        "LATE": (flat_true.mean(axis=1), flat_pred.mean(axis=1)),
    }
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 8.0), sharex=True)
    for ax, (label, (truth, pred)) in zip(axes, series.items()):
        ax.plot(times, truth, label="oracle")
        ax.plot(times, pred, linestyle="--", label="predicted")
        ax.set_ylabel(label)
        ax.legend(loc="best", fontsize="small")
    axes[-1].set_xlabel("target step")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "effect_curves.png"), dpi=110)
    plt.close(fig)


def _print_report(report):
    for key in REPORT_KEYS:
        print(f"{key:>15}: {report[key]:+.6f}")


def cmd_evaluate(args):
    dataset = read_dataset(args.data)
    trained = load_checkpoint(args.model)
    y_hat_f, y_hat_cf = predict_counterfactual(trained, dataset)
    h, lag = trained.config.history_len, trained.config.lag
    report = evaluation_report(dataset, y_hat_f, y_hat_cf, h, lag)

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)

    start = h + lag
    region = check_region(dataset.intervention.region)
    tau_true = dataset.y_cf[start:].astype(np.float64) - dataset.y[start:].astype(
        np.float64
    )
    tau_pred = y_hat_cf - y_hat_f
    _write_effect_arrays(args.out, tau_true, tau_pred, region, start)
    _render_figures(args.out, tau_true, tau_pred, region, start)
    print(f"wrote report to {args.out}")
    _print_report(report)
    return 0


def _ablate_worker(data_dir, out_dir, config_dict):
    """Train, checkpoint, and score one variant; returns its table row."""
    dataset = read_dataset(data_dir)
    config = ModelConfig.from_dict(config_dict)
    trained = train(dataset, config)
    save_checkpoint(trained, out_dir)
    y_hat_f, y_hat_cf = predict_counterfactual(trained, dataset)
    report = evaluation_report(
        dataset, y_hat_f, y_hat_cf, config.history_len, config.lag
    )
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    row = {"variant": config.variant, "parameters": trained.parameter_count()}
    row.update({key: report[key] for key in METRIC_KEYS})
    row["status"] = "ok"
    return row


def _failed_row(variant, message):
    row = {"variant": variant, "parameters": ""}
    row.update({key: float("nan") for key in METRIC_KEYS})
    row["status"] = f"failed: {message}"
    return row


def cmd_ablate(args):
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    dataset = read_dataset(args.data)
    base = _resolve_model_config(args, config, dataset, seed)
    os.makedirs(args.out, exist_ok=True)

    jobs = []
    for variant in VARIANTS:
        variant_config = dataclasses.replace(base, variant=variant)
        subdir = os.path.join(args.out, variant)
        jobs.append((variant, subdir, variant_config.to_dict()))

    rows = []
    if args.parallel > 1:
        ctx = multiprocessing.get_context("spawn")
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=args.parallel, mp_context=ctx
        ) as pool:
            futures = [
                pool.submit(_ablate_worker, args.data, subdir, cfg)
                for _, subdir, cfg in jobs
            ]
            for (variant, _, _), future in zip(jobs, futures):
                try:
                    rows.append(future.result())
                except Exception as exc:
                    rows.append(_failed_row(variant, exc))
    else:
        for variant, subdir, cfg in jobs:
            try:
                rows.append(_ablate_worker(args.data, subdir, cfg))
            except Exception as exc:
                rows.append(_failed_row(variant, exc))

    table_path = os.path.join(args.out, "ablation.csv")
    columns = ["variant", "parameters", *METRIC_KEYS, "status"]
    with open(table_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [
                    row[key] if key in ("variant", "parameters", "status")
                    else f"{row[key]:.6f}"
                    for key in columns
                ]
            )
    print(f"wrote ablation table to {table_path}")
    _print_table(columns, [[str(row[key]) for key in columns] for row in rows])
    return 0


def _print_table(columns, rows):
    widths = [
        max(len(col), *(len(row[i]) for row in rows)) if rows else len(col)
        for i, col in enumerate(columns)
    ]
    print("  ".join(col.ljust(w) for col, w in zip(columns, widths)))
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))


def cmd_report(args):
    report_path = os.path.join(args.out, "report.json")
    table_path = os.path.join(args.out, "ablation.csv")
    if os.path.exists(report_path):
        try:
            with open(report_path, "r", encoding="utf-8") as fh:
                report = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise PersistenceError(f"cannot read {report_path}: {exc}") from exc
        tau_true, tau_pred, region, start = _read_effect_arrays(args.out)
        _render_figures(args.out, tau_true, tau_pred, region, start)
        print(f"re-rendered figures in {args.out}")
        _print_report(report)
        return 0
    if os.path.exists(table_path):
        try:
            with open(table_path, "r", encoding="utf-8", newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as exc:
            raise PersistenceError(f"cannot read {table_path}: {exc}") from exc
        if not rows:
            raise PersistenceError(f"{table_path} is empty")
        _print_table(rows[0], rows[1:])
        return 0
    raise MissingFileError(f"no report.json or ablation.csv under {args.out}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stci",
        description="Spatiotemporal causal benchmark: generate, train, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p, default_out):
        p.add_argument("--config", metavar="PATH", default=None,
                       help="JSON experiment config; flags override its fields")
        p.add_argument("--seed", type=int, default=None, metavar="U64",
                       help="experiment seed (default: config seed or 0)")
        p.add_argument("--out", metavar="DIR", default=default_out,
                       help=f"output directory (default: {default_out})")

    p = sub.add_parser("generate", help="simulate a paired dataset")
    add_shared(p, "dataset")
    group = p.add_mutually_exclusive_group()
    p.add_argument("--interference", dest="interference", action="store_true",
                   default=None, help="couple the treatment neighborhood mean "
                   "into the outcome (default)")
    p.add_argument("--no-interference", dest="interference", action="store_false",
                   help="disable the spillover pathway and record beta2 as 0")
    p.add_argument("--update-factor", type=float, default=None, metavar="F",
                   help="multiplicative treatment rewrite inside the region "
                   "(default 0.6)")
    p.add_argument("--region", default=None, metavar="i0:i1,j0:j1",
                   help="treated block, half-open bounds (default 10:15,10:15)")
    group.add_argument("--steps", type=int, default=None, metavar="T",
                       help="simulated steps (default 500)")
    group.add_argument("--full", action="store_true",
                       help=f"full-length run ({FULL_STEPS} steps)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a model variant on a dataset")
    add_shared(p, "checkpoint")
    p.add_argument("--data", metavar="DIR", default="dataset",
                   help="dataset directory (default: dataset)")
    p.add_argument("--variant", default=None,
                   choices=[*VARIANTS, *(v.upper() for v in VARIANTS)],
                   help="model variant (default: full)")
    p.add_argument("--epochs", type=int, default=None, help="training epochs")
    p.add_argument("--batch-size", type=int, default=None, help="minibatch size")
    p.add_argument("--lambda1", type=float, default=None,
                   help="reconstruction loss weight; lambda2 becomes 1-lambda1")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint against the oracle")
    add_shared(p, "evaluation")
    p.add_argument("--data", metavar="DIR", default="dataset",
                   help="dataset directory (default: dataset)")
    p.add_argument("--model", metavar="DIR", default="checkpoint",
                   help="checkpoint directory (default: checkpoint)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train and score all five variants")
    add_shared(p, "ablation")
    p.add_argument("--data", metavar="DIR", default="dataset",
                   help="dataset directory (default: dataset)")
    p.add_argument("--epochs", type=int, default=None, help="training epochs")
    p.add_argument("--batch-size", type=int, default=None, help="minibatch size")
    p.add_argument("--lambda1", type=float, default=None,
                   help="reconstruction loss weight; lambda2 becomes 1-lambda1")
    p.add_argument("--parallel", type=int, default=1, metavar="K",
                   help="train up to K variants concurrently (default 1)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="re-render saved evaluation or ablation output")
    add_shared(p, "evaluation")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: divergence: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PersistenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
