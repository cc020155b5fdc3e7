"""Command line: ``nilm-threshold {synth,threshold,train,evaluate,sweep}``.

Every subcommand reads one config (``--config`` plus ``--set`` overrides),
writes into ``--out`` and produces byte-identical files when rerun with the
same config and seed. JSON reports carry the config hash instead of timestamps.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigurationError, NilmError
from .model import build_conv_model, load_checkpoint, save_checkpoint
from .pipeline import (
    ApplianceProblem,
    activation_percent,
    build_problems,
    evaluate_model,
    intrinsic_errors,
    load_buildings,
    model_seeds,
    sweep_point,
    train_model,
    training_intrinsic_error,
)
from .reconstruction import reconstruct_binary, reconstruction_record
from .seeding import SYNTH, derive_seed
from .series import SamplingSpec
from .synth import DEFAULT_PROFILES, generate_household
from .thresholding import Method, threshold_record

log = logging.getLogger("nilm_threshold")


# --- output helpers -----------------------------------------------------------


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, NaN/inf to null."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_clean(payload), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else ""
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _problems(config: RunConfig) -> dict[str, ApplianceProblem]:
    return build_problems(config, load_buildings(config))


def _train_methods(config: RunConfig) -> list[Method]:
    return [Method.parse(m) for m in config.train_methods]


def checkpoint_name(appliance: str, method: Method) -> str:
    return f"model_{appliance}_{method.value.lower()}.ckpt"


# --- subcommands ----------------------------------------------------------------


def cmd_synth(config: RunConfig) -> list[Path]:
    """Write synthetic meter CSVs, their ground-truth status and a config that reads them back."""
    profiles = {p.name: p for p in DEFAULT_PROFILES}
    unknown = [a for a in config.data_appliances if a not in profiles]
    if unknown:
        raise ConfigurationError(f"no synthetic profile for {unknown}; available: {sorted(profiles)}")
    chosen = [profiles[a] for a in config.data_appliances]
    sampling = SamplingSpec(config.synth_period_seconds)
    length = int(round(config.synth_days * 86400 / config.synth_period_seconds))
    if length < 1:
        raise ConfigurationError("synth.days is too small for one sample")
    out = _out_dir(config)
    written, data_names = [], []
    for b in range(config.synth_buildings):
        house = generate_household(
            chosen, config.synth_residual_sd, length, derive_seed(config.seed, SYNTH, b), sampling,
            residual_mean=config.synth_residual_mean,
        )  # fmt: skip
        suffix = "" if config.synth_buildings == 1 else f"_{b}"
        times = np.arange(length) * config.synth_period_seconds
        names = list(house.appliances)
        data = out / f"household{suffix}.csv"
        columns = [house.aggregate.values] + [house.appliances[a].power.values for a in names]
        write_csv(data, ["time", config.data_aggregate_column, *names], zip(times, *columns))
        truth = out / f"truth_status{suffix}.csv"
        write_csv(truth, ["time", *names], zip(times, *(house.appliances[a].status.values for a in names)))
        written += [data, truth]
        data_names.append(data.name)
    cfg = config.replace(data_paths=tuple(data_names), data_period_seconds=config.synth_period_seconds)
    cfg_path = out / "household.cfg"
    body = "\n".join(line for line in cfg.to_text().splitlines() if not line.startswith("output.dir"))
    cfg_path.write_text("# synthetic household; data paths are relative to this file\n" + body + "\n", encoding="utf-8")
    written.append(cfg_path)
    return written


def cmd_threshold(config: RunConfig) -> list[Path]:
    """Threshold and reconstruction reports plus per-appliance overlay CSVs."""
    out = _out_dir(config)
    problems = _problems(config)
    methods = config.methods()
    thresholds, recon, written = [], [], []
    for name, problem in problems.items():
        for method in methods:
            spec = problem.thresholds[method]
            record = threshold_record(name, spec, None if method is Method.AT else problem.summary)
            record["activation_train_percent"] = activation_percent(problem, method, "train")
            record["activation_test_percent"] = activation_percent(problem, method, "test")
            thresholds.append(record)
            errors = intrinsic_errors(problem, method)
            rec = reconstruction_record(name, method.value, problem.levels[method], training_intrinsic_error(problem, method))
            rec["split_error_watts"] = errors
            recon.append(rec)
        b = config.split_val_test_building
        power = problem.buildings[b].appliances[name].values
        statuses = [problem.status_series[m][b].values for m in methods]
        path = out / f"status_{name}.csv"
        header = ["time", "power_watts", *(f"status_{m.value.lower()}" for m in methods)]
        write_csv(path, header, zip(range(len(power)), power, *statuses))
        written.append(path)
        rebuilt = [reconstruct_binary(problem.status_series[m][b].values, problem.levels[m]) for m in methods]
        path = out / f"reconstruction_{name}.csv"
        header = ["time", "power_watts", *(f"reconstructed_{m.value.lower()}_watts" for m in methods)]
        write_csv(path, header, zip(range(len(power)), power, *rebuilt))
        written.append(path)
    meta = {"config_hash": config.hash(), "version": __version__}
    write_json(out / "thresholds.json", {**meta, "records": thresholds})
    write_json(out / "reconstruction.json", {**meta, "records": recon})
    return [out / "thresholds.json", out / "reconstruction.json", *written]


def cmd_train(config: RunConfig) -> list[Path]:
    """One model per (appliance, training method); best-validation checkpoint and loss history."""
    out = _out_dir(config)
    written = []
    for name, problem in _problems(config).items():
        for method in _train_methods(config):
            extra = {"appliance": name, "method": method.value, "w": config.loss_w, "config_hash": config.hash()}
            if config.train_epochs == 0:
                params = build_conv_model(config.model_width_scale, model_seeds(config, name)[0])
                history, best_epoch = [], 0
            else:
                result = train_model(problem, method, config.loss_w)
                params, history, best_epoch = result.params, result.history, result.best_epoch
            extra["best_epoch"] = best_epoch
            ckpt = out / checkpoint_name(name, method)
            save_checkpoint(ckpt, params, extra)
            hist = out / f"history_{name}_{method.value.lower()}.csv"
            rows = [(e.epoch, e.train_loss, e.val_loss, e.val_f1, e.val_mae_watts) for e in history]
            write_csv(hist, ["epoch", "train_loss", "val_loss", "val_f1", "val_mae_watts"], rows)
            written += [ckpt, hist]
    return written


def cmd_evaluate(config: RunConfig, checkpoints: Path | None = None) -> list[Path]:
    """Metrics for every (appliance, method) cell; model scores need a matching checkpoint."""
    out = _out_dir(config)
    source = Path(checkpoints) if checkpoints is not None else out
    records = []
    for name, problem in _problems(config).items():
        for method in config.methods():
            errors = intrinsic_errors(problem, method)
            record = {
                "appliance": name,
                "method": method.value,
                "intrinsic_error_watts": training_intrinsic_error(problem, method),
                "test_intrinsic_error_watts": errors["test"],
                "model": None,
                "w": None,
                "f1": None,
                "precision": None,
                "recall": None,
                "auc": None,
                "mae_watts": None,
                "reconstruction_mae_watts": None,
                "regression_f1": None,
            }
            ckpt = source / checkpoint_name(name, method)
            if ckpt.exists():
                params, extra = load_checkpoint(ckpt)
                record.update(evaluate_model(problem, method, params))
                record["model"] = "CONV"
                record["w"] = extra.get("w")
            else:
                log.info("no checkpoint %s; reporting thresholding metrics only", ckpt)
            records.append(record)
    path = out / "metrics.json"
    write_json(path, {"config_hash": config.hash(), "version": __version__, "records": records})
    return [path]


def _sweep_task(args):
    problem, method, w, rep = args
    return sweep_point(problem, method, w, rep)


def cmd_sweep(config: RunConfig) -> list[Path]:
    """Train and score every (appliance, w, repetition); rows sorted by (appliance, w, seed)."""
    out = _out_dir(config)
    method = Method.parse(config.sweep_method)
    tasks = [
        (problem, method, w, rep)
        for problem in _problems(config).values()
        for w in config.sweep_weights
        for rep in range(config.sweep_repetitions)
    ]
    if config.sweep_workers > 1:
        with ProcessPoolExecutor(max_workers=config.sweep_workers) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    rows.sort(key=lambda r: (r["appliance"], r["w"], r["seed"]))
    header = ["appliance", "w", "seed", "f1", "mae_watts", "f1_kind", "mae_kind"]
    path = out / "sweep.csv"
    write_csv(path, header, ([r[k] for k in header] for r in rows))
    return [path]


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nilm-threshold", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="top-level seed (overrides seed)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic household and its config")
    sub.add_parser("threshold", parents=[common], help="fit MP/VS/AT thresholds and reconstruction levels")
    sub.add_parser("train", parents=[common], help="train one model per appliance and method")
    ev = sub.add_parser("evaluate", parents=[common], help="score checkpoints on the test split")
    ev.add_argument("--checkpoints", type=Path, help="directory holding model_*.ckpt (default: --out)")
    sub.add_parser("sweep", parents=[common], help="train and score across loss weights w")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config, args.set, seed=args.seed, out=args.out)
        if args.command == "synth":
            written = cmd_synth(config)
        elif args.command == "threshold":
            written = cmd_threshold(config)
        elif args.command == "train":
            written = cmd_train(config)
        elif args.command == "evaluate":
            written = cmd_evaluate(config, args.checkpoints)
        else:
            written = cmd_sweep(config)
    except NilmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
