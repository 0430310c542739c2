"""Command-line front end.

Subcommands:
  run            execute an experiment described by a flat key=value config
  evaluate-one   print the pNML report for a single test sample
  list-datasets  show the dataset registry

Exit codes: 0 success, 2 validation failure, 3 numeric failure during a run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, data, experiments, pnml
from .data import SplitSpec
from .pnml import ConvergenceError, EvaluationError, QuadratureConfig
from .regression import DegenerateDirectionError, build_design, mn_solve

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

DATA_ROOT_ENV = "PNML_DATA_ROOT"
DEFAULT_MANIFEST_NAME = "datasets.manifest"

KINDS = ("synthetic", "threshold", "double-descent", "evaluate-one")


class ConfigError(ValueError):
    """Config file failed validation; message carries a line number when known."""


@dataclass(frozen=True)
class RunConfig:
    kind: str
    out_dir: str
    dataset: str | None = None
    manifest: str | None = None
    seeds: tuple[int, ...] = (0,)
    sigma_grid: tuple[float, ...] = experiments.DEFAULT_SIGMA_GRID
    n_grid: tuple[int, ...] | None = None
    trainset_cap: int | None = None
    row: int | None = None
    sigma_sq: float | None = None
    # synthetic fields
    train_t: tuple[float, ...] = experiments.DEFAULT_TRAIN_T
    train_y: tuple[float, ...] = experiments.DEFAULT_TRAIN_Y
    model_degrees: tuple[int, ...] = experiments.DEFAULT_MODEL_DEGREES
    eval_grid: int = 101
    quadrature: QuadratureConfig = pnml.DEFAULT_QUADRATURE


def _parse_lines(path: str) -> dict[str, tuple[int, str]]:
    """Flat ``key = value`` lines; '#' starts a comment. Returns
    key -> (line number, raw value)."""
    entries: dict[str, tuple[int, str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in stripped.split("=", 1))
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            if key in entries:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            entries[key] = (lineno, value)
    return entries


def _typed(path, key, entry, convert, kind_name):
    lineno, raw = entry
    try:
        return convert(raw)
    except (ValueError, TypeError):
        raise ConfigError(f"{path}:{lineno}: key {key!r} is not a valid {kind_name}")


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.split(",") if tok.strip())


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in raw.split(",") if tok.strip())


_KEY_TYPES = {
    "kind": ("string", str),
    "out_dir": ("string", str),
    "dataset": ("string", str),
    "manifest": ("string", str),
    "seeds": ("integer list", _int_list),
    "sigma_grid": ("number list", _float_list),
    "n_grid": ("integer list", _int_list),
    "trainset_cap": ("integer", int),
    "row": ("integer", int),
    "sigma_sq": ("number", float),
    "train_t": ("number list", _float_list),
    "train_y": ("number list", _float_list),
    "model_degrees": ("integer list", _int_list),
    "eval_grid": ("integer", int),
    "quad_initial_width_sigmas": ("number", float),
    "quad_initial_points": ("integer", int),
    "quad_max_points": ("integer", int),
    "quad_tail_fraction": ("number", float),
    "quad_rel_tol": ("number", float),
}


def load_run_config(path: str) -> RunConfig:
    entries = _parse_lines(path)
    values = {}
    for key, entry in entries.items():
        if key not in _KEY_TYPES:
            raise ConfigError(f"{path}:{entry[0]}: unknown key {key!r}")
        kind_name, convert = _KEY_TYPES[key]
        values[key] = _typed(path, key, entry, convert, kind_name)

    kind = values.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"{path}: 'kind' must be one of {', '.join(KINDS)}")
    if "out_dir" not in values:
        raise ConfigError(f"{path}: missing required key 'out_dir'")
    if kind in ("threshold", "double-descent", "evaluate-one") and "dataset" not in values:
        raise ConfigError(f"{path}: kind={kind} requires key 'dataset'")
    if kind == "evaluate-one" and "row" not in values:
        raise ConfigError(f"{path}: kind=evaluate-one requires key 'row'")
    if len(values.get("train_t", ())) != len(values.get("train_y", ())):
        if "train_t" in values or "train_y" in values:
            raise ConfigError(f"{path}: train_t and train_y must have equal length")

    quad_kwargs = {}
    for cfg_key, field_name in (
        ("quad_initial_width_sigmas", "initial_width_sigmas"),
        ("quad_initial_points", "initial_points"),
        ("quad_max_points", "max_points"),
        ("quad_tail_fraction", "tail_fraction"),
        ("quad_rel_tol", "rel_tol"),
    ):
        if cfg_key in values:
            quad_kwargs[field_name] = values.pop(cfg_key)
    if quad_kwargs:
        values["quadrature"] = QuadratureConfig(**quad_kwargs)

    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}")
    if any(s <= 0 for s in cfg.sigma_grid):
        raise ConfigError(f"{path}: sigma_grid values must be positive")
    if cfg.sigma_sq is not None and cfg.sigma_sq <= 0:
        raise ConfigError(f"{path}: sigma_sq must be positive")
    return cfg


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        digest.update(fh.read())
    return digest.hexdigest()


def _write_manifest(out_dir: str, config_path: str, cfg: RunConfig, outputs: list[str]) -> None:
    payload = {
        "version": __version__,
        "kind": cfg.kind,
        "seeds": list(cfg.seeds),
        "config_sha256": _sha256_file(config_path),
        "outputs": {name: _sha256_file(os.path.join(out_dir, name)) for name in sorted(outputs)},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dataset_root(args) -> str:
    return getattr(args, "data_root", None) or os.environ.get(DATA_ROOT_ENV, ".")


def _load_registry(manifest_path: str | None, root: str):
    path = manifest_path or os.path.join(root, DEFAULT_MANIFEST_NAME)
    return path, data.parse_manifest(path)


def _load_dataset(cfg: RunConfig, root: str) -> data.RawDataset:
    _, registry = _load_registry(cfg.manifest, root)
    if cfg.dataset not in registry:
        raise ConfigError(f"dataset {cfg.dataset!r} is not in the registry")
    return data.load_registered(registry[cfg.dataset], root)


def _run_synthetic(cfg: RunConfig, out_dir: str) -> list[str]:
    syn = experiments.SyntheticConfig(
        train_points=tuple(zip(cfg.train_t, cfg.train_y)),
        model_degrees=cfg.model_degrees,
        eval_grid=cfg.eval_grid,
        sigma_sq=cfg.sigma_sq if cfg.sigma_sq is not None else experiments.DEFAULT_SYNTHETIC_SIGMA_SQ,
    )
    points = experiments.run_synthetic(syn, cfg.quadrature)
    rows = [
        (p.t, p.m_degree, p.prediction, p.regret, p.regret_bound, math.sqrt(p.mn_norm_sq))
        for p in points
    ]
    write_csv(
        os.path.join(out_dir, "regret_grid.csv"),
        ["t", "M", "prediction", "regret", "bound", "mn_norm"],
        rows,
    )
    return ["regret_grid.csv"]


def _run_threshold(cfg: RunConfig, out_dir: str, root: str) -> list[str]:
    raw = _load_dataset(cfg, root)
    specs = [SplitSpec(seed=s, trainset_cap=cfg.trainset_cap) for s in cfg.seeds]
    curve = experiments.run_threshold_eval(raw, specs, cfg.sigma_grid, cfg.quadrature)
    rows = zip(curve.thresholds, curve.cdf_at, curve.pnml_logloss_at, curve.mn_logloss_at)
    write_csv(
        os.path.join(out_dir, "threshold_curve.csv"),
        ["threshold", "cdf", "pnml_logloss", "mn_logloss"],
        rows,
    )
    return ["threshold_curve.csv"]


def _dd_point(task):
    raw, n, seed, sigma_grid, quad = task
    try:
        return experiments.double_descent_point(raw, n, seed, sigma_grid, quad_cfg=quad)
    except (EvaluationError, ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise EvaluationError(f"numeric failure at n_train={n}, seed={seed}: {exc}") from exc


def _run_double_descent(cfg: RunConfig, out_dir: str, root: str, workers: int) -> list[str]:
    raw = _load_dataset(cfg, root)
    pool_size = int(math.floor(SplitSpec(seed=0).train_fraction * raw.features.shape[0]))
    n_grid = list(cfg.n_grid) if cfg.n_grid else experiments.default_n_grid(
        raw.features.shape[1], pool_size
    )
    bad = [n for n in n_grid if n < 1 or n > pool_size]
    if bad:
        raise ConfigError(f"n_grid values out of range [1, {pool_size}]: {bad}")

    tasks = [(raw, n, seed, cfg.sigma_grid, cfg.quadrature) for n in n_grid for seed in cfg.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_dd_point, tasks))
    else:
        records = [_dd_point(task) for task in tasks]
    records.sort(key=lambda r: (r.n_train, r.seed))

    write_csv(
        os.path.join(out_dir, "double_descent.csv"),
        ["dataset", "n_train", "m_over_n", "seed", "pnml_logloss", "mn_logloss", "regret", "bound"],
        [
            (r.dataset, r.n_train, r.m_over_n, r.seed, r.test_logloss_pnml,
             r.test_logloss_mn, r.mean_regret, r.mean_regret_bound)
            for r in records
        ],
    )
    agg = experiments.aggregate_records(records)
    write_csv(
        os.path.join(out_dir, "double_descent_aggregated.csv"),
        ["dataset", "n_train", "m_over_n",
         "pnml_logloss_mean", "pnml_logloss_ci95",
         "mn_logloss_mean", "mn_logloss_ci95",
         "regret_mean", "regret_ci95", "bound_mean", "bound_ci95"],
        [
            (a.dataset, a.n_train, a.m_over_n,
             a.pnml_logloss_mean, a.pnml_logloss_ci95,
             a.mn_logloss_mean, a.mn_logloss_ci95,
             a.regret_mean, a.regret_ci95, a.bound_mean, a.bound_ci95)
            for a in agg
        ],
    )
    return ["double_descent.csv", "double_descent_aggregated.csv"]


def _evaluate_one_report(raw: data.RawDataset, row: int, sigma_sq: float,
                         quad: QuadratureConfig, seed: int = 0) -> str:
    view = data.split(raw, SplitSpec(seed=seed))
    if not 0 <= row < view.x_test.shape[0]:
        raise ConfigError(f"row {row} outside test partition of size {view.x_test.shape[0]}")
    design = build_design(view.x_train, view.y_train)
    mn = mn_solve(design)
    x = view.x_test[row]
    y_true = float(view.y_test[row])
    ev = pnml.pnml_evaluate(design, mn, x, sigma_sq, quad)
    try:
        fit = pnml.solve_lambda_for_label(design, mn, x, y_true, sigma_sq=sigma_sq)
        lambda_y = fit.lambda_y
    except DegenerateDirectionError:
        lambda_y = 0.0
    lines = [
        f"dataset: {raw.name}",
        f"test row: {row}",
        f"mn_prediction: {_fmt(ev.mn_prediction)}",
        f"normalization_factor: {_fmt(ev.k_factor)}",
        f"regret: {_fmt(ev.regret)}",
        f"regret_bound: {_fmt(ev.regret_bound)}",
        f"x_orth_sq: {_fmt(ev.x_orth_sq)}",
        f"lambda_at_y_true: {_fmt(lambda_y)}",
    ]
    return "\n".join(lines)


def cmd_run(args) -> int:
    try:
        cfg = load_run_config(args.config)
    except (ConfigError, data.IngestionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    out_dir = args.out or cfg.out_dir
    root = _dataset_root(args)
    workers = args.workers or os.cpu_count() or 1
    try:
        os.makedirs(out_dir, exist_ok=True)
        if cfg.kind == "synthetic":
            outputs = _run_synthetic(cfg, out_dir)
        elif cfg.kind == "threshold":
            outputs = _run_threshold(cfg, out_dir, root)
        elif cfg.kind == "double-descent":
            outputs = _run_double_descent(cfg, out_dir, root, workers)
        else:  # evaluate-one
            raw = _load_dataset(cfg, root)
            sigma_sq = cfg.sigma_sq if cfg.sigma_sq is not None else 1.0
            report = _evaluate_one_report(raw, cfg.row, sigma_sq, cfg.quadrature,
                                          seed=cfg.seeds[0])
            print(report)
            report_path = os.path.join(out_dir, "evaluation.txt")
            with open(report_path, "w", encoding="utf-8") as fh:
                fh.write(report + "\n")
            outputs = ["evaluation.txt"]
    except (ConfigError, ValueError, data.IngestionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EvaluationError, ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    _write_manifest(out_dir, args.config, cfg, outputs)
    print(f"wrote {', '.join(outputs + ['manifest.json'])} to {out_dir}")
    return EXIT_OK


def cmd_evaluate_one(args) -> int:
    root = _dataset_root(args)
    try:
        _, registry = _load_registry(args.manifest, root)
        if args.dataset not in registry:
            raise ConfigError(f"dataset {args.dataset!r} is not in the registry")
        raw = data.load_registered(registry[args.dataset], root)
        report = _evaluate_one_report(raw, args.row, args.sigma_sq, pnml.DEFAULT_QUADRATURE)
    except (ConfigError, ValueError, data.IngestionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EvaluationError, ConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(report)
    return EXIT_OK


def cmd_list_datasets(args) -> int:
    root = _dataset_root(args)
    try:
        path, registry = _load_registry(args.manifest, root)
    except (data.IngestionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"registry: {path}")
    for name in sorted(registry):
        entry = registry[name]
        full = os.path.join(root, entry.path)
        status = "ok" if os.path.exists(full) else "missing file"
        print(f"  {name}: {entry.path} (target={entry.target_column}, "
              f"expected {entry.rows}x{entry.features}, {status})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnml-linreg",
        description="pNML regret and prediction for minimum-norm linear regression",
    )
    parser.add_argument("--data-root", default=None,
                        help=f"dataset root directory (default: ${DATA_ROOT_ENV} or '.')")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="override the config's out_dir")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("evaluate-one", help="report pNML quantities for one test sample")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--row", type=int, required=True)
    p_eval.add_argument("--sigma-sq", type=float, default=1.0)
    p_eval.add_argument("--manifest", default=None)
    p_eval.set_defaults(func=cmd_evaluate_one)

    p_list = sub.add_parser("list-datasets", help="show the dataset registry")
    p_list.add_argument("--manifest", default=None)
    p_list.set_defaults(func=cmd_list_datasets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
