"""Batch command line: ``soilnir {preprocess,regress,classify,rank,synth}``.

Every command writes deterministic JSON/CSV into the output directory. The
only run-dependent file is ``metadata.json`` (timestamp, argv, version).
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .classification import (
    DEFAULT_SCHEMES,
    ClassifierConfig,
    ClassScheme,
    CostMatrix,
    all_configs,
    off_diagonal_cells,
)
from .dataset import DatasetError, load_dataset, save_dataset, split_train_test
from .evaluation import (
    classification_metrics,
    compare_regressors,
    cost_grid_search,
    grid_size,
    kfold_cv_classification,
    mcc,
)
from .preprocess import BLOCK_ORDER, TRAIN, WHOLE, assemble_features, parse_blocks
from .ranking import rank_features, ranking_heatmap_export
from .regression import KINDS, LASSO, OLS, SVR
from .synthgen import SynthSpec, SynthSpecError, generate

OUT_ENV = "SOILNIR_OUT"
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3
COARSE_VALUES = [1, 3, 5, 7]
# full cost grids: values 1..7 per cell for 3+ classes, 1..150 for two
FULL_GRID = {2: "1:150"}
FULL_GRID_DEFAULT = "1:7"

log = logging.getLogger("soilnir")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything a run depends on besides the input files."""

    spectra: str | None = None
    labels: str | None = None
    out: str | None = None
    blocks: list = field(default_factory=lambda: [b.value for b in BLOCK_ORDER])
    std_mode: str = WHOLE
    train_fraction: float = 0.7
    seed: int = 0
    folds: int = 5
    jobs: int = 1
    log_target: bool = False
    candidates: list = field(default_factory=lambda: [OLS, SVR, LASSO])
    regressors: dict = field(default_factory=dict)
    schemes: dict = field(default_factory=dict)
    classifiers: list | None = None
    grid: object = None
    coarse: bool = False
    checkpoint_every: int = 1000
    n_boot: int = 1000

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def validate(self):
        try:
            self.blocks = [b.value for b in parse_blocks(self.blocks)]
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.std_mode not in (WHOLE, TRAIN):
            raise ConfigError(f"std_mode must be {WHOLE!r} or {TRAIN!r}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.jobs == 0 or self.jobs < -1:
            raise ConfigError("jobs must be positive (or -1 for all cores)")
        bad = [k for k in self.candidates if k not in KINDS]
        if bad or not self.candidates:
            raise ConfigError(f"candidates must be a non-empty subset of {list(KINDS)}, "
                              f"got {self.candidates}")
        for name in self.classifiers or []:
            _parse_config(name)
        for prop, s in self.schemes.items():
            _scheme(self, prop)

    def to_dict(self) -> dict:
        return asdict(self)


def _parse_config(name) -> ClassifierConfig:
    try:
        if isinstance(name, dict):
            return ClassifierConfig.from_dict(name)
        return ClassifierConfig.parse(name)
    except (ValueError, KeyError) as e:
        raise ConfigError(f"bad classifier config {name!r}: {e}") from e


def _scheme(cfg: RunConfig, prop: str) -> ClassScheme:
    if prop in cfg.schemes:
        d = cfg.schemes[prop]
        try:
            return ClassScheme(prop, tuple(d["thresholds"]), tuple(d["class_names"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad class scheme for {prop}: {e}") from e
    if prop in DEFAULT_SCHEMES:
        return DEFAULT_SCHEMES[prop]
    raise ConfigError(f"no class scheme for property {prop!r}")


def parse_grid(spec) -> list:
    """``"1:7"`` (inclusive range), ``"1,3,5"``, or ``"1:7;1:3;..."`` per cell.

    Lists are accepted as already parsed grids.
    """
    if isinstance(spec, list):
        return spec
    spec = str(spec).strip()
    try:
        if ";" in spec:
            return [parse_grid(part) for part in spec.split(";")]
        if ":" in spec:
            parts = [float(x) for x in spec.split(":")]
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1.0
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return [_tidy(lo + i * step) for i in range(n)]
        return [_tidy(float(x)) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid spec {spec!r}") from None


def _tidy(v: float):
    return int(v) if float(v).is_integer() else v


# ------------------------------------------------------------- output

def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out or os.environ.get(OUT_ENV) or "soilnir_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def _write_metadata(out: Path, command: str, argv, cfg: RunConfig):
    meta = {"command": command, "argv": list(argv), "toolkit_version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "config": cfg.to_dict()}
    _write(out / "metadata.json", json.dumps(meta, indent=1, default=str) + "\n")


def _load(cfg: RunConfig):
    if not cfg.spectra:
        raise ConfigError("no spectra file given (--spectra or config 'spectra')")
    if not cfg.labels:
        raise ConfigError("no labels file given (--labels or config 'labels')")
    for p in (cfg.spectra, cfg.labels):
        if not Path(p).is_file():
            raise ConfigError(f"file not found: {p}")
    return load_dataset(cfg.spectra, cfg.labels)


# ----------------------------------------------------------- commands

def cmd_preprocess(cfg: RunConfig, out: Path) -> dict:
    ds = _load(cfg)
    fm = assemble_features(ds, cfg.blocks, cfg.std_mode)
    _write(out / "features.csv", fm.to_csv())
    _write(out / "feature_stats.json", fm.stats_json() + "\n")
    return {"samples": fm.shape[0], "features": fm.shape[1]}


def cmd_regress(cfg: RunConfig, out: Path, properties) -> dict:
    ds = _load(cfg)
    train, test = split_train_test(ds, cfg.train_fraction, cfg.seed)
    status = {}
    for prop in properties:
        _require_property(ds, prop)
        rep = compare_regressors(train, test, prop, tuple(cfg.candidates), cfg.blocks,
                                 cfg.std_mode, folds=cfg.folds, seed=cfg.seed,
                                 hyperparams=cfg.regressors, log_target=cfg.log_target,
                                 n_boot=cfg.n_boot)
        doc = rep.to_dict()
        doc["split"] = {"train_fraction": cfg.train_fraction, "seed": cfg.seed,
                        "n_train": int(train.has_target(prop).sum()),
                        "n_test": int(test.has_target(prop).sum())}
        _write(out / f"regression_{prop}.json", _dump(doc))
        if rep.suitable:
            _write(out / f"predictions_{prop}.csv", rep.predictions_csv())
            for kind, model in rep.models.items():
                _write(out / "models" / f"{prop}_{kind}.json", model.to_json() + "\n")
        status[prop] = rep.status
    return status


def _require_property(ds, prop):
    if prop not in ds.property_names:
        raise ConfigError(f"property {prop!r} not in labels file")
    if not ds.has_target(prop).any():
        raise ConfigError(f"property {prop!r} has no values")


def _matrix_csv(cm, names) -> str:
    lines = [",".join(["true\\predicted"] + list(names))]
    for name, row in zip(names, cm):
        lines.append(",".join([name] + [str(int(v)) for v in row]))
    return "\n".join(lines) + "\n"


METRIC_COLUMNS = ("TPR", "TNR", "PPV", "NPV", "ACC", "F1", "MCC")


def _metric_row(m) -> list:
    vals = [m.macro["TPR"], m.macro["TNR"], m.macro["PPV"], m.macro["NPV"], m.accuracy,
            m.macro["F1"], m.mcc]
    return ["" if v is None or not math.isfinite(v) else repr(float(v)) for v in vals]


def _sweep_one(config, k, X, y, folds, seed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return kfold_cv_classification(config, CostMatrix.uniform(k), X, y, folds, seed)


def _grid_values(cfg: RunConfig, k: int):
    if cfg.grid is not None:
        return parse_grid(cfg.grid)
    if cfg.coarse:
        return list(COARSE_VALUES)
    return parse_grid(FULL_GRID.get(k, FULL_GRID_DEFAULT))


def cmd_classify(cfg: RunConfig, out: Path, properties) -> dict:
    ds = _load(cfg)
    configs = [_parse_config(c) for c in cfg.classifiers] if cfg.classifiers else all_configs()
    summary = {}
    for prop in properties:
        _require_property(ds, prop)
        scheme = _scheme(cfg, prop)
        sub = ds.subset(ds.has_target(prop))
        raw_labels = scheme.assign_many(sub.target(prop))
        present = np.unique(raw_labels)
        if present.size < 2:
            raise ConfigError(f"{prop}: fewer than two classes present under the scheme")
        if present.size < scheme.n_classes:
            dropped = [scheme.class_names[c] for c in range(scheme.n_classes) if c not in present]
            warnings.warn(f"{prop}: classes {dropped} have no samples; continuing with "
                          f"{present.size} classes")
        names = [scheme.class_names[c] for c in present]
        y = np.searchsorted(present, raw_labels)
        k = present.size
        X = assemble_features(sub, cfg.blocks, WHOLE).values

        results = Parallel(n_jobs=cfg.jobs)(
            delayed(_sweep_one)(c, k, X, y, cfg.folds, cfg.seed) for c in configs)
        table = [",".join(("config",) + METRIC_COLUMNS)]
        sweep = []
        for c, (cm, m) in zip(configs, results):
            table.append(",".join([c.name] + _metric_row(m)))
            sweep.append({"config": c.name, "confusion": cm.tolist(), **m.to_dict()})
        scores = [m.mcc for _, m in results]
        best_i = int(np.argmax(scores))
        best = configs[best_i]
        _write(out / f"classify_{prop}_sweep.csv", "\n".join(table) + "\n")

        values = _grid_values(cfg, k)
        ckpt = out / f"classify_{prop}_checkpoint.jsonl"
        res = cost_grid_search(best, X, y, values, cfg.folds, cfg.seed, cfg.jobs, ckpt,
                               cfg.checkpoint_every, n_classes=k)
        uniform_cm = results[best_i][0]
        best_m = classification_metrics(res.best_confusion)
        doc = {"property": prop, "scheme": scheme.to_dict(), "classes": names,
               "class_counts": np.bincount(y, minlength=k).tolist(), "folds": cfg.folds,
               "seed": cfg.seed, "sweep": sweep, "best_config": best.name,
               "uniform": {"confusion": uniform_cm.tolist(), "mcc": mcc(uniform_cm)},
               "grid_search": {**res.to_dict(), "metrics": best_m.to_dict()},
               "cells": [list(c) for c in off_diagonal_cells(k)]}
        _write(out / f"classify_{prop}.json", _dump(doc))
        _write(out / f"classify_{prop}_confusion_uniform.csv", _matrix_csv(uniform_cm, names))
        _write(out / f"classify_{prop}_confusion_best.csv",
               _matrix_csv(res.best_confusion, names))
        with open(out / f"classify_{prop}_metrics.csv", "w", newline="") as fh:
            fh.write(",".join(("setting",) + METRIC_COLUMNS) + "\n")
            fh.write(",".join(["uniform"] + _metric_row(results[best_i][1])) + "\n")
            fh.write(",".join(["best_cost"] + _metric_row(best_m)) + "\n")
        _write(out / f"classify_{prop}_surface.csv", res.surface_csv())
        summary[prop] = {"best_config": best.name, "uniform_mcc": mcc(uniform_cm),
                         "best_mcc": res.best_mcc, "grid_points": len(res.mcc)}
    return summary


def _rank_one(fm, y, seed, prop):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return rank_features(fm, y, seed, prop)


def cmd_rank(cfg: RunConfig, out: Path, properties) -> dict:
    ds = _load(cfg)
    jobs = []
    for prop in properties:
        _require_property(ds, prop)
        sub = ds.subset(ds.has_target(prop))
        y = sub.target(prop)
        if np.ptp(y) == 0:
            raise ConfigError(f"property {prop!r} is constant")
        fm = assemble_features(sub, ("d1", "d2"), WHOLE)
        jobs.append((fm, y, prop))
    rankings = Parallel(n_jobs=cfg.jobs)(delayed(_rank_one)(fm, y, cfg.seed, p)
                                         for fm, y, p in jobs)
    for rk in rankings:
        _write(out / f"ranking_{rk.property}.json", rk.to_json() + "\n")
    _write(out / "ranking_heatmap.csv", ranking_heatmap_export(rankings))
    return {rk.property: rk.entries[0].feature.name for rk in rankings}


def cmd_synth(cfg: RunConfig, out: Path, spec_path) -> dict:
    if not Path(spec_path).is_file():
        raise ConfigError(f"file not found: {spec_path}")
    try:
        spec = SynthSpec.load(spec_path)
    except json.JSONDecodeError as e:
        raise ConfigError(f"spec is not valid JSON: {e}") from e
    if cfg.seed is not None and cfg._seed_given:
        spec = dataclasses.replace(spec, seed=cfg.seed)
    ds = generate(spec)
    save_dataset(ds, out / "spectra.csv", out / "labels.csv")
    _write(out / "synth_spec.json", spec.to_json() + "\n")
    return {"samples": len(ds), "bands": ds.grid.count}


# ------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="RunConfig JSON file; flags override its values")
    common.add_argument("--seed", type=int, help="random seed (split, folds, solvers)")
    common.add_argument("--folds", type=int, help="cross-validation folds")
    common.add_argument("--jobs", type=int, help="parallel workers; outputs do not depend on it")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./soilnir_out)")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--spectra", help="spectra CSV")
    data.add_argument("--labels", help="labels CSV")
    data.add_argument("--blocks", help="comma list of raw,d1,d2,fft")
    data.add_argument("--std-mode", choices=(WHOLE, TRAIN), help="standardization statistics")

    p = argparse.ArgumentParser(prog="soilnir", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("preprocess", parents=[common, data],
                   help="build the standardized feature matrix")

    r = sub.add_parser("regress", parents=[common, data],
                       help="CV-gated regressor comparison for one or more properties")
    r.add_argument("properties", nargs="+", metavar="PROPERTY")
    r.add_argument("--log-target", action="store_true", help="fit log(y), report in y units")
    r.add_argument("--train-fraction", type=float)

    c = sub.add_parser("classify", parents=[common, data],
                       help="24-config sweep plus cost grid search")
    c.add_argument("properties", nargs="+", metavar="PROPERTY")
    c.add_argument("--grid", help="cost values per cell: '1:7', '1,3,5' or 'a;b;...' per cell")
    c.add_argument("--coarse", action="store_true", help=f"use cost values {COARSE_VALUES}")
    c.add_argument("--checkpoint-every", type=int)
    c.add_argument("--count-only", action="store_true",
                   help="print the number of grid points and exit")

    k = sub.add_parser("rank", parents=[common, data], help="derivative feature ranking")
    k.add_argument("properties", nargs="*", metavar="PROPERTY",
                   help="default: every property with values")

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    s.add_argument("spec", help="SynthSpec JSON file")
    return p


_FLAG_KEYS = ("spectra", "labels", "out", "seed", "folds", "jobs", "std_mode", "grid",
              "train_fraction", "checkpoint_every")


def _resolve(args) -> RunConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if not isinstance(base, dict):
            raise ConfigError("config must be a JSON object")
    cfg = RunConfig.from_dict(base)
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "blocks", None):
        cfg.blocks = [b for b in args.blocks.split(",") if b]
    if getattr(args, "coarse", False):
        cfg.coarse = True
    if getattr(args, "log_target", False):
        cfg.log_target = True
    cfg._seed_given = args.seed is not None or "seed" in base
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        cfg = _resolve(args)
        if args.command == "classify" and args.count_only:
            for prop in args.properties:
                k = _scheme(cfg, prop).n_classes
                print(f"{prop}: {grid_size(k, _grid_values(cfg, k))} grid points")
            return EXIT_OK
        out = _out_dir(cfg)
        if args.command == "preprocess":
            result = cmd_preprocess(cfg, out)
        elif args.command == "regress":
            result = cmd_regress(cfg, out, args.properties)
        elif args.command == "classify":
            result = cmd_classify(cfg, out, args.properties)
        elif args.command == "rank":
            ds = _load(cfg)
            props = args.properties or [p for p in ds.property_names if ds.has_target(p).any()]
            result = cmd_rank(cfg, out, props)
        else:
            result = cmd_synth(cfg, out, args.spec)
        _write_metadata(out, args.command, argv, cfg)
    except (ConfigError, DatasetError, SynthSpecError) as e:
        print(f"soilnir: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # numeric or runtime failure
        log.debug("failure", exc_info=True)
        print(f"soilnir: {args.command} failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
