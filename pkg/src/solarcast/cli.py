"""Batch command line: synth, preprocess, train, evaluate, predict, report, run.

Every command accepts ``--config FILE.json`` holding the same keys as its
flags (dashes or underscores); flags given on the command line win.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model/serialization error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import SynthConfig, generate_synthetic, load_csv, split, write_csv, format_timestamp
from .errors import DataError, SolarcastError, UsageError
from .experiment import (
    MODEL_CHOICES,
    ExperimentConfig,
    emit_report,
    model_file_config,
    read_predictions_csv,
    read_report_csv,
    resolve_created_at,
    run_experiment,
    scatter_svg,
    train_model,
    write_report_csv,
)
from .learners import DEFAULT_PARAMS
from .metrics import error_table, evaluate, rmse
from .persist import load_model_file, save_model
from .preprocess import PreprocessOptions, apply_pipeline, fit_pipeline

log = logging.getLogger("solarcast")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# hyperparameter flags: dest -> (type, help)
HYPER_FLAGS = {
    "ridge_lambda": (float, "linreg ridge penalty"),
    "max_depth": (int, "tree/forest/gbm depth limit"),
    "min_samples_leaf": (int, "tree/forest/gbm minimum leaf size"),
    "min_improvement": (float, "tree/forest/gbm minimum SSE reduction per split"),
    "n_trees": (int, "forest size"),
    "feature_subsample": (int, "forest features considered per split"),
    "rounds": (int, "gbm boosting rounds"),
    "learning_rate": (float, "gbm shrinkage / mlp step size"),
    "k": (int, "knn neighbours"),
    "weighting": (str, "knn weighting: uniform|distance"),
    "hidden": (int, "mlp hidden units"),
    "epochs": (int, "mlp epochs"),
    "batch_size": (int, "mlp mini-batch size"),
    "epsilon": (float, "svr tube half-width (kW)"),
    "C": (float, "svr regularization constant"),
    "steps": (int, "svr subgradient steps"),
    "step_size": (float, "svr initial step size"),
}


def _add_config(p):
    p.add_argument("--config", help="JSON file with default values for these flags")


def _add_hyper(p):
    g = p.add_argument_group("hyperparameters (applied to every selected model that has them)")
    for dest, (typ, help_) in HYPER_FLAGS.items():
        flag = "--" + dest.replace("_", "-") if dest != "C" else "--C"
        g.add_argument(flag, dest=dest, type=typ, help=help_)
    g.add_argument("--no-bootstrap", dest="bootstrap", action="store_const", const=False,
                   help="forest: grow every tree on the full training set")


def _add_preprocess(p):
    p.add_argument("--policy", choices=["drop", "clip"], help="outlier handling (default drop)")
    p.add_argument("--norm", choices=["minmax", "zscore"], help="normalization (default minmax)")
    p.add_argument("--top-m", type=int, help="keep only the m features most correlated with power")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="solarcast", description=__doc__.splitlines()[0],
                     argument_default=argparse.SUPPRESS)
    parser.add_argument("-v", "--verbose", action="store_true", default=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset", argument_default=argparse.SUPPRESS)
    _add_config(p)
    p.add_argument("--days", type=int)
    p.add_argument("--step-min", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--peak-irradiance", type=float)
    p.add_argument("--efficiency", type=float)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--missing-rate", type=float)

    p = sub.add_parser("preprocess", help="fit preprocessing on a file and write the cleaned rows",
                       argument_default=argparse.SUPPRESS)
    _add_config(p)
    p.add_argument("--data")
    _add_preprocess(p)
    p.add_argument("--out")

    p = sub.add_parser("train", help="split, preprocess, fit one model and save it",
                       argument_default=argparse.SUPPRESS)
    _add_config(p)
    p.add_argument("--data")
    p.add_argument("--model", choices=MODEL_CHOICES)
    p.add_argument("--k-folds", type=int)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--bases", help="stack base models, comma separated (default knn,mlp,forest,gbm)")
    p.add_argument("--no-original-features", dest="include_original_features", action="store_const",
                   const=False, help="stack: meta-learner sees base predictions only")
    p.add_argument("--n-jobs", type=int)
    p.add_argument("--created-at", help="timestamp recorded in the model file")
    _add_preprocess(p)
    _add_hyper(p)

    p = sub.add_parser("evaluate", help="score a saved model on a labelled file",
                       argument_default=argparse.SUPPRESS)
    _add_config(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--threshold-kw", type=float)
    p.add_argument("--out-dir")
    p.add_argument("--rows", choices=["auto", "test", "all"],
                   help="auto (default): the model's held-out split when the file matches its training data")

    p = sub.add_parser("predict", help="batch predictions from a saved model",
                       argument_default=argparse.SUPPRESS)
    _add_config(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--out")

    p = sub.add_parser("report", help="render a results directory", argument_default=argparse.SUPPRESS)
    _add_config(p)
    p.add_argument("--results")
    p.add_argument("--format", choices=["txt", "csv", "svg"])

    p = sub.add_parser("run", help="full experiment: data, split, preprocess, train, evaluate",
                       argument_default=argparse.SUPPRESS)
    _add_config(p)
    p.add_argument("--data")
    p.add_argument("--synth-days", type=int)
    p.add_argument("--synth-step-min", type=int)
    p.add_argument("--models", help="comma separated, e.g. linreg,tree,forest")
    p.add_argument("--bases")
    p.add_argument("--no-original-features", dest="include_original_features", action="store_const",
                   const=False)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--k-folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold-kw", type=float)
    p.add_argument("--out-dir")
    p.add_argument("--n-jobs", type=int)
    p.add_argument("--created-at")
    _add_preprocess(p)
    _add_hyper(p)
    return parser


def _merged(given: dict, allowed: set[str]) -> dict:
    """Config-file values overridden by command-line flags."""
    values: dict = {}
    given = dict(given)
    cfg_path = given.pop("config", None)
    if cfg_path:
        try:
            file_values = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataError(f"config file not found: {cfg_path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {cfg_path} is not valid JSON: {exc}") from None
        if not isinstance(file_values, dict):
            raise UsageError(f"config file {cfg_path} must hold a JSON object")
        file_values = {k.replace("-", "_"): v for k, v in file_values.items()}
        unknown = set(file_values) - allowed
        if unknown:
            raise UsageError(f"unknown keys in {cfg_path}: {sorted(unknown)}")
        values.update(file_values)
    values.update(given)
    return values


def _allowed_keys(parser: argparse.ArgumentParser, command: str) -> set[str]:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    keys = {a.dest for a in sub.choices[command]._actions if a.dest != "help"}
    if command in ("run", "train"):
        keys |= {"synth", "params"}
    return keys


def _require(values: dict, *keys):
    missing = [k for k in keys if values.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _hyper_params(values: dict, kinds) -> dict[str, dict]:
    out: dict[str, dict] = {kind: dict(values.get("params", {}).get(kind, {})) for kind in kinds}
    for kind in kinds:
        for key in DEFAULT_PARAMS[kind]:
            if key in values and values[key] is not None and key != "seed":
                out[kind][key] = values[key]
    return {k: v for k, v in out.items() if v}


def _csv_list(v):
    if v is None or isinstance(v, list):
        return v
    return [s.strip() for s in str(v).split(",") if s.strip()]


def _data_path(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"data file not found: {p}")
    return p


def cmd_synth(v: dict) -> int:
    _require(v, "seed", "out")
    cfg = SynthConfig(n_days=v.get("days", 250), step_minutes=v.get("step_min", 36),
                      peak_irradiance=v.get("peak_irradiance", 1000.0),
                      panel_efficiency=v.get("efficiency", 0.9), noise_std=v.get("noise_std", 5.0),
                      seed=v["seed"], missing_rate=v.get("missing_rate", 0.0))
    ds = generate_synthetic(cfg)
    write_csv(ds, v["out"])
    print(f"wrote {len(ds)} rows to {v['out']}")
    return 0


def cmd_preprocess(v: dict) -> int:
    _require(v, "data", "out")
    ds = load_csv(_data_path(v["data"]))
    opts = PreprocessOptions(policy=v.get("policy", "drop"), norm=v.get("norm", "minmax"), top_m=v.get("top_m"))
    pipe = fit_pipeline(ds, np.arange(len(ds)), opts)
    Z, y, rows = apply_pipeline(pipe, ds)
    with Path(v["out"]).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *pipe.output_names, "power"])
        for ts, z, t in zip(ds.timestamps[rows], Z, y):
            w.writerow([format_timestamp(ts), *(repr(float(x)) for x in z), repr(float(t))])
    print(f"kept {len(rows)} of {len(ds)} rows; features {pipe.output_names}; wrote {v['out']}")
    return 0


def _experiment_config(v: dict, models: list[str]) -> ExperimentConfig:
    bases = _csv_list(v.get("bases")) or ["knn", "mlp", "forest", "gbm"]
    kinds = set(models) - {"stack"}
    if "stack" in models:
        kinds |= set(bases)
    synth = v.get("synth")
    if v.get("data") is None and synth is None:
        synth = {"n_days": v.get("synth_days", 250), "step_minutes": v.get("synth_step_min", 36)}
    return ExperimentConfig(
        seed=v["seed"],
        data=v.get("data"),
        synth=synth if v.get("data") is None else None,
        models=models,
        params=_hyper_params(v, sorted(kinds)),
        bases=bases,
        include_original_features=v.get("include_original_features", True),
        test_fraction=v.get("test_fraction", 0.2),
        k_folds=v.get("k_folds", 4),
        threshold_kw=v.get("threshold_kw", 0.0),
        out_dir=v.get("out_dir", "results"),
        policy=v.get("policy", "drop"),
        norm=v.get("norm", "minmax"),
        top_m=v.get("top_m"),
        n_jobs=v.get("n_jobs", 1),
        created_at=v.get("created_at"),
    )


def cmd_train(v: dict) -> int:
    _require(v, "data", "model", "seed", "out")
    cfg = _experiment_config(v, [v["model"]])
    cfg.validate()
    ds = load_csv(_data_path(v["data"]))
    sp = split(ds, cfg.test_fraction, cfg.seed)
    pipe = fit_pipeline(ds, sp.train, cfg.preprocess_options())
    X, y, _ = apply_pipeline(pipe, ds, sp.train)
    model = train_model(cfg.models[0], cfg, X, y)
    save_model(model, pipe, v["out"], model_file_config(cfg, cfg.models[0], len(ds)),
               resolve_created_at(cfg.created_at, ds))
    Xt, yt, _ = apply_pipeline(pipe, ds, sp.test)
    if len(yt):
        print(f"{cfg.models[0]}: trained on {len(y)} rows, held-out RMSE {rmse(yt, model.predict(Xt)):.3f} kW")
    print(f"saved {v['out']}")
    return 0


def cmd_evaluate(v: dict) -> int:
    _require(v, "model", "data")
    model, pipe, doc = load_model_file(v["model"])
    ds = load_csv(_data_path(v["data"]))
    echo = doc.get("config", {})
    mode = v.get("rows", "auto")
    rows = np.arange(len(ds))
    if mode != "all":
        matches = echo.get("n_rows") == len(ds) and "seed" in echo and "test_fraction" in echo
        if matches:
            rows = split(ds, echo["test_fraction"], echo["seed"]).test
        elif mode == "test":
            raise DataError("data file does not match the model's training data; cannot rebuild its test split")
    threshold = v.get("threshold_kw", echo.get("threshold_kw", 0.0))
    X, y, kept = apply_pipeline(pipe, ds, rows)
    pred = model.predict(X)
    report = evaluate(y, pred, threshold)
    emit_report(report, error_table(kept.tolist(), y, pred), v.get("out_dir", "results"), ds.timestamps[kept])
    for name, value in report.rows():
        print(f"{name:>12}  {value:.6g}")
    return 0


def cmd_predict(v: dict) -> int:
    _require(v, "model", "data", "out")
    model, pipe, _ = load_model_file(v["model"])
    ds = load_csv(_data_path(v["data"]), require_target=False)
    X, _, rows = apply_pipeline(pipe, ds, policy="clip")
    pred = model.predict(X) if len(rows) else np.empty(0)
    with Path(v["out"]).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "predicted"])
        for ts, p in zip(ds.timestamps[rows], pred):
            w.writerow([format_timestamp(ts), repr(float(p))])
    print(f"wrote {len(rows)} predictions to {v['out']}")
    return 0


def cmd_report(v: dict) -> int:
    _require(v, "results")
    res = Path(v["results"])
    preds = res / "predictions.csv"
    if not preds.is_file():
        raise DataError(f"no predictions.csv in {res}")
    ids, _, actual, predicted = read_predictions_csv(preds)
    fmt = v.get("format", "txt")
    table = error_table(ids, actual, predicted)
    if fmt == "txt":
        text = table.render()
        (res / "error_table.txt").write_text(text, encoding="utf-8")
        sys.stdout.write(text)
    elif fmt == "csv":
        old = res / "report.csv"
        threshold = read_report_csv(old).get("threshold_kw", 0.0) if old.is_file() else 0.0
        write_report_csv(evaluate(actual, predicted, threshold), old)
        sys.stdout.write(old.read_text(encoding="utf-8"))
    else:
        path = res / "scatter.svg"
        path.write_text(scatter_svg(actual, predicted), encoding="utf-8")
        print(path)
    return 0


def cmd_run(v: dict) -> int:
    _require(v, "seed")
    models = _csv_list(v.get("models")) or ["stack"]
    cfg = _experiment_config(v, models)
    result = run_experiment(cfg)
    for name, r in result.results.items():
        mark = " (best)" if name == result.best and len(result.results) > 1 else ""
        print(f"{name}{mark}: rmse={r.report.rmse:.3f} mae={r.report.mae:.3f} "
              f"r={r.report.pearson_r:.4f} auc={r.report.auc:.4f} f1={r.report.f1:.3f}")
        for base, value in r.base_rmse.items():
            print(f"  base {base}: rmse={value:.3f}")
    print(f"results in {result.out_dir}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "report": cmd_report,
    "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ns = vars(args).copy()
    command = ns.pop("command")
    ns.pop("verbose")
    try:
        values = _merged(ns, _allowed_keys(parser, command))
        return COMMANDS[command](values)
    except SolarcastError as exc:
        print(f"solarcast {command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"solarcast {command}: file not found: {exc.filename}", file=sys.stderr)
        return DataError.exit_code
