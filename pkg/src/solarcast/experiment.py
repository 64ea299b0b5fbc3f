"""End-to-end experiment runner and report files."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .data import (
    LabeledDataset,
    SynthConfig,
    format_timestamp,
    generate_synthetic,
    load_csv,
    split,
)
from .ensemble import StackConfig, fit_stack
from .errors import DataError, EmptyInput, InvalidConfig, IoError
from .learners import DEFAULT_PARAMS, LEARNER_KINDS, LearnerSpec, fit_learner
from .metrics import EvaluationReport, ErrorTable, error_table, evaluate, rmse
from .persist import save_model, utc_stamp
from .preprocess import PreprocessOptions, apply_pipeline, fit_pipeline

log = logging.getLogger(__name__)

MODEL_CHOICES = (*LEARNER_KINDS, "stack")


@dataclass
class ExperimentConfig:
    seed: int
    data: str | None = None
    synth: dict | None = None
    models: list[str] = field(default_factory=lambda: ["stack"])
    params: dict[str, dict] = field(default_factory=dict)
    bases: list[str] = field(default_factory=lambda: ["knn", "mlp", "forest", "gbm"])
    include_original_features: bool = True
    test_fraction: float = 0.2
    k_folds: int = 4
    threshold_kw: float = 0.0
    out_dir: str = "results"
    policy: str = "drop"
    norm: str = "minmax"
    top_m: int | None = None
    n_jobs: int = 1
    created_at: str | None = None

    def validate(self) -> None:
        if self.seed is None:
            raise InvalidConfig("a seed is required")
        if (self.data is None) == (self.synth is None):
            raise InvalidConfig("give exactly one of data (CSV path) or synth (generator settings)")
        if not self.models:
            raise InvalidConfig("no models requested")
        for m in self.models:
            if m not in MODEL_CHOICES:
                raise InvalidConfig(f"unknown model {m!r}; choose from {MODEL_CHOICES}")
        for b in self.bases:
            if b not in LEARNER_KINDS:
                raise InvalidConfig(f"unknown base model {b!r}")
        for kind in self.params:
            if kind not in LEARNER_KINDS:
                raise InvalidConfig(f"hyperparameters given for unknown model {kind!r}")
        self.preprocess_options().validate()

    def preprocess_options(self) -> PreprocessOptions:
        return PreprocessOptions(policy=self.policy, norm=self.norm, top_m=self.top_m)

    def learner_spec(self, kind: str) -> LearnerSpec:
        return LearnerSpec(kind, dict(self.params.get(kind, {}))).with_seed(self.seed)

    def stack_config(self) -> StackConfig:
        specs = tuple(LearnerSpec(b, dict(self.params.get(b, {}))) for b in self.bases)
        return StackConfig(specs, self.k_folds, self.include_original_features, self.seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        d = {k.replace("-", "_"): v for k, v in d.items()}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
        if d.get("seed") is None:
            raise InvalidConfig("a seed is required")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    if cfg.data is not None:
        path = Path(cfg.data)
        if not path.is_file():
            raise DataError(f"data file not found: {path}")
        return load_csv(path)
    synth = dict(cfg.synth)
    synth.setdefault("seed", cfg.seed)
    return generate_synthetic(SynthConfig(**synth))


def resolve_created_at(explicit: str | None, ds: LabeledDataset | None = None) -> str:
    """Timestamp for model files that does not depend on the wall clock.

    Order: explicit value, ``SOURCE_DATE_EPOCH``, newest data timestamp.
    """
    if explicit:
        return explicit
    env = os.environ.get("SOURCE_DATE_EPOCH")
    if env:
        return utc_stamp(int(env))
    if ds is not None and len(ds):
        return format_timestamp(int(ds.timestamps.max()))
    return utc_stamp()


def train_model(kind: str, cfg: ExperimentConfig, X, y):
    if kind == "stack":
        return fit_stack(cfg.stack_config(), X, y, n_jobs=cfg.n_jobs)
    return fit_learner(cfg.learner_spec(kind), X, y, n_jobs=cfg.n_jobs)


# ---------------------------------------------------------------- report files

SVG_SIZE = 480
SVG_MARGIN = 40


def scatter_svg(actual, predicted, title: str = "Predicted vs actual") -> str:
    """Predicted-vs-actual scatter with the y = x reference line.

    Points live in a flipped plot-area group whose x and y share one scale,
    so a perfect prediction has ``cx == cy``.
    """
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    lo = float(min(a.min(), p.min()))
    hi = float(max(a.max(), p.max()))
    if hi == lo:
        hi = lo + 1.0
    side = SVG_SIZE - 2 * SVG_MARGIN
    to_px = lambda v: (v - lo) / (hi - lo) * side  # noqa: E731
    bottom = SVG_SIZE - SVG_MARGIN
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" '
        f'viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        f'<title>{title}</title>',
        f'<rect x="{SVG_MARGIN}" y="{SVG_MARGIN}" width="{side}" height="{side}" fill="none" stroke="#444"/>',
        f'<text x="{SVG_SIZE / 2:g}" y="{SVG_SIZE - 8}" text-anchor="middle" font-size="12">Actual (kW)</text>',
        f'<text x="12" y="{SVG_SIZE / 2:g}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 12 {SVG_SIZE / 2:g})">Predicted (kW)</text>',
        f'<text x="{SVG_MARGIN}" y="{bottom + 14}" font-size="10">{lo:.3f}</text>',
        f'<text x="{SVG_SIZE - SVG_MARGIN}" y="{bottom + 14}" text-anchor="end" font-size="10">{hi:.3f}</text>',
        f'<g id="plot" transform="translate({SVG_MARGIN} {bottom}) scale(1 -1)">',
        f'<line id="reference" x1="0" y1="0" x2="{side}" y2="{side}" stroke="#c33" stroke-width="1"/>',
    ]
    for ai, pi in zip(a, p):
        out.append(f'<circle cx="{to_px(ai):.3f}" cy="{to_px(pi):.3f}" r="2" fill="#1f77b4" fill-opacity="0.5"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_report_csv(report: EvaluationReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for name, value in report.rows():
            w.writerow([name, repr(value)])


def read_report_csv(path) -> dict:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return {name: float(v) for name, v in rows[1:]}


def write_predictions_csv(table: ErrorTable, timestamps, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_id", "timestamp", "actual", "predicted", "error"])
        for (rid, a, p, e), ts in zip(table.rows(), timestamps):
            w.writerow([rid, format_timestamp(ts), repr(a), repr(p), repr(e)])


def read_predictions_csv(path):
    ids, ts, actual, predicted = [], [], [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            ids.append(int(row["row_id"]))
            ts.append(row["timestamp"])
            actual.append(float(row["actual"]))
            predicted.append(float(row["predicted"]))
    return ids, ts, np.array(actual), np.array(predicted)


def emit_report(report: EvaluationReport, table: ErrorTable, out_dir, timestamps=None) -> dict[str, Path]:
    """Write report.csv, error_table.txt, scatter.svg and predictions.csv."""
    if len(table) == 0:
        raise EmptyInput("refusing to write a report for an empty test set")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "report": out / "report.csv",
            "error_table": out / "error_table.txt",
            "scatter": out / "scatter.svg",
            "predictions": out / "predictions.csv",
        }
        write_report_csv(report, paths["report"])
        paths["error_table"].write_text(table.render(), encoding="utf-8")
        paths["scatter"].write_text(scatter_svg(table.actual, table.predicted), encoding="utf-8")
        if timestamps is None:
            timestamps = np.zeros(len(table), dtype=np.int64)
        write_predictions_csv(table, timestamps, paths["predictions"])
    except OSError as exc:
        raise IoError(f"cannot write report files to {out}: {exc}") from exc
    return paths


# ---------------------------------------------------------------- the runner

@dataclass
class ModelResult:
    name: str
    report: EvaluationReport
    model_path: Path
    base_rmse: dict[str, float] = field(default_factory=dict)


@dataclass
class ExperimentResult:
    results: dict[str, ModelResult]
    best: str
    out_dir: Path

    @property
    def report(self) -> EvaluationReport:
        return self.results[self.best].report


def model_file_config(cfg: ExperimentConfig, kind: str, n_rows: int) -> dict:
    """Settings echoed into a model file so evaluate can rebuild the split."""
    echo = {
        "model": kind,
        "seed": cfg.seed,
        "test_fraction": cfg.test_fraction,
        "n_rows": n_rows,
        "policy": cfg.policy,
        "norm": cfg.norm,
        "top_m": cfg.top_m,
        "threshold_kw": cfg.threshold_kw,
    }
    if kind == "stack":
        echo["stack"] = cfg.stack_config().to_dict()
    else:
        echo["hyperparameters"] = cfg.learner_spec(kind).resolved()
    return echo


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    ds = load_dataset(cfg)
    sp = split(ds, cfg.test_fraction, cfg.seed)
    pipe = fit_pipeline(ds, sp.train, cfg.preprocess_options())
    X_train, y_train, _ = apply_pipeline(pipe, ds, sp.train)
    X_test, y_test, test_rows = apply_pipeline(pipe, ds, sp.test)
    if len(test_rows) == 0:
        raise EmptyInput("no test rows left after preprocessing")
    created_at = resolve_created_at(cfg.created_at, ds)
    out = Path(cfg.out_dir)
    multi = len(cfg.models) > 1
    results: dict[str, ModelResult] = {}

    for kind in cfg.models:
        log.info("training %s on %d rows", kind, len(y_train))
        model = train_model(kind, cfg, X_train, y_train)
        pred = model.predict(X_test)
        report = evaluate(y_test, pred, cfg.threshold_kw)
        table = error_table(test_rows.tolist(), y_test, pred)
        target_dir = out / kind if multi else out
        emit_report(report, table, target_dir, ds.timestamps[test_rows])
        model_path = target_dir / "model.solr"
        save_model(model, pipe, model_path, model_file_config(cfg, kind, len(ds)), created_at)
        base_rmse = {}
        if kind == "stack":
            for spec, base in zip(cfg.stack_config().base_specs, model.base_models):
                base_rmse[spec.kind] = rmse(y_test, base.predict(X_test))
            _write_rows(target_dir / "base_models.csv", ["model", "rmse"],
                        [[k, repr(v)] for k, v in base_rmse.items()])
        results[kind] = ModelResult(kind, report, model_path, base_rmse)
        log.info("%s: rmse=%.3f mae=%.3f r=%.4f auc=%.4f", kind, report.rmse, report.mae,
                 report.pearson_r, report.auc)

    ranking = sorted(results.values(), key=lambda r: (r.report.rmse, cfg.models.index(r.name)))
    best = ranking[0].name
    if multi:
        _write_rows(
            out / "ranking.csv",
            ["rank", "model", "rmse", "mae", "pearson_r", "auc", "best"],
            [[i + 1, r.name, repr(r.report.rmse), repr(r.report.mae), repr(r.report.pearson_r),
              repr(r.report.auc), int(r.name == best)] for i, r in enumerate(ranking)],
        )
        (out / "model.solr").write_bytes(results[best].model_path.read_bytes())
    return ExperimentResult(results, best, out)


def _write_rows(path, header, rows) -> None:
    try:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


__all__ = [
    "DEFAULT_PARAMS", "ExperimentConfig", "ExperimentResult", "MODEL_CHOICES", "emit_report",
    "run_experiment", "scatter_svg", "train_model",
]
