"""Stacked regression: out-of-fold base predictions feed a linear meta-learner."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import kfold_partition
from .errors import DimensionMismatch, InvalidConfig
from .learners import LearnerSpec, LinearModel, fit_learner, fit_linear, model_from_dict, model_to_dict
from .learners.linear import check_predict_input, check_xy

DEFAULT_BASES = ("knn", "mlp", "forest", "gbm")


def _default_bases():
    return tuple(LearnerSpec(k) for k in DEFAULT_BASES)


@dataclass(frozen=True)
class StackConfig:
    base_specs: tuple[LearnerSpec, ...] = field(default_factory=_default_bases)
    k_folds: int = 4
    include_original_features: bool = True
    seed: int = 0

    def __post_init__(self):
        specs = tuple(LearnerSpec(s) if isinstance(s, str) else s for s in self.base_specs)
        object.__setattr__(self, "base_specs", specs)
        if len(specs) < 2:
            raise InvalidConfig("stacking needs at least two base models")
        if self.k_folds < 2:
            raise InvalidConfig("k_folds must be >= 2")

    def seeded_specs(self) -> tuple[LearnerSpec, ...]:
        """Base specs with unset seeds filled from the stack seed (one per position)."""
        return tuple(s.with_seed(self.seed + i) for i, s in enumerate(self.base_specs))

    def to_dict(self) -> dict:
        return {"base_specs": [s.to_dict() for s in self.base_specs], "k_folds": self.k_folds,
                "include_original_features": self.include_original_features, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "StackConfig":
        return cls(tuple(LearnerSpec.from_dict(s) for s in d["base_specs"]), int(d["k_folds"]),
                   bool(d["include_original_features"]), int(d["seed"]))


def _fitter(spec, n_jobs):
    if callable(spec) and not isinstance(spec, LearnerSpec):
        return spec
    return lambda X, y: fit_learner(spec, X, y, n_jobs=n_jobs)


def _map(fn, items, n_jobs):
    if n_jobs == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
        return list(pool.map(fn, items))


def out_of_fold_predictions(spec, X, y, folds, n_jobs: int = 1) -> np.ndarray:
    """Prediction for every row from a model trained without that row's fold.

    ``spec`` is a :class:`LearnerSpec`, a kind name, or any callable
    ``fit(X, y) -> model`` with a ``predict`` method.
    """
    X, y = check_xy(X, y)
    n = X.shape[0]
    covered = np.sort(np.concatenate([np.asarray(f, dtype=np.int64) for f in folds]))
    if not np.array_equal(covered, np.arange(n)):
        raise InvalidConfig("folds must partition the training rows")
    fit = _fitter(LearnerSpec(spec) if isinstance(spec, str) else spec, 1)

    def one_fold(fold):
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        model = fit(X[mask], y[mask])
        return model.predict(X[fold])

    oof = np.empty(n)
    for fold, pred in zip(folds, _map(one_fold, folds, n_jobs)):
        oof[fold] = pred
    return oof


@dataclass(frozen=True)
class StackedEnsemble:
    base_models: tuple
    meta: LinearModel
    config: StackConfig

    kind = "stack"

    @property
    def n_features(self) -> int:
        return self.base_models[0].n_features

    def meta_features(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features)
        cols = [m.predict(X) for m in self.base_models]
        if self.config.include_original_features:
            return np.column_stack([*cols, X])
        return np.column_stack(cols)

    def predict(self, X) -> np.ndarray:
        return self.meta.predict(self.meta_features(X))

    def to_dict(self) -> dict:
        return {"base_models": [model_to_dict(m) for m in self.base_models],
                "meta": self.meta.to_dict(), "config": self.config.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "StackedEnsemble":
        return cls(tuple(model_from_dict(m) for m in d["base_models"]), LinearModel.from_dict(d["meta"]),
                   StackConfig.from_dict(d["config"]))


def build_meta_matrix(oof_columns, X, include_original_features: bool = True) -> np.ndarray:
    """``[OOF_1 ... OOF_B | X]`` in base order followed by feature order."""
    cols = [np.asarray(c, dtype=np.float64) for c in oof_columns]
    if include_original_features:
        return np.column_stack([*cols, X])
    return np.column_stack(cols)


def fit_stack(cfg: StackConfig, X, y, n_jobs: int = 1) -> StackedEnsemble:
    X, y = check_xy(X, y)
    n = X.shape[0]
    if n < cfg.k_folds:
        raise InvalidConfig(f"n={n} rows is fewer than k_folds={cfg.k_folds}")
    folds = kfold_partition(n, cfg.k_folds, cfg.seed)
    specs = cfg.seeded_specs()

    # every (base, fold) fit is independent; collect in a fixed order
    jobs = [(b, f) for b in range(len(specs)) for f in range(len(folds))]

    def run(job):
        b, f = job
        mask = np.ones(n, dtype=bool)
        mask[folds[f]] = False
        model = fit_learner(specs[b], X[mask], y[mask])
        return model.predict(X[folds[f]])

    preds = _map(run, jobs, n_jobs)
    oof = np.empty((len(specs), n))
    for (b, f), p in zip(jobs, preds):
        oof[b, folds[f]] = p

    meta = fit_linear(build_meta_matrix(oof, X, cfg.include_original_features), y, 0.0)
    bases = tuple(_map(lambda s: fit_learner(s, X, y), specs, n_jobs))
    return StackedEnsemble(bases, meta, cfg)


def predict_stack(e: StackedEnsemble, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != e.n_features:
        raise DimensionMismatch(f"ensemble expects {e.n_features} features, got shape {X.shape}")
    return e.predict(X)
