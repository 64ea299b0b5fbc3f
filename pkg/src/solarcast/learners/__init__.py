"""From-scratch regressors behind one fit/predict contract.

Every fitted model exposes ``kind``, ``n_features``, ``predict(X)``,
``to_dict()`` and ``from_dict()``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidHyperparameter
from .knn import KnnModel, fit_knn, knn_predict
from .linear import LinearModel, fit_linear
from .mlp import MlpModel, fit_mlp
from .svr import SvrModel, fit_svr
from .trees import ForestModel, GbmModel, Tree, best_split, fit_forest, fit_gbm, fit_tree

DEFAULT_PARAMS: dict[str, dict] = {
    "linreg": {"ridge_lambda": 0.0},
    "tree": {"max_depth": 6, "min_samples_leaf": 2, "min_improvement": 1e-9},
    "forest": {"n_trees": 100, "max_depth": 6, "feature_subsample": None, "bootstrap": True,
               "seed": 0, "min_samples_leaf": 2, "min_improvement": 1e-9},
    "gbm": {"rounds": 100, "learning_rate": 0.1, "max_depth": 3, "seed": 0,
            "min_samples_leaf": 2, "min_improvement": 1e-9},
    "knn": {"k": 5, "weighting": "uniform"},
    "mlp": {"hidden": 16, "epochs": 200, "learning_rate": 0.01, "batch_size": 32, "seed": 0},
    "svr": {"epsilon": 0.1, "C": 1.0, "steps": 20000, "step_size": 0.1, "seed": 0},
}

FIT_FUNCTIONS = {
    "linreg": fit_linear,
    "tree": fit_tree,
    "forest": fit_forest,
    "gbm": fit_gbm,
    "knn": fit_knn,
    "mlp": fit_mlp,
    "svr": fit_svr,
}

MODEL_TYPES = {
    "linreg": LinearModel,
    "tree": Tree,
    "forest": ForestModel,
    "gbm": GbmModel,
    "knn": KnnModel,
    "mlp": MlpModel,
    "svr": SvrModel,
}

LEARNER_KINDS = tuple(FIT_FUNCTIONS)
SEEDED_KINDS = frozenset(k for k, p in DEFAULT_PARAMS.items() if "seed" in p)


@dataclass(frozen=True)
class LearnerSpec:
    """A learner kind plus hyperparameter overrides on top of the defaults."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIT_FUNCTIONS:
            raise InvalidHyperparameter(f"unknown learner {self.kind!r}; choose from {LEARNER_KINDS}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise InvalidHyperparameter(f"{self.kind}: unknown hyperparameters {sorted(unknown)}")

    def resolved(self) -> dict:
        return {**DEFAULT_PARAMS[self.kind], **self.params}

    def with_seed(self, seed: int) -> "LearnerSpec":
        if self.kind not in SEEDED_KINDS or "seed" in self.params:
            return self
        return LearnerSpec(self.kind, {**self.params, "seed": seed})

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerSpec":
        return cls(d["kind"], dict(d.get("params", {})))


def fit_learner(spec: LearnerSpec | str, X, y, n_jobs: int = 1):
    """Fit ``spec`` on (X, y); ``n_jobs`` only affects learners that parallelize (forest)."""
    if isinstance(spec, str):
        spec = LearnerSpec(spec)
    params = spec.resolved()
    if spec.kind == "forest":
        params["n_jobs"] = n_jobs
    return FIT_FUNCTIONS[spec.kind](X, y, **params)


def predict(model, X) -> np.ndarray:
    """Row-wise predictions of any fitted model; raises DimensionMismatch on width errors."""
    return model.predict(X)


def model_to_dict(model) -> dict:
    return {"kind": model.kind, "state": model.to_dict()}


def model_from_dict(d: dict):
    kind = d["kind"]
    if kind not in MODEL_TYPES:
        raise KeyError(kind)
    return MODEL_TYPES[kind].from_dict(d["state"])


__all__ = [
    "DEFAULT_PARAMS", "LEARNER_KINDS", "LearnerSpec", "fit_learner", "predict",
    "model_to_dict", "model_from_dict",
    "LinearModel", "Tree", "ForestModel", "GbmModel", "KnnModel", "MlpModel", "SvrModel",
    "fit_linear", "fit_tree", "fit_forest", "fit_gbm", "fit_knn", "fit_mlp", "fit_svr",
    "best_split", "knn_predict",
]
