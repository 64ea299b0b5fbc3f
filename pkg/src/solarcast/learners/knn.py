"""k-nearest-neighbour regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import InvalidHyperparameter
from .linear import check_predict_input, check_xy

WEIGHTINGS = ("uniform", "distance")


@dataclass(frozen=True)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int = 5
    weighting: str = "uniform"

    kind = "knn"

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def predict(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features)
        return _kernels.knn_predict(self.X, self.y, X, self.k, self.weighting == "distance")

    def to_dict(self) -> dict:
        return {"X": self.X.tolist(), "y": self.y.tolist(), "k": self.k, "weighting": self.weighting}

    @classmethod
    def from_dict(cls, d: dict) -> "KnnModel":
        X = np.asarray(d["X"], dtype=np.float64).reshape(len(d["y"]), -1)
        return cls(X, np.asarray(d["y"], dtype=np.float64), int(d["k"]), d["weighting"])


def fit_knn(X, y, k: int = 5, weighting: str = "uniform") -> KnnModel:
    X, y = check_xy(X, y)
    if not 1 <= k <= X.shape[0]:
        raise InvalidHyperparameter(f"k must lie in [1, {X.shape[0]}], got {k}")
    if weighting not in WEIGHTINGS:
        raise InvalidHyperparameter(f"weighting must be one of {WEIGHTINGS}")
    return KnnModel(X.copy(), y.copy(), int(k), weighting)


def knn_predict(model: KnnModel, x) -> float:
    """Prediction for a single feature vector.

    Neighbours are ranked by Euclidean distance, ties to the lower training row.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(model.predict(x)[0])
