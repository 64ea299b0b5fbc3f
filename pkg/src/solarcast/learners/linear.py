"""Least-squares linear regression with optional ridge penalty."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, NonFiniteInput

SINGULAR_FALLBACK_LAMBDA = 1e-8


def check_xy(X, y=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("feature matrix contains NaN or inf")
    if y is None:
        return X
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("targets contain NaN or inf")
    if X.shape[0] == 0:
        raise NonFiniteInput("cannot fit on zero rows")
    return X, y


def check_predict_input(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size == n_features else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise DimensionMismatch(f"model expects {n_features} features, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float
    ridge_lambda: float = 0.0

    kind = "linreg"

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def predict(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features)
        return X @ self.weights + self.intercept

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "intercept": self.intercept,
                "ridge_lambda": self.ridge_lambda}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.asarray(d["weights"], dtype=np.float64), float(d["intercept"]),
                   float(d["ridge_lambda"]))


def fit_linear(X, y, ridge_lambda: float = 0.0) -> LinearModel:
    """Minimize ||y - Xw - b||^2 + lambda ||w||^2 with an unpenalized intercept.

    Solved through the normal equations of the centered system. A singular
    system with ``ridge_lambda == 0`` is retried with lambda = 1e-8.
    """
    X, y = check_xy(X, y)
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be >= 0")
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean
    gram = Xc.T @ Xc
    rhs = Xc.T @ yc
    d = X.shape[1]
    lam = float(ridge_lambda)
    if lam == 0.0 and np.linalg.matrix_rank(gram) < d:
        lam = SINGULAR_FALLBACK_LAMBDA
    try:
        w = np.linalg.solve(gram + lam * np.eye(d), rhs)
    except np.linalg.LinAlgError:
        lam = max(lam, SINGULAR_FALLBACK_LAMBDA)
        w = np.linalg.solve(gram + lam * np.eye(d), rhs)
    if not np.all(np.isfinite(w)):
        raise NonFiniteInput("least-squares solution is not finite")
    return LinearModel(w, float(y_mean - x_mean @ w), lam)
