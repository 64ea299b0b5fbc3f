"""Linear epsilon-insensitive support vector regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidHyperparameter
from .linear import check_predict_input, check_xy


@dataclass(frozen=True)
class SvrModel:
    weights: np.ndarray
    intercept: float
    epsilon: float
    C: float
    steps: int
    step_size: float
    seed: int

    kind = "svr"

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def predict(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features)
        return X @ self.weights + self.intercept

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "intercept": self.intercept, "epsilon": self.epsilon,
                "C": self.C, "steps": self.steps, "step_size": self.step_size, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        return cls(np.asarray(d["weights"], dtype=np.float64), float(d["intercept"]),
                   float(d["epsilon"]), float(d["C"]), int(d["steps"]), float(d["step_size"]),
                   int(d["seed"]))


def svr_objective(w, b, X, y, epsilon: float, C: float) -> float:
    """0.5 ||w||^2 + C * sum(max(0, |y - Xw - b| - epsilon))."""
    r = np.abs(y - X @ w - b)
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, r - epsilon).sum())


def svr_subgradient(w, b, x, y, epsilon: float, reg: float):
    """Subgradient of ``reg/2 ||w||^2 + max(0, |y - w.x - b| - epsilon)`` at one sample."""
    r = y - (x @ w + b)
    gw = reg * w
    if abs(r) <= epsilon:
        return gw, 0.0
    s = 1.0 if r > 0 else -1.0
    return gw - s * x, -s


def fit_svr(X, y, epsilon: float = 0.1, C: float = 1.0, steps: int = 20000, step_size: float = 0.1,
            seed: int = 0) -> SvrModel:
    """Stochastic subgradient descent on the per-sample form of the SVR objective.

    Dividing the objective by ``C*n`` gives ``1/(2Cn) ||w||^2 + mean hinge``;
    steps are ``step_size/sqrt(t)`` and the returned parameters average the
    second half of the iterates. Targets are rescaled by their standard
    deviation during training (epsilon with them) and mapped back afterwards.
    """
    X, y = check_xy(X, y)
    if epsilon < 0:
        raise InvalidHyperparameter("epsilon must be >= 0")
    if C <= 0:
        raise InvalidHyperparameter("C must be > 0")
    if steps < 1 or step_size <= 0:
        raise InvalidHyperparameter("need steps >= 1 and step_size > 0")
    n, d = X.shape
    scale = float(y.std())
    if scale == 0.0:
        scale = 1.0
    ys = y / scale
    eps = epsilon / scale
    reg = 1.0 / (C * n)

    rng = np.random.default_rng(seed)
    picks = rng.integers(0, n, size=steps)
    w = np.zeros(d)
    b = 0.0
    w_sum = np.zeros(d)
    b_sum = 0.0
    burn_in = steps // 2
    for t in range(1, steps + 1):
        i = picks[t - 1]
        gw, gb = svr_subgradient(w, b, X[i], ys[i], eps, reg)
        eta = step_size / np.sqrt(t)
        w = w - eta * gw
        b = b - eta * gb
        if t > burn_in:
            w_sum += w
            b_sum += b
    count = steps - burn_in
    return SvrModel(w_sum / count * scale, float(b_sum / count * scale), float(epsilon), float(C),
                    int(steps), float(step_size), int(seed))
