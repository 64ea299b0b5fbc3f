"""One-hidden-layer feedforward network trained by mini-batch backprop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidHyperparameter, NonFiniteLoss
from .linear import check_predict_input, check_xy


@dataclass
class MlpParams:
    W1: np.ndarray  # (hidden, d)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float

    def copy(self) -> "MlpParams":
        return MlpParams(self.W1.copy(), self.b1.copy(), self.w2.copy(), float(self.b2))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def unflat(cls, v, hidden: int, d: int) -> "MlpParams":
        v = np.asarray(v, dtype=np.float64)
        i = hidden * d
        return cls(v[:i].reshape(hidden, d).copy(), v[i:i + hidden].copy(),
                   v[i + hidden:i + 2 * hidden].copy(), float(v[-1]))


def xavier_init(d: int, hidden: int, rng) -> MlpParams:
    lim1 = np.sqrt(6.0 / (d + hidden))
    lim2 = np.sqrt(6.0 / (hidden + 1))
    return MlpParams(
        rng.uniform(-lim1, lim1, size=(hidden, d)),
        np.zeros(hidden),
        rng.uniform(-lim2, lim2, size=hidden),
        0.0,
    )


def forward(p: MlpParams, X) -> np.ndarray:
    """Raw network output: tanh hidden layer, identity output."""
    return np.tanh(X @ p.W1.T + p.b1) @ p.w2 + p.b2


def loss_and_grad(p: MlpParams, X, t):
    """Mean squared error on (X, t) and its gradient with respect to every parameter."""
    m = X.shape[0]
    A = np.tanh(X @ p.W1.T + p.b1)
    out = A @ p.w2 + p.b2
    r = out - t
    loss = float(r @ r) / m
    g = (2.0 / m) * r
    dZ = np.outer(g, p.w2) * (1.0 - A * A)
    grad = MlpParams(dZ.T @ X, dZ.sum(axis=0), A.T @ g, float(g.sum()))
    return loss, grad


@dataclass(frozen=True)
class MlpModel:
    """Network plus the target scaling it was trained under.

    The network predicts ``(y - y_mean) / y_scale``; :meth:`predict` undoes it.
    """

    params: MlpParams
    y_mean: float
    y_scale: float
    learning_rate: float
    epochs: int
    batch_size: int
    seed: int

    kind = "mlp"

    @property
    def n_features(self) -> int:
        return self.params.W1.shape[1]

    @property
    def hidden(self) -> int:
        return self.params.W1.shape[0]

    def predict(self, X) -> np.ndarray:
        X = check_predict_input(X, self.n_features)
        return forward(self.params, X) * self.y_scale + self.y_mean

    def to_dict(self) -> dict:
        p = self.params
        return {"W1": p.W1.tolist(), "b1": p.b1.tolist(), "w2": p.w2.tolist(), "b2": p.b2,
                "y_mean": self.y_mean, "y_scale": self.y_scale, "learning_rate": self.learning_rate,
                "epochs": self.epochs, "batch_size": self.batch_size, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        a = lambda k: np.asarray(d[k], dtype=np.float64)  # noqa: E731
        W1 = a("W1").reshape(len(d["b1"]), -1)
        return cls(MlpParams(W1, a("b1"), a("w2"), float(d["b2"])), float(d["y_mean"]),
                   float(d["y_scale"]), float(d["learning_rate"]), int(d["epochs"]),
                   int(d["batch_size"]), int(d["seed"]))


def fit_mlp(X, y, hidden: int = 16, epochs: int = 200, learning_rate: float = 0.01,
            batch_size: int = 32, seed: int = 0) -> MlpModel:
    """Mini-batch SGD on MSE with Xavier-uniform init; inputs should be normalized."""
    X, y = check_xy(X, y)
    if hidden < 1 or epochs < 0 or batch_size < 1 or learning_rate <= 0:
        raise InvalidHyperparameter("need hidden >= 1, epochs >= 0, batch_size >= 1, learning_rate > 0")
    n, d = X.shape
    y_mean = float(y.mean())
    y_scale = float(y.std())
    if y_scale == 0.0:
        y_scale = 1.0
    t = (y - y_mean) / y_scale

    rng = np.random.default_rng(seed)
    p = xavier_init(d, hidden, rng)
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            b = perm[start:start + batch_size]
            loss, g = loss_and_grad(p, X[b], t[b])
            if not np.isfinite(loss):
                raise NonFiniteLoss("training loss diverged; lower the learning rate")
            p.W1 -= learning_rate * g.W1
            p.b1 -= learning_rate * g.b1
            p.w2 -= learning_rate * g.w2
            p.b2 -= learning_rate * g.b2
    if not np.all(np.isfinite(p.flat())):
        raise NonFiniteLoss("non-finite parameters after training")
    return MlpModel(p, y_mean, y_scale, float(learning_rate), int(epochs), int(batch_size), int(seed))
