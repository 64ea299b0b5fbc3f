"""Train-split preprocessing: impute, fence outliers, normalize, select.

Everything is learned by :func:`fit_pipeline` from the training rows and frozen
in a :class:`FittedPipeline`; :func:`apply_pipeline` only reads those stored
statistics, so test rows never influence each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import FeatureSchema, LabeledDataset
from .errors import (
    AllMissingFeature,
    EmptyInput,
    InvalidConfig,
    LengthMismatch,
    SchemaMismatch,
    TooShort,
    TopMExceedsFeatureCount,
)

POLICIES = ("drop", "clip")
NORMS = ("minmax", "zscore")


def quantile(values, q: float) -> float:
    """Quantile of pre-sorted ``values`` by linear interpolation at ``q*(n-1)``."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise EmptyInput("quantile of empty sequence")
    if not 0.0 <= q <= 1.0:
        raise InvalidConfig(f"q must lie in [0, 1], got {q}")
    pos = q * (v.size - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, v.size - 1)
    frac = pos - lo
    if frac == 0.0:
        return float(v[lo])
    return float(v[lo] + frac * (v[hi] - v[lo]))


def pearson_r(x, y) -> float:
    """Sample Pearson correlation, defined as 0 when either side is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths differ: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise TooShort("pearson_r needs at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class OutlierFences:
    lower: np.ndarray  # per feature
    upper: np.ndarray
    target_lower: float
    target_upper: float
    policy: str = "drop"


@dataclass(frozen=True)
class NormalizationParams:
    """minmax stores (min, max) in (a, b); zscore stores (mean, std)."""

    method: str
    a: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class FeatureSelection:
    scores: np.ndarray
    kept: tuple[int, ...]


@dataclass(frozen=True)
class PreprocessOptions:
    policy: str = "drop"
    norm: str = "minmax"
    top_m: int | None = None
    fence_k: float = 1.5

    def validate(self) -> None:
        if self.policy not in POLICIES:
            raise InvalidConfig(f"policy must be one of {POLICIES}")
        if self.norm not in NORMS:
            raise InvalidConfig(f"norm must be one of {NORMS}")
        if self.fence_k < 0:
            raise InvalidConfig("fence_k must be >= 0")


@dataclass(frozen=True)
class FittedPipeline:
    schema: FeatureSchema
    impute: np.ndarray
    fences: OutlierFences
    norm: NormalizationParams
    select: FeatureSelection
    fitted_on: int

    @property
    def n_features_out(self) -> int:
        return len(self.select.kept)

    @property
    def output_names(self) -> list[str]:
        return [self.schema.names[i] for i in self.select.kept]

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "impute": self.impute.tolist(),
            "fences": {
                "lower": self.fences.lower.tolist(),
                "upper": self.fences.upper.tolist(),
                "target_lower": self.fences.target_lower,
                "target_upper": self.fences.target_upper,
                "policy": self.fences.policy,
            },
            "norm": {"method": self.norm.method, "a": self.norm.a.tolist(), "b": self.norm.b.tolist()},
            "select": {"scores": self.select.scores.tolist(), "kept": list(self.select.kept)},
            "fitted_on": self.fitted_on,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedPipeline":
        f, nm, sel = d["fences"], d["norm"], d["select"]
        arr = lambda v: np.asarray(v, dtype=np.float64)  # noqa: E731
        return cls(
            schema=FeatureSchema.from_dict(d["schema"]),
            impute=arr(d["impute"]),
            fences=OutlierFences(arr(f["lower"]), arr(f["upper"]), float(f["target_lower"]),
                                 float(f["target_upper"]), f["policy"]),
            norm=NormalizationParams(nm["method"], arr(nm["a"]), arr(nm["b"])),
            select=FeatureSelection(arr(sel["scores"]), tuple(int(i) for i in sel["kept"])),
            fitted_on=int(d["fitted_on"]),
        )


def tukey_fences(column, k: float = 1.5) -> tuple[float, float]:
    v = np.sort(np.asarray(column, dtype=np.float64))
    q1 = quantile(v, 0.25)
    q3 = quantile(v, 0.75)
    iqr = q3 - q1
    return q1 - k * iqr, q3 + k * iqr


def select_features(scores, top_m: int | None = None) -> FeatureSelection:
    """Rank features by |score| descending, ties to the lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    d = scores.size
    if top_m is None:
        top_m = d
    if top_m < 1:
        raise InvalidConfig("top_m must be >= 1")
    if top_m > d:
        raise TopMExceedsFeatureCount(f"top_m={top_m} > {d} features")
    order = sorted(range(d), key=lambda i: (-abs(scores[i]), i))
    return FeatureSelection(scores, tuple(order[:top_m]))


def _impute(X: np.ndarray, fill: np.ndarray) -> np.ndarray:
    return np.where(np.isnan(X), fill, X)


def _fence_mask(X, y, fences: OutlierFences) -> np.ndarray:
    inside = np.all((X >= fences.lower) & (X <= fences.upper), axis=1)
    has_y = ~np.isnan(y)
    y_inside = (y >= fences.target_lower) & (y <= fences.target_upper)
    return inside & (~has_y | y_inside)


def _normalize(X: np.ndarray, p: NormalizationParams) -> np.ndarray:
    span = p.b - p.a if p.method == "minmax" else p.b
    safe = np.where(span > 0, span, 1.0)
    out = (X - p.a) / safe
    return np.where(span > 0, out, 0.0)


def denormalize(Z, p: NormalizationParams) -> np.ndarray:
    """Inverse of the normalization for non-degenerate columns."""
    Z = np.asarray(Z, dtype=np.float64)
    span = p.b - p.a if p.method == "minmax" else p.b
    return Z * span + p.a


def fit_pipeline(ds: LabeledDataset, train, options: PreprocessOptions | None = None) -> FittedPipeline:
    options = options or PreprocessOptions()
    options.validate()
    train = np.asarray(train, dtype=np.int64)
    if train.size == 0:
        raise EmptyInput("no training rows")
    X = ds.features[train]
    y = ds.target[train]
    if np.any(np.isnan(y)):
        raise EmptyInput("training rows need targets")

    observed = ~np.isnan(X)
    counts = observed.sum(axis=0)
    for j in np.flatnonzero(counts == 0):
        raise AllMissingFeature(f"feature {ds.schema.names[j]!r} has no training values")
    fill = np.array([X[observed[:, j], j].mean() for j in range(X.shape[1])])
    X = _impute(X, fill)

    bounds = [tukey_fences(X[:, j], options.fence_k) for j in range(X.shape[1])]
    t_lo, t_hi = tukey_fences(y, options.fence_k)
    fences = OutlierFences(
        np.array([b[0] for b in bounds]), np.array([b[1] for b in bounds]), t_lo, t_hi, options.policy
    )
    X, y = _apply_fences(X, y, fences)[:2]
    if len(y) == 0:
        raise EmptyInput("every training row fell outside the outlier fences")

    if options.norm == "minmax":
        norm = NormalizationParams("minmax", X.min(axis=0), X.max(axis=0))
    else:
        norm = NormalizationParams("zscore", X.mean(axis=0), X.std(axis=0))
    Z = _normalize(X, norm)

    if len(y) >= 2:
        scores = np.array([abs(pearson_r(Z[:, j], y)) for j in range(Z.shape[1])])
    else:
        scores = np.zeros(Z.shape[1])
    select = select_features(scores, options.top_m)
    return FittedPipeline(ds.schema, fill, fences, norm, select, int(train.size))


def _apply_fences(X, y, fences: OutlierFences):
    if fences.policy == "drop":
        keep = _fence_mask(X, y, fences)
        return X[keep], y[keep], keep
    X = np.clip(X, fences.lower, fences.upper)
    y = np.where(np.isnan(y), y, np.clip(y, fences.target_lower, fences.target_upper))
    return X, y, np.ones(len(y), dtype=bool)


def apply_pipeline(p: FittedPipeline, ds: LabeledDataset, rows=None, policy: str | None = None):
    """Transform ``rows`` of ``ds`` with the frozen statistics in ``p``.

    Returns ``(matrix, target, kept_rows)`` where ``kept_rows`` are the dataset
    row indices that survived fencing. ``policy`` overrides the stored fence
    policy (batch prediction uses ``"clip"`` so every input row is scored).
    """
    if ds.schema.names != p.schema.names:
        raise SchemaMismatch(f"dataset features {ds.schema.names} != fitted {p.schema.names}")
    rows = np.arange(len(ds)) if rows is None else np.asarray(rows, dtype=np.int64)
    X = _impute(ds.features[rows], p.impute)
    y = ds.target[rows]
    fences = p.fences
    if policy is not None and policy != fences.policy:
        if policy not in POLICIES:
            raise InvalidConfig(f"policy must be one of {POLICIES}")
        fences = OutlierFences(fences.lower, fences.upper, fences.target_lower, fences.target_upper, policy)
    X, y, keep = _apply_fences(X, y, fences)
    Z = _normalize(X, p.norm)
    return Z[:, list(p.select.kept)], y, rows[keep]
