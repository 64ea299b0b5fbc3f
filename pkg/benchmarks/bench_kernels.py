"""Compiled vs numpy kernels: split search, nearest neighbours, and the fits built on them.

    python benchmarks/bench_kernels.py            # kernel and learner timings
    python benchmarks/bench_kernels.py --full     # also the default stacked experiment

Each case checks that both backends return identical output before timing.
"""

import argparse
import tempfile
import time
from contextlib import contextmanager

import numpy as np

from solarcast import _kernels
from solarcast.experiment import ExperimentConfig, run_experiment
from solarcast.learners import fit_forest, fit_knn, fit_tree


@contextmanager
def backend(name):
    impl = _kernels.compiled if name == "cython" else _kernels.python
    saved = _kernels.best_split_sorted, _kernels.knn_predict
    _kernels.best_split_sorted, _kernels.knn_predict = impl.best_split_sorted, impl.knn_predict
    try:
        yield
    finally:
        _kernels.best_split_sorted, _kernels.knn_predict = saved


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b):
    if isinstance(a, np.ndarray):
        return a.tobytes() == b.tobytes()
    if hasattr(a, "to_dict"):
        return a.to_dict() == b.to_dict()
    return a == b


def cases(n, rng):
    X = rng.uniform(size=(n, 4))
    y = 900 * X[:, 3] * (1 - 0.3 * X[:, 0]) + rng.normal(size=n)
    order = np.argsort(X[:, 3], kind="stable")
    xs, ys = X[order, 3], y[order]
    Q = rng.uniform(size=(n // 4, 4))
    knn = fit_knn(X, y, k=5)
    return [
        ("best_split_sorted", lambda: _kernels.best_split_sorted(xs, ys, 2), 20),
        ("knn_predict", lambda: knn.predict(Q), 3),
        ("fit_tree depth 6", lambda: fit_tree(X, y), 3),
        ("fit_forest 20 trees", lambda: fit_forest(X, y, n_trees=20, seed=0), 1),
    ]


def run_full(name, seed):
    with backend(name), tempfile.TemporaryDirectory() as tmp:
        cfg = ExperimentConfig(seed=seed, synth={}, models=["stack"], out_dir=tmp)
        t0 = time.perf_counter()
        res = run_experiment(cfg)
        return time.perf_counter() - t0, res.report.rmse


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=8000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--full", action="store_true", help="time the default stacked experiment too")
    args = ap.parse_args(argv)

    if _kernels.compiled is None:
        raise SystemExit("compiled kernels are not built; install without SOLARCAST_NO_EXT")

    print(f"{'case':<22}{'cython s':>12}{'python s':>12}{'speedup':>10}  identical")
    for label, fn, repeat in cases(args.rows, np.random.default_rng(args.seed)):
        with backend("cython"):
            tc, oc = best_of(fn, repeat)
        with backend("python"):
            tp, op = best_of(fn, repeat)
        print(f"{label:<22}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x  {same(oc, op)}")

    if args.full:
        tc, rc = run_full("cython", 42)
        tp, rp = run_full("python", 42)
        print(f"{'stack experiment':<22}{tc:>12.2f}{tp:>12.2f}{tp / tc:>9.1f}x  {rc == rp}")


if __name__ == "__main__":
    main()
