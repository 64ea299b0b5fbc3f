"""Pure numpy kernels; reference semantics for the compiled versions.

Both backends perform the same floating-point operations in the same order,
so they return bit-identical results.
"""

import numpy as np

_CHUNK = 256
# gains this close (relative to the node SSE) to the best count as ties
TIE_RTOL = 1e-10


def best_split_sorted(x, y, min_leaf):
    """Best midpoint split of a column already sorted by ``x``.

    Returns ``(threshold, gain)`` where gain is the SSE reduction, or
    ``(nan, -inf)`` when no admissible split exists. Gains within
    ``TIE_RTOL * node_sse`` of the maximum are ties and the lowest
    threshold among them wins.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = x.shape[0]
    min_leaf = max(int(min_leaf), 1)
    if n < 2 * min_leaf:
        return np.nan, -np.inf
    mean = np.cumsum(y)[-1] / n
    c = y - mean
    cs = np.cumsum(c)
    total = cs[-1]
    node_sse = np.cumsum(c * c)[-1]
    pos = np.arange(min_leaf - 1, n - min_leaf)
    valid = x[pos] < x[pos + 1]
    if not valid.any():
        return np.nan, -np.inf
    pos = pos[valid]
    sl = cs[pos]
    sr = total - sl
    nl = (pos + 1).astype(np.float64)
    nr = n - nl
    gain = sl * sl / nl + sr * sr / nr - total * total / n
    best = int(np.argmax(gain >= gain.max() - TIE_RTOL * node_sse))
    i = pos[best]
    thr = 0.5 * (x[i] + x[i + 1])
    if thr >= x[i + 1]:
        thr = x[i]
    return float(thr), float(gain[best])


def knn_predict(X_train, y_train, X_query, k, weighted):
    X_train = np.ascontiguousarray(X_train, dtype=np.float64)
    y_train = np.ascontiguousarray(y_train, dtype=np.float64)
    X_query = np.ascontiguousarray(X_query, dtype=np.float64)
    m, d = X_query.shape
    out = np.empty(m)
    for start in range(0, m, _CHUNK):
        Q = X_query[start:start + _CHUNK]
        d2 = np.zeros((Q.shape[0], X_train.shape[0]))
        for j in range(d):
            diff = Q[:, j, None] - X_train[None, :, j]
            d2 += diff * diff
        idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
        nd2 = np.take_along_axis(d2, idx, axis=1)
        ny = y_train[idx]
        if not weighted:
            acc = np.zeros(Q.shape[0])
            for j in range(k):
                acc += ny[:, j]
            out[start:start + Q.shape[0]] = acc / k
            continue
        exact = nd2 == 0.0
        has_exact = exact.any(axis=1)
        with np.errstate(divide="ignore"):
            w = 1.0 / np.sqrt(nd2)
        w = np.where(has_exact[:, None], exact.astype(np.float64), w)
        num = np.zeros(Q.shape[0])
        den = np.zeros(Q.shape[0])
        for j in range(k):
            num += w[:, j] * ny[:, j]
            den += w[:, j]
        out[start:start + Q.shape[0]] = num / den
    return out
