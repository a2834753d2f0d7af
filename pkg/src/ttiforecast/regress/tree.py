"""CART regression tree grown greedily by variance reduction.

Thresholds are midpoints between consecutive distinct values; rows with
``x <= threshold`` go left. Among equally good splits the lowest feature
index, then the lowest threshold, wins. Nodes are stored in flat arrays in
breadth-first order; ``feature == -1`` marks a leaf. Every node keeps the
mean of its training targets, so a tree can be cut to a smaller depth
without refitting.
"""

import numpy as np
from numba import njit

# relative slack under which two split scores count as tied
_TIE = 1e-12


@njit(cache=True)
def _grow(XT, y, order, max_depth, min_leaf):
    """Level-by-level growth.

    Each level is searched feature-major (for every feature, all open nodes of
    the level), so one feature row stays in cache while all nodes use it.
    Scanning features in ascending order with strict improvement keeps the
    lowest-feature, lowest-threshold tie rule.
    """
    p, n = XT.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)
    depth = np.zeros(cap, dtype=np.int64)
    start = np.zeros(cap, dtype=np.int64)
    stop = np.zeros(cap, dtype=np.int64)
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=order.dtype)
    inv = np.zeros(n + 1)
    inv[1:] = 1.0 / np.arange(1, n + 1)
    lo = max(min_leaf, 1)

    stop[0] = n
    n_nodes = 1
    level_start = 0
    while level_start < n_nodes:
        level_stop = n_nodes
        # node statistics and the list of nodes worth searching
        open_nodes = np.empty(level_stop - level_start, dtype=np.int64)
        totals = np.zeros(level_stop - level_start)
        bases = np.zeros(level_stop - level_start)
        spreads = np.zeros(level_stop - level_start)
        n_open = 0
        for node in range(level_start, level_stop):
            s = start[node]
            e = stop[node]
            m = e - s
            total = 0.0
            total_sq = 0.0
            for k in range(s, e):
                yk = y[order[0, k]]
                total += yk
                total_sq += yk * yk
            value[node] = total / m
            count[node] = m
            if depth[node] >= max_depth or m < 2 * min_leaf:
                continue
            base = total * total / m
            if total_sq - base <= 1e-12 * max(total_sq, 1e-300):
                continue
            open_nodes[n_open] = node
            totals[n_open] = total
            bases[n_open] = base
            spreads[n_open] = total_sq - base
            n_open += 1
        if n_open == 0:
            break

        best_score = np.full(n_open, -np.inf)
        best_f = np.full(n_open, -1, dtype=np.int64)
        best_thr = np.zeros(n_open)
        for f in range(p):
            xf = XT[f]
            of = order[f]
            for q in range(n_open):
                node = open_nodes[q]
                s = start[node]
                m = stop[node] - s
                hi = m - min_leaf
                total = totals[q]
                bs = best_score[q]
                bf = best_f[q]
                ls = 0.0
                for k in range(lo - 1):
                    ls += y[of[s + k]]
                v = xf[of[s + lo - 1]]
                for ml in range(lo, hi + 1):
                    ls += y[of[s + ml - 1]]
                    vn = xf[of[s + ml]]
                    if vn > v:
                        rs = total - ls
                        score = ls * ls * inv[ml] + rs * rs * inv[m - ml]
                        if bf < 0 or score > bs + _TIE * abs(bs):
                            bs = score
                            bf = f
                            best_thr[q] = 0.5 * (v + vn)
                    v = vn
                best_score[q] = bs
                best_f[q] = bf

        # decide splits and route rows
        n_split = 0
        split_nodes = np.empty(n_open, dtype=np.int64)
        for q in range(n_open):
            node = open_nodes[q]
            if best_f[q] < 0 or best_score[q] - bases[q] <= _TIE * max(abs(bases[q]), spreads[q]):
                continue
            bf = best_f[q]
            thr = best_thr[q]
            s = start[node]
            e = stop[node]
            n_left = 0
            for k in range(s, e):
                r = order[0, k]
                goes_left[r] = XT[bf, r] <= thr
                if goes_left[r]:
                    n_left += 1
            feature[node] = bf
            threshold[node] = thr
            start[n_nodes] = s
            stop[n_nodes] = s + n_left
            start[n_nodes + 1] = s + n_left
            stop[n_nodes + 1] = e
            depth[n_nodes] = depth[node] + 1
            depth[n_nodes + 1] = depth[node] + 1
            left[node] = n_nodes
            right[node] = n_nodes + 1
            n_nodes += 2
            split_nodes[n_split] = node
            n_split += 1

        # children at the depth limit are never searched: only row 0 of the
        # order (used for their means) needs partitioning
        last = depth[level_start] + 1 >= max_depth
        n_rows = 1 if last else p
        for f in range(n_rows):
            for q in range(n_split):
                node = split_nodes[q]
                s = start[node]
                e = stop[node]
                a = s
                b = 0
                for k in range(s, e):
                    r = order[f, k]
                    if goes_left[r]:
                        order[f, a] = r
                        a += 1
                    else:
                        buf[b] = r
                        b += 1
                for k in range(b):
                    order[f, a + k] = buf[k]
        level_start = level_stop

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], count[:n_nodes], depth[:n_nodes])


def presort(X):
    """Per-feature row order, shape ``(p, n)``; reusable across fits on the same rows."""
    XT = np.ascontiguousarray(np.asarray(X, dtype=float).T)
    return np.argsort(XT, axis=1).astype(np.int64)


def fit_tree(X, y, max_depth, min_leaf=1, order=None):
    """Grow a tree; returns a dict of node arrays.

    ``order`` may carry a :func:`presort` result; it is copied, not modified.
    """
    if int(max_depth) != max_depth or max_depth < 1:
        raise ValueError(f"max_depth must be an integer >= 1, got {max_depth!r}")
    if int(min_leaf) != min_leaf or min_leaf < 1:
        raise ValueError(f"min_leaf must be an integer >= 1, got {min_leaf!r}")
    XT = np.ascontiguousarray(np.asarray(X, dtype=float).T)
    y = np.ascontiguousarray(y, dtype=float)
    if order is None:
        order = np.argsort(XT, axis=1).astype(np.int64)
    else:
        order = np.array(order, dtype=np.int64)
    keys = ("feature", "threshold", "left", "right", "value", "count", "depth")
    return dict(zip(keys, _grow(XT, y, order, int(max_depth), int(min_leaf))))


@njit(cache=True)
def _descend(feature, threshold, left, right, value, depth, X, max_depth):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0 and depth[node] < max_depth:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def predict_tree(nodes, X, max_depth=None):
    """Leaf means for rows of ``X``; ``max_depth`` cuts the tree shallower."""
    limit = np.iinfo(np.int64).max if max_depth is None else int(max_depth)
    return _descend(nodes["feature"], nodes["threshold"], nodes["left"], nodes["right"],
                    nodes["value"], nodes["depth"], np.ascontiguousarray(X, dtype=float), limit)


def truncate(nodes, max_depth):
    """Node arrays of the same tree cut at ``max_depth`` (renumbered breadth-first)."""
    keep = nodes["depth"] <= max_depth
    new_index = np.cumsum(keep) - 1
    out = {k: np.asarray(v)[keep].copy() for k, v in nodes.items()}
    at_limit = out["depth"] >= max_depth
    out["feature"][at_limit] = -1
    out["threshold"][at_limit] = 0.0
    internal = out["feature"] >= 0
    out["left"] = np.where(internal, new_index[np.maximum(out["left"], 0)], -1)
    out["right"] = np.where(internal, new_index[np.maximum(out["right"], 0)], -1)
    return out


def leaf_sse(nodes, X, y):
    r = np.asarray(y) - predict_tree(nodes, X)
    return float(r @ r)
