"""Compiled CART regression-tree kernels.

Split search is exhaustive over the sorted unique values of every candidate
feature, scoring by squared-error reduction. Features are visited in
ascending index order and thresholds in ascending order, and a candidate only
replaces the incumbent when strictly better, so ties go to the lowest feature
index and then the lowest threshold.
"""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def build_tree(X, y, sample_idx, max_depth, min_samples_leaf, mtries, feat_keys):
    """Grow one tree on rows ``sample_idx`` (duplicates allowed, for bootstraps).

    ``feat_keys`` holds one row of random keys per potential node; when
    ``mtries`` is below the feature count, a node considers the ``mtries``
    features with the smallest keys. Returns (feature, threshold, left, right,
    value, n_nodes).
    """
    n_feat = X.shape[1]
    m = sample_idx.shape[0]
    cap = 2 * m + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)

    idx = sample_idx.copy()
    st_node = np.empty(cap, dtype=np.int64)
    st_lo = np.empty(cap, dtype=np.int64)
    st_hi = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    sp = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = m
    st_depth[0] = 0
    sp = 1
    n_nodes = 1
    use_subset = mtries < n_feat
    buf_v = np.empty(m)
    buf_y = np.empty(m)

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_depth[sp]
        cnt = hi - lo

        total = 0.0
        for k in range(lo, hi):
            total += y[idx[k]]
        mean = total / cnt
        value[node] = mean
        sse = 0.0
        for k in range(lo, hi):
            d = y[idx[k]] - mean
            sse += d * d

        if depth >= max_depth or cnt < 2 * min_samples_leaf or sse <= 1e-12 * (1.0 + mean * mean) * cnt:
            continue

        if use_subset:
            order = np.argsort(feat_keys[node % feat_keys.shape[0]])
            cand = np.sort(order[:mtries])
        else:
            cand = np.arange(n_feat)

        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        base = total * total / cnt
        tie_tol = 1e-12 * sse
        for f in cand:
            for k in range(cnt):
                buf_v[k] = X[idx[lo + k], f]
            order = np.argsort(buf_v[:cnt], kind="mergesort")
            for k in range(cnt):
                buf_y[k] = y[idx[lo + order[k]]]
            s_left = 0.0
            for k in range(cnt - 1):
                s_left += buf_y[k]
                n_left = k + 1
                n_right = cnt - n_left
                if n_left < min_samples_leaf or n_right < min_samples_leaf:
                    continue
                v0 = buf_v[order[k]]
                v1 = buf_v[order[k + 1]]
                if not v0 < v1:
                    continue
                s_right = total - s_left
                gain = s_left * s_left / n_left + s_right * s_right / n_right - base
                # gains within rounding of the incumbent are ties; keep the earlier split
                if gain > best_gain + tie_tol:
                    best_gain = gain
                    best_f = f
                    best_thr = 0.5 * (v0 + v1)

        if best_f < 0 or best_gain <= 1e-12 * sse:
            continue

        # partition idx[lo:hi] in place
        i = lo
        j = hi - 1
        while i <= j:
            if X[idx[i], best_f] <= best_thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        mid = i

        feature[node] = best_f
        threshold[node] = best_thr
        l_id = n_nodes
        r_id = n_nodes + 1
        n_nodes += 2
        left[node] = l_id
        right[node] = r_id
        # push right first so the left subtree is numbered first
        st_node[sp] = r_id
        st_lo[sp] = mid
        st_hi[sp] = hi
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = l_id
        st_lo[sp] = lo
        st_hi[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes], n_nodes


@njit(cache=True)
def apply_tree(X, feature, threshold, left, right):
    """Leaf id reached by every row of X."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        node = 0
        while feature[node] != LEAF:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


@njit(cache=True)
def predict_forest(X, features, thresholds, lefts, rights, values, offsets, weights):
    """Weighted sum of per-tree predictions for trees packed back to back.

    Tree t occupies node slots offsets[t]:offsets[t+1]; child indices are local.
    """
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n)
    for t in range(n_trees):
        base = offsets[t]
        w = weights[t]
        for r in range(n):
            node = 0
            while features[base + node] != LEAF:
                if X[r, features[base + node]] <= thresholds[base + node]:
                    node = lefts[base + node]
                else:
                    node = rights[base + node]
            out[r] += w * values[base + node]
    return out
