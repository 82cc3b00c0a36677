"""Compiled CART kernels.

One builder serves regression (variance reduction), classification (Gini on
one-hot targets) and multi-output residual fitting: with targets ``Y`` of
shape (n, k) the split gain is

    sum_k SL_k^2 / WL + sum_k SR_k^2 / WR - sum_k S_k^2 / W

which equals the weighted SSE reduction for real targets and the weighted
Gini reduction for one-hot targets.

Trees are grown level by level over presorted feature orders, so each level
costs O(n * p * k).  Ties in gain keep the lowest feature index and then the
lowest threshold.
"""

import numpy as np
from numba import njit

_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True)
def _splitmix(state):
    z = state + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _choose_features(p, m, state):
    perm = np.arange(p)
    for j in range(m):
        state = _splitmix(state + np.uint64(j))
        span = np.uint64(p - j)
        k = j + np.int64(state % span)
        tmp = perm[j]
        perm[j] = perm[k]
        perm[k] = tmp
    allowed = np.zeros(p, dtype=np.bool_)
    for j in range(m):
        allowed[perm[j]] = True
    return allowed, state


@njit(cache=True)
def build_tree(X, order, Y, w, max_depth, min_samples_split, min_samples_leaf,
               max_features, seed):
    """Grow one tree.

    Returns (feature, threshold, left, right, value, leaf_of_row, work) where
    ``feature == -1`` marks leaves, ``leaf_of_row`` is the leaf of every
    training row (-1 for zero-weight rows) and ``work`` counts scanned
    (row, feature) pairs.
    """
    n, p = X.shape
    k = Y.shape[1]
    n_active = 0
    for i in range(n):
        if w[i] > 0:
            n_active += 1
    max_nodes = 2 * n_active + 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    node_w = np.zeros(max_nodes)
    node_s = np.zeros((max_nodes, k))
    node_q = np.zeros(max_nodes)
    node_of = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if w[i] > 0:
            node_of[i] = 0
            node_w[0] += w[i]
            for c in range(k):
                node_s[0, c] += w[i] * Y[i, c]
                node_q[0] += w[i] * Y[i, c] * Y[i, c]
    n_nodes = 1
    frontier = np.zeros(1, dtype=np.int64)
    slot_of = np.full(max_nodes, -1, dtype=np.int64)
    state = np.uint64(seed)
    mf = max_features if 0 < max_features < p else p
    depth = 0
    work = 0
    while frontier.shape[0] > 0 and (max_depth < 0 or depth < max_depth):
        nf = frontier.shape[0]
        splittable = np.zeros(nf, dtype=np.bool_)
        parent = np.zeros(nf)
        best_gain = np.zeros(nf)
        best_f = np.full(nf, -1, dtype=np.int64)
        best_thr = np.zeros(nf)
        allowed = np.ones((nf, p), dtype=np.bool_)
        any_split = False
        for s in range(nf):
            nd = frontier[s]
            slot_of[nd] = s
            W = node_w[nd]
            if W >= min_samples_split and W >= 2 * min_samples_leaf:
                splittable[s] = True
                any_split = True
            sc = 0.0
            for c in range(k):
                sc += node_s[nd, c] * node_s[nd, c]
            parent[s] = sc / W
            best_gain[s] = 1e-11 * node_q[nd] + 1e-300
            if mf < p:
                row, state = _choose_features(p, mf, state)
                allowed[s, :] = row
        if not any_split:
            break
        WL = np.zeros(nf)
        SL = np.zeros((nf, k))
        last = np.zeros(nf)
        have = np.zeros(nf, dtype=np.bool_)
        for f in range(p):
            WL[:] = 0.0
            SL[:, :] = 0.0
            have[:] = False
            for ii in range(n):
                r = order[ii, f]
                nd = node_of[r]
                if nd < 0:
                    continue
                s = slot_of[nd]
                if s < 0 or not splittable[s] or not allowed[s, f]:
                    continue
                work += 1
                v = X[r, f]
                if have[s] and v > last[s]:
                    wl = WL[s]
                    wr = node_w[nd] - wl
                    if wl >= min_samples_leaf and wr >= min_samples_leaf:
                        gl = 0.0
                        gr = 0.0
                        for c in range(k):
                            a = SL[s, c]
                            b = node_s[nd, c] - a
                            gl += a * a
                            gr += b * b
                        g = gl / wl + gr / wr - parent[s]
                        if g > best_gain[s]:
                            best_gain[s] = g
                            best_f[s] = f
                            thr = last[s] + 0.5 * (v - last[s])
                            if thr >= v:
                                thr = last[s]
                            best_thr[s] = thr
                wr_ = w[r]
                WL[s] += wr_
                for c in range(k):
                    SL[s, c] += wr_ * Y[r, c]
                last[s] = v
                have[s] = True
        n_split = 0
        for s in range(nf):
            if best_f[s] >= 0:
                n_split += 1
        new_frontier = np.zeros(2 * n_split, dtype=np.int64)
        j = 0
        for s in range(nf):
            nd = frontier[s]
            if best_f[s] >= 0:
                feature[nd] = best_f[s]
                threshold[nd] = best_thr[s]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                new_frontier[j] = n_nodes
                new_frontier[j + 1] = n_nodes + 1
                j += 2
                n_nodes += 2
        for s in range(nf):
            slot_of[frontier[s]] = -1
        for i in range(n):
            nd = node_of[i]
            if nd < 0 or feature[nd] < 0:
                continue
            if X[i, feature[nd]] <= threshold[nd]:
                child = left[nd]
            else:
                child = right[nd]
            node_of[i] = child
            node_w[child] += w[i]
            for c in range(k):
                node_s[child, c] += w[i] * Y[i, c]
                node_q[child] += w[i] * Y[i, c] * Y[i, c]
        frontier = new_frontier
        depth += 1
    value = np.zeros((n_nodes, k))
    for nd in range(n_nodes):
        if node_w[nd] > 0:
            for c in range(k):
                value[nd, c] = node_s[nd, c] / node_w[nd]
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value, node_of, work)


@njit(cache=True)
def apply_tree(X, feature, threshold, left, right, root):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        nd = root
        while feature[nd] >= 0:
            if X[i, feature[nd]] <= threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] = nd
    return out


@njit(cache=True)
def predict_ensemble(X, feature, threshold, left, right, value, roots, weights):
    """sum_t weights[t] * value[leaf_t(x)] over the packed trees."""
    n = X.shape[0]
    k = value.shape[1]
    out = np.zeros((n, k))
    for t in range(roots.shape[0]):
        wt = weights[t]
        for i in range(n):
            nd = roots[t]
            while feature[nd] >= 0:
                if X[i, feature[nd]] <= threshold[nd]:
                    nd = left[nd]
                else:
                    nd = right[nd]
            for c in range(k):
                out[i, c] += wt * value[nd, c]
    return out
