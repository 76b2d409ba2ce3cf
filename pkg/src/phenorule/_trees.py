"""Numba kernels for CART tree growth and forest prediction.

Trees grow depth-first on bootstrap resamples with per-node feature
subsampling. All randomness comes from a splitmix64 stream seeded per tree,
so fits are byte-identical regardless of thread count or training order.
Split ties break toward the lowest column index, then the lowest threshold.
"""

import warnings

import numpy as np
from numba import NumbaWarning, njit, prange

# the TBB version probe is irrelevant here; numba falls back to omp/workqueue
warnings.filterwarnings("ignore", message=".*TBB.*", category=NumbaWarning)

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _next_u64(state):
    state[0] = state[0] + _SPLITMIX_GAMMA
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _rand_below(state, m):
    return np.int64(_next_u64(state) % np.uint64(m))


@njit(cache=True)
def _grow_tree(X, y, seed, mtry, max_depth, min_leaf,
               feature, threshold, left, right, npos, nneg, importance):
    """Grow one tree in place; returns the number of nodes used."""
    n = X.shape[0]
    p = X.shape[1]
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed

    idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        idx[i] = _rand_below(state, n)

    cand = np.arange(p)
    buf = np.empty(n, dtype=np.int64)
    vals = np.empty(n, dtype=np.float64)

    max_nodes = feature.shape[0]
    stack_node = np.empty(max_nodes, dtype=np.int64)
    stack_start = np.empty(max_nodes, dtype=np.int64)
    stack_end = np.empty(max_nodes, dtype=np.int64)
    stack_depth = np.empty(max_nodes, dtype=np.int64)

    n_nodes = 1
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0

    while top >= 0:
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        top -= 1

        n_node = end - start
        pos = 0
        for i in range(start, end):
            pos += y[idx[i]]
        neg = n_node - pos
        npos[node] = pos
        nneg[node] = neg
        feature[node] = -1

        if pos == 0 or neg == 0 or n_node < 2 * min_leaf or depth >= max_depth:
            continue

        # sample mtry distinct candidate columns (partial Fisher-Yates),
        # then order ascending so gain ties prefer the lowest column index
        for j in range(p):
            cand[j] = j
        m = mtry if mtry < p else p
        for j in range(m):
            r = j + _rand_below(state, p - j)
            tmp = cand[j]
            cand[j] = cand[r]
            cand[r] = tmp
        cand[:m] = np.sort(cand[:m])

        parent_metric = (pos * pos + neg * neg) / n_node
        best_gain = 0.0
        best_col = -1
        best_thr = 0.0
        for ci in range(m):
            col = cand[ci]
            for i in range(n_node):
                vals[i] = X[idx[start + i], col]
            order = np.argsort(vals[:n_node], kind="mergesort")
            lp = 0
            for i in range(n_node - 1):
                row = idx[start + order[i]]
                lp += y[row]
                nl = i + 1
                if nl < min_leaf:
                    continue
                nr = n_node - nl
                if nr < min_leaf:
                    break
                v_here = vals[order[i]]
                v_next = vals[order[i + 1]]
                if v_next <= v_here:
                    continue
                rp = pos - lp
                ln = nl - lp
                rn = nr - rp
                child_metric = (lp * lp + ln * ln) / nl + (rp * rp + rn * rn) / nr
                gain = child_metric - parent_metric
                if gain > best_gain + 1e-12:
                    best_gain = gain
                    best_col = col
                    best_thr = 0.5 * (v_here + v_next)
        if best_col < 0:
            continue

        # gain already equals n_node*g_parent - nl*g_left - nr*g_right;
        # scale by the bootstrap size so trees contribute comparably
        importance[best_col] += best_gain / n

        # stable partition by x <= thr
        nl = 0
        for i in range(start, end):
            if X[idx[i], best_col] <= best_thr:
                buf[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(start, end):
            if X[idx[i], best_col] > best_thr:
                buf[nr] = idx[i]
                nr += 1
        for i in range(n_node):
            idx[start + i] = buf[i]

        feature[node] = best_col
        threshold[node] = best_thr
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id

        top += 1
        stack_node[top] = right_id
        stack_start[top] = start + nl
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = left_id
        stack_start[top] = start
        stack_end[top] = start + nl
        stack_depth[top] = depth + 1
    return n_nodes


@njit(cache=True, parallel=True)
def grow_forest(X, y, seeds, mtry, max_depth, min_leaf,
                features, thresholds, lefts, rights, npos, nneg,
                node_counts, importances):
    for t in prange(seeds.shape[0]):
        node_counts[t] = _grow_tree(
            X, y, seeds[t], mtry, max_depth, min_leaf,
            features[t], thresholds[t], lefts[t], rights[t],
            npos[t], nneg[t], importances[t])


@njit(cache=True, parallel=True)
def predict_forest(X, features, thresholds, lefts, rights, npos, nneg, out):
    n_trees = features.shape[0]
    for i in prange(X.shape[0]):
        acc = 0.0
        for t in range(n_trees):
            node = 0
            while features[t, node] >= 0:
                if X[i, features[t, node]] <= thresholds[t, node]:
                    node = lefts[t, node]
                else:
                    node = rights[t, node]
            acc += npos[t, node] / (npos[t, node] + nneg[t, node])
        out[i] = acc / n_trees
