"""Exact-greedy CART regression trees compiled with numba.

Trees are grown level by level over presorted feature columns, so one level
costs O(n_samples * n_features) regardless of how many nodes are open.
Split search visits features in ascending index and thresholds in ascending
value and only replaces the incumbent on a strictly larger gain, which makes
ties resolve to the lowest feature index, then the lowest threshold.

A grown tree is five parallel arrays (feature, threshold, left, right,
value) plus a per-node gain array used for importance. Leaves have
feature == -1.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _seed(seed):
    np.random.seed(seed)


@njit(cache=True)
def _grow(Xt, order, y, w, max_depth, min_leaf, max_features, seed, cur, nxt):
    m, n = Xt.shape
    # Each feature's presorted row list is kept partitioned into contiguous
    # per-node segments (stable, so still sorted inside a segment).
    nk = 0
    for i in range(n):
        if w[i] > 0:
            nk += 1
    for f in range(m):
        c = 0
        for r in range(n):
            i = order[f, r]
            if w[i] > 0:
                cur[f, c] = i
                c += 1

    cap = 2 * nk + 1
    if max_depth < 30:
        cap = min(cap, 2 ** (max_depth + 1) - 1)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    gain = np.zeros(cap)

    restrict = max_features < m
    if restrict:
        np.random.seed(seed)

    # integer weights (unit or bootstrap counts) make every partial weight an
    # integer, so reciprocals come from a table instead of divisions
    integral = True
    wsum = 0.0
    wy = np.zeros(n)
    for i in range(n):
        wsum += w[i]
        wy[i] = w[i] * y[i]
        if w[i] != np.floor(w[i]):
            integral = False
    inv = np.zeros(int(wsum) + 2 if integral else 1)
    for c in range(1, inv.shape[0]):
        inv[c] = 1.0 / c

    node_of = np.full(n, -1, dtype=np.int64)
    for r in range(nk):
        node_of[cur[0, r]] = 0
    active = np.zeros(1, dtype=np.int64)
    seg_lo = np.zeros(1, dtype=np.int64)
    seg_hi = np.full(1, nk, dtype=np.int64)
    n_nodes = 1
    depth = 0
    goleft = np.zeros(n, dtype=np.bool_)
    xb = np.empty(nk)
    cw = np.empty(nk)
    cs = np.empty(nk)
    gb = np.empty(nk)

    while active.shape[0] > 0:
        na = active.shape[0]
        tot_w = np.zeros(na)
        tot_s = np.zeros(na)
        tot_q = np.zeros(na)
        for k in range(na):
            for r in range(seg_lo[k], seg_hi[k]):
                i = cur[0, r]
                tot_w[k] += w[i]
                tot_s[k] += wy[i]
                tot_q[k] += wy[i] * y[i]
            value[active[k]] = tot_s[k] / tot_w[k]
        if depth >= max_depth:
            break

        open_ = np.zeros(na, dtype=np.bool_)
        any_open = False
        for k in range(na):
            sse = tot_q[k] - tot_s[k] * tot_s[k] / tot_w[k]
            if tot_w[k] >= 2 * min_leaf and sse > 1e-14 * (1.0 + tot_q[k]):
                open_[k] = True
                any_open = True
        if not any_open:
            break

        allowed = np.ones((na, m if restrict else 1), dtype=np.bool_)
        if restrict:
            for k in range(na):
                perm = np.random.permutation(m)
                for j in range(max_features, m):
                    allowed[k, perm[j]] = False

        best_gain = np.zeros(na)
        best_f = np.full(na, -1, dtype=np.int64)
        best_t = np.zeros(na)
        base = np.zeros(na)
        for k in range(na):
            base[k] = tot_s[k] * tot_s[k] / tot_w[k]
            best_gain[k] = 1e-10 * (tot_q[k] - base[k])
        # Per (feature, node): prefix sums in sorted order, then every gain in a
        # branch-free pass, then a first-maximum scan (lowest threshold wins).
        for f in range(m):
            xf = Xt[f]
            for k in range(na):
                if not open_[k] or (restrict and not allowed[k, f]):
                    continue
                lo = seg_lo[k]
                L = seg_hi[k] - lo
                sw = 0.0
                ss = 0.0
                for r in range(L):
                    i = cur[f, lo + r]
                    xb[r] = xf[i]
                    sw += w[i]
                    ss += wy[i]
                    cw[r] = sw
                    cs[r] = ss
                W = tot_w[k]
                S = tot_s[k]
                bk = base[k]
                for r in range(L - 1):
                    lw = cw[r]
                    rw = W - lw
                    rs = S - cs[r]
                    if integral:
                        g = cs[r] * cs[r] * inv[int(lw)] + rs * rs * inv[int(rw + 0.5)] - bk
                    else:
                        g = cs[r] * cs[r] / lw + rs * rs / max(rw, 1e-300) - bk
                    ok = xb[r + 1] > xb[r] and lw >= min_leaf and rw >= min_leaf
                    gb[r] = g if ok else -1.0
                bg = best_gain[k]
                bf = best_f[k]
                bt = best_t[k]
                for r in range(L - 1):
                    if gb[r] > bg:
                        bg = gb[r]
                        bf = f
                        t = xb[r] + 0.5 * (xb[r + 1] - xb[r])
                        if t >= xb[r + 1]:
                            t = xb[r]
                        bt = t
                best_gain[k] = bg
                best_f[k] = bf
                best_t[k] = bt

        n_next = 0
        for k in range(na):
            if best_f[k] >= 0:
                n_next += 2
        if n_next == 0:
            break
        # children at max depth become leaves: only feature 0's order is read again
        n_part = 1 if depth + 1 >= max_depth else m
        nxt_nodes = np.empty(n_next, dtype=np.int64)
        nxt_lo = np.empty(n_next, dtype=np.int64)
        nxt_hi = np.empty(n_next, dtype=np.int64)
        c = 0
        for k in range(na):
            if best_f[k] < 0:
                continue
            nd = active[k]
            fk = best_f[k]
            tk = best_t[k]
            feature[nd] = fk
            threshold[nd] = tk
            gain[nd] = best_gain[k]
            left[nd] = n_nodes
            right[nd] = n_nodes + 1
            n_left = 0
            for r in range(seg_lo[k], seg_hi[k]):
                i = cur[0, r]
                g_l = Xt[fk, i] <= tk
                goleft[i] = g_l
                if g_l:
                    n_left += 1
                    node_of[i] = n_nodes
                else:
                    node_of[i] = n_nodes + 1
            nxt_nodes[c] = n_nodes
            nxt_nodes[c + 1] = n_nodes + 1
            nxt_lo[c] = seg_lo[k]
            nxt_hi[c] = seg_lo[k] + n_left
            nxt_lo[c + 1] = seg_lo[k] + n_left
            nxt_hi[c + 1] = seg_hi[k]
            for f in range(n_part):
                a = seg_lo[k]
                b = seg_lo[k] + n_left
                for r in range(seg_lo[k], seg_hi[k]):
                    i = cur[f, r]
                    gl = goleft[i]
                    pos = a if gl else b  # select, not branch: gl is unpredictable
                    nxt[f, pos] = i
                    a += gl
                    b += 1 - gl
            c += 2
            n_nodes += 2
        cur, nxt = nxt, cur
        active = nxt_nodes
        seg_lo = nxt_lo
        seg_hi = nxt_hi
        depth += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), gain[:n_nodes].copy(), node_of)


@njit(cache=True)
def _grow_subset(X, y, w, max_depth, min_leaf, max_features, seed):
    """Depth-first growth with a fresh random feature subset at every node.

    Each node sorts only its own rows on its candidate features, which beats
    the level-wise scan when the subset is much smaller than n_features.
    """
    np.random.seed(seed)
    n, m = X.shape
    rows = np.empty(n, dtype=np.int64)
    c = 0
    for i in range(n):
        if w[i] > 0:
            rows[c] = i
            c += 1
    rows = rows[:c]
    cap = 2 * c + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    gain = np.zeros(cap)
    st_node = np.zeros(cap, dtype=np.int64)
    st_lo = np.zeros(cap, dtype=np.int64)
    st_hi = np.zeros(cap, dtype=np.int64)
    st_depth = np.zeros(cap, dtype=np.int64)
    sp = 1
    st_hi[0] = c
    n_nodes = 1
    tmp = np.empty(c, dtype=np.int64)
    pool = np.arange(m)
    xv = np.empty(c)
    obuf = np.empty(c, dtype=np.int64)
    while sp > 0:
        sp -= 1
        nd, lo, hi, depth = st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp]
        W = 0.0
        S = 0.0
        Q = 0.0
        for r in range(lo, hi):
            i = rows[r]
            W += w[i]
            S += w[i] * y[i]
            Q += w[i] * y[i] * y[i]
        value[nd] = S / W
        sse = Q - S * S / W
        if depth >= max_depth or W < 2 * min_leaf or sse <= 1e-14 * (1.0 + Q):
            continue
        # partial Fisher-Yates draw of the candidate features
        for j in range(max_features):
            r = j + np.random.randint(m - j)
            pool[j], pool[r] = pool[r], pool[j]
        cand = np.sort(pool[:max_features])
        best = 1e-10 * sse
        bf = -1
        bt = 0.0
        seg = rows[lo:hi]
        cnt = hi - lo
        for f in cand:
            for r in range(cnt):
                xv[r] = X[seg[r], f]
            # tie order is irrelevant: equal values are accumulated before any split is scored
            if cnt <= 32:
                o = obuf[:cnt]
                for r in range(cnt):
                    o[r] = r
                for r in range(1, cnt):
                    cur = o[r]
                    q = r - 1
                    while q >= 0 and xv[o[q]] > xv[cur]:
                        o[q + 1] = o[q]
                        q -= 1
                    o[q + 1] = cur
            else:
                o = np.argsort(xv[:cnt])
            lw = 0.0
            ls = 0.0
            last = 0.0
            for r in range(cnt):
                i = seg[o[r]]
                x = xv[o[r]]
                if lw > 0 and x > last:
                    rw = W - lw
                    if lw >= min_leaf and rw >= min_leaf:
                        rs = S - ls
                        g = ls * ls / lw + rs * rs / rw - S * S / W
                        if g > best:
                            best = g
                            bf = f
                            t = last + 0.5 * (x - last)
                            if t >= x:
                                t = last
                            bt = t
                lw += w[i]
                ls += w[i] * y[i]
                last = x
        if bf < 0:
            continue
        nl = 0
        for r in range(lo, hi):
            if X[rows[r], bf] <= bt:
                tmp[nl] = rows[r]
                nl += 1
        k = nl
        for r in range(lo, hi):
            if X[rows[r], bf] > bt:
                tmp[k] = rows[r]
                k += 1
        rows[lo:hi] = tmp[:hi - lo]
        feature[nd] = bf
        threshold[nd] = bt
        gain[nd] = best
        left[nd] = n_nodes
        right[nd] = n_nodes + 1
        st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp] = n_nodes + 1, lo + nl, hi, depth + 1
        sp += 1
        st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp] = n_nodes, lo, lo + nl, depth + 1
        sp += 1
        n_nodes += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), gain[:n_nodes].copy())


@njit(cache=True)
def _apply(X, feature, threshold, left, right, value, out, scale):
    n = X.shape[0]
    for i in range(n):
        nd = 0
        while feature[nd] >= 0:
            if X[i, feature[nd]] <= threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] += scale * value[nd]


@njit(cache=True)
def _apply_ensemble(X, feature, threshold, left, right, value, offsets, n_trees, scale, out):
    n = X.shape[0]
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            nd = 0
            while feature[base + nd] >= 0:
                if X[i, feature[base + nd]] <= threshold[base + nd]:
                    nd = left[base + nd]
                else:
                    nd = right[base + nd]
            acc += value[base + nd]
        out[i] += scale * acc


def presort(X: np.ndarray):
    """Per-feature row order and sorted values, each (n_features, n_samples),
    plus scratch buffers reused by every tree grown on the same matrix."""
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int32))
    Xt = np.ascontiguousarray(X.T, dtype=np.float64)
    return order, Xt, (np.empty_like(order), np.empty_like(order))


def grow_tree(X, y, *, max_depth=3, min_samples_leaf=1, max_features=None,
              weights=None, order=None, seed=0):
    """Grow one tree; returns (tree arrays dict, leaf node per training row).

    ``order`` is the ``presort(X)`` result; pass it when growing many trees on
    the same matrix. Rows with zero weight take no part in the fit.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, m = X.shape
    if order is None:
        order = presort(X)
    order, Xt, work = order
    if weights is None:
        weights = np.ones(n)
    mf = m if max_features is None else int(max_features)
    depth = 10**6 if max_depth is None else int(max_depth)
    feat, thr, lft, rgt, val, gn, node_of = _grow(
        Xt, order, y, np.asarray(weights, dtype=np.float64), depth,
        float(min_samples_leaf), mf, int(seed) % (2**32), *work)
    tree = {"feature": feat, "threshold": thr, "left": lft, "right": rgt,
            "value": val, "gain": gn}
    return tree, node_of


def grow_random_tree(X, y, *, max_features, max_depth=None, min_samples_leaf=1,
                     weights=None, seed=0):
    """Random-forest member: per-node feature subsets of size ``max_features``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if weights is None:
        weights = np.ones(X.shape[0])
    depth = 10**6 if max_depth is None else int(max_depth)
    feat, thr, lft, rgt, val, gn = _grow_subset(
        X, y, np.asarray(weights, dtype=np.float64), depth, float(min_samples_leaf),
        min(int(max_features), X.shape[1]), int(seed) % (2**32))
    return {"feature": feat, "threshold": thr, "left": lft, "right": rgt, "value": val, "gain": gn}


def tree_predict(tree, X):
    out = np.zeros(X.shape[0])
    _apply(np.ascontiguousarray(X, dtype=np.float64), tree["feature"], tree["threshold"],
           tree["left"], tree["right"], tree["value"], out, 1.0)
    return out


def stack_trees(trees):
    """Concatenate trees into flat arrays with per-tree node offsets."""
    sizes = [len(t["feature"]) for t in trees]
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(sizes)
    out = {"offsets": offsets}
    for key in ("feature", "threshold", "left", "right", "value", "gain"):
        if trees:
            out[key] = np.concatenate([t[key] for t in trees])
        else:
            out[key] = np.zeros(0, dtype=np.int64 if key in ("feature", "left", "right") else float)
    return out


def ensemble_predict(stacked, X, n_trees=None, scale=1.0, base=0.0):
    X = np.ascontiguousarray(X, dtype=np.float64)
    total = len(stacked["offsets"]) - 1
    n_trees = total if n_trees is None else min(int(n_trees), total)
    out = np.full(X.shape[0], float(base))
    _apply_ensemble(X, stacked["feature"], stacked["threshold"], stacked["left"],
                    stacked["right"], stacked["value"], stacked["offsets"], n_trees,
                    float(scale), out)
    return out
