"""Compiled inner loops.

Group state shared by every kernel, for one-hot assignments:

* ``assign[i]``  group of flow ``i`` or -1
* ``C[j, h]``    multicast-served subscriptions of user ``h`` carried by group ``j``
* ``R[j]``       total rate of the flows in group ``j``
* ``U[j]``       users joined to group ``j`` (``C[j, h] > 0``)

Reception cost is ``w1 * sum_j R[j] * U[j]``.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def kmeans_rate_sweeps(indptr, indices, lam, assign, C, R, U, w1, w2, max_sweeps, rel_tol):
    """Single-flow best-move sweeps; returns cost after each sweep (entry 0 = start)."""
    n = assign.shape[0]
    k = R.shape[0]
    sender = 0.0
    for i in range(n):
        if assign[i] >= 0:
            sender += lam[i]
    costs = np.empty(max_sweeps + 1)
    total = 0.0
    for j in range(k):
        total += R[j] * U[j]
    costs[0] = w1 * total + w2 * sender
    done = 0
    for sweep in range(max_sweeps):
        tol = rel_tol * (costs[sweep] + 1.0)
        moves = 0
        for i in range(n):
            a = assign[i]
            s0 = indptr[i]
            s1 = indptr[i + 1]
            if a < 0 or s0 == s1:
                continue
            li = lam[i]
            loss = 0
            for p in range(s0, s1):
                if C[a, indices[p]] == 1:
                    loss += 1
            base = (R[a] - li) * (U[a] - loss) - R[a] * U[a]
            best = -tol
            best_b = a
            for b in range(k):
                if b == a:
                    continue
                gain = 0
                for p in range(s0, s1):
                    if C[b, indices[p]] == 0:
                        gain += 1
                d = w1 * (base + (R[b] + li) * (U[b] + gain) - R[b] * U[b])
                if d < best:
                    best = d
                    best_b = b
            if best_b != a:
                b = best_b
                for p in range(s0, s1):
                    h = indices[p]
                    C[a, h] -= 1
                    if C[a, h] == 0:
                        U[a] -= 1
                    C[b, h] += 1
                    if C[b, h] == 1:
                        U[b] += 1
                R[a] -= li
                R[b] += li
                assign[i] = b
                moves += 1
        total = 0.0
        for j in range(k):
            total += R[j] * U[j]
        done += 1
        costs[done] = w1 * total + w2 * sender
        if moves == 0:
            break
    return costs[:done + 1]


@njit(cache=True)
def flow_deltas(indptr, indices, lam, assign, resid, C, R, U, w1, w2, cu, lo, hi):
    """Cost change and unicast bandwidth of sending each flow's residual pairs unicast."""
    n = assign.shape[0]
    delta = np.zeros(n)
    bw = np.zeros(n)
    cnt = np.zeros(n, dtype=np.int64)
    for i in range(lo, hi):
        a = assign[i]
        s = 0
        loss = 0
        for p in range(indptr[i], indptr[i + 1]):
            if resid[p]:
                s += 1
                if a >= 0 and C[a, indices[p]] == 1:
                    loss += 1
        if s == 0:
            continue
        li = lam[i]
        d = cu * li * s
        if a >= 0:
            d += w1 * ((R[a] - li) * (U[a] - loss) - R[a] * U[a]) - w2 * li
        delta[i] = d
        bw[i] = li * s
        cnt[i] = s
    return delta, bw, cnt


@njit(cache=True)
def user_deltas(uptr, uflows, upos, lam, assign, resid, resid_count, C, R, U, w1, w2, cu,
                lo, hi):
    """Cost change and bandwidth of sending all of a user's residual pairs unicast.

    Flows whose last multicast subscriber is the moved user leave their group.
    """
    m = uptr.shape[0] - 1
    k = R.shape[0]
    delta = np.zeros(m)
    bw = np.zeros(m)
    cnt = np.zeros(m, dtype=np.int64)
    dR = np.zeros(k)
    for h in range(lo, hi):
        b = 0.0
        c = 0
        pruned = 0.0
        for q in range(uptr[h], uptr[h + 1]):
            if not resid[upos[q]]:
                continue
            i = uflows[q]
            c += 1
            b += lam[i]
            if resid_count[i] == 1 and assign[i] >= 0:
                dR[assign[i]] -= lam[i]
                pruned += lam[i]
        if c == 0:
            continue
        d = cu * b - w2 * pruned
        for j in range(k):
            if C[j, h] > 0:
                d += w1 * ((R[j] + dR[j]) * (U[j] - 1) - R[j] * U[j])
                dR[j] = 0.0
        delta[h] = d
        bw[h] = b
        cnt[h] = c
    return delta, bw, cnt


@njit(cache=True)
def pair_deltas(pair_flow, indices, lam, assign, resid, resid_count, C, R, U, w1, w2, cu):
    """Cost change of sending a single residual pair unicast (indexed by pair position)."""
    P = pair_flow.shape[0]
    delta = np.zeros(P)
    bw = np.zeros(P)
    cnt = np.zeros(P, dtype=np.int64)
    for p in range(P):
        if not resid[p]:
            continue
        i = pair_flow[p]
        h = indices[p]
        li = lam[i]
        d = cu * li
        g = assign[i]
        if g >= 0:
            dU = 1 if C[g, h] == 1 else 0
            if resid_count[i] == 1:
                d += w1 * ((R[g] - li) * (U[g] - dU) - R[g] * U[g]) - w2 * li
            else:
                d += w1 * R[g] * -dU
        delta[p] = d
        bw[p] = li
        cnt[p] = 1
    return delta, bw, cnt


@njit(cache=True)
def merge_deltas(indptr, indices, lam, eligible, C, R, U, w1, w2, cu):
    """Best group and cost change for moving each eligible unicast flow into multicast."""
    n = eligible.shape[0]
    k = R.shape[0]
    best_d = np.full(n, np.inf)
    best_g = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if not eligible[i]:
            continue
        s0 = indptr[i]
        s1 = indptr[i + 1]
        li = lam[i]
        base = w2 * li - cu * li * (s1 - s0)
        for b in range(k):
            gain = 0
            for p in range(s0, s1):
                if C[b, indices[p]] == 0:
                    gain += 1
            d = base + w1 * ((R[b] + li) * (U[b] + gain) - R[b] * U[b])
            if d < best_d[i]:
                best_d[i] = d
                best_g[i] = b
    return best_d, best_g
