"""Pure-multicast channelization solvers.

Every solver returns a one-hot-or-absent flow -> group mapping together with
the minimal user membership for it.  Flows nobody subscribes to are left
unassigned.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import ChannelizationSolution, ProblemInstance, minimal_user_membership
from .workloads import make_rng

__all__ = ["ALGORITHMS", "CLI_ALGORITHMS", "SolverConfig", "solve",
           "solve_random", "solve_kmeans_rate", "solve_kmeans_two_phase", "solve_bmd",
           "bmd_decompose", "group_state", "random_assignment"]

ALGORITHMS = ("random", "kmeans_rate", "kmeans_two_phase", "bmd")
CLI_ALGORITHMS = {"random": "random", "kmeans": "kmeans_rate",
                  "kmeans2p": "kmeans_two_phase", "bmd": "bmd"}

_REL_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = "kmeans_rate"
    max_iterations: int = 5
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        algo = CLI_ALGORITHMS.get(self.algorithm, self.algorithm)
        if algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        object.__setattr__(self, "algorithm", algo)
        if self.max_iterations < 1 or self.restarts < 1:
            raise ValueError("max_iterations and restarts must be >= 1")


_ONE = [()] + [(j,) for j in range(4096)]


def _solution(inst: ProblemInstance, assign: np.ndarray) -> ChannelizationSolution:
    if inst.k < 4096:
        X = tuple(_ONE[g] for g in (assign + 1).tolist())
    else:
        X = tuple(() if g < 0 else (g,) for g in assign.tolist())
    on = assign[inst.pair_flow] >= 0
    mask = np.zeros((inst.k, inst.m), dtype=bool)
    mask[assign[inst.pair_flow][on], inst.indices[on]] = True
    Y = tuple(tuple(np.flatnonzero(r).tolist()) for r in mask)
    return ChannelizationSolution._trusted(X, Y)


def group_state(inst: ProblemInstance, assign: np.ndarray, served: np.ndarray | None = None):
    """Count matrix ``C``, group rates ``R`` and joined-user counts ``U`` for ``assign``.

    ``served`` masks the pair positions delivered by multicast (default: all).
    """
    g = assign[inst.pair_flow]
    use = g >= 0 if served is None else (g >= 0) & served
    C = np.bincount(g[use] * inst.m + inst.indices[use], minlength=inst.k * inst.m)
    C = C.reshape(inst.k, inst.m).astype(np.int32)
    on = assign >= 0
    R = np.bincount(assign[on], weights=inst.lam[on], minlength=inst.k).astype(float)
    U = (C > 0).sum(axis=1).astype(np.int64)
    return C, R, U


def random_assignment(inst: ProblemInstance, rng: np.random.Generator) -> np.ndarray:
    assign = rng.integers(0, inst.k, size=inst.n).astype(np.int64)
    assign[inst.flow_degree == 0] = -1
    return assign


def _seeds(cfg: SolverConfig) -> list[np.random.Generator]:
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    return [np.random.Generator(np.random.PCG64(s)) for s in seqs]


def solve_random(inst: ProblemInstance, cfg: SolverConfig | None = None) -> ChannelizationSolution:
    cfg = cfg or SolverConfig("random")
    return _solution(inst, random_assignment(inst, make_rng(cfg.seed)))


# rate-aware k-means -------------------------------------------------------------

def _kmeans_rate_once(inst, assign, t, trace=None):
    C, R, U = group_state(inst, assign)
    w = inst.weights
    costs = _kernels.kmeans_rate_sweeps(inst.indptr, inst.indices, inst.lam, assign, C, R, U,
                                        w.w1, w.w2, t, _REL_TOL)
    if trace is not None:
        trace.append(costs.tolist())
    return assign, float(costs[-1])


def kmeans_rate_assignment(inst: ProblemInstance, cfg: SolverConfig, trace=None) -> np.ndarray:
    best, best_cost = None, np.inf
    for rng in _seeds(cfg) if cfg.restarts > 1 else [make_rng(cfg.seed)]:
        assign, cost = _kmeans_rate_once(inst, random_assignment(inst, rng), cfg.max_iterations,
                                         trace)
        if cost < best_cost:
            best, best_cost = assign, cost
    return best


def solve_kmeans_rate(inst: ProblemInstance, cfg: SolverConfig | None = None,
                      trace: list | None = None) -> ChannelizationSolution:
    """Local search that moves single flows to the group that lowers multicast cost most.

    Starts from a random assignment and sweeps flows in index order, at most
    ``max_iterations`` sweeps, stopping after a sweep with no move.  Moves are
    priced exactly, including users that must join or may leave a group, so
    heavy flows dominate.  With ``restarts > 1`` the cheapest run wins.
    ``trace`` receives one list of per-sweep costs per restart.
    """
    cfg = cfg or SolverConfig()
    return _solution(inst, kmeans_rate_assignment(inst, cfg, trace))


# two-phase (batch + online) k-means ---------------------------------------------

def _sqdist(P, centers):
    d = (P * P).sum(1)[:, None] - 2.0 * P @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _plusplus(P, k, rng):
    p = P.shape[0]
    idx = [int(rng.integers(p))]
    d = ((P - P[idx[0]]) ** 2).sum(1)
    for _ in range(1, k):
        tot = d.sum()
        nxt = int(rng.choice(p, p=d / tot)) if tot > 0 else int(rng.integers(p))
        idx.append(nxt)
        d = np.minimum(d, ((P - P[nxt]) ** 2).sum(1))
    return P[idx].copy()


def _centroids(P, labels, k):
    counts = np.bincount(labels, minlength=k).astype(float)
    sums = np.zeros((k, P.shape[1]))
    np.add.at(sums, labels, P)
    nz = counts > 0
    sums[nz] /= counts[nz, None]
    return sums, counts


def _kmeans_two_phase_labels(P, k, t, rng, trace=None):
    p = P.shape[0]
    centers = _plusplus(P, k, rng)
    labels = np.argmin(_sqdist(P, centers), axis=1)
    # phase 1: batch reassignment + centroid update
    for _ in range(t):
        centers, counts = _centroids(P, labels, k)
        for j in np.flatnonzero(counts == 0):
            resid = ((P - centers[labels]) ** 2).sum(1)
            resid[counts[labels] <= 1] = -1.0  # don't empty another cluster
            far = int(np.argmax(resid))
            if resid[far] <= 0:
                break
            old = labels[far]
            labels[far] = j
            counts[old] -= 1
            counts[j] = 1
            centers, counts = _centroids(P, labels, k)
        new = np.argmin(_sqdist(P, centers), axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
    # phase 2: online single-point moves on the within-cluster sum of squares
    centers, counts = _centroids(P, labels, k)
    obj = float(((P - centers[labels]) ** 2).sum())
    if trace is not None:
        trace.append(obj)
    for _ in range(t):
        moved = 0
        for x in range(p):
            a = labels[x]
            if counts[a] <= 1:
                continue
            d = ((centers - P[x]) ** 2).sum(1)
            cost_add = counts / (counts + 1.0) * d
            cost_rm = counts[a] / (counts[a] - 1.0) * d[a]
            cost_add[a] = np.inf
            b = int(np.argmin(cost_add))
            gain = cost_add[b] - cost_rm
            if gain < -_REL_TOL * (obj + 1.0):
                centers[a] = (centers[a] * counts[a] - P[x]) / (counts[a] - 1)
                centers[b] = (centers[b] * counts[b] + P[x]) / (counts[b] + 1)
                counts[a] -= 1
                counts[b] += 1
                labels[x] = b
                obj += gain
                moved += 1
                if trace is not None:
                    trace.append(obj)
        if not moved:
            break
    return labels, float(((P - centers[labels]) ** 2).sum())


def solve_kmeans_two_phase(inst: ProblemInstance, cfg: SolverConfig | None = None,
                           trace: list | None = None) -> ChannelizationSolution:
    """Rate-agnostic k-means on the flows' binary subscriber vectors.

    Batch Lloyd iterations are followed by online single-point moves that lower
    the within-cluster sum of squares; ``trace`` records that objective after
    each online move.
    """
    cfg = cfg or SolverConfig("kmeans_two_phase")
    assign = np.full(inst.n, -1, dtype=np.int64)
    live = np.flatnonzero(inst.flow_degree > 0)
    if live.size:
        P = inst.dense()[live].astype(float)
        k = min(inst.k, live.size)
        best, best_obj = None, np.inf
        for rng in _seeds(cfg) if cfg.restarts > 1 else [make_rng(cfg.seed)]:
            labels, obj = _kmeans_two_phase_labels(P, k, cfg.max_iterations, rng, trace)
            if obj < best_obj:
                best, best_obj = labels, obj
        assign[live] = best
    return _solution(inst, assign)


# binary matrix decomposition ------------------------------------------------------

def bmd_decompose(inst: ProblemInstance, cfg: SolverConfig | None = None,
                  trace: list | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Alternating minimization of ``||XY - W||^2`` over one-hot ``X`` and binary ``Y``.

    Returns ``(assign, Y)`` with ``Y`` a ``k x m`` boolean mask.  The result may
    leave subscriptions uncovered; ``trace`` gets the residual after each round.
    """
    cfg = cfg or SolverConfig("bmd")
    W = inst.dense()
    live = inst.flow_degree > 0
    deg = inst.flow_degree.astype(float)
    assign = random_assignment(inst, make_rng(cfg.seed))
    Wf = W.astype(float)
    Y = None
    for _ in range(cfg.max_iterations):
        # Y step: strict per-entry majority among the flows of each group
        size = np.bincount(assign[live], minlength=inst.k)
        cnt = np.zeros((inst.k, inst.m))
        np.add.at(cnt, assign[live], Wf[live])
        Y = 2 * cnt > size[:, None]
        ysz = Y.sum(1)
        overlap = Wf @ Y.T
        dis = ysz[None, :] - 2 * overlap + deg[:, None]
        if trace is not None:
            ii = np.flatnonzero(live)
            trace.append(float(dis[ii, assign[ii]].sum()))
        # X step: each flow to the group with least row disagreement, keep on ties
        best = np.argmin(dis, axis=1)
        idx = np.flatnonzero(live)
        cur = dis[idx, assign[idx]]
        better = dis[idx, best[idx]] < cur
        if not better.any():
            break
        assign[idx[better]] = best[idx[better]]
    else:
        size = np.bincount(assign[live], minlength=inst.k)
        cnt = np.zeros((inst.k, inst.m))
        np.add.at(cnt, assign[live], Wf[live])
        Y = 2 * cnt > size[:, None]
        if trace is not None:
            ii = np.flatnonzero(live)
            overlap = (Wf[ii] * Y[assign[ii]]).sum(1)
            trace.append(float((Y[assign[ii]].sum(1) - 2 * overlap + deg[ii]).sum()))
    return assign, Y


def solve_bmd(inst: ProblemInstance, cfg: SolverConfig | None = None,
              trace: list | None = None) -> ChannelizationSolution:
    assign, Ybmd = bmd_decompose(inst, cfg, trace)
    X = tuple(() if g < 0 else (int(g),) for g in assign)
    Ymin = minimal_user_membership(inst, X)
    Y = tuple(sorted(set(Ymin[j]) | set(np.flatnonzero(Ybmd[j]).tolist()))
              for j in range(inst.k))
    return ChannelizationSolution(X, Y)


_DISPATCH = {
    "random": solve_random,
    "kmeans_rate": solve_kmeans_rate,
    "kmeans_two_phase": solve_kmeans_two_phase,
    "bmd": solve_bmd,
}


def solve(inst: ProblemInstance, cfg: SolverConfig | None = None) -> ChannelizationSolution:
    cfg = cfg or SolverConfig()
    return _DISPATCH[cfg.algorithm](inst, cfg)
