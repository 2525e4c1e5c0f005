"""Core types and cost model for hybrid multicast/unicast channelization.

A problem instance holds ``n`` flows, ``m`` users and ``k`` multicast groups,
a sparse binary interest relation ``W`` (flow rows over user columns) and a
rate per flow.  A solution maps flows to groups (``X``), groups to users
(``Y``) and optionally serves some (flow, user) pairs point-to-point (``T``).

``Y`` is always stored group -> users.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "CostWeights",
    "ProblemInstance",
    "ChannelizationSolution",
    "HybridSolution",
    "CostReport",
    "Feasibility",
    "StructureError",
    "InstanceError",
    "UnsatisfiableError",
    "SearchSpaceTooLarge",
    "multicast_cost",
    "hybrid_cost",
    "is_feasible",
    "redundant_pairs",
    "perfect_multicast_cost",
    "all_unicast_cost",
    "all_unicast_solution",
    "minimal_user_membership",
    "brute_force_optimum",
    "BRUTE_FORCE_LIMIT",
]

BRUTE_FORCE_LIMIT = 10**7


class StructureError(ValueError):
    """A solution refers to flows, groups or users outside the instance."""


class InstanceError(ValueError):
    """Raised for an inconsistent problem instance."""


class UnsatisfiableError(ValueError):
    def __init__(self, pairs: Sequence[tuple[int, int]]):
        self.pairs = list(pairs)
        shown = ", ".join(f"({i},{h})" for i, h in self.pairs[:10])
        more = "" if len(self.pairs) <= 10 else f" ... ({len(self.pairs)} total)"
        super().__init__(f"pairs not unicast and flow in no group: {shown}{more}")


class SearchSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class CostWeights:
    w1: float = 1.0  # reception
    w2: float = 1.0  # sender
    w3: float = 1.0  # unicast overhead factor

    def __post_init__(self):
        if not (self.w1 > 0 and self.w2 > 0 and self.w3 >= 0):
            raise InstanceError(f"invalid weights {self}")

    @property
    def unicast_pair(self) -> float:
        """Cost per unit rate of one unicast (flow, user) pair."""
        return self.w3 * (self.w1 + self.w2)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Immutable problem instance with both orientations of ``W``.

    ``indptr``/``indices`` are the flow-major CSR view (users of flow ``i`` are
    ``indices[indptr[i]:indptr[i+1]]``, ascending).  The user-major view is
    derived on construction; ``user_pos`` maps each user-major entry back to
    its flow-major position, so per-pair state can live in one array.
    """

    n: int
    m: int
    k: int
    indptr: np.ndarray
    indices: np.ndarray
    lam: np.ndarray
    weights: CostWeights = field(default_factory=CostWeights)

    user_indptr: np.ndarray = field(init=False, repr=False)
    user_flows: np.ndarray = field(init=False, repr=False)
    user_pos: np.ndarray = field(init=False, repr=False)
    pair_flow: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n, m, k = self.n, self.m, self.k
        if n < 1 or m < 1 or k < 1:
            raise InstanceError(f"need n, m, k >= 1, got {n}, {m}, {k}")
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        lam = np.asarray(self.lam, dtype=np.float64)
        if indptr.shape != (n + 1,) or indptr[0] != 0 or np.any(np.diff(indptr) < 0):
            raise InstanceError("malformed indptr")
        if indptr[-1] != indices.size:
            raise InstanceError("indptr does not match indices")
        if lam.shape != (n,):
            raise InstanceError(f"expected {n} rates, got {lam.size}")
        if np.any(~np.isfinite(lam)) or np.any(lam < 0) or not np.any(lam > 0):
            raise InstanceError("rates must be finite, nonnegative and not all zero")
        if indices.size and (indices.min() < 0 or indices.max() >= m):
            raise InstanceError("user index out of range")
        pair_flow = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
        # rows must be strictly ascending (sorted, no duplicates)
        if indices.size > 1:
            same_row = pair_flow[1:] == pair_flow[:-1]
            if np.any(same_row & (indices[1:] <= indices[:-1])):
                raise InstanceError("user indices within a flow must be unique and sorted")
        order = np.lexsort((pair_flow, indices))
        user_indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(np.bincount(indices, minlength=m), out=user_indptr[1:])

        set_ = object.__setattr__
        set_(self, "indptr", _readonly(indptr))
        set_(self, "indices", _readonly(indices))
        set_(self, "lam", _readonly(lam))
        set_(self, "pair_flow", _readonly(pair_flow))
        set_(self, "user_indptr", _readonly(user_indptr))
        set_(self, "user_flows", _readonly(pair_flow[order].copy()))
        set_(self, "user_pos", _readonly(order.astype(np.int64)))

    # construction ---------------------------------------------------------

    @classmethod
    def from_rows(cls, rows: Sequence[Iterable[int]], lam, k: int, m: int | None = None,
                  weights: CostWeights | None = None) -> "ProblemInstance":
        """Build from per-flow subscriber lists."""
        clean = [sorted(set(int(h) for h in r)) for r in rows]
        if m is None:
            m = 1 + max((r[-1] for r in clean if r), default=0)
        indptr = np.zeros(len(clean) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(r) for r in clean])
        indices = np.fromiter(itertools.chain.from_iterable(clean), dtype=np.int64,
                              count=int(indptr[-1]))
        return cls(len(clean), m, k, indptr, indices, np.asarray(lam, dtype=float),
                   weights or CostWeights())

    @classmethod
    def from_pairs(cls, n: int, m: int, k: int, pairs: Iterable[tuple[int, int]], lam,
                   weights: CostWeights | None = None) -> "ProblemInstance":
        rows: list[list[int]] = [[] for _ in range(n)]
        for i, h in pairs:
            if not 0 <= i < n:
                raise InstanceError(f"flow index {i} out of range")
            rows[i].append(h)
        return cls.from_rows(rows, lam, k, m, weights)

    @classmethod
    def from_dense(cls, W, lam, k: int, weights: CostWeights | None = None) -> "ProblemInstance":
        W = np.asarray(W, dtype=bool)
        rows = [np.flatnonzero(r) for r in W]
        return cls.from_rows(rows, lam, k, W.shape[1], weights)

    def replace(self, *, k: int | None = None, weights: CostWeights | None = None,
                lam=None) -> "ProblemInstance":
        return ProblemInstance(self.n, self.m, self.k if k is None else k, self.indptr,
                               self.indices, self.lam if lam is None else lam,
                               self.weights if weights is None else weights)

    def restricted(self, keep: np.ndarray) -> "ProblemInstance":
        """Instance whose interest relation keeps only pairs where ``keep`` is set.

        ``keep`` is a boolean mask over flow-major pair positions.
        """
        keep = np.asarray(keep, dtype=bool)
        counts = np.bincount(self.pair_flow[keep], minlength=self.n)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return ProblemInstance(self.n, self.m, self.k, indptr, self.indices[keep], self.lam,
                               self.weights)

    # views -----------------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def subscribers(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def subscriptions(self, h: int) -> np.ndarray:
        return self.user_flows[self.user_indptr[h]:self.user_indptr[h + 1]]

    @property
    def flow_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def user_degree(self) -> np.ndarray:
        return np.diff(self.user_indptr)

    def pairs(self) -> Iterator[tuple[int, int]]:
        return zip(self.pair_flow.tolist(), self.indices.tolist())

    def pair_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.pairs())

    def dense(self) -> np.ndarray:
        W = np.zeros((self.n, self.m), dtype=bool)
        W[self.pair_flow, self.indices] = True
        return W

    def demanded_bandwidth(self) -> float:
        """Total rate over all (flow, user) subscriptions."""
        return float(np.dot(self.lam, self.flow_degree))

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (self.n, self.m, self.k, self.weights) == (other.n, other.m, other.k, other.weights) \
            and np.array_equal(self.indptr, other.indptr) \
            and np.array_equal(self.indices, other.indices) \
            and np.array_equal(self.lam, other.lam)

    __hash__ = None  # type: ignore[assignment]


def _norm_sets(rows: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(sorted(set(int(x) for x in r))) for r in rows)


@dataclass(frozen=True)
class ChannelizationSolution:
    X: tuple[tuple[int, ...], ...]  # groups of each flow
    Y: tuple[tuple[int, ...], ...]  # users of each group

    def __post_init__(self):
        object.__setattr__(self, "X", _norm_sets(self.X))
        object.__setattr__(self, "Y", _norm_sets(self.Y))

    @classmethod
    def from_assignment(cls, assignment: Sequence[int], Y) -> "ChannelizationSolution":
        X = tuple(() if g < 0 else (int(g),) for g in assignment)
        return cls(X, Y)

    @classmethod
    def _trusted(cls, X, Y) -> "ChannelizationSolution":
        # rows already sorted, distinct python ints; skip normalization
        sol = object.__new__(cls)
        object.__setattr__(sol, "X", X)
        object.__setattr__(sol, "Y", Y)
        return sol

    def is_one_hot(self) -> bool:
        return all(len(r) <= 1 for r in self.X)

    def assignment(self) -> np.ndarray:
        """Group per flow (-1 when absent); only valid for one-hot ``X``."""
        if not self.is_one_hot():
            raise ValueError("X is not one-hot")
        return np.array([r[0] if r else -1 for r in self.X], dtype=np.int64)


@dataclass(frozen=True)
class HybridSolution:
    X: tuple[tuple[int, ...], ...]
    Y: tuple[tuple[int, ...], ...]
    T: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "X", _norm_sets(self.X))
        object.__setattr__(self, "Y", _norm_sets(self.Y))
        object.__setattr__(self, "T", frozenset((int(i), int(h)) for i, h in self.T))

    @classmethod
    def from_channelization(cls, sol: ChannelizationSolution, T=frozenset()) -> "HybridSolution":
        return cls(sol.X, sol.Y, T)

    @property
    def channel(self) -> ChannelizationSolution:
        return ChannelizationSolution(self.X, self.Y)


@dataclass(frozen=True)
class CostReport:
    reception: float
    sender: float
    unicast: float
    total: float
    perfect: float
    pct_of_perfect: float | None  # None when the perfect-multicast cost is 0

    def format(self) -> str:
        pct = "undefined" if self.pct_of_perfect is None else f"{self.pct_of_perfect:.4f}"
        return (f"reception={self.reception:.10g} sender={self.sender:.10g} "
                f"unicast={self.unicast:.10g} total={self.total:.10g} "
                f"perfect={self.perfect:.10g} pct_of_perfect={pct}")


@dataclass(frozen=True)
class Feasibility:
    ok: bool
    uncovered: list[tuple[int, int]]

    def __bool__(self):
        return self.ok


# validation -----------------------------------------------------------------

def _check_channel(inst: ProblemInstance, X, Y):
    if len(X) != inst.n:
        raise StructureError(f"X has {len(X)} rows, instance has {inst.n} flows")
    if len(Y) != inst.k:
        raise StructureError(f"Y has {len(Y)} rows, instance has {inst.k} groups")
    for i, row in enumerate(X):
        if row and (row[0] < 0 or row[-1] >= inst.k):
            raise StructureError(f"flow {i} mapped to group out of range")
    for j, row in enumerate(Y):
        if row and (row[0] < 0 or row[-1] >= inst.m):
            raise StructureError(f"group {j} has user out of range")


def _check_T(inst: ProblemInstance, T):
    for i, h in T:
        if not (0 <= i < inst.n and 0 <= h < inst.m):
            raise StructureError(f"unicast pair ({i},{h}) out of range")


# cost functions ---------------------------------------------------------------

def _multicast_terms(inst: ProblemInstance, X, Y) -> tuple[float, float]:
    _check_channel(inst, X, Y)
    sizes = [len(r) for r in Y]
    lam = inst.lam.tolist()
    recv = 0.0
    sent = 0.0
    for i, row in enumerate(X):
        if row:
            recv += lam[i] * sum(sizes[j] for j in row)
            sent += lam[i] * len(row)
    w = inst.weights
    return w.w1 * recv, w.w2 * sent


def multicast_cost(inst: ProblemInstance, sol: ChannelizationSolution | HybridSolution) -> float:
    """Reception plus sender cost of the multicast part of ``sol``.

    A user in group ``j`` receives every flow mapped to ``j`` whether or not it
    subscribed, so filtering overhead is part of the reception term.
    """
    recv, sent = _multicast_terms(inst, sol.X, sol.Y)
    return recv + sent


def perfect_multicast_cost(inst: ProblemInstance) -> float:
    deg = inst.flow_degree
    w = inst.weights
    return float(w.w1 * np.dot(inst.lam, deg) + w.w2 * inst.lam[deg > 0].sum())


def hybrid_cost(inst: ProblemInstance, sol: HybridSolution) -> CostReport:
    recv, sent = _multicast_terms(inst, sol.X, sol.Y)
    _check_T(inst, sol.T)
    lam = inst.lam
    # fsum is order independent, so this equals all_unicast_cost exactly for T = W
    uni = inst.weights.unicast_pair * math.fsum(lam[i] for i, _ in sol.T)
    total = recv + sent + float(uni)
    perfect = perfect_multicast_cost(inst)
    pct = 100.0 * total / perfect if perfect > 0 else None
    return CostReport(recv, sent, float(uni), total, perfect, pct)


def all_unicast_solution(inst: ProblemInstance) -> HybridSolution:
    return HybridSolution(((),) * inst.n, ((),) * inst.k, inst.pair_set())


def all_unicast_cost(inst: ProblemInstance) -> float:
    return float(inst.weights.unicast_pair * math.fsum(inst.lam[inst.pair_flow].tolist()))


# feasibility ------------------------------------------------------------------

def is_feasible(inst: ProblemInstance, sol: HybridSolution) -> Feasibility:
    """Check that every subscription is served by unicast or a joined group."""
    _check_channel(inst, sol.X, sol.Y)
    _check_T(inst, sol.T)
    joined: list[set[int]] = [set() for _ in range(inst.m)]
    for j, users in enumerate(sol.Y):
        for h in users:
            joined[h].add(j)
    T = sol.T
    uncovered = []
    for i, h in inst.pairs():
        if (i, h) in T:
            continue
        if not joined[h].intersection(sol.X[i]):
            uncovered.append((i, h))
    return Feasibility(not uncovered, uncovered)


def redundant_pairs(inst: ProblemInstance, sol: HybridSolution) -> list[tuple[int, int]]:
    """Unicast pairs also covered by a joined group (allowed, but wasteful)."""
    joined: list[set[int]] = [set() for _ in range(inst.m)]
    for j, users in enumerate(sol.Y):
        for h in users:
            joined[h].add(j)
    return sorted((i, h) for i, h in sol.T if joined[h].intersection(sol.X[i]))


def minimal_user_membership(inst: ProblemInstance, X, T=frozenset()) -> tuple[tuple[int, ...], ...]:
    """Derive a group -> users mapping that covers every non-unicast subscription.

    Each user walks its uncovered subscriptions in ascending flow order and,
    unless an already-joined group carries the flow, joins the carrying group
    with the smallest total rate (lowest index on ties).  For one-hot ``X``
    this is forced: a user joins exactly the groups of its multicast flows.
    """
    X = _norm_sets(X)
    if len(X) != inst.n:
        raise StructureError(f"X has {len(X)} rows, instance has {inst.n} flows")
    for i, row in enumerate(X):
        if row and (row[0] < 0 or row[-1] >= inst.k):
            raise StructureError(f"flow {i} mapped to group out of range")
    T = frozenset(T)
    _check_T(inst, T)

    if all(len(r) <= 1 for r in X):
        assign = np.array([r[0] if r else -1 for r in X], dtype=np.int64)
        need = np.ones(inst.nnz, dtype=bool)
        if T:
            need = np.array([(i, h) not in T for i, h in inst.pairs()], dtype=bool)
        g = assign[inst.pair_flow]
        bad = need & (g < 0)
        if bad.any():
            p = np.flatnonzero(bad)
            raise UnsatisfiableError(list(zip(inst.pair_flow[p].tolist(), inst.indices[p].tolist())))
        mask = np.zeros((inst.k, inst.m), dtype=bool)
        mask[g[need], inst.indices[need]] = True
        return tuple(tuple(np.flatnonzero(r).tolist()) for r in mask)

    rate = [0.0] * inst.k
    lam = inst.lam.tolist()
    for i, row in enumerate(X):
        for j in row:
            rate[j] += lam[i]
    Y: list[list[int]] = [[] for _ in range(inst.k)]
    bad = []
    for h in range(inst.m):
        joined: set[int] = set()
        for i in inst.subscriptions(h).tolist():
            if (i, h) in T or joined.intersection(X[i]):
                continue
            if not X[i]:
                bad.append((i, h))
                continue
            j = min(X[i], key=lambda g: (rate[g], g))
            joined.add(j)
            Y[j].append(h)
    if bad:
        raise UnsatisfiableError(sorted(bad))
    return _norm_sets(Y)


# exact oracle -------------------------------------------------------------------

def brute_force_optimum(inst: ProblemInstance, limit: int = BRUTE_FORCE_LIMIT
                        ) -> tuple[HybridSolution, float]:
    """Exhaustive optimum over one-hot-or-absent ``X`` and every subset ``T`` of ``W``.

    ``Y`` is the minimal membership for each candidate.  Given ``X``, the cost
    separates into a sender term plus one independent term per user (which
    groups it joins versus which of its pairs go unicast), so subsets of ``W``
    are enumerated user by user; the candidate set is unchanged.
    """
    log_space = inst.n * math.log10(inst.k + 1) + inst.nnz * math.log10(2)
    if log_space > math.log10(max(limit, 1)) + 1e-12:
        raise SearchSpaceTooLarge(
            f"search space (k+1)^n * 2^|W| ~ 10^{log_space:.1f} exceeds limit {limit}")
    w = inst.weights
    lam = inst.lam.tolist()
    cu = w.unicast_pair
    user_flows = [inst.subscriptions(h).tolist() for h in range(inst.m)]

    best_cost = math.inf
    best = None
    for assign in itertools.product(range(-1, inst.k), repeat=inst.n):
        rate = [0.0] * inst.k
        sender = 0.0
        for i, g in enumerate(assign):
            if g >= 0:
                rate[g] += lam[i]
                sender += lam[i]
        total = w.w2 * sender
        choice = []
        for flows in user_flows:
            best_h = math.inf
            best_mask = 0
            for mask in range(1 << len(flows)):
                groups = set()
                uni = 0.0
                ok = True
                for b, i in enumerate(flows):
                    if mask >> b & 1:
                        uni += lam[i]
                    elif assign[i] < 0:
                        ok = False
                        break
                    else:
                        groups.add(assign[i])
                if not ok:
                    continue
                c = w.w1 * sum(rate[j] for j in groups) + cu * uni
                if c < best_h:
                    best_h, best_mask = c, mask
            total += best_h
            choice.append(best_mask)
            if total >= best_cost:
                break
        if total < best_cost:
            best_cost = total
            best = (assign, choice)

    assign, choice = best
    T = frozenset((i, h) for h, (flows, mask) in enumerate(zip(user_flows, choice))
                  for b, i in enumerate(flows) if mask >> b & 1)
    X = tuple(() if g < 0 else (g,) for g in assign)
    sol = HybridSolution(X, minimal_user_membership(inst, X, T), T)
    return sol, hybrid_cost(inst, sol).total
