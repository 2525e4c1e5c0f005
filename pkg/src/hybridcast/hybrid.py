"""Second-step heuristics: move flows, users or pairs between multicast and unicast.

The working representation is :class:`HybridState`, a one-hot group mapping
plus a per-pair "served by multicast" mask.  Every move keeps the state
feasible, and every heuristic prices candidates with the exact cost change.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .channelizers import SolverConfig, group_state, solve
from .model import (CostReport, HybridSolution, ProblemInstance,
                    UnsatisfiableError, all_unicast_solution, hybrid_cost, is_feasible)

__all__ = ["HEURISTICS", "SORTED_HEURISTICS", "GREEDY_HEURISTICS", "HeuristicConfig",
           "BudgetExceeded", "HybridState", "PipelineResult", "flow_weight", "user_weight",
           "move_flow_to_unicast", "move_user_to_unicast", "sorted_removal", "greedy_removal",
           "unicast_first", "run_pipeline", "GREEDY_PAIR_LIMIT"]

SORTED_HEURISTICS = ("lightest_flow", "heaviest_flow", "heaviest_user", "lightest_user")
GREEDY_HEURISTICS = ("greedy_flow", "greedy_user", "greedy_pair")
HEURISTICS = SORTED_HEURISTICS + GREEDY_HEURISTICS
GREEDY_PAIR_LIMIT = 10**5

_MODES = {"noniter": "non_iterative", "iter": "iterative"}
_DIRECTIONS = {"mfirst": "multicast_first", "ufirst": "unicast_first"}
_REL_TOL = 1e-12


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class HeuristicConfig:
    heuristic: str | None = "greedy_flow"
    mode: str = "non_iterative"
    direction: str = "multicast_first"
    budget_fraction: float = 1.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    unconditional: bool = False   # sorted heuristics: move even when cost rises
    force_budget: bool = False    # greedy heuristics: keep filling the budget at delta >= 0
    scan_past: bool = False       # sorted heuristics: skip rejected candidates instead of stopping

    def __post_init__(self):
        h = self.heuristic
        if h in ("", "none"):
            h = None
        if h is not None and h not in HEURISTICS:
            raise ValueError(f"unknown heuristic {h!r}")
        object.__setattr__(self, "heuristic", h)
        mode = _MODES.get(self.mode, self.mode)
        if mode not in _MODES.values():
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        direction = _DIRECTIONS.get(self.direction, self.direction)
        if direction not in _DIRECTIONS.values():
            raise ValueError(f"unknown direction {self.direction!r}")
        object.__setattr__(self, "direction", direction)
        if not 0.0 <= self.budget_fraction <= 1.0:
            raise ValueError("budget_fraction must lie in [0, 1]")

    @property
    def iterative(self) -> bool:
        return self.mode == "iterative"


def flow_weight(inst: ProblemInstance, i: int) -> float:
    """Bandwidth to deliver flow ``i`` to all of its subscribers."""
    return float(inst.lam[i] * inst.flow_degree[i])


def user_weight(inst: ProblemInstance, h: int) -> float:
    """Bandwidth of everything user ``h`` subscribes to."""
    return float(inst.lam[inst.subscriptions(h)].sum())


class HybridState:
    """Mutable one-hot hybrid solution with incremental cost bookkeeping.

    ``served[p]`` is True when pair position ``p`` (flow-major order of the
    instance) is delivered by multicast, False when it is unicast.  Group
    memberships beyond what the served pairs need (e.g. from BMD) are kept as
    one extra count in ``C`` and vanish only when the user moves to unicast.
    """

    def __init__(self, inst: ProblemInstance, assign, served=None, *, budget_fraction=1.0,
                 cap: float | None = None, extra=None):
        self.inst = inst
        self.assign = np.array(assign, dtype=np.int64)
        self.served = np.ones(inst.nnz, dtype=bool) if served is None \
            else np.array(served, dtype=bool)
        bad = self.served & (self.assign[inst.pair_flow] < 0)
        if bad.any():
            p = np.flatnonzero(bad)
            raise UnsatisfiableError(list(zip(inst.pair_flow[p].tolist(),
                                              inst.indices[p].tolist())))
        self.served_count = np.bincount(inst.pair_flow[self.served], minlength=inst.n)
        self.C, self.R, self.U = group_state(inst, self.assign, self.served)
        if extra is not None:
            self.C += (np.asarray(extra, dtype=bool) & (self.C == 0)).astype(np.int32)
            self.U = (self.C > 0).sum(axis=1).astype(np.int64)
        self.demand = inst.demanded_bandwidth()
        self.cap = budget_fraction * self.demand if cap is None else cap
        self.used = float(inst.lam[inst.pair_flow[~self.served]].sum())

    @classmethod
    def from_solution(cls, inst: ProblemInstance, sol, served=None, **kw) -> "HybridState":
        """Build from a one-hot channelization or hybrid solution.

        ``served`` overrides the multicast mask implied by the solution's ``T``.
        """
        ch = sol.channel if isinstance(sol, HybridSolution) else sol
        assign = ch.assignment()
        if served is None and isinstance(sol, HybridSolution) and sol.T:
            served = np.array([(i, h) not in sol.T for i, h in inst.pairs()], dtype=bool)
        mask = np.zeros((inst.k, inst.m), dtype=bool)
        for j, users in enumerate(ch.Y):
            mask[j, list(users)] = True
        return cls(inst, assign, served, extra=mask, **kw)

    @classmethod
    def all_unicast(cls, inst: ProblemInstance, **kw) -> "HybridState":
        return cls(inst, np.full(inst.n, -1), np.zeros(inst.nnz, dtype=bool), **kw)

    def copy(self) -> "HybridState":
        new = object.__new__(HybridState)
        new.__dict__.update(self.__dict__)
        for name in ("assign", "served", "served_count", "C", "R", "U"):
            setattr(new, name, getattr(self, name).copy())
        return new

    # accounting ---------------------------------------------------------------

    def cost(self) -> float:
        w = self.inst.weights
        on = self.assign >= 0
        return float(w.w1 * np.dot(self.R, self.U) + w.w2 * self.inst.lam[on].sum()
                     + w.unicast_pair * self.used)

    def tol(self) -> float:
        return _REL_TOL * (abs(self.cost()) + 1.0)

    def fits(self, bw) -> np.ndarray | bool:
        return self.used + bw <= self.cap + 1e-9 * max(1.0, self.cap)

    @property
    def unicast_fraction(self) -> float:
        return self.used / self.demand if self.demand > 0 else 0.0

    def to_solution(self) -> HybridSolution:
        inst = self.inst
        X = tuple(() if g < 0 else (int(g),) for g in self.assign)
        Y = tuple(tuple(np.flatnonzero(r).tolist()) for r in self.C > 0)
        off = np.flatnonzero(~self.served)
        T = frozenset(zip(inst.pair_flow[off].tolist(), inst.indices[off].tolist()))
        return HybridSolution(X, Y, T)

    # pricing ------------------------------------------------------------------

    def deltas(self, kind: str, lo: int = 0, hi: int | None = None):
        """``(delta_cost, bandwidth, pairs)`` per candidate of ``kind``."""
        inst, w = self.inst, self.inst.weights
        args = (self.assign, self.served)
        if kind == "flow":
            hi = inst.n if hi is None else hi
            return _kernels.flow_deltas(inst.indptr, inst.indices, inst.lam, *args, self.C,
                                        self.R, self.U, w.w1, w.w2, w.unicast_pair, lo, hi)
        if kind == "user":
            hi = inst.m if hi is None else hi
            return _kernels.user_deltas(inst.user_indptr, inst.user_flows, inst.user_pos,
                                        inst.lam, *args, self.served_count, self.C, self.R,
                                        self.U, w.w1, w.w2, w.unicast_pair, lo, hi)
        if kind == "pair":
            return _kernels.pair_deltas(inst.pair_flow, inst.indices, inst.lam, *args,
                                        self.served_count, self.C, self.R, self.U,
                                        w.w1, w.w2, w.unicast_pair)
        raise ValueError(kind)

    # moves ----------------------------------------------------------------------

    def _unassign(self, i: int):
        g = self.assign[i]
        if g >= 0:
            self.R[g] -= self.inst.lam[i]
            self.assign[i] = -1

    def _drop(self, p: int, g: int, h: int):
        self.served[p] = False
        if g >= 0:
            self.C[g, h] -= 1
            if self.C[g, h] == 0:
                self.U[g] -= 1

    def apply_flow(self, i: int):
        inst = self.inst
        g = int(self.assign[i])
        lo, hi = inst.indptr[i], inst.indptr[i + 1]
        pos = lo + np.flatnonzero(self.served[lo:hi])
        if pos.size == 0:
            return
        for p in pos.tolist():
            self._drop(p, g, int(inst.indices[p]))
        self.used += float(inst.lam[i]) * pos.size
        self.served_count[i] = 0
        self._unassign(i)

    def apply_user(self, h: int):
        inst = self.inst
        q = np.arange(inst.user_indptr[h], inst.user_indptr[h + 1])
        pos = inst.user_pos[q]
        live = self.served[pos]
        if not live.any():
            return
        for p, i in zip(pos[live].tolist(), inst.user_flows[q][live].tolist()):
            self.served[p] = False
            self.served_count[i] -= 1
            self.used += float(inst.lam[i])
            if self.served_count[i] == 0:
                self._unassign(i)
        joined = self.C[:, h] > 0
        self.U[joined] -= 1
        self.C[:, h] = 0

    def apply_pair(self, p: int):
        inst = self.inst
        if not self.served[p]:
            return
        i, h = int(inst.pair_flow[p]), int(inst.indices[p])
        self._drop(p, int(self.assign[i]), h)
        self.used += float(inst.lam[i])
        self.served_count[i] -= 1
        if self.served_count[i] == 0:
            self._unassign(i)

    def apply(self, kind: str, c: int):
        {"flow": self.apply_flow, "user": self.apply_user, "pair": self.apply_pair}[kind](c)

    def merge_flow(self, i: int, g: int):
        """Move a fully unicast flow into group ``g``."""
        inst = self.inst
        lo, hi = inst.indptr[i], inst.indptr[i + 1]
        if self.served[lo:hi].any() or self.assign[i] >= 0:
            raise ValueError(f"flow {i} is not fully unicast")
        for p in range(lo, hi):
            h = inst.indices[p]
            self.served[p] = True
            self.C[g, h] += 1
            if self.C[g, h] == 1:
                self.U[g] += 1
        self.used -= float(inst.lam[i]) * (hi - lo)
        self.served_count[i] = hi - lo
        self.assign[i] = g
        self.R[g] += inst.lam[i]


def _checked_move(state: HybridState, kind: str, c: int) -> HybridState:
    _, bw, _ = state.deltas(kind, c, c + 1)
    if not state.fits(bw[c]):
        raise BudgetExceeded(
            f"{kind} {c} needs {bw[c]:.6g} unicast bandwidth; "
            f"{state.cap - state.used:.6g} of {state.cap:.6g} left")
    new = state.copy()
    new.apply(kind, c)
    return new


def move_flow_to_unicast(state: HybridState, i: int) -> HybridState:
    """Copy of ``state`` with every remaining multicast subscriber of flow ``i`` on unicast."""
    return _checked_move(state, "flow", i)


def move_user_to_unicast(state: HybridState, h: int) -> HybridState:
    """Copy of ``state`` with user ``h`` served entirely by unicast and in no group."""
    return _checked_move(state, "user", h)


# re-solving -------------------------------------------------------------------------

def _resolve(state: HybridState, solver: SolverConfig) -> HybridState:
    """Re-run step one on the still-multicast pairs; keep it only if cheaper."""
    reduced = state.inst.restricted(state.served)
    sol = solve(reduced, solver)
    cand = HybridState.from_solution(state.inst, sol, state.served, cap=state.cap)
    if cand.cost() < state.cost() - state.tol():
        return cand
    return state


def _as_state(inst, sol, cfg: HeuristicConfig) -> HybridState:
    return HybridState.from_solution(inst, sol, budget_fraction=cfg.budget_fraction)


@dataclass
class _Run:
    state: HybridState
    moves: int = 0
    history: list = field(default_factory=list)


def _sorted_run(state: HybridState, cfg: HeuristicConfig) -> _Run:
    inst = state.inst
    kind = "flow" if cfg.heuristic.endswith("_flow") else "user"
    if kind == "flow":
        weight = inst.lam * inst.flow_degree
    else:
        weight = np.array([user_weight(inst, h) for h in range(inst.m)])
    key = weight if cfg.heuristic.startswith("lightest") else -weight
    order = np.argsort(key, kind="stable")
    run = _Run(state, history=[state.cost()])
    for c in order.tolist():
        s = run.state
        delta, bw, cnt = s.deltas(kind, c, c + 1)
        if cnt[c] == 0:
            continue
        if s.fits(bw[c]) and (cfg.unconditional or delta[c] < -s.tol()):
            s.apply(kind, c)
            run.moves += 1
            if cfg.iterative:
                run.state = _resolve(s, cfg.solver)
            run.history.append(run.state.cost())
        elif not cfg.scan_past:
            break
    return run


def _greedy_run(state: HybridState, cfg: HeuristicConfig) -> _Run:
    kind = cfg.heuristic.split("_")[1]
    if kind == "pair" and state.inst.nnz > GREEDY_PAIR_LIMIT:
        raise ValueError(f"greedy_pair is limited to |W| <= {GREEDY_PAIR_LIMIT}")
    run = _Run(state, history=[state.cost()])
    while True:
        s = run.state
        delta, bw, cnt = s.deltas(kind)
        ok = (cnt > 0) & s.fits(bw)
        if not ok.any():
            break
        d = np.where(ok, delta, np.inf)
        c = int(np.argmin(d))
        if not (d[c] < -s.tol() or cfg.force_budget):
            break
        s.apply(kind, c)
        run.moves += 1
        if cfg.iterative:
            run.state = _resolve(s, cfg.solver)
        run.history.append(run.state.cost())
    return run


def sorted_removal(inst: ProblemInstance, sol, cfg: HeuristicConfig) -> HybridSolution:
    """Walk flows or users by weight and move each to unicast while that lowers the cost.

    Stops at the first candidate that does not improve or does not fit the
    budget (``scan_past`` skips it instead; ``unconditional`` ignores cost).
    """
    if cfg.heuristic not in SORTED_HEURISTICS:
        raise ValueError(f"{cfg.heuristic!r} is not a sorted heuristic")
    return _sorted_run(_as_state(inst, sol, cfg), cfg).state.to_solution()


def greedy_removal(inst: ProblemInstance, sol, cfg: HeuristicConfig) -> HybridSolution:
    """Repeatedly commit the flow, user or pair move with the most negative cost change."""
    if cfg.heuristic not in GREEDY_HEURISTICS:
        raise ValueError(f"{cfg.heuristic!r} is not a greedy heuristic")
    return _greedy_run(_as_state(inst, sol, cfg), cfg).state.to_solution()


def _unicast_first_run(inst: ProblemInstance, cfg: HeuristicConfig) -> _Run:
    state = HybridState.all_unicast(inst, budget_fraction=cfg.budget_fraction)
    w = inst.weights
    eligible = inst.flow_degree > 0
    run = _Run(state, history=[state.cost()])
    while eligible.any():
        best_d, best_g = _kernels.merge_deltas(inst.indptr, inst.indices, inst.lam, eligible,
                                                state.C, state.R, state.U,
                                                w.w1, w.w2, w.unicast_pair)
        i = int(np.argmin(best_d))
        # over budget: keep merging the cheapest flows even if cost rises
        if not (best_d[i] < -state.tol() or not state.fits(0.0)):
            break
        state.merge_flow(i, int(best_g[i]))
        eligible[i] = False
        run.moves += 1
        run.history.append(state.cost())
    return run


def unicast_first(inst: ProblemInstance, cfg: HeuristicConfig | None = None) -> HybridSolution:
    """Start from all-unicast and merge whole flows into groups while that lowers the cost.

    If the result still exceeds the unicast budget, merging continues with
    the least harmful flows until it fits.
    """
    cfg = cfg or HeuristicConfig(heuristic=None, direction="unicast_first")
    return _unicast_first_run(inst, cfg).state.to_solution()


@dataclass
class PipelineResult:
    solution: HybridSolution
    report: CostReport
    moves: int
    unicast_used: float
    unicast_cap: float
    unicast_fraction: float
    history: list = field(default_factory=list)


def run_pipeline(inst: ProblemInstance, cfg: HeuristicConfig | None = None, *,
                 check: bool = True) -> PipelineResult:
    """Solve the hybrid problem end to end.

    Multicast-first runs the step-one solver and then the configured heuristic
    (``heuristic=None`` stops after step one).  Unless moves are unconditional,
    the all-unicast solution is returned instead when it is cheaper and fits
    the budget.
    """
    cfg = cfg or HeuristicConfig()
    if cfg.direction == "unicast_first":
        run = _unicast_first_run(inst, cfg)
    else:
        state = _as_state(inst, solve(inst, cfg.solver), cfg)
        if cfg.heuristic is None:
            run = _Run(state, history=[state.cost()])
        elif cfg.heuristic in SORTED_HEURISTICS:
            run = _sorted_run(state, cfg)
        else:
            run = _greedy_run(state, cfg)
    state = run.state
    sol = state.to_solution()
    report = hybrid_cost(inst, sol)
    used, frac = state.used, state.unicast_fraction
    if not (cfg.unconditional or cfg.force_budget) and state.fits(state.demand - state.used):
        uni = all_unicast_solution(inst)
        uni_report = hybrid_cost(inst, uni)
        if uni_report.total < report.total:
            sol, report = uni, uni_report
            used, frac = state.demand, 1.0 if state.demand > 0 else 0.0
    if check:
        feas = is_feasible(inst, sol)
        if not feas:
            raise AssertionError(f"infeasible pipeline output, uncovered {feas.uncovered[:5]}")
        if used > state.cap + 1e-9 * max(1.0, state.cap):
            raise AssertionError("unicast budget exceeded")
    return PipelineResult(sol, report, run.moves, used, state.cap, frac, run.history)

