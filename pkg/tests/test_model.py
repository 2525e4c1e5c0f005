import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridcast.model import (BRUTE_FORCE_LIMIT, ChannelizationSolution, CostWeights,
                              HybridSolution, InstanceError, ProblemInstance,
                              SearchSpaceTooLarge, StructureError, UnsatisfiableError,
                              all_unicast_cost, all_unicast_solution, brute_force_optimum,
                              hybrid_cost, is_feasible, minimal_user_membership, multicast_cost,
                              perfect_multicast_cost, redundant_pairs)

from oracles import covered, dense, literal_optimum, perfect_cost, triple_loop_cost, \
    x_matrix, y_matrix


def inst_of(rows, lam, k, m=None, w=(1, 1, 1)):
    return ProblemInstance.from_rows(rows, lam, k, m, CostWeights(*w))


# instance construction ----------------------------------------------------------

def test_both_orientations_agree():
    inst = inst_of([[0, 2], [], [1, 2]], [1, 2, 3], 2, 3)
    assert inst.nnz == 4
    assert inst.subscribers(0).tolist() == [0, 2]
    assert inst.subscriptions(2).tolist() == [0, 2]
    assert inst.flow_degree.tolist() == [2, 0, 2]
    assert inst.user_degree.tolist() == [1, 1, 2]
    for q in range(inst.nnz):
        p = inst.user_pos[q]
        assert inst.pair_flow[p] == inst.user_flows[q]
    assert inst.pair_set() == {(0, 0), (0, 2), (2, 1), (2, 2)}


def test_constructors_equivalent():
    rows = [[0, 1], [1]]
    a = inst_of(rows, [1, 2], 1)
    b = ProblemInstance.from_pairs(2, 2, 1, [(1, 1), (0, 1), (0, 0)], [1, 2])
    c = ProblemInstance.from_dense([[1, 1], [0, 1]], [1, 2], 1)
    assert a == b == c
    assert (a.dense() == np.array([[1, 1], [0, 1]], dtype=bool)).all()


@pytest.mark.parametrize("kwargs", [
    dict(rows=[[0]], lam=[1], k=0),
    dict(rows=[[0]], lam=[-1], k=1),
    dict(rows=[[0]], lam=[0], k=1),
    dict(rows=[[0]], lam=[float("nan")], k=1),
    dict(rows=[[3]], lam=[1], k=1, m=2),
    dict(rows=[[0]], lam=[1, 2], k=1),
])
def test_invalid_instances(kwargs):
    with pytest.raises(InstanceError):
        ProblemInstance.from_rows(kwargs["rows"], kwargs["lam"], kwargs["k"], kwargs.get("m"))


def test_invalid_weights():
    for w in [(0, 1, 1), (1, 0, 1), (1, 1, -0.5)]:
        with pytest.raises(InstanceError):
            CostWeights(*w)
    assert CostWeights(2, 3, 0.5).unicast_pair == 2.5


def test_instance_arrays_are_read_only():
    inst = inst_of([[0]], [1], 1)
    with pytest.raises(ValueError):
        inst.lam[0] = 5


def test_restricted_keeps_only_masked_pairs():
    inst = inst_of([[0, 1], [1, 2]], [1, 1], 2, 3)
    keep = np.array([True, False, False, True])
    sub = inst.restricted(keep)
    assert sub.pair_set() == {(0, 0), (1, 2)}
    assert sub.n == inst.n and sub.m == inst.m


# costs ------------------------------------------------------------------------------

def test_full_clique_cost():
    inst = inst_of([[0, 1], [0, 1]], [1, 1], 1)
    sol = ChannelizationSolution([[0], [0]], [[0, 1]])
    assert multicast_cost(inst, sol) == 6
    rep = hybrid_cost(inst, HybridSolution.from_channelization(sol))
    assert (rep.reception, rep.sender, rep.total) == (4, 2, 6)


def test_single_pair_cost():
    inst = inst_of([[0]], [5], 1)
    assert multicast_cost(inst, ChannelizationSolution([[0]], [[0]])) == 10


def test_pure_unicast_arithmetic():
    rows = [[0, 1, 2, 3, 4], [0, 1, 2, 3, 4]]
    inst = inst_of(rows, [1, 1], 1, 5)
    rep = hybrid_cost(inst, all_unicast_solution(inst))
    assert rep.unicast == 20 and rep.total == 20
    assert all_unicast_cost(inst) == 20


def test_empty_t_equals_multicast_cost():
    inst = inst_of([[0, 1], [1]], [2, 3], 2)
    sol = ChannelizationSolution([[0], [1]], [[0, 1], [1]])
    assert hybrid_cost(inst, HybridSolution.from_channelization(sol)).total \
        == multicast_cost(inst, sol)


def test_perfect_multicast_examples():
    inst = inst_of([[0, 1, 2], [0]], [1, 2], 1, 3)
    assert perfect_multicast_cost(inst) == 8
    empty = inst_of([[], []], [1, 1], 1, 3)
    assert perfect_multicast_cost(empty) == 0
    assert all_unicast_cost(empty) == 0
    rep = hybrid_cost(empty, HybridSolution([[], []], [[]], frozenset()))
    assert rep.pct_of_perfect is None
    assert "undefined" in rep.format()


def test_all_unicast_seven_pairs():
    inst = inst_of([[0, 1, 2], [0, 1], [2], [0]], [1, 1, 1, 1], 2, 3)
    assert inst.nnz == 7 and all_unicast_cost(inst) == 14


def test_structural_errors():
    inst = inst_of([[0]], [1], 1)
    with pytest.raises(StructureError):
        multicast_cost(inst, ChannelizationSolution([[1]], [[0]]))
    with pytest.raises(StructureError):
        multicast_cost(inst, ChannelizationSolution([[0]], [[3]]))
    with pytest.raises(StructureError):
        hybrid_cost(inst, HybridSolution([[0]], [[0]], {(0, 5)}))
    with pytest.raises(StructureError):
        multicast_cost(inst, ChannelizationSolution([[0], [0]], [[0]]))


@st.composite
def instances_and_solutions(draw, max_dim=8, one_hot=False):
    n = draw(st.integers(1, max_dim))
    m = draw(st.integers(1, max_dim))
    k = draw(st.integers(1, max_dim))
    rows = [draw(st.lists(st.integers(0, m - 1), unique=True, max_size=m)) for _ in range(n)]
    lam = draw(st.lists(st.floats(0, 10, allow_nan=False), min_size=n, max_size=n))
    if not any(x > 0 for x in lam):
        lam[0] = 1.0
    w = (draw(st.floats(0.1, 3)), draw(st.floats(0.1, 3)), draw(st.floats(0, 3)))
    if one_hot:
        X = [draw(st.lists(st.integers(0, k - 1), max_size=1)) for _ in range(n)]
    else:
        X = [draw(st.lists(st.integers(0, k - 1), unique=True, max_size=k)) for _ in range(n)]
    Y = [draw(st.lists(st.integers(0, m - 1), unique=True, max_size=m)) for _ in range(k)]
    pairs = [(i, h) for i, r in enumerate(rows) for h in r]
    T = draw(st.sets(st.sampled_from(pairs))) if pairs else set()
    return inst_of(rows, lam, k, m, w), X, Y, T, rows


@settings(max_examples=300, deadline=None)
@given(instances_and_solutions())
def test_hybrid_cost_matches_triple_loop(data):
    inst, X, Y, T, rows = data
    w = inst.weights
    ref = triple_loop_cost(inst.lam, x_matrix(X, inst.n, inst.k), y_matrix(Y, inst.k, inst.m),
                           T, w.w1, w.w2, w.w3)
    rep = hybrid_cost(inst, HybridSolution(X, Y, T))
    for got, want in zip((rep.reception, rep.sender, rep.unicast), ref):
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)
    assert rep.total == pytest.approx(sum(ref), rel=1e-9, abs=1e-12)
    assert min(rep.reception, rep.sender, rep.unicast) >= 0


@settings(max_examples=300, deadline=None)
@given(instances_and_solutions())
def test_feasibility_matches_definition(data):
    inst, X, Y, T, rows = data
    Wm = dense(rows, inst.n, inst.m)
    ref = covered(Wm, x_matrix(X, inst.n, inst.k), y_matrix(Y, inst.k, inst.m), T)
    f = is_feasible(inst, HybridSolution(X, Y, T))
    assert sorted(f.uncovered) == sorted(ref)
    assert bool(f) == (not ref)


def test_feasibility_examples():
    inst = inst_of([[0]], [1], 1)
    assert is_feasible(inst, all_unicast_solution(inst))
    f = is_feasible(inst, HybridSolution([[]], [[]], frozenset()))
    assert not f and f.uncovered == [(0, 0)]


def test_redundant_pairs_are_linted():
    inst = inst_of([[0]], [1], 1)
    sol = HybridSolution([[0]], [[0]], {(0, 0)})
    assert is_feasible(inst, sol)
    assert redundant_pairs(inst, sol) == [(0, 0)]


@settings(max_examples=300, deadline=None)
@given(instances_and_solutions(max_dim=6), st.floats(1.0, 3.0))
def test_feasible_cost_at_least_perfect(data, w3):
    inst, X, Y, T, rows = data
    inst = inst.replace(weights=CostWeights(1.0, 1.0, w3))
    Wm = dense(rows, inst.n, inst.m)
    assert perfect_multicast_cost(inst) == pytest.approx(perfect_cost(Wm, inst.lam))
    for cand in (HybridSolution(X, Y, T),
                 HybridSolution(X, minimal_user_membership(inst, X, T), T)
                 if _satisfiable(inst, X, T) else None):
        if cand is not None and is_feasible(inst, cand):
            assert hybrid_cost(inst, cand).total >= perfect_multicast_cost(inst) * (1 - 1e-12)


def test_perfect_bound_needs_w3_at_least_one():
    # one pair: unicast costs 2 * w3, perfect multicast costs 2
    inst = inst_of([[0]], [1], 1, w=(1, 1, 0.9))
    assert all_unicast_cost(inst) < perfect_multicast_cost(inst)


def _satisfiable(inst, X, T):
    return all((i, h) in T or X[i] for i, h in inst.pairs())


@settings(max_examples=200, deadline=None)
@given(instances_and_solutions(max_dim=6))
def test_all_unicast_consistency(data):
    inst = data[0]
    rep = hybrid_cost(inst, HybridSolution([[]] * inst.n, [[]] * inst.k, inst.pair_set()))
    assert rep.total == all_unicast_cost(inst)
    w = inst.weights
    assert all_unicast_cost(inst) == pytest.approx(
        w.w3 * (w.w1 + w.w2) * sum(inst.lam[i] for i, _ in inst.pairs()))


# minimal membership -------------------------------------------------------------------

def test_min_membership_prefers_lighter_group():
    # flow 0 in groups {0, 1}; group 0 carries rate 10, group 1 rate 3
    inst = inst_of([[0], [], []], [1, 9, 2], 2, 1)
    X = [[0, 1], [0], [1]]
    Y = minimal_user_membership(inst, X)
    assert Y == ((), (0,))


def test_min_membership_tie_breaks_low_index():
    inst = inst_of([[0]], [1], 3)
    assert minimal_user_membership(inst, [[1, 2]]) == ((), (0,), ())


def test_min_membership_reuses_joined_group():
    # user 0 must join group 0 for flow 0 and then gets flow 1 there too
    inst = inst_of([[0], [0], [1]], [1, 1, 0.5], 2, 2)
    Y = minimal_user_membership(inst, [[0], [0, 1], [1]])
    assert Y == ((0,), (1,))


def test_min_membership_unsatisfiable():
    inst = inst_of([[0], [0, 1]], [1, 1], 1)
    with pytest.raises(UnsatisfiableError) as e:
        minimal_user_membership(inst, [[0], []])
    assert e.value.pairs == [(1, 0), (1, 1)]
    assert minimal_user_membership(inst, [[0], []], {(1, 0), (1, 1)}) == ((0,),)


@settings(max_examples=300, deadline=None)
@given(instances_and_solutions(one_hot=True))
def test_min_membership_one_hot_closed_form(data):
    inst, X, _, T, rows = data
    if not _satisfiable(inst, X, T):
        with pytest.raises(UnsatisfiableError):
            minimal_user_membership(inst, X, T)
        return
    Y = minimal_user_membership(inst, X, T)
    want = [set() for _ in range(inst.k)]
    for i, h in inst.pairs():
        if (i, h) not in T:
            want[X[i][0]].add(h)
    assert [set(r) for r in Y] == want
    assert is_feasible(inst, HybridSolution(X, Y, T))
    assert Y == minimal_user_membership(inst, X, T)


@settings(max_examples=300, deadline=None)
@given(instances_and_solutions())
def test_min_membership_general_is_feasible(data):
    inst, X, _, T, _ = data
    if _satisfiable(inst, X, T):
        assert is_feasible(inst, HybridSolution(X, minimal_user_membership(inst, X, T), T))


# brute force ---------------------------------------------------------------------------

def test_brute_force_single_pair():
    sol, cost = brute_force_optimum(inst_of([[0]], [1], 1))
    assert cost == 2


def test_brute_force_disjoint_interests():
    sol, cost = brute_force_optimum(inst_of([[0], [1]], [1, 1], 1))
    assert cost == 4
    assert sol.T == {(0, 0), (1, 1)}


def test_brute_force_full_relation():
    sol, cost = brute_force_optimum(inst_of([[0, 1], [0, 1]], [1, 1], 1))
    assert cost == 6 and not sol.T


def test_brute_force_guard():
    big = inst_of([[0, 1]] * 12, [1] * 12, 3)
    with pytest.raises(SearchSpaceTooLarge):
        brute_force_optimum(big)
    with pytest.raises(SearchSpaceTooLarge):
        brute_force_optimum(inst_of([[0]], [1], 1), limit=3)
    assert BRUTE_FORCE_LIMIT == 10 ** 7


def test_brute_force_matches_literal_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(60):
        n, m, k = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 3)
        rows = [[h for h in range(m) if rng.random() < 0.5] for _ in range(n)]
        if sum(map(len, rows)) > 7:
            continue
        lam = rng.integers(1, 3, size=n).astype(float)
        w = (1.0, 1.0, float(rng.choice([0.3, 1.0, 2.0])))
        inst = inst_of(rows, lam, int(k), int(m), w)
        sol, cost = brute_force_optimum(inst)
        ref = literal_optimum(dense(rows, n, m), lam, int(k), *w)
        assert cost == pytest.approx(ref, rel=1e-12)
        assert is_feasible(inst, sol)
        assert hybrid_cost(inst, sol).total == pytest.approx(cost)
        assert math.isfinite(cost)
