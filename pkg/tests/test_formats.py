import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridcast.formats import (FormatError, dump_instance, dump_solution, load_instance,
                                parse_instance, parse_solution, save_instance, save_solution)
from hybridcast.model import CostWeights, HybridSolution, ProblemInstance

MINIMAL = "CHAN1\n1 1 1\nweights 1 1 1\nrates 1\nflow 0: 0\n"


def test_minimal_file_parses():
    inst = parse_instance(MINIMAL)
    assert (inst.n, inst.m, inst.k, inst.nnz) == (1, 1, 1, 1)


def test_comments_and_blank_lines():
    text = "# header comment\nCHAN1\n\n2 3 1\n# w\nweights 1 2 0.5\nrates 1.5 0\nflow 1:\nflow 0: 2 0\n"
    inst = parse_instance(text)
    assert inst.weights == CostWeights(1, 2, 0.5)
    assert inst.subscribers(0).tolist() == [0, 2]
    assert inst.subscribers(1).tolist() == []


@pytest.mark.parametrize("text, line, needle", [
    ("CHAN2\n1 1 1\nweights 1 1 1\nrates 1\nflow 0: 0\n", 1, "header"),
    ("CHAN1\n1 1 1\nweights 1 1 1\nrates 1\nflow 0: 1\n", 5, "user index 1 out of range"),
    ("CHAN1\n2 1 1\nweights 1 1 1\nrates 1\nflow 0: 0\n", 4, "rate count mismatch"),
    ("CHAN1\n1 1 1\nweights 1 1 1\nrates 1\nflow 0: 0\nflow 0: 0\n", 6, "duplicate flow"),
    ("CHAN1\n1 1 1\nweights 1 1\nrates 1\nflow 0: 0\n", 3, "weights"),
    ("CHAN1\n1 x 1\n", 2, "integer"),
    ("CHAN1\n1 1 1\nweights 1 1 1\nrates a\n", 4, "decimal"),
    ("CHAN1\n1 1 1\nweights 1 1 1\nrates 1\nflow 3: 0\n", 5, "out of range"),
    ("CHAN1\n1 1 1\nweights 1 1 1\nrates 1\nflow 0: 0 0\n", 5, "duplicate user"),
])
def test_errors_name_the_line(text, line, needle):
    with pytest.raises(FormatError) as e:
        parse_instance(text, source="x.chan")
    assert e.value.line == line
    assert f"x.chan:{line}:" in str(e.value)
    assert needle in str(e.value)


def test_missing_flow_lines():
    with pytest.raises(FormatError, match="missing flow"):
        parse_instance("CHAN1\n2 1 1\nweights 1 1 1\nrates 1 1\nflow 0: 0\n")


def test_truncated_file():
    with pytest.raises(FormatError, match="unexpected end"):
        parse_instance("CHAN1\n1 1 1\n")


@st.composite
def instances(draw):
    n, m, k = draw(st.integers(1, 7)), draw(st.integers(1, 7)), draw(st.integers(1, 4))
    rows = [draw(st.lists(st.integers(0, m - 1), unique=True, max_size=m)) for _ in range(n)]
    lam = draw(st.lists(st.floats(1e-6, 1e6, allow_nan=False), min_size=n, max_size=n))
    w = CostWeights(draw(st.floats(0.01, 10)), draw(st.floats(0.01, 10)), draw(st.floats(0, 10)))
    return ProblemInstance.from_rows(rows, lam, k, m, w)


@settings(max_examples=150, deadline=None)
@given(instances())
def test_instance_round_trip(inst):
    back = parse_instance(dump_instance(inst))
    assert back == inst
    assert np.array_equal(back.lam, inst.lam)  # bit-exact rates


def test_round_trip_via_files(tmp_path):
    inst = ProblemInstance.from_rows([[0, 1], [], [1]], [0.1, 2.0, 1 / 3], 2, 2)
    save_instance(inst, tmp_path / "a.chan")
    assert load_instance(tmp_path / "a.chan") == inst


def test_solution_round_trip(tmp_path):
    sol = HybridSolution([[1], [], [0, 1]], [[0, 2], [1]], {(1, 0), (1, 2)})
    assert parse_solution(dump_solution(sol)) == sol
    save_solution(sol, tmp_path / "s.sol")
    from hybridcast.formats import load_solution
    assert load_solution(tmp_path / "s.sol") == sol


@pytest.mark.parametrize("text, needle", [
    ("CHANSOL9\n", "header"),
    ("CHANSOL1\nx 0: 0\nx 0: 1\n", "duplicate"),
    ("CHANSOL1\nx 1: 0\n", "cover indices"),
    ("CHANSOL1\nz 0: 1\n", "unknown line"),
    ("CHANSOL1\nt 0\n", "t <flow> <user>"),
])
def test_solution_errors(text, needle):
    with pytest.raises(FormatError, match=needle):
        parse_solution(text)
