"""Line-oriented text formats: CHAN1 instances and CHANSOL1 solutions.

CHAN1::

    CHAN1
    n m k
    weights w1 w2 w3
    rates r_0 ... r_{n-1}
    flow 0: <user> <user> ...
    ...

CHANSOL1::

    CHANSOL1
    x <i>: <group> ...       one line per flow
    y <j>: <user> ...        one line per group
    t <i> <h>                one line per unicast pair

Lines starting with ``#`` and blank lines are ignored.
"""
from __future__ import annotations

import os
from pathlib import Path

from .model import CostWeights, HybridSolution, InstanceError, ProblemInstance

__all__ = ["FormatError", "load_instance", "save_instance", "parse_instance", "dump_instance",
           "load_solution", "save_solution", "parse_solution", "dump_solution"]


class FormatError(ValueError):
    def __init__(self, msg: str, line: int | None = None, source: str = "<string>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + msg)


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s and not s.startswith("#"):
            yield no, s


def _ints(tokens, no, source, what):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise FormatError(f"expected integer {what}", no, source) from None


def _indexed(line: str, tag: str, no: int, source: str) -> tuple[int, list[str]]:
    """Split ``<tag> <i>: a b c`` into ``(i, [a, b, c])``."""
    head, sep, rest = line.partition(":")
    parts = head.split()
    if not sep or len(parts) != 2 or parts[0] != tag:
        raise FormatError(f"expected '{tag} <index>: ...'", no, source)
    try:
        return int(parts[1]), rest.split()
    except ValueError:
        raise FormatError(f"bad {tag} index {parts[1]!r}", no, source) from None


def parse_instance(text: str, source: str = "<string>") -> ProblemInstance:
    it = _lines(text)

    def need(what):
        try:
            return next(it)
        except StopIteration:
            raise FormatError(f"unexpected end of file, expected {what}", None, source) from None

    no, s = need("header")
    if s != "CHAN1":
        raise FormatError(f"bad header {s!r}, expected CHAN1", no, source)
    no, s = need("'n m k'")
    dims = _ints(s.split(), no, source, "dimension")
    if len(dims) != 3:
        raise FormatError("expected 'n m k'", no, source)
    n, m, k = dims
    if min(dims) < 1:
        raise FormatError("n, m, k must be >= 1", no, source)

    no, s = need("weights line")
    tok = s.split()
    if tok[:1] != ["weights"] or len(tok) != 4:
        raise FormatError("expected 'weights w1 w2 w3'", no, source)
    try:
        weights = CostWeights(*map(float, tok[1:]))
    except (ValueError, InstanceError) as e:
        raise FormatError(f"bad weights: {e}", no, source) from None

    no, s = need("rates line")
    tok = s.split()
    if tok[:1] != ["rates"]:
        raise FormatError("expected 'rates ...'", no, source)
    if len(tok) - 1 != n:
        raise FormatError(f"rate count mismatch: expected {n}, got {len(tok) - 1}", no, source)
    try:
        lam = [float(t) for t in tok[1:]]
    except ValueError:
        raise FormatError("rates must be decimals", no, source) from None

    rows: list[list[int] | None] = [None] * n
    for no, s in it:
        i, tok = _indexed(s, "flow", no, source)
        if not 0 <= i < n:
            raise FormatError(f"flow index {i} out of range [0,{n})", no, source)
        if rows[i] is not None:
            raise FormatError(f"duplicate flow {i}", no, source)
        users = _ints(tok, no, source, "user index")
        for h in users:
            if not 0 <= h < m:
                raise FormatError(f"user index {h} out of range [0,{m})", no, source)
        if len(set(users)) != len(users):
            raise FormatError(f"duplicate user in flow {i}", no, source)
        rows[i] = users
    missing = [i for i, r in enumerate(rows) if r is None]
    if missing:
        raise FormatError(f"missing flow lines for {missing[:5]}", None, source)
    try:
        return ProblemInstance.from_rows(rows, lam, k, m, weights)
    except InstanceError as e:
        raise FormatError(str(e), None, source) from None


def dump_instance(inst: ProblemInstance) -> str:
    w = inst.weights
    out = ["CHAN1", f"{inst.n} {inst.m} {inst.k}",
           f"weights {w.w1!r} {w.w2!r} {w.w3!r}",
           "rates " + " ".join(repr(float(x)) for x in inst.lam)]
    for i in range(inst.n):
        users = " ".join(map(str, inst.subscribers(i).tolist()))
        out.append(f"flow {i}: {users}".rstrip())
    return "\n".join(out) + "\n"


def load_instance(path: str | os.PathLike) -> ProblemInstance:
    return parse_instance(Path(path).read_text(encoding="utf-8"), source=str(path))


def save_instance(inst: ProblemInstance, path: str | os.PathLike) -> None:
    Path(path).write_text(dump_instance(inst), encoding="utf-8")


def parse_solution(text: str, source: str = "<string>") -> HybridSolution:
    it = _lines(text)
    first = next(it, None)
    if first is None or first[1] != "CHANSOL1":
        raise FormatError("bad header, expected CHANSOL1", first and first[0], source)
    xs: dict[int, list[int]] = {}
    ys: dict[int, list[int]] = {}
    T = set()
    for no, s in it:
        tag = s.split(None, 1)[0]
        if tag == "t":
            tok = s.split()
            if len(tok) != 3:
                raise FormatError("expected 't <flow> <user>'", no, source)
            i, h = _ints(tok[1:], no, source, "index")
            T.add((i, h))
            continue
        if tag not in ("x", "y"):
            raise FormatError(f"unknown line type {tag!r}", no, source)
        idx, tok = _indexed(s, tag, no, source)
        table = xs if tag == "x" else ys
        if idx < 0 or idx in table:
            raise FormatError(f"bad or duplicate {tag} index {idx}", no, source)
        table[idx] = _ints(tok, no, source, "index")
    for tag, table in (("x", xs), ("y", ys)):
        if sorted(table) != list(range(len(table))):
            raise FormatError(f"{tag} lines must cover indices 0..{len(table) - 1}", None, source)
    return HybridSolution(tuple(xs[i] for i in range(len(xs))),
                          tuple(ys[j] for j in range(len(ys))), frozenset(T))


def dump_solution(sol: HybridSolution) -> str:
    out = ["CHANSOL1"]
    out += [f"x {i}: {' '.join(map(str, r))}".rstrip() for i, r in enumerate(sol.X)]
    out += [f"y {j}: {' '.join(map(str, r))}".rstrip() for j, r in enumerate(sol.Y)]
    out += [f"t {i} {h}" for i, h in sorted(sol.T)]
    return "\n".join(out) + "\n"


def load_solution(path: str | os.PathLike) -> HybridSolution:
    return parse_solution(Path(path).read_text(encoding="utf-8"), source=str(path))


def save_solution(sol: HybridSolution, path: str | os.PathLike) -> None:
    Path(path).write_text(dump_solution(sol), encoding="utf-8")
