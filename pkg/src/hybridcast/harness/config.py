"""Line-oriented experiment configuration.

Example::

    # market instances at desk scale
    workload = market
    n_symbols = 2000
    m_users = 100
    combo = kmeans, greedy_flow, noniter, mfirst
    combo = kmeans, greedy_user, noniter, mfirst
    budgets = 0, 0.02, 0.1
    seeds = 0-4
    csv = results.csv

``workload`` is ``random``, ``market``, ``trace`` or ``file`` (with ``file =
path``).  Any other key naming a field of the generator spec sets that field.
``scaling = 1-6`` replaces the instance by the market scaling points.  A combo
is ``algo, heuristic, mode, direction`` followed by optional flags
``unconditional``, ``force_budget`` and ``scan_past``; ``heuristic`` may be
``none`` for step one only.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..channelizers import CLI_ALGORITHMS, SolverConfig
from ..hybrid import HeuristicConfig
from ..workloads import MarketSpec, RandomSpec, TraceSpec

__all__ = ["ConfigError", "Combo", "ExperimentConfig", "parse_config", "load_config",
           "parse_int_list", "WORKLOAD_SPECS"]

WORKLOAD_SPECS = {"random": RandomSpec, "market": MarketSpec, "trace": TraceSpec}
COMBO_FLAGS = ("unconditional", "force_budget", "scan_past")


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None, source: str = "<config>"):
        self.msg, self.line = msg, line
        super().__init__(f"{source}:{line}: {msg}" if line else f"{source}: {msg}")


@dataclass(frozen=True)
class Combo:
    algo: str
    heuristic: str | None
    mode: str = "non_iterative"
    direction: str = "multicast_first"
    unconditional: bool = False
    force_budget: bool = False
    scan_past: bool = False

    @classmethod
    def parse(cls, text: str) -> "Combo":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) < 4:
            raise ValueError("combo needs algo, heuristic, mode, direction")
        algo, heur, mode, direction, *flags = parts
        bad = [f for f in flags if f not in COMBO_FLAGS]
        if bad:
            raise ValueError(f"unknown combo flag(s) {bad}")
        combo = cls(algo, None if heur in ("", "none") else heur, mode, direction,
                    *(f in flags for f in COMBO_FLAGS))
        combo.heuristic_config(0.0, SolverConfig(combo.algo))  # validates names
        return combo

    def heuristic_config(self, budget: float, solver: SolverConfig) -> HeuristicConfig:
        return HeuristicConfig(self.heuristic, self.mode, self.direction, budget, solver,
                               self.unconditional, self.force_budget, self.scan_past)

    @property
    def algo_name(self) -> str:
        return CLI_ALGORITHMS.get(self.algo, self.algo)


@dataclass
class ExperimentConfig:
    workload: str = "market"
    params: dict = field(default_factory=dict)
    file: str | None = None
    scaling: list[int] = field(default_factory=list)
    combos: list[Combo] = field(default_factory=list)
    budgets: list[float] = field(default_factory=lambda: [1.0])
    seeds: list[int] = field(default_factory=lambda: [0])
    max_iterations: int = 5
    restarts: int = 1
    csv: str | None = None
    chart: str | None = None
    chart_kind: str = "budget"

    def validate(self):
        if self.workload not in (*WORKLOAD_SPECS, "file"):
            raise ConfigError(f"unknown workload {self.workload!r}")
        if self.workload == "file" and not self.file:
            raise ConfigError("workload=file needs file=<path>")
        if self.scaling and self.workload != "market":
            raise ConfigError("scaling points use the market workload")
        if not self.combos:
            raise ConfigError("at least one combo= line is required")
        if not self.seeds or not self.budgets:
            raise ConfigError("seeds and budgets must be non-empty")
        bad = [b for b in self.budgets if not 0.0 <= b <= 1.0]
        if bad:
            raise ConfigError(f"budgets outside [0, 1]: {bad}")
        if self.chart_kind not in ("budget", "scaling", "algo-compare"):
            raise ConfigError(f"unknown chart kind {self.chart_kind!r}")
        return self

    def workload_spec(self, seed: int, point: int | None = None):
        """Generator spec for ``seed`` (and scaling ``point``), or None for file workloads."""
        from ..workloads import scaling_point
        if self.workload == "file":
            return None
        if point is not None:
            return scaling_point(point, seed, **self.params)
        return WORKLOAD_SPECS[self.workload](seed=seed, **self.params)

    def solver(self, combo: Combo, seed: int) -> SolverConfig:
        return SolverConfig(combo.algo, self.max_iterations, self.restarts, seed)


def parse_int_list(text: str) -> list[int]:
    """``"0-3, 7"`` -> ``[0, 1, 2, 3, 7]``."""
    out = []
    for tok in text.replace(" ", "").split(","):
        if not tok:
            continue
        lo, sep, hi = tok.partition("-") if not tok.startswith("-") else (tok, "", "")
        if sep:
            a, b = int(lo), int(hi)
            if b < a:
                raise ValueError(f"empty range {tok!r}")
            out.extend(range(a, b + 1))
        else:
            out.append(int(tok))
    return out


def _coerce(spec_cls, key: str, value: str):
    fields = {f.name: f for f in dataclasses.fields(spec_cls)}
    if key not in fields or key == "seed":
        raise KeyError(key)
    default = fields[key].default
    if isinstance(default, bool):
        low = value.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"expected a boolean for {key}")
        return low in ("true", "1", "yes")
    if isinstance(default, int):
        return int(value)
    return float(value)


def parse_config(text: str, source: str = "<config>",
                 base: str | os.PathLike | None = None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    raw_params: list[tuple[int, str, str]] = []
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        key, sep, value = s.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError("expected key = value", no, source)
        try:
            if key == "workload":
                cfg.workload = value
            elif key == "file":
                p = Path(value)
                cfg.file = str(p if p.is_absolute() or base is None else Path(base) / p)
            elif key == "combo":
                cfg.combos.append(Combo.parse(value))
            elif key == "budgets":
                cfg.budgets = [float(t) for t in value.split(",") if t.strip()]
            elif key == "seeds":
                cfg.seeds = parse_int_list(value)
            elif key == "scaling":
                cfg.scaling = parse_int_list(value)
            elif key in ("max_iterations", "restarts"):
                setattr(cfg, key, int(value))
            elif key in ("csv", "chart", "chart_kind"):
                setattr(cfg, key, value)
            else:
                raw_params.append((no, key, value))
        except ValueError as e:
            raise ConfigError(f"{key}: {e}", no, source) from None
    if cfg.workload in WORKLOAD_SPECS:
        spec_cls = WORKLOAD_SPECS[cfg.workload]
        for no, key, value in raw_params:
            try:
                cfg.params[key] = _coerce(spec_cls, key, value)
            except KeyError:
                raise ConfigError(f"unknown key {key!r} for workload {cfg.workload}",
                                  no, source) from None
            except ValueError as e:
                raise ConfigError(f"{key}: {e}", no, source) from None
    elif raw_params:
        no, key, _ = raw_params[0]
        raise ConfigError(f"unknown key {key!r}", no, source)
    try:
        cfg.validate()
        for seed in cfg.seeds[:1]:
            for point in cfg.scaling[:1] or [None]:
                cfg.workload_spec(seed, point)
    except ConfigError as e:
        raise ConfigError(e.msg, None, source) from None
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e), None, source) from None
    return cfg


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    p = Path(path)
    return parse_config(p.read_text(encoding="utf-8"), str(p), base=p.parent)

