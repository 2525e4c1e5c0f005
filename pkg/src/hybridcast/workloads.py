"""Instance generators: uniform random, market-distribution and trace-like.

All generators draw from ``numpy.random.Generator(PCG64(seed))`` so a given
spec reproduces the same instance on every run of this package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import load_instance, save_instance  # noqa: F401  (re-exported)
from .model import CostWeights, InstanceError, ProblemInstance

__all__ = ["PRNG_ALGORITHM", "make_rng", "RandomSpec", "MarketSpec", "TraceSpec",
           "gen_random", "gen_market", "gen_trace_like", "generate", "scaling_dims",
           "scaling_point", "load_instance", "save_instance"]

PRNG_ALGORITHM = "PCG64"


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class RandomSpec:
    n: int = 1000
    m: int = 100
    k: int = 10
    density: float = 0.03
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.density <= 1:
            raise InstanceError("density must lie in (0, 1]")


@dataclass(frozen=True)
class MarketSpec:
    n_symbols: int = 10000
    n_markets: int = 10
    m_users: int = 250
    markets_per_user: int = 4
    zipf_exponent: float = 1.0
    within_market_decay: float = 5.0
    heavy_fraction: float = 0.3
    heavy_scale: float = 5.0
    light_scale: float = 0.05
    k: int = 50
    equal_rates: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_markets <= self.n_symbols:
            raise InstanceError("need 1 <= n_markets <= n_symbols")
        if not 1 <= self.markets_per_user <= self.n_markets:
            raise InstanceError("need 1 <= markets_per_user <= n_markets")
        if self.zipf_exponent < 0 or self.within_market_decay < 0:
            raise InstanceError("zipf_exponent and within_market_decay must be >= 0")
        if not 0 <= self.heavy_fraction <= 1:
            raise InstanceError("heavy_fraction must lie in [0, 1]")
        if self.heavy_scale <= 0 or self.light_scale <= 0:
            raise InstanceError("portfolio scales must be > 0")


@dataclass(frozen=True)
class TraceSpec:
    n_topics: int = 6100
    m_processes: int = 79
    n_audience_classes: int = 40
    class_size_decay: float = 0.85
    popularity_exponent: float = 1.0
    k: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_audience_classes <= self.n_topics:
            raise InstanceError("need 1 <= n_audience_classes <= n_topics")
        if self.m_processes < 63 and self.n_audience_classes > 2 ** self.m_processes - 1:
            raise InstanceError("more audience classes than nonempty process subsets")
        if not 0 < self.class_size_decay <= 1:
            raise InstanceError("class_size_decay must lie in (0, 1]")


def gen_random(spec: RandomSpec, weights: CostWeights | None = None) -> ProblemInstance:
    """Each user subscribes to ``round(density * n)`` distinct flows, uniformly."""
    per_user = int(round(spec.density * spec.n))
    if per_user < 1:
        raise InstanceError(f"density * n = {spec.density * spec.n} selects no flows")
    rng = make_rng(spec.seed)
    rows: list[list[int]] = [[] for _ in range(spec.n)]
    for h in range(spec.m):
        for i in rng.choice(spec.n, size=per_user, replace=False):
            rows[i].append(h)
    return ProblemInstance.from_rows(rows, np.ones(spec.n), spec.k, spec.m, weights)


def _market_sizes(n: int, markets: int) -> np.ndarray:
    base, extra = divmod(n, markets)
    return np.array([base + (r < extra) for r in range(markets)], dtype=np.int64)


def gen_market(spec: MarketSpec, weights: CostWeights | None = None) -> ProblemInstance:
    """Market-distribution model.

    Markets are Zipf-popular by rank; within a market of size ``S`` the symbol
    of rank ``r`` has weight ``w = exp(-decay * r / S)``.  Each user picks
    ``markets_per_user`` markets by Zipf-weighted sampling without replacement
    and subscribes to each symbol there independently with probability
    ``min(1, scale * w)``.  A ``heavy_fraction`` of users (traders with big
    portfolios) use ``heavy_scale``; the rest use ``light_scale`` and follow
    only a few, mostly popular, symbols.  A flow's rate is its market weight
    times its normalized within-market weight, rescaled to mean 1.
    """
    rng = make_rng(spec.seed)
    sizes = _market_sizes(spec.n_symbols, spec.n_markets)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    market_w = np.arange(1, spec.n_markets + 1, dtype=float) ** -spec.zipf_exponent
    market_p = market_w / market_w.sum()

    symbol_p = []
    lam = np.empty(spec.n_symbols)
    for r, S in enumerate(sizes):
        w = np.exp(-spec.within_market_decay * np.arange(S) / S)
        symbol_p.append(w)
        lam[offsets[r]:offsets[r + 1]] = market_p[r] * w / w.sum()
    lam = np.ones(spec.n_symbols) if spec.equal_rates else lam / lam.mean()

    rows: list[list[int]] = [[] for _ in range(spec.n_symbols)]
    for h in range(spec.m_users):
        scale = spec.heavy_scale if rng.random() < spec.heavy_fraction else spec.light_scale
        markets = rng.choice(spec.n_markets, size=spec.markets_per_user, replace=False, p=market_p)
        for r in sorted(markets.tolist()):
            p = np.minimum(1.0, scale * symbol_p[r])
            chosen = np.flatnonzero(rng.random(sizes[r]) < p) + offsets[r]
            for i in chosen.tolist():
                rows[i].append(h)
    return ProblemInstance.from_rows(rows, lam, spec.k, spec.m_users, weights)


def _audiences(spec: TraceSpec, rng: np.random.Generator) -> list[np.ndarray]:
    m = spec.m_processes
    seen: set[tuple[int, ...]] = set()
    out = []
    for c in range(spec.n_audience_classes):
        size = max(1, int(np.ceil(m * spec.class_size_decay ** c)))
        tries = 0
        while True:
            aud = tuple(sorted(rng.choice(m, size=size, replace=False).tolist()))
            if aud not in seen:
                break
            tries += 1
            if tries % 50 == 0:
                # this size is saturated; step toward sizes with more subsets
                size = size - 1 if size > m // 2 else size + 1
                size = min(max(size, 1), m)
        seen.add(aud)
        out.append(np.array(aud, dtype=np.int64))
    return out


def gen_trace_like(spec: TraceSpec, weights: CostWeights | None = None) -> ProblemInstance:
    """Synthetic subscription trace where topics fall into shared-audience classes.

    Class ``c`` (0-based rank) has an audience of about
    ``m * class_size_decay**c`` random processes and receives topics with
    probability proportional to ``(c + 1) ** -popularity_exponent``.  Every
    class gets at least one topic.  Rates are all 1.
    """
    rng = make_rng(spec.seed)
    audiences = _audiences(spec, rng)
    C = spec.n_audience_classes
    pop = np.arange(1, C + 1, dtype=float) ** -spec.popularity_exponent
    cls = np.concatenate([np.arange(C), rng.choice(C, size=spec.n_topics - C, p=pop / pop.sum())])
    cls = cls[rng.permutation(spec.n_topics)]
    rows = [audiences[c] for c in cls]
    return ProblemInstance.from_rows(rows, np.ones(spec.n_topics), spec.k, spec.m_processes,
                                     weights)


def generate(spec, weights: CostWeights | None = None) -> ProblemInstance:
    if isinstance(spec, RandomSpec):
        return gen_random(spec, weights)
    if isinstance(spec, MarketSpec):
        return gen_market(spec, weights)
    if isinstance(spec, TraceSpec):
        return gen_trace_like(spec, weights)
    raise TypeError(f"unknown workload spec {type(spec).__name__}")


def scaling_dims(i: int) -> tuple[int, int, int]:
    """(flows, users, groups) of scaling point ``i`` in 1..6."""
    if not 1 <= i <= 6:
        raise ValueError(f"scaling point must be in 1..6, got {i}")
    return 4000 + 1000 * i, 50 * i, 50


def scaling_point(i: int, seed: int = 0, **overrides) -> MarketSpec:
    n, m, k = scaling_dims(i)
    return MarketSpec(n_symbols=n, m_users=m, k=k, seed=seed, **overrides)
