"""Node populations, arrival traces and the initial overlay, all derived from one seed."""
from __future__ import annotations

import csv
import random
import zlib
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .config import Constant, PowerLaw, ScenarioConfig
from .graph import OverlayGraph
from .node import NodeState

STREAMS = ("population", "trace", "graph", "walks", "metrics")


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named component of a run."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),))
    return np.random.Generator(np.random.PCG64(ss))


def py_substream(seed: int, name: str) -> random.Random:
    """``random.Random`` for hot loops (walks); seeded from the same derivation."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),))
    return random.Random(int.from_bytes(ss.generate_state(4, np.uint32).tobytes(), "little"))


# ---- discrete power law ------------------------------------------------


@lru_cache(maxsize=64)
def powerlaw_table(exponent: float, lo: int, hi: int) -> tuple[Fraction, ...]:
    """Exact probabilities of ``k = lo..hi`` under ``P(k) ~ k**-exponent``.

    Integer exponents give exact rationals; otherwise each weight is the
    exact rational value of the float ``k**-exponent``.  Either way the table
    sums to exactly 1.
    """
    if lo > hi:
        raise ValueError(f"empty support [{lo}, {hi}]")
    if lo < 1:
        raise ValueError("power-law support must start at 1 or above")
    if float(exponent).is_integer():
        e = int(exponent)
        weights = [Fraction(1, k**e) if e >= 0 else Fraction(k ** (-e)) for k in range(lo, hi + 1)]
    else:
        weights = [Fraction(float(k) ** -exponent) for k in range(lo, hi + 1)]
    total = sum(weights)
    return tuple(w / total for w in weights)


@lru_cache(maxsize=64)
def powerlaw_cdf(exponent: float, lo: int, hi: int) -> np.ndarray:
    """Float CDF used for inverse-transform sampling; last entry forced to 1."""
    acc = Fraction(0)
    cdf = []
    for p in powerlaw_table(exponent, lo, hi):
        acc += p
        cdf.append(float(acc))
    cdf[-1] = 1.0
    out = np.array(cdf)
    out.flags.writeable = False
    return out


def sample_discrete_powerlaw(exponent: float, lo: int, hi: int, rng) -> int:
    """One draw from ``k**-exponent`` on ``[lo, hi]`` by inverse CDF."""
    if lo > hi:
        raise ValueError(f"empty support [{lo}, {hi}]")
    cdf = powerlaw_cdf(exponent, lo, hi)
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    return lo + min(idx, len(cdf) - 1)


# ---- population / trace / graph ----------------------------------------


def build_population(cfg: ScenarioConfig, rng: np.random.Generator | None = None) -> list[NodeState]:
    if rng is None:
        rng = substream(cfg.seed, "population")
    powers = cfg.power_dist.sample(rng, cfg.n_nodes)
    if np.any(powers < 1):
        raise ValueError("power distribution produced a non-positive power")
    return [
        NodeState(id=i, power=int(p), k_min=cfg.k_min, k_max=cfg.k_min + int(p))
        for i, p in enumerate(powers)
    ]


@dataclass(frozen=True, eq=False)
class ArrivalTrace:
    """Per-step arrivals stored flat: row ``t`` is ``origins/sizes[offsets[t]:offsets[t+1]]``."""

    offsets: np.ndarray
    origins: np.ndarray
    sizes: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ArrivalTrace):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in ("offsets", "origins", "sizes"))

    @property
    def steps(self) -> int:
        return len(self.offsets) - 1

    @property
    def total_jobs(self) -> int:
        return int(self.offsets[-1])

    def row(self, t: int) -> list[tuple[int, int]]:
        a, b = self.offsets[t], self.offsets[t + 1]
        return list(zip(self.origins[a:b].tolist(), self.sizes[a:b].tolist()))

    def __iter__(self):
        for t in range(self.steps):
            yield self.row(t)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "origin", "size"])
            for t in range(self.steps):
                for origin, size in self.row(t):
                    w.writerow([t, origin, size])

    @classmethod
    def read_csv(cls, path: str | Path, steps: int) -> "ArrivalTrace":
        rows: list[list[tuple[int, int]]] = [[] for _ in range(steps)]
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows[int(rec["step"])].append((int(rec["origin"]), int(rec["size"])))
        return cls.from_rows(rows)

    @classmethod
    def from_rows(cls, rows: list[list[tuple[int, int]]]) -> "ArrivalTrace":
        counts = [len(r) for r in rows]
        offsets = np.concatenate([[0], np.cumsum(counts, dtype=np.int64)]).astype(np.int64)
        flat = [x for r in rows for x in r]
        origins = np.array([o for o, _ in flat], dtype=np.int64)
        sizes = np.array([s for _, s in flat], dtype=np.int64)
        return cls(offsets, origins, sizes)


def generate_trace(
    cfg: ScenarioConfig, population=None, rng: np.random.Generator | None = None
) -> ArrivalTrace:
    """Arrival counts per step, then uniform origins and job sizes for each arrival.

    Steps at or after ``cfg.drain_step`` receive no arrivals.  Counts,
    origins and sizes come from separate child streams, so a longer run
    extends a shorter one's trace instead of reshuffling it.
    """
    if rng is None:
        rng = substream(cfg.seed, "trace")
    count_rng, origin_rng, size_rng = rng.spawn(3)
    n = cfg.n_nodes if population is None else len(population)
    counts = cfg.arrivals_per_step_dist.sample(count_rng, cfg.steps)
    if cfg.drain_step is not None:
        counts[cfg.drain_step:] = 0
    total = int(counts.sum())
    origins = origin_rng.integers(0, n, size=total, dtype=np.int64)
    sizes = cfg.job_size_dist.sample(size_rng, total)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return ArrivalTrace(offsets, origins, sizes)


def build_initial_graph(
    population: list[NodeState], rng: np.random.Generator, distinct_sources: bool = False
) -> OverlayGraph:
    """Give every node ``k_max`` in-edges from uniformly chosen other nodes."""
    n = len(population)
    if n < 2:
        raise ValueError("an overlay needs at least two nodes")
    g = OverlayGraph(n)
    for node in population:
        v, k = node.id, node.k_max
        if distinct_sources:
            if k > n - 1:
                raise ValueError(f"node {v} needs {k} distinct sources but only {n - 1} exist")
            src = rng.choice(n - 1, size=k, replace=False)
        else:
            src = rng.integers(0, n - 1, size=k)
        src = src + (src >= v)
        for u in src.tolist():
            g.add_edge(u, v)
    return g


def uniform_config(**overrides) -> ScenarioConfig:
    """Uniform-power scenario with the package defaults."""
    base = ScenarioConfig(power_dist=Constant(67))
    return base.replace(**overrides).validate() if overrides else base.validate()


def powerlaw_config(**overrides) -> ScenarioConfig:
    """Heavy-tailed scenario: power, job size and arrivals all ``~ x**-1``."""
    n = overrides.get("n_nodes", 1024)
    base = ScenarioConfig(
        n_nodes=n,
        power_dist=PowerLaw(1.0, 1, 300),
        job_size_dist=PowerLaw(1.0, 32, 1024),
        arrivals_per_step_dist=PowerLaw(1.0, 1, max(1, n // 64)),
    )
    return base.replace(**overrides).validate()
