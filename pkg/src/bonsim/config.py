"""Scenario configuration and its flat ``key = value`` file format.

Example::

    # uniform scenario
    n_nodes = 1024
    k_min = 4
    power_dist = constant 67
    job_size_dist = poisson 64
    arrivals_per_step_dist = constant 10
    walk_c = 2
    walk_variant = greedy
    steps = 1000
    seed = 7

Distribution values are ``constant V``, ``poisson MEAN`` or
``powerlaw EXPONENT LO HI``.  Blank lines and ``#`` comments are ignored.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .protocol import VARIANTS, WalkParams


class ConfigError(ValueError):
    pass


# ---- distributions -----------------------------------------------------


@dataclass(frozen=True)
class Constant:
    value: int

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.value, dtype=np.int64)

    def support(self) -> tuple[int, int]:
        return self.value, self.value

    def mean(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        return f"constant {self.value}"


@dataclass(frozen=True)
class Poisson:
    """Poisson sizes; zero draws are resampled to 1."""

    mean_value: float

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        x = rng.poisson(self.mean_value, size).astype(np.int64)
        x[x < 1] = 1
        return x

    def support(self) -> tuple[int, float]:
        return 1, math.inf

    def mean(self) -> float:
        return self.mean_value

    def __str__(self) -> str:
        return f"poisson {_fmt(self.mean_value)}"


@dataclass(frozen=True)
class PowerLaw:
    exponent: float
    lo: int
    hi: int

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        from .workload import powerlaw_cdf

        cdf = powerlaw_cdf(self.exponent, self.lo, self.hi)
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return (self.lo + np.minimum(idx, len(cdf) - 1)).astype(np.int64)

    def support(self) -> tuple[int, int]:
        return self.lo, self.hi

    def mean(self) -> float:
        from .workload import powerlaw_table

        return float(sum(p * k for k, p in zip(range(self.lo, self.hi + 1), powerlaw_table(self.exponent, self.lo, self.hi))))

    def __str__(self) -> str:
        return f"powerlaw {_fmt(self.exponent)} {self.lo} {self.hi}"


Distribution = Constant | Poisson | PowerLaw


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def parse_distribution(text: str) -> Distribution:
    parts = text.split()
    if not parts:
        raise ConfigError("empty distribution")
    kind, args = parts[0].lower(), parts[1:]
    try:
        if kind == "constant" and len(args) == 1:
            return Constant(int(args[0]))
        if kind == "poisson" and len(args) == 1:
            return Poisson(float(args[0]))
        if kind == "powerlaw" and len(args) == 3:
            return PowerLaw(float(args[0]), int(args[1]), int(args[2]))
    except ValueError as exc:
        raise ConfigError(f"bad distribution {text!r}: {exc}") from None
    raise ConfigError(f"bad distribution {text!r}")


# ---- scenario ----------------------------------------------------------


@dataclass
class ScenarioConfig:
    n_nodes: int = 1024
    k_min: int = 4
    power_dist: Distribution = field(default_factory=lambda: Constant(67))
    job_size_dist: Distribution = field(default_factory=lambda: Poisson(64.0))
    # None resolves to constant max(1, N // 100)
    arrivals_per_step_dist: Distribution | None = None
    walk_c: float = 2.0
    walk_variant: str = "greedy"
    k_retry: int = 3
    greedy_acquisition: bool = False
    distinct_sources: bool = False
    steps: int = 1000
    seed: int = 0
    bytes_A: int = 10_000
    bytes_L: int = 16
    drain_step: int | None = None
    structure_every: int = 10
    diameter_samples: int = 4
    snapshot_every: int = 0
    eq1_alpha: float = 0.5
    eq1_turnover: int = 10
    eq1_burn_in: int = 5000
    eq1_samples: int = 20
    eq1_sample_every: int = 50

    def __post_init__(self) -> None:
        if self.arrivals_per_step_dist is None:
            self.arrivals_per_step_dist = Constant(max(1, self.n_nodes // 100))

    @property
    def walk(self) -> WalkParams:
        return WalkParams(
            c=self.walk_c,
            variant=self.walk_variant,
            k_retry=self.k_retry,
            greedy_acquisition=self.greedy_acquisition,
            distinct_sources=self.distinct_sources,
        )

    def validate(self) -> "ScenarioConfig":
        if self.n_nodes < 1:
            raise ConfigError("n_nodes must be at least 1")
        if self.k_min < 1:
            raise ConfigError("k_min must be at least 1")
        if self.steps < 0:
            raise ConfigError("steps must be non-negative")
        if not self.walk_c > 0:
            raise ConfigError("walk_c must be positive")
        if self.walk_variant not in VARIANTS:
            raise ConfigError(f"walk_variant must be one of {VARIANTS}")
        if self.k_retry < 0:
            raise ConfigError("k_retry must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.bytes_A < 0 or self.bytes_L < 0:
            raise ConfigError("byte sizes must be non-negative")
        if self.structure_every < 0 or self.snapshot_every < 0 or self.diameter_samples < 1:
            raise ConfigError("metric cadences must be non-negative, diameter_samples positive")
        _check_dist("power_dist", self.power_dist, minimum=1)
        _check_dist("job_size_dist", self.job_size_dist, minimum=1)
        _check_dist("arrivals_per_step_dist", self.arrivals_per_step_dist, minimum=0)
        if self.drain_step is not None and self.drain_step < 0:
            raise ConfigError("drain_step must be non-negative")
        if not 0 <= self.eq1_alpha <= 1:
            raise ConfigError("eq1_alpha must lie in [0, 1]")
        if self.eq1_turnover < 0 or self.eq1_burn_in < 0 or self.eq1_samples < 1 or self.eq1_sample_every < 1:
            raise ConfigError("bad eq1 run parameters")
        return self

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, (Constant, Poisson, PowerLaw)) else v
        return out

    def dumps(self) -> str:
        lines = []
        for k, v in self.to_dict().items():
            if v is None:
                continue
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


QUANTIZATION_EDGES = 5


def quantization_warning(cfg: ScenarioConfig) -> str | None:
    """Advisory check on the smallest possible power.

    A node with fewer than ``QUANTIZATION_EDGES`` resource edges can only hold
    loads in coarse steps, so its share cannot get within about 10% of the
    balanced value.  Returned as text, not raised: the power-law scenario
    deliberately goes down to one edge.
    """
    lo = cfg.power_dist.support()[0]
    if lo < QUANTIZATION_EDGES:
        return (f"power_dist allows nodes with {lo} resource edge(s); below {QUANTIZATION_EDGES} "
                "their load cannot track capacity closely")
    return None


def _check_dist(name: str, dist: Distribution, minimum: int) -> None:
    if isinstance(dist, Constant):
        if dist.value < minimum:
            raise ConfigError(f"{name}: constant must be >= {minimum}")
    elif isinstance(dist, Poisson):
        if not dist.mean_value > 0:
            raise ConfigError(f"{name}: poisson mean must be positive")
    elif isinstance(dist, PowerLaw):
        if dist.lo > dist.hi:
            raise ConfigError(f"{name}: empty support [{dist.lo}, {dist.hi}]")
        if dist.lo < max(minimum, 1):
            raise ConfigError(f"{name}: lower bound must be >= {max(minimum, 1)}")
    else:
        raise ConfigError(f"{name}: not a distribution")


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_DIST_KEYS = {"power_dist", "job_size_dist", "arrivals_per_step_dist"}
_INT_KEYS = {
    "n_nodes", "k_min", "k_retry", "steps", "seed", "bytes_A", "bytes_L", "drain_step",
    "structure_every", "diameter_samples", "snapshot_every", "eq1_turnover", "eq1_burn_in",
    "eq1_samples", "eq1_sample_every",
}
_FLOAT_KEYS = {"walk_c", "eq1_alpha"}
_BOOL_KEYS = {"greedy_acquisition", "distinct_sources"}


def _coerce(key: str, raw: str) -> Any:
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    raw = raw.strip()
    try:
        if key in _DIST_KEYS:
            return parse_distribution(raw)
        if key in _INT_KEYS:
            if key == "drain_step" and raw.lower() in ("", "none"):
                return None
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {raw!r}")
            return low in ("true", "1", "yes")
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    return raw


def parse_config(text: str) -> ScenarioConfig:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    return ScenarioConfig(**values).validate()


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


# Numeric sweep axes: plain numeric keys plus aliases into distribution parameters.
ALIAS_AXES = ("beta", "nu", "power", "b_max", "p_max", "j_max")


def sweepable(key: str) -> bool:
    return key in ALIAS_AXES or key in _INT_KEYS or key in _FLOAT_KEYS


def with_axis(cfg: ScenarioConfig, key: str, value: float) -> ScenarioConfig:
    """Copy of ``cfg`` with one numeric axis set."""
    if key == "beta":
        return cfg.replace(arrivals_per_step_dist=Constant(int(value)))
    if key == "nu":
        return cfg.replace(job_size_dist=Poisson(float(value)))
    if key == "power":
        return cfg.replace(power_dist=Constant(int(value)))
    if key in ("b_max", "p_max", "j_max"):
        attr = {"b_max": "arrivals_per_step_dist", "p_max": "power_dist", "j_max": "job_size_dist"}[key]
        dist = getattr(cfg, attr)
        if not isinstance(dist, PowerLaw):
            raise ConfigError(f"axis {key} needs a powerlaw {attr}")
        return cfg.replace(**{attr: PowerLaw(dist.exponent, dist.lo, int(value))})
    if key in _INT_KEYS:
        return cfg.replace(**{key: int(value)})
    if key in _FLOAT_KEYS:
        return cfg.replace(**{key: float(value)})
    raise ConfigError(f"unknown sweep axis {key!r}")
