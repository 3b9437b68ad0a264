"""Closed-form predictions and the estimators used to check simulation output."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class AnalyticModel:
    """Uniform network of ``n_nodes`` nodes, ``capacity`` job slots each, ``total_jobs`` running."""

    n_nodes: int
    capacity: int
    total_jobs: int

    def __post_init__(self) -> None:
        if self.n_nodes < 1 or self.capacity < 0 or self.total_jobs < 0:
            raise ValueError("model needs N >= 1, C >= 0, J >= 0")
        if self.total_jobs > self.n_nodes * self.capacity:
            raise ValueError(f"J={self.total_jobs} exceeds N*C={self.n_nodes * self.capacity}")

    @property
    def alpha(self) -> Fraction:
        if self.capacity == 0:
            return Fraction(0)
        return Fraction(self.total_jobs, self.n_nodes * self.capacity)


def binomial_degree_dist(model: AnalyticModel) -> np.ndarray:
    """``p_n = C(C, n) (1 - a)^n a^(C - n)`` for ``n = 0..C``: each unit free with prob ``1 - a``."""
    a = model.alpha
    c = model.capacity
    free = 1 - a
    return np.array([float(math.comb(c, n) * free**n * a ** (c - n)) for n in range(c + 1)])


def er_degree_dist(n_nodes: int, n_edges: int) -> np.ndarray:
    """In-degree law of a directed ER graph with ``n_edges`` of the ``N(N-1)`` possible edges."""
    m = n_nodes - 1
    q = Fraction(n_edges, n_nodes * m)
    return np.array([float(math.comb(m, n) * q**n * (1 - q) ** (m - n)) for n in range(m + 1)])


def predicted_arrival_departure(model: AnalyticModel, i: int) -> tuple[Fraction, Fraction]:
    """Per-node job arrival and departure rates at in-degree ``i``."""
    n, c, j = model.n_nodes, model.capacity, model.total_jobs
    if not 0 <= i <= c:
        raise ValueError(f"in-degree {i} outside [0, {c}]")
    if j == 0:
        raise ValueError("departure rate is undefined with no running jobs")
    free_total = n * c - j
    arrival = Fraction(i, free_total) if free_total else Fraction(0)
    return arrival, Fraction(c - i, j)


def birth_death_stationary(model: AnalyticModel) -> np.ndarray:
    """Stationary in-degree law of the birth-death chain, by detailed balance."""
    c = model.capacity
    p = [Fraction(1)]
    for i in range(c):
        # i+1 free units come from i free units by a departure, and go back by an arrival
        _, dep = predicted_arrival_departure(model, i)
        arr, _ = predicted_arrival_departure(model, i + 1)
        if arr == 0:
            p.append(Fraction(0))
        else:
            p.append(p[-1] * dep / arr)
    total = sum(p)
    return np.array([float(x / total) for x in p])


@dataclass(frozen=True)
class Bandwidth:
    central_total: float
    bon_total: float
    central_max_node: float
    bon_per_node: float


def bandwidth_model(n: int, beta, A, L_bytes, ttl) -> Bandwidth:
    """Bytes per unit time for the central scheduler and for the overlay.

    ``ttl`` stands in for the walk length ``log N``.  Integer or Fraction
    inputs give exact results.
    """
    jobs = n * beta
    central = jobs * (A + L_bytes)
    bon = jobs * (A + L_bytes * (ttl + 2))
    per_node = Fraction(bon, n) if isinstance(bon, int) else bon / n
    if isinstance(per_node, Fraction) and per_node.denominator == 1:
        per_node = per_node.numerator
    return Bandwidth(central, bon, central, per_node)


@dataclass(frozen=True)
class LoadStatistics:
    std_norm_load: float
    mean_norm_load: float
    pearson_r2: float | None


def load_statistics(powers: Sequence[float], loads: Sequence[float]) -> LoadStatistics:
    """Mean and population std of ``L/P``; squared Pearson correlation of ``P`` with ``L``.

    The correlation is None when either column has zero variance or N < 2.
    """
    p = np.asarray(powers, dtype=float)
    l = np.asarray(loads, dtype=float)
    if p.size == 0:
        raise ValueError("no nodes")
    norm = l / p
    r2 = None
    if p.size >= 2:
        dp = p - p.mean()
        dl = l - l.mean()
        spp, sll = float(dp @ dp), float(dl @ dl)
        if spp > 0 and sll > 0:
            r2 = float((dp @ dl) ** 2 / (spp * sll))
    return LoadStatistics(float(norm.std()), float(norm.mean()), r2)


@dataclass(frozen=True)
class FitReport:
    distance: float
    chi_square: float
    dof: int
    p_value: float
    n_samples: int
    passed: bool
    capacity: int
    alpha: float
    shift: int

    def to_dict(self) -> dict:
        return asdict(self)


def pool_bins(observed: np.ndarray, expected: np.ndarray, min_expected: float = 5.0):
    """Merge adjacent bins until each has expected count >= ``min_expected``."""
    obs_out: list[float] = []
    exp_out: list[float] = []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp_out:
            obs_out[-1] += o_acc
            exp_out[-1] += e_acc
        else:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
    return np.array(obs_out), np.array(exp_out)


def fit_degree_distribution(
    hist: Mapping[int, int],
    model: AnalyticModel,
    shift: int = 0,
    max_distance: float = 0.05,
    min_p_value: float = 0.01,
) -> FitReport:
    """Compare an in-degree histogram with the binomial law.

    Degree ``d`` is read as ``d - shift`` free capacity units; pass
    ``shift=k_min`` to discount the connectivity floor, or 0 when every
    in-edge counts as capacity.  Bins with expected count below 5 are pooled.
    """
    c = model.capacity
    counts = np.zeros(c + 1)
    for deg, cnt in hist.items():
        x = deg - shift
        if not 0 <= x <= c:
            if cnt:
                raise ValueError(f"degree {deg} maps to {x} free units, outside [0, {c}]")
            continue
        counts[x] += cnt
    n = int(counts.sum())
    if n == 0:
        raise ValueError("empty histogram")
    model_p = binomial_degree_dist(model)
    distance = 0.5 * float(np.abs(counts / n - model_p).sum())
    obs, exp = pool_bins(counts, model_p * n)
    dof = len(obs) - 1
    if dof < 1:
        chi = 0.0
        p_value = 1.0
    else:
        chi = float(((obs - exp) ** 2 / exp).sum())
        p_value = float(stats.chi2.sf(chi, dof))
    passed = distance <= max_distance and p_value >= min_p_value
    return FitReport(distance, chi, dof, p_value, n, passed, c, float(model.alpha), shift)


def linear_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares ``(slope, intercept, r2)``."""
    res = stats.linregress(np.asarray(x, float), np.asarray(y, float))
    return float(res.slope), float(res.intercept), float(res.rvalue**2)
