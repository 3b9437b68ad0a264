import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import optimize, stats

from bonsim.config import Constant, Poisson, PowerLaw, ScenarioConfig
from bonsim.workload import (
    ArrivalTrace,
    build_initial_graph,
    build_population,
    generate_trace,
    powerlaw_config,
    powerlaw_table,
    sample_discrete_powerlaw,
    substream,
    uniform_config,
)


def test_uniform_population():
    nodes = build_population(uniform_config(n_nodes=100))
    assert len(nodes) == 100
    assert {n.k_max for n in nodes} == {71}
    assert {n.power for n in nodes} == {67}


def test_single_node_population():
    assert len(build_population(ScenarioConfig(n_nodes=1))) == 1


def discrete_powerlaw_mle(samples, lo, hi):
    """Maximise the exact truncated discrete log-likelihood over the exponent."""
    ks = np.arange(lo, hi + 1, dtype=float)
    logs = np.log(ks)
    total_log = np.log(samples).sum()
    n = len(samples)

    def nll(a):
        return a * total_log + n * np.log(np.exp(-a * logs).sum())

    return optimize.minimize_scalar(nll, bounds=(0.0, 3.0), method="bounded").x


def test_powerlaw_population_bounds_and_slope():
    cfg = powerlaw_config(n_nodes=20000)
    powers = np.array([n.power for n in build_population(cfg)])
    assert powers.min() >= 1 and powers.max() <= 300
    assert all(n.k_max == 4 + n.power for n in build_population(cfg.replace(n_nodes=50)))
    a = discrete_powerlaw_mle(powers, 1, 300)
    assert abs(a - 1.0) < 0.03


def test_powerlaw_table_exact():
    t = powerlaw_table(1.0, 1, 2)
    assert t == (Fraction(2, 3), Fraction(1, 3))
    assert sum(powerlaw_table(1.0, 1, 300)) == 1
    assert sum(powerlaw_table(1.5, 3, 40)) == 1
    with pytest.raises(ValueError):
        powerlaw_table(1.0, 5, 2)


def test_sample_degenerate():
    rng = np.random.default_rng(0)
    assert {sample_discrete_powerlaw(1.0, 5, 5, rng) for _ in range(50)} == {5}
    with pytest.raises(ValueError):
        sample_discrete_powerlaw(1.0, 6, 5, rng)


def test_sample_two_point_frequencies():
    rng = np.random.default_rng(1)
    n = 30000
    ones = sum(sample_discrete_powerlaw(1.0, 1, 2, rng) == 1 for _ in range(n))
    assert stats.binomtest(ones, n, 2 / 3).pvalue > 1e-3


def test_sample_flat_exponent_is_uniform():
    rng = np.random.default_rng(2)
    x = PowerLaw(0.0, 3, 8).sample(rng, 60000)
    counts = np.bincount(x - 3, minlength=6)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_vector_sampler_matches_table():
    rng = np.random.default_rng(3)
    x = PowerLaw(1.0, 1, 10).sample(rng, 100000)
    counts = np.bincount(x - 1, minlength=10)
    expected = np.array([float(p) for p in powerlaw_table(1.0, 1, 10)]) * len(x)
    assert stats.chisquare(counts, expected).pvalue > 1e-3


def test_trace_constant_count():
    cfg = ScenarioConfig(n_nodes=20, arrivals_per_step_dist=Constant(3), steps=10)
    tr = generate_trace(cfg)
    assert tr.steps == 10 and tr.total_jobs == 30
    assert all(len(tr.row(t)) == 3 for t in range(10))
    assert all(0 <= o < 20 for o in tr.origins)


def test_poisson_sizes_mean():
    cfg = ScenarioConfig(n_nodes=10, arrivals_per_step_dist=Constant(100), steps=100, job_size_dist=Poisson(64))
    sizes = generate_trace(cfg).sizes
    assert len(sizes) == 10000
    assert sizes.min() >= 1
    assert abs(sizes.mean() - 64) <= 3 * math.sqrt(64 / len(sizes))


def test_poisson_zero_resampled():
    x = Poisson(0.01).sample(np.random.default_rng(0), 1000)
    assert x.min() == 1


def test_powerlaw_sizes_bounds():
    cfg = powerlaw_config(n_nodes=64, steps=200)
    sizes = generate_trace(cfg).sizes
    assert sizes.min() >= 32 and sizes.max() <= 1024
    counts = generate_trace(cfg).offsets
    per_step = np.diff(counts)
    assert per_step.min() >= 1 and per_step.max() <= 1


def test_trace_drain_step():
    cfg = ScenarioConfig(n_nodes=10, arrivals_per_step_dist=Constant(2), steps=10, drain_step=4)
    tr = generate_trace(cfg)
    assert [len(tr.row(t)) for t in range(10)] == [2] * 4 + [0] * 6


def test_trace_deterministic_and_prefix_stable():
    cfg = powerlaw_config(n_nodes=128, steps=50, seed=9)
    a, b = generate_trace(cfg), generate_trace(cfg)
    assert np.array_equal(a.origins, b.origins) and np.array_equal(a.sizes, b.sizes)
    longer = generate_trace(cfg.replace(steps=80))
    k = a.total_jobs
    assert np.array_equal(longer.origins[:k], a.origins) and np.array_equal(longer.sizes[:k], a.sizes)
    other = generate_trace(cfg.replace(seed=10))
    assert not np.array_equal(other.sizes[: min(k, other.total_jobs)], a.sizes[: min(k, other.total_jobs)])


def test_trace_csv_roundtrip(tmp_path):
    cfg = ScenarioConfig(n_nodes=10, arrivals_per_step_dist=Constant(2), steps=5)
    tr = generate_trace(cfg)
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    assert path.read_text().splitlines()[0] == "step,origin,size"
    back = ArrivalTrace.read_csv(path, 5)
    assert np.array_equal(back.offsets, tr.offsets)
    assert np.array_equal(back.origins, tr.origins) and np.array_equal(back.sizes, tr.sizes)


def test_substreams_independent():
    a = substream(5, "trace").random(4)
    b = substream(5, "graph").random(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, substream(5, "trace").random(4))


def test_initial_graph_two_nodes():
    nodes = build_population(ScenarioConfig(n_nodes=2, power_dist=Constant(1), k_min=2))
    g = build_initial_graph(nodes, substream(0, "graph"))
    assert g.in_degrees() == [3, 3]
    assert g.multiplicity(1, 0) == 3 and g.multiplicity(0, 1) == 3


def test_initial_graph_needs_two_nodes():
    with pytest.raises(ValueError):
        build_initial_graph(build_population(ScenarioConfig(n_nodes=1)), substream(0, "graph"))


def test_initial_graph_uniform_degrees_and_out_moments():
    nodes = build_population(uniform_config())
    g = build_initial_graph(nodes, substream(0, "graph"))
    assert set(g.in_degrees()) == {71}
    assert g.edge_count == 1024 * 71
    g.check_invariants()
    # each out-degree is a sum of 1023 Bernoulli(1/1023) draws per target node, 71 times each:
    # mean 71, variance 71 * 1023 * (1/1023) * (1022/1023)
    out = np.array(g.out_degrees(), dtype=float)
    n = 1024
    var = 71 * (n - 1) * (1 / (n - 1)) * (1 - 1 / (n - 1))
    assert out.mean() == 71
    assert abs(out.var(ddof=1) - var) < 4 * var * math.sqrt(2 / (n - 1))


def test_initial_graph_distinct_sources():
    nodes = build_population(ScenarioConfig(n_nodes=80, power_dist=Constant(6)))
    g = build_initial_graph(nodes, substream(0, "graph"), distinct_sources=True)
    assert all(g.multiplicity(u, v) <= 1 for u, v in g.edges())
    with pytest.raises(ValueError):
        build_initial_graph(build_population(ScenarioConfig(n_nodes=5, power_dist=Constant(6))),
                            substream(0, "graph"), distinct_sources=True)
