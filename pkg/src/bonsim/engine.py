"""Discrete-time simulation loop, central baseline and message accounting.

Each step runs in a fixed order:

1. every node delivers one step of time-shared work;
2. hosts that lost jobs rebalance (acquisition walks happen here);
3. nodes still short of their target in-degree retry, once per missing edge;
4. the step's arrivals are placed in trace order;
5. a metrics row is recorded.
"""
from __future__ import annotations

import csv
import heapq
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
from gmpy2 import mpq

from .analytics import AnalyticModel, FitReport, bandwidth_model, fit_degree_distribution, load_statistics
from .config import ConfigError, Constant, ScenarioConfig
from .graph import (
    OverlayGraph,
    degree_histogram,
    estimate_diameter,
    strongly_connected_components,
    weakly_connected_components,
)
from .node import Job, NodeState, deliver_work, target_in_degree
from .protocol import WalkCounters, place_job, rebalance
from .workload import (
    ArrivalTrace,
    build_initial_graph,
    build_population,
    generate_trace,
    py_substream,
    substream,
)

KINDS = ("bon", "central")

METRIC_COLUMNS = (
    "step",
    "load_norm",
    "mean_k",
    "std_load",
    "r2_power_load",
    "wcc",
    "scc",
    "diameter_est",
    "jobs_running",
    "jobs_completed",
    "brdm_hops",
    "edges",
)


@dataclass(frozen=True)
class MetricsSnapshot:
    step: int
    load_norm: float
    mean_k: float
    std_load: float
    r2_power_load: float | None
    wcc: int | None
    scc: int | None
    diameter_est: int | None
    jobs_running: int
    jobs_completed: int
    brdm_hops: int
    edges: int

    def as_row(self) -> list:
        return ["" if v is None else v for v in (getattr(self, c) for c in METRIC_COLUMNS)]


@dataclass
class RunCounters:
    walks: WalkCounters
    jobs_arrived: int = 0
    jobs_completed: int = 0
    jobs_originated: list[int] = field(default_factory=list)
    jobs_accepted: list[int] = field(default_factory=list)

    def as_dict(self) -> dict:
        w = self.walks
        return {
            "jobs_arrived": self.jobs_arrived,
            "jobs_completed": self.jobs_completed,
            "walk_hops_total": w.walk_hops_total,
            "placement_hops": w.placement_hops,
            "acquisition_hops": w.acquisition_hops,
            "brdm_messages": w.brdm_messages,
            "acquisition_attempts": w.acquisition_attempts,
            "acquisitions": w.acquisitions,
            "edge_ops": w.edge_ops,
        }


def account_bandwidth(counters: RunCounters, cfg: ScenarioConfig, kind: str = "bon") -> dict:
    """Total bytes sent and the largest share attributed to a single node.

    Overlay: each job costs ``A`` bytes to ship plus ``L`` per walk hop plus
    ``2L`` of handshake.  Hops and handshakes are billed to the node that
    started the walk, the program transfer to the host.  Central: every job
    costs ``A + L`` and all of it passes through the scheduler.
    """
    A, L = cfg.bytes_A, cfg.bytes_L
    if kind == "central":
        total = counters.jobs_arrived * (A + L)
        return {"total": total, "max_per_node": total}
    w = counters.walks
    total = counters.jobs_arrived * A + w.walk_hops_total * L + 2 * L * counters.jobs_arrived
    per_node = [
        L * (w.hops_by_node[v] + 2 * counters.jobs_originated[v]) + A * counters.jobs_accepted[v]
        for v in range(len(counters.jobs_accepted))
    ]
    return {"total": total, "max_per_node": max(per_node, default=0)}


class CentralScheduler:
    """Global argmax of ``P/(L+1)``, ties to the lowest node id, via a lazily updated heap."""

    def __init__(self, nodes: list[NodeState]) -> None:
        self.nodes = nodes
        self._heap = [(-mpq(n.power, n.load + 1), n.id, n.load) for n in nodes]
        heapq.heapify(self._heap)

    def touch(self, v: int) -> None:
        n = self.nodes[v]
        heapq.heappush(self._heap, (-mpq(n.power, n.load + 1), v, n.load))
        if len(self._heap) > 4 * len(self.nodes) + 64:
            self._heap = [(-mpq(n.power, n.load + 1), n.id, n.load) for n in self.nodes]
            heapq.heapify(self._heap)

    def choose(self) -> int:
        heap = self._heap
        while True:
            _, v, load = heap[0]
            if load == self.nodes[v].load:
                return v
            heapq.heappop(heap)


class Simulation:
    """One run of either scheduler over a fixed arrival trace."""

    def __init__(
        self,
        cfg: ScenarioConfig,
        kind: str = "bon",
        trace: ArrivalTrace | None = None,
        snapshot_hook: Callable[[OverlayGraph, int], None] | None = None,
    ) -> None:
        if kind not in KINDS:
            raise ConfigError(f"unknown scheduler kind {kind!r}")
        self.cfg = cfg.validate()
        self.kind = kind
        self.nodes = build_population(cfg)
        n = len(self.nodes)
        self.trace = trace if trace is not None else generate_trace(cfg, self.nodes)
        if n >= 2:
            self.graph = build_initial_graph(self.nodes, substream(cfg.seed, "graph"), cfg.distinct_sources)
        else:
            self.graph = OverlayGraph(n)
        self.params = cfg.walk
        self.ttl = self.params.ttl(n)
        self.rng = py_substream(cfg.seed, "walks")
        self.metrics_rng = py_substream(cfg.seed, "metrics")
        self.counters = RunCounters(WalkCounters(n), jobs_originated=[0] * n, jobs_accepted=[0] * n)
        self.jobs: dict[int, Job] = {}
        self.pending: set[int] = set()
        self.step_index = 0
        self.snapshot_hook = snapshot_hook
        self._next_job = 0
        self._powers = np.array([nd.power for nd in self.nodes], dtype=float)
        self._total_power = int(self._powers.sum())
        self.central = CentralScheduler(self.nodes) if kind == "central" else None

    # ---- bookkeeping ---------------------------------------------------

    @property
    def jobs_running(self) -> int:
        return len(self.jobs)

    def _rebalance(self, v: int, max_acquisitions: int | None = None) -> None:
        node = self.nodes[v]
        rebalance(
            self.graph, node, self.params, self.rng, self.ttl,
            max_acquisitions=max_acquisitions, nodes=self.nodes, counters=self.counters.walks,
        )
        if self.graph.in_degree(v) < target_in_degree(node):
            self.pending.add(v)
        else:
            self.pending.discard(v)

    def central_place(self, job: Job) -> int:
        v = self.central.choose()
        self.nodes[v].admit(job)
        self.central.touch(v)
        return v

    # ---- stepping ------------------------------------------------------

    def step(self) -> MetricsSnapshot:
        t = self.step_index + 1
        nodes = self.nodes
        bon = self.kind == "bon"
        c = self.counters

        hosts: list[int] = []
        for node in nodes:
            done = deliver_work(node, self.jobs, t)
            if done:
                hosts.append(node.id)
                c.jobs_completed += len(done)
                for jid in done:
                    del self.jobs[jid]

        if bon:
            for v in hosts:
                self._rebalance(v)
            retry = sorted(self.pending.difference(hosts))
            for v in retry:
                self._rebalance(v)
        else:
            for v in hosts:
                self.central.touch(v)

        if t <= self.trace.steps:
            for origin, size in self.trace.row(t - 1):
                job = Job(self._next_job, size, origin, t)
                self._next_job += 1
                self.jobs[job.id] = job
                if bon:
                    host = place_job(self.graph, nodes, job, self.params, self.rng, self.ttl, c.walks)
                    if host in self.pending:
                        if self.graph.in_degree(host) >= target_in_degree(nodes[host]):
                            self.pending.discard(host)
                else:
                    host = self.central_place(job)
                c.jobs_arrived += 1
                c.jobs_originated[origin] += 1
                c.jobs_accepted[host] += 1

        self.step_index = t
        every = self.cfg.snapshot_every
        if self.snapshot_hook is not None and every and t % every == 0:
            self.snapshot_hook(self.graph, t)
        return self.metrics(structure=self._structure_due(t))

    def _structure_due(self, t: int) -> bool:
        every = self.cfg.structure_every
        return bool(every) and (t % every == 0 or t == self.cfg.steps)

    def metrics(self, structure: bool = True) -> MetricsSnapshot:
        loads = np.array([len(nd.running) for nd in self.nodes], dtype=float)
        st = load_statistics(self._powers, loads)
        g = self.graph
        n = len(self.nodes)
        wcc = scc = diam = None
        if structure and n >= 1:
            wcc = weakly_connected_components(g)[0]
            scc = strongly_connected_components(g)[0]
            diam = estimate_diameter(g, self.cfg.diameter_samples, self.metrics_rng).value
        return MetricsSnapshot(
            step=self.step_index,
            load_norm=float(loads.sum() / self._total_power),
            mean_k=g.edge_count / n,
            std_load=st.std_norm_load,
            r2_power_load=st.pearson_r2,
            wcc=wcc,
            scc=scc,
            diameter_est=diam,
            jobs_running=len(self.jobs),
            jobs_completed=self.counters.jobs_completed,
            brdm_hops=self.counters.walks.walk_hops_total,
            edges=g.edge_count,
        )

    def _bandwidth(self) -> dict:
        """Measured bytes plus the closed-form totals for the same job count.

        The model is evaluated twice: with the implemented ``ttl`` and with
        the literal ``ln N`` walk length.
        """
        out = account_bandwidth(self.counters, self.cfg, self.kind)
        n = len(self.nodes)
        beta = Fraction(self.counters.jobs_arrived, n)
        A, L = self.cfg.bytes_A, self.cfg.bytes_L
        exact = bandwidth_model(n, beta, A, L, self.ttl)
        literal = bandwidth_model(n, beta, A, L, math.log(n) if n > 1 else 0.0)
        out["model_ttl"] = {"central_total": int(exact.central_total), "bon_total": int(exact.bon_total)}
        out["model_ln_n"] = {"central_total": float(literal.central_total), "bon_total": float(literal.bon_total)}
        return out

    def run(self) -> "RunReport":
        rows = [self.step() for _ in range(self.cfg.steps)]
        return RunReport(
            config=self.cfg.to_dict(),
            kind=self.kind,
            steps=self.cfg.steps,
            ttl=self.ttl,
            counters=self.counters.as_dict(),
            bandwidth=self._bandwidth(),
            rows=rows,
        )


@dataclass
class RunReport:
    config: dict
    kind: str
    steps: int
    ttl: int
    counters: dict
    bandwidth: dict
    rows: list[MetricsSnapshot]

    @property
    def jobs_completed(self) -> int:
        return self.counters["jobs_completed"]

    def summary(self) -> dict:
        final = asdict(self.rows[-1]) if self.rows else None
        return {
            "kind": self.kind,
            "steps": self.steps,
            "ttl": self.ttl,
            "counters": self.counters,
            "bandwidth": self.bandwidth,
            "final": final,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in self.rows:
            w.writerow(r.as_row())
        return buf.getvalue()


def run(cfg: ScenarioConfig, kind: str = "bon", trace: ArrivalTrace | None = None, snapshot_hook=None) -> RunReport:
    return Simulation(cfg, kind, trace, snapshot_hook).run()


def read_metrics_csv(path: str | Path) -> list[dict]:
    def conv(v: str):
        if v == "":
            return None
        try:
            return int(v)
        except ValueError:
            return float(v)

    with open(path, newline="") as fh:
        return [{k: conv(v) for k, v in rec.items()} for rec in csv.DictReader(fh)]


# ---- closed-population validation run ----------------------------------


@dataclass
class Eq1Result:
    model: AnalyticModel
    pooled: FitReport
    final: FitReport
    pooled_hist: dict[int, int]
    final_hist: dict[int, int]
    basis: str

    @property
    def passed(self) -> bool:
        return self.pooled.distance <= 0.05 and self.final.p_value >= 0.01

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "basis": self.basis,
            "model": {"n_nodes": self.model.n_nodes, "capacity": self.model.capacity,
                      "total_jobs": self.model.total_jobs, "alpha": float(self.model.alpha)},
            "pooled": self.pooled.to_dict(),
            "final": self.final.to_dict(),
            "pooled_hist": {str(k): v for k, v in self.pooled_hist.items()},
            "final_hist": {str(k): v for k, v in self.final_hist.items()},
        }


def run_birth_death(cfg: ScenarioConfig, basis: str = "in_degree") -> Eq1Result:
    """Hold the job count fixed and terminate uniformly random jobs; fit the in-degree law.

    ``J`` jobs are placed with last-node walks, then every step
    ``eq1_turnover`` running jobs chosen uniformly at random end and the same
    number of new jobs arrive at uniform origins.  After ``eq1_burn_in``
    steps, ``eq1_samples`` histograms ``eq1_sample_every`` steps apart are
    pooled for the distance; the chi-square uses the last one alone.

    ``basis="in_degree"`` treats every in-edge as a capacity unit
    (``C = k_max``); ``basis="above_k_min"`` counts only units above the
    floor (``C = P``, degrees shifted by ``k_min``).
    """
    cfg.validate()
    if cfg.walk_variant != "last_node" or not isinstance(cfg.power_dist, Constant):
        raise ConfigError("this run needs walk_variant = last_node and a constant power_dist")
    if basis not in ("in_degree", "above_k_min"):
        raise ConfigError(f"unknown basis {basis!r}")
    nodes = build_population(cfg)
    n = len(nodes)
    g = build_initial_graph(nodes, substream(cfg.seed, "graph"), cfg.distinct_sources)
    params = cfg.walk
    ttl = params.ttl(n)
    rng = py_substream(cfg.seed, "walks")
    orng = py_substream(cfg.seed, "trace")
    k_max = nodes[0].k_max
    if basis == "in_degree":
        capacity, shift = k_max, 0
    else:
        capacity, shift = nodes[0].power, cfg.k_min
    total = int(round(cfg.eq1_alpha * n * capacity))
    model = AnalyticModel(n, capacity, total)

    running: list[Job] = []
    pending: set[int] = set()
    next_id = 0

    def settle(v: int, budget: int | None) -> None:
        rebalance(g, nodes[v], params, rng, ttl, max_acquisitions=budget)
        if g.in_degree(v) < target_in_degree(nodes[v]):
            pending.add(v)
        else:
            pending.discard(v)

    def arrive(t: int) -> None:
        nonlocal next_id
        job = Job(next_id, 1, int(orng.random() * n), t)
        next_id += 1
        host = place_job(g, nodes, job, params, rng, ttl)
        if host in pending and g.in_degree(host) >= target_in_degree(nodes[host]):
            pending.discard(host)
        running.append(job)

    for _ in range(total):
        arrive(0)

    hists: list[dict[int, int]] = []
    last_step = cfg.eq1_burn_in + (cfg.eq1_samples - 1) * cfg.eq1_sample_every
    for t in range(1, last_step + 1):
        m = min(cfg.eq1_turnover, len(running))
        hosts: list[int] = []
        for _ in range(m):
            i = int(orng.random() * len(running))
            job = running[i]
            running[i] = running[-1]
            running.pop()
            nodes[job.host].evict(job)
            job.completion_step = t
            if job.host not in hosts:
                hosts.append(job.host)
        for v in hosts:
            settle(v, None)
        for v in sorted(pending.difference(hosts)):
            settle(v, None)
        for _ in range(m):
            arrive(t)
        if t >= cfg.eq1_burn_in and (t - cfg.eq1_burn_in) % cfg.eq1_sample_every == 0:
            hists.append(degree_histogram(g, "in"))
    if not hists:
        hists.append(degree_histogram(g, "in"))

    pooled: dict[int, int] = {}
    for h in hists:
        for k, v in h.items():
            pooled[k] = pooled.get(k, 0) + v
    pooled = dict(sorted(pooled.items()))
    fit_pooled = fit_degree_distribution(pooled, model, shift=shift)
    fit_final = fit_degree_distribution(hists[-1], model, shift=shift)
    return Eq1Result(model, fit_pooled, fit_final, pooled, hists[-1], basis)
