"""Walk-based placement and degree maintenance.

Placement follows the greedy walk: start at the job's origin, take up to
``ttl`` uniformly random out-hops and keep the visited node with the largest
``P / (L + 1)`` (strict comparison, so the earliest-visited node wins ties).
Edge acquisition uses a plain walk and takes its last node as the new edge's
source.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .graph import OverlayGraph, RandomSource
from .node import Job, NodeState, objective, target_in_degree

VARIANTS = ("greedy", "last_node")


@dataclass(frozen=True)
class WalkParams:
    c: float = 2.0
    variant: str = "greedy"
    k_retry: int = 3
    greedy_acquisition: bool = False
    distinct_sources: bool = False

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"walk coefficient must be positive, got {self.c}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown walk variant {self.variant!r}")
        if self.k_retry < 0:
            raise ValueError("k_retry must be non-negative")

    def ttl(self, n_nodes: int) -> int:
        """``ceil(c * ln N)`` hops, at least one."""
        if n_nodes <= 1:
            return 1
        return max(1, math.ceil(self.c * math.log(n_nodes)))


@dataclass(frozen=True)
class WalkOutcome:
    target: int
    hops_taken: int
    best_objective: Fraction
    visited: int


@dataclass
class WalkCounters:
    """Message accounting shared by all walks of one run."""

    n_nodes: int
    placement_walks: int = 0
    placement_hops: int = 0
    acquisition_attempts: int = 0
    acquisition_hops: int = 0
    acquisitions: int = 0
    edges_added: int = 0
    edges_removed: int = 0
    hops_by_node: list[int] = field(default_factory=list)
    walks_by_node: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.hops_by_node:
            self.hops_by_node = [0] * self.n_nodes
        if not self.walks_by_node:
            self.walks_by_node = [0] * self.n_nodes

    @property
    def walk_hops_total(self) -> int:
        return self.placement_hops + self.acquisition_hops

    @property
    def brdm_messages(self) -> int:
        return self.placement_walks + self.acquisition_attempts

    @property
    def edge_ops(self) -> int:
        return self.edges_added + self.edges_removed


def pick_target(
    g: OverlayGraph,
    nodes: Sequence[NodeState],
    source: int,
    params: WalkParams,
    rng: RandomSource,
    ttl: int | None = None,
) -> WalkOutcome:
    if ttl is None:
        ttl = params.ttl(len(nodes))
    out, dst = g._out, g._dst
    rnd = rng.random
    node = nodes[source]
    best = source
    best_p, best_q = node.power, len(node.running) + 1
    seen = {source}
    v = source
    hops = 0
    while hops < ttl:
        lst = out[v]
        if not lst:
            break
        v = dst[lst[int(rnd() * len(lst))]]
        hops += 1
        seen.add(v)
        node = nodes[v]
        p, q = node.power, len(node.running) + 1
        # p/q > best_p/best_q without building fractions
        if p * best_q > best_p * q:
            best, best_p, best_q = v, p, q
    if params.variant == "last_node":
        best = v
    return WalkOutcome(best, hops, objective(nodes[best]), len(seen))


def acquire_edge(
    g: OverlayGraph,
    beneficiary: int,
    params: WalkParams,
    rng: RandomSource,
    ttl: int | None = None,
    nodes: Sequence[NodeState] | None = None,
    counters: WalkCounters | None = None,
) -> int | None:
    """Walk from ``beneficiary`` and add an edge from the walk's last node back to it.

    If the walk ends on the beneficiary itself it is extended one hop at a
    time, at most ``k_retry`` times.  A walk that hits a dead end stops there
    and that node is used.  Returns the new edge's source, or None when no
    edge could be added this time.
    """
    if ttl is None:
        ttl = params.ttl(g.n_nodes)
    out, dst = g._out, g._dst
    rnd = rng.random
    hops = 0
    v = beneficiary
    visited = []
    while hops < ttl:
        lst = out[v]
        if not lst:
            break
        v = dst[lst[int(rnd() * len(lst))]]
        hops += 1
        visited.append(v)

    def acceptable(u: int) -> bool:
        if u == beneficiary:
            return False
        return not (params.distinct_sources and g.multiplicity(u, beneficiary) > 0)

    extra = 0
    while not acceptable(v) and extra < params.k_retry:
        lst = out[v]
        if not lst:
            break
        v = dst[lst[int(rnd() * len(lst))]]
        hops += 1
        extra += 1
        visited.append(v)

    src: int | None = v if acceptable(v) else None
    if params.greedy_acquisition and nodes is not None:
        best = None
        for u in visited:
            if acceptable(u) and (best is None or objective(nodes[u]) > objective(nodes[best])):
                best = u
        src = best

    if counters is not None:
        counters.acquisition_attempts += 1
        counters.acquisition_hops += hops
        counters.hops_by_node[beneficiary] += hops
        counters.walks_by_node[beneficiary] += 1
    if src is None:
        return None
    g.add_edge(src, beneficiary)
    if counters is not None:
        counters.acquisitions += 1
        counters.edges_added += 1
    return src


def rebalance(
    g: OverlayGraph,
    node: NodeState,
    params: WalkParams,
    rng: RandomSource,
    ttl: int | None = None,
    max_acquisitions: int | None = None,
    nodes: Sequence[NodeState] | None = None,
    counters: WalkCounters | None = None,
) -> int:
    """Move ``node``'s in-degree toward its target; return the number of edges changed.

    Surplus edges are shed immediately.  A deficit gets one acquisition walk
    per missing edge (capped by ``max_acquisitions``); whatever is still
    missing is left for a later call.
    """
    target = target_in_degree(node)
    v = node.id
    changed = 0
    while g.in_degree(v) > target:
        g.remove_random_in_edge(v, rng)
        changed += 1
    if counters is not None:
        counters.edges_removed += changed
    deficit = target - g.in_degree(v)
    if max_acquisitions is not None:
        deficit = min(deficit, max_acquisitions)
    for _ in range(deficit):
        if acquire_edge(g, v, params, rng, ttl, nodes, counters) is not None:
            changed += 1
    return changed


def place_job(
    g: OverlayGraph,
    nodes: Sequence[NodeState],
    job: Job,
    params: WalkParams,
    rng: RandomSource,
    ttl: int | None = None,
    counters: WalkCounters | None = None,
) -> int:
    """Walk from the job's origin, admit the job on the chosen host, shed its surplus edges.

    The host's load only grows here, so rebalancing can only delete edges;
    any deficit it already carried is retried by the engine in the next step.
    """
    outcome = pick_target(g, nodes, job.origin, params, rng, ttl)
    host = nodes[outcome.target]
    host.admit(job)
    if counters is not None:
        counters.placement_walks += 1
        counters.placement_hops += outcome.hops_taken
        counters.hops_by_node[job.origin] += outcome.hops_taken
        counters.walks_by_node[job.origin] += 1
    rebalance(g, host, params, rng, ttl, max_acquisitions=0, nodes=nodes, counters=counters)
    return outcome.target
