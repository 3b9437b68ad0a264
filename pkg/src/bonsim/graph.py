"""Dynamic directed multigraph used as the overlay.

Each edge is stored once in an edge table and referenced by id from both the
source's out-list and the destination's in-list.  Every edge id remembers its
position inside both lists, so removal is an O(1) swap-remove and uniform
sampling over a node's in- or out-multiset is a single index draw.  List order
is an implementation detail and changes as edges are removed.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Protocol


class RandomSource(Protocol):
    def random(self) -> float: ...


class GraphError(ValueError):
    pass


class SelfLoopError(GraphError):
    pass


class UnknownNodeError(GraphError):
    pass


class NoInEdgeError(GraphError):
    pass


class OverlayGraph:
    """Directed multigraph on nodes ``0..n-1``; parallel edges allowed, self-loops not."""

    __slots__ = ("_out", "_in", "_src", "_dst", "_out_pos", "_in_pos", "_free", "edge_count")

    def __init__(self, n_nodes: int) -> None:
        if n_nodes < 0:
            raise GraphError(f"negative node count {n_nodes}")
        self._out: list[list[int]] = [[] for _ in range(n_nodes)]
        self._in: list[list[int]] = [[] for _ in range(n_nodes)]
        self._src: list[int] = []
        self._dst: list[int] = []
        self._out_pos: list[int] = []
        self._in_pos: list[int] = []
        self._free: list[int] = []
        self.edge_count = 0

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "OverlayGraph":
        g = cls(n_nodes)
        for u, v in edges:
            g.add_edge(u, v)
        return g

    # ---- mutation ----------------------------------------------------

    def _check(self, v: int) -> None:
        if not 0 <= v < len(self._out):
            raise UnknownNodeError(f"unknown node {v}")

    def add_edge(self, src: int, dst: int) -> None:
        self._check(src)
        self._check(dst)
        if src == dst:
            raise SelfLoopError(f"self-loop on node {src}")
        out_list = self._out[src]
        in_list = self._in[dst]
        if self._free:
            eid = self._free.pop()
            self._src[eid] = src
            self._dst[eid] = dst
            self._out_pos[eid] = len(out_list)
            self._in_pos[eid] = len(in_list)
        else:
            eid = len(self._src)
            self._src.append(src)
            self._dst.append(dst)
            self._out_pos.append(len(out_list))
            self._in_pos.append(len(in_list))
        out_list.append(eid)
        in_list.append(eid)
        self.edge_count += 1

    def _drop(self, eid: int) -> None:
        out_list = self._out[self._src[eid]]
        pos = self._out_pos[eid]
        last = out_list.pop()
        if last != eid:
            out_list[pos] = last
            self._out_pos[last] = pos
        in_list = self._in[self._dst[eid]]
        pos = self._in_pos[eid]
        last = in_list.pop()
        if last != eid:
            in_list[pos] = last
            self._in_pos[last] = pos
        self._src[eid] = -1
        self._dst[eid] = -1
        self._free.append(eid)
        self.edge_count -= 1

    def remove_random_in_edge(self, v: int, rng: RandomSource) -> int:
        """Delete one in-edge of ``v`` chosen uniformly over the multiset; return its source."""
        self._check(v)
        in_list = self._in[v]
        if not in_list:
            raise NoInEdgeError(f"node {v} has no incoming edge")
        eid = in_list[int(rng.random() * len(in_list))]
        src = self._src[eid]
        self._drop(eid)
        return src

    def remove_edge(self, src: int, dst: int) -> None:
        """Remove one copy of ``src -> dst``."""
        self._check(src)
        self._check(dst)
        for eid in self._out[src]:
            if self._dst[eid] == dst:
                self._drop(eid)
                return
        raise GraphError(f"no edge {src} -> {dst}")

    # ---- queries -----------------------------------------------------

    def __len__(self) -> int:
        return len(self._out)

    @property
    def n_nodes(self) -> int:
        return len(self._out)

    def nodes(self) -> range:
        return range(len(self._out))

    def in_degree(self, v: int) -> int:
        return len(self._in[v])

    def out_degree(self, v: int) -> int:
        return len(self._out[v])

    def in_degrees(self) -> list[int]:
        return [len(x) for x in self._in]

    def out_degrees(self) -> list[int]:
        return [len(x) for x in self._out]

    def out_neighbors(self, v: int) -> list[int]:
        dst = self._dst
        return [dst[e] for e in self._out[v]]

    def in_neighbors(self, v: int) -> list[int]:
        src = self._src
        return [src[e] for e in self._in[v]]

    def multiplicity(self, src: int, dst: int) -> int:
        d = self._dst
        return sum(1 for e in self._out[src] if d[e] == dst)

    def random_out_neighbor(self, v: int, rng: RandomSource) -> int | None:
        out_list = self._out[v]
        if not out_list:
            return None
        return self._dst[out_list[int(rng.random() * len(out_list))]]

    def edges(self) -> Iterator[tuple[int, int]]:
        dst = self._dst
        for u, out_list in enumerate(self._out):
            for e in out_list:
                yield u, dst[e]

    def copy(self) -> "OverlayGraph":
        return OverlayGraph.from_edges(self.n_nodes, self.edges())

    def check_invariants(self) -> None:
        """Raise AssertionError if the in/out mirror or degree sums are broken."""
        from collections import Counter

        out_pairs = Counter(self.edges())
        in_pairs = Counter((self._src[e], v) for v, lst in enumerate(self._in) for e in lst)
        assert out_pairs == in_pairs, "in/out adjacency are not mirror images"
        assert all(u != v for u, v in out_pairs), "self-loop present"
        assert sum(map(len, self._out)) == self.edge_count == sum(map(len, self._in))
        for v, lst in enumerate(self._out):
            for i, e in enumerate(lst):
                assert self._out_pos[e] == i and self._src[e] == v
        for v, lst in enumerate(self._in):
            for i, e in enumerate(lst):
                assert self._in_pos[e] == i and self._dst[e] == v

    def undirected_adjacency(self) -> list[list[int]]:
        """Distinct neighbours of each node in the undirected projection."""
        adj: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for u, v in self.edges():
            adj[u].add(v)
            adj[v].add(u)
        return [sorted(s) for s in adj]

    def successor_lists(self) -> list[list[int]]:
        return [sorted(set(self.out_neighbors(v))) for v in self.nodes()]


# ---- structure ---------------------------------------------------------


def weakly_connected_components(g: OverlayGraph) -> tuple[int, list[int]]:
    """Component count and per-node labels of the undirected projection."""
    adj = g.undirected_adjacency()
    labels = [-1] * g.n_nodes
    count = 0
    for s in g.nodes():
        if labels[s] != -1:
            continue
        labels[s] = count
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if labels[w] == -1:
                    labels[w] = count
                    queue.append(w)
        count += 1
    return count, labels


def strongly_connected_components(g: OverlayGraph) -> tuple[int, list[int]]:
    """Iterative Tarjan; linear in nodes + edges."""
    succ = g.successor_lists()
    n = g.n_nodes
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    labels = [-1] * n
    stack: list[int] = []
    counter = 0
    count = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            nbrs = succ[v]
            if i < len(nbrs):
                work[-1] = (v, i + 1)
                w = nbrs[i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    labels[w] = count
                    if w == v:
                        break
                count += 1
    return count, labels


@dataclass(frozen=True)
class DiameterEstimate:
    value: int
    connected: bool
    component_size: int


def _bfs(adj: list[list[int]], s: int) -> tuple[int, int, int]:
    """Return (eccentricity, a farthest node, reached count) from ``s``."""
    dist = {s: 0}
    queue = deque([s])
    far = s
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for w in adj[u]:
            if w not in dist:
                dist[w] = du
                queue.append(w)
                far = w
    return dist[far], far, len(dist)


def estimate_diameter(
    g: OverlayGraph, samples: int, rng: RandomSource, directed: bool = False
) -> DiameterEstimate:
    """Double-sweep pseudo-diameter; a lower bound on the true diameter.

    For each seed a BFS finds the farthest node, and a second BFS from that
    node gives another eccentricity.  When ``samples >= n`` every node is
    used as a seed and the result is exact.  On a disconnected graph the
    sweep is restricted to the largest weak component and ``connected`` is
    False.
    """
    n = g.n_nodes
    if n == 0:
        return DiameterEstimate(0, True, 0)
    count, labels = weakly_connected_components(g)
    if count == 1:
        pool = list(range(n))
    else:
        sizes: dict[int, int] = {}
        for lab in labels:
            sizes[lab] = sizes.get(lab, 0) + 1
        biggest = min(sizes, key=lambda lab: (-sizes[lab], lab))
        pool = [v for v in range(n) if labels[v] == biggest]
    adj = g.successor_lists() if directed else g.undirected_adjacency()

    if samples >= len(pool):
        seeds = pool
        sweep = False
    else:
        seeds = []
        chosen = set()
        while len(seeds) < max(samples, 1):
            s = pool[int(rng.random() * len(pool))]
            if s not in chosen:
                chosen.add(s)
                seeds.append(s)
        sweep = True

    best = 0
    for s in seeds:
        ecc, far, _ = _bfs(adj, s)
        best = max(best, ecc)
        if sweep:
            best = max(best, _bfs(adj, far)[0])
    return DiameterEstimate(best, count == 1, len(pool))


def degree_histogram(g: OverlayGraph, direction: str = "in") -> dict[int, int]:
    if direction == "in":
        degrees = g.in_degrees()
    elif direction == "out":
        degrees = g.out_degrees()
    else:
        raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")
    hist: dict[int, int] = {}
    for d in degrees:
        hist[d] = hist.get(d, 0) + 1
    return dict(sorted(hist.items()))


# ---- snapshots ---------------------------------------------------------


def write_snapshot(g: OverlayGraph, path: str | Path, step: int) -> None:
    lines = [f"# nodes={g.n_nodes} edges={g.edge_count} step={step}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path: str | Path) -> tuple[OverlayGraph, int]:
    """Parse an edge-list snapshot; returns the graph and its step."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise GraphError(f"{path}: missing header line")
    header = dict(tok.split("=", 1) for tok in text[0][1:].split())
    n = int(header["nodes"])
    g = OverlayGraph(n)
    for line in text[1:]:
        line = line.strip()
        if not line:
            continue
        u, v = line.split()
        g.add_edge(int(u), int(v))
    if "edges" in header and int(header["edges"]) != g.edge_count:
        raise GraphError(f"{path}: header says {header['edges']} edges, found {g.edge_count}")
    return g, int(header.get("step", 0))
