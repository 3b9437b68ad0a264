"""Per-node compute state and time-shared work delivery.

Work is tracked with a per-node service clock: the exact rational amount of
work each running job has received since the node last went idle.  A job
admitted at clock value ``c`` with size ``s`` finishes once the clock reaches
``c + s``.  Advancing the clock by ``P/L`` per step is the same as reducing
every running job's remaining work by ``P/L``, but costs one rational add per
node instead of one per job.  Clock values are ``gmpy2.mpq``; public
accessors hand back ``fractions.Fraction``.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction

from gmpy2 import mpq


@dataclass(slots=True)
class Job:
    id: int
    size: int
    origin: int
    arrival_step: int
    host: int | None = None
    completion_step: int | None = None
    finish_mark: mpq | None = None

    @property
    def done(self) -> bool:
        return self.completion_step is not None


@dataclass(slots=True)
class NodeState:
    id: int
    power: int
    k_min: int
    k_max: int
    running: set[int] = field(default_factory=set)
    clock: mpq = mpq(0)
    _marks: list[tuple[mpq, int]] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.power < 1:
            raise ValueError(f"node {self.id}: power must be positive, got {self.power}")
        if self.k_min < 1:
            raise ValueError(f"node {self.id}: k_min must be at least 1")
        if self.k_max - self.k_min != self.power:
            raise ValueError(
                f"node {self.id}: power {self.power} != k_max - k_min = {self.k_max - self.k_min}"
            )

    @property
    def load(self) -> int:
        return len(self.running)

    def admit(self, job: Job) -> None:
        job.host = self.id
        job.finish_mark = self.clock + job.size
        heapq.heappush(self._marks, (job.finish_mark, job.id))
        self.running.add(job.id)

    def evict(self, job: Job) -> None:
        """Drop a running job without completing it through work delivery."""
        self.running.remove(job.id)
        if not self.running:
            self._reset()

    def remaining(self, job: Job) -> Fraction:
        if job.done or job.finish_mark is None:
            return Fraction(0)
        return Fraction(max(mpq(0), job.finish_mark - self.clock))

    def _reset(self) -> None:
        self.clock = mpq(0)
        self._marks.clear()


def objective(node: NodeState) -> Fraction:
    """Compute rate a newly placed job would get: ``P / (L + 1)``."""
    return Fraction(node.power, len(node.running) + 1)


def target_in_degree(node: NodeState) -> int:
    return min(max(node.k_max - len(node.running), node.k_min), node.k_max)


def normalized_load(node: NodeState) -> Fraction:
    return Fraction(len(node.running), node.power)


def deliver_work(node: NodeState, jobs: dict[int, Job], step: int | None = None) -> list[int]:
    """Advance one time step of equal sharing; return ids of jobs that finished.

    Finished jobs leave ``node.running`` and get ``completion_step = step``.
    Work beyond a job's remaining amount is discarded.
    """
    load = len(node.running)
    if load == 0:
        return []
    node.clock += mpq(node.power, load)
    done: list[int] = []
    marks = node._marks
    running = node.running
    while marks and marks[0][0] <= node.clock:
        _, jid = heapq.heappop(marks)
        if jid not in running:
            continue
        running.remove(jid)
        jobs[jid].completion_step = step
        done.append(jid)
    if not running:
        node._reset()
    return done
