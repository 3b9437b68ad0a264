import math
import random
from fractions import Fraction

import pytest

from bonsim.node import Job, NodeState, deliver_work, normalized_load, objective, target_in_degree


def node_with(power, sizes, k_min=4):
    node = NodeState(id=0, power=power, k_min=k_min, k_max=k_min + power)
    jobs = {}
    for i, s in enumerate(sizes):
        job = Job(i, s, 0, 0)
        jobs[i] = job
        node.admit(job)
    return node, jobs


def test_node_validation():
    with pytest.raises(ValueError):
        NodeState(id=0, power=0, k_min=4, k_max=4)
    with pytest.raises(ValueError):
        NodeState(id=0, power=3, k_min=0, k_max=3)
    with pytest.raises(ValueError):
        NodeState(id=0, power=3, k_min=4, k_max=8)


@pytest.mark.parametrize("power,load,expected", [(4, 0, 4), (4, 3, 1), (300, 7, Fraction(75, 2))])
def test_objective(power, load, expected):
    node, _ = node_with(power, [100] * load)
    assert objective(node) == expected
    assert isinstance(objective(node), Fraction)


def test_objective_equals_power_iff_idle():
    node, _ = node_with(5, [])
    assert objective(node) == 5
    node, _ = node_with(5, [9])
    assert objective(node) < 5


@pytest.mark.parametrize("load,expected", [(0, 71), (10, 61), (100, 4)])
def test_target_in_degree(load, expected):
    node, _ = node_with(67, [1000] * load)
    assert node.k_max == 71
    assert target_in_degree(node) == expected


def test_target_monotone_and_bounded():
    prev = None
    for load in range(0, 20):
        node, _ = node_with(6, [50] * load)
        t = target_in_degree(node)
        assert node.k_min <= t <= node.k_max
        if prev is not None:
            assert t <= prev
        prev = t


def test_normalized_load():
    node, _ = node_with(2, [5])
    assert normalized_load(node) == Fraction(1, 2)


def test_deliver_exact_finish():
    node, jobs = node_with(6, [3, 3])
    assert sorted(deliver_work(node, jobs, 1)) == [0, 1]
    assert node.load == 0
    assert jobs[0].completion_step == 1 and jobs[0].done


def test_deliver_partial():
    node, jobs = node_with(2, [5])
    assert deliver_work(node, jobs, 1) == []
    assert node.remaining(jobs[0]) == 3


def test_deliver_equal_sharing_hand_trace():
    node, jobs = node_with(2, [1, 10])
    assert deliver_work(node, jobs, 1) == [0]
    assert node.remaining(jobs[1]) == 9
    # alone now, so it gets the full power: 9 -> 7 -> 5 -> 3 -> 1 -> done
    steps = [deliver_work(node, jobs, t) for t in range(2, 7)]
    assert steps == [[], [], [], [], [1]]
    assert jobs[1].completion_step == 6


def test_deliver_idle():
    node, jobs = node_with(3, [])
    assert deliver_work(node, jobs, 1) == []


def test_deliver_rational_shares():
    # P=2 over 3 jobs: 2/3 each per step, a size-2 job needs exactly 3 steps
    node, jobs = node_with(2, [2, 2, 2])
    assert deliver_work(node, jobs, 1) == []
    assert node.remaining(jobs[0]) == Fraction(4, 3)
    assert deliver_work(node, jobs, 2) == []
    assert sorted(deliver_work(node, jobs, 3)) == [0, 1, 2]


def remaining_oracle(power, sizes, arrivals, steps):
    """Direct per-job bookkeeping with Fractions; returns completion steps."""
    remaining = {}
    done = {}
    for t in range(1, steps + 1):
        if remaining:
            share = Fraction(power, len(remaining))
            for j in list(remaining):
                remaining[j] -= share
                if remaining[j] <= 0:
                    done[j] = t
                    del remaining[j]
        for j in arrivals.get(t, []):
            remaining[j] = Fraction(sizes[j])
    return done


@pytest.mark.parametrize("seed", range(20))
def test_clock_matches_per_job_oracle(seed):
    r = random.Random(seed)
    power = r.randint(1, 9)
    sizes = [r.randint(1, 40) for _ in range(30)]
    arrivals = {}
    for j in range(30):
        arrivals.setdefault(r.randint(1, 60), []).append(j)
    node = NodeState(id=0, power=power, k_min=1, k_max=1 + power)
    jobs = {j: Job(j, sizes[j], 0, 0) for j in range(30)}
    got = {}
    for t in range(1, 400):
        before = sum((node.remaining(jobs[j]) for j in node.running), Fraction(0))
        load = node.load
        for j in deliver_work(node, jobs, t):
            got[j] = t
        after = sum((node.remaining(jobs[j]) for j in node.running), Fraction(0))
        # never more than P per step; exactly P when nothing overshot
        assert before - after <= power
        if load and not any(v == t for v in got.values()):
            assert before - after == power
        for j in arrivals.get(t, []):
            node.admit(jobs[j])
    assert got == remaining_oracle(power, sizes, arrivals, 399)


def test_min_completion_time():
    for size in range(1, 30):
        for power in (1, 3, 7):
            node, jobs = node_with(power, [size])
            t = 1
            while not deliver_work(node, jobs, t):
                t += 1
            assert t >= math.ceil(size / power)
            assert t == math.ceil(size / power)


def test_evict_resets_clock():
    node, jobs = node_with(2, [10])
    deliver_work(node, jobs, 1)
    node.evict(jobs[0])
    assert node.load == 0 and node.clock == 0
