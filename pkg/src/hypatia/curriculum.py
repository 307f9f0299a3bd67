"""Curricula from the dependency structure of induced tactics.

Solved problems are partially ordered by strict inclusion of the tactic
dependency closures of their solutions; any topological order of that
graph is a curriculum.  This module builds the order, samples curricula
stochastically, measures their agreement with the expert section order by
normalized Kendall tau distance, and drives the gated block schedule used
to train a second generation.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .domains import SECTIONS, Problem
from .kernel import KernelError
from .tactics import TacticRegistry

__all__ = [
    "ProblemNode", "ProblemOrderGraph", "Curriculum", "CurriculumError",
    "build_order", "sample_topological", "kendall_tau_to_khan",
    "count_inversions", "compare_to_random", "Scheduler", "ComparisonReport",
]

_KHAN_INDEX = {s.id: s.khan_index for s in SECTIONS}


class CurriculumError(KernelError):
    pass


@dataclass(frozen=True)
class ProblemNode:
    problem_id: str
    section: str
    khan_index: int
    closure: frozenset[str]


@dataclass(frozen=True)
class ProblemOrderGraph:
    """Nodes with tactic closures; edge a -> b iff closure(a) < closure(b).

    Edges are implied by the closures (strict subset), so only nodes are
    stored; the relation is recovered on demand.
    """
    nodes: tuple[ProblemNode, ...]

    def precedes(self, a: ProblemNode, b: ProblemNode) -> bool:
        return a.closure < b.closure

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for i, a in enumerate(self.nodes):
            for j, b in enumerate(self.nodes):
                if i != j and self.precedes(a, b):
                    out.append((i, j))
        return out

    def to_json(self) -> str:
        return json.dumps({
            "problems": [{
                "id": n.problem_id,
                "section": n.section,
                "khan_index": n.khan_index,
                "closure": sorted(n.closure),
            } for n in self.nodes],
        }, indent=2)

    @staticmethod
    def from_json(text: str) -> "ProblemOrderGraph":
        data = json.loads(text)
        nodes = tuple(
            ProblemNode(p["id"], p["section"], int(p["khan_index"]),
                        frozenset(p["closure"]))
            for p in data["problems"])
        return ProblemOrderGraph(nodes)


@dataclass(frozen=True)
class Curriculum:
    """A topological order of solved problems, tagged with section indices."""
    problem_ids: tuple[str, ...]
    khan_indices: tuple[int, ...]
    seed: int


def build_order(corpus, registry: TacticRegistry) -> ProblemOrderGraph:
    """The problem order graph for a corpus of (problem, solution) pairs.

    A problem's closure is the set of tactics its solutions invoke plus
    everything those tactics depend on; problems seen several times use
    the union over their stored solutions.  Insertion order of first
    appearance is kept, so the graph does not depend on file ordering
    beyond that of the problems themselves.
    """
    closures: dict[str, set[str]] = {}
    meta: dict[str, Problem] = {}
    for problem, solution in corpus:
        tactics = {s.function for s in solution.steps
                   if registry.lookup(s.function) is not None}
        closure = set(tactics)
        for name in tactics:
            closure |= registry.dependency_set(name)
        closures.setdefault(problem.id, set()).update(closure)
        meta.setdefault(problem.id, problem)
    nodes = []
    for pid in sorted(closures):
        problem = meta[pid]
        khan = _KHAN_INDEX.get(problem.section, 0)
        nodes.append(ProblemNode(pid, problem.section, khan,
                                 frozenset(closures[pid])))
    return ProblemOrderGraph(tuple(nodes))


def sample_topological(g: ProblemOrderGraph, seed: int) -> Curriculum:
    """One random linear extension of the graph.

    Repeatedly picks uniformly among the currently minimal problems: those
    all of whose strictly smaller closures have already been emitted.
    """
    rng = random.Random(seed)
    groups: dict[frozenset, list[ProblemNode]] = {}
    for n in g.nodes:
        groups.setdefault(n.closure, []).append(n)
    keys = list(groups)
    remaining = {c: list(groups[c]) for c in keys}
    order: list[ProblemNode] = []
    total = len(g.nodes)
    while len(order) < total:
        unlocked = [
            c for c in keys
            if remaining[c] and all(
                not remaining[other] for other in keys if other < c)
        ]
        pool_sizes = [len(remaining[c]) for c in unlocked]
        k = rng.randrange(sum(pool_sizes))
        for c, size in zip(unlocked, pool_sizes):
            if k < size:
                order.append(remaining[c].pop(k))
                break
            k -= size
    return Curriculum(tuple(n.problem_id for n in order),
                      tuple(n.khan_index for n in order), seed)


# ---------------------------------------------------------------------------
# Kendall tau distance to the expert order


def count_inversions(seq) -> int:
    """Number of pairs i < j with seq[i] > seq[j] (merge count)."""
    a = list(seq)
    if len(a) < 2:
        return 0

    def rec(xs):
        if len(xs) <= 1:
            return xs, 0
        mid = len(xs) // 2
        left, nl = rec(xs[:mid])
        right, nr = rec(xs[mid:])
        merged = []
        inv = nl + nr
        i = j = 0
        while i < len(left) and j < len(right):
            if left[i] <= right[j]:
                merged.append(left[i])
                i += 1
            else:
                merged.append(right[j])
                j += 1
                inv += len(left) - i
        merged.extend(left[i:])
        merged.extend(right[j:])
        return merged, inv

    return rec(a)[1]


def kendall_tau_to_khan(c: Curriculum) -> Fraction:
    """Normalized inversion count of the curriculum's section indices."""
    n = len(c.khan_indices)
    if n < 2:
        return Fraction(0)
    return Fraction(count_inversions(c.khan_indices), n * (n - 1) // 2)


@dataclass(frozen=True)
class ComparisonReport:
    topological_taus: tuple[float, ...]
    random_taus: tuple[float, ...]
    topological_mean: float
    random_mean: float
    topological_ci: tuple[float, float]
    random_ci: tuple[float, float]
    confidence: float

    @property
    def separated(self) -> bool:
        """Whether the confidence intervals do not overlap."""
        return self.topological_ci[1] < self.random_ci[0] or \
            self.random_ci[1] < self.topological_ci[0]

    def to_json(self) -> str:
        return json.dumps({
            "confidence": self.confidence,
            "topological": {
                "mean": self.topological_mean,
                "ci": list(self.topological_ci),
                "taus": list(self.topological_taus),
            },
            "random": {
                "mean": self.random_mean,
                "ci": list(self.random_ci),
                "taus": list(self.random_taus),
            },
            "separated": self.separated,
        }, indent=2)


def compare_to_random(g: ProblemOrderGraph, n_samples: int = 100,
                      confidence: float = 0.99, seed: int = 0,
                      bootstrap: int = 10_000) -> ComparisonReport:
    """Mean normalized tau of topological samples vs. random permutations.

    Both means carry bootstrapped percentile confidence intervals at the
    requested level (10,000 resamples by default).
    """
    labels = [n.khan_index for n in g.nodes]
    topo = []
    rnd = []
    rng = random.Random(seed ^ 0x5EED)
    for i in range(n_samples):
        c = sample_topological(g, seed=seed * 100_003 + i)
        topo.append(float(kendall_tau_to_khan(c)))
        shuffled = list(labels)
        rng.shuffle(shuffled)
        n = len(shuffled)
        denom = n * (n - 1) // 2 if n > 1 else 1
        rnd.append(count_inversions(shuffled) / denom)
    topo_ci = _bootstrap_ci(topo, confidence, bootstrap, seed + 1)
    rnd_ci = _bootstrap_ci(rnd, confidence, bootstrap, seed + 2)
    return ComparisonReport(
        tuple(topo), tuple(rnd),
        float(np.mean(topo)), float(np.mean(rnd)),
        topo_ci, rnd_ci, confidence)


def _bootstrap_ci(values, confidence: float, n_resamples: int,
                  seed: int) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    gen = np.random.default_rng(seed)
    idx = gen.integers(0, len(arr), size=(n_resamples, len(arr)))
    means = arr[idx].mean(axis=1)
    alpha = (1.0 - confidence) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# Gated block schedule


class Scheduler:
    """Stateful curriculum sampler: contiguous blocks, unlocked by success.

    Starts sampling uniformly from the first block; each time a batch
    success rate at or above the gate is reported, the next block joins
    the pool.  Once everything is unlocked, sampling is uniform over the
    whole curriculum.
    """

    def __init__(self, curriculum: Curriculum, blocks: int = 3,
                 gate: float = 0.9):
        if blocks < 1 or not 0 < gate <= 1:
            raise CurriculumError("need blocks >= 1 and 0 < gate <= 1")
        ids = list(curriculum.problem_ids)
        self.blocks = [list(b) for b in np.array_split(ids, blocks)]
        self.gate = gate
        self.unlocked = 1
        self.iteration = 0
        self.unlock_events: list[tuple[int, int]] = []

    @property
    def pool(self) -> list[str]:
        out = []
        for b in self.blocks[:self.unlocked]:
            out.extend(b)
        return out

    def sample(self, rng: random.Random) -> str:
        pool = self.pool
        return pool[rng.randrange(len(pool))]

    def report(self, success_rate: float) -> None:
        """Record one training batch; unlock the next block when gated."""
        self.iteration += 1
        if success_rate >= self.gate and self.unlocked < len(self.blocks):
            self.unlocked += 1
            self.unlock_events.append((self.iteration, self.unlocked))

    def state(self) -> dict:
        return {"unlocked": self.unlocked, "iteration": self.iteration,
                "unlock_events": self.unlock_events}

    def restore(self, state: dict) -> None:
        self.unlocked = int(state["unlocked"])
        self.iteration = int(state["iteration"])
        self.unlock_events = [tuple(e) for e in state["unlock_events"]]
