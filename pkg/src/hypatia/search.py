"""Policy-guided proof search over the two-stage action space.

A solution step is chosen in two stages, mirroring how the environment is
presented to an agent: first pick a function (axiom, builtin or tactic),
then pick one of its enumerated results.  Search interleaves both stages
lazily, so a function's results are only enumerated when a policy ranks
that function worth expanding; the node budget counts these enumerations.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .actions import (
    ActionError, ActionResult, Derivation, Solution, Step, apply_result,
    enumerate_actions, list_choices,
)
from .domains import Problem, check_goal, make_derivation
from .kernel import App, Atom, Context, Declaration, Lit, Term

__all__ = [
    "SearchConfig", "SearchStats", "Policy", "UniformPolicy", "CountPolicy",
    "ReplayPolicy", "solve", "validate", "solution_probability", "evaluate",
]


@dataclass(frozen=True)
class SearchConfig:
    algorithm: str = "best-first"  # or "beam"
    beam_width: int = 64
    budget: int = 1000             # max enumeration expansions
    max_depth: int = 12
    seed: int = 0

    def __post_init__(self):
        assert self.budget >= 1 and self.max_depth >= 1


@dataclass
class SearchStats:
    expansions: int = 0
    nodes: int = 0


class Policy:
    """Scores for the two decision stages; higher is better.

    Scores must be finite and side-effect free; ``update`` consumes
    successful episodes and returns the improved policy.
    """

    def score_choice(self, derivation: Derivation, function: str) -> float:
        raise NotImplementedError

    def score_result(self, derivation: Derivation, function: str,
                     result: ActionResult) -> float:
        raise NotImplementedError

    def update(self, episodes) -> "Policy":
        return self


class UniformPolicy(Policy):
    """Scores everything equally; best-first degenerates to breadth-first."""

    def score_choice(self, derivation, function):
        return 0.0

    def score_result(self, derivation, function, result):
        return 0.0


def _term_head(t: Term) -> str:
    match t:
        case App(Atom(h), _):
            return h
        case Atom(n):
            return n
        case Lit(_):
            return "lit"
    return "?"


def _type_head(ty: Term) -> str:
    match ty:
        case App(Atom("="), (l, _)):
            return "=" + _term_head(l)
    return _term_head(ty)


def _term_size(t: Term) -> int:
    match t:
        case App(head, args):
            return _term_size(head) + sum(_term_size(a) for a in args)
    return 1


def _equation_head(dtype: Term) -> str:
    """Head operator of the expression side of the problem equality."""
    match dtype:
        case App(Atom("="), (l, r)):
            expr = r if isinstance(l, (Atom, Lit)) else l
            return _term_head(expr)
    return _term_head(dtype)


def _goal_key(verifier: str, dtype: Term) -> str:
    return f"{verifier[:4]}:{_equation_head(dtype)}"


def _goal_head(derivation: Derivation) -> str:
    from .domains import _SECTION_BY_ID
    section, _, _ = derivation.problem_id.rpartition("-")
    sec = _SECTION_BY_ID.get(section)
    verifier = sec.verifier if sec is not None else "?"
    for d in derivation.ctx.state:
        if d.name == "equation":
            return _goal_key(verifier, d.dtype)
    for d in derivation.ctx.state:
        if isinstance(d.dtype, App):
            return _goal_key(verifier, d.dtype)
    return "?"


class CountPolicy(Policy):
    """Deterministic count-based policy trained on successful episodes only.

    A function choice is scored log((successes+1)/(attempts+2)), keyed by
    (function, goal kind and head of the problem equation, depth bucket);
    a result is scored the same way, keyed by (function, head of the
    result type), minus a small penalty per result-term node so that
    search prefers results that shrink what remains to be done.
    """

    size_penalty = 0.02

    def __init__(self, choice_counts=None, result_counts=None):
        self.choice_counts = dict(choice_counts or {})
        self.result_counts = dict(result_counts or {})

    @staticmethod
    def _score(counts, specific, backoff) -> float:
        s, a = counts.get(specific, (0, 0))
        if a == 0:
            # Back off to counts aggregated over goal kinds, so skills
            # learned in one section transfer to states of another.
            s, a = counts.get(backoff, (0, 0))
        return math.log((s + 1) / (a + 2))

    @staticmethod
    def _depth_bucket(derivation) -> int:
        return min(len(derivation.steps), 3)

    def score_choice(self, derivation, function):
        depth = self._depth_bucket(derivation)
        specific = (function, _goal_head(derivation), depth)
        return self._score(self.choice_counts, specific, (function, depth))

    def score_result(self, derivation, function, result):
        head = _type_head(result.vtype)
        return self._score(self.result_counts, (function, head), (function,)) \
            - self.size_penalty * _term_size(result.vtype)

    def update(self, episodes) -> "CountPolicy":
        """A new policy with counts rebuilt from scratch on the episodes."""
        choice: dict = {}
        result: dict = {}

        def bump(table, *keys):
            for key in keys:
                s, a = table.get(key, (0, 0))
                table[key] = (s + 1, a + 1)

        for problem, solution in episodes:
            ghead = _goal_key(problem.verifier, _problem_equation(problem))
            for depth, step in enumerate(solution.steps):
                d = min(depth, 3)
                bump(choice, (step.function, ghead, d), (step.function, d))
                head = _type_head(step.result.vtype)
                bump(result, (step.function, head), (step.function,))
        return CountPolicy(choice, result)

    # -- textual count tables ------------------------------------------
    #
    # Aggregated (backoff) keys print with '*' in the goal-kind column.

    def to_text(self) -> str:
        lines = ["# policy: counts"]
        for key, (s, a) in sorted(self.choice_counts.items(), key=str):
            if len(key) == 3:
                f, ghead, depth = key
            else:
                (f, depth), ghead = key, "*"
            lines.append(f"choice | {f} | {ghead} | {depth} | {s} {a}")
        for key, (s, a) in sorted(self.result_counts.items(), key=str):
            if len(key) == 2:
                f, thead = key
            else:
                (f,), thead = key, "*"
            lines.append(f"result | {f} | {thead} | {s} {a}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "CountPolicy":
        choice: dict = {}
        result: dict = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(" | ")]
            if parts[0] == "choice":
                _, f, ghead, depth, counts = parts
                s, a = counts.split()
                key = (f, int(depth)) if ghead == "*" else (f, ghead, int(depth))
                choice[key] = (int(s), int(a))
            elif parts[0] == "result":
                _, f, thead, counts = parts
                s, a = counts.split()
                key = (f,) if thead == "*" else (f, thead)
                result[key] = (int(s), int(a))
        return CountPolicy(choice, result)


def _problem_equation(problem: Problem) -> Term:
    for d in problem.declarations:
        if d.name == "equation":
            return d.dtype
    for d in problem.declarations:
        if isinstance(d.dtype, App):
            return d.dtype
    return Atom("?")


class ReplayPolicy(Policy):
    """Follows recorded solutions exactly; used as a scripted oracle."""

    def __init__(self, solutions):
        self.by_problem = {s.problem_id: s for s in solutions}

    def _expected(self, derivation):
        sol = self.by_problem.get(derivation.problem_id)
        if sol is None or len(derivation.steps) >= len(sol.steps):
            return None
        for own, recorded in zip(derivation.steps, sol.steps):
            if own.result.value != recorded.result.value:
                return None
        return sol.steps[len(derivation.steps)]

    def score_choice(self, derivation, function):
        step = self._expected(derivation)
        return 0.0 if step is not None and step.function == function else -100.0

    def score_result(self, derivation, function, result):
        step = self._expected(derivation)
        return 0.0 if step is not None and step.result.value == result.value else -100.0


# ---------------------------------------------------------------------------
# Search


def solve(problem: Problem, policy: Policy, cfg: SearchConfig,
          registry=None, library: Optional[Context] = None,
          stats: Optional[SearchStats] = None) -> Optional[Solution]:
    """Search for a goal state; None if the budget runs out.

    Returns the first derivation satisfying the problem's verifier, as an
    ordered action list.  Deterministic given (problem, policy, config).
    """
    root = make_derivation(problem, library)
    if check_goal(problem, root.ctx):
        return Solution(problem.id, problem.section, problem.seed, ())
    if cfg.algorithm == "beam":
        return _beam(problem, root, policy, cfg, registry, stats)
    return _best_first(problem, root, policy, cfg, registry, stats)


def _solution(problem: Problem, d: Derivation) -> Solution:
    return Solution(problem.id, problem.section, problem.seed, d.steps)


def _children(d, f, policy, registry, base_score, stats):
    """Expand one (state, function) choice: enumerate and apply results."""
    out = []
    existing = {decl.definition for decl in d.ctx.state}
    for r in enumerate_actions(d.ctx, f, registry):
        if r.value in existing:
            continue
        child = Derivation(
            d.problem_id,
            d.ctx.extend_trusted(_decl_for(d, r)),
            d.steps + (Step(f, r, f"!step{len(d.steps)}"),))
        if stats is not None:
            stats.nodes += 1
        score = base_score + policy.score_result(d, f, r)
        out.append((score, child))
    return out


def _decl_for(d: Derivation, r: ActionResult) -> Declaration:
    return Declaration(f"!step{len(d.steps)}", r.vtype, r.value)


def _best_first(problem, root, policy, cfg, registry, stats):
    counter = 0
    # Frontier holds (priority, tiebreak, kind, derivation, function).
    frontier: list = []

    def push_state(d, score):
        nonlocal counter
        if len(d.steps) >= cfg.max_depth:
            return
        for f in list_choices(d.ctx, registry):
            counter += 1
            heapq.heappush(frontier, (
                -(score + policy.score_choice(d, f)), counter, d, f, score))

    push_state(root, 0.0)
    expansions = 0
    while frontier and expansions < cfg.budget:
        neg, _, d, f, state_score = heapq.heappop(frontier)
        expansions += 1
        if stats is not None:
            stats.expansions = expansions
        base = -neg
        for score, child in _children(d, f, policy, registry, base, stats):
            if check_goal(problem, child.ctx):
                return _solution(problem, child)
            push_state(child, score)
    return None


def _beam(problem, root, policy, cfg, registry, stats):
    layer = [(0.0, 0, root)]
    expansions = 0
    counter = 0
    for _ in range(cfg.max_depth):
        candidates = []
        for score, _, d in layer:
            for f in list_choices(d.ctx, registry):
                if expansions >= cfg.budget:
                    return None
                expansions += 1
                if stats is not None:
                    stats.expansions = expansions
                base = score + policy.score_choice(d, f)
                for cscore, child in _children(d, f, policy, registry, base, stats):
                    if check_goal(problem, child.ctx):
                        return _solution(problem, child)
                    counter += 1
                    candidates.append((cscore, counter, child))
        if not candidates:
            return None
        candidates.sort(key=lambda x: (-x[0], x[1]))
        layer = candidates[:cfg.beam_width]
    return None


# ---------------------------------------------------------------------------
# Validation and replay analysis


def validate(problem: Problem, sol: Solution, registry=None,
             library: Optional[Context] = None) -> bool:
    """Replay a solution, checking each step against the action space."""
    d = make_derivation(problem, library)
    for step in sol.steps:
        try:
            results = enumerate_actions(d.ctx, step.function, registry)
        except ActionError:
            return False
        match = next((r for r in results if r.value == step.result.value), None)
        if match is None or match.vtype != step.result.vtype:
            return False
        try:
            d = apply_result(d, step.function, match, allow_duplicate_values=True)
        except ActionError:
            return False
    return check_goal(problem, d.ctx)


def solution_probability(problem: Problem, sol: Solution, registry=None,
                         library: Optional[Context] = None,
                         count_empty_choices: bool = True) -> Fraction:
    """Chance a uniformly random agent would retrace this solution.

    At every step the agent picks a function, then one of that function's
    results; the probability is the exact product of the inverses of those
    counts.  By default every listed function counts as a choice; with
    ``count_empty_choices=False`` only functions with at least one result
    consume a decision.
    """
    if not validate(problem, sol, registry, library):
        raise ActionError(f"solution for {problem.id} does not validate")
    d = make_derivation(problem, library)
    p = Fraction(1)
    for step in sol.steps:
        available = 0
        chosen_count = 0
        for f in list_choices(d.ctx, registry):
            results = enumerate_actions(d.ctx, f, registry)
            if results or count_empty_choices:
                available += 1
            if f == step.function:
                chosen_count = len(results)
        p *= Fraction(1, available) * Fraction(1, chosen_count)
        match = next(r for r in enumerate_actions(d.ctx, step.function, registry)
                     if r.value == step.result.value)
        d = apply_result(d, step.function, match, allow_duplicate_values=True)
    return p


def evaluate(policy: Policy, heldout: dict[str, list[Problem]],
             cfg: SearchConfig, registry=None,
             library: Optional[Context] = None) -> dict[str, float]:
    """Fraction of held-out problems solved per section within budget."""
    report: dict[str, float] = {}
    for section, problems in heldout.items():
        if not problems:
            continue
        solved = 0
        for p in problems:
            if solve(p, policy, cfg, registry, library) is not None:
                solved += 1
        report[section] = solved / len(problems)
    return report
