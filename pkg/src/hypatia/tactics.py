"""Tactics: reusable straight-line action sequences induced from solutions.

A tactic names a parameterized sequence of actions; executing one over a
state lazily discovers every consistent way to fill its parameters,
branching when several candidates fit and exposing only the final result
of each complete trace.  New tactics are induced by anti-unifying pairs of
same-shaped solution segments (their least general generalization), scored
by how much of the solution corpus they compress per parameter.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Union

from .actions import (
    ActionError, ActionResult, Solution, Step, enumerate_actions,
)
from .kernel import (
    App, Arrow, Atom, Context, Declaration, KernelError, Lit, Term, Var,
    format_term, parse_term,
)

__all__ = [
    "ParamRef", "StepRef", "TacticStep", "Tactic", "Trace", "TacticRegistry",
    "TacticError", "execute_tactic", "antiunify", "instantiate", "utility",
    "match_count", "induce", "rewrite_solutions", "dependency_set",
    "parse_tactics", "format_tactic",
]


class TacticError(KernelError):
    pass


@dataclass(frozen=True)
class ParamRef:
    """Reference to a tactic parameter (p0, p1, ...)."""
    index: int


@dataclass(frozen=True)
class StepRef:
    """Reference to the output of an earlier step inside the same tactic."""
    index: int


Arg = Union[Term, ParamRef, StepRef]


@dataclass(frozen=True)
class TacticStep:
    action: str
    args: tuple[Arg, ...]


@dataclass(frozen=True)
class Tactic:
    """A named action sequence over parameters; at least two steps."""
    name: str
    params: tuple[str, ...]
    steps: tuple[TacticStep, ...]

    def __post_init__(self):
        if len(self.steps) < 2:
            raise TacticError("a tactic needs at least two steps")
        used = {a.index for s in self.steps for a in s.args
                if isinstance(a, ParamRef)}
        if used != set(range(len(self.params))):
            raise TacticError(f"{self.name}: unreferenced or unknown parameters")

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class Trace:
    """One consistent parameter assignment discovered during execution."""
    tactic: str
    binding: tuple[Term, ...]
    step_results: tuple[ActionResult, ...]
    result: ActionResult


# ---------------------------------------------------------------------------
# Registry


class TacticRegistry:
    """Registered tactics, insertion-ordered and acyclic by construction.

    A tactic may only invoke axioms, builtins, and previously registered
    tactics, so the dependency graph over names can never gain a cycle.
    """

    def __init__(self):
        self._tactics: dict[str, Tactic] = {}

    def __len__(self):
        return len(self._tactics)

    def names(self) -> list[str]:
        return list(self._tactics)

    def lookup(self, name: str) -> Optional[Tactic]:
        return self._tactics.get(name)

    def fresh_name(self) -> str:
        return f"tactic{len(self._tactics):03d}"

    def register(self, tactic: Tactic) -> None:
        if tactic.name in self._tactics:
            raise TacticError(f"tactic {tactic.name!r} already registered")
        for step in tactic.steps:
            if step.action == tactic.name:
                raise TacticError("tactics may not call themselves")
        self._tactics[tactic.name] = tactic

    def register_fresh(self, tactic: Tactic) -> Tactic:
        named = replace(tactic, name=self.fresh_name())
        self.register(named)
        return named

    def enumerate(self, ctx: Context, name: str) -> list[ActionResult]:
        t = self.lookup(name)
        if t is None:
            raise ActionError(f"unknown tactic {name!r}")
        return [tr.result for tr in execute_tactic(ctx, t, self)]

    def dependency_set(self, name: str) -> set[str]:
        return dependency_set(self.lookup(name), self)

    def to_text(self) -> str:
        return "\n".join(format_tactic(t) for t in self._tactics.values()) \
            + ("\n" if self._tactics else "")

    @staticmethod
    def from_text(text: str) -> "TacticRegistry":
        reg = TacticRegistry()
        for t in parse_tactics(text):
            reg.register(t)
        return reg


def dependency_set(t: Tactic, registry: TacticRegistry) -> set[str]:
    """All tactics reachable from ``t``'s steps, transitively; ``t`` excluded."""
    out: set[str] = set()
    work = [s.action for s in t.steps]
    while work:
        name = work.pop()
        if name in out:
            continue
        dep = registry.lookup(name)
        if dep is not None:
            out.add(name)
            work.extend(s.action for s in dep.steps)
    out.discard(t.name)
    return out


# ---------------------------------------------------------------------------
# Execution

_scratch_counter = 0


@dataclass
class _PartialTrace:
    ctx: Context
    binding: dict[int, Term]
    names: list[str]
    results: list[ActionResult]


def execute_tactic(ctx: Context, t: Tactic,
                   registry: Optional[TacticRegistry] = None) -> list[Trace]:
    """All complete traces of ``t`` over the state.

    Steps run in order; each step's enumerated candidates are matched
    against the step's argument spec under the parameter bindings found so
    far.  Inconsistent candidates prune the branch, multiple consistent
    ones branch the trace.  Traces are deduplicated by (binding, value).
    """
    global _scratch_counter
    _scratch_counter += 1
    prefix = f"!tmp{_scratch_counter}"
    partials = [_PartialTrace(ctx, {}, [], [])]
    for k, step in enumerate(t.steps):
        nxt: list[_PartialTrace] = []
        for pt in partials:
            try:
                candidates = enumerate_actions(pt.ctx, step.action, registry)
            except ActionError as e:
                raise TacticError(f"in {t.name}: {e}") from e
            for r in candidates:
                binding = _match_args(step.args, r.args, pt)
                if binding is None:
                    continue
                name = f"{prefix}_{k}_{len(nxt)}"
                child = _PartialTrace(
                    pt.ctx.extend_trusted(Declaration(name, r.vtype, r.value)),
                    binding, pt.names + [name], pt.results + [r])
                nxt.append(child)
        partials = nxt
        if not partials:
            return []
    scratch_names = set()
    traces = []
    seen = set()
    for pt in partials:
        final = pt.results[-1]
        defs = {n: r.value for n, r in zip(pt.names, pt.results)}
        value = _inline(final.value, defs)
        binding = tuple(pt.binding[i] for i in range(len(t.params)))
        key = (binding, value)
        if key in seen:
            continue
        seen.add(key)
        result = ActionResult(t.name, binding, value, final.vtype)
        traces.append(Trace(t.name, binding, tuple(pt.results), result))
    return traces


def _match_args(spec: tuple[Arg, ...], actual: tuple[Term, ...],
                pt: _PartialTrace) -> Optional[dict[int, Term]]:
    if len(spec) != len(actual):
        return None
    binding = pt.binding
    fresh: Optional[dict[int, Term]] = None
    for a, b in zip(spec, actual):
        if isinstance(a, ParamRef):
            bound = (fresh or binding).get(a.index)
            if bound is None:
                if _mentions_any(b, pt.names):
                    return None  # internal objects cannot leak into parameters
                if fresh is None:
                    fresh = dict(binding)
                fresh[a.index] = b
            elif bound != b:
                return None
        elif isinstance(a, StepRef):
            if a.index >= len(pt.names) or b != Atom(pt.names[a.index]):
                return None
        elif a != b:
            return None
    return fresh if fresh is not None else binding


def _mentions_any(t: Term, names: list[str]) -> bool:
    if not names:
        return False
    nameset = set(names)
    def walk(u: Term) -> bool:
        match u:
            case Atom(n):
                return n in nameset
            case App(head, args):
                return walk(head) or any(walk(a) for a in args)
        return False
    return walk(t)


def _inline(t: Term, defs: dict[str, Term]) -> Term:
    match t:
        case Atom(n) if n in defs:
            return _inline(defs[n], defs)
        case App(head, args):
            return App(_inline(head, defs), tuple(_inline(a, defs) for a in args))
    return t


# ---------------------------------------------------------------------------
# Anti-unification


def _to_relative(steps: tuple[Step, ...]) -> list[TacticStep]:
    """Rewrite in-segment output references as step references."""
    names = {s.name: i for i, s in enumerate(steps)}
    out = []
    for step in steps:
        args: list[Arg] = []
        for a in step.result.args:
            if isinstance(a, Atom) and a.name in names and names[a.name] < len(out):
                args.append(StepRef(names[a.name]))
            else:
                args.append(a)
        out.append(TacticStep(step.function, tuple(args)))
    return out


def antiunify(a: tuple[Step, ...], b: tuple[Step, ...]) -> Optional[Tactic]:
    """The least general tactic generalizing both segments, if any.

    Position by position, equal concrete arguments stay concrete, differing
    pairs share a parameter (the same pair always reuses the same one), and
    in-segment dataflow must line up exactly; segments calling different
    actions have no generalization.
    """
    if len(a) != len(b) or len(a) < 2:
        return None
    sa, sb = _to_relative(a), _to_relative(b)
    pairs: dict[tuple, ParamRef] = {}
    steps: list[TacticStep] = []
    for x, y in zip(sa, sb):
        if x.action != y.action or len(x.args) != len(y.args):
            return None
        args: list[Arg] = []
        for u, v in zip(x.args, y.args):
            if isinstance(u, StepRef) or isinstance(v, StepRef):
                if u != v:
                    return None  # mismatched dataflow is not expressible
                args.append(u)
            elif u == v:
                args.append(u)
            else:
                ref = pairs.get((u, v))
                if ref is None:
                    ref = ParamRef(len(pairs))
                    pairs[(u, v)] = ref
                args.append(ref)
        steps.append(TacticStep(x.action, tuple(args)))
    params = tuple(f"p{i}" for i in range(len(pairs)))
    return Tactic("candidate", params, tuple(steps))


def instantiate(t: Tactic, segment: tuple[Step, ...]) -> Optional[dict[int, Term]]:
    """Parameter binding making ``t`` produce exactly this segment, if any."""
    if len(t.steps) != len(segment):
        return None
    rel = _to_relative(segment)
    binding: dict[int, Term] = {}
    for ts, ss in zip(t.steps, rel):
        if ts.action != ss.action or len(ts.args) != len(ss.args):
            return None
        for spec, actual in zip(ts.args, ss.args):
            if isinstance(spec, ParamRef):
                if isinstance(actual, (ParamRef, StepRef)):
                    return None
                bound = binding.get(spec.index)
                if bound is None:
                    binding[spec.index] = actual
                elif bound != actual:
                    return None
            elif spec != actual:
                return None
    return binding


# ---------------------------------------------------------------------------
# Induction


def _segments(solution: Solution, max_len: int):
    steps = solution.steps
    for length in range(2, max_len + 1):
        for i in range(len(steps) - length + 1):
            yield steps[i:i + length]


def match_count(t: Tactic, corpus) -> int:
    """Segments of the corpus that ``t`` generalizes (overlaps included)."""
    n = 0
    size = len(t.steps)
    for _, solution in corpus:
        steps = solution.steps
        for i in range(len(steps) - size + 1):
            if instantiate(t, steps[i:i + size]) is not None:
                n += 1
    return n


def utility(t: Tactic, corpus) -> Fraction:
    """Corpus compression per parameter: m(t) * (|t| - 1) / max(1, #params)."""
    m = match_count(t, corpus)
    return Fraction(m * (len(t.steps) - 1), max(1, len(t.params)))


def _tactic_key(t: Tactic) -> str:
    return ";".join(
        s.action + "(" + ",".join(_arg_text(a) for a in s.args) + ")"
        for s in t.steps)


def _arg_text(a: Arg) -> str:
    if isinstance(a, ParamRef):
        return f"p{a.index}"
    if isinstance(a, StepRef):
        return f"step{a.index}"
    return format_term(a)


def induce(corpus, u_min: Fraction = Fraction(4), max_len: int = 4,
           name_start: int = 0) -> list[Tactic]:
    """Candidate tactics from pairwise generalization of solution segments.

    All contiguous subsequences of length 2..max_len are extracted, bucketed
    by action-name signature (only equal signatures can generalize), and
    anti-unified pairwise; candidates scoring at least ``u_min`` come back
    highest-utility first, deduplicated up to parameter renaming and named
    tactic{NNN} from ``name_start``.
    """
    distinct: dict[str, tuple[Step, ...]] = {}
    multiplicity: dict[str, int] = {}
    for _, solution in corpus:
        for seg in _segments(solution, max_len):
            key = ";".join(
                f"{s.function}({','.join(format_term(a) for a in s.result.args)})"
                for s in seg)
            distinct.setdefault(key, seg)
            multiplicity[key] = multiplicity.get(key, 0) + 1

    buckets: dict[tuple, list[tuple[Step, ...]]] = {}
    for key, seg in distinct.items():
        sig = tuple(s.function for s in seg)
        buckets.setdefault(sig, []).append(seg)

    candidates: dict[str, Tactic] = {}
    for sig, segs in buckets.items():
        for i, a in enumerate(segs):
            if multiplicity[_content_key(a)] >= 2:
                t = antiunify(a, a)
                if t is not None:
                    candidates.setdefault(_tactic_key(t), t)
            for b in segs[i + 1:]:
                t = antiunify(a, b)
                if t is not None:
                    candidates.setdefault(_tactic_key(t), t)

    scored = []
    for key, t in candidates.items():
        u = utility(t, corpus)
        if u >= u_min:
            scored.append((u, t))
    scored.sort(key=lambda x: (-x[0], len(x[1].params), len(x[1].steps),
                               _tactic_key(x[1])))
    return [replace(t, name=f"tactic{name_start + i:03d}")
            for i, (_, t) in enumerate(scored)]


def _content_key(seg: tuple[Step, ...]) -> str:
    return ";".join(
        f"{s.function}({','.join(format_term(a) for a in s.result.args)})"
        for s in seg)


# ---------------------------------------------------------------------------
# Rewriting solutions with a tactic


def rewrite_solutions(corpus, t: Tactic, registry: TacticRegistry,
                      library: Optional[Context] = None) -> list:
    """Replace every matching segment with a single tactic invocation.

    Greedy left-to-right; a replacement is only kept when the internal
    steps it hides are never referenced later and the rewritten solution
    still replays to a goal state (otherwise the original is kept).
    """
    from .search import validate

    out = []
    for problem, solution in corpus:
        rewritten = _rewrite_one(solution, t)
        if rewritten is not None and validate(problem, rewritten, registry, library):
            out.append((problem, rewritten))
        else:
            out.append((problem, solution))
    return out


def _rewrite_one(solution: Solution, t: Tactic) -> Optional[Solution]:
    steps = solution.steps
    size = len(t.steps)
    new_steps: list[Step] = []
    rename: dict[str, Term] = {}
    i = 0
    changed = False
    while i < len(steps):
        binding = None
        if i + size <= len(steps):
            binding = instantiate(t, steps[i:i + size])
            if binding is not None and _internally_referenced(steps, i, size):
                binding = None
        if binding is not None:
            segment = steps[i:i + size]
            defs = {s.name: _apply_rename(s.result.value, rename)
                    for s in segment[:-1]}
            final = segment[-1]
            args = tuple(_apply_rename(binding[k], rename)
                         for k in range(len(t.params)))
            value = _inline(_apply_rename(final.result.value, rename), defs)
            vtype = _apply_rename(final.result.vtype, rename)
            name = f"!step{len(new_steps)}"
            rename[final.name] = Atom(name)
            new_steps.append(Step(
                t.name, ActionResult(t.name, args, value, vtype), name))
            i += size
            changed = True
            continue
        step = steps[i]
        name = f"!step{len(new_steps)}"
        rename[step.name] = Atom(name)
        r = step.result
        new_steps.append(Step(step.function, ActionResult(
            step.function,
            tuple(_apply_rename(a, rename) for a in r.args),
            _apply_rename(r.value, rename),
            _apply_rename(r.vtype, rename),
        ), name))
        i += 1
    if not changed:
        return None
    return Solution(solution.problem_id, solution.section, solution.seed,
                    tuple(new_steps))


def _internally_referenced(steps, start: int, size: int) -> bool:
    internal = {s.name for s in steps[start:start + size - 1]}
    for later in steps[start + size:]:
        for a in later.result.args:
            if _mentions_any(a, list(internal)):
                return True
    return False


def _apply_rename(term: Term, rename: dict[str, Term]) -> Term:
    if not rename:
        return term
    match term:
        case Atom(n) if n in rename:
            return rename[n]
        case App(head, args):
            return App(_apply_rename(head, rename),
                       tuple(_apply_rename(a, rename) for a in args))
    return term


# ---------------------------------------------------------------------------
# Tactic files
#
#   tactic tactic000(p0, p1) {
#     step0: +-_assoc p0
#     step1: rewrite step0 p1 0
#   }

_PARAM_RE = re.compile(r"^p(\d+)$")
_STEP_RE = re.compile(r"^step(\d+)$")
_HEADER_RE = re.compile(r"^tactic\s+(\S+)\s*\(([^)]*)\)\s*\{$")
_LINE_RE = re.compile(r"^step(\d+):\s*(\S+)\s*(.*)$")


def format_tactic(t: Tactic) -> str:
    lines = [f"tactic {t.name}({', '.join(t.params)}) {{"]
    for i, s in enumerate(t.steps):
        args = " ".join(_arg_text(a) for a in s.args)
        lines.append(f"  step{i}: {s.action}" + (f" {args}" if args else ""))
    lines.append("}")
    return "\n".join(lines)


def parse_tactics(text: str) -> list[Tactic]:
    tactics = []
    name = None
    params: tuple[str, ...] = ()
    steps: list[TacticStep] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _HEADER_RE.match(line)
        if m:
            name = m.group(1)
            params = tuple(p.strip() for p in m.group(2).split(",") if p.strip())
            steps = []
            continue
        if line == "}":
            if name is None:
                raise TacticError("unexpected '}' outside a tactic")
            tactics.append(Tactic(name, params, tuple(steps)))
            name = None
            continue
        m = _LINE_RE.match(line)
        if m is None or name is None:
            raise TacticError(f"cannot parse tactic line {line!r}")
        if int(m.group(1)) != len(steps):
            raise TacticError(f"out-of-order step in {name!r}")
        steps.append(TacticStep(m.group(2), tuple(_parse_args(m.group(3)))))
    if name is not None:
        raise TacticError(f"unterminated tactic {name!r}")
    return tactics


def _parse_args(text: str) -> list[Arg]:
    from .kernel import _Parser
    p = _Parser(text, allow_literals=True)
    out: list[Arg] = []
    while p.peek() is not None:
        term = p.parse_term()
        if isinstance(term, Atom):
            m = _PARAM_RE.match(term.name)
            if m:
                out.append(ParamRef(int(m.group(1))))
                continue
            m = _STEP_RE.match(term.name)
            if m:
                out.append(StepRef(int(m.group(1))))
                continue
        out.append(term)
    return out
