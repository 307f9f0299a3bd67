"""The finite forward-action space.

One solution step applies a single function (axiom, builtin or tactic) to a
combination of things already in view: declared objects, matched by type,
and expression subterms occurring in the state, matched by value.  A
backtracking argument-filler threads the unifier of each chosen argument
into the remaining parameter types, so dependent parameters narrow as they
are filled.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .kernel import (
    App, Arrow, Atom, Context, Declaration, KernelError, Lit, Term, Var,
    apply_subst, compose_subst, eval_builtin, format_term, free_vars,
    infer_type, param_mode, parse_term, resolve_expression,
    rewrite_occurrences, subterms, unify, TYPE, PROP, TypeError_, _freshen,
)

__all__ = [
    "ActionResult", "Step", "Derivation", "Solution", "ActionError",
    "enumerate_actions", "list_choices", "apply_result", "candidate_pool",
    "write_trace", "read_trace",
]


class ActionError(KernelError):
    """Raised when a result cannot be applied to the current state."""


@dataclass(frozen=True)
class ActionResult:
    """One constructible object: function, chosen arguments, value, type."""
    function: str
    args: tuple[Term, ...]
    value: Term
    vtype: Term
    provenance: tuple[tuple[str, Term], ...] = ()


@dataclass(frozen=True)
class Step:
    """One applied action inside a derivation."""
    function: str
    result: ActionResult
    name: str


@dataclass(frozen=True)
class Derivation:
    """A problem id, the current context, and the steps that built it."""
    problem_id: str
    ctx: Context
    steps: tuple[Step, ...] = ()


@dataclass(frozen=True)
class Solution:
    """The ordered action list that reached a goal state."""
    problem_id: str
    section: str
    seed: int
    steps: tuple[Step, ...]


# ---------------------------------------------------------------------------
# Argument candidates


@dataclass(frozen=True)
class Candidate:
    """A potential argument: the term passed, and its type."""
    term: Term
    type: Term
    is_object: bool


def _sort_of(ctx: Context, t: Term) -> Optional[Term]:
    """The object-level sort of a subterm, or None if it is not one."""
    try:
        ty = infer_type(ctx, t)
    except TypeError_:
        return None
    if isinstance(ty, Atom) and ty.name not in ("type", "prop"):
        return ty
    return None


def candidate_pool(ctx: Context) -> tuple[Candidate, ...]:
    """Argument candidates: declared objects plus state expression subterms.

    Objects are library and state declarations that are not functions or
    axioms (arrow-typed entries are excluded).  Expression subterms are
    harvested from the types of state declarations; only object-level
    terms (those whose type is a plain sort, like ``real``) are kept.
    Deterministic insertion order, duplicates dropped.
    """
    cached = ctx._memo.get("pool")
    if cached is not None:
        return cached
    if ctx.parent is not None and ctx.parent.library is ctx.library \
            and len(ctx.state) == len(ctx.parent.state) + 1:
        base = candidate_pool(ctx.parent)
        pool = list(base)
        seen = {c.term for c in base}
        _harvest_decl(ctx, ctx.state[-1], pool, seen)
    else:
        pool = []
        seen: set[Term] = set()
        for d in ctx.library + ctx.state:
            _harvest_decl(ctx, d, pool, seen)
    out = tuple(pool)
    ctx._memo["pool"] = out
    return out


def _harvest_decl(ctx: Context, d: Declaration, pool: list, seen: set) -> None:
    term = Atom(d.name)
    if not isinstance(d.dtype, Arrow) and term not in seen:
        seen.add(term)
        pool.append(Candidate(term, d.dtype, True))
    if d in ctx.library:
        return
    for s in subterms(d.dtype):
        if s in seen or isinstance(s, (Var, Arrow)):
            continue
        sort = _sort_of(ctx, s)
        if sort is not None:
            seen.add(s)
            pool.append(Candidate(s, sort, False))


def _match(ctx: Context, cand: Candidate, ptype: Term,
           mode: Optional[str] = None) -> Optional[dict]:
    """Unifier admitting ``cand`` for a parameter of type ``ptype``."""
    if mode is None:
        mode = param_mode(ctx, ptype)
    if mode == "value":
        # Cheap shape filter before unifying.
        if isinstance(ptype, App):
            if not isinstance(cand.term, App):
                return None
            if isinstance(ptype.head, Atom) and isinstance(cand.term.head, Atom) \
                    and (ptype.head != cand.term.head
                         or len(ptype.args) != len(cand.term.args)):
                return None
        return unify(cand.term, ptype)
    return unify(cand.type, ptype)


# ---------------------------------------------------------------------------
# Enumeration


def _is_axiom(ctx: Context, d: Declaration) -> bool:
    """Whether a declaration is an enumerable axiom (produces proofs).

    Arrow-typed entries whose output denotes a proposition instance count;
    plain constructors like ``succ : [nat -> nat]`` or the relation symbol
    ``leq : [nat -> nat -> prop]`` do not become actions.
    """
    if not isinstance(d.dtype, Arrow):
        return False
    out = d.dtype.output
    match out:
        case Var(_):
            return True
        case App(_, _):
            return param_mode(ctx, out) == "class"
        case Atom(name):
            if name in ("type", "prop"):
                return False
            decl = ctx.lookup(name)
            return decl is not None and decl.dtype == PROP
    return False


_axiom_names_cache: dict[int, tuple] = {}


def list_choices(ctx: Context, registry=None) -> list[str]:
    """Names of all enumerable functions, in a fixed order.

    Builtins come first (they are the workhorses of every solution), then
    the library's axioms in declaration order, then registered tactics.
    """
    cached = _axiom_names_cache.get(id(ctx.library))
    if cached is None or cached[0] is not ctx.library:
        axioms = [d.name for d in ctx.library if _is_axiom(ctx, d)]
        # Keep the key object alive so its id cannot be reused.
        _axiom_names_cache[id(ctx.library)] = (ctx.library, axioms)
    else:
        axioms = cached[1]
    names = list(ctx.enumerable_builtins)
    names.extend(axioms)
    if registry is not None:
        names.extend(registry.names())
    return names


def enumerate_actions(ctx: Context, f: str, registry=None) -> list[ActionResult]:
    """All results of applying ``f`` to the current state.

    Backtracks over parameters in order, trying every candidate whose type
    (or value, for expression patterns) unifies with the parameter type
    under the bindings accumulated so far.  Results come in a deterministic
    order and are deduplicated by structural equality of their value.
    """
    if registry is not None and registry.lookup(f) is not None:
        results = registry.enumerate(ctx, f)
    elif f in ctx.enumerable_builtins or f in ("eq_refl", "eq_symm", "rewrite", "eval"):
        results = _enumerate_builtin(ctx, f)
    else:
        d = ctx.lookup(f)
        if d is None or not isinstance(d.dtype, Arrow):
            raise ActionError(f"unknown function {f!r}")
        results = _enumerate_axiom(ctx, f, d.dtype)
    out, seen = [], set()
    for r in results:
        if r.value not in seen:
            seen.add(r.value)
            out.append(r)
    return out


_freshened_cache: dict[int, tuple[Arrow, Arrow]] = {}


def _enumerate_axiom(ctx: Context, f: str, arrow: Arrow) -> list[ActionResult]:
    labels = tuple(p.name or f"_{k}" for k, p in enumerate(arrow.params))
    cached = _freshened_cache.get(id(arrow))
    if cached is None or cached[0] is not arrow:
        # Candidates are always closed terms, so one renaming per axiom
        # keeps its variables apart from everything else.  The original
        # arrow is kept alive so its id cannot be reused.
        cached = (arrow, _freshen(arrow))
        _freshened_cache[id(arrow)] = cached
    arrow = cached[1]
    pool = candidate_pool(ctx)
    results: list[ActionResult] = []

    def fill(i: int, subst: dict, chosen: list[Term]) -> None:
        if i == len(arrow.params):
            vtype = apply_subst(subst, arrow.output)
            if free_vars(vtype):
                return
            value = App(Atom(f), tuple(chosen))
            prov = tuple(zip(labels, chosen))
            results.append(ActionResult(f, tuple(chosen), value, vtype, prov))
            return
        p = arrow.params[i]
        ptype = apply_subst(subst, p.dtype)
        mode = param_mode(ctx, ptype)
        for cand in pool:
            m = _match(ctx, cand, ptype, mode)
            if m is None:
                continue
            s2 = compose_subst(m, subst)
            if p.name is not None:
                s2 = compose_subst({p.name: cand.term}, s2)
            fill(i + 1, s2, chosen + [cand.term])

    fill(0, {}, [])
    return results


def _enumerate_builtin(ctx: Context, f: str) -> list[ActionResult]:
    if f == "eq_refl":
        out = []
        for cand in candidate_pool(ctx):
            value = App(Atom("eq_refl"), (cand.term,))
            vtype = App(Atom("="), (cand.term, cand.term))
            out.append(ActionResult(f, (cand.term,), value, vtype))
        return out
    if f == "eq_symm":
        out = []
        for name, a, b in _equalities(ctx):
            value = App(Atom("eq_symm"), (Atom(name),))
            vtype = App(Atom("="), (b, a))
            out.append(ActionResult(f, (Atom(name),), value, vtype))
        return out
    if f == "rewrite":
        out = []
        props = _propositions(ctx)
        for name, a, b in _equalities(ctx):
            for pname, prop in props:
                if pname == name:
                    continue  # rewriting an equality with itself is noise
                occs = rewrite_occurrences(prop, a, b)
                for k, new_prop in enumerate(occs):
                    idx = Lit(Fraction(k))
                    args = (Atom(name), Atom(pname), idx)
                    out.append(ActionResult(
                        f, args, App(Atom("rewrite"), args), new_prop))
        return out
    if f == "eval":
        out = []
        for cand in candidate_pool(ctx):
            expr = resolve_expression(ctx, cand.term)
            res = eval_builtin(expr)
            if res is None:
                continue
            _, vtype = res
            value = App(Atom("eval"), (cand.term,))
            out.append(ActionResult(f, (cand.term,), value, vtype))
        return out
    raise ActionError(f"unknown builtin {f!r}")


def _equalities(ctx: Context):
    for d in ctx.declarations():
        match d.dtype:
            case App(Atom("="), (a, b)):
                yield d.name, a, b


def _propositions(ctx: Context):
    """State objects whose type is a proposition (possible rewrite targets)."""
    out = []
    for d in ctx.declarations():
        if isinstance(d.dtype, Arrow):
            continue
        try:
            if infer_type(ctx, d.dtype) == PROP:
                out.append((d.name, d.dtype))
        except TypeError_:
            continue
    return out


# ---------------------------------------------------------------------------
# Applying results


def apply_result(d: Derivation, f: str, r: ActionResult,
                 allow_duplicate_values: bool = False,
                 reject_duplicate_types: bool = False) -> Derivation:
    """Extend the derivation with one applied result.

    The result must still type-check in the current state (stale results
    are rejected); by default a result whose value already exists as a
    state definition is rejected as a duplicate.
    """
    try:
        vtype = infer_type(d.ctx, r.value)
    except TypeError_ as e:
        raise ActionError(f"stale result {format_term(r.value)}: {e}") from e
    if vtype != r.vtype:
        raise ActionError(
            f"stale result: {format_term(r.value)} now has type "
            f"{format_term(vtype)}, recorded {format_term(r.vtype)}")
    for decl in d.ctx.state:
        if not allow_duplicate_values and decl.definition == r.value:
            raise ActionError(f"duplicate value {format_term(r.value)}")
        if reject_duplicate_types and decl.dtype == r.vtype:
            raise ActionError(f"duplicate type {format_term(r.vtype)}")
    name = f"!step{len(d.steps)}"
    ctx = d.ctx.extend(Declaration(name, r.vtype, r.value))
    return Derivation(d.problem_id, ctx, d.steps + (Step(f, r, name),))


# ---------------------------------------------------------------------------
# Trace files
#
# Line-oriented, bit-exact round trip:
#   # problem: OAE-42
#   # section: OAE
#   # seed: 42
#   0 | sub_both_sides | equation 1 | (sub_both_sides equation 1) | (= ...)


def write_trace(sol: Solution) -> str:
    lines = [
        f"# problem: {sol.problem_id}",
        f"# section: {sol.section}",
        f"# seed: {sol.seed}",
    ]
    for i, step in enumerate(sol.steps):
        assert step.name == f"!step{i}"
        r = step.result
        args = " ".join(format_term(a) for a in r.args)
        lines.append(
            f"{i} | {step.function} | {args} | "
            f"{format_term(r.value)} | {format_term(r.vtype)}")
    return "\n".join(lines) + "\n"


def read_trace(text: str) -> Solution:
    header = {}
    steps = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            header[key.strip()] = val.strip()
            continue
        idx, function, args_s, value_s, vtype_s = (p.strip() for p in line.split(" | "))
        args = _parse_terms(args_s)
        value = parse_term(value_s)
        vtype = parse_term(vtype_s)
        result = ActionResult(function, tuple(args), value, vtype)
        steps.append(Step(function, result, f"!step{idx}"))
    return Solution(
        problem_id=header.get("problem", ""),
        section=header.get("section", ""),
        seed=int(header.get("seed", "0")),
        steps=tuple(steps),
    )


def _parse_terms(text: str) -> list[Term]:
    from .kernel import _Parser
    p = _Parser(text, allow_literals=True)
    terms = []
    while p.peek() is not None:
        terms.append(p.parse_term())
    return terms
