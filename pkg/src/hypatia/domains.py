"""The five formalized algebra practice sections.

Each section has seeded random problem generators built from syntactic
templates (constants drawn from a rounded Gaussian, resampled until legal)
and a goal verifier that inspects the solution state.  A deterministic
scripted solver produces a reference solution for every generated problem;
it doubles as the solvability oracle in tests.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from importlib import resources
from typing import Callable, Optional

from .actions import Derivation, Solution, apply_result, enumerate_actions
from .kernel import (
    App, Atom, Context, Declaration, KernelError, Lit, Term,
    eval_builtin, format_decl, format_term, parse_term, parse_theory,
    subterms, unify,
)

__all__ = [
    "Section", "Problem", "DomainError", "SECTIONS", "load_domain",
    "generate_problem", "check_goal", "problem_context", "make_derivation",
    "reference_solution", "problem_to_json", "problem_from_json",
]


class DomainError(KernelError):
    """Raised when problem generation or the reference strategy fails."""


@dataclass(frozen=True)
class Template:
    """A syntactic form with constant (and, for SEE, operator) slots."""
    fmt: str
    constants: int
    ops: int = 0
    legal: Optional[Callable[[list[int]], bool]] = None


@dataclass(frozen=True)
class Section:
    id: str
    khan_index: int
    templates: tuple[Template, ...]
    verifier: str


@dataclass(frozen=True)
class Problem:
    """A section tag, seeded initial declarations, and a goal verifier id."""
    section: str
    seed: int
    declarations: tuple[Declaration, ...]
    verifier: str

    @property
    def id(self) -> str:
        return f"{self.section}-{self.seed}"


def _nonzero(i: int) -> Callable[[list[int]], bool]:
    return lambda ns: ns[i] != 0


SECTIONS: tuple[Section, ...] = (
    Section("SEE", 1, (
        Template("(= answer ({op0} {n0} {n1}))", 2, 1),
        Template("(= answer ({op0} ({op1} {n0} {n1}) {n2}))", 3, 2),
        Template("(= answer ({op0} {n0} ({op1} {n1} {n2})))", 3, 2),
        Template("(= answer ({op0} ({op1} {n0} {n1}) ({op2} {n2} {n3})))", 4, 3),
    ), "simplified_form"),
    Section("CLT", 2, (
        Template("(= answer (+ (- x {n0}) {n1}))", 2),
        Template("(= answer (- (+ x {n0}) {n1}))", 2),
        Template("(= answer (* (/ x {n0}) {n1}))", 2, legal=_nonzero(0)),
        Template("(= answer (/ (* x {n0}) {n1}))", 2, legal=_nonzero(1)),
    ), "simplified_form"),
    Section("OAE", 3, (
        Template("(= (+ x {n0}) {n1})", 2),
        Template("(= (- x {n0}) {n1})", 2),
    ), "equation_solved"),
    Section("OME", 4, (
        Template("(= (* x {n0}) {n1})", 2, legal=_nonzero(0)),
        Template("(= (* {n0} x) {n1})", 2, legal=_nonzero(0)),
        Template("(= (/ x {n0}) {n1})", 2, legal=_nonzero(0)),
    ), "equation_solved"),
    Section("TSE", 5, (
        Template("(= (+ (* x {n0}) {n1}) {n2})", 3, legal=_nonzero(0)),
        Template("(= (- (* x {n0}) {n1}) {n2})", 3, legal=_nonzero(0)),
        Template("(= (+ (/ x {n0}) {n1}) {n2})", 3, legal=_nonzero(0)),
        Template("(= (- (/ x {n0}) {n1}) {n2})", 3, legal=_nonzero(0)),
    ), "equation_solved"),
)

_SECTION_BY_ID = {s.id: s for s in SECTIONS}
_LIBRARY: Optional[Context] = None


def load_domain() -> tuple[Context, tuple[Section, ...]]:
    """The bundled axiom library (type-checked) and the five sections."""
    global _LIBRARY
    if _LIBRARY is None:
        text = resources.files("hypatia").joinpath("theories/ka.theory").read_text()
        _LIBRARY = Context.load(parse_theory(text))
    return _LIBRARY, SECTIONS


def get_section(section) -> Section:
    if isinstance(section, Section):
        return section
    try:
        return _SECTION_BY_ID[section]
    except KeyError:
        raise DomainError(f"unknown section {section!r}") from None


# ---------------------------------------------------------------------------
# Problem generation


def _division_safe(t: Term) -> bool:
    """No division subterm has a constant-foldable zero divisor."""
    for s in subterms(t):
        match s:
            case App(Atom("/"), (_, divisor)):
                v = _fold(divisor)
                if v == 0:
                    return False
    return True


def _fold(t: Term) -> Optional[Fraction]:
    match t:
        case Lit(v):
            return v
        case App(Atom(op), (a, b)) if op in "+-*/":
            fa, fb = _fold(a), _fold(b)
            if fa is None or fb is None:
                return None
            if op == "/" and fb == 0:
                return None
            return {"+": fa + fb, "-": fa - fb,
                    "*": fa * fb, "/": fa / fb if fb else None}[op]
    return None


def generate_problem(section, seed: int, sigma: float = 5.0) -> Problem:
    """A seeded random problem from one of the section's templates.

    Constants are rounded Gaussian N(0, sigma^2) samples, resampled while
    illegal (division by zero, degenerate equations); SEE additionally
    resamples every operator uniformly from {+, -, *, /}.
    """
    sec = get_section(section)
    rng = random.Random(seed)
    template = sec.templates[rng.randrange(len(sec.templates))]
    for _ in range(1000):
        ops = [rng.choice("+-*/") for _ in range(template.ops)]
        ns = [round(rng.gauss(0, sigma)) for _ in range(template.constants)]
        slots = {f"op{i}": op for i, op in enumerate(ops)}
        slots.update({f"n{i}": n for i, n in enumerate(ns)})
        text = template.fmt.format(**slots)
        term = parse_term(text)
        if template.legal is not None and not template.legal(ns):
            continue
        if not _division_safe(term):
            continue
        decls = []
        if any(s == Atom("x") for s in subterms(term)):
            decls.append(Declaration("x", Atom("real")))
        if any(s == Atom("answer") for s in subterms(term)):
            decls.append(Declaration("answer", Atom("real")))
        decls.append(Declaration("equation", term))
        return Problem(sec.id, seed, tuple(decls), sec.verifier)
    raise DomainError(
        f"no legal instance of {template.fmt!r} after 1000 attempts")


def problem_context(problem: Problem, library: Optional[Context] = None) -> Context:
    """The initial context: domain library plus the problem declarations."""
    ctx = library if library is not None else load_domain()[0]
    for d in problem.declarations:
        ctx = ctx.extend(d)
    return ctx


def make_derivation(problem: Problem, library: Optional[Context] = None) -> Derivation:
    return Derivation(problem.id, problem_context(problem, library))


# ---------------------------------------------------------------------------
# Goal verifiers


def _is_literal(t: Term) -> bool:
    return isinstance(t, Lit)


def _is_scaled_x(t: Term) -> bool:
    """``x`` multiplied by one constant that is neither 0 nor 1."""
    match t:
        case App(Atom("*"), (Lit(k), Atom("x"))) | App(Atom("*"), (Atom("x"), Lit(k))):
            return k not in (0, 1)
    return False


def _is_simplified(t: Term) -> bool:
    if _is_literal(t) or t == Atom("x") or _is_scaled_x(t):
        return True
    match t:
        case App(Atom("+"), (u, Lit(c))) | App(Atom("+"), (Lit(c), u)):
            return c != 0 and (u == Atom("x") or _is_scaled_x(u))
    return False


def check_goal(problem: Problem, ctx: Context) -> bool:
    """Whether the state satisfies the problem's verifier.

    Equation sections look for an equality between ``x`` and a constant;
    simplification sections for an equality between ``answer`` and an
    expression in one of the closed list of simplified forms.  The generic
    ``prove:<type>`` verifier looks for an object of exactly that type.
    """
    if problem.verifier.startswith("prove:"):
        target = parse_term(problem.verifier[len("prove:"):])
        return any(d.dtype == target for d in ctx.state)
    for d in ctx.state:
        match d.dtype:
            case App(Atom("="), (a, b)):
                if problem.verifier == "equation_solved":
                    if (a == Atom("x") and _is_literal(b)) or \
                       (b == Atom("x") and _is_literal(a)):
                        return True
                elif problem.verifier == "simplified_form":
                    if a == Atom("answer") and _is_simplified(b):
                        return True
                    if b == Atom("answer") and _is_simplified(a):
                        return True
    return False


# ---------------------------------------------------------------------------
# Problem files


def problem_to_json(problem: Problem) -> str:
    return json.dumps({
        "section": problem.section,
        "seed": problem.seed,
        "declarations": [format_decl(d) for d in problem.declarations],
        "verifier": problem.verifier,
    }, indent=2)


def problem_from_json(text: str) -> Problem:
    data = json.loads(text)
    decls = []
    for s in data["declarations"]:
        decls.extend(parse_theory(s, allow_literals=True))
    return Problem(data["section"], int(data["seed"]), tuple(decls),
                   data["verifier"])


# ---------------------------------------------------------------------------
# Scripted reference solutions
#
# A small deterministic strategy that solves every template: evaluate
# closed operations, fold constants with the regrouping axioms, strip
# identities, and undo the outermost operation on the unknown's side.

_UNARY_SIMPLIFICATIONS = (
    ("add_zero", "(+ 'a 0)"),
    ("zero_add", "(+ 0 'a)"),
    ("sub_zero", "(- 'a 0)"),
    ("mul_one", "(* 'a 1)"),
    ("one_mul", "(* 1 'a)"),
    ("div_one", "(/ 'a 1)"),
    ("mul_zero", "(* 'a 0)"),
    ("zero_mul", "(* 0 'a)"),
    ("sub_self", "(- 'a 'a)"),
    ("div_self", "(/ 'a 'a)"),
)

_CANCELLATIONS = (
    ("+-_cancel", "(- (+ 'a 'b) 'b)"),
    ("-+_cancel", "(+ (- 'a 'b) 'b)"),
    ("*/_cancel", "(/ (* 'a 'b) 'b)"),
    ("/*_cancel", "(* (/ 'a 'b) 'b)"),
)

_REGROUPINGS = (
    ("+-_assoc", "(- (+ 'a 'b) 'c)"),
    ("-+_assoc", "(+ (- 'a 'b) 'c)"),
    ("*/_assoc", "(/ (* 'a 'b) 'c)"),
    ("/*_assoc", "(* (/ 'a 'b) 'c)"),
)

_INVERSE_STEP = {"+": "sub_both_sides", "-": "add_both_sides",
                 "*": "div_both_sides", "/": "mul_both_sides"}


def reference_solution(problem: Problem,
                       library: Optional[Context] = None) -> Solution:
    """A hand-scripted axiom-level solution, found without search."""
    d = make_derivation(problem, library)
    main = "equation"
    for _ in range(64):
        if check_goal(problem, d.ctx):
            return Solution(problem.id, problem.section, problem.seed, d.steps)
        d, main = _reference_step(d, main)
    raise DomainError(f"reference strategy did not converge on {problem.id}")


def _reference_step(d: Derivation, main: str) -> tuple[Derivation, str]:
    mtype = d.ctx.lookup(main).dtype

    # 1. Evaluate any closed operation appearing in the working equality.
    for s in subterms(mtype):
        if eval_builtin(s) is not None:
            d, eq = _derive_equality(d, "eval", (s,))
            return _rewrite_into(d, eq, main)

    # 2. Cancel an operation against its inverse outright.
    for axiom, pattern_text in _CANCELLATIONS:
        pattern = parse_term(pattern_text)
        for s in subterms(mtype):
            if unify(s, pattern) is not None:
                d, eq = _derive_equality(d, axiom, (s,))
                return _rewrite_into(d, eq, main)

    # 3. Regroup so that two constants meet (before identity stripping,
    #    which could otherwise strand a simplification at (- x c)).
    for axiom, pattern_text in _REGROUPINGS:
        pattern = parse_term(pattern_text)
        for s in subterms(mtype):
            m = unify(s, pattern)
            if m is not None and isinstance(m["'b"], Lit) and isinstance(m["'c"], Lit):
                d, eq = _derive_equality(d, axiom, (s,))
                return _rewrite_into(d, eq, main)

    # 4. Strip identities and self-cancellations.
    for axiom, pattern_text in _UNARY_SIMPLIFICATIONS:
        pattern = parse_term(pattern_text)
        for s in subterms(mtype):
            if unify(s, pattern) is not None:
                d, eq = _derive_equality(d, axiom, (s,))
                return _rewrite_into(d, eq, main)

    # 5. Flip a constant-first product so the unknown leads.
    match mtype:
        case App(Atom("="), (App(Atom("*"), (Lit(_), v)), _)) if not isinstance(v, Lit):
            lhs = mtype.args[0]
            d, eq = _derive_equality(d, "*_comm", (lhs,))
            return _rewrite_into(d, eq, main)

    # 6. Undo the outermost operation applied to the unknown's side.
    match mtype:
        case App(Atom("="), (App(Atom(op), (_, Lit(c))), _)) if op in _INVERSE_STEP:
            d2 = _apply_named(d, _INVERSE_STEP[op], (Atom(main), Lit(c)))
            return d2, d2.steps[-1].name

    raise DomainError(f"no scripted move for {format_term(mtype)}")


def _apply_named(d: Derivation, fname: str, args: tuple) -> Derivation:
    for r in enumerate_actions(d.ctx, fname):
        if r.args == args:
            return apply_result(d, fname, r)
    raise DomainError(f"{fname} not applicable to {args}")


def _derive_equality(d: Derivation, fname: str, args: tuple) -> tuple[Derivation, str]:
    """Apply an equality-producing action, reusing an existing object."""
    target = None
    for r in enumerate_actions(d.ctx, fname):
        if r.args == args:
            target = r
            break
    if target is None:
        raise DomainError(f"{fname} not applicable to {args}")
    for decl in d.ctx.state:
        if decl.dtype == target.vtype:
            return d, decl.name
    d2 = apply_result(d, fname, target)
    return d2, d2.steps[-1].name


def _rewrite_into(d: Derivation, eq: str, main: str) -> tuple[Derivation, str]:
    args = (Atom(eq), Atom(main), Lit(Fraction(0)))
    d2 = _apply_named(d, "rewrite", args)
    return d2, d2.steps[-1].name
