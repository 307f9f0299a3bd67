"""Object language: terms, theories, typing, unification and rewriting.

Terms are s-expression-like values: atoms, quote-prefixed bound variables,
exact rational literals, applications and (dependent) arrow types.  A theory
is an ordered list of declarations ``name : type [= definition].`` over this
language.  Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

__all__ = [
    "Term", "Atom", "Var", "Lit", "App", "Arrow", "Param",
    "Declaration", "Context", "KernelError", "ParseError", "TypeError_",
    "parse_term", "parse_theory", "format_term", "format_decl", "format_theory",
    "apply_subst", "compose_subst", "unify", "subterms", "free_vars",
    "rewrite_occurrences", "eval_builtin", "infer_type",
    "TYPE", "PROP", "REAL", "EQ", "BUILTINS",
]


class KernelError(Exception):
    """Base class for object-language errors."""


class ParseError(KernelError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class TypeError_(KernelError):
    """Raised when a term fails to type-check."""


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True, slots=True)
class Atom:
    """A declared name: a type, an object, or a function/axiom head."""
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Var:
    """A bound variable; the name keeps its leading quote (e.g. ``'n``)."""
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True, slots=True)
class Lit:
    """An exact rational literal."""
    value: Fraction

    def __repr__(self):
        return format_term(self)


@dataclass(frozen=True, slots=True)
class App:
    """Application of a head term to one or more arguments."""
    head: "Term"
    args: tuple["Term", ...]

    def __post_init__(self):
        if not self.args:
            raise ValueError("App needs at least one argument")

    def __repr__(self):
        return format_term(self)


@dataclass(frozen=True, slots=True)
class Param:
    """One arrow parameter: an optional binder name plus its type."""
    name: Optional[str]
    dtype: "Term"


@dataclass(frozen=True, slots=True)
class Arrow:
    """Dependent function type ``[p1 -> ... -> output]``."""
    params: tuple[Param, ...]
    output: "Term"

    def __post_init__(self):
        if not self.params:
            raise ValueError("Arrow needs at least one parameter")

    def __repr__(self):
        return format_term(self)


Term = Union[Atom, Var, Lit, App, Arrow]
Subst = dict[str, Term]

TYPE = Atom("type")
PROP = Atom("prop")
REAL = Atom("real")
EQ = "="

# Built-in equality/evaluation axioms available in every context,
# listed in the order the action space presents them.
BUILTINS = ("eval", "rewrite", "eq_symm", "eq_refl")

_OPS = {"+", "-", "*", "/"}


@dataclass(frozen=True, slots=True)
class Declaration:
    """``name : dtype`` with an optional definition (``= term``)."""
    name: str
    dtype: Term
    definition: Optional[Term] = None


# ---------------------------------------------------------------------------
# Formatting


def format_term(t: Term) -> str:
    match t:
        case Atom(name):
            return name
        case Var(name):
            return name
        case Lit(value):
            if value.denominator == 1:
                return str(value.numerator)
            return f"{value.numerator}/{value.denominator}"
        case App(head, args):
            parts = " ".join(format_term(a) for a in (head, *args))
            return f"({parts})"
        case Arrow(params, output):
            chunks = []
            for p in params:
                if p.name is None:
                    chunks.append(format_term(p.dtype))
                else:
                    chunks.append(f"({p.name} : {format_term(p.dtype)})")
            chunks.append(format_term(output))
            return "[" + " -> ".join(chunks) + "]"
    raise TypeError(f"not a term: {t!r}")


def format_decl(d: Declaration) -> str:
    s = f"{d.name} : {format_term(d.dtype)}"
    if d.definition is not None:
        s += f" = {format_term(d.definition)}"
    return s + "."


def format_theory(decls) -> str:
    return "\n".join(format_decl(d) for d in decls) + ("\n" if decls else "")


# ---------------------------------------------------------------------------
# Lexer / parser
#
# theory := decl* ;  decl := NAME ':' type ('=' term)? '.' ;
# type   := term | '[' param ('->' param)* '->' term ']' ;
# param  := term | '(' VAR ':' term ')' ;
# term   := NAME | VAR | NUMBER | '(' term term+ ')' ;
# VAR    := '\'' NAME ;  '#' starts a comment running to end of line.

_NUMBER_RE = re.compile(r"-?\d+(/\d+|\.\d+)?")
_DELIMS = set("()[]:.'#")


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str  # NAME VAR NUMBER ( ) [ ] : . = ->
    text: str
    line: int
    column: int


def _tokenize(text: str) -> Iterator[_Token]:
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if c.isspace():
            i, col = i + 1, col + 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c in "()[]":
            yield _Token(c, c, start_line, start_col)
            i, col = i + 1, col + 1
            continue
        if c == ":":
            yield _Token(":", c, start_line, start_col)
            i, col = i + 1, col + 1
            continue
        if c == "'":
            j = i + 1
            while j < n and not text[j].isspace() and text[j] not in _DELIMS:
                j += 1
            if j == i + 1:
                raise ParseError("quote must prefix a name", start_line, start_col)
            yield _Token("VAR", text[i:j], start_line, start_col)
            col += j - i
            i = j
            continue
        m = _NUMBER_RE.match(text, i)
        if m and (m.group(0)[0] != "-" or len(m.group(0)) > 1):
            # A '.' only belongs to the number when digits follow it.
            yield _Token("NUMBER", m.group(0), start_line, start_col)
            col += m.end() - i
            i = m.end()
            continue
        if text.startswith("->", i):
            yield _Token("->", "->", start_line, start_col)
            i, col = i + 2, col + 2
            continue
        if c == ".":
            yield _Token(".", c, start_line, start_col)
            i, col = i + 1, col + 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in _DELIMS:
            if text.startswith("->", j) and j > i:
                break
            j += 1
        word = text[i:j]
        if not word:
            raise ParseError(f"unexpected character {c!r}", start_line, start_col)
        if word == "=" or word.startswith("="):
            # '=' splits off as its own token so `x : t = def.` parses.
            if word == "=":
                yield _Token("=", "=", start_line, start_col)
            else:
                yield _Token("NAME", word, start_line, start_col)
        else:
            yield _Token("NAME", word, start_line, start_col)
        col += j - i
        i = j


class _Parser:
    def __init__(self, text: str, allow_literals: bool):
        self.tokens = list(_tokenize(text))
        self.pos = 0
        self.allow_literals = allow_literals

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, kind: Optional[str] = None) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("", "", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.column)
        if kind is not None and tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text!r}", tok.line, tok.column)
        self.pos += 1
        return tok

    def parse_number(self, tok: _Token) -> Lit:
        if not self.allow_literals:
            raise ParseError(
                "numeric literal in a theory that does not declare 'real'",
                tok.line, tok.column)
        return Lit(Fraction(tok.text))

    def parse_term(self) -> Term:
        tok = self.next()
        if tok.kind == "NAME" or tok.kind == "=":
            return Atom(tok.text)
        if tok.kind == "VAR":
            return Var(tok.text)
        if tok.kind == "NUMBER":
            return self.parse_number(tok)
        if tok.kind == "(":
            head = self.parse_term()
            args = [self.parse_term()]
            while self.peek() and self.peek().kind != ")":
                args.append(self.parse_term())
            self.next(")")
            return App(head, tuple(args))
        raise ParseError(f"unexpected {tok.text!r} in term", tok.line, tok.column)

    def parse_type(self) -> Term:
        tok = self.peek()
        if tok and tok.kind == "[":
            return self.parse_arrow()
        return self.parse_term()

    def parse_param(self) -> Param:
        tok = self.peek()
        if tok and tok.kind == "(":
            # Lookahead for the named form `('n : type)`.
            nxt = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else None
            after = self.tokens[self.pos + 2] if self.pos + 2 < len(self.tokens) else None
            if nxt and nxt.kind == "VAR" and after and after.kind == ":":
                self.next("(")
                name = self.next("VAR").text
                self.next(":")
                dtype = self.parse_type()
                self.next(")")
                return Param(name, dtype)
        return Param(None, self.parse_type())

    def parse_arrow(self) -> Arrow:
        self.next("[")
        parts = [self.parse_param()]
        while self.peek() and self.peek().kind == "->":
            self.next("->")
            parts.append(self.parse_param())
        self.next("]")
        if len(parts) < 2:
            tok = self.peek() or self.tokens[-1]
            raise ParseError("arrow type needs at least one '->'", tok.line, tok.column)
        last = parts[-1]
        if last.name is not None:
            tok = self.tokens[-1]
            raise ParseError("arrow output cannot be a named parameter", tok.line, tok.column)
        return Arrow(tuple(parts[:-1]), last.dtype)

    def parse_decl(self) -> Declaration:
        name = self.next("NAME").text
        self.next(":")
        dtype = self.parse_type()
        definition = None
        if self.peek() and self.peek().kind == "=":
            self.next("=")
            definition = self.parse_term()
        self.next(".")
        return Declaration(name, dtype, definition)


def parse_term(text: str, allow_literals: bool = True) -> Term:
    """Parse a single term from ``text``."""
    p = _Parser(text, allow_literals)
    t = p.parse_term()
    if p.peek() is not None:
        tok = p.peek()
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.column)
    return t


def parse_theory(text: str, allow_literals: bool = False) -> list[Declaration]:
    """Parse a theory file into declarations, in source order.

    Numeric literals are only legal once an atom ``real`` has been declared
    (pass ``allow_literals=True`` for declarations parsed against a library
    that already declares it); duplicate declaration names are an error.
    """
    p = _Parser(text, allow_literals=allow_literals)
    decls: list[Declaration] = []
    seen: set[str] = set()
    while p.peek() is not None:
        tok = p.peek()
        d = p.parse_decl()
        if d.name in seen:
            raise ParseError(f"duplicate declaration of {d.name!r}", tok.line, tok.column)
        seen.add(d.name)
        if d.name == "real":
            p.allow_literals = True
        decls.append(d)
    return decls


# ---------------------------------------------------------------------------
# Substitution and unification


def apply_subst(s: Subst, t: Term) -> Term:
    if not s:
        return t
    match t:
        case Var(name):
            return s.get(name, t)
        case App(head, args):
            return App(apply_subst(s, head), tuple(apply_subst(s, a) for a in args))
        case Arrow(params, output):
            ps = tuple(Param(p.name, apply_subst(s, p.dtype)) for p in params)
            return Arrow(ps, apply_subst(s, output))
        case _:
            return t


def compose_subst(outer: Subst, inner: Subst) -> Subst:
    """Substitution equal to applying ``inner`` first, then ``outer``."""
    out = {v: apply_subst(outer, t) for v, t in inner.items()}
    for v, t in outer.items():
        out.setdefault(v, t)
    return out


def free_vars(t: Term) -> set[str]:
    match t:
        case Var(name):
            return {name}
        case App(head, args):
            vs = free_vars(head)
            for a in args:
                vs |= free_vars(a)
            return vs
        case Arrow(params, output):
            vs = free_vars(output)
            for p in params:
                vs |= free_vars(p.dtype)
            return vs
        case _:
            return set()


def _occurs(name: str, t: Term) -> bool:
    match t:
        case Var(n):
            return n == name
        case App(head, args):
            return _occurs(name, head) or any(_occurs(name, a) for a in args)
        case Arrow(params, output):
            return _occurs(name, output) or any(_occurs(name, p.dtype) for p in params)
        case _:
            return False


def _walk(t: Term, subst: Subst) -> Term:
    while isinstance(t, Var):
        nxt = subst.get(t.name)
        if nxt is None:
            return t
        t = nxt
    return t


def _occurs_walked(name: str, t: Term, subst: Subst) -> bool:
    t = _walk(t, subst)
    match t:
        case Var(n):
            return n == name
        case App(head, args):
            return _occurs_walked(name, head, subst) or \
                any(_occurs_walked(name, a, subst) for a in args)
        case Arrow(params, output):
            return _occurs_walked(name, output, subst) or \
                any(_occurs_walked(name, p.dtype, subst) for p in params)
        case _:
            return False


def _resolve(t: Term, subst: Subst) -> Term:
    t = _walk(t, subst)
    match t:
        case App(head, args):
            return App(_resolve(head, subst),
                       tuple(_resolve(a, subst) for a in args))
        case Arrow(params, output):
            ps = tuple(Param(p.name, _resolve(p.dtype, subst)) for p in params)
            return Arrow(ps, _resolve(output, subst))
        case _:
            return t


def unify(a: Term, b: Term) -> Optional[Subst]:
    """Most general unifier of ``a`` and ``b``, or None.

    Only bound variables are solvable; atoms and literals must match
    exactly.  The result is idempotent and passes the occurs check.
    """
    subst: Subst = {}
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = _walk(x, subst)
        y = _walk(y, subst)
        if x == y:
            continue
        if isinstance(x, Var) or isinstance(y, Var):
            if not isinstance(x, Var):
                x, y = y, x
            if _occurs_walked(x.name, y, subst):
                return None
            subst[x.name] = y
            continue
        if isinstance(x, App) and isinstance(y, App):
            if len(x.args) != len(y.args):
                return None
            stack.append((x.head, y.head))
            stack.extend(zip(x.args, y.args))
            continue
        if isinstance(x, Arrow) and isinstance(y, Arrow):
            if len(x.params) != len(y.params):
                return None
            stack.append((x.output, y.output))
            stack.extend((p.dtype, q.dtype) for p, q in zip(x.params, y.params))
            continue
        return None
    if not subst:
        return subst
    return {v: _resolve(t, subst) for v, t in subst.items()}


def subterms(t: Term) -> Iterator[Term]:
    """All subterms of ``t``, pre-order (left-to-right, outside-in)."""
    yield t
    match t:
        case App(head, args):
            yield from subterms(head)
            for a in args:
                yield from subterms(a)
        case Arrow(params, output):
            for p in params:
                yield from subterms(p.dtype)
            yield from subterms(output)


# ---------------------------------------------------------------------------
# Rewriting and evaluation


def rewrite_occurrences(prop: Term, lhs: Term, rhs: Term) -> list[Term]:
    """One result per occurrence of ``lhs`` in ``prop``.

    Each result replaces exactly that single occurrence with ``rhs``;
    occurrences are ordered left-to-right, outside-in.
    """
    results: list[Term] = []

    def walk(t: Term, wrap) -> None:
        if t == lhs:
            results.append(wrap(rhs))
        match t:
            case App(head, args):
                walk(head, lambda r: wrap(App(r, args)))
                for i, a in enumerate(args):
                    def wrap_arg(r, i=i, head=head, args=args):
                        return wrap(App(head, args[:i] + (r,) + args[i + 1:]))
                    walk(a, wrap_arg)
            case Arrow(params, output):
                for i, p in enumerate(params):
                    def wrap_param(r, i=i, p=p, params=params, output=output):
                        ps = params[:i] + (Param(p.name, r),) + params[i + 1:]
                        return wrap(Arrow(ps, output))
                    walk(p.dtype, wrap_param)
                walk(output, lambda r: wrap(Arrow(params, r)))

    walk(prop, lambda r: r)
    return results


def eval_builtin(t: Term) -> Optional[tuple[Term, Term]]:
    """Evaluate ``(op a b)`` with literal operands in exact arithmetic.

    Returns ``(proof_term, equality_type)`` — e.g. ``(+ 1 2)`` gives
    ``((eval (+ 1 2)), (= (+ 1 2) 3))`` — or None when ``t`` is not a
    closed binary operation (division by zero included).
    """
    match t:
        case App(Atom(op), (Lit(a), Lit(b))) if op in _OPS:
            if op == "/" and b == 0:
                return None
            r = {"+": a + b, "-": a - b, "*": a * b, "/": a / b if b else None}[op]
            return App(Atom("eval"), (t,)), App(Atom(EQ), (t, Lit(r)))
    return None


# ---------------------------------------------------------------------------
# Contexts


@dataclass(frozen=True)
class Context:
    """An immutable background library plus a growing solution state.

    Names are unique across library and state.  ``enumerable_builtins``
    records which built-in axioms the action space exposes (all four by
    default; domains may restrict this).
    """
    library: tuple[Declaration, ...] = ()
    state: tuple[Declaration, ...] = ()
    enumerable_builtins: tuple[str, ...] = BUILTINS
    _index: dict = field(default_factory=dict, repr=False, compare=False)
    parent: Optional["Context"] = field(default=None, repr=False, compare=False)
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    @staticmethod
    def load(library, state=(), enumerable_builtins=BUILTINS) -> "Context":
        """Build a context, type-checking each declaration in order."""
        ctx = Context((), (), tuple(enumerable_builtins))
        for d in library:
            ctx = ctx.extend(d, to_state=False)
        for d in state:
            ctx = ctx.extend(d)
        return ctx

    def extend(self, decl: Declaration, to_state: bool = True) -> "Context":
        """A new context with ``decl`` appended (checked against this one)."""
        if decl.name in self._index or decl.name in BUILTINS or decl.name in ("type", "prop"):
            raise KernelError(f"duplicate name {decl.name!r}")
        check_declaration(self, decl)
        return self._extend_unchecked(decl, to_state)

    def extend_trusted(self, decl: Declaration) -> "Context":
        """Append a state declaration whose type is already known good.

        Used on results coming straight out of the action enumerator,
        which constructs only well-typed values.
        """
        if decl.name in self._index:
            raise KernelError(f"duplicate name {decl.name!r}")
        return self._extend_unchecked(decl, True)

    def _extend_unchecked(self, decl: Declaration, to_state: bool) -> "Context":
        index = dict(self._index)
        index[decl.name] = decl
        if to_state:
            return Context(self.library, self.state + (decl,),
                           self.enumerable_builtins, index, parent=self)
        return Context(self.library + (decl,), self.state,
                       self.enumerable_builtins, index, parent=self)

    def lookup(self, name: str) -> Optional[Declaration]:
        return self._index.get(name)

    def declarations(self) -> tuple[Declaration, ...]:
        return self.library + self.state

    @property
    def has_real(self) -> bool:
        return "real" in self._index


def check_declaration(ctx: Context, decl: Declaration) -> None:
    """Check that a declaration is well formed over ``ctx``."""
    _check_wellformed(ctx, decl.dtype, set())
    if decl.definition is not None:
        dt = infer_type(ctx, decl.definition)
        if unify(dt, decl.dtype) is None:
            raise TypeError_(
                f"definition of {decl.name!r} has type {format_term(dt)}, "
                f"declared {format_term(decl.dtype)}")


def _check_wellformed(ctx: Context, t: Term, bound: set[str]) -> None:
    match t:
        case Atom(name):
            if name in ("type", "prop") or name in BUILTINS or name == EQ:
                return
            if ctx.lookup(name) is None:
                raise TypeError_(f"unknown name {name!r}")
        case Var(name):
            bound.add(name)
        case Lit(_):
            if not ctx.has_real:
                raise TypeError_("literal used in a theory without 'real'")
        case App(head, args):
            _check_wellformed(ctx, head, bound)
            for a in args:
                _check_wellformed(ctx, a, bound)
        case Arrow(params, output):
            inner = set(bound)
            for p in params:
                _check_wellformed(ctx, p.dtype, inner)
                if p.name is not None:
                    inner.add(p.name)
            _check_wellformed(ctx, output, inner)


# ---------------------------------------------------------------------------
# Type inference

_fresh_counter = 0


def _freshen(arrow: Arrow) -> Arrow:
    """Rename an arrow's bound variables apart (global fresh counter)."""
    global _fresh_counter
    vs = free_vars(arrow) | {p.name for p in arrow.params if p.name is not None}
    if not vs:
        return arrow
    _fresh_counter += 1
    ren = {v: Var(f"{v}${_fresh_counter}") for v in vs}
    params = tuple(
        Param(ren[p.name].name if p.name is not None else None,
              apply_subst(ren, p.dtype))
        for p in arrow.params)
    return Arrow(params, apply_subst(ren, arrow.output))


def param_mode(ctx: Context, T: Term) -> str:
    """How a parameter type selects arguments.

    ``class``: T denotes a type or proposition; arguments are objects whose
    *type* unifies with T (e.g. ``('n : nat)`` or ``(leq 'a 'b)``).
    ``value``: T is an object-level pattern; arguments are expression values
    that match T itself (e.g. the ``(+ 'a 'b)`` parameter of ``+_comm``).
    """
    match T:
        case Atom(name):
            if name in ("type", "prop"):
                return "class"
            d = ctx.lookup(name)
            if d is not None and d.dtype in (TYPE, PROP):
                return "class"
            return "value"
        case App(Atom(name), _):
            if name == EQ:
                return "class"
            d = ctx.lookup(name)
            if d is not None and isinstance(d.dtype, Arrow) and d.dtype.output in (TYPE, PROP):
                return "class"
            return "value"
        case Lit(_):
            return "value"
        case Var(_):
            return "class"
        case _:
            return "class"


def _check_argument(ctx: Context, arg: Term, ptype: Term) -> Optional[Subst]:
    """Unifier accepting ``arg`` for a parameter of (substituted) type ``ptype``."""
    mode = param_mode(ctx, ptype)
    if mode == "value":
        return unify(arg, ptype)
    return unify(infer_type(ctx, arg), ptype)


def infer_type(ctx: Context, t: Term) -> Term:
    """Infer the type of ``t`` over ``ctx``.

    For applications, each argument must fit the (substitution-updated)
    parameter type; the result is the arrow's output with all bindings
    applied.  Deterministic and total on well-formed terms.
    """
    match t:
        case Atom(name):
            if name in ("type", "prop"):
                return TYPE
            d = ctx.lookup(name)
            if d is None:
                raise TypeError_(f"unknown name {name!r}")
            return d.dtype
        case Var(name):
            raise TypeError_(f"free bound variable {name}")
        case Lit(_):
            if not ctx.has_real:
                raise TypeError_("literal in a theory without 'real'")
            return REAL
        case Arrow(_, _):
            return TYPE
        case App(Atom("="), args):
            if len(args) != 2:
                raise TypeError_("equality takes two arguments")
            ta, tb = (infer_type(ctx, a) for a in args)
            if unify(ta, tb) is None:
                raise TypeError_(
                    f"equality between {format_term(ta)} and {format_term(tb)}")
            return PROP
        case App(Atom(name), args) if name in BUILTINS:
            return _infer_builtin_app(ctx, name, args)
        case App(Atom(name), args):
            d = ctx.lookup(name)
            if d is None:
                raise TypeError_(f"unknown name {name!r}")
            if not isinstance(d.dtype, Arrow):
                raise TypeError_(f"{name!r} is not a function")
            arrow = _freshen(d.dtype)
            if len(args) != len(arrow.params):
                raise TypeError_(
                    f"{name!r} expects {len(arrow.params)} arguments, got {len(args)}")
            subst: Subst = {}
            for p, arg in zip(arrow.params, args):
                ptype = apply_subst(subst, p.dtype)
                m = _check_argument(ctx, arg, ptype)
                if m is None:
                    raise TypeError_(
                        f"argument {format_term(arg)} does not fit parameter "
                        f"type {format_term(ptype)} of {name!r}")
                subst = compose_subst(m, subst)
                if p.name is not None:
                    subst = compose_subst({p.name: apply_subst(subst, arg)}, subst)
            return apply_subst(subst, arrow.output)
        case App(_, _):
            raise TypeError_("application head must be a declared name")
    raise TypeError_(f"not a term: {t!r}")


def _infer_builtin_app(ctx: Context, name: str, args: tuple[Term, ...]) -> Term:
    if name == "eq_refl":
        if len(args) != 1:
            raise TypeError_("eq_refl takes one argument")
        infer_type(ctx, args[0])
        return App(Atom(EQ), (args[0], args[0]))
    if name == "eq_symm":
        if len(args) != 1:
            raise TypeError_("eq_symm takes one argument")
        et = infer_type(ctx, args[0])
        match et:
            case App(Atom("="), (a, b)):
                return App(Atom(EQ), (b, a))
        raise TypeError_("eq_symm needs an equality")
    if name == "rewrite":
        if len(args) != 3:
            raise TypeError_("rewrite takes (equality, target, occurrence)")
        eq, target, occ = args
        et = infer_type(ctx, eq)
        match et:
            case App(Atom("="), (a, b)):
                pass
            case _:
                raise TypeError_("rewrite needs an equality as first argument")
        prop = infer_type(ctx, target)
        if infer_type(ctx, prop) != PROP:
            raise TypeError_("rewrite target must inhabit a proposition")
        match occ:
            case Lit(v) if v.denominator == 1 and v >= 0:
                k = v.numerator
            case _:
                raise TypeError_("rewrite occurrence must be a non-negative integer")
        occs = rewrite_occurrences(prop, a, b)
        if k >= len(occs):
            raise TypeError_(
                f"occurrence {k} out of range ({len(occs)} found)")
        return occs[k]
    if name == "eval":
        if len(args) != 1:
            raise TypeError_("eval takes one argument")
        expr = resolve_expression(ctx, args[0])
        out = eval_builtin(expr)
        if out is None:
            raise TypeError_(f"{format_term(expr)} is not evaluable")
        return out[1]
    raise TypeError_(f"unknown builtin {name!r}")


def resolve_expression(ctx: Context, t: Term) -> Term:
    """The expression a term stands for: unfold a named alias once."""
    if isinstance(t, Atom):
        d = ctx.lookup(t.name)
        if d is not None and d.definition is not None:
            return d.definition
    return t
