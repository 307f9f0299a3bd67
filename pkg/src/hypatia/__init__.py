"""Finite-action theorem proving for school algebra.

A dependent term language with a finite forward-action space, five
formalized algebra practice sections, policy-guided search, tactic
induction by anti-unification, and curriculum construction from tactic
dependencies.
"""

from .kernel import (
    Atom, Var, Lit, App, Arrow, Param, Declaration, Context,
    parse_term, parse_theory, format_term, format_decl, format_theory,
    unify, apply_subst, infer_type, rewrite_occurrences, eval_builtin,
)

__version__ = "0.1.0"
