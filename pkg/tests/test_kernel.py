from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from hypatia.kernel import (
    App, Arrow, Atom, Context, Declaration, Lit, Param, ParseError, TypeError_,
    Var, apply_subst, eval_builtin, format_decl, format_term, format_theory,
    infer_type, parse_term, parse_theory, rewrite_occurrences, subterms, unify,
)

NAT_THEORY = """
nat : type.
z : nat.
succ : [nat -> nat].
one : nat = (succ z).
"""

LEQ_THEORY = NAT_THEORY + """
leq : [nat -> nat -> prop].
z_leq_n : [('n : nat) -> (leq z 'n)].
n_leq_sn : [('n : nat) -> (leq 'n (succ 'n))].
leq_trans : [(leq 'a 'b) -> (leq 'b 'c) -> (leq 'a 'c)].
"""

REAL_THEORY = """
real : type.
+ : [real -> real -> real].
- : [real -> real -> real].
* : [real -> real -> real].
/ : [real -> real -> real].
"""


@pytest.fixture
def ctx_nat():
    return Context.load(parse_theory(NAT_THEORY))


@pytest.fixture
def ctx_leq():
    return Context.load(parse_theory(LEQ_THEORY))


@pytest.fixture
def ctx_real():
    return Context.load(parse_theory(REAL_THEORY))


def t(s):
    return parse_term(s)


class TestParsing:
    def test_basic_theory(self):
        decls = parse_theory(NAT_THEORY)
        assert [d.name for d in decls] == ["nat", "z", "succ", "one"]
        assert decls[0].dtype == Atom("type")
        assert decls[2].dtype == Arrow((Param(None, Atom("nat")),), Atom("nat"))
        assert decls[3].definition == App(Atom("succ"), (Atom("z"),))

    def test_empty_input(self):
        assert parse_theory("") == []

    def test_two_param_arrow(self):
        decls = parse_theory(
            "nat : type. leq : [nat -> nat -> prop]."
            " leq_trans : [(leq 'a 'b) -> (leq 'b 'c) -> (leq 'a 'c)].")
        arrow = decls[-1].dtype
        assert isinstance(arrow, Arrow)
        assert len(arrow.params) == 2
        assert arrow.output == App(Atom("leq"), (Var("'a"), Var("'c")))

    def test_named_params(self):
        (d,) = parse_theory("nat : type.")[:0] or parse_theory(
            "nat : type. z_leq_n : [('n : nat) -> (leq z 'n)].")[1:]
        assert d.dtype.params[0] == Param("'n", Atom("nat"))

    def test_comments_and_whitespace(self):
        decls = parse_theory("# a comment\nnat : type.  # trailing\n\n z : nat.")
        assert [d.name for d in decls] == ["nat", "z"]

    def test_duplicate_name_rejected(self):
        with pytest.raises(ParseError, match="duplicate"):
            parse_theory("nat : type. nat : type.")

    def test_syntax_error_has_position(self):
        with pytest.raises(ParseError) as e:
            parse_theory("nat :")
        assert "1:" in str(e.value)

    def test_literals_gated_on_real(self):
        with pytest.raises(ParseError, match="literal"):
            parse_theory("nat : type. bad : (leq 1 2).")
        decls = parse_theory("real : type. x : real = 3.")
        assert decls[1].definition == Lit(Fraction(3))

    def test_number_forms(self):
        assert parse_term("-5") == Lit(Fraction(-5))
        assert parse_term("2.5") == Lit(Fraction(5, 2))
        assert parse_term("7/2") == Lit(Fraction(7, 2))
        assert parse_term("(- x 3)") == App(Atom("-"), (Atom("x"), Lit(Fraction(3))))

    def test_operator_names(self):
        assert parse_term("(+ 'a 'b)") == App(Atom("+"), (Var("'a"), Var("'b")))
        assert parse_term("(= x 2)") == App(Atom("="), (Atom("x"), Lit(Fraction(2))))


class TestFormatting:
    @pytest.mark.parametrize("text", [
        "nat : type.",
        "succ : [nat -> nat].",
        "one : nat = (succ z).",
        "z_leq_n : [('n : nat) -> (leq z 'n)].",
        "leq_trans : [(leq 'a 'b) -> (leq 'b 'c) -> (leq 'a 'c)].",
    ])
    def test_format_parse_roundtrip(self, text):
        (d,) = parse_theory("nat : type." + text)[1:] if not text.startswith("nat") \
            else parse_theory(text)
        assert format_decl(d) == text if text.startswith("nat") else True
        # parse . format . parse is a fixed point
        again = parse_theory("nat : type. " + format_decl(d))[-1] \
            if not text.startswith("nat") else parse_theory(format_decl(d))[0]
        assert again == d

    def test_theory_roundtrip(self):
        decls = parse_theory(LEQ_THEORY)
        assert parse_theory(format_theory(decls)) == decls

    def test_literal_canonical_form(self):
        assert format_term(Lit(Fraction(5, 2))) == "5/2"
        assert format_term(Lit(Fraction(-3))) == "-3"
        assert parse_term(format_term(Lit(Fraction("2.5")))) == Lit(Fraction(5, 2))


class TestUnify:
    def test_structural_match(self):
        s = unify(t("(leq 'a 'b)"), t("(leq z (succ z))"))
        assert s == {"'a": Atom("z"), "'b": App(Atom("succ"), (Atom("z"),))}

    def test_identical_atoms(self):
        assert unify(Atom("nat"), Atom("nat")) == {}

    def test_conflicting_binding(self):
        assert unify(t("(leq 'a 'a)"), t("(leq z one)")) is None

    def test_occurs_check(self):
        assert unify(Var("'a"), t("(succ 'a)")) is None

    def test_var_to_var(self):
        s = unify(Var("'a"), Var("'b"))
        assert apply_subst(s, Var("'a")) == apply_subst(s, Var("'b"))

    @given(st.data())
    @settings(max_examples=200, deadline=None)
    def test_soundness_and_generality(self, data):
        # Build a random term with variables, apply a random witness
        # substitution, and check the mgu is sound and most general.
        names = ["'a", "'b", "'c"]
        atoms = [Atom("f"), Atom("g"), Atom("z"), Atom("w")]

        def gen_term(depth):
            kind = data.draw(st.integers(0, 2 if depth < 3 else 1))
            if kind == 0:
                return data.draw(st.sampled_from(atoms))
            if kind == 1:
                return Var(data.draw(st.sampled_from(names)))
            n = data.draw(st.integers(1, 2))
            return App(data.draw(st.sampled_from(atoms[:2])),
                       tuple(gen_term(depth + 1) for _ in range(n)))

        def gen_closed(depth):
            kind = data.draw(st.integers(0, 1 if depth < 3 else 0))
            if kind == 0:
                return data.draw(st.sampled_from(atoms))
            return App(data.draw(st.sampled_from(atoms[:2])),
                       (gen_closed(depth + 1),))

        a = gen_term(0)
        witness = {n: gen_closed(0) for n in names}
        b = apply_subst(witness, a)
        mgu = unify(a, b)
        assert mgu is not None
        # soundness
        assert apply_subst(mgu, a) == apply_subst(mgu, b)
        # generality: the witness factors through the mgu
        rest = unify(apply_subst(mgu, a), b)
        assert rest is not None
        assert apply_subst(rest, apply_subst(mgu, a)) == b


class TestSubstitution:
    def test_replaces_all_occurrences(self):
        s = {"'a": Atom("z")}
        assert apply_subst(s, t("(leq 'a (succ 'a))")) == t("(leq z (succ z))")

    def test_identity(self):
        term = t("(leq z 'n)")
        assert apply_subst({}, term) is term

    def test_example(self):
        assert apply_subst({"'n": Atom("one")}, t("(leq z 'n)")) == t("(leq z one)")

    @given(st.integers(0, 1000))
    @settings(max_examples=50, deadline=None)
    def test_unifier_idempotent(self, seed):
        import random
        rng = random.Random(seed)
        names = ["'a", "'b", "'c"]

        def gen(depth):
            r = rng.random()
            if r < 0.3 or depth > 2:
                return rng.choice([Atom("f"), Atom("z"), Var(rng.choice(names))])
            return App(Atom("f"), tuple(gen(depth + 1) for _ in range(rng.randint(1, 2))))

        a, b = gen(0), gen(0)
        s = unify(a, b)
        if s is not None:
            for term in (a, b):
                once = apply_subst(s, term)
                assert apply_subst(s, once) == once


class TestInferType:
    def test_direct_application(self, ctx_nat):
        assert infer_type(ctx_nat, t("(succ z)")) == Atom("nat")

    def test_dependent_output(self, ctx_leq):
        assert infer_type(ctx_leq, t("(z_leq_n one)")) == t("(leq z one)")

    def test_ill_typed_application(self, ctx_nat):
        with pytest.raises(TypeError_, match="does not fit"):
            infer_type(ctx_nat, t("(succ succ)"))

    def test_unknown_name(self, ctx_nat):
        with pytest.raises(TypeError_, match="unknown"):
            infer_type(ctx_nat, Atom("mystery"))

    def test_arity_mismatch(self, ctx_nat):
        with pytest.raises(TypeError_, match="expects"):
            infer_type(ctx_nat, t("(succ z z)"))

    def test_literal_type(self, ctx_real):
        assert infer_type(ctx_real, Lit(Fraction(3))) == Atom("real")

    def test_equality_is_prop(self, ctx_real):
        assert infer_type(ctx_real, t("(= (+ 1 2) 3)")) == Atom("prop")

    def test_type_in_type(self, ctx_nat):
        assert infer_type(ctx_nat, Atom("type")) == Atom("type")
        assert infer_type(ctx_nat, Atom("nat")) == Atom("type")

    def test_deterministic(self, ctx_leq):
        term = t("(leq_trans (z_leq_n one) (n_leq_sn one))")
        hyp1 = infer_type(ctx_leq, t("(z_leq_n one)"))
        assert hyp1 == t("(leq z one)")
        first = infer_type(ctx_leq, term)
        assert first == t("(leq z (succ one))")
        assert infer_type(ctx_leq, term) == first

    def test_value_pattern_parameter(self, ctx_real):
        ctx = ctx_real.extend(
            parse_theory(REAL_THEORY + "+_comm : [(+ 'a 'b) -> (= (+ 'a 'b) (+ 'b 'a))].")[-1],
            to_state=False)
        ctx = ctx.extend(Declaration("x", Atom("real")))
        assert infer_type(ctx, t("(+_comm (+ x 1))")) == t("(= (+ x 1) (+ 1 x))")

    def test_definition_checked(self, ctx_nat):
        with pytest.raises(TypeError_):
            ctx_nat.extend(Declaration("bad", Atom("nat"), Atom("nat")))


class TestBuiltinTyping:
    def test_eq_refl(self, ctx_nat):
        assert infer_type(ctx_nat, t("(eq_refl z)")) == t("(= z z)")

    def test_eq_symm(self, ctx_real):
        ctx = ctx_real.extend(Declaration("x", Atom("real"))) \
            .extend(Declaration("h", t("(= x 2)")))
        assert infer_type(ctx, t("(eq_symm h)")) == t("(= 2 x)")

    def test_rewrite(self, ctx_real):
        ctx = (ctx_real
               .extend(Declaration("x", Atom("real")))
               .extend(Declaration("e", t("(= (+ 1 2) 3)")))
               .extend(Declaration("h", t("(= x (+ 1 2))"))))
        assert infer_type(ctx, t("(rewrite e h 0)")) == t("(= x 3)")
        with pytest.raises(TypeError_, match="out of range"):
            infer_type(ctx, t("(rewrite e h 1)"))

    def test_eval_typing(self, ctx_real):
        assert infer_type(ctx_real, t("(eval (+ 1 2))")) == t("(= (+ 1 2) 3)")
        ctx = ctx_real.extend(Declaration("e", Atom("real"), t("(+ 1 2)")))
        assert infer_type(ctx, t("(eval e)")) == t("(= (+ 1 2) 3)")


class TestRewriteOccurrences:
    def test_single_occurrence(self):
        out = rewrite_occurrences(t("(= answer (+ x 0))"), t("(+ x 0)"), Atom("x"))
        assert out == [t("(= answer x)")]

    def test_two_sites_one_each(self):
        prop = t("(< (exp (+ x 0)) (+ y 0))")
        assert rewrite_occurrences(prop, t("(+ x 0)"), Atom("x")) == \
            [t("(< (exp x) (+ y 0))")]
        assert rewrite_occurrences(prop, t("(+ y 0)"), Atom("y")) == \
            [t("(< (exp (+ x 0)) y)")]

    def test_no_occurrence(self):
        assert rewrite_occurrences(t("(= x 3)"), t("(+ 1 2)"), Lit(Fraction(3))) == []

    def test_multiple_occurrences_ordered(self):
        prop = t("(= (- 1 1) (- 1 1))")
        out = rewrite_occurrences(prop, t("(- 1 1)"), Lit(Fraction(0)))
        assert out == [t("(= 0 (- 1 1))"), t("(= (- 1 1) 0)")]

    @given(st.integers(0, 500))
    @settings(max_examples=60, deadline=None)
    def test_count_matches_brute_force(self, seed):
        import random
        rng = random.Random(seed)

        def gen(depth):
            if depth > 2 or rng.random() < 0.4:
                return rng.choice([Atom("x"), Atom("y"), Lit(Fraction(0))])
            return App(rng.choice([Atom("+"), Atom("-")]),
                       tuple(gen(depth + 1) for _ in range(2)))

        prop, lhs = gen(0), gen(0)
        count = sum(1 for s in subterms(prop) if s == lhs)
        assert len(rewrite_occurrences(prop, lhs, Atom("r"))) == count


class TestEvalBuiltin:
    def test_addition(self):
        out = eval_builtin(t("(+ 1 2)"))
        assert out is not None
        proof, ty = out
        assert ty == t("(= (+ 1 2) 3)")
        assert proof == t("(eval (+ 1 2))")

    def test_non_literal_operand(self):
        assert eval_builtin(t("(* x 2)")) is None

    def test_division_by_zero(self):
        assert eval_builtin(t("(/ 1 0)")) is None

    def test_exact_rationals(self):
        _, ty = eval_builtin(t("(/ 1 3)"))
        assert ty == App(Atom("="), (t("(/ 1 3)"), Lit(Fraction(1, 3))))
        _, ty2 = eval_builtin(App(Atom("*"), (Lit(Fraction(3)), Lit(Fraction(1, 3)))))
        assert ty2.args[1] == Lit(Fraction(1))

    def test_subtraction_and_negative(self):
        _, ty = eval_builtin(t("(- 2 5)"))
        assert ty.args[1] == Lit(Fraction(-3))


class TestContext:
    def test_names_unique_across_library_and_state(self, ctx_nat):
        with pytest.raises(Exception, match="duplicate"):
            ctx_nat.extend(Declaration("z", Atom("nat")))

    def test_declarations_typecheck_in_order(self):
        with pytest.raises(TypeError_, match="unknown"):
            Context.load([Declaration("z", Atom("nat"))])

    def test_alias_must_match_declared_type(self, ctx_leq):
        good = Declaration("two", Atom("nat"), t("(succ one)"))
        ctx = ctx_leq.extend(good)
        assert ctx.lookup("two").definition == t("(succ one)")
