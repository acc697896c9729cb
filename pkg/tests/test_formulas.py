import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efk.formulas import (
    And,
    ConstAtom,
    EvalError,
    Equal,
    Exists,
    Forall,
    FunAtom,
    Not,
    Or,
    RelAtom,
    evaluate,
    free_vars,
    is_strictly_atomic,
    negate,
    quantifier_rank,
    to_text,
    variables,
)
from efk.parser import FormulaSyntaxError, parse
from efk.sentences import count_sentences, enumerate_sentences, enumerate_formulas
from efk.structures import FiniteStructure, Vocabulary, linear_order

CHAIN3 = linear_order(3)


def test_parse_quantifiers_and_infix():
    assert parse("exists x . forall y . !(y < x)") == Exists("x", Forall("y", Not(RelAtom("<", ("y", "x")))))


def test_parse_function_atom_and_equality():
    assert parse("f(x)=y & x=y") == And(FunAtom("f", ("x",), "y"), Equal("x", "y"))


def test_parse_error_offset():
    with pytest.raises(FormulaSyntaxError) as exc:
        parse("R(x")
    assert exc.value.offset == 3


def test_parse_constant_atom_needs_vocab():
    vocab = Vocabulary.of("c:const", "</2")
    assert parse("exists x . c = x", vocab) == Exists("x", ConstAtom("c", "x"))
    assert parse("exists x . c = x") == Exists("x", Equal("c", "x"))


def test_parse_arity_checked_against_vocab():
    with pytest.raises(FormulaSyntaxError):
        parse("R(x)", Vocabulary.of("R/2"))
    with pytest.raises(FormulaSyntaxError):
        parse("S(x, y)", Vocabulary.of("R/2"))


def test_arrows_desugar():
    assert parse("P(x) -> Q(x)") == Or(Not(RelAtom("P", ("x",))), RelAtom("Q", ("x",)))
    phi = parse("P(x) <-> Q(x)")
    M = FiniteStructure(2, {"P": [(0,)], "Q": [(0,), (1,)]})
    assert [evaluate(M, phi, {"x": a}) for a in (0, 1)] == [True, False]


def test_precedence():
    assert parse("!P(x) & Q(x) | R(x)") == Or(And(Not(RelAtom("P", ("x",))), RelAtom("Q", ("x",))), RelAtom("R", ("x",)))
    assert parse("exists x . P(x) & Q(x)") == Exists("x", And(RelAtom("P", ("x",)), RelAtom("Q", ("x",))))


def test_eval_examples():
    phi = parse("exists x . forall y . !(y < x)")
    assert evaluate(CHAIN3, phi)
    assert evaluate(CHAIN3, phi, D={2})
    three = parse("exists x . exists y . exists z . (!(x=y) & !(x=z) & !(y=z))")
    assert evaluate(CHAIN3, three)
    assert not evaluate(CHAIN3, three, D={0, 1})


def test_eval_errors():
    with pytest.raises(EvalError):
        evaluate(CHAIN3, parse("x < y"), {"x": 0})
    with pytest.raises(EvalError):
        evaluate(CHAIN3, parse("exists x . P(x)"))
    with pytest.raises(EvalError):
        evaluate(CHAIN3, parse("exists x . x < x"), D={7})


def test_quantifier_rank_examples():
    atom = RelAtom("R", ("x", "y"))
    assert quantifier_rank(atom) == 0
    assert quantifier_rank(Exists("x", Forall("y", atom))) == 2
    assert quantifier_rank(And(Exists("x", atom), Exists("y", Exists("z", atom)))) == 2


def test_strict_atomicity():
    assert is_strictly_atomic(Equal("x", "y"))
    assert not is_strictly_atomic(Not(Equal("x", "y")))
    assert is_strictly_atomic(FunAtom("f", ("x",), "y"))
    assert is_strictly_atomic(ConstAtom("c", "y"))


def test_enumeration_examples():
    assert list(enumerate_sentences(Vocabulary(), 0, 0)) == []
    assert count_sentences(Vocabulary(), 0, 3) == 0
    const = [to_text(s) for s in enumerate_sentences(Vocabulary.of("c:const"), 1, 1)]
    assert "exists v0 . c=v0" in const
    assert "forall v0 . !(c=v0)" in const
    order = list(enumerate_sentences(Vocabulary.of("</2"), 2, 2))
    assert Exists("v0", Exists("v1", RelAtom("<", ("v0", "v1")))) in order


def test_enumeration_bounds_and_no_duplicates():
    vocab = Vocabulary.of("R/2")
    sents = list(enumerate_sentences(vocab, 2, 2))
    assert len(sents) == len(set(sents)) == 10504
    for s in sents:
        assert quantifier_rank(s) <= 2
        assert not free_vars(s)
        assert variables(s) <= {"v0", "v1"}


def test_formula_enumeration_free_variables():
    forms = list(enumerate_formulas(Vocabulary.of("R/2"), 2, 1, 1))
    assert all(free_vars(f) <= {"v0", "v1"} and quantifier_rank(f) <= 1 for f in forms)
    assert RelAtom("R", ("v1", "v0")) in forms


# -- randomized properties ---------------------------------------------------

VARS = ("x", "y", "z")


def formulas(depth=3):
    atoms = st.one_of(
        st.builds(Equal, st.sampled_from(VARS), st.sampled_from(VARS)),
        st.builds(lambda a, b: RelAtom("<", (a, b)), st.sampled_from(VARS), st.sampled_from(VARS)),
        st.builds(lambda a, b: FunAtom("f", (a,), b), st.sampled_from(VARS), st.sampled_from(VARS)),
        st.builds(lambda a: ConstAtom("c", a), st.sampled_from(VARS)),
    )
    return st.recursive(
        atoms,
        lambda inner: st.one_of(
            st.builds(Not, inner),
            st.builds(And, inner, inner),
            st.builds(Or, inner, inner),
            st.builds(Exists, st.sampled_from(VARS), inner),
            st.builds(Forall, st.sampled_from(VARS), inner),
        ),
        max_leaves=8,
    )


@st.composite
def structures(draw):
    n = draw(st.integers(1, 3))
    pairs = [(a, b) for a in range(n) for b in range(n)]
    rel = draw(st.sets(st.sampled_from(pairs)))
    f = {(a,): draw(st.integers(0, n - 1)) for a in range(n)}
    return FiniteStructure(n, {"<": rel}, {"f": f}, {"c": draw(st.integers(0, n - 1))})


VOCAB = Vocabulary.of("</2", "f/1:fun", "c:const")


@settings(max_examples=300, deadline=None)
@given(formulas())
def test_print_parse_roundtrip(phi):
    assert parse(to_text(phi), VOCAB) == phi


@settings(max_examples=200, deadline=None)
@given(structures(), formulas(), st.tuples(*[st.integers(0, 2)] * 3))
def test_full_relativization_matches_plain(M, phi, vals):
    v = {x: a % M.size for x, a in zip(VARS, vals)}
    assert evaluate(M, phi, v) == evaluate(M, phi, v, D=set(range(M.size)))
    assert evaluate(M, phi, v, memo={}) == evaluate(M, phi, v)


@settings(max_examples=200, deadline=None)
@given(structures(), formulas(), st.tuples(*[st.integers(0, 2)] * 3))
def test_negation_normal_form_is_equivalent(M, phi, vals):
    v = {x: a % M.size for x, a in zip(VARS, vals)}
    assert evaluate(M, negate(phi), v) == (not evaluate(M, phi, v))
