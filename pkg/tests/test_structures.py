import pytest

from efk.structures import (
    CONST,
    FUN,
    REL,
    FiniteStructure,
    ProblemSpec,
    Symbol,
    Vocabulary,
    VocabularyChain,
    find_isomorphism,
    is_isomorphic,
    kappa,
    linear_order,
    parse_symbol,
    pure_set,
    reduct,
    validate_problem,
)

ORDER = Vocabulary.of("</2")
CHAIN = VocabularyChain.constant(ORDER)


def test_parse_symbol_kinds():
    assert parse_symbol("R/2") == Symbol("R", REL, 2)
    assert parse_symbol("f/1:fun") == Symbol("f", FUN, 1)
    assert parse_symbol("c:const") == Symbol("c", CONST, 0)
    with pytest.raises(ValueError):
        parse_symbol("R/x")
    with pytest.raises(ValueError):
        parse_symbol("R/2:blob")


def test_symbol_arity_invariant():
    with pytest.raises(ValueError):
        Symbol("R", REL, 0)
    with pytest.raises(ValueError):
        Symbol("c", CONST, 1)


def test_duplicate_names_rejected():
    with pytest.raises(ValueError):
        Vocabulary([Symbol("R", REL, 2), Symbol("R", REL, 1)])


def test_nonempty_level_zero_is_a_violation():
    spec = ProblemSpec(VocabularyChain((Vocabulary.of("R/2"),)), [(FiniteStructure(1, {"R": []}),) * 2])
    rep = validate_problem(spec)
    assert not rep.ok
    assert any("τ_0 nonempty" in v for v in rep.violations)


def test_tuple_out_of_universe():
    chain = VocabularyChain.constant(Vocabulary.of("R/2"))
    M = FiniteStructure(3, {"R": [(0, 5)]})
    rep = validate_problem(ProblemSpec(chain, [(M, M)]))
    assert any("out of universe" in v and "index 0" in v for v in rep.violations)


def test_well_formed_problem_is_ok():
    spec = ProblemSpec(CHAIN, [(linear_order(2), linear_order(3)), (linear_order(3), linear_order(3))])
    assert validate_problem(spec).ok


def test_other_violations():
    chain = VocabularyChain((Vocabulary(), Vocabulary.of("R/2", "S/1"), Vocabulary.of("R/2")))
    M = FiniteStructure(2, {"R": []})
    rep = validate_problem(ProblemSpec(chain, [(M, FiniteStructure(0))]))
    text = " ".join(rep.violations)
    assert "symbol S missing" in text
    assert "size 0" in text
    spec = ProblemSpec(CHAIN, [(linear_order(3), linear_order(3))], size_bound=[2])
    assert any("exceeds bound" in v for v in validate_problem(spec).violations)


def test_kappa_examples():
    one = ProblemSpec(VocabularyChain((Vocabulary(),)), [(pure_set(1), pure_set(1))] * 3)
    assert kappa(one) == 1
    two = ProblemSpec(VocabularyChain((Vocabulary(),)), [(pure_set(2), pure_set(3)), (pure_set(3), pure_set(2))])
    assert kappa(two) == 3


def test_reduct_levels():
    chain = VocabularyChain((Vocabulary(), Vocabulary.of("</2"), Vocabulary.of("</2", "c:const")))
    M = FiniteStructure(3, {"<": linear_order(3).relations["<"]}, constants={"c": 2})
    assert reduct(M, 0, chain) == pure_set(3)
    assert reduct(M, 2, chain) == M
    assert reduct(reduct(M, 2, chain), 1, chain) == reduct(M, 1, chain)
    assert set(reduct(M, 1, chain).symbol_names()) <= set(reduct(M, 2, chain).symbol_names())
    with pytest.raises(ValueError):
        reduct(M, 3, chain)


def test_isomorphism_brute_force():
    M = FiniteStructure(3, {"<": [(2, 1), (2, 0), (1, 0)]})
    h = find_isomorphism(M, linear_order(3), ORDER)
    assert h == {0: 2, 1: 1, 2: 0}
    assert not is_isomorphic(linear_order(3), linear_order(2), ORDER)


def test_structures_hash_by_content():
    assert linear_order(3) == FiniteStructure(3, {"<": [(1, 2), (0, 1), (0, 2)]})
    assert len({linear_order(3), linear_order(3), linear_order(2)}) == 2


def test_digest_is_stable():
    spec = ProblemSpec(CHAIN, [(linear_order(2), linear_order(3))])
    again = ProblemSpec(CHAIN, [(linear_order(2), linear_order(3))])
    assert spec.digest() == again.digest()
    assert spec.digest() != ProblemSpec(CHAIN, [(linear_order(3), linear_order(2))]).digest()
