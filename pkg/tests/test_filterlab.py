import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efk.filterlab import (
    IMPROPER,
    PROPER,
    KSeqSpec,
    SetExpr,
    TailClass,
    TailInconsistency,
    check_certificate,
    classify,
    forall_D,
    generator,
    in_filter,
    is_ultraproduct_problem,
    parse_set,
    parse_tail,
    tail_mismatches,
)
from efk.structures import ProblemSpec, Vocabulary, VocabularyChain, linear_order

IDENTITY = KSeqSpec((0, 1, 2, 3), TailClass.affine(1, 0))
ALTERNATING = KSeqSpec((0, 1, 0, 3), TailClass.periodic([(0, 0), (1, 0)]))


def test_generator_examples():
    assert generator(IDENTITY, 3) == SetExpr.cofinite(range(4))
    assert generator(KSeqSpec((3, 3), TailClass.bounded(3)), 5).is_empty()
    odds = generator(ALTERNATING, 0)
    assert odds.members(100) == [n for n in range(100) if n % 2 == 1]


def test_generator_matches_direct_evaluation():
    for kspec in (IDENTITY, ALTERNATING, KSeqSpec((5, 0, 2), TailClass.periodic([(0, 4), (2, 1), (0, 0)]))):
        for c in range(8):
            G = generator(kspec, c)
            assert G.members(120) == [n for n in range(120) if kspec.value(n) > c]


def test_in_filter_examples():
    assert in_filter(IDENTITY, SetExpr.cofinite([])).member
    bounded = KSeqSpec((0, 1, 2), TailClass.bounded(2))
    for S in (SetExpr.empty(), SetExpr.evens(), SetExpr.finite([7])):
        assert in_filter(bounded, S).member
    d = in_filter(IDENTITY, SetExpr.evens())
    assert not d.member
    assert check_certificate(IDENTITY, SetExpr.evens(), d)


def test_forall_D_examples():
    assert forall_D(IDENTITY, SetExpr.cofinite([0, 5]))
    assert not forall_D(IDENTITY, SetExpr.finite(range(50)))
    assert forall_D(IDENTITY, generator(IDENTITY, 7))


def test_classify_examples():
    assert classify(TailClass.affine(1, 0)) == PROPER
    assert classify(TailClass.bounded(3)) == IMPROPER
    assert classify(TailClass.periodic([(0, 0), (1, 0)])) == PROPER


def test_tail_parsing():
    assert parse_tail("affine(1,0)") == TailClass.affine(1, 0)
    assert parse_tail("periodic(0:0,1:0)@2") == TailClass.periodic([(0, 0), (1, 0)], start=2)
    assert str(parse_tail("bounded(4)")) == "bounded(4)"
    for bad in ("affine(0,1)", "bounded(-1)", "linear(1)", "periodic()"):
        with pytest.raises(ValueError):
            parse_tail(bad)


def test_set_syntax():
    k = IDENTITY
    assert parse_set("fin{1,2,3}") == SetExpr.finite([1, 2, 3])
    assert parse_set("cofin{1,2}") == SetExpr.cofinite([1, 2])
    assert parse_set("gen(3)", k) == generator(k, 3)
    assert parse_set("~evens") == SetExpr.odds()
    assert parse_set("evens & fin{1,2}") == SetExpr.finite([2])
    assert parse_set("(evens | odds) & ~fin{0}") == SetExpr.cofinite([0])
    assert parse_set("period(3, 100)") == SetExpr.periodic("100")
    with pytest.raises(ValueError):
        parse_set("evens &")
    with pytest.raises(ValueError):
        parse_set("gen(1)")


def _two_chain_problem(tail):
    chain = VocabularyChain.constant(Vocabulary.of("</2"))
    return ProblemSpec(chain, [(linear_order(2), linear_order(2))] * 3, kseq_tail=tail)


def test_ultraproduct_problem_examples():
    assert is_ultraproduct_problem(_two_chain_problem(TailClass.affine(1, 0)))
    chain = VocabularyChain.constant(Vocabulary.of("P/1"))
    from efk.structures import FiniteStructure

    M1 = FiniteStructure(2, {"P": [(0,)]})
    M2 = FiniteStructure(2, {"P": []})
    spec = ProblemSpec(chain, [(M1, M2)] * 3, kseq_tail=TailClass.bounded(1))
    assert not is_ultraproduct_problem(spec)


def test_overlap_rule():
    # window values 0 1 2: a bounded(1) tail only conflicts where it is declared to apply
    assert not is_ultraproduct_problem(_two_chain_problem(TailClass.bounded(1)))
    with pytest.raises(TailInconsistency) as exc:
        is_ultraproduct_problem(_two_chain_problem(TailClass.bounded(1, start=2)))
    assert exc.value.mismatches == [(2, 2, "<= 1")]
    assert tail_mismatches([0, 1, 2], TailClass.affine(1, 0, start=0)) == []


# -- randomized properties ---------------------------------------------------

terms = st.one_of(st.tuples(st.just(0), st.integers(0, 6)), st.tuples(st.integers(1, 2), st.integers(-3, 3)))


@st.composite
def kspecs(draw):
    kind = draw(st.sampled_from(["bounded", "affine", "periodic"]))
    if kind == "bounded":
        tail = TailClass.bounded(draw(st.integers(0, 6)))
    elif kind == "affine":
        tail = TailClass.affine(draw(st.integers(1, 2)), draw(st.integers(-2, 3)))
    else:
        tail = TailClass.periodic(draw(st.lists(terms, min_size=1, max_size=4)))
    N = draw(st.integers(0, 8))
    prefix = draw(st.lists(st.integers(0, 8), min_size=N, max_size=N))
    try:
        return KSeqSpec(tuple(prefix), tail)
    except ValueError:
        return KSeqSpec(tuple(prefix), TailClass.affine(1, 0))


@st.composite
def sets(draw):
    bits = draw(st.lists(st.booleans(), max_size=10))
    phase = draw(st.lists(st.booleans(), min_size=1, max_size=4))
    return SetExpr(tuple(bits), tuple(phase))


@settings(max_examples=300, deadline=None)
@given(kspecs(), sets())
def test_decisions_carry_valid_certificates(kspec, S):
    d = in_filter(kspec, S)
    assert check_certificate(kspec, S, d)


@settings(max_examples=200, deadline=None)
@given(kspecs(), sets(), sets())
def test_filter_axioms(kspec, S, T):
    a, b = in_filter(kspec, S).member, in_filter(kspec, T).member
    assert in_filter(kspec, S & T).member == (a and b)
    if a:
        assert in_filter(kspec, S | T).member
    assert in_filter(kspec, SetExpr.empty()).member == (classify(kspec) == IMPROPER)
    if classify(kspec) == PROPER:
        assert not (forall_D(kspec, S) and forall_D(kspec, ~S))


@settings(max_examples=100, deadline=None)
@given(kspecs(), st.integers(0, 8), st.integers(0, 8))
def test_generator_containment(kspec, c, d):
    lo, hi = min(c, d), max(c, d)
    assert generator(kspec, hi).issubset(generator(kspec, lo))
    if classify(kspec) == PROPER:
        assert in_filter(kspec, generator(kspec, hi)).member


@settings(max_examples=200, deadline=None)
@given(sets(), sets(), st.integers(0, 60))
def test_boolean_algebra_pointwise(S, T, n):
    assert (n in S & T) == (n in S and n in T)
    assert (n in S | T) == (n in S or n in T)
    assert (n in ~S) == (n not in S)
    assert (n in S - T) == (n in S and n not in T)
