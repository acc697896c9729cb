import pytest

from efk.corpus import random_structure
from efk.filterlab import KSeqSpec, TailClass
from efk.structures import ProblemSpec, Vocabulary, VocabularyChain
from efk.textio import (
    InputError,
    format_family,
    format_kseq,
    format_problem,
    parse_family,
    parse_kseq,
    parse_problem,
    parse_sequences,
)

GOOD = """\
#problem N=1 tail=affine(1,0)
#vocab level=1 </2
#vocab level=2 f/1:fun c:const P/1
#structure side=1 index=0 size=2
<: 0 1
f: 0 -> 1; 1 -> 0
c: 1
P: 1
#structure side=2 index=0 size=2
<: 0 1
f: 0 -> 1; 1 -> 0
c: 0
P:
"""


def test_parse_problem():
    spec = parse_problem(GOOD)
    assert spec.N == 1
    assert spec.kseq_tail == TailClass.affine(1, 0)
    assert spec.chain.level(0).names() == []
    assert spec.chain.level(1).names() == ["<"]
    assert sorted(spec.chain.level(2).names()) == ["<", "P", "c", "f"]
    M1, M2 = spec.pairs[0]
    assert M1.constants == {"c": 1} and M2.constants == {"c": 0}
    assert M1.relations["P"] == frozenset({(1,)}) and M2.relations["P"] == frozenset()
    assert M1.functions["f"] == {(0,): 1, (1,): 0}


def test_problem_roundtrip():
    import random

    rng = random.Random(3)
    vocab = Vocabulary.of("R/2", "g/2:fun", "d:const", "Q/1")
    chain = VocabularyChain((Vocabulary(), Vocabulary.of("R/2"), vocab))
    pairs = [(random_structure(vocab, rng.randint(1, 3), rng), random_structure(vocab, rng.randint(1, 3), rng)) for _ in range(3)]
    spec = ProblemSpec(chain, pairs, kseq_tail=TailClass.periodic([(0, 1), (1, 0)]))
    text = format_problem(spec)
    back = parse_problem(text)
    assert back.digest() == spec.digest()
    assert format_problem(back) == text


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("#problem N=1\n#bogus\n", "unknown header"),
        ("#problem N=1 x=2\n", "unknown field"),
        ("#problem N=0\n", "N must be >= 1"),
        ("#problem N=1\n#vocab level=1 R/2\n#structure side=1 index=0 size=2\nR: 0 5\n#structure side=2 index=0 size=1\n", "out of universe"),
        ("#problem N=1\n#structure side=1 index=0 size=1\n", "missing structure side=2"),
        ("#problem N=1\n#vocab level=1 R/2\n#structure side=1 index=0 size=1\nS: 0 0\n#structure side=2 index=0 size=1\n", "not in the vocabulary"),
        ("#problem N=1\n#vocab level=1 c:const\n#structure side=1 index=0 size=2\nc: 0 1\n#structure side=2 index=0 size=1\nc: 0\n", "exactly one element"),
        ("#problem N=1\n#vocab level=1 f/1:fun\n#structure side=1 index=0 size=2\nf: 0 -> 1\n#structure side=2 index=0 size=1\nf: 0 -> 0\n", "missing"),
        ("R: 0 1\n", "before any #structure"),
        ("#problem N=1\n#structure side=3 index=0 size=1\n", "side must be 1 or 2"),
        ("#problem N=1\n#structure side=1 index=0 size=1\n#structure side=2 index=0 size=1\n#structure side=1 index=4 size=1\n", "outside the window"),
    ],
)
def test_problem_errors(text, fragment):
    with pytest.raises(InputError) as exc:
        parse_problem(text)
    assert fragment in str(exc.value)


def test_kseq_files():
    k = parse_kseq("prefix: 0 1 2 3\ntail: affine(1,0)\n")
    assert k == KSeqSpec((0, 1, 2, 3), TailClass.affine(1, 0))
    assert parse_kseq(format_kseq(k)) == k
    for bad in ("prefix: 0 1\n", "prefix: 0 x\ntail: bounded(1)\n", "tail: bounded(1)\ntail: bounded(2)\nprefix: 0\n", "nope: 1\n"):
        with pytest.raises(InputError):
            parse_kseq(bad)


def test_family_files():
    fam, g = parse_family("#family N=2 V=2\n0 0\n0 1\n#g 1 1\n")
    assert fam.functions == ((0, 0), (0, 1)) and g == (1, 1)
    assert parse_family(format_family(fam, g)) == (fam, g)
    for bad in ("0 0\n", "#family N=2 V=2\n0 2\n", "#family N=2 V=2\n0\n", "#family N=2 V=2\n#g 1\n", "#family N=2\n"):
        with pytest.raises(InputError):
            parse_family(bad)


def test_sequence_files():
    assert parse_sequences("0 1 2\n\n2 2 2\n", 3) == [(0, 1, 2), (2, 2, 2)]
    with pytest.raises(InputError):
        parse_sequences("0 1\n", 3)
