import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from efk.filterlab import KSeqSpec, TailClass
from efk.slalom import (
    Family,
    Filtered,
    Infeasible,
    SearchBoundExceeded,
    Slalom,
    check_cover,
    greedy_cover,
    min_cover_exact,
    single_slalom_cover,
)


def test_cover_examples():
    assert check_cover([], []).ok
    eta = (1, 0, 2)
    assert check_cover([eta], [Slalom((1, 1, 1), [{1}, {0}, {2}])]).ok
    other = (0, 0, 2)
    rep = check_cover([eta, other], [Slalom((1, 1, 1), [{1}, {0}, {2}])])
    assert not rep.ok
    assert rep.failure == (other, 0)


def test_slalom_capacity_enforced():
    with pytest.raises(ValueError):
        Slalom((1,), [{0, 1}])


def test_single_cover_examples():
    s = single_slalom_cover([(0, 0, 0), (1, 1, 1)], (2, 2, 2))
    assert s.as_lists() == [[0, 1]] * 3
    bad = single_slalom_cover([(0, 0), (1, 0), (2, 0)], (2, 2))
    assert isinstance(bad, Infeasible)
    assert (bad.index, bad.values, bad.capacity) == (0, (0, 1, 2), 2)


def test_filtered_mode_skips_inactive_indices():
    H = [(0, 1, 1), (1, 1, 1), (2, 1, 1)]
    g = (1, 2, 2)
    assert isinstance(single_slalom_cover(H, g), Infeasible)
    kspec = KSeqSpec((0, 3, 3), TailClass.affine(1, 0))
    mode = Filtered(0, 0, kspec)
    assert mode.required(3) == [1, 2]
    s = single_slalom_cover(H, g, mode)
    assert isinstance(s, Slalom)
    assert check_cover(H, [s], mode).ok


def test_four_functions_need_four_slaloms():
    H = Family.all_functions(2, 2)
    assert len(greedy_cover(H, (1, 1))) == 4
    size, fam = min_cover_exact(H, (1, 1))
    assert size == 4
    assert check_cover(H, fam).ok


def test_eight_functions_capacity_two():
    H = Family.all_functions(3, 2)
    size, fam = min_cover_exact(H, (2, 2, 2))
    assert size == 1
    assert check_cover(H, fam).ok


def test_greedy_first_fit_order():
    # first fit uses 3; {(0,0),(0,2),(2,2)} with {(0,1),(1,2)} uses 2
    H = [(0, 0), (0, 1), (0, 2), (1, 2), (2, 2)]
    fam = greedy_cover(H, (2, 2))
    assert check_cover(H, fam).ok
    assert [s.as_lists() for s in fam] == [[[0], [0, 1]], [[0, 1], [2]], [[2], [2]]]
    assert min_cover_exact(H, (2, 2))[0] == 2


def test_exact_search_bound():
    with pytest.raises(SearchBoundExceeded):
        min_cover_exact(Family.all_functions(4, 2), (1,) * 4, bound=10)


def test_family_validation():
    with pytest.raises(ValueError):
        Family(2, 2, ((0, 2),))
    assert len(Family(2, 2, ((0, 1), (0, 1)))) == 1


@st.composite
def instances(draw):
    N = draw(st.integers(1, 3))
    V = draw(st.integers(1, 3))
    H = draw(st.lists(st.tuples(*[st.integers(0, V - 1)] * N), max_size=6, unique=True))
    g = tuple(draw(st.lists(st.integers(1, 3), min_size=N, max_size=N)))
    return H, g


@settings(max_examples=200, deadline=None)
@given(instances())
def test_cover_size_ordering(inst):
    H, g = inst
    greedy = greedy_cover(H, g)
    assert check_cover(H, greedy).ok
    size, fam = min_cover_exact(H, g)
    assert check_cover(H, fam).ok
    assert size == len(fam) <= len(greedy) <= len(H)


@settings(max_examples=200, deadline=None)
@given(instances(), st.integers(0, 3), st.integers(0, 2))
def test_mode_and_capacity_monotone(inst, c, n0):
    H, g = inst
    N = len(g)
    kspec = KSeqSpec(tuple(range(N)), TailClass.affine(1, 0))
    every = not isinstance(single_slalom_cover(H, g), Infeasible)
    if every:
        assert not isinstance(single_slalom_cover(H, g, Filtered(c, n0, kspec)), Infeasible)
        bigger = tuple(x + 1 for x in g)
        assert not isinstance(single_slalom_cover(H, bigger), Infeasible)
