"""Separating sentences ∃x̄ φ(x̄), φ a conjunction of atomic literals.

When the antagonist wins the game with budget k+1, the two structures are
not isomorphic over level k+1 of the chain, so some tuple of distinct
elements on one side has an atomic type the other side never realizes. The
search goes by increasing width, side 1 before side 2, tuples in
lexicographic order. The found type is then thinned greedily (non-equality
literals first) while it stays unrealized on the other side.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from efk.efgame import ANTAGONIST, solve_game
from efk.formulas import Equal, Formula, Not, conjunction, evaluate, exists_all
from efk.sentences import atoms, pool
from efk.structures import FiniteStructure, Vocabulary, VocabularyChain


@dataclass(frozen=True)
class Distinguisher:
    sentence: Formula
    direction: int  # 1: only M1 satisfies it; 2: only M2
    width: int

    found = True


@dataclass(frozen=True)
class NoneFound:
    reason: str
    bound: Optional[int] = None

    found = False


def width_cap(k: int) -> int:
    return (k + 2) * (k + 1)


def _atom_truths(M: FiniteStructure, atom_list, names, tup) -> tuple[bool, ...]:
    v = dict(zip(names, tup))
    return tuple(evaluate(M, a, v) for a in atom_list)


def _realized(M: FiniteStructure, literals, names) -> bool:
    for tup in itertools.product(range(M.size), repeat=len(names)):
        v = dict(zip(names, tup))
        if all(evaluate(M, lit, v) for lit in literals):
            return True
    return False


def _thin(literals: list[Formula], other: FiniteStructure, names) -> list[Formula]:
    order = [lit for lit in literals if not _is_equality(lit)] + [lit for lit in literals if _is_equality(lit)]
    keep = list(order)
    for lit in order:
        trial = [x for x in keep if x is not lit]
        if trial and not _realized(other, trial, names):
            keep = trial
    return [lit for lit in literals if any(lit is k for k in keep)]


def _is_equality(lit: Formula) -> bool:
    return isinstance(lit.body if isinstance(lit, Not) else lit, Equal)


def separating_sentence(M1: FiniteStructure, M2: FiniteStructure, vocab: Vocabulary, max_width: int):
    """Search atomic types up to ``max_width``; returns a Distinguisher or None."""
    sides = ((1, M1, M2), (2, M2, M1))
    for w in range(1, max_width + 1):
        if w > M1.size and w > M2.size:
            break
        names = pool(w)
        atom_list = atoms(vocab, names)
        types = {}
        for _, M, _ in sides:
            types[id(M)] = {
                _atom_truths(M, atom_list, names, t): t for t in itertools.permutations(range(M.size), w)
            }
        for side, M, other in sides:
            mine = sorted(types[id(M)].items(), key=lambda kv: kv[1])
            theirs = types[id(other)]
            for diag, _ in mine:
                if diag in theirs:
                    continue
                lits = [a if truth else Not(a) for a, truth in zip(atom_list, diag)]
                lits = _thin(lits, other, names)
                sigma = exists_all(names, conjunction(lits))
                if not (evaluate(M, sigma) and not evaluate(other, sigma)):
                    raise AssertionError(f"separating sentence failed its own check: {sigma}")
                return Distinguisher(sigma, side, w)
    return None


def extract_distinguisher(
    M1: FiniteStructure,
    M2: FiniteStructure,
    chain: VocabularyChain,
    k: int,
    max_width: Optional[int] = None,
    node_cap: Optional[int] = None,
):
    """A sentence over level k+1 true in exactly one structure, or NoneFound."""
    res = solve_game(M1, M2, chain, k + 1, node_cap)
    if res.winner != ANTAGONIST:
        return NoneFound(f"{res.winner} at budget {k + 1}; nothing to separate")
    cap = width_cap(k) if max_width is None else max_width
    found = separating_sentence(M1, M2, chain.level(k + 1), cap)
    if found is None:
        return NoneFound(f"no separating atomic type of width <= {cap}", cap)
    return found
