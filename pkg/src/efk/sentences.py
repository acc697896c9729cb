"""Exhaustive enumeration of small first-order sentences.

Normal form of the emitted sentences:

* negation normal form: ``!`` only in front of atoms;
* variables come from the pool ``v0, v1, ...`` and the quantifier at nesting
  depth d always binds ``v<d>``, so α-variants are never produced twice;
* an ``exists`` body is a conjunction and a ``forall`` body a disjunction of
  between 1 and ``width`` distinct parts, listed in enumeration order and
  never containing a literal together with its complement;
* a part is a literal over the variables in scope or a quantified formula
  one level deeper.

Top-level boolean combinations are not emitted: two structures agree on
every combination as soon as they agree on each emitted sentence. Counts
grow super-exponentially in ``rank`` and ``width``; keep both at 2 or below
except for tiny vocabularies.
"""

from __future__ import annotations

import itertools
from typing import Iterator, Optional

from efk.formulas import (
    ConstAtom,
    Equal,
    Exists,
    Forall,
    Formula,
    FunAtom,
    Not,
    RelAtom,
    conjunction,
    disjunction,
    evaluate,
)
from efk.structures import CONST, FUN, REL, Vocabulary


def pool(w: int) -> list[str]:
    return [f"v{i}" for i in range(w)]


def atoms(vocab: Vocabulary, names: list[str]) -> list[Formula]:
    """Every strictly atomic formula over ``names`` (trivial ``x=x`` left out)."""
    out: list[Formula] = [Equal(a, b) for a, b in itertools.combinations(names, 2)]
    for sym in vocab:
        if sym.kind == REL:
            out.extend(RelAtom(sym.name, args) for args in itertools.product(names, repeat=sym.arity))
        elif sym.kind == FUN:
            for args in itertools.product(names, repeat=sym.arity):
                out.extend(FunAtom(sym.name, args, y) for y in names)
        elif sym.kind == CONST:
            out.extend(ConstAtom(sym.name, y) for y in names)
    return out


def literals(vocab: Vocabulary, names: list[str]) -> list[Formula]:
    out = []
    for a in atoms(vocab, names):
        out.append(a)
        out.append(Not(a))
    return out


def _complementary(a: Formula, b: Formula) -> bool:
    return (isinstance(a, Not) and a.body == b) or (isinstance(b, Not) and b.body == a)


class _Enumerator:
    def __init__(self, vocab: Vocabulary, w: int, width: int):
        self.vocab = vocab
        self.names = pool(w)
        self.w = w
        self.width = width
        self._parts: dict[tuple[int, int], list[Formula]] = {}

    def blocks(self, parts: list[Formula]) -> Iterator[tuple[Formula, ...]]:
        for size in range(1, self.width + 1):
            for combo in itertools.combinations(parts, size):
                if size > 1 and any(_complementary(a, b) for a, b in itertools.combinations(combo, 2)):
                    continue
                yield combo

    def quantified(self, depth: int, budget: int) -> Iterator[Formula]:
        """Quantified formulas binding ``v<depth>`` with rank <= budget."""
        if budget < 1 or depth >= self.w:
            return
        var = self.names[depth]
        inner = self.parts(depth + 1, budget - 1)
        for combo in self.blocks(inner):
            yield Exists(var, conjunction(combo))
        for combo in self.blocks(inner):
            yield Forall(var, disjunction(combo))

    def parts(self, depth: int, budget: int) -> list[Formula]:
        """Literals and quantified formulas with free variables among the first ``depth``."""
        key = (depth, budget)
        if key not in self._parts:
            out = literals(self.vocab, self.names[:depth]) if depth else []
            out.extend(self.quantified(depth, budget))
            self._parts[key] = out
        return self._parts[key]


def enumerate_sentences(vocab: Vocabulary, rank_bound: int, var_bound: int, width: int = 2) -> Iterator[Formula]:
    """All normal-form sentences of quantifier rank <= ``rank_bound`` using at most
    ``var_bound`` variables, in a fixed deterministic order."""
    if rank_bound < 0 or var_bound < 0 or width < 1:
        raise ValueError("bounds must be non-negative and width >= 1")
    en = _Enumerator(vocab, var_bound, width)
    yield from en.quantified(0, rank_bound)


def count_sentences(vocab: Vocabulary, rank_bound: int, var_bound: int, width: int = 2) -> int:
    return sum(1 for _ in enumerate_sentences(vocab, rank_bound, var_bound, width))


def truth_vector(M, sentences, memo: Optional[dict] = None) -> tuple[bool, ...]:
    """Truth values of ``sentences`` in ``M`` (``memo`` must belong to ``M``)."""
    memo = {} if memo is None else memo
    return tuple(evaluate(M, phi, memo=memo) for phi in sentences)


def first_disagreement(M1, M2, vocab: Vocabulary, rank_bound: int, var_bound: int, width: int = 2):
    """``(checked, sentence)``: the first enumerated sentence true in exactly one
    structure, or None after checking all of them."""
    memo1, memo2 = {}, {}
    checked = 0
    for phi in enumerate_sentences(vocab, rank_bound, var_bound, width):
        checked += 1
        if evaluate(M1, phi, memo=memo1) != evaluate(M2, phi, memo=memo2):
            return checked, phi
    return checked, None


def enumerate_formulas(vocab: Vocabulary, free: int, rank_bound: int, width: int = 2) -> Iterator[Formula]:
    """Normal-form formulas whose free variables lie among ``v0..v<free-1>``:
    literals over those variables, then quantified formulas of rank <= ``rank_bound``."""
    if free < 0 or rank_bound < 0 or width < 1:
        raise ValueError("bounds must be non-negative and width >= 1")
    en = _Enumerator(vocab, free + rank_bound, width)
    yield from en.parts(free, rank_bound)
