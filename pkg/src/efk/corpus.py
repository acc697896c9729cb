"""Small structure corpora: exhaustive enumeration up to isomorphism and
seeded random pairs. Used by the tests and the CLI's batch commands."""

from __future__ import annotations

import itertools
import random
from typing import Iterator, Optional

from efk.structures import (
    CONST,
    FUN,
    REL,
    FiniteStructure,
    ProblemSpec,
    Vocabulary,
    VocabularyChain,
    is_isomorphic,
)

BINARY = Vocabulary.of("R/2")


def _canonical_relation(n: int, rel: frozenset) -> tuple:
    best = None
    for perm in itertools.permutations(range(n)):
        img = tuple(sorted((perm[a], perm[b]) for a, b in rel))
        if best is None or img < best:
            best = img
    return best


def binary_structures(n: int, name: str = "R") -> list[FiniteStructure]:
    """One representative per isomorphism class of a binary relation on n points."""
    cells = [(a, b) for a in range(n) for b in range(n)]
    seen = set()
    out = []
    for mask in range(1 << len(cells)):
        rel = frozenset(c for i, c in enumerate(cells) if mask >> i & 1)
        key = _canonical_relation(n, rel)
        if key not in seen:
            seen.add(key)
            out.append(FiniteStructure(n, {name: key}))
    return out


def small_binary_corpus(max_size: int = 3) -> list[FiniteStructure]:
    return [M for n in range(1, max_size + 1) for M in binary_structures(n)]


def random_structure(vocab: Vocabulary, size: int, rng: random.Random, density: float = 0.5) -> FiniteStructure:
    rels, funs, consts = {}, {}, {}
    for sym in vocab:
        if sym.kind == REL:
            rels[sym.name] = [
                t for t in itertools.product(range(size), repeat=sym.arity) if rng.random() < density
            ]
        elif sym.kind == FUN:
            funs[sym.name] = {t: rng.randrange(size) for t in itertools.product(range(size), repeat=sym.arity)}
        elif sym.kind == CONST:
            consts[sym.name] = rng.randrange(size)
    return FiniteStructure(size, rels, funs, consts)


def random_nonisomorphic_pairs(
    count: int,
    vocab: Vocabulary = BINARY,
    max_size: int = 4,
    seed: int = 0,
    same_size: Optional[bool] = None,
) -> Iterator[tuple[FiniteStructure, FiniteStructure]]:
    """Seeded stream of non-isomorphic pairs with sizes in [1, max_size]."""
    rng = random.Random(seed)
    made = 0
    while made < count:
        n1 = rng.randint(1, max_size)
        n2 = n1 if same_size or (same_size is None and rng.random() < 0.5) else rng.randint(1, max_size)
        M1 = random_structure(vocab, n1, rng, rng.choice((0.25, 0.5, 0.75)))
        M2 = random_structure(vocab, n2, rng, rng.choice((0.25, 0.5, 0.75)))
        if is_isomorphic(M1, M2, vocab):
            continue
        made += 1
        yield M1, M2


def identical_pairs_problem(structures, chain: VocabularyChain, tail=None) -> ProblemSpec:
    """Problem whose n-th pair is (M_n, M_n)."""
    return ProblemSpec(chain, tuple((M, M) for M in structures), kseq_tail=tail)
