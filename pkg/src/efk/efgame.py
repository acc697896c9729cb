"""Exact solver for the budgeted Ehrenfeucht–Fraïssé game.

The game on ``(M1, M2)`` with budget k over vocabulary τ has k+1 rounds. In
each round the antagonist names ``A ⊆ M1`` and ``B ⊆ M2`` with
``|A| + |B| <= k``; the protagonist must answer with a partial injection
extending the previous one, covering A in its domain and B in its range and
preserving every strictly atomic τ-formula and its negation. The protagonist
wins by completing all rounds.

Maps are stored as sorted tuples of pairs. A position is
``(rounds remaining, map)``; nothing else about the history matters, so the
search memoizes on exactly that.
"""

from __future__ import annotations

import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from efk.formulas import Formula, evaluate
from efk.structures import CONST, FUN, REL, FiniteStructure, ProblemSpec, Vocabulary, VocabularyChain

PROTAGONIST = "protagonist"
ANTAGONIST = "antagonist"
UNDECIDED = "undecided"

DEFAULT_NODE_CAP = 10**7

Map = tuple  # tuple of (x, y) pairs sorted by x
Challenge = tuple  # (tuple A, tuple B), both sorted


def default_node_cap() -> int:
    env = os.environ.get("EFK_NODE_CAP")
    return int(env) if env else DEFAULT_NODE_CAP


class BudgetExceeded(RuntimeError):
    pass


def as_map(f) -> Map:
    if isinstance(f, dict):
        return tuple(sorted(f.items()))
    return tuple(sorted(f))


def domain(f: Map) -> set[int]:
    return {x for x, _ in f}


def image(f: Map) -> set[int]:
    return {y for _, y in f}


class Arena:
    """Two structures and the vocabulary whose atoms a map must preserve."""

    def __init__(self, M1: FiniteStructure, M2: FiniteStructure, vocab: Vocabulary):
        for M, side in ((M1, 1), (M2, 2)):
            for sym in vocab:
                if not M.interprets(sym):
                    raise ValueError(f"side {side} does not interpret {sym.name}")
        self.M1, self.M2, self.vocab = M1, M2, vocab
        self.rels = [(M1.relations[s.name], M2.relations[s.name], s.arity) for s in vocab.of_kind(REL)]
        self.funs = [(M1.functions[s.name], M2.functions[s.name], s.arity) for s in vocab.of_kind(FUN)]
        self.consts = [(M1.constants[s.name], M2.constants[s.name]) for s in vocab.of_kind(CONST)]

    def extension_ok(self, f: dict, new: Sequence[int]) -> bool:
        """Whether adding the domain elements ``new`` (already in ``f``) keeps atoms preserved.

        Only atoms mentioning a new element are checked; the rest were
        checked when ``f`` was built.
        """
        newset = set(new)
        for c1, c2 in self.consts:
            for x in new:
                if (c1 == x) != (c2 == f[x]):
                    return False
        if not self.rels and not self.funs:
            return True
        dom = sorted(f)
        for r1, r2, ar in self.rels:
            for t in itertools.product(dom, repeat=ar):
                if newset.isdisjoint(t):
                    continue
                if (t in r1) != (tuple(f[x] for x in t) in r2):
                    return False
        for t1, t2, ar in self.funs:
            for args in itertools.product(dom, repeat=ar):
                v1 = t1[args]
                v2 = t2[tuple(f[x] for x in args)]
                touched = not newset.isdisjoint(args)
                for y in dom:
                    if not touched and y not in newset:
                        continue
                    if (v1 == y) != (v2 == f[y]):
                        return False
        return True

    def responses(self, f: Map, ch: Challenge) -> list[Map]:
        """Minimal legal extensions of ``f`` answering ``ch``, sorted."""
        A, B = ch
        fd = dict(f)
        rng = set(fd.values())
        A_new = [a for a in A if a not in fd]
        B_new = [b for b in B if b not in rng]
        if not A_new and not B_new:
            return [f]
        free1 = [x for x in range(self.M1.size) if x not in fd]
        free2 = [y for y in range(self.M2.size) if y not in rng]
        out = []
        pre_pool = [x for x in free1 if x not in A_new]
        for imgs in itertools.permutations(free2, len(A_new)):
            used = set(imgs)
            uncovered = [b for b in B_new if b not in used]
            for pres in itertools.permutations(pre_pool, len(uncovered)):
                g = dict(fd)
                g.update(zip(A_new, imgs))
                g.update(zip(pres, uncovered))
                if self.extension_ok(g, A_new + list(pres)):
                    out.append(tuple(sorted(g.items())))
        out.sort()
        return out

    def challenges(self, f: Map, k: int) -> list[Challenge]:
        """Challenges made only of uncovered elements, nonempty, within budget k."""
        dom, rng = domain(f), image(f)
        free1 = [x for x in range(self.M1.size) if x not in dom]
        free2 = [y for y in range(self.M2.size) if y not in rng]
        out = []
        for total in range(1, k + 1):
            for na in range(0, total + 1):
                nb = total - na
                if na > len(free1) or nb > len(free2):
                    continue
                for A in itertools.combinations(free1, na):
                    for B in itertools.combinations(free2, nb):
                        out.append((A, B))
        return out


def legal_responses(
    M1: FiniteStructure, M2: FiniteStructure, vocab: Vocabulary, f, ch: Challenge
) -> list[Map]:
    """All minimal legal protagonist answers to ``ch`` from map ``f``.

    Minimal: every new pair covers a challenged element. Answering with more
    pairs never helps the protagonist (restricting a winning answer to its
    minimal part is again winning), so the solver only considers these.
    """
    A, B = ch
    return Arena(M1, M2, vocab).responses(as_map(f), (tuple(sorted(A)), tuple(sorted(B))))


# ---------------------------------------------------------------------------
# solving


class GameSolver:
    """Memoized minimax over positions ``(rounds remaining, map)``."""

    def __init__(
        self,
        M1: FiniteStructure,
        M2: FiniteStructure,
        vocab: Vocabulary,
        k: int,
        node_cap: Optional[int] = None,
        memo: bool = True,
    ):
        if k < 0:
            raise ValueError("budget k must be >= 0")
        self.arena = Arena(M1, M2, vocab)
        self.k = k
        self.rounds = k + 1
        self.node_cap = default_node_cap() if node_cap is None else node_cap
        self.use_memo = memo
        self.table: dict[tuple[int, Map], bool] = {}
        self.nodes = 0

    def wins(self, r: int, f: Map) -> bool:
        """Does the protagonist win with ``r`` rounds still to play from map ``f``?"""
        if r == 0:
            return True
        key = (r, f)
        if self.use_memo:
            hit = self.table.get(key)
            if hit is not None:
                return hit
        self.nodes += 1
        if self.nodes > self.node_cap:
            raise BudgetExceeded(f"node cap {self.node_cap} exceeded")
        result = True
        for ch in self.arena.challenges(f, self.k):
            if not any(self.wins(r - 1, g) for g in self.arena.responses(f, ch)):
                result = False
                break
        if self.use_memo:
            self.table[key] = result
        return result

    def solve(self) -> "SolveResult":
        t0 = time.perf_counter()
        try:
            won = self.wins(self.rounds, ())
            winner = PROTAGONIST if won else ANTAGONIST
        except BudgetExceeded:
            winner = UNDECIDED
        millis = (time.perf_counter() - t0) * 1000.0
        return SolveResult(winner, self.k, self.nodes, millis, self)

    def answer(self, r: int, f: Map, ch: Challenge) -> Optional[Map]:
        """Canonical strategy: lexicographically first winning minimal answer."""
        ch = fresh_part(f, ch)
        if not ch[0] and not ch[1]:
            return f
        for g in self.arena.responses(f, ch):
            if self.wins(r - 1, g):
                return g
        return None

    def refutation(self, r: int, f: Map) -> Optional[Challenge]:
        """First challenge that no answer survives, if any."""
        for ch in self.arena.challenges(f, self.k):
            if not any(self.wins(r - 1, g) for g in self.arena.responses(f, ch)):
                return ch
        return None


def fresh_part(f: Map, ch: Challenge) -> Challenge:
    dom, rng = domain(f), image(f)
    A, B = ch
    return (tuple(sorted(a for a in set(A) if a not in dom)), tuple(sorted(b for b in set(B) if b not in rng)))


@dataclass
class SolveResult:
    winner: str
    k: int
    nodes: int
    millis: float
    solver: GameSolver = field(repr=False, compare=False)

    @property
    def decided(self) -> bool:
        return self.winner != UNDECIDED

    def certificate(self):
        if self.winner == PROTAGONIST:
            return protagonist_certificate(self.solver)
        if self.winner == ANTAGONIST:
            return antagonist_certificate(self.solver)
        raise ValueError("undecided games have no certificate")


def solve_game(
    M1: FiniteStructure,
    M2: FiniteStructure,
    chain_or_vocab,
    k: int,
    node_cap: Optional[int] = None,
    memo: bool = True,
) -> SolveResult:
    """Solve the game with budget k over level k of the chain (or a fixed vocabulary)."""
    vocab = chain_or_vocab.level(k) if isinstance(chain_or_vocab, VocabularyChain) else chain_or_vocab
    return GameSolver(M1, M2, vocab, k, node_cap, memo).solve()


# ---------------------------------------------------------------------------
# certificates


@dataclass
class ProtagonistCertificate:
    """Answers keyed by ``(round index, map, fresh challenge)``."""

    k: int
    table: dict

    def __len__(self):
        return len(self.table)


@dataclass
class AntagonistCertificate:
    """Challenge tree: ``nodes[(round index, map)] = (challenge, answers)``.

    ``answers`` lists every minimal legal reply; each leads to another node
    unless the list is empty (the protagonist is stuck).
    """

    k: int
    nodes: dict

    def __len__(self):
        return len(self.nodes)


def protagonist_certificate(solver: GameSolver) -> ProtagonistCertificate:
    table = {}
    seen = set()
    stack = [(0, ())]
    while stack:
        l, f = stack.pop()
        if (l, f) in seen or l >= solver.rounds:
            continue
        seen.add((l, f))
        r = solver.rounds - l
        stack.append((l + 1, f))
        for ch in solver.arena.challenges(f, solver.k):
            g = solver.answer(r, f, ch)
            if g is None:
                raise AssertionError("protagonist strategy has a hole; solver is inconsistent")
            table[(l, f, ch)] = g
            stack.append((l + 1, g))
    return ProtagonistCertificate(solver.k, table)


def antagonist_certificate(solver: GameSolver) -> AntagonistCertificate:
    nodes = {}
    stack = [(0, ())]
    while stack:
        l, f = stack.pop()
        if (l, f) in nodes:
            continue
        r = solver.rounds - l
        ch = solver.refutation(r, f)
        if ch is None:
            raise AssertionError("antagonist has no refutation at a node of its own tree")
        answers = solver.arena.responses(f, ch)
        nodes[(l, f)] = (ch, answers)
        stack.extend((l + 1, g) for g in answers)
    return AntagonistCertificate(solver.k, nodes)


# Independent re-checking, used by the certificate verifiers and the tests.


def preserves_atoms(M1: FiniteStructure, M2: FiniteStructure, vocab: Vocabulary, f) -> bool:
    """From-scratch check that ``f`` is injective and preserves all atoms over its domain."""
    fd = dict(f)
    if len(set(fd.values())) != len(fd):
        return False
    if any(not 0 <= x < M1.size or not 0 <= y < M2.size for x, y in fd.items()):
        return False
    dom = sorted(fd)
    for sym in vocab:
        if sym.kind == REL:
            r1, r2 = M1.relations[sym.name], M2.relations[sym.name]
            for t in itertools.product(dom, repeat=sym.arity):
                if (t in r1) != (tuple(fd[x] for x in t) in r2):
                    return False
        elif sym.kind == FUN:
            t1, t2 = M1.functions[sym.name], M2.functions[sym.name]
            for args in itertools.product(dom, repeat=sym.arity):
                for y in dom:
                    if (t1[args] == y) != (t2[tuple(fd[x] for x in args)] == fd[y]):
                        return False
        else:
            c1, c2 = M1.constants[sym.name], M2.constants[sym.name]
            for y in dom:
                if (c1 == y) != (c2 == fd[y]):
                    return False
    return True


def brute_responses(M1, M2, vocab, f, ch) -> list[Map]:
    """Minimal legal answers found by enumerating every candidate extension."""
    fd = dict(f)
    A, B = ch
    A_new = {a for a in A if a not in fd}
    B_new = {b for b in B if b not in set(fd.values())}
    free1 = [x for x in range(M1.size) if x not in fd]
    free2 = [y for y in range(M2.size) if y not in set(fd.values())]
    out = []
    for size in range(len(free1) + 1):
        for xs in itertools.combinations(free1, size):
            for ys in itertools.permutations(free2, size):
                new = dict(zip(xs, ys))
                if not A_new <= set(new) or not B_new <= set(new.values()):
                    continue
                if any(x not in A_new and y not in B_new for x, y in new.items()):
                    continue
                g = {**fd, **new}
                if preserves_atoms(M1, M2, vocab, g):
                    out.append(tuple(sorted(g.items())))
    return sorted(out)


def all_challenges(M1, M2, k: int) -> Iterator[Challenge]:
    """Every challenge within budget, including already-covered elements."""
    elems = [(1, x) for x in range(M1.size)] + [(2, y) for y in range(M2.size)]
    for size in range(k + 1):
        for combo in itertools.combinations(elems, size):
            yield (tuple(x for s, x in combo if s == 1), tuple(y for s, y in combo if s == 2))


def verify_protagonist_certificate(M1, M2, vocab, cert: ProtagonistCertificate) -> bool:
    """Replay the answer table against every challenge sequence."""
    rounds = cert.k + 1
    seen = set()
    stack = [(0, ())]
    while stack:
        l, f = stack.pop()
        if l == rounds or (l, f) in seen:
            continue
        seen.add((l, f))
        for ch in all_challenges(M1, M2, cert.k):
            fresh = fresh_part(f, ch)
            if not fresh[0] and not fresh[1]:
                g = f
            else:
                g = cert.table.get((l, f, fresh))
                if g is None:
                    return False
            gd = dict(g)
            if not set(f) <= set(g):
                return False
            if not set(ch[0]) <= set(gd) or not set(ch[1]) <= set(gd.values()):
                return False
            if not preserves_atoms(M1, M2, vocab, g):
                return False
            stack.append((l + 1, g))
    return True


def verify_antagonist_certificate(M1, M2, vocab, cert: AntagonistCertificate) -> bool:
    """Check that every minimal protagonist reply is refuted before the last round ends."""
    rounds = cert.k + 1
    stack = [(0, ())]
    seen = set()
    while stack:
        l, f = stack.pop()
        if (l, f) in seen:
            continue
        seen.add((l, f))
        if l >= rounds:
            return False
        node = cert.nodes.get((l, f))
        if node is None:
            return False
        ch = node[0]
        if len(ch[0]) + len(ch[1]) > cert.k:
            return False
        for g in brute_responses(M1, M2, vocab, f, ch):
            stack.append((l + 1, g))
    return True


# ---------------------------------------------------------------------------
# k-sequences


@dataclass
class KSeq:
    """Per-index values; ``None`` marks an index the node cap left undecided."""

    values: list[Optional[int]]
    nodes: list[int] = field(default_factory=list)
    wins: list[list[str]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return all(v is not None for v in self.values)

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, n):
        return self.values[n]


def k_at_index(M1, M2, chain: VocabularyChain, n: int, node_cap: Optional[int] = None):
    """``(k_n, total nodes, winners for k = 0..n)``; k_n is None if any game was undecided."""
    winners = []
    nodes = 0
    for k in range(n + 1):
        res = solve_game(M1, M2, chain, k, node_cap)
        winners.append(res.winner)
        nodes += res.nodes
    if UNDECIDED in winners:
        return None, nodes, winners
    best = max(k for k, w in enumerate(winners) if w == PROTAGONIST)
    return best, nodes, winners


def _k_job(args):
    return k_at_index(*args)


def compute_k_seq(spec: ProblemSpec, node_cap: Optional[int] = None, jobs: int = 1) -> KSeq:
    """k_{m,n} for every window index, testing every k <= n."""
    tasks = [(M1, M2, spec.chain, n, node_cap) for n, (M1, M2) in enumerate(spec.pairs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_k_job, tasks))
    else:
        results = [_k_job(t) for t in tasks]
    return KSeq([r[0] for r in results], [r[1] for r in results], [r[2] for r in results])


# ---------------------------------------------------------------------------
# relativized transfer along a map


def check_ss1(
    M1: FiniteStructure,
    M2: FiniteStructure,
    f,
    phi: Formula,
    args: Sequence[int],
    names=None,
    memos: Optional[tuple[dict, dict]] = None,
) -> bool:
    """Compare ``phi`` relativized to dom(f) at ``args`` with ``phi`` relativized to
    range(f) at the image of ``args``.

    ``names`` lists the free variables in the order ``args`` fills them
    (default: sorted free variables). ``memos`` are evaluation memos for
    (M1, dom f) and (M2, range f), reusable across calls with the same sets.
    """
    from efk.formulas import free_vars

    fd = dict(f)
    for a in args:
        if a not in fd:
            raise ValueError(f"element {a} not in the domain of the map")
    names = sorted(free_vars(phi)) if names is None else list(names)
    if len(names) != len(args):
        raise ValueError(f"{len(names)} free variables but {len(args)} elements")
    v1 = dict(zip(names, args))
    v2 = {x: fd[a] for x, a in v1.items()}
    m1, m2 = memos if memos is not None else (None, None)
    left = evaluate(M1, phi, v1, D=set(fd), memo=m1)
    right = evaluate(M2, phi, v2, D=set(fd.values()), memo=m2)
    return left == right


def final_maps(solver: GameSolver) -> set[Map]:
    """Every map that can end a play in which the protagonist follows the
    canonical strategy (the antagonist may pass, so any reached map can be last)."""
    cert = protagonist_certificate(solver)
    return {()} | set(cert.table.values())
