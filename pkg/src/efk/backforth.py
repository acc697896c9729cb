"""Approximations: per-index partial plays of the games, and their calculus.

An approximation records, for every window index n, the rounds played so far
in the game with budget k_n, where the protagonist always answers with the
solver's canonical winning strategy. The slack at n is ``k_n - rounds``.
Statements that hold "on a large set" are made on an explicit active window
``W(c, n0) = {n in [n0, N) : k_n > c}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from efk.efgame import GameSolver, Map, compute_k_seq, preserves_atoms
from efk.formulas import Formula, evaluate, free_vars, quantifier_rank, symbols, to_text
from efk.structures import ProblemSpec

Window = tuple[int, int]  # (c, n0)


class ApproxError(ValueError):
    pass


class StrategyReplayError(RuntimeError):
    """The canonical strategy had no winning answer where it must have one."""


@dataclass(frozen=True)
class Round:
    challenge: tuple[tuple[int, ...], tuple[int, ...]]
    response: Map


class Context:
    """A problem, its k-sequence and one game solver per index (built lazily)."""

    def __init__(self, spec: ProblemSpec, kseq: Optional[Sequence[int]] = None, node_cap: Optional[int] = None):
        self.spec = spec
        if kseq is None:
            kseq = compute_k_seq(spec, node_cap).values
        if any(k is None for k in kseq):
            raise ApproxError("k-sequence has undecided indices")
        if len(kseq) != spec.N:
            raise ApproxError(f"k-sequence has {len(kseq)} entries, window has {spec.N}")
        self.kseq = tuple(kseq)
        self.node_cap = node_cap
        self._solvers: dict[int, GameSolver] = {}

    @property
    def N(self) -> int:
        return self.spec.N

    def vocab(self, n: int):
        return self.spec.chain.level(self.kseq[n])

    def solver(self, n: int) -> GameSolver:
        if n not in self._solvers:
            M1, M2 = self.spec.pairs[n]
            self._solvers[n] = GameSolver(M1, M2, self.vocab(n), self.kseq[n], self.node_cap)
        return self._solvers[n]

    def window(self, c: int, n0: int) -> list[int]:
        return [n for n in range(n0, self.N) if self.kseq[n] > c]


@dataclass(frozen=True)
class Approximation:
    ctx: Context = field(compare=False, repr=False)
    plays: tuple[tuple[Round, ...], ...]

    def rounds(self, n: int) -> int:
        return len(self.plays[n])

    def last_map(self, n: int) -> Map:
        play = self.plays[n]
        return play[-1].response if play else ()

    def f(self, n: int) -> dict:
        return dict(self.last_map(n))

    def slack(self, n: int) -> int:
        return self.ctx.kseq[n] - len(self.plays[n])

    def slacks(self) -> list[int]:
        return [self.slack(n) for n in range(self.ctx.N)]

    def transcript(self) -> str:
        """Per-index play transcripts as line-delimited JSON, headed by the spec digest."""
        lines = [json.dumps({"approximation": self.ctx.spec.digest(), "kseq": list(self.ctx.kseq)}, sort_keys=True)]
        for n, play in enumerate(self.plays):
            rounds = [
                {"A": list(r.challenge[0]), "B": list(r.challenge[1]), "f": [list(p) for p in r.response]}
                for r in play
            ]
            lines.append(json.dumps({"index": n, "rounds": rounds, "slack": self.slack(n)}, sort_keys=True))
        return "\n".join(lines) + "\n"


def empty_approx(spec_or_ctx: Union[ProblemSpec, Context], kseq: Optional[Sequence[int]] = None) -> Approximation:
    ctx = spec_or_ctx if isinstance(spec_or_ctx, Context) else Context(spec_or_ctx, kseq)
    return Approximation(ctx, tuple(() for _ in range(ctx.N)))


@dataclass(frozen=True)
class SlackWitness:
    sigma: Optional[int]
    c: int
    n0: int
    window: tuple[int, ...]

    def holds(self, s: Approximation) -> bool:
        return self.sigma is not None and all(s.slack(n) >= self.sigma for n in self.window)


def slack_witness(s: Approximation, c: int = 0, n0: int = 0) -> SlackWitness:
    """Largest σ with slack >= σ on W(c, n0); σ is None on an empty window."""
    W = s.ctx.window(c, n0)
    sigma = min((s.slack(n) for n in W), default=None)
    return SlackWitness(sigma, c, n0, tuple(W))


def is_prefix(p: Sequence[Round], q: Sequence[Round]) -> bool:
    return len(p) <= len(q) and tuple(q[: len(p)]) == tuple(p)


def leq_AP(s: Approximation, t: Approximation, window: Window = (0, 0)) -> bool:
    if s.ctx.spec is not t.ctx.spec and s.ctx.spec.digest() != t.ctx.spec.digest():
        raise ApproxError("approximations of different problems")
    return all(is_prefix(s.plays[n], t.plays[n]) for n in s.ctx.window(*window))


# ---------------------------------------------------------------------------
# extending


ChallengeSets = Union[Iterable[int], Sequence[Iterable[int]], Mapping[int, Iterable[int]]]


def _per_index(w, N: int) -> list[Optional[tuple[int, ...]]]:
    if isinstance(w, Mapping):
        return [tuple(sorted(set(w[n]))) if n in w else None for n in range(N)]
    w = list(w)
    if all(isinstance(x, int) for x in w):
        return [tuple(sorted(set(w)))] * N
    if len(w) != N:
        raise ApproxError(f"{len(w)} challenge sets for a window of {N}")
    return [None if x is None else tuple(sorted(set(x))) for x in w]


def extend(s: Approximation, side: int, w: ChallengeSets, window: Optional[Window] = None, slack_floor: int = 1) -> Approximation:
    """Play one more round at every index with slack left.

    The antagonist challenges with ``w_n`` on ``side`` and the protagonist
    answers with the canonical winning strategy. Indices without slack, or
    with no challenge set, are left as they are. With ``window`` given,
    every index in it must have slack >= ``slack_floor`` beforehand.
    """
    if side not in (1, 2):
        raise ApproxError("side must be 1 or 2")
    ctx = s.ctx
    ws = _per_index(w, ctx.N)
    if window is not None:
        for n in ctx.window(*window):
            if s.slack(n) < slack_floor:
                raise ApproxError(f"index {n}: slack {s.slack(n)} below floor {slack_floor}")
    plays = list(s.plays)
    for n in range(ctx.N):
        wn = ws[n]
        k = ctx.kseq[n]
        if wn is None or s.rounds(n) >= k:
            continue
        if len(wn) > k:
            raise ApproxError(f"index {n}: challenge of size {len(wn)} exceeds budget {k}")
        M1, M2 = ctx.spec.pairs[n]
        M = M1 if side == 1 else M2
        if any(not 0 <= x < M.size for x in wn):
            raise ApproxError(f"index {n}: challenge {wn} outside the side-{side} universe")
        ch = (wn, ()) if side == 1 else ((), wn)
        f = s.last_map(n)
        solver = ctx.solver(n)
        g = solver.answer(solver.rounds - s.rounds(n), f, ch)
        if g is None:
            raise StrategyReplayError(f"index {n}: no winning answer to {ch} from {f}")
        if not preserves_atoms(M1, M2, ctx.vocab(n), g):
            raise StrategyReplayError(f"index {n}: strategy answered with an illegal map {g}")
        plays[n] = plays[n] + (Round(ch, g),)
    return Approximation(ctx, tuple(plays))


# ---------------------------------------------------------------------------
# merging a chain


@dataclass
class MergeResult:
    s: Approximation
    ell: list[int]
    eta: list[int]
    window: tuple[int, ...]
    large_sets: dict[int, list[int]]  # ℓ* -> window indices with ℓ_n >= ℓ*
    clause_b_fallback: list[int]  # indices where not even ℓ = 0 satisfied clause (b)


def _clauses_hold(chain, n, ell, eta_n) -> bool:
    L = len(chain)
    if ell > eta_n:
        return False
    for i in range(min(ell + 1, L - 1)):
        if not is_prefix(chain[i].plays[n], chain[i + 1].plays[n]):
            return False
    return all(chain[i].slack(n) >= eta_n for i in range(ell + 1))


def merge_chain(chain: Sequence[Approximation], sigma_target: int, window: Window = (0, 0)) -> MergeResult:
    """Upper bound of an increasing finite chain.

    At each index take ``η(n) = min(σ_target, min_ℓ slack_ℓ(n))`` and the
    largest ℓ < len(chain) with ℓ <= η(n), the plays of ``s_0..s_{ℓ+1}``
    increasing (terms past the end ignored) and every slack up to ℓ at least
    η(n); the merged play at n is that of ``s_ℓ``.
    """
    chain = list(chain)
    if not chain:
        raise ApproxError("empty chain")
    ctx = chain[0].ctx
    for a, b in zip(chain, chain[1:]):
        if not leq_AP(a, b, window):
            raise ApproxError(f"chain is not increasing on window {window}")
    L = len(chain)
    ell, eta, fallback = [], [], []
    plays = []
    for n in range(ctx.N):
        e = min([sigma_target] + [t.slack(n) for t in chain])
        e = max(e, 0)
        best = None
        for cand in range(min(L - 1, e), -1, -1):
            if _clauses_hold(chain, n, cand, e):
                best = cand
                break
        if best is None:
            best = 0
            fallback.append(n)
        ell.append(best)
        eta.append(e)
        plays.append(chain[best].plays[n])
    s = Approximation(ctx, tuple(plays))
    W = ctx.window(*window)
    large = {star: [n for n in W if ell[n] >= star] for star in range(L)}
    return MergeResult(s, ell, eta, tuple(W), large, fallback)


# ---------------------------------------------------------------------------
# pairs of sequences matched by the maps


@dataclass(frozen=True)
class TaggedPair:
    h1: tuple[int, ...]
    h2: tuple[int, ...]
    c: int
    n0: int
    window: tuple[int, ...]


def match_set(s: Approximation, h1: Sequence[int], h2: Sequence[int]) -> list[int]:
    out = []
    for n in range(s.ctx.N):
        f = s.f(n)
        if h1[n] in f and f[h1[n]] == h2[n]:
            out.append(n)
    return out


def best_window(ctx: Context, allowed: Iterable[int]) -> Optional[tuple[int, int, tuple[int, ...]]]:
    """Largest nonempty W(c, n0) inside ``allowed``; ties go to the smallest (c, n0)."""
    allowed = set(allowed)
    best = None
    for c in range(max(ctx.kseq, default=0) + 1):
        for n0 in range(ctx.N):
            W = ctx.window(c, n0)
            if W and set(W) <= allowed and (best is None or len(W) > len(best[2])):
                best = (c, n0, tuple(W))
    return best


def h_pairs(s: Approximation, candidates: Iterable[tuple[Sequence[int], Sequence[int]]]) -> list[TaggedPair]:
    out = []
    for h1, h2 in candidates:
        h1, h2 = tuple(h1), tuple(h2)
        if len(h1) != s.ctx.N or len(h2) != s.ctx.N:
            raise ApproxError("candidate sequences must cover the window")
        tag = best_window(s.ctx, match_set(s, h1, h2))
        if tag is not None:
            out.append(TaggedPair(h1, h2, *tag))
    return out


# ---------------------------------------------------------------------------
# elementarity checks


@dataclass
class ElementaryReport:
    checked: int = 0
    skipped_indices: list[int] = field(default_factory=list)
    violations: list[tuple] = field(default_factory=list)  # (n, formula text, tuple, kind)

    @property
    def clean(self) -> bool:
        return not self.violations


def _tuples(dom: list[int], width: int):
    import itertools

    return itertools.product(dom, repeat=width)


def check_partial_elementary(
    s: Approximation,
    formulas: Iterable[Formula],
    r: int,
    window: Optional[Window] = None,
    cache: Optional[dict] = None,
) -> ElementaryReport:
    """Check transfer along f_{s,n} for formulas of rank <= r.

    At every index (of the window, if given) with slack >= r, and for every
    tuple from dom(f_{s,n}): the relativized biconditional (dom(f) against
    range(f)) and the plain one must both hold. Formulas using symbols above
    level k_n are not checked at n. ``cache`` holds evaluation memos keyed by
    structure and relativizing set; pass the same dict to share them across calls.
    """
    formulas = list(formulas)
    for phi in formulas:
        if quantifier_rank(phi) > r:
            raise ApproxError(f"formula {phi} has rank above {r}")
    ctx = s.ctx
    idx = range(ctx.N) if window is None else ctx.window(*window)
    rep = ElementaryReport()
    for n in idx:
        if s.slack(n) < r:
            rep.skipped_indices.append(n)
            continue
        M1, M2 = ctx.spec.pairs[n]
        names_ok = set(ctx.vocab(n).names())
        f = s.f(n)
        dom = sorted(f)
        D1, D2 = set(f), set(f.values())
        memo = {} if cache is None else cache
        r1 = memo.setdefault((M1, frozenset(D1)), {})
        r2 = memo.setdefault((M2, frozenset(D2)), {})
        p1 = memo.setdefault((M1, None), {})
        p2 = memo.setdefault((M2, None), {})
        for phi in formulas:
            if not symbols(phi) <= names_ok:
                continue
            names = sorted(free_vars(phi))
            for tup in _tuples(dom, len(names)):
                v1 = dict(zip(names, tup))
                v2 = {x: f[a] for x, a in v1.items()}
                rep.checked += 1
                if evaluate(M1, phi, v1, D=D1, memo=r1) != evaluate(M2, phi, v2, D=D2, memo=r2):
                    rep.violations.append((n, to_text(phi), tup, "relativized"))
                if evaluate(M1, phi, v1, memo=p1) != evaluate(M2, phi, v2, memo=p2):
                    rep.violations.append((n, to_text(phi), tup, "elementary"))
    return rep


# ---------------------------------------------------------------------------
# assembling a correspondence


class SlackShortfall(ApproxError):
    def __init__(self, index: Optional[int], have: int, need: int):
        self.index, self.have, self.need = index, have, need
        where = "every index" if index is None else f"index {index}"
        super().__init__(f"slack budget insufficient at {where}: k={have}, need {need} rounds")


@dataclass
class TableRow:
    side: int
    entry: int
    source: tuple[int, ...]  # side-1 values on the window
    target: tuple[int, ...]  # side-2 values on the window


@dataclass
class Assembly:
    s: Approximation
    window: tuple[int, ...]
    c: int
    n0: int
    steps: list[tuple[int, int]]  # (side, entry) in the order applied
    rows: list[TableRow]

    @property
    def injective(self) -> bool:
        fwd, back = {}, {}
        for row in self.rows:
            if fwd.setdefault(row.source, row.target) != row.target:
                return False
            if back.setdefault(row.target, row.source) != row.source:
                return False
        return True

    def covers(self, E1, E2) -> bool:
        W = self.window
        sources = {row.source for row in self.rows}
        targets = {row.target for row in self.rows}
        return all(tuple(h[n] for n in W) in sources for h in E1) and all(
            tuple(h[n] for n in W) in targets for h in E2
        )

    def records(self) -> str:
        head = {
            "assemble": self.s.ctx.spec.digest(),
            "kseq": list(self.s.ctx.kseq),
            "window": {"c": self.c, "n0": self.n0, "indices": list(self.window)},
            "steps": [list(x) for x in self.steps],
        }
        lines = [json.dumps(head, sort_keys=True)]
        for row in self.rows:
            lines.append(
                json.dumps(
                    {"side": row.side, "entry": row.entry, "h1": list(row.source), "h2": list(row.target)},
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + "\n"


def assemble(
    spec_or_ctx: Union[ProblemSpec, Context],
    kseq: Optional[Sequence[int]],
    E1: Sequence[Sequence[int]],
    E2: Sequence[Sequence[int]],
    window: Optional[Window] = None,
) -> Assembly:
    """Alternate side-1 and side-2 extensions down the two enumerations.

    Step 2j+1 puts ``E1[j](n)`` into every domain, step 2j+2 puts ``E2[j](n)``
    into every range. The window defaults to the indices whose k is at least
    the number of steps.
    """
    ctx = spec_or_ctx if isinstance(spec_or_ctx, Context) else Context(spec_or_ctx, kseq)
    E1 = [tuple(h) for h in E1]
    E2 = [tuple(h) for h in E2]
    for side, E in ((1, E1), (2, E2)):
        for h in E:
            if len(h) != ctx.N:
                raise ApproxError(f"side-{side} sequence {h} does not cover the window")
            for n, x in enumerate(h):
                if not 0 <= x < ctx.spec.side(side, n).size:
                    raise ApproxError(f"side-{side} sequence {h}: value {x} outside universe at index {n}")
    need = len(E1) + len(E2)
    if window is None:
        c, n0 = max(need - 1, 0), 0
    else:
        c, n0 = window
    W = ctx.window(c, n0)
    if not W:
        top = max(range(ctx.N), key=lambda n: (ctx.kseq[n], -n))
        raise SlackShortfall(top, ctx.kseq[top], need)
    for n in W:
        if ctx.kseq[n] < need:
            raise SlackShortfall(n, ctx.kseq[n], need)

    steps = []
    for j in range(max(len(E1), len(E2))):
        if j < len(E1):
            steps.append((1, j))
        if j < len(E2):
            steps.append((2, j))
    s = empty_approx(ctx)
    for side, j in steps:
        h = E1[j] if side == 1 else E2[j]
        s = extend(s, side, [[h[n]] for n in range(ctx.N)], window=(c, n0))

    rows = []
    for j, h in enumerate(E1):
        rows.append(TableRow(1, j, tuple(h[n] for n in W), tuple(s.f(n)[h[n]] for n in W)))
    for j, h in enumerate(E2):
        inv = [{y: x for x, y in s.f(n).items()} for n in range(ctx.N)]
        rows.append(TableRow(2, j, tuple(inv[n][h[n]] for n in W), tuple(h[n] for n in W)))
    return Assembly(s, tuple(W), c, n0, steps, rows)
