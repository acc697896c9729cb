"""Vocabularies, vocabulary chains, finite structures and truncated problems.

Universes are always ``{0, ..., size-1}``. A structure interprets every
symbol of the top level of its chain; reducts drop symbols but keep the
universe.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from efk.filterlab import TailClass

REL = "rel"
FUN = "fun"
CONST = "const"
KINDS = (REL, FUN, CONST)


@dataclass(frozen=True, order=True)
class Symbol:
    name: str
    kind: str = REL
    arity: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        if self.kind == CONST and self.arity != 0:
            raise ValueError(f"constant {self.name} must have arity 0")
        if self.kind != CONST and self.arity < 1:
            raise ValueError(f"{self.kind} {self.name} needs arity >= 1")

    def __str__(self):
        return f"{self.name}/{self.arity}:{self.kind}"


class Vocabulary:
    """A finite set of symbols with unique names."""

    __slots__ = ("_by_name",)

    def __init__(self, symbols: Iterable[Symbol] = ()):
        by_name: dict[str, Symbol] = {}
        for s in symbols:
            old = by_name.get(s.name)
            if old is not None and old != s:
                raise ValueError(f"symbol {s.name} declared twice with different signatures")
            by_name[s.name] = s
        self._by_name = dict(sorted(by_name.items()))

    @classmethod
    def of(cls, *specs: str) -> "Vocabulary":
        """Build from short specs like ``"</2"``, ``"f/1:fun"``, ``"c:const"``."""
        return cls(parse_symbol(s) for s in specs)

    def __iter__(self):
        return iter(self._by_name.values())

    def __len__(self):
        return len(self._by_name)

    def __contains__(self, name):
        if isinstance(name, Symbol):
            return self._by_name.get(name.name) == name
        return name in self._by_name

    def __getitem__(self, name: str) -> Symbol:
        return self._by_name[name]

    def get(self, name: str) -> Optional[Symbol]:
        return self._by_name.get(name)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self._by_name == other._by_name

    def __hash__(self):
        return hash(frozenset(self._by_name.values()))

    def __le__(self, other: "Vocabulary"):
        return all(s in other for s in self)

    def names(self) -> list[str]:
        return list(self._by_name)

    def of_kind(self, kind: str) -> list[Symbol]:
        return [s for s in self if s.kind == kind]

    def __repr__(self):
        return "Vocabulary{" + ", ".join(map(str, self)) + "}"


def parse_symbol(text: str) -> Symbol:
    """Parse ``name/arity[:rel|:fun|:const]`` (also ``name:const``)."""
    text = text.strip()
    kind = None
    if ":" in text:
        text, kind = text.rsplit(":", 1)
        if kind not in KINDS:
            raise ValueError(f"unknown symbol kind {kind!r}")
    if "/" in text:
        name, ar = text.split("/", 1)
        try:
            arity = int(ar)
        except ValueError:
            raise ValueError(f"bad arity in symbol {text!r}") from None
    else:
        name, arity = text, 0
    if not name:
        raise ValueError("empty symbol name")
    if kind is None:
        kind = CONST if arity == 0 else REL
    return Symbol(name, kind, arity)


@dataclass(frozen=True)
class VocabularyChain:
    """Increasing vocabularies; levels past the last one repeat the top level."""

    levels: tuple[Vocabulary, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ValueError("a vocabulary chain needs at least level 0")

    @classmethod
    def constant(cls, vocab: Vocabulary) -> "VocabularyChain":
        """The chain <empty, vocab> (every positive level is ``vocab``)."""
        return cls((Vocabulary(), vocab))

    @property
    def top(self) -> Vocabulary:
        return self.levels[-1]

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    def level(self, j: int) -> Vocabulary:
        if j < 0:
            raise ValueError(f"negative vocabulary level {j}")
        return self.levels[min(j, self.height)]

    def violations(self) -> list[str]:
        out = []
        if len(self.levels[0]):
            out.append("chain level 0: τ_0 nonempty")
        for j in range(self.height):
            lo, hi = self.levels[j], self.levels[j + 1]
            for s in lo:
                if s not in hi:
                    other = hi.get(s.name)
                    why = "missing" if other is None else f"redeclared as {other}"
                    out.append(f"chain level {j + 1}: symbol {s.name} {why} (levels must be increasing)")
        return out


class FiniteStructure:
    """A finite structure over the universe ``range(size)``.

    ``functions`` maps a name to a dict from argument tuples to values;
    ``constants`` maps a name to an element.
    """

    __slots__ = ("size", "relations", "functions", "constants", "_key")

    def __init__(
        self,
        size: int,
        relations: Optional[Mapping[str, Iterable[Sequence[int]]]] = None,
        functions: Optional[Mapping[str, Mapping[Sequence[int], int]]] = None,
        constants: Optional[Mapping[str, int]] = None,
    ):
        self.size = size
        self.relations = {
            name: frozenset(tuple(t) for t in tuples)
            for name, tuples in sorted((relations or {}).items())
        }
        self.functions = {
            name: {tuple(k): v for k, v in sorted(table.items())}
            for name, table in sorted((functions or {}).items())
        }
        self.constants = dict(sorted((constants or {}).items()))
        self._key = None

    @property
    def universe(self) -> range:
        return range(self.size)

    def interprets(self, sym: Symbol) -> bool:
        if sym.kind == REL:
            return sym.name in self.relations
        if sym.kind == FUN:
            return sym.name in self.functions
        return sym.name in self.constants

    def symbol_names(self) -> set[str]:
        return set(self.relations) | set(self.functions) | set(self.constants)

    def key(self) -> tuple:
        """Canonical hashable encoding."""
        if self._key is None:
            self._key = (
                self.size,
                tuple((n, tuple(sorted(r))) for n, r in self.relations.items()),
                tuple((n, tuple(t.items())) for n, t in self.functions.items()),
                tuple(self.constants.items()),
            )
        return self._key

    def __eq__(self, other):
        return isinstance(other, FiniteStructure) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        parts = [f"size={self.size}"]
        for n, r in self.relations.items():
            parts.append(f"{n}={sorted(r)}")
        for n, t in self.functions.items():
            parts.append(f"{n}={dict(t)}")
        for n, c in self.constants.items():
            parts.append(f"{n}={c}")
        return "FiniteStructure(" + ", ".join(parts) + ")"

    def violations(self, vocab: Vocabulary, where: str = "") -> list[str]:
        """Check interpretations against ``vocab``; returns human-readable problems."""
        pre = f"{where}: " if where else ""
        out = []
        if self.size < 1:
            out.append(f"{pre}size {self.size} < 1 (structures must be nonempty)")
            return out
        n = self.size
        for sym in vocab:
            if not self.interprets(sym):
                out.append(f"{pre}symbol {sym.name} not interpreted")
        for name, tuples in self.relations.items():
            sym = vocab.get(name)
            if sym is None or sym.kind != REL:
                out.append(f"{pre}relation {name} not in vocabulary")
                continue
            for t in sorted(tuples):
                if len(t) != sym.arity:
                    out.append(f"{pre}relation {name}: tuple {t} has wrong arity")
                elif any(not 0 <= x < n for x in t):
                    out.append(f"{pre}relation {name}: tuple {t} out of universe")
        for name, table in self.functions.items():
            sym = vocab.get(name)
            if sym is None or sym.kind != FUN:
                out.append(f"{pre}function {name} not in vocabulary")
                continue
            for args in itertools.product(range(n), repeat=sym.arity):
                if args not in table:
                    out.append(f"{pre}function {name}: table missing {args}")
                    break
            for args, val in table.items():
                if len(args) != sym.arity or any(not 0 <= x < n for x in args):
                    out.append(f"{pre}function {name}: argument {args} out of universe")
                if not 0 <= val < n:
                    out.append(f"{pre}function {name}: value {val} out of universe")
        for name, val in self.constants.items():
            sym = vocab.get(name)
            if sym is None or sym.kind != CONST:
                out.append(f"{pre}constant {name} not in vocabulary")
            elif not 0 <= val < n:
                out.append(f"{pre}constant {name}: element {val} out of universe")
        return out


def reduct(M: FiniteStructure, level: int, chain: VocabularyChain) -> FiniteStructure:
    """Restrict ``M`` to the symbols of ``chain.level(level)``."""
    if not 0 <= level <= chain.height:
        raise ValueError(f"level {level} out of range 0..{chain.height}")
    return restrict(M, chain.levels[level])


def restrict(M: FiniteStructure, vocab: Vocabulary) -> FiniteStructure:
    keep = set(vocab.names())
    return FiniteStructure(
        M.size,
        {n: r for n, r in M.relations.items() if n in keep},
        {n: t for n, t in M.functions.items() if n in keep},
        {n: c for n, c in M.constants.items() if n in keep},
    )


@dataclass(frozen=True)
class ProblemSpec:
    """A window ``[0, N)`` of structure pairs plus a declared tail for k_{m,n}."""

    chain: VocabularyChain
    pairs: tuple[tuple[FiniteStructure, FiniteStructure], ...]
    kseq_tail: Optional[TailClass] = None
    size_bound: Optional[tuple[int, ...]] = None
    window_len: int = field(default=-1)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        if self.size_bound is not None:
            object.__setattr__(self, "size_bound", tuple(self.size_bound))
        if self.window_len == -1:
            object.__setattr__(self, "window_len", len(self.pairs))

    @property
    def N(self) -> int:
        return self.window_len

    def side(self, ell: int, n: int) -> FiniteStructure:
        return self.pairs[n][ell - 1]

    def digest(self) -> str:
        h = hashlib.sha256()
        for lvl in self.chain.levels:
            h.update(repr(sorted(map(str, lvl))).encode())
        for a, b in self.pairs:
            h.update(repr((a.key(), b.key())).encode())
        h.update(repr(self.kseq_tail).encode())
        h.update(repr(self.size_bound).encode())
        return h.hexdigest()[:16]


@dataclass
class ValidationReport:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_problem(spec: ProblemSpec) -> ValidationReport:
    out = list(spec.chain.violations())
    if spec.window_len < 1:
        out.append(f"window length {spec.window_len} < 1")
    if len(spec.pairs) != spec.window_len:
        out.append(f"window length {spec.window_len} but {len(spec.pairs)} pairs given")
    top = spec.chain.top
    for n, pair in enumerate(spec.pairs):
        for ell, M in enumerate(pair, start=1):
            out.extend(M.violations(top, where=f"index {n} side {ell}"))
    if spec.size_bound is not None:
        if len(spec.size_bound) < len(spec.pairs):
            out.append(f"size bound covers {len(spec.size_bound)} indices, window has {len(spec.pairs)}")
        for n, pair in enumerate(spec.pairs[: len(spec.size_bound)]):
            f = spec.size_bound[n]
            if f < 2:
                out.append(f"index {n}: size bound {f} < 2")
            for ell, M in enumerate(pair, start=1):
                if M.size > f:
                    out.append(f"index {n} side {ell}: size {M.size} exceeds bound {f}")
    return ValidationReport(out)


def kappa(spec: ProblemSpec) -> int:
    """Largest universe size over the window."""
    return max((M.size for pair in spec.pairs for M in pair), default=0)


# -- small constructors used throughout the tests and the CLI -----------------

LESS = Symbol("<", REL, 2)


def linear_order(n: int, name: str = "<") -> FiniteStructure:
    return FiniteStructure(n, {name: [(i, j) for i in range(n) for j in range(n) if i < j]})


def pure_set(n: int) -> FiniteStructure:
    return FiniteStructure(n)


def is_isomorphic(M1: FiniteStructure, M2: FiniteStructure, vocab: Vocabulary) -> bool:
    """Brute-force isomorphism test over ``vocab`` (tiny structures only)."""
    return find_isomorphism(M1, M2, vocab) is not None


def find_isomorphism(M1: FiniteStructure, M2: FiniteStructure, vocab: Vocabulary):
    if M1.size != M2.size:
        return None
    for perm in itertools.permutations(range(M2.size)):
        if _is_iso(M1, M2, vocab, perm):
            return dict(enumerate(perm))
    return None


def _is_iso(M1, M2, vocab, perm) -> bool:
    for sym in vocab:
        if sym.kind == REL:
            img = {tuple(perm[x] for x in t) for t in M1.relations[sym.name]}
            if img != M2.relations[sym.name]:
                return False
        elif sym.kind == FUN:
            t1, t2 = M1.functions[sym.name], M2.functions[sym.name]
            for args, v in t1.items():
                if t2[tuple(perm[x] for x in args)] != perm[v]:
                    return False
        else:
            if perm[M1.constants[sym.name]] != M2.constants[sym.name]:
                return False
    return True
