"""The filter D_k on ω, decided exactly over eventually-periodic sets.

D_k is generated by the co-bounded sets and the tails ``{n : k_n > c}``. A set
S belongs to D_k iff ``{n : k_n > c} \\ S`` is finite for some c. Every set
here is eventually periodic and every k-sequence is an explicit prefix plus a
periodic pattern of affine terms, so that condition can be checked exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

PROPER = "proper-nonprincipal"
IMPROPER = "improper"


# ---------------------------------------------------------------------------
# k-sequences


@dataclass(frozen=True)
class TailClass:
    """Declared behaviour of k_n from ``start`` on.

    ``terms`` is a cyclic pattern of affine terms ``(a, b)``; index n uses
    term ``n % len(terms)`` and has value ``a*n + b``. ``kind`` records which
    constructor built it. For ``bounded`` the declaration only promises
    ``k_n <= b``; where exact values are needed the constant ``b`` is used.
    ``start=None`` means the tail begins right after the window.
    """

    kind: str
    terms: tuple[tuple[int, int], ...]
    start: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((int(a), int(b)) for a, b in self.terms))
        if self.kind not in ("bounded", "affine", "periodic"):
            raise ValueError(f"unknown tail kind {self.kind!r}")
        if not self.terms:
            raise ValueError("tail needs at least one term")
        if self.kind == "bounded" and (len(self.terms) != 1 or self.terms[0][0] != 0):
            raise ValueError("bounded tail is a single constant")
        if self.kind == "affine" and (len(self.terms) != 1 or self.terms[0][0] < 1):
            raise ValueError("affine tail needs slope a >= 1")
        for a, b in self.terms:
            if a < 0:
                raise ValueError(f"negative slope {a} in tail")
            if a == 0 and b < 0:
                raise ValueError(f"negative constant {b} in tail")
        if self.start is not None and self.start < 0:
            raise ValueError("tail start must be >= 0")

    @classmethod
    def bounded(cls, b: int, start: Optional[int] = None) -> "TailClass":
        return cls("bounded", ((0, b),), start)

    @classmethod
    def affine(cls, a: int, b: int = 0, start: Optional[int] = None) -> "TailClass":
        return cls("affine", ((a, b),), start)

    @classmethod
    def periodic(cls, terms: Iterable[tuple[int, int]], start: Optional[int] = None) -> "TailClass":
        return cls("periodic", tuple(terms), start)

    @property
    def period(self) -> int:
        return len(self.terms)

    def value(self, n: int) -> int:
        a, b = self.terms[n % self.period]
        return a * n + b

    def unbounded(self) -> bool:
        return any(a >= 1 for a, _ in self.terms)

    def consistent_with(self, n: int, k: int) -> bool:
        if self.kind == "bounded":
            return k <= self.terms[0][1]
        return k == self.value(n)

    def __str__(self):
        if self.kind == "bounded":
            body = f"bounded({self.terms[0][1]})"
        elif self.kind == "affine":
            body = "affine({},{})".format(*self.terms[0])
        else:
            body = "periodic(" + ",".join(f"{a}:{b}" for a, b in self.terms) + ")"
        return body if self.start is None else f"{body}@{self.start}"


_TAIL_RE = re.compile(r"^\s*(bounded|affine|periodic)\((.*)\)\s*(?:@\s*(\d+))?\s*$")


def parse_tail(text: str) -> TailClass:
    """Parse ``bounded(b)``, ``affine(a,b)`` or ``periodic(a0:b0,a1:b1,...)``, optional ``@start``."""
    m = _TAIL_RE.match(text)
    if not m:
        raise ValueError(f"bad tail class {text!r}")
    kind, body, start = m.group(1), m.group(2), m.group(3)
    start = int(start) if start is not None else None
    try:
        if kind == "bounded":
            return TailClass.bounded(int(body), start)
        if kind == "affine":
            a, b = (int(x) for x in body.split(","))
            return TailClass.affine(a, b, start)
        terms = []
        for part in body.split(","):
            a, b = part.split(":")
            terms.append((int(a), int(b)))
        return TailClass.periodic(terms, start)
    except ValueError as exc:
        raise ValueError(f"bad tail class {text!r}: {exc}") from None


@dataclass(frozen=True)
class KSeqSpec:
    """Explicit values on ``[0, N)`` followed by a tail rule."""

    prefix: tuple[int, ...]
    tail: TailClass

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(x) for x in self.prefix))
        if any(x < 0 for x in self.prefix):
            raise ValueError("k-sequence values must be >= 0")
        if self.tail.start is not None and self.tail.start > len(self.prefix):
            raise ValueError(f"tail starts at {self.tail.start}, after the window end {len(self.prefix)}")
        for n in range(self.N, self.N + self.tail.period):
            if self.tail.value(n) < 0:
                raise ValueError(f"tail value at {n} is negative")

    @property
    def N(self) -> int:
        return len(self.prefix)

    def value(self, n: int) -> int:
        if n < 0:
            raise ValueError("negative index")
        return self.prefix[n] if n < self.N else self.tail.value(n)

    def values(self, stop: int) -> list[int]:
        return [self.value(n) for n in range(stop)]

    def saturation(self) -> int:
        """Past this c the tail pattern of ``{n : k_n > c}`` no longer changes."""
        return max((b for a, b in self.tail.terms if a == 0), default=0)


# ---------------------------------------------------------------------------
# eventually periodic sets


@dataclass(frozen=True, eq=False)
class SetExpr:
    """An eventually periodic subset of ω.

    ``bits[n]`` gives membership for ``n < len(bits)``; beyond that, n is a
    member iff ``phase[n % len(phase)]``.
    """

    bits: tuple[bool, ...]
    phase: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))
        object.__setattr__(self, "phase", tuple(bool(b) for b in self.phase))
        if not self.phase:
            raise ValueError("period must be >= 1")

    @property
    def threshold(self) -> int:
        return len(self.bits)

    @property
    def period(self) -> int:
        return len(self.phase)

    def __contains__(self, n: int) -> bool:
        if n < len(self.bits):
            return self.bits[n]
        return self.phase[n % len(self.phase)]

    def contains(self, n: int) -> bool:
        return n in self

    def normalized(self) -> "SetExpr":
        phase = self.phase
        p = len(phase)
        for d in range(1, p + 1):
            if p % d == 0 and all(phase[i] == phase[i % d] for i in range(p)):
                phase = phase[:d]
                break
        bits = list(self.bits)
        while bits and bits[-1] == phase[(len(bits) - 1) % len(phase)]:
            bits.pop()
        return SetExpr(tuple(bits), phase)

    def __eq__(self, other):
        if not isinstance(other, SetExpr):
            return NotImplemented
        a, b = self.normalized(), other.normalized()
        return a.bits == b.bits and a.phase == b.phase

    def __hash__(self):
        n = self.normalized()
        return hash((n.bits, n.phase))

    def _combine(self, other: "SetExpr", op) -> "SetExpr":
        T = max(self.threshold, other.threshold)
        p = math.lcm(self.period, other.period)
        bits = tuple(op(n in self, n in other) for n in range(T))
        phase = tuple(op((T + i) in self, (T + i) in other) for i in range(p))
        # phase is indexed by n % p, so rotate to absolute residues
        phase = tuple(phase[(i - T) % p] for i in range(p))
        return SetExpr(bits, phase).normalized()

    def __and__(self, other):
        return self._combine(other, lambda x, y: x and y)

    def __or__(self, other):
        return self._combine(other, lambda x, y: x or y)

    def __sub__(self, other):
        return self._combine(other, lambda x, y: x and not y)

    def __invert__(self):
        return SetExpr(tuple(not b for b in self.bits), tuple(not b for b in self.phase))

    def issubset(self, other: "SetExpr") -> bool:
        return (self - other).is_empty()

    def is_finite(self) -> bool:
        return not any(self.phase)

    def is_empty(self) -> bool:
        return self.is_finite() and not any(self.bits)

    def max_element(self) -> int:
        if not self.is_finite():
            raise ValueError("infinite set has no maximum")
        idx = [n for n, b in enumerate(self.bits) if b]
        return idx[-1] if idx else -1

    def members(self, stop: int) -> list[int]:
        return [n for n in range(stop) if n in self]

    def __repr__(self):
        n = self.normalized()
        head = "".join("1" if b else "0" for b in n.bits)
        tail = "".join("1" if b else "0" for b in n.phase)
        return f"SetExpr({head}|{tail})"

    # constructors

    @classmethod
    def empty(cls) -> "SetExpr":
        return cls((), (False,))

    @classmethod
    def full(cls) -> "SetExpr":
        return cls((), (True,))

    @classmethod
    def finite(cls, elems: Iterable[int]) -> "SetExpr":
        elems = set(elems)
        if any(e < 0 for e in elems):
            raise ValueError("negative element")
        top = max(elems, default=-1) + 1
        return cls(tuple(n in elems for n in range(top)), (False,))

    @classmethod
    def cofinite(cls, excluded: Iterable[int]) -> "SetExpr":
        return ~cls.finite(excluded)

    @classmethod
    def periodic(cls, phase: Union[str, Sequence[bool]]) -> "SetExpr":
        if isinstance(phase, str):
            if not phase or set(phase) - {"0", "1"}:
                raise ValueError(f"bad bitmask {phase!r}")
            phase = [c == "1" for c in phase]
        return cls((), tuple(phase))

    @classmethod
    def evens(cls) -> "SetExpr":
        return cls.periodic("10")

    @classmethod
    def odds(cls) -> "SetExpr":
        return cls.periodic("01")

    @classmethod
    def from_predicate(cls, pred, threshold: int, phase_pred=None, period: int = 1) -> "SetExpr":
        phase_pred = phase_pred or pred
        return cls(tuple(pred(n) for n in range(threshold)), tuple(phase_pred(i) for i in range(period)))


def generator(kspec: KSeqSpec, c: int) -> SetExpr:
    """The exact set ``{n : k_n > c}``."""
    if c < 0:
        raise ValueError("generator index must be >= 0")
    tail = kspec.tail
    p = tail.period
    thresholds = [kspec.N]
    phase = []
    for i, (a, b) in enumerate(tail.terms):
        if a == 0:
            phase.append(b > c)
        else:
            phase.append(True)
            thresholds.append((c - b) // a + 1)
    T = max(thresholds)
    bits = tuple(kspec.value(n) > c for n in range(T))
    return SetExpr(bits, tuple(phase[i % p] for i in range(p))).normalized()


def window_set(kspec: KSeqSpec, c: int, n0: int, stop: Optional[int] = None) -> list[int]:
    """The active window ``W(c, n0) = {n in [n0, stop) : k_n > c}`` (stop defaults to N)."""
    stop = kspec.N if stop is None else stop
    return [n for n in range(n0, stop) if kspec.value(n) > c]


def classify(kspec: Union[KSeqSpec, TailClass]) -> str:
    tail = kspec.tail if isinstance(kspec, KSeqSpec) else kspec
    return PROPER if tail.unbounded() else IMPROPER


# ---------------------------------------------------------------------------
# membership decisions


@dataclass(frozen=True)
class FilterDecision:
    """Outcome of ``in_filter``.

    Members carry a witness ``(c, n0)``: every ``n >= n0`` with ``k_n > c``
    lies in S. Non-members carry a residue class ``n ≡ residue (mod modulus),
    n >= start`` that misses S and along which k_n grows without bound, so no
    ``(c, n0)`` works.
    """

    member: bool
    c: Optional[int] = None
    n0: Optional[int] = None
    residue: Optional[int] = None
    modulus: Optional[int] = None
    start: Optional[int] = None

    def __bool__(self):
        return self.member

    def as_record(self) -> dict:
        if self.member:
            return {"in_filter": True, "witness": {"c": self.c, "n0": self.n0}}
        return {
            "in_filter": False,
            "counterexample": {"residue": self.residue, "modulus": self.modulus, "start": self.start},
        }


def in_filter(kspec: KSeqSpec, S: SetExpr) -> FilterDecision:
    c_sat = kspec.saturation()
    for c in range(c_sat + 1):
        missed = generator(kspec, c) - S
        if missed.is_finite():
            return FilterDecision(True, c=c, n0=missed.max_element() + 1)
    missed = generator(kspec, c_sat) - S
    # A multiple of the tail period keeps one affine term (slope >= 1) per class.
    P = math.lcm(missed.period, kspec.tail.period)
    T = max(missed.threshold, kspec.N)
    residue = next(r for r in range(P) if missed.phase[r % missed.period])
    return FilterDecision(False, residue=residue, modulus=P, start=T)


def forall_D(kspec: KSeqSpec, P: SetExpr) -> bool:
    """``∀_D n φ(n)`` where ``P = {n : φ(n)}``."""
    return in_filter(kspec, P).member


def check_certificate(kspec: KSeqSpec, S: SetExpr, d: FilterDecision) -> bool:
    """Re-check a decision by evaluating k_n and membership directly.

    The horizon is the window plus two full periods past every threshold. A
    non-member's residue class must follow a single tail term of slope >= 1.
    """
    P = math.lcm(kspec.tail.period, S.period)
    if d.member:
        horizon = max(kspec.N, d.n0, S.threshold) + 2 * P
        return all(n in S for n in range(d.n0, horizon) if kspec.value(n) > d.c)
    if d.modulus % kspec.tail.period:
        return False
    start = max(d.start, kspec.N, S.threshold)
    span = 2 * math.lcm(d.modulus, S.period)
    cls = [n for n in range(start, start + span) if n % d.modulus == d.residue]
    if len(cls) < 2 or kspec.tail.terms[d.residue % kspec.tail.period][0] < 1:
        return False
    if any(n in S for n in cls):
        return False
    ks = [kspec.value(n) for n in cls]
    return all(x < y for x, y in zip(ks, ks[1:]))


# ---------------------------------------------------------------------------
# problem classification


class TailInconsistency(ValueError):
    """The declared tail contradicts computed k-values inside the window."""

    def __init__(self, mismatches):
        self.mismatches = list(mismatches)
        detail = ", ".join(f"n={n}: computed {k}, declared {d}" for n, k, d in self.mismatches)
        super().__init__(f"tail declaration contradicts window values ({detail})")


def tail_mismatches(kvalues: Sequence[int], tail: TailClass) -> list[tuple[int, int, str]]:
    """Window indices at or after the tail's start where the rule disagrees."""
    N = len(kvalues)
    start = N if tail.start is None else tail.start
    out = []
    for n in range(start, N):
        if not tail.consistent_with(n, kvalues[n]):
            declared = f"<= {tail.terms[0][1]}" if tail.kind == "bounded" else str(tail.value(n))
            out.append((n, kvalues[n], declared))
    return out


def is_ultraproduct_problem(spec, kseq: Optional[Sequence[int]] = None) -> bool:
    """limsup k_{m,n} = ∞ per the declared tail, after checking it against the window."""
    if spec.kseq_tail is None:
        raise ValueError("problem declares no k-sequence tail")
    if kseq is None:
        from efk.efgame import compute_k_seq

        kseq = compute_k_seq(spec).values
    bad = tail_mismatches(list(kseq), spec.kseq_tail)
    if bad:
        raise TailInconsistency(bad)
    return spec.kseq_tail.unbounded()


def kspec_for(spec, kseq: Sequence[int]) -> KSeqSpec:
    if spec.kseq_tail is None:
        raise ValueError("problem declares no k-sequence tail")
    return KSeqSpec(tuple(kseq), spec.kseq_tail)


# ---------------------------------------------------------------------------
# textual set syntax


_TOKEN = re.compile(r"\s*(fin\{[^}]*\}|cofin\{[^}]*\}|gen\(\s*\d+\s*\)|period\(\s*\d+\s*,\s*[01]+\s*\)|evens|odds|all|empty|[~&|()])")


def parse_set(text: str, kspec: Optional[KSeqSpec] = None) -> SetExpr:
    """Parse the set syntax: ``fin{..}``, ``cofin{..}``, ``gen(c)``, ``evens``,
    ``odds``, ``period(p, bits)``, ``~S``, ``S & T``, ``S | T``, parentheses."""
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"bad set expression at offset {pos}: {text[pos:]!r}")
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    tokens.append(("", len(text)))
    i = 0

    def peek():
        return tokens[i][0]

    def take():
        nonlocal i
        tok = tokens[i]
        i += 1
        return tok

    def disj():
        left = conj()
        while peek() == "|":
            take()
            left = left | conj()
        return left

    def conj():
        left = neg()
        while peek() == "&":
            take()
            left = left & neg()
        return left

    def neg():
        if peek() == "~":
            take()
            return ~neg()
        return prim()

    def prim():
        tok, at = take()
        if tok == "(":
            inner = disj()
            if take()[0] != ")":
                raise ValueError(f"missing ')' for '(' at offset {at}")
            return inner
        if tok.startswith("fin{") or tok.startswith("cofin{"):
            body = tok[tok.index("{") + 1 : -1]
            elems = [int(x) for x in body.replace(",", " ").split()]
            return SetExpr.finite(elems) if tok.startswith("fin") else SetExpr.cofinite(elems)
        if tok.startswith("gen("):
            if kspec is None:
                raise ValueError("gen(c) needs a k-sequence")
            return generator(kspec, int(tok[4:-1]))
        if tok.startswith("period("):
            p, bits = (x.strip() for x in tok[7:-1].split(","))
            if len(bits) != int(p):
                raise ValueError(f"period({p}, {bits}): bitmask length differs from period")
            return SetExpr.periodic(bits)
        if tok == "evens":
            return SetExpr.evens()
        if tok == "odds":
            return SetExpr.odds()
        if tok == "all":
            return SetExpr.full()
        if tok == "empty":
            return SetExpr.empty()
        raise ValueError(f"unexpected {tok or 'end of input'!r} at offset {at}")

    result = disj()
    if peek() != "":
        raise ValueError(f"trailing input at offset {tokens[i][1]}")
    return result
