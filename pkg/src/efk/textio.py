"""Line-oriented text formats for problems, k-sequences, function families
and sequence lists. Parsing is strict: unknown headers, malformed lines and
out-of-range values raise ``InputError`` naming the line."""

from __future__ import annotations

import re
from typing import Optional

from efk.filterlab import KSeqSpec, TailClass, parse_tail
from efk.slalom import Family
from efk.structures import (
    CONST,
    FUN,
    REL,
    FiniteStructure,
    ProblemSpec,
    Vocabulary,
    VocabularyChain,
    parse_symbol,
)


class InputError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None):
        self.line = line
        super().__init__(msg if line is None else f"line {line}: {msg}")


def _fields(text: str, lineno: int, allowed: set[str]) -> dict[str, str]:
    out = {}
    for part in text.split():
        if "=" not in part:
            raise InputError(f"expected key=value, found {part!r}", lineno)
        key, val = part.split("=", 1)
        if key not in allowed:
            raise InputError(f"unknown field {key!r}", lineno)
        if key in out:
            raise InputError(f"field {key!r} given twice", lineno)
        out[key] = val
    return out


def _int(val: str, what: str, lineno: int, minimum: int = 0) -> int:
    try:
        x = int(val)
    except ValueError:
        raise InputError(f"{what} must be an integer, found {val!r}", lineno) from None
    if x < minimum:
        raise InputError(f"{what} must be >= {minimum}, found {x}", lineno)
    return x


def _ints(text: str, lineno: int) -> list[int]:
    return [_int(x, "element", lineno) for x in text.split()]


# ---------------------------------------------------------------------------
# problems


def parse_problem(text: str) -> ProblemSpec:
    """Parse a problem file.

    ``#vocab`` lines list the symbols added at a level; level j holds every
    symbol declared at a level <= j. Level 0 is empty unless declared.
    """
    N = None
    tail: Optional[TailClass] = None
    declared: dict[int, list] = {}
    structures: dict[tuple[int, int], list] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            head, _, rest = line[1:].partition(" ")
            if head == "problem":
                if N is not None:
                    raise InputError("second #problem header", lineno)
                f = _fields(rest, lineno, {"N", "tail"})
                if "N" not in f:
                    raise InputError("#problem needs N=", lineno)
                N = _int(f["N"], "N", lineno, 1)
                if "tail" in f:
                    try:
                        tail = parse_tail(f["tail"])
                    except ValueError as exc:
                        raise InputError(str(exc), lineno) from None
            elif head == "vocab":
                parts = rest.split()
                if not parts or not parts[0].startswith("level="):
                    raise InputError("#vocab needs level=<j> first", lineno)
                j = _int(parts[0][len("level="):], "level", lineno)
                try:
                    syms = [parse_symbol(p) for p in parts[1:]]
                except ValueError as exc:
                    raise InputError(str(exc), lineno) from None
                declared.setdefault(j, []).extend(syms)
            elif head == "structure":
                f = _fields(rest, lineno, {"side", "index", "size"})
                missing = {"side", "index", "size"} - set(f)
                if missing:
                    raise InputError(f"#structure missing {sorted(missing)}", lineno)
                side = _int(f["side"], "side", lineno, 1)
                if side > 2:
                    raise InputError(f"side must be 1 or 2, found {side}", lineno)
                index = _int(f["index"], "index", lineno)
                size = _int(f["size"], "size", lineno, 1)
                if (side, index) in structures:
                    raise InputError(f"structure side={side} index={index} given twice", lineno)
                current = [size, {}, {}, lineno]
                structures[(side, index)] = current
            else:
                raise InputError(f"unknown header #{head}", lineno)
            continue
        if current is None:
            raise InputError("interpretation line before any #structure header", lineno)
        _interpretation(line, lineno, current)

    if N is None:
        raise InputError("missing #problem header")
    chain = _chain(declared)
    vocab = chain.top
    pairs = []
    for n in range(N):
        pair = []
        for side in (1, 2):
            if (side, n) not in structures:
                raise InputError(f"missing structure side={side} index={n}")
            size, funs, plain, lineno = structures[(side, n)]
            pair.append(_build(size, funs, plain, vocab, lineno))
        pairs.append(tuple(pair))
    extra = sorted(k for k in structures if k[1] >= N)
    if extra:
        raise InputError(f"structure index {extra[0][1]} outside the window [0, {N})")
    return ProblemSpec(chain, tuple(pairs), kseq_tail=tail)


def _chain(declared: dict[int, list]) -> VocabularyChain:
    if not declared:
        return VocabularyChain((Vocabulary(),))
    top = max(declared)
    levels, acc = [], {}
    for j in range(top + 1):
        for sym in declared.get(j, []):
            old = acc.get(sym.name)
            if old is not None and old != sym:
                raise InputError(f"symbol {sym.name} redeclared with a different signature")
            acc[sym.name] = sym
        levels.append(Vocabulary(acc.values()))
    return VocabularyChain(tuple(levels))


def _interpretation(line: str, lineno: int, current: list) -> None:
    name, sep, body = line.partition(":")
    name = name.strip()
    if not sep or not name:
        raise InputError(f"expected '<symbol>: ...', found {line!r}", lineno)
    size, funs, plain, _ = current
    if name in funs or name in plain:
        raise InputError(f"symbol {name} interpreted twice", lineno)
    body = body.strip()
    if "->" in body:
        table = {}
        for entry in body.split(";"):
            if not entry.strip():
                continue
            args, _, val = entry.partition("->")
            key = tuple(_ints(args, lineno))
            if key in table:
                raise InputError(f"{name}: argument {key} given twice", lineno)
            table[key] = _int(val.strip(), "function value", lineno)
        funs[name] = table
    else:
        plain[name] = (body, lineno)


def _build(size, funs, plain, vocab: Vocabulary, lineno: int) -> FiniteStructure:
    """Resolve relation and constant lines against the vocabulary."""
    rels, consts = {}, {}
    for name, (body, at) in plain.items():
        sym = vocab.get(name)
        if sym is None:
            raise InputError(f"symbol {name} not in the vocabulary", at)
        if sym.kind == CONST:
            vals = _ints(body, at)
            if len(vals) != 1:
                raise InputError(f"constant {name} needs exactly one element", at)
            consts[name] = vals[0]
        elif sym.kind == REL:
            rels[name] = [tuple(_ints(t, at)) for t in body.split(";") if t.strip()]
        else:
            raise InputError(f"function {name} needs 'args -> value' entries", at)
    for name in funs:
        sym = vocab.get(name)
        if sym is None or sym.kind != FUN:
            raise InputError(f"{name} is not a function symbol of the vocabulary", lineno)
    for sym in vocab:
        if sym.kind == REL and sym.name not in rels:
            rels[sym.name] = []
    M = FiniteStructure(size, rels, funs, consts)
    bad = M.violations(vocab)
    if bad:
        raise InputError(bad[0], lineno)
    return M


def format_structure(M: FiniteStructure, side: int, index: int) -> str:
    lines = [f"#structure side={side} index={index} size={M.size}"]
    for name, tuples in M.relations.items():
        body = "; ".join(" ".join(map(str, t)) for t in sorted(tuples))
        lines.append(f"{name}: {body}".rstrip())
    for name, table in M.functions.items():
        body = "; ".join(f"{' '.join(map(str, a))} -> {v}".lstrip() for a, v in table.items())
        lines.append(f"{name}: {body}")
    for name, c in M.constants.items():
        lines.append(f"{name}: {c}")
    return "\n".join(lines)


def _symbol_text(sym) -> str:
    if sym.kind == CONST:
        return f"{sym.name}:const"
    return f"{sym.name}/{sym.arity}" + (":fun" if sym.kind == FUN else "")


def format_problem(spec: ProblemSpec) -> str:
    head = f"#problem N={spec.N}"
    if spec.kseq_tail is not None:
        head += f" tail={spec.kseq_tail}"
    lines = [head]
    prev: set = set()
    for j, lvl in enumerate(spec.chain.levels):
        new = sorted((s for s in lvl if s.name not in prev), key=lambda s: s.name)
        if new or j == 0:
            lines.append(f"#vocab level={j} " + " ".join(_symbol_text(s) for s in new))
        prev |= set(lvl.names())
    for n, (M1, M2) in enumerate(spec.pairs):
        lines.append(format_structure(M1, 1, n))
        lines.append(format_structure(M2, 2, n))
    return "\n".join(line.rstrip() for line in lines) + "\n"


# ---------------------------------------------------------------------------
# k-sequences


def parse_kseq(text: str) -> KSeqSpec:
    """``prefix: k0 k1 ...`` and ``tail: <tailclass>`` lines."""
    prefix = tail = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        key, sep, body = line.partition(":")
        key = key.strip()
        if not sep or key not in ("prefix", "tail"):
            raise InputError(f"expected 'prefix:' or 'tail:', found {line!r}", lineno)
        if key == "prefix":
            if prefix is not None:
                raise InputError("prefix given twice", lineno)
            prefix = _ints(body, lineno)
        else:
            if tail is not None:
                raise InputError("tail given twice", lineno)
            try:
                tail = parse_tail(body.strip())
            except ValueError as exc:
                raise InputError(str(exc), lineno) from None
    if prefix is None or tail is None:
        raise InputError("k-sequence file needs both prefix: and tail:")
    try:
        return KSeqSpec(tuple(prefix), tail)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def format_kseq(kspec: KSeqSpec) -> str:
    return f"prefix: {' '.join(map(str, kspec.prefix))}\ntail: {kspec.tail}\n"


# ---------------------------------------------------------------------------
# function families


_FAMILY = re.compile(r"^#family\s+(.*)$")


def parse_family(text: str) -> tuple[Family, Optional[tuple[int, ...]]]:
    """A ``#family N= V=`` header, one function per line, optional ``#g`` capacities."""
    N = V = None
    rows = []
    g = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        m = _FAMILY.match(line)
        if m:
            if N is not None:
                raise InputError("second #family header", lineno)
            f = _fields(m.group(1), lineno, {"N", "V"})
            if set(f) != {"N", "V"}:
                raise InputError("#family needs N= and V=", lineno)
            N = _int(f["N"], "N", lineno, 1)
            V = _int(f["V"], "V", lineno, 1)
            continue
        if line.startswith("#g"):
            if g is not None:
                raise InputError("second #g line", lineno)
            g = tuple(_ints(line[2:], lineno))
            continue
        if line.startswith("#"):
            raise InputError(f"unknown header {line.split()[0]}", lineno)
        if N is None:
            raise InputError("function row before #family header", lineno)
        row = tuple(_ints(line, lineno))
        if len(row) != N:
            raise InputError(f"row has {len(row)} values, expected N={N}", lineno)
        if any(x >= V for x in row):
            raise InputError(f"row value outside [0, {V})", lineno)
        rows.append(row)
    if N is None:
        raise InputError("missing #family header")
    if g is not None and len(g) != N:
        raise InputError(f"#g has {len(g)} capacities, expected N={N}")
    return Family(N, V, tuple(rows)), g


def format_family(fam: Family, g=None) -> str:
    lines = [f"#family N={fam.N} V={fam.V}"]
    lines.extend(" ".join(map(str, eta)) for eta in fam)
    if g is not None:
        lines.append("#g " + " ".join(map(str, g)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# sequence lists


def parse_sequences(text: str, N: Optional[int] = None) -> list[tuple[int, ...]]:
    """One window sequence per line (space-separated elements)."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        row = tuple(_ints(line, lineno))
        if N is not None and len(row) != N:
            raise InputError(f"sequence has {len(row)} entries, expected {N}", lineno)
        out.append(row)
    return out
