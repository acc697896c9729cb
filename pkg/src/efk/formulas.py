"""First-order formulas over relational, functional and constant symbols.

Atoms only take variables as arguments: ``x = y``, ``R(x̄)``, ``F(x̄) = y`` and
``c = y``. These are exactly the strictly atomic formulas a game map has to
preserve.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional, Union

from efk.structures import FiniteStructure

_SYMBOL_CHARS = set("<>=~+*-^%$@")


class Formula:
    __slots__ = ()

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Equal(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class RelAtom(Formula):
    rel: str
    args: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class FunAtom(Formula):
    """``fun(args) = out``."""

    fun: str
    args: tuple[str, ...]
    out: str

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class ConstAtom(Formula):
    """``const = var``."""

    const: str
    var: str


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


ATOMS = (Equal, RelAtom, FunAtom, ConstAtom)
Valuation = Mapping[str, int]


def is_strictly_atomic(phi: Formula) -> bool:
    return isinstance(phi, ATOMS)


@lru_cache(maxsize=None)
def quantifier_rank(phi: Formula) -> int:
    if isinstance(phi, ATOMS):
        return 0
    if isinstance(phi, Not):
        return quantifier_rank(phi.body)
    if isinstance(phi, (And, Or)):
        return max(quantifier_rank(phi.left), quantifier_rank(phi.right))
    return 1 + quantifier_rank(phi.body)


def atom_vars(phi: Formula) -> tuple[str, ...]:
    if isinstance(phi, Equal):
        return (phi.left, phi.right)
    if isinstance(phi, RelAtom):
        return phi.args
    if isinstance(phi, FunAtom):
        return phi.args + (phi.out,)
    return (phi.var,)


@lru_cache(maxsize=None)
def free_vars(phi: Formula) -> frozenset[str]:
    if isinstance(phi, ATOMS):
        return frozenset(atom_vars(phi))
    if isinstance(phi, Not):
        return free_vars(phi.body)
    if isinstance(phi, (And, Or)):
        return free_vars(phi.left) | free_vars(phi.right)
    return free_vars(phi.body) - {phi.var}


def variables(phi: Formula) -> set[str]:
    """All variable names, free or bound."""
    if isinstance(phi, ATOMS):
        return set(atom_vars(phi))
    if isinstance(phi, Not):
        return variables(phi.body)
    if isinstance(phi, (And, Or)):
        return variables(phi.left) | variables(phi.right)
    return {phi.var} | variables(phi.body)


def symbols(phi: Formula) -> set[str]:
    if isinstance(phi, Equal):
        return set()
    if isinstance(phi, RelAtom):
        return {phi.rel}
    if isinstance(phi, FunAtom):
        return {phi.fun}
    if isinstance(phi, ConstAtom):
        return {phi.const}
    if isinstance(phi, Not):
        return symbols(phi.body)
    if isinstance(phi, (And, Or)):
        return symbols(phi.left) | symbols(phi.right)
    return symbols(phi.body)


def is_sentence(phi: Formula) -> bool:
    return not free_vars(phi)


def conjunction(parts) -> Formula:
    parts = list(parts)
    if not parts:
        raise ValueError("empty conjunction")
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disjunction(parts) -> Formula:
    parts = list(parts)
    if not parts:
        raise ValueError("empty disjunction")
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


def exists_all(names, body: Formula) -> Formula:
    for v in reversed(list(names)):
        body = Exists(v, body)
    return body


def negate(phi: Formula) -> Formula:
    """Negation pushed to the atoms."""
    if isinstance(phi, ATOMS):
        return Not(phi)
    if isinstance(phi, Not):
        return phi.body
    if isinstance(phi, And):
        return Or(negate(phi.left), negate(phi.right))
    if isinstance(phi, Or):
        return And(negate(phi.left), negate(phi.right))
    if isinstance(phi, Exists):
        return Forall(phi.var, negate(phi.body))
    return Exists(phi.var, negate(phi.body))


# ---------------------------------------------------------------------------
# printing


def _is_symbolic(name: str) -> bool:
    return bool(name) and all(ch in _SYMBOL_CHARS for ch in name)


def to_text(phi: Formula) -> str:
    """Canonical text; ``parse(to_text(phi)) == phi`` (with the right constants)."""
    return _show(phi, 0)


# precedence levels: 0 formula (quantifiers), 1 disj, 2 conj, 3 neg/prim
def _show(phi: Formula, ctx: int) -> str:
    if isinstance(phi, Equal):
        return f"{phi.left}={phi.right}"
    if isinstance(phi, RelAtom):
        if len(phi.args) == 2 and _is_symbolic(phi.rel):
            return f"{phi.args[0]} {phi.rel} {phi.args[1]}"
        return f"{phi.rel}({','.join(phi.args)})"
    if isinstance(phi, FunAtom):
        return f"{phi.fun}({','.join(phi.args)})={phi.out}"
    if isinstance(phi, ConstAtom):
        return f"{phi.const}={phi.var}"
    if isinstance(phi, Not):
        inner = _show(phi.body, 3)
        if isinstance(phi.body, ATOMS) and ("=" in inner or " " in inner):
            inner = f"({inner})"
        return "!" + inner
    if isinstance(phi, Or):
        s = f"{_show(phi.left, 1)} | {_show(phi.right, 2)}"
        return s if ctx <= 1 else f"({s})"
    if isinstance(phi, And):
        s = f"{_show(phi.left, 2)} & {_show(phi.right, 3)}"
        return s if ctx <= 2 else f"({s})"
    q = "exists" if isinstance(phi, Exists) else "forall"
    s = f"{q} {phi.var} . {_show(phi.body, 0)}"
    return s if ctx == 0 else f"({s})"


# ---------------------------------------------------------------------------
# evaluation


class EvalError(ValueError):
    pass


def evaluate(
    M: FiniteStructure,
    phi: Formula,
    v: Optional[Valuation] = None,
    D=None,
    memo: Optional[dict] = None,
) -> bool:
    """Tarskian truth of ``phi`` in ``M`` under ``v``.

    With ``D`` given, every quantifier ranges over ``D`` only. ``memo`` is an
    optional dict reused across calls on the same ``M`` and ``D``; entries keep
    their formula alive so identity keys stay valid.
    """
    if D is None:
        dom = tuple(M.universe)
    else:
        dom = tuple(sorted(set(D)))
        if any(not 0 <= x < M.size for x in dom):
            raise EvalError(f"relativizing set {sorted(dom)} not inside the universe")
    v = dict(v or {})
    for name, val in v.items():
        if not 0 <= val < M.size:
            raise EvalError(f"variable {name} assigned {val}, outside the universe")
    if memo is None:
        return _eval(M, phi, v, dom)
    return _eval_memo(M, phi, v, dom, memo)


eval_formula = evaluate


def _lookup(v, name):
    try:
        return v[name]
    except KeyError:
        raise EvalError(f"unbound variable {name}") from None


def _atom(M: FiniteStructure, phi: Formula, v) -> bool:
    if isinstance(phi, Equal):
        return _lookup(v, phi.left) == _lookup(v, phi.right)
    if isinstance(phi, RelAtom):
        rel = M.relations.get(phi.rel)
        if rel is None:
            raise EvalError(f"relation {phi.rel} not interpreted")
        return tuple(_lookup(v, a) for a in phi.args) in rel
    if isinstance(phi, FunAtom):
        table = M.functions.get(phi.fun)
        if table is None:
            raise EvalError(f"function {phi.fun} not interpreted")
        args = tuple(_lookup(v, a) for a in phi.args)
        if args not in table:
            raise EvalError(f"function {phi.fun}: arity mismatch at {args}")
        return table[args] == _lookup(v, phi.out)
    c = M.constants.get(phi.const)
    if c is None:
        raise EvalError(f"constant {phi.const} not interpreted")
    return c == _lookup(v, phi.var)


def _eval(M, phi, v, dom) -> bool:
    if isinstance(phi, ATOMS):
        return _atom(M, phi, v)
    if isinstance(phi, Not):
        return not _eval(M, phi.body, v, dom)
    if isinstance(phi, And):
        return _eval(M, phi.left, v, dom) and _eval(M, phi.right, v, dom)
    if isinstance(phi, Or):
        return _eval(M, phi.left, v, dom) or _eval(M, phi.right, v, dom)
    saved = v.get(phi.var, _MISSING)
    want = isinstance(phi, Exists)
    result = not want
    for a in dom:
        v[phi.var] = a
        if _eval(M, phi.body, v, dom) == want:
            result = want
            break
    if saved is _MISSING:
        v.pop(phi.var, None)
    else:
        v[phi.var] = saved
    return result


_MISSING = object()


def _eval_memo(M, phi, v, dom, memo) -> bool:
    entry = memo.get(id(phi))
    if entry is None or entry[0] is not phi:
        entry = (phi, tuple(sorted(free_vars(phi))), {})
        memo[id(phi)] = entry
    key = tuple(_lookup(v, x) for x in entry[1])
    table = entry[2]
    res = table.get(key)
    if res is not None:
        return res
    if isinstance(phi, ATOMS):
        res = _atom(M, phi, v)
    elif isinstance(phi, Not):
        res = not _eval_memo(M, phi.body, v, dom, memo)
    elif isinstance(phi, And):
        res = _eval_memo(M, phi.left, v, dom, memo) and _eval_memo(M, phi.right, v, dom, memo)
    elif isinstance(phi, Or):
        res = _eval_memo(M, phi.left, v, dom, memo) or _eval_memo(M, phi.right, v, dom, memo)
    else:
        saved = v.get(phi.var, _MISSING)
        want = isinstance(phi, Exists)
        res = not want
        for a in dom:
            v[phi.var] = a
            if _eval_memo(M, phi.body, v, dom, memo) == want:
                res = want
                break
        if saved is _MISSING:
            v.pop(phi.var, None)
        else:
            v[phi.var] = saved
    table[key] = res
    return res


FormulaLike = Union[Formula, str]
