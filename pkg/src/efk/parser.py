"""Recursive-descent parser for the formula syntax.

    formula := 'exists' VAR '.' formula | 'forall' VAR '.' formula | disj
    disj    := conj ('|' conj)*
    conj    := neg ('&' neg)*
    neg     := '!' neg | prim
    prim    := '(' formula ')' | atom
    atom    := VAR '=' VAR | NAME '(' VARS ')' | NAME '(' VARS ')' '=' VAR
             | NAME '=' VAR | VAR OP VAR

``->`` and ``<->`` are accepted between disjunctions and desugared.
Whether ``a = b`` is an equation or a constant atom depends on the
vocabulary: it is a constant atom only when ``a`` (or ``b``) is a constant
symbol of the supplied vocabulary and not a variable bound in scope.
"""

from __future__ import annotations

import re
from typing import Iterable, Optional

from efk.formulas import (
    And,
    ConstAtom,
    Equal,
    Exists,
    Forall,
    Formula,
    FunAtom,
    Not,
    Or,
    RelAtom,
)
from efk.structures import CONST, FUN, REL, Vocabulary


class FormulaSyntaxError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<arrow><->|->)
  | (?P<op>[<>~+*\-^%$@=]+)
  | (?P<punct>[().,!&|])
    """,
    re.VERBOSE,
)

KEYWORDS = {"exists", "forall"}


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        val = m.group(kind)
        if kind != "ws":
            if kind == "op" and val == "=":
                kind = "eq"
            elif kind in ("punct", "arrow"):
                kind = val
            out.append((kind, val, pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, vocab: Optional[Vocabulary], free: Iterable[str]):
        self.toks = _tokenize(text)
        self.i = 0
        self.vocab = vocab
        self.scope: list[str] = list(free)

    def peek(self, ahead: int = 0):
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def take(self, kind: Optional[str] = None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            want = {"ident": "identifier", "end": "end of input"}.get(kind, repr(kind))
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise FormulaSyntaxError(f"expected {want}, found {got}", tok[2])
        self.i += 1
        return tok

    def formula(self) -> Formula:
        kind, val, _ = self.peek()
        if kind == "ident" and val in KEYWORDS:
            self.take()
            var = self.take("ident")[1]
            self.take(".")
            self.scope.append(var)
            body = self.formula()
            self.scope.pop()
            return Exists(var, body) if val == "exists" else Forall(var, body)
        left = self.disj()
        kind = self.peek()[0]
        if kind == "->":
            self.take()
            right = self.formula()
            return Or(Not(left), right)
        if kind == "<->":
            self.take()
            right = self.formula()
            return Or(And(left, right), And(Not(left), Not(right)))
        return left

    def disj(self) -> Formula:
        out = self.conj()
        while self.peek()[0] == "|":
            self.take()
            out = Or(out, self.conj())
        return out

    def conj(self) -> Formula:
        out = self.neg()
        while self.peek()[0] == "&":
            self.take()
            out = And(out, self.neg())
        return out

    def neg(self) -> Formula:
        if self.peek()[0] == "!":
            self.take()
            return Not(self.neg())
        return self.prim()

    def prim(self) -> Formula:
        kind, val, pos = self.peek()
        if kind == "(":
            self.take()
            inner = self.formula()
            self.take(")")
            return inner
        if kind == "ident" and val in KEYWORDS:
            raise FormulaSyntaxError("quantifier must be parenthesized here", pos)
        return self.atom()

    def _is_const(self, name: str) -> bool:
        if self.vocab is None or name in self.scope:
            return False
        sym = self.vocab.get(name)
        return sym is not None and sym.kind == CONST

    def _check(self, name: str, kind: str, arity: int, pos: int):
        if self.vocab is None:
            return
        sym = self.vocab.get(name)
        if sym is None:
            raise FormulaSyntaxError(f"symbol {name} not in vocabulary", pos)
        if sym.kind != kind or sym.arity != arity:
            raise FormulaSyntaxError(
                f"symbol {name} used as {kind}/{arity} but declared {sym.kind}/{sym.arity}", pos
            )

    def atom(self) -> Formula:
        kind, name, pos = self.take("ident")
        nxt = self.peek()[0]
        if nxt == "(":
            self.take()
            args = [self.take("ident")[1]]
            while self.peek()[0] == ",":
                self.take()
                args.append(self.take("ident")[1])
            self.take(")")
            if self.peek()[0] == "eq":
                self.take()
                out = self.take("ident")[1]
                self._check(name, FUN, len(args), pos)
                return FunAtom(name, tuple(args), out)
            self._check(name, REL, len(args), pos)
            return RelAtom(name, tuple(args))
        if nxt == "eq":
            self.take()
            right = self.take("ident")[1]
            if self._is_const(name):
                return ConstAtom(name, right)
            if self._is_const(right):
                return ConstAtom(right, name)
            return Equal(name, right)
        if nxt == "op":
            op = self.take()[1]
            right = self.take("ident")[1]
            self._check(op, REL, 2, pos)
            return RelAtom(op, (name, right))
        kind, val, at = self.peek()
        got = "end of input" if kind == "end" else repr(val)
        raise FormulaSyntaxError(f"expected '(', '=' or a relation symbol, found {got}", at)


def parse(text: str, vocab: Optional[Vocabulary] = None, free: Iterable[str] = ()) -> Formula:
    """Parse ``text``; with ``vocab`` given, symbol kinds and arities are checked."""
    p = _Parser(text, vocab, free)
    phi = p.formula()
    p.take("end")
    return phi
