"""Slaloms over a finite window and covering families of functions.

A slalom with capacities g assigns to each index n < N a set of at most g(n)
values; it covers a function η when η(n) lies in the cell at every required
index. In ``everywhere`` mode every index is required; in ``filtered`` mode
only the active window ``{n in [n0, N) : k_n > c}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from efk.filterlab import KSeqSpec, window_set

Function = tuple[int, ...]


@dataclass(frozen=True)
class Everywhere:
    def required(self, N: int) -> list[int]:
        return list(range(N))

    def __str__(self):
        return "everywhere"


@dataclass(frozen=True)
class Filtered:
    c: int
    n0: int
    kspec: KSeqSpec

    def required(self, N: int) -> list[int]:
        return window_set(self.kspec, self.c, self.n0, stop=N)

    def __str__(self):
        return f"filtered:c={self.c},n0={self.n0}"


CoverMode = Union[Everywhere, Filtered]
EVERYWHERE = Everywhere()


@dataclass(frozen=True)
class Family:
    """A finite set of functions ``[0, N) -> [0, V)`` (duplicates dropped, order kept)."""

    N: int
    V: int
    functions: tuple[Function, ...]

    def __post_init__(self):
        seen = []
        for eta in self.functions:
            eta = tuple(int(x) for x in eta)
            if len(eta) != self.N:
                raise ValueError(f"function {eta} has length {len(eta)}, expected {self.N}")
            if any(not 0 <= x < self.V for x in eta):
                raise ValueError(f"function {eta} has a value outside [0, {self.V})")
            if eta not in seen:
                seen.append(eta)
        object.__setattr__(self, "functions", tuple(seen))

    @classmethod
    def all_functions(cls, N: int, V: int) -> "Family":
        return cls(N, V, tuple(itertools.product(range(V), repeat=N)))

    def __len__(self):
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)


@dataclass(frozen=True)
class Slalom:
    capacity: tuple[int, ...]
    cells: tuple[frozenset, ...]

    def __post_init__(self):
        object.__setattr__(self, "capacity", tuple(self.capacity))
        object.__setattr__(self, "cells", tuple(frozenset(c) for c in self.cells))
        if len(self.capacity) != len(self.cells):
            raise ValueError("capacity and cells differ in length")
        for n, (g, cell) in enumerate(zip(self.capacity, self.cells)):
            if len(cell) > g:
                raise ValueError(f"cell {n} holds {len(cell)} values, capacity {g}")

    def covers(self, eta: Function, indices: Iterable[int]) -> Optional[int]:
        """First required index where ``eta`` escapes, or None."""
        for n in indices:
            if eta[n] not in self.cells[n]:
                return n
        return None

    def as_lists(self) -> list[list[int]]:
        return [sorted(c) for c in self.cells]


@dataclass
class CoverReport:
    ok: bool
    witnesses: dict = field(default_factory=dict)  # function -> index of covering slalom
    failure: Optional[tuple[Function, int]] = None  # (uncovered function, escaping index)

    def __bool__(self):
        return self.ok


def check_cover(H: Union[Family, Sequence[Function]], F: Sequence[Slalom], mode: CoverMode = EVERYWHERE) -> CoverReport:
    functions = list(H)
    if not functions:
        return CoverReport(True)
    N = len(functions[0])
    caps = {s.capacity for s in F}
    if len(caps) > 1:
        raise ValueError("slaloms in a family must share capacities")
    req = mode.required(N)
    witnesses = {}
    for eta in functions:
        for i, s in enumerate(F):
            if s.covers(eta, req) is None:
                witnesses[eta] = i
                break
        else:
            where = F[0].covers(eta, req) if F else (req[0] if req else 0)
            return CoverReport(False, witnesses, (eta, where))
    return CoverReport(True, witnesses)


@dataclass(frozen=True)
class Infeasible:
    index: int
    values: tuple[int, ...]  # the multiset of values at that index
    capacity: int

    def __bool__(self):
        return False


def _distinct(functions, n):
    return sorted({eta[n] for eta in functions})


def single_slalom_cover(H, g: Sequence[int], mode: CoverMode = EVERYWHERE) -> Union[Slalom, Infeasible]:
    """One slalom covering all of H, or the first required index that overflows.

    Cells at required indices hold exactly the values taken there; other
    cells keep the smallest values that fit.
    """
    functions = list(H)
    g = tuple(g)
    N = len(g)
    req = set(mode.required(N))
    cells = []
    for n in range(N):
        vals = _distinct(functions, n)
        if n in req:
            if len(vals) > g[n]:
                return Infeasible(n, tuple(sorted(eta[n] for eta in functions)), g[n])
            cells.append(vals)
        else:
            cells.append(vals[: g[n]])
    return Slalom(g, cells)


def feasible(functions, g, req) -> bool:
    return all(len({eta[n] for eta in functions}) <= g[n] for n in req)


def greedy_cover(H, g: Sequence[int], mode: CoverMode = EVERYWHERE) -> list[Slalom]:
    """First fit in input order."""
    functions = list(H)
    g = tuple(g)
    req = mode.required(len(g))
    groups: list[list[Function]] = []
    for eta in functions:
        for grp in groups:
            if feasible(grp + [eta], g, req):
                grp.append(eta)
                break
        else:
            if not feasible([eta], g, req):
                n = next(n for n in req if g[n] < 1)
                raise ValueError(f"index {n} has capacity 0; no slalom covers {eta}")
            groups.append([eta])
    return [single_slalom_cover(grp, g, mode) for grp in groups]


class SearchBoundExceeded(ValueError):
    pass


MAX_EXACT = 10


def min_cover_exact(H, g: Sequence[int], mode: CoverMode = EVERYWHERE, bound: int = MAX_EXACT):
    """``(size, family)`` of a smallest covering family, by branch and bound over set partitions."""
    functions = list(H)
    if len(functions) > bound:
        raise SearchBoundExceeded(f"{len(functions)} functions exceed the exhaustive bound {bound}")
    g = tuple(g)
    req = mode.required(len(g))
    if not functions:
        return 0, []
    for eta in functions:
        if not feasible([eta], g, req):
            raise ValueError(f"{eta} cannot be covered by any slalom with these capacities")
    greedy = greedy_cover(functions, g, mode)
    best_size = len(greedy)
    best_groups = None
    groups: list[list[Function]] = []
    cells: list[list[set]] = []  # per group, per required index

    def fits(i, eta):
        return all(eta[n] in cells[i][j] or len(cells[i][j]) < g[n] for j, n in enumerate(req))

    def rec(pos):
        nonlocal best_size, best_groups
        if len(groups) >= best_size:
            return
        if pos == len(functions):
            best_size = len(groups)
            best_groups = [list(grp) for grp in groups]
            return
        eta = functions[pos]
        for i in range(len(groups)):
            if not fits(i, eta):
                continue
            added = [j for j, n in enumerate(req) if eta[n] not in cells[i][j]]
            for j in added:
                cells[i][j].add(eta[req[j]])
            groups[i].append(eta)
            rec(pos + 1)
            groups[i].pop()
            for j in added:
                cells[i][j].discard(eta[req[j]])
        if len(groups) + 1 < best_size:
            groups.append([eta])
            cells.append([{eta[n]} for n in req])
            rec(pos + 1)
            groups.pop()
            cells.pop()

    rec(0)
    if best_groups is None:
        return best_size, greedy
    return best_size, [single_slalom_cover(grp, g, mode) for grp in best_groups]
