"""Davis-Putnam resolution procedure with full trace recording."""
from __future__ import annotations

import enum
import random
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .formula import EMPTY_CLAUSE, Formula, canonical


class Kind(enum.Enum):
    RESOLUTION = "R"
    CLEANUP = "C"


class Macrostep(NamedTuple):
    kind: Kind
    pivot: int

    def __str__(self):
        return f"{self.kind.value}{self.pivot}"


class DPTimeout(Exception):
    """Deadline passed while running the procedure."""


def full_resolution(phi: Formula, x: int) -> Formula:
    """Add all resolvents on ``x`` then drop every clause mentioning ``x``.

    Resolvent multiplicity is the product of its parents' multiplicities.
    """
    pos, neg = [], []
    store: dict[tuple[int, ...], int] = {}
    for clause, mult in phi.clauses.items():
        p = clause.count(x)
        n = clause.count(-x)
        if p + n > 1:
            raise ValueError(f"R_{x} needs C(x)+C(-x) <= 1, got clause {clause}")
        if p:
            pos.append(([l for l in clause if l != x], mult))
        elif n:
            neg.append(([l for l in clause if l != -x], mult))
        else:
            store[clause] = store.get(clause, 0) + mult
    for rest1, m1 in pos:
        for rest2, m2 in neg:
            key = canonical(rest1 + rest2)
            store[key] = store.get(key, 0) + m1 * m2
    return Formula._raw(store, phi.num_vars)


def full_cleanup(phi: Formula, x: int) -> Formula:
    """Drop clauses with both ``x`` and ``-x``; cap the remaining ``x``/``-x`` counts at one.

    Returns ``phi`` itself when nothing changes.
    """
    changed = False
    store: dict[tuple[int, ...], int] = {}
    for clause, mult in phi.clauses.items():
        p = clause.count(x)
        n = clause.count(-x)
        if p + n > 2:
            raise ValueError(f"C_{x} needs C(x)+C(-x) <= 2, got clause {clause}")
        if p and n:
            changed = True
            continue
        if p == 2 or n == 2:
            changed = True
            lit = x if p else -x
            i = clause.index(lit)
            clause = clause[:i] + clause[i + 1:]
        store[clause] = store.get(clause, 0) + mult
    return Formula._raw(store, phi.num_vars) if changed else phi


def apply_step(phi: Formula, step: Macrostep) -> Formula:
    if step.kind is Kind.RESOLUTION:
        return full_resolution(phi, step.pivot)
    return full_cleanup(phi, step.pivot)


def check_permutation(order: Sequence[int], n: int) -> tuple[int, ...]:
    order = tuple(int(v) for v in order)
    if sorted(order) != list(range(1, n + 1)):
        raise ValueError(f"order {order} is not a permutation of 1..{n}")
    return order


def build_schedule(order: Sequence[int]) -> list[Macrostep]:
    """R on each variable in turn, each followed by cleanups of all later ones."""
    order = check_permutation(order, len(order))
    steps = []
    for i, x in enumerate(order):
        steps.append(Macrostep(Kind.RESOLUTION, x))
        steps.extend(Macrostep(Kind.CLEANUP, y) for y in order[i + 1:])
    return steps


def num_rounds(n: int) -> int:
    return n * (n + 1) // 2


@dataclass
class Trace:
    formulas: list[Formula]
    schedule: list[Macrostep]
    order: tuple[int, ...]
    seconds: float = 0.0
    # prover-side precomputation, keyed by formula identity
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def k(self) -> int:
        return len(self.schedule)

    @property
    def n(self) -> int:
        return len(self.order)

    @property
    def final(self) -> Formula:
        return self.formulas[-1]

    @property
    def unsatisfiable(self) -> bool:
        return self.final.empty_multiplicity > 0

    @property
    def verdict(self) -> str:
        return "unsatisfiable" if self.unsatisfiable else "satisfiable"

    def clause_profile(self) -> list[int]:
        return [len(f) for f in self.formulas]

    def dump(self) -> str:
        parts = ["step 0\n" + self.formulas[0].dump()]
        for i, step in enumerate(self.schedule, 1):
            parts.append(f"step {i} {step.kind.value} {step.pivot}\n" + self.formulas[i].dump())
        return "".join(parts)


def run(phi: Formula, order: Sequence[int], deadline: float | None = None) -> Trace:
    """Apply the macrostep schedule for ``order``, keeping every intermediate formula.

    A cleanup that changes nothing shares the previous formula object.
    """
    start = time.perf_counter()
    order = check_permutation(order, phi.num_vars)
    schedule = build_schedule(order)
    formulas = [phi]
    for step in schedule:
        if deadline is not None and time.perf_counter() > deadline:
            raise DPTimeout(f"deadline passed at step {len(formulas)} of {len(schedule)}")
        formulas.append(apply_step(formulas[-1], step))
    final = formulas[-1]
    if any(c != EMPTY_CLAUSE for c in final.clauses):
        raise AssertionError("final formula still mentions variables")
    return Trace(formulas, schedule, order, time.perf_counter() - start)


# -- variable orders ---------------------------------------------------------

ORDER_POLICIES = ("lexi", "random", "greedy", "unit")


def _occurrences(phi: Formula) -> tuple[dict[int, int], dict[int, int]]:
    pos: dict[int, int] = {}
    neg: dict[int, int] = {}
    for clause, mult in phi.clauses.items():
        for lit in set(clause):
            if lit > 0:
                pos[lit] = pos.get(lit, 0) + mult
            else:
                neg[-lit] = neg.get(-lit, 0) + mult
    return pos, neg


def resolution_delta(phi: Formula, x: int) -> int:
    """Change in clause count (with multiplicity) caused by resolving on ``x``."""
    pos, neg = _occurrences(phi)
    a, b = pos.get(x, 0), neg.get(x, 0)
    return a * b - a - b


def _normalise(phi: Formula) -> Formula:
    # equivalent to cleaning up every remaining variable
    store: dict[tuple[int, ...], int] = {}
    for clause, mult in phi.clauses.items():
        s = set(clause)
        if any(-l in s for l in s):
            continue
        key = canonical(s) if len(s) != len(clause) else clause
        store[key] = store.get(key, 0) + mult
    return Formula._raw(store, phi.num_vars)


def _unit_variable(phi: Formula, remaining: set[int]) -> int | None:
    units = [abs(c[0]) for c in phi.clauses if len(c) == 1 and abs(c[0]) in remaining]
    return min(units) if units else None


def choose_order(phi: Formula, policy: str = "lexi", seed: int | None = None,
                 deadline: float | None = None) -> tuple[int, ...]:
    n = phi.num_vars
    if policy == "lexi":
        return tuple(range(1, n + 1))
    if policy == "random":
        order = list(range(1, n + 1))
        random.Random(seed).shuffle(order)
        return tuple(order)
    if policy not in ("greedy", "unit"):
        raise ValueError(f"unknown order policy {policy!r}; pick one of {ORDER_POLICIES}")

    remaining = set(range(1, n + 1))
    order = []
    current = phi
    while remaining:
        if deadline is not None and time.perf_counter() > deadline:
            raise DPTimeout("deadline passed while choosing the order")
        x = _unit_variable(current, remaining) if policy == "unit" else None
        if x is None:
            pos, neg = _occurrences(current)
            x = min(remaining, key=lambda v: (pos.get(v, 0) * neg.get(v, 0) - pos.get(v, 0) - neg.get(v, 0), v))
        order.append(x)
        remaining.discard(x)
        current = _normalise(full_resolution(current, x))
    return tuple(order)
