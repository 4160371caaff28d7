"""CNF formulas as counted multisets.

A literal is a non-zero signed int in DIMACS style (``3`` is x3, ``-3`` is
not x3).  A clause is a tuple of literals *with repetition*, kept sorted by
``(variable, negated)`` so that two clauses with the same counted content
are the same tuple.  A formula maps each clause to its multiplicity.
"""
from __future__ import annotations

import logging
from collections import Counter
from typing import Iterable, Mapping

log = logging.getLogger(__name__)

EMPTY_CLAUSE: tuple[int, ...] = ()


class DimacsError(ValueError):
    """Malformed DIMACS input."""


def lit_key(lit: int) -> tuple[int, bool]:
    return (abs(lit), lit < 0)


def variable(lit: int) -> int:
    return abs(lit)


def is_negated(lit: int) -> bool:
    return lit < 0


def canonical(lits) -> tuple[int, ...]:
    """Sort literals by (variable, negated) with two stable C-level sorts."""
    return tuple(sorted(sorted(lits, reverse=True), key=abs))


def make_clause(lits: Iterable[int]) -> tuple[int, ...]:
    lits = tuple(lits)
    if any(l == 0 for l in lits):
        raise ValueError("0 is not a literal")
    return canonical(lits)


def clause_counts(clause: Iterable[int]) -> Counter:
    return Counter(clause)


def multiset_plus(m1: Iterable, m2: Iterable) -> Counter:
    """Pointwise sum of two multisets (given as iterables or Counters)."""
    a = m1 if isinstance(m1, Counter) else Counter(m1)
    b = m2 if isinstance(m2, Counter) else Counter(m2)
    return a + b


def multiset_minus(m1: Iterable, m2: Iterable) -> Counter:
    """Pointwise difference truncated at zero."""
    a = m1 if isinstance(m1, Counter) else Counter(m1)
    b = m2 if isinstance(m2, Counter) else Counter(m2)
    return a - b


def resolvent(c1: tuple[int, ...], c2: tuple[int, ...], x: int) -> tuple[int, ...]:
    """Resolvent of ``c1`` (containing x once) and ``c2`` (containing not-x once).

    Duplicate literals are kept.
    """
    if x <= 0:
        raise ValueError("pivot must be a positive variable index")
    if c1.count(x) != 1 or -x in c1:
        raise ValueError(f"first clause must contain x{x} exactly once and not its negation")
    if c2.count(-x) != 1 or x in c2:
        raise ValueError(f"second clause must contain -x{x} exactly once and not x{x}")
    rest = [l for l in c1 if l != x]
    rest.extend(l for l in c2 if l != -x)
    return canonical(rest)


def is_tautology(clause: Iterable[int]) -> bool:
    s = set(clause)
    return any(-l in s for l in s)


class Formula:
    """Counted multiset of clauses over variables ``1..num_vars``.

    Treat instances as immutable: operations build new formulas.
    """

    __slots__ = ("clauses", "num_vars")

    def __init__(self, clauses: Mapping[tuple[int, ...], int] | None = None, num_vars: int | None = None):
        store: dict[tuple[int, ...], int] = {}
        for clause, mult in (clauses or {}).items():
            if mult < 0:
                raise ValueError("negative clause multiplicity")
            if mult:
                key = make_clause(clause)
                store[key] = store.get(key, 0) + mult
        top = max((abs(l) for c in store for l in c), default=0)
        if num_vars is None:
            num_vars = top
        elif top > num_vars:
            raise ValueError(f"literal on x{top} exceeds num_vars={num_vars}")
        self.clauses = store
        self.num_vars = num_vars

    @classmethod
    def from_clauses(cls, clauses: Iterable[Iterable[int]], num_vars: int | None = None) -> "Formula":
        counts: Counter = Counter(make_clause(c) for c in clauses)
        return cls(counts, num_vars)

    @classmethod
    def _raw(cls, store: dict, num_vars: int) -> "Formula":
        # trusted constructor: keys already canonical, multiplicities positive
        f = cls.__new__(cls)
        f.clauses = store
        f.num_vars = num_vars
        return f

    def __eq__(self, other):
        if not isinstance(other, Formula):
            return NotImplemented
        return self.clauses == other.clauses

    def __hash__(self):
        return hash(frozenset(self.clauses.items()))

    def __len__(self):
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses.items())

    def __contains__(self, clause):
        return make_clause(clause) in self.clauses

    def __repr__(self):
        body = ", ".join(
            (f"{m}*" if m != 1 else "") + "{" + ",".join(map(str, c)) + "}" for c, m in self.sorted_items()
        )
        return f"Formula([{body}], num_vars={self.num_vars})"

    def sorted_items(self) -> list[tuple[tuple[int, ...], int]]:
        return sorted(self.clauses.items(), key=lambda item: [lit_key(l) for l in item[0]])

    def multiplicity(self, clause: Iterable[int]) -> int:
        return self.clauses.get(make_clause(clause), 0)

    @property
    def empty_multiplicity(self) -> int:
        return self.clauses.get(EMPTY_CLAUSE, 0)

    @property
    def num_clauses(self) -> int:
        """Clause count with multiplicity."""
        return sum(self.clauses.values())

    @property
    def num_literals(self) -> int:
        """Literal occurrences over distinct clauses (the stored size)."""
        return sum(len(c) for c in self.clauses)

    def variables(self) -> set[int]:
        return {abs(l) for c in self.clauses for l in c}

    def flat(self) -> Counter:
        """The plain multiset view: clause -> number of copies."""
        return Counter(self.clauses)

    def dump(self) -> str:
        """Canonical text dump, one ``<mult> x <literals>`` line per clause."""
        lines = []
        for clause, mult in self.sorted_items():
            lines.append(f"{mult} x " + " ".join(map(str, clause)) if clause else f"{mult} x")
        return "\n".join(lines) + ("\n" if lines else "")

    def to_dimacs(self) -> str:
        out = [f"p cnf {self.num_vars} {self.num_clauses}"]
        for clause, mult in self.sorted_items():
            line = " ".join(map(str, clause + (0,)))
            out.extend([line] * mult)
        return "\n".join(out) + "\n"


def parse_dimacs(text: str | bytes) -> tuple[Formula, int]:
    """Read DIMACS CNF, keeping duplicate literals and clauses as counts."""
    if isinstance(text, bytes):
        text = text.decode("ascii")
    num_vars = declared = None
    clauses: list[list[int]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if num_vars is not None:
                raise DimacsError(f"line {lineno}: duplicate header")
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {lineno}: malformed header {line!r}")
            try:
                num_vars, declared = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsError(f"line {lineno}: malformed header {line!r}") from None
            if num_vars < 0 or declared < 0:
                raise DimacsError(f"line {lineno}: negative counts in header")
            continue
        if num_vars is None:
            raise DimacsError(f"line {lineno}: clause before header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"line {lineno}: bad token {tok!r}") from None
            if lit == 0:
                clauses.append(current)
                current = []
            elif abs(lit) > num_vars:
                raise DimacsError(f"line {lineno}: literal {lit} out of range 1..{num_vars}")
            else:
                current.append(lit)
    if num_vars is None:
        raise DimacsError("missing 'p cnf' header")
    if current:
        raise DimacsError("last clause is missing its terminating 0")
    if len(clauses) != declared:
        log.warning("header declares %d clauses, found %d", declared, len(clauses))
    return Formula.from_clauses(clauses, num_vars), num_vars


def preprocess(formula: Formula) -> Formula:
    """Normalise to a set of sets: dedupe literals, drop tautologies, collapse repeats."""
    store: dict[tuple[int, ...], int] = {}
    for clause in formula.clauses:
        lits = set(clause)
        if any(-l in lits for l in lits):
            continue
        store[make_clause(lits)] = 1
    return Formula._raw(store, formula.num_vars)

