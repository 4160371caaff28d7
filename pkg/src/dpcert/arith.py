"""The arithmetisation B and its compatible maps for resolution and cleanup.

B sends a positive literal x to ``1 - x``, a negative literal to ``x**3``,
disjunction to product and conjunction to sum.  Round polynomials are dense
tuples of seven coefficients, lowest degree first.
"""
from __future__ import annotations

from array import array
from dataclasses import dataclass
from itertools import chain
from operator import itemgetter, mul
from typing import Mapping, Sequence

import numpy as np

from .dp import Kind
from .formula import Formula

DEGREE = 6
NCOEFFS = DEGREE + 1

# degrees an honest prover can put in a round polynomial
ALLOWED_DEGREES = {
    Kind.RESOLUTION: frozenset({0, 1, 3}),
    Kind.CLEANUP: frozenset({0, 1, 2, 3, 4, 6}),
}


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class UnivariatePoly:
    coeffs: tuple[int, ...]
    q: int
    pivot: int = 0

    def __post_init__(self):
        if len(self.coeffs) != NCOEFFS:
            raise ValueError(f"need {NCOEFFS} coefficients, got {len(self.coeffs)}")

    @classmethod
    def from_ints(cls, coeffs: Sequence[int], q: int, pivot: int = 0) -> "UnivariatePoly":
        c = [v % q for v in coeffs]
        c += [0] * (NCOEFFS - len(c))
        return cls(tuple(c), q, pivot)

    @classmethod
    def constant(cls, value: int, q: int, pivot: int = 0) -> "UnivariatePoly":
        return cls.from_ints([value], q, pivot)

    @property
    def degree(self) -> int:
        return max((d for d, a in enumerate(self.coeffs) if a), default=0)

    def __call__(self, r: int) -> int:
        return eval_poly(self, r)

    def __add__(self, other: "UnivariatePoly") -> "UnivariatePoly":
        if other.q != self.q:
            raise ValueError("mixed moduli")
        return UnivariatePoly(tuple((a + b) % self.q for a, b in zip(self.coeffs, other.coeffs)), self.q, self.pivot)

    def __str__(self):
        terms = []
        for d in range(DEGREE, -1, -1):
            a = self.coeffs[d]
            if not a:
                continue
            signed = a - self.q if a > self.q // 2 else a
            var = "" if d == 0 else ("x" if d == 1 else f"x^{d}")
            terms.append(f"{signed}{var}" if var == "" or signed not in (1, -1) else ("-" if signed < 0 else "") + var)
        return " + ".join(terms).replace("+ -", "- ") or "0"


def eval_poly(p: UnivariatePoly, r: int) -> int:
    q = p.q
    acc = 0
    for a in reversed(p.coeffs):
        acc = (acc * r + a) % q
    return acc


def _as_list(sigma, n: int) -> list:
    if isinstance(sigma, Mapping):
        out = [None] * (n + 1)
        for v, val in sigma.items():
            if 1 <= v <= n:
                out[v] = val
        return out
    return list(sigma)


def eval_B(phi: Formula, sigma, q: int | None = None) -> int:
    """Value of B(phi) at a total assignment, mod ``q`` or exactly when ``q`` is None.

    ``sigma`` is a mapping var -> value or a list indexed by variable.
    """
    vals = _as_list(sigma, phi.num_vars)
    total = 0
    for clause, mult in phi.clauses.items():
        term = mult if q is None else mult % q
        for lit in clause:
            v = vals[abs(lit)] if abs(lit) < len(vals) else None
            if v is None:
                raise KeyError(f"assignment misses x{abs(lit)}")
            term *= (1 - v) if lit > 0 else v * v * v
            if q is not None:
                term %= q
        total += term
    return total if q is None else total % q


_MISSING = object()


def _pivot_shape(a: int, b: int, q: int) -> list[int]:
    # coefficients of (1-x)^a * x^(3b)
    base = {0: [1], 1: [1, -1], 2: [1, -2, 1]}[a]
    out = [0] * NCOEFFS
    for d, c in enumerate(base):
        out[d + 3 * b] = c % q
    return out


def partial_eval_B(phi: Formula, sigma, x: int, q: int) -> UnivariatePoly:
    """B(phi) with every variable but ``x`` fixed by ``sigma``, as a polynomial in ``x`` mod ``q``."""
    vals = _as_list(sigma, phi.num_vars)
    n = max(len(vals) - 1, phi.num_vars, x)
    # factor of each literal, indexed by lit + n; None marks the pivot
    fac: list = [_MISSING] * (2 * n + 1)
    for v in range(1, len(vals)):
        s = vals[v]
        if s is not None:
            fac[n + v] = (1 - s) % q
            fac[n - v] = s * s * s % q
    fac[n + x] = fac[n - x] = None
    buckets: dict[tuple[int, int], int] = {}
    try:
        for clause, mult in phi.clauses.items():
            term = mult % q
            a = b = 0
            for lit in clause:
                f = fac[lit + n]
                if f is None:
                    if lit > 0:
                        a += 1
                    else:
                        b += 1
                else:
                    term = term * f % q
            if a + b > 2:
                raise ShapeError(f"clause {clause} has {a + b} occurrences of x{x}")
            key = (a, b)
            buckets[key] = buckets.get(key, 0) + term
    except TypeError:
        raise KeyError("assignment misses a variable of the formula") from None
    coeffs = [0] * NCOEFFS
    for (a, b), s in buckets.items():
        s %= q
        for d, c in enumerate(_pivot_shape(a, b, q)):
            if c:
                coeffs[d] = (coeffs[d] + s * c) % q
    return UnivariatePoly(tuple(coeffs), q, x)


class CompiledFormula:
    """A formula laid out as a prefix trie of its sorted clauses.

    Clause products share the work of common prefixes, so evaluating B under
    a fresh assignment costs one multiplication per trie node instead of one
    per literal.  The layout does not depend on q or on the assignment, so
    the prover builds it once and reuses it across rounds and repetitions.

    ``pivots`` lists the variables that will be left free; their clause
    groups are prepared up front and the padded clause matrix is dropped.
    """

    __slots__ = ("num_vars", "parents", "lits", "ends", "mults", "_rows", "_lengths", "_end_ids", "_order_mults",
                 "_groups")

    def __init__(self, phi: Formula, pivots: Sequence[int] | None = None):
        n = self.num_vars = phi.num_vars
        clauses = list(phi.clauses)
        m = len(clauses)
        lengths = np.fromiter(map(len, clauses), dtype=np.int64, count=m)
        width = int(lengths.max()) if m else 0
        flat = np.fromiter(chain.from_iterable(clauses), dtype=np.int32, count=int(lengths.sum()))
        rows = np.full((m, width), 2 * n + 1, dtype=np.int32)
        starts = np.cumsum(lengths) - lengths
        rows[np.repeat(np.arange(m), lengths), np.arange(flat.size) - np.repeat(starts, lengths)] = flat + n
        order = np.lexsort(rows.T[::-1]) if width else np.arange(m)
        rows, lengths = rows[order], lengths[order]

        # a cell opens a new trie node once its row has diverged from the row above
        new = np.ones((m, width), dtype=bool)
        if m > 1:
            new[1:] = np.logical_or.accumulate(rows[1:] != rows[:-1], axis=1)
        new &= np.arange(width) < lengths[:, None]
        ids = np.cumsum(new, axis=0, dtype=np.int32) - 1  # node index within its level, valid where d < length

        self.parents, self.lits = [], []
        for d in range(width):
            sel = new[:, d]
            self.parents.append(_as_array(ids[sel, d - 1] if d else np.zeros(int(sel.sum()), dtype=np.int32)))
            self.lits.append(_as_array(rows[sel, d]))

        ordered_mults = _pick(list(phi.clauses.values()), order)
        end_ids = np.zeros(m, dtype=np.int32)
        nonempty = lengths > 0
        end_ids[nonempty] = ids[nonempty.nonzero()[0], lengths[nonempty] - 1]
        self.ends, self.mults = [], []
        for depth in range(width + 1):
            where = (lengths == depth).nonzero()[0]
            self.ends.append(_as_array(end_ids[where]))
            self.mults.append(_pick(ordered_mults, where))

        self._rows, self._lengths, self._end_ids, self._order_mults = rows, lengths, end_ids, ordered_mults
        self._groups: dict[int, dict] = {}
        if pivots is not None:
            for x in set(pivots):
                self.groups(x)
            self._rows = self._lengths = self._end_ids = self._order_mults = None

    @property
    def num_nodes(self) -> int:
        return sum(len(level) for level in self.parents)

    def groups(self, x: int) -> dict:
        """Clauses mentioning ``x``, keyed by (#x, #-x) and then by clause length."""
        got = self._groups.get(x)
        if got is not None:
            return got
        if self._rows is None:
            raise KeyError(f"x{x} was not prepared as a pivot")
        n = self.num_vars
        a = (self._rows == n + x).sum(axis=1)
        b = (self._rows == n - x).sum(axis=1)
        hit = (a + b).nonzero()[0]
        if hit.size and (a[hit] + b[hit]).max() > 2:
            raise ShapeError(f"a clause has more than two occurrences of x{x}")
        got = {}
        key = (a[hit] * 3 + b[hit]) * (self._rows.shape[1] + 1) + self._lengths[hit]
        for k in np.unique(key).tolist():
            sel = hit[key == k]
            pair, depth = divmod(k, self._rows.shape[1] + 1)
            per_depth = got.setdefault(divmod(pair, 3), {})
            per_depth[depth] = (_as_array(self._end_ids[sel]), _pick(self._order_mults, sel))
        self._groups[x] = got
        return got

    def partial_eval(self, sigma, x: int, q: int) -> UnivariatePoly:
        """Same result as :func:`partial_eval_B` on the source formula."""
        n = self.num_vars
        vals = _as_list(sigma, n)
        fac: list = [None] * (2 * n + 1)
        for v in range(1, min(len(vals), n + 1)):
            s = vals[v]
            if s is not None:
                fac[n + v] = (1 - s) % q
                fac[n - v] = s * s * s % q
        fac[n + x] = fac[n - x] = 1
        groups = self.groups(x)
        reduce = q.__rmod__
        level = [1]  # the root
        nodes = [level]
        try:
            for parents, lits in zip(self.parents, self.lits):
                level = list(map(reduce, map(mul, map(level.__getitem__, parents), map(fac.__getitem__, lits))))
                nodes.append(level)
        except TypeError:
            raise KeyError("assignment misses a variable of the formula") from None

        def total(ends, mults, depth):
            return sum(map(mul, mults, map(nodes[depth].__getitem__, ends)))

        const = sum(total(e, m, d) for d, (e, m) in enumerate(zip(self.ends, self.mults)) if m)
        coeffs = [0] * NCOEFFS
        for (a, b), per_depth in groups.items():
            s = sum(total(idx, ms, d) for d, (idx, ms) in per_depth.items())
            const -= s
            s %= q
            for d, c in enumerate(_pivot_shape(a, b, q)):
                if c:
                    coeffs[d] = (coeffs[d] + s * c) % q
        coeffs[0] = (coeffs[0] + const) % q
        return UnivariatePoly(tuple(coeffs), q, x)


def _pick(items: list, index: np.ndarray) -> list:
    if index.size == 0:
        return []
    if index.size == 1:
        return [items[int(index[0])]]
    return list(itemgetter(*index.tolist())(items))


def _as_array(values: np.ndarray) -> array:
    out = array("i")
    out.frombytes(np.ascontiguousarray(values, dtype=np.intc).tobytes())
    return out


def shape_check(p: UnivariatePoly, kind: Kind) -> bool:
    allowed = ALLOWED_DEGREES[kind]
    return all(a == 0 for d, a in enumerate(p.coeffs) if d not in allowed)


def gamma(p: UnivariatePoly) -> UnivariatePoly:
    """Resolution map: ``a3 x^3 + a1 x + a0  ->  -a3 a1 + a1 + a0``."""
    if not shape_check(p, Kind.RESOLUTION):
        raise ShapeError(f"not a resolution-shaped polynomial: {p.coeffs}")
    a0, a1, _, a3 = p.coeffs[:4]
    return UnivariatePoly.constant(-a3 * a1 + a1 + a0, p.q, p.pivot)


def delta(p: UnivariatePoly) -> UnivariatePoly:
    """Cleanup map: ``sum a_i x^i  ->  (a6 + a4 + a3) x^3 + (a2 + a1) x + a0``."""
    if not shape_check(p, Kind.CLEANUP):
        raise ShapeError(f"not a cleanup-shaped polynomial: {p.coeffs}")
    a0, a1, a2, a3, a4, _, a6 = p.coeffs
    return UnivariatePoly.from_ints([a0, a1 + a2, 0, a3 + a4 + a6], p.q, p.pivot)


def compatible_map(kind: Kind):
    return gamma if kind is Kind.RESOLUTION else delta


def eval_A(phi: Formula, sigma) -> int:
    """The standard arithmetisation (x -> 1-x, -x -> x, or -> product, and -> sum), over the integers.

    Only used to show it does not commute with resolution.
    """
    vals = _as_list(sigma, phi.num_vars)
    total = 0
    for clause, mult in phi.clauses.items():
        term = mult
        for lit in clause:
            v = vals[abs(lit)]
            term *= (1 - v) if lit > 0 else v
        total += term
    return total
