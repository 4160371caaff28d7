"""Input checks shared by the estimators and the CLI."""
from __future__ import annotations

import os

from .dp import ORDER_POLICIES
from .formula import Formula, parse_dimacs


def check_formula(X) -> Formula:
    """Coerce ``X`` to a :class:`Formula`.

    Accepts a Formula, DIMACS text or bytes, a path to a DIMACS file, or a
    list of clauses given as integer lists.
    """
    if isinstance(X, Formula):
        return X
    if isinstance(X, bytes):
        return parse_dimacs(X)[0]
    if isinstance(X, (str, os.PathLike)):
        text = str(X)
        if "\n" not in text and os.path.exists(text):
            with open(text, "rb") as fh:
                return parse_dimacs(fh.read())[0]
        return parse_dimacs(text)[0]
    try:
        clauses = [[int(l) for l in c] for c in X]
    except TypeError:
        raise TypeError(f"cannot read a CNF formula from {type(X).__name__}") from None
    return Formula.from_clauses(clauses)


def check_formulas(X) -> list[Formula]:
    """A batch of formulas; a single formula is wrapped in a list."""
    if isinstance(X, (Formula, str, bytes, os.PathLike)):
        return [check_formula(X)]
    items = list(X)
    if items and all(isinstance(c, (list, tuple)) and all(isinstance(l, int) for l in c) for c in items):
        # one formula given as a clause list
        return [check_formula(items)]
    return [check_formula(x) for x in items]


def check_order_policy(policy: str) -> str:
    if policy not in ORDER_POLICIES:
        raise ValueError(f"order must be one of {ORDER_POLICIES}, got {policy!r}")
    return policy


def check_prime_bits(bits: int, low: int = 8) -> int:
    bits = int(bits)
    if not low <= bits <= 62:
        raise ValueError(f"prime_bits must be in [{low}, 62], got {bits}")
    return bits

