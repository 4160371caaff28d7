"""Prime fields and protocol-prime selection."""
from __future__ import annotations

import random
from dataclasses import dataclass

MAX_MODULUS = 1 << 63

# Miller-Rabin with the first 13 primes as bases is exact below 3.3e24,
# far beyond any modulus used here.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(m: int) -> bool:
    if m < 2:
        return False
    for p in _MR_BASES:
        if m % p == 0:
            return m == p
    d, s = m - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        y = pow(a, d, m)
        if y == 1 or y == m - 1:
            continue
        for _ in range(s - 1):
            y = y * y % m
            if y == m - 1:
                break
        else:
            return False
    return True


def sample_prime(bits: int, rng: random.Random) -> int:
    """Uniformly drawn odd candidates from ``[2**bits, 2**(bits+1))`` until one is prime."""
    if not 2 <= bits <= 62:
        raise ValueError(f"bits must be in [2, 62], got {bits}")
    lo = 1 << bits
    half = lo >> 1  # number of odd integers in the range
    while True:
        q = lo + 1 + 2 * rng.randrange(half)
        if is_prime(q):
            return q


def acceptable_prime(q: int, final_multiplicity: int) -> bool:
    """Whether ``q`` keeps the final constant non-zero."""
    return final_multiplicity % q != 0


def pick_protocol_prime(final_multiplicity: int, bits: int, rng: random.Random) -> tuple["PrimeField", int]:
    """Draw primes until one does not divide ``final_multiplicity``.

    Returns the field and the number of redraws it took.
    """
    if final_multiplicity <= 0:
        raise ValueError("final multiplicity must be positive: the formula is not refuted")
    redraws = 0
    while True:
        q = sample_prime(bits, rng)
        if acceptable_prime(q, final_multiplicity):
            return PrimeField(q), redraws
        redraws += 1


@dataclass(frozen=True)
class PrimeField:
    q: int

    def __post_init__(self):
        if not 3 <= self.q < MAX_MODULUS:
            raise ValueError(f"modulus {self.q} outside [3, 2**63)")
        if not is_prime(self.q):
            raise ValueError(f"{self.q} is not prime")

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(value % self.q, self.q)

    def __contains__(self, value: int) -> bool:
        return 0 <= value < self.q

    @property
    def bits(self) -> int:
        return self.q.bit_length()

    def random(self, rng: random.Random) -> "FieldElement":
        return FieldElement(rng.randrange(self.q), self.q)


@dataclass(frozen=True)
class FieldElement:
    value: int
    q: int

    def __post_init__(self):
        if not 0 <= self.value < self.q:
            raise ValueError(f"{self.value} is not reduced mod {self.q}")

    def _other(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.q != self.q:
                raise ValueError(f"mixed moduli {self.q} and {other.q}")
            return other.value
        if isinstance(other, int):
            return other % self.q
        return NotImplemented

    def _wrap(self, v: int) -> "FieldElement":
        return FieldElement(v % self.q, self.q)

    def __add__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.value - o)

    def __rsub__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(o - self.value)

    def __mul__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.value * o)

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.value)

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** -exponent
        return FieldElement(pow(self.value, exponent, self.q), self.q)

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse")
        return FieldElement(pow(self.value, self.q - 2, self.q), self.q)

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.q == other.q and self.value == other.value
        if isinstance(other, int):
            return self.value == other % self.q
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.q))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.q})"
