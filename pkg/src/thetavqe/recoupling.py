"""SU(2) recoupling coefficients: Wigner 3j and 6j symbols.

All spin labels are handled as *twice* their value (``tj = 2*j``) so that
selection rules stay in exact integer arithmetic.  Plain ``int`` arguments
are always interpreted as twice-values; :class:`HalfInt` is accepted
wherever an ``int`` is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from typing import Union


@dataclass(frozen=True, order=True)
class HalfInt:
    """A half-integer stored as the integer ``twice = 2*value``."""

    twice: int

    @classmethod
    def of(cls, value: Union[int, float, str, Fraction]) -> "HalfInt":
        """Build from the *physical* value, e.g. ``HalfInt.of("3/2")``."""
        frac = Fraction(value)
        doubled = 2 * frac
        if doubled.denominator != 1:
            raise ValueError(f"{value!r} is not a multiple of 1/2")
        return cls(int(doubled))

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice, 2)

    @property
    def dim(self) -> int:
        """Dimension ``2j + 1`` of the spin-j irrep."""
        return self.twice + 1

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def __float__(self) -> float:
        return self.twice / 2

    def __str__(self) -> str:
        return str(self.twice // 2) if self.twice % 2 == 0 else f"{self.twice}/2"


SpinLike = Union[int, HalfInt]


def tw(x: SpinLike) -> int:
    """Twice-value of a spin argument."""
    return x.twice if isinstance(x, HalfInt) else int(x)


def triangle_ok(j1: SpinLike, j2: SpinLike, j3: SpinLike) -> bool:
    """Integer-sum and triangle conditions for a spin triple."""
    a, b, c = tw(j1), tw(j2), tw(j3)
    if min(a, b, c) < 0:
        return False
    return (a + b + c) % 2 == 0 and abs(a - b) <= c <= a + b


# Factorials are exact Python integers; the largest argument needed for
# spins up to j is 4*j + 2 (the (t+1)! of the 6j sum).
@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


def _delta_sq(a: int, b: int, c: int) -> Fraction:
    # triangle coefficient squared, arguments are twice-values
    return Fraction(
        _fact((a + b - c) // 2) * _fact((a - b + c) // 2) * _fact((-a + b + c) // 2),
        _fact((a + b + c) // 2 + 1),
    )


def _signed_sqrt(coeff: Fraction, radicand: Fraction) -> float:
    # coeff * sqrt(radicand) with a single rounding at the end
    if coeff == 0 or radicand == 0:
        return 0.0
    mag = math.sqrt(float(coeff * coeff * radicand))
    return mag if coeff > 0 else -mag


def _canonical_3j(args: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
    """Symmetry-reduced key and the sign relating it to ``args``."""
    j = args[:3]
    m = args[3:]
    phase = -1 if (sum(j) // 2) % 2 else 1
    best = None
    for perm in permutations(range(3)):
        odd = _perm_parity(perm)
        for flip in (False, True):
            mm = tuple(-m[p] if flip else m[p] for p in perm)
            key = tuple(j[p] for p in perm) + mm
            sign = phase if (odd ^ flip) else 1
            if best is None or key < best[0]:
                best = (key, sign)
    return best


def _perm_parity(perm: tuple[int, ...]) -> bool:
    inversions = sum(1 for i in range(3) for k in range(i + 1, 3) if perm[i] > perm[k])
    return inversions % 2 == 1


def wigner_3j(j1: SpinLike, j2: SpinLike, j3: SpinLike,
              m1: SpinLike, m2: SpinLike, m3: SpinLike) -> float:
    """Wigner 3j symbol; every argument is a twice-value.

    Raises ValueError when an ``m`` does not share the parity of its ``j``.
    """
    args = tuple(tw(x) for x in (j1, j2, j3, m1, m2, m3))
    for jj, mm in zip(args[:3], args[3:]):
        if jj < 0:
            raise ValueError(f"negative spin 2j={jj}")
        if (jj - mm) % 2:
            raise ValueError(f"m (2m={mm}) and j (2j={jj}) have different parity")
    if any(abs(mm) > jj for jj, mm in zip(args[:3], args[3:])):
        return 0.0
    if sum(args[3:]) != 0 or not triangle_ok(*args[:3]):
        return 0.0
    key, sign = _canonical_3j(args)
    return sign * _racah_3j(*key)


@lru_cache(maxsize=None)
def _racah_3j(a: int, b: int, c: int, ma: int, mb: int, mc: int) -> float:
    # Racah closed form; every factorial argument below is an integer
    total = Fraction(0)
    kmin = max(0, (b - c - ma) // 2, (a - c + mb) // 2)
    kmax = min((a + b - c) // 2, (a - ma) // 2, (b + mb) // 2)
    for k in range(kmin, kmax + 1):
        den = (
            _fact(k)
            * _fact((c - b + ma) // 2 + k)
            * _fact((c - a - mb) // 2 + k)
            * _fact((a + b - c) // 2 - k)
            * _fact((a - ma) // 2 - k)
            * _fact((b + mb) // 2 - k)
        )
        total += Fraction(-1 if k % 2 else 1, den)
    radicand = _delta_sq(a, b, c) * (
        _fact((a + ma) // 2) * _fact((a - ma) // 2)
        * _fact((b + mb) // 2) * _fact((b - mb) // 2)
        * _fact((c + mc) // 2) * _fact((c - mc) // 2)
    )
    if ((a - b - mc) // 2) % 2:
        total = -total
    return _signed_sqrt(total, radicand)


def _canonical_6j(args: tuple[int, ...]) -> tuple[int, ...]:
    top, bot = args[:3], args[3:]
    cands = []
    for perm in permutations(range(3)):
        t = [top[p] for p in perm]
        b = [bot[p] for p in perm]
        cands.append(tuple(t + b))
        # exchange upper and lower entries in two of the columns
        for i, k in ((0, 1), (0, 2), (1, 2)):
            t2, b2 = list(t), list(b)
            t2[i], b2[i] = b2[i], t2[i]
            t2[k], b2[k] = b2[k], t2[k]
            cands.append(tuple(t2 + b2))
    return min(cands)


def wigner_6j(a: SpinLike, b: SpinLike, c: SpinLike,
              d: SpinLike, e: SpinLike, f: SpinLike) -> float:
    """Wigner 6j symbol ``{a b c; d e f}`` from Racah's single-sum formula."""
    args = tuple(tw(x) for x in (a, b, c, d, e, f))
    A, B, C, D, E, F = args
    for triad in ((A, B, C), (A, E, F), (D, B, F), (D, E, C)):
        if not triangle_ok(*triad):
            return 0.0
    return _racah_6j(*_canonical_6j(args))


@lru_cache(maxsize=None)
def _racah_6j(a: int, b: int, c: int, d: int, e: int, f: int) -> float:
    s1 = (a + b + c) // 2
    s2 = (a + e + f) // 2
    s3 = (d + b + f) // 2
    s4 = (d + e + c) // 2
    p1 = (a + b + d + e) // 2
    p2 = (a + c + d + f) // 2
    p3 = (b + c + e + f) // 2
    total = Fraction(0)
    for t in range(max(s1, s2, s3, s4), min(p1, p2, p3) + 1):
        den = (
            _fact(t - s1) * _fact(t - s2) * _fact(t - s3) * _fact(t - s4)
            * _fact(p1 - t) * _fact(p2 - t) * _fact(p3 - t)
        )
        total += Fraction((-1) ** t * _fact(t + 1), den)
    radicand = _delta_sq(a, b, c) * _delta_sq(a, e, f) * _delta_sq(d, b, f) * _delta_sq(d, e, c)
    return _signed_sqrt(total, radicand)


def wigner_6j_from_3j(a: SpinLike, b: SpinLike, c: SpinLike,
                      d: SpinLike, e: SpinLike, f: SpinLike) -> float:
    """6j symbol as the explicit contraction of four 3j symbols.

    Slow (a sum over magnetic labels); kept as an independent route for
    cross-checking :func:`wigner_6j`.
    """
    j = [tw(x) for x in (a, b, c, d, e, f)]
    for triad in ((0, 1, 2), (0, 4, 5), (3, 1, 5), (3, 4, 2)):
        if not triangle_ok(*(j[k] for k in triad)):
            return 0.0
    total = 0.0
    for m1 in range(-j[0], j[0] + 1, 2):
        for m2 in range(-j[1], j[1] + 1, 2):
            m3 = -m1 - m2
            if abs(m3) > j[2]:
                continue
            for m5 in range(-j[4], j[4] + 1, 2):
                m6 = m5 - m1
                m4 = m6 - m2
                if abs(m6) > j[5] or abs(m4) > j[3] or m4 != m5 + m3:
                    continue
                w = (
                    wigner_3j(j[0], j[1], j[2], -m1, -m2, -m3)
                    * wigner_3j(j[0], j[4], j[5], m1, -m5, m6)
                    * wigner_3j(j[3], j[1], j[5], m4, m2, -m6)
                    * wigner_3j(j[3], j[4], j[2], -m4, m5, m3)
                )
                if w == 0.0:
                    continue
                expo = sum(jj - mm for jj, mm in zip(j, (m1, m2, m3, m4, m5, m6))) // 2
                total += -w if expo % 2 else w
    return total
