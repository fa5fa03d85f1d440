"""Exact arithmetic for weights of the form sum_j r_j * 2^(-j/q).

Cover weights at dimension s = a/b are sums of terms 2^(-s*m), all of which
live in the ring Z[1/2][u] with u = 2^(-1/q) and u^q = 1/2.  Since 2*x^q - 1
is irreducible over the rationals, {1, u, ..., u^(q-1)} is linearly
independent, so a weight is zero exactly when its reduced coefficient vector
is zero and every comparison can be decided exactly.

Comparisons use interval refinement: enclose u between dyadic rationals via
integer q-th roots, evaluate the polynomial in interval arithmetic, and
double the precision until the sign is resolved (termination is guaranteed
by the linear independence above).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from functools import lru_cache
from typing import Union

from .core import CgmtError

Rationalish = Union[int, Fraction]

_MAX_REFINE_BITS = 1 << 20


class Ordering(IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def _nth_root_floor(x: int, n: int) -> int:
    """floor(x ** (1/n)) for nonnegative integer x, by Newton iteration."""
    if x < 0:
        raise CgmtError("nth root of a negative integer")
    if x == 0:
        return 0
    if n == 1:
        return x
    r = 1 << ((x.bit_length() + n - 1) // n)
    while True:
        nr = ((n - 1) * r + x // r ** (n - 1)) // n
        if nr >= r:
            return r
        r = nr


@lru_cache(maxsize=None)
def _root_enclosure(q: int, bits: int) -> tuple[Fraction, Fraction]:
    """Dyadic enclosure lo <= 2^(-1/q) <= hi with denominator ~2^bits."""
    # t/2^bits <= 2^(1/q) < (t+1)/2^bits, then invert.
    t = _nth_root_floor(1 << (q * bits + 1), q)
    scale = 1 << bits
    return Fraction(scale, t + 1), Fraction(scale, t)


def _interval_value(
    coeffs: tuple[Fraction, ...], q: int, bits: int
) -> tuple[Fraction, Fraction]:
    u_lo, u_hi = _root_enclosure(q, bits)
    lo = hi = Fraction(0)
    p_lo, p_hi = Fraction(1), Fraction(1)
    for j, r in enumerate(coeffs):
        if j:
            p_lo *= u_lo
            p_hi *= u_hi
        if r > 0:
            lo += r * p_lo
            hi += r * p_hi
        elif r < 0:
            lo += r * p_hi
            hi += r * p_lo
    return lo, hi


@dataclass(frozen=True)
class AlgebraicWeight:
    """Canonical element of Q(2^(-1/q)): q minimal, coeffs[j] multiplies u^j."""

    q: int
    coeffs: tuple[Fraction, ...]

    @staticmethod
    def _make(q: int, raw: dict[int, Fraction]) -> "AlgebraicWeight":
        # Fold u^j for j >= q down via u^q = 1/2, drop zeros, minimize q.
        folded: dict[int, Fraction] = {}
        for j, r in raw.items():
            if not r:
                continue
            if j < 0:
                raise CgmtError(f"negative exponent index: {j}")
            k, j0 = divmod(j, q)
            folded[j0] = folded.get(j0, Fraction(0)) + r / (1 << k)
        folded = {j: r for j, r in folded.items() if r}
        if not folded:
            return AlgebraicWeight(1, (Fraction(0),))
        g = q
        for j in folded:
            g = math.gcd(g, j)
        q2 = q // g
        coeffs = [Fraction(0)] * q2
        for j, r in folded.items():
            coeffs[j // g] = r
        return AlgebraicWeight(q2, tuple(coeffs))

    def __post_init__(self) -> None:
        if self.q < 1 or len(self.coeffs) != self.q:
            raise CgmtError(f"malformed weight: q={self.q}, {len(self.coeffs)} coefficients")

    @staticmethod
    def zero() -> "AlgebraicWeight":
        return AlgebraicWeight(1, (Fraction(0),))

    @staticmethod
    def from_rational(r: Rationalish) -> "AlgebraicWeight":
        return AlgebraicWeight(1, (Fraction(r),))

    @staticmethod
    def two_power(exponent: Rationalish) -> "AlgebraicWeight":
        """The weight 2^exponent for a rational exponent."""
        e = Fraction(exponent)
        a, b = e.numerator, e.denominator
        if b == 1:
            return AlgebraicWeight.from_rational(
                Fraction(1 << a) if a >= 0 else Fraction(1, 1 << -a)
            )
        # 2^(a/b) = 2^k * u^j with u = 2^(-1/b): pick j = -a mod b.
        j = (-a) % b
        k = (a + j) // b
        r = Fraction(1 << k) if k >= 0 else Fraction(1, 1 << -k)
        return AlgebraicWeight._make(b, {j: r})

    # -- ring operations ----------------------------------------------------

    def _lift(self, q: int) -> dict[int, Fraction]:
        step = q // self.q
        return {j * step: r for j, r in enumerate(self.coeffs) if r}

    def __add__(self, other: "AlgebraicWeight") -> "AlgebraicWeight":
        if not isinstance(other, AlgebraicWeight):
            return NotImplemented
        q = self.q * other.q // math.gcd(self.q, other.q)
        raw = self._lift(q)
        for j, r in other._lift(q).items():
            raw[j] = raw.get(j, Fraction(0)) + r
        return AlgebraicWeight._make(q, raw)

    def __neg__(self) -> "AlgebraicWeight":
        return AlgebraicWeight(self.q, tuple(-r for r in self.coeffs))

    def __sub__(self, other: "AlgebraicWeight") -> "AlgebraicWeight":
        if not isinstance(other, AlgebraicWeight):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other: Union["AlgebraicWeight", Rationalish]) -> "AlgebraicWeight":
        if isinstance(other, (int, Fraction)):
            f = Fraction(other)
            return AlgebraicWeight._make(
                self.q, {j: r * f for j, r in enumerate(self.coeffs)}
            )
        if not isinstance(other, AlgebraicWeight):
            return NotImplemented
        q = self.q * other.q // math.gcd(self.q, other.q)
        a, b = self._lift(q), other._lift(q)
        raw: dict[int, Fraction] = {}
        for ja, ra in a.items():
            for jb, rb in b.items():
                j = ja + jb
                raw[j] = raw.get(j, Fraction(0)) + ra * rb
        return AlgebraicWeight._make(q, raw)

    __rmul__ = __mul__

    # -- comparisons ---------------------------------------------------------

    def sign(self) -> int:
        if all(r == 0 for r in self.coeffs):
            return 0
        if all(r >= 0 for r in self.coeffs):
            return 1
        if all(r <= 0 for r in self.coeffs):
            return -1
        if self.q == 1:
            return 1 if self.coeffs[0] > 0 else -1
        bits = 64
        while bits <= _MAX_REFINE_BITS:
            lo, hi = _interval_value(self.coeffs, self.q, bits)
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            bits *= 2
        raise CgmtError("sign refinement did not converge")

    def is_zero(self) -> bool:
        return self.q == 1 and self.coeffs[0] == 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AlgebraicWeight):
            return NotImplemented
        return self.q == other.q and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash((self.q, self.coeffs))

    def __lt__(self, other: "AlgebraicWeight") -> bool:
        return (self - other).sign() < 0

    def __le__(self, other: "AlgebraicWeight") -> bool:
        return (self - other).sign() <= 0

    def __gt__(self, other: "AlgebraicWeight") -> bool:
        return (self - other).sign() > 0

    def __ge__(self, other: "AlgebraicWeight") -> bool:
        return (self - other).sign() >= 0

    # -- rendering -----------------------------------------------------------

    def as_fraction(self) -> Fraction:
        if self.q != 1:
            raise CgmtError(f"weight is irrational (q={self.q})")
        return self.coeffs[0]

    def decimal(self, digits: int = 30) -> str:
        """Sign + integer part + exactly `digits` fractional digits, truncated."""
        sgn = self.sign()
        if sgn == 0:
            return "0." + "0" * digits
        mag = self if sgn > 0 else -self
        scale = 10 ** digits
        if mag.q == 1:
            n = mag.coeffs[0].numerator * scale // mag.coeffs[0].denominator
        else:
            bits = 128
            while True:
                lo, hi = _interval_value(mag.coeffs, mag.q, bits)
                nlo = lo.numerator * scale // lo.denominator
                nhi = hi.numerator * scale // hi.denominator
                if nlo == nhi:
                    n = nlo
                    break
                if bits > _MAX_REFINE_BITS:
                    raise CgmtError("decimal refinement did not converge")
                bits *= 2
        whole, frac = divmod(n, scale)
        body = f"{whole}.{frac:0{digits}d}"
        return body if sgn > 0 else "-" + body

    def __float__(self) -> float:
        if self.q == 1:
            return float(self.coeffs[0])
        lo, hi = _interval_value(self.coeffs, self.q, 128)
        return float((lo + hi) / 2)

    def __repr__(self) -> str:
        terms = [f"{r}*u{j}" for j, r in enumerate(self.coeffs) if r]
        inner = " + ".join(terms) if terms else "0"
        return f"AlgebraicWeight(q={self.q}: {inner})"

    # -- serialization --------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "q": self.q,
            "coeffs": [str(r) for r in self.coeffs],
            "decimal": self.decimal(30),
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "AlgebraicWeight":
        try:
            q = int(obj["q"])
            coeffs = tuple(Fraction(c) for c in obj["coeffs"])
        except (KeyError, ValueError, TypeError) as exc:
            raise CgmtError(f"malformed weight object: {obj!r}") from exc
        w = AlgebraicWeight(q, coeffs)
        canon = AlgebraicWeight._make(q, dict(enumerate(coeffs)))
        if canon != w:
            raise CgmtError("weight object is not in canonical form")
        return w


ZERO = AlgebraicWeight.zero()


def compare(a: AlgebraicWeight, b: AlgebraicWeight) -> Ordering:
    return Ordering((a - b).sign())


@lru_cache(maxsize=None)
def _scaled_power(num: int, den: int, length: int) -> AlgebraicWeight:
    return AlgebraicWeight.two_power(Fraction(-num * length, den))


def string_weight(s_num: int, s_den: int, length: int) -> AlgebraicWeight:
    """2^(-s * length) for s = s_num/s_den, cached."""
    return _scaled_power(s_num, s_den, length)
