"""Exact 2^{-n}-premeasures of marked subsets via min-weight prefix covers.

The value of a marking at dimension s and granularity n is the cheapest way
to cover its deepest marked level by cylinders of length between n and the
block depth, where a cylinder of length L costs 2^(-s*L).  Below length n
covering is forced to split, so the value decomposes as a sum over length-n
nodes; from length n up it is a min/sum dynamic program.  Short prefixes
(block below n) carry no usable information and get the full level-n cover
price 2^((1-s)*n) by convention.

htilde is the production implementation; htilde_bruteforce enumerates every
cover literally ("cover here or delegate to both children") and exists only
to check htilde against an independent route.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

from .core import BudgetExceeded, CgmtError
from .trees import (
    BlockMarking,
    SubtreeCodePrefix,
    TreeSource,
    TruncatedTree,
    levels_of_source,
)
from .weights import AlgebraicWeight, string_weight

Markable = Union[BlockMarking, SubtreeCodePrefix]

CASE2_WITNESS_CAP = 12
DEFAULT_ENUM_BUDGET = 500_000


class DepthTooLarge(CgmtError):
    """Brute-force enumeration refused: the block is too deep."""


class NotACover(CgmtError):
    def __init__(self, witness: str):
        super().__init__(f"string {witness!r} has no prefix in the cover")
        self.witness = witness


class LengthViolation(CgmtError):
    def __init__(self, witness: str):
        super().__init__(f"cover string {witness!r} is shorter than the granularity")
        self.witness = witness


class PreconditionMeasure(CgmtError):
    """A measure-side precondition (certified lower bound) failed."""


@dataclass(frozen=True)
class CoverSet:
    """Finite set of covering strings with lengths in [n, m]."""

    strings: frozenset[str]
    n: int
    m: int

    def __post_init__(self) -> None:
        for s in self.strings:
            if not self.n <= len(s) <= self.m:
                raise CgmtError(f"cover string {s!r} outside lengths [{self.n}, {self.m}]")


@dataclass(frozen=True)
class MeasureValue:
    value: AlgebraicWeight
    witness: Optional[CoverSet]
    at_block: int


@dataclass(frozen=True)
class MeasureBracket:
    """Two-sided verdict: lower certified at lower_block, upper witnessed at upper_block."""

    lower: AlgebraicWeight
    upper: AlgebraicWeight
    lower_block: int
    upper_block: int

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise CgmtError("bracket is empty: lower > upper")


def _exponent(s) -> Fraction:
    s = Fraction(s)
    if s < 0:
        raise CgmtError(f"dimension must be nonnegative, got {s}")
    return s


def _weight(x) -> AlgebraicWeight:
    if isinstance(x, AlgebraicWeight):
        return x
    return AlgebraicWeight.from_rational(Fraction(x))


def _as_marking(nu: Markable) -> BlockMarking:
    if isinstance(nu, BlockMarking):
        return nu
    if isinstance(nu, SubtreeCodePrefix):
        return nu.marking()
    raise CgmtError(f"not a marking: {nu!r}")


def _w(s: Fraction, length: int) -> AlgebraicWeight:
    return string_weight(s.numerator, s.denominator, length)


def cover_weight(strings: Iterable[str], s) -> AlgebraicWeight:
    """Total s-weight sum of 2^(-s*|sigma|) over the given strings."""
    s = _exponent(s)
    by_length: dict[int, int] = {}
    for sigma in strings:
        by_length[len(sigma)] = by_length.get(len(sigma), 0) + 1
    total = AlgebraicWeight.zero()
    for length, count in sorted(by_length.items()):
        total = total + _w(s, length) * count
    return total


def _case2(s: Fraction, n: int, at_block: int) -> MeasureValue:
    value = AlgebraicWeight.two_power((1 - s) * n)
    witness = None
    if n <= CASE2_WITNESS_CAP:
        level = frozenset(format(v, f"0{n}b") if n else "" for v in range(1 << n))
        witness = CoverSet(level, n, n)
    return MeasureValue(value, witness, at_block)


def htilde(nu: Markable, s, n: int, want_witness: bool = True) -> MeasureValue:
    """Exact min-weight cover value of the marking at dimension s, granularity n."""
    marking = _as_marking(nu)
    s = _exponent(s)
    if n < 0:
        raise CgmtError(f"granularity must be nonnegative, got {n}")
    m = marking.block
    if m < n:
        return _case2(s, n, m)
    top = marking.marked_at(m)
    if not top:
        return MeasureValue(AlgebraicWeight.zero(), CoverSet(frozenset(), n, m), m)

    live: list[set[str]] = [set() for _ in range(m + 1)]
    live[m] = set(top)
    for length in range(m, 0, -1):
        live[length - 1] = {sigma[:-1] for sigma in live[length]}

    value_at: dict[str, AlgebraicWeight] = {sigma: _w(s, m) for sigma in live[m]}
    take_here: dict[str, bool] = {}
    for length in range(m - 1, -1, -1):
        here = _w(s, length)
        for sigma in live[length]:
            total = None
            for child in (sigma + "0", sigma + "1"):
                w = value_at.get(child)
                if w is not None:
                    total = w if total is None else total + w
            # live nodes below the top always have a live child
            if length >= n and here <= total:
                value_at[sigma] = here
                take_here[sigma] = True
            else:
                value_at[sigma] = total
                take_here[sigma] = False

    witness = None
    if want_witness:
        chosen: list[str] = []
        stack = [""]
        while stack:
            sigma = stack.pop()
            if len(sigma) == m or take_here[sigma]:
                chosen.append(sigma)
            else:
                for child in (sigma + "0", sigma + "1"):
                    if child in value_at:
                        stack.append(child)
        witness = CoverSet(frozenset(chosen), n, m)
    return MeasureValue(value_at[""], witness, m)


# -- independent brute-force oracle ---------------------------------------------


def count_covers(nu: Markable, n: int) -> int:
    """Number of covers the literal enumeration would visit."""
    marking = _as_marking(nu)
    m = marking.block
    if m < n or not marking.marked_at(m):
        return 1
    live = _live_sets(marking)

    def count(sigma: str) -> int:
        if len(sigma) == m:
            return 1
        total = 1
        for child in (sigma + "0", sigma + "1"):
            if child in live[len(sigma) + 1]:
                total *= count(child)
        return total + (1 if len(sigma) >= n else 0)

    return count("")


def _live_sets(marking: BlockMarking) -> list[set[str]]:
    m = marking.block
    live: list[set[str]] = [set() for _ in range(m + 1)]
    live[m] = set(marking.marked_at(m))
    for length in range(m, 0, -1):
        live[length - 1] = {sigma[:-1] for sigma in live[length]}
    return live


def htilde_bruteforce(
    nu: Markable, s, n: int, budget: int = DEFAULT_ENUM_BUDGET
) -> MeasureValue:
    """Literal minimum over every cover; independent of the dynamic program."""
    marking = _as_marking(nu)
    s = _exponent(s)
    m = marking.block
    if m > 7:
        raise DepthTooLarge(f"brute force limited to block 7, got {m}")
    if m < n:
        if n > CASE2_WITNESS_CAP:
            raise DepthTooLarge(f"short-prefix enumeration limited to n <= {CASE2_WITNESS_CAP}")
        level = [format(v, f"0{n}b") if n else "" for v in range(1 << n)]
        total = AlgebraicWeight.zero()
        for _ in level:
            total = total + _w(s, n)
        return MeasureValue(total, CoverSet(frozenset(level), n, n), m)
    top = marking.marked_at(m)
    if not top:
        return MeasureValue(AlgebraicWeight.zero(), CoverSet(frozenset(), n, m), m)
    if count_covers(marking, n) > budget:
        raise BudgetExceeded(f"more than {budget} covers to enumerate")
    live = _live_sets(marking)

    def covers(sigma: str):
        if len(sigma) == m:
            yield (sigma,)
            return
        if len(sigma) >= n:
            yield (sigma,)
        kids = [c for c in (sigma + "0", sigma + "1") if c in live[len(sigma) + 1]]
        if len(kids) == 1:
            yield from covers(kids[0])
        else:
            for a in covers(kids[0]):
                for b in covers(kids[1]):
                    yield a + b

    best = None
    best_weight = None
    for cover in covers(""):
        w = cover_weight(cover, s)
        if best_weight is None or w < best_weight:
            best, best_weight = cover, w
    return MeasureValue(best_weight, CoverSet(frozenset(best), n, m), m)


# -- cover checking ---------------------------------------------------------------


def verify_delta_cover(cover: CoverSet, t: TruncatedTree, n: int, s) -> AlgebraicWeight:
    """Check the cover is a 2^{-n}-cover of the truncation's deepest level."""
    for sigma in sorted(cover.strings):
        if len(sigma) < n:
            raise LengthViolation(sigma)
    by_length: dict[int, set[str]] = {}
    for sigma in cover.strings:
        by_length.setdefault(len(sigma), set()).add(sigma)
    lengths = sorted(by_length)
    for deep in t.level_strings(t.depth):
        if not any(deep[:length] in by_length[length] for length in lengths if length <= len(deep)):
            raise NotACover(deep)
    return cover_weight(cover.strings, s)


def verify_marking_cover(cover: CoverSet, nu: Markable, n: int, s) -> AlgebraicWeight:
    """Check the cover reaches every deepest-level mark of the marking."""
    marking = _as_marking(nu)
    for sigma in sorted(cover.strings):
        if len(sigma) < n:
            raise LengthViolation(sigma)
    strings = cover.strings
    for deep in sorted(marking.marked_at(marking.block)):
        if not any(deep[:length] in strings for length in range(n, len(deep) + 1)):
            raise NotACover(deep)
    return cover_weight(strings, s)


# -- sequences and comparison -------------------------------------------------------


def marking_of_source(src: TreeSource, block: int, budget: Optional[int] = None) -> BlockMarking:
    """Canonical marking of the tree itself through the given block."""
    levels = levels_of_source(src, block, budget)
    return BlockMarking(
        block,
        tuple(frozenset(level) for level in levels),
        restriction=any(not level for level in levels),
    )


def measure_sequence(src: TreeSource, s, n: int, blocks: list[int]) -> list[MeasureValue]:
    """htilde of the tree's own code at each requested block (blocks increasing)."""
    if list(blocks) != sorted(set(blocks)):
        raise CgmtError("blocks must be strictly increasing")
    if not blocks:
        return []
    levels = levels_of_source(src, max(blocks), budget=None)
    out = []
    for b in blocks:
        marking = BlockMarking(
            b,
            tuple(frozenset(level) for level in levels[: b + 1]),
            restriction=any(not level for level in levels[: b + 1]),
        )
        out.append(htilde(marking, s, n))
    return out


@dataclass(frozen=True)
class ComparisonReport:
    verified: bool
    stable_block: Optional[int]
    horizon: int
    eps: AlgebraicWeight
    values_left: tuple[AlgebraicWeight, ...]
    values_right: tuple[AlgebraicWeight, ...]


def _block_values(z, s, n: int, horizon: int) -> list[AlgebraicWeight]:
    if isinstance(z, TreeSource):
        return [v.value for v in measure_sequence(z, s, n, list(range(horizon + 1)))]
    if isinstance(z, SubtreeCodePrefix):
        if z.validated_block is None or z.validated_block < horizon:
            raise CgmtError(f"horizon {horizon} beyond available block {z.validated_block}")
        return [htilde(z.marking(b), s, n, want_witness=False).value for b in range(horizon + 1)]
    raise CgmtError(f"not a depth-indexed code: {z!r}")


def compare_measures(z_left, z_right, s, n: int, eps, horizon: int) -> ComparisonReport:
    """Find one left block whose value undercuts every right block within eps."""
    eps_w = _weight(eps)
    left = _block_values(z_left, s, n, horizon)
    right = _block_values(z_right, s, n, horizon)
    bar = min(right)
    stable = None
    for k, v in enumerate(left):
        if v < bar + eps_w:
            stable = k
            break
    return ComparisonReport(
        verified=stable is not None,
        stable_block=stable,
        horizon=horizon,
        eps=eps_w,
        values_left=tuple(left),
        values_right=tuple(right),
    )
