"""Effective refinement of tree codes under exact block-value verdicts.

The engine is interpolation: copy a committed code prefix, keep one
lexicographically least skeleton branch per committed node, then restore the
removed level-m branches one at a time in bit-reversed order.  Restoring a
branch can raise any block value by at most that branch's own weight, so the
values seen along the sweep are monotone in the sweep index and a binary
search per block finds the least index whose value reaches the target; the
chosen index is then re-verified exactly on a window of consecutive blocks
before anything is returned.

Everything else is built from that engine.  Thinning forces every length-n
branch down to its baseline weight by re-interpolating the fat ones, the
staged extraction pipeline alternates thinning with certificate snapshots
whose verdicts are recomputable by `htilde`, and the path extractors (Baire
intersection, dense monotone minimization, unit-dimension mass splitting)
share the same budgeted, deterministic search style.  All verdicts are exact
weight comparisons; floating point certifies nothing here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from .core import BudgetExceeded, CgmtError, check_bits, compatible
from .measure import MeasureBracket, PreconditionMeasure, htilde
from .trees import (
    BlockMarking,
    NotExtendible,
    SubtreeCodePrefix,
    TreeSource,
    code_of_levels,
)
from .weights import AlgebraicWeight, string_weight

DEFAULT_SEARCH_BUDGET = 1_000_000

_HALF = Fraction(1, 2)


class NoStableIndex(CgmtError):
    """No sweep index lands inside the bracket on every window block."""

    def __init__(self, window: int):
        super().__init__(
            f"no sweep index is stable across {window} extra blocks; enlarge the window"
        )
        self.window = window


class DensityViolated(CgmtError):
    """A density promise produced no qualifying extension within the cap."""

    def __init__(self, stage: int, cap: int):
        super().__init__(f"density promise failed at stage {stage} (cap {cap})")
        self.stage = stage
        self.cap = cap


class PromiseViolated(CgmtError):
    """The caller's exact-mass promise is inconsistent with the tree."""

    def __init__(self, cap: int):
        super().__init__(f"mass promise failed within level cap {cap}")
        self.cap = cap


def _as_weight(x) -> AlgebraicWeight:
    if isinstance(x, AlgebraicWeight):
        return x
    return AlgebraicWeight.from_rational(Fraction(x))


def _pw(s: Fraction, length: int) -> AlgebraicWeight:
    return string_weight(s.numerator, s.denominator, length)


# -- piecewise codes ----------------------------------------------------------------


class PiecewiseCode:
    """Subtree code kept explicit through a working depth, ambient-backed above.

    Levels 0..live_depth are explicit marked sets.  A longer string is marked
    iff its length-live_depth prefix is marked and the ambient source accepts
    it, so deep blocks can be materialized on demand without ever having been
    written down.  Instances are immutable by convention; refinement steps
    build new ones.
    """

    __slots__ = ("source", "live_depth", "levels", "restriction", "_tails")

    def __init__(
        self,
        source: TreeSource,
        live_depth: int,
        levels: Sequence[frozenset[str]],
        restriction: bool = False,
    ):
        levels = tuple(frozenset(level) for level in levels)
        if live_depth < 0 or len(levels) != live_depth + 1:
            raise CgmtError("explicit levels do not match the working depth")
        for length, level in enumerate(levels):
            for t in level:
                if len(t) != length:
                    raise CgmtError(f"mark {t!r} filed under length {length}")
                if length and t[:-1] not in levels[length - 1]:
                    raise CgmtError(f"marks are not prefix-closed at {t!r}")
                if not source.member(t):
                    raise CgmtError(f"mark {t!r} lies outside the ambient tree")
        self.source = source
        self.live_depth = live_depth
        self.levels = levels
        self.restriction = restriction
        self._tails: list[frozenset[str]] = [levels[live_depth]]

    @classmethod
    def root_of(cls, source: TreeSource) -> "PiecewiseCode":
        """The ambient tree's own code, explicit only at the root."""
        if not source.member(""):
            raise CgmtError(f"{source.name}: the ambient tree is empty")
        return cls(source, 0, (frozenset({""}),))

    def top(self) -> frozenset[str]:
        return self.levels[self.live_depth]

    def level(self, length: int) -> frozenset[str]:
        """Marked strings of one length, materializing the tail if needed."""
        if length < 0:
            raise CgmtError(f"negative length {length}")
        if length <= self.live_depth:
            return self.levels[length]
        member = self.source.member
        while len(self._tails) <= length - self.live_depth:
            last = self._tails[-1]
            self._tails.append(
                frozenset(c for t in last for c in (t + "0", t + "1") if member(c))
            )
        return self._tails[length - self.live_depth]

    def marked(self, sigma: str) -> bool:
        length = len(sigma)
        if length <= self.live_depth:
            return sigma in self.levels[length]
        return sigma[: self.live_depth] in self.levels[self.live_depth] and self.source.member(
            sigma
        )

    def marking(self, block: int) -> BlockMarking:
        levels = tuple(self.level(length) for length in range(block + 1))
        return BlockMarking(
            block, levels, restriction=self.restriction or not all(levels)
        )

    def restricted(self, tau: str) -> "PiecewiseCode":
        """Marks compatible with tau, as a code over the restricted ambient."""
        check_bits(tau)
        member = self.source.member
        src = TreeSource(
            member=lambda s, _t=tau: compatible(s, _t) and member(s),
            name=f"{self.source.name}|{tau or 'root'}",
        )
        levels = tuple(
            frozenset(t for t in level if compatible(t, tau)) for level in self.levels
        )
        return PiecewiseCode(src, self.live_depth, levels, restriction=True)

    def to_code_prefix(self, block: Optional[int] = None) -> SubtreeCodePrefix:
        if block is None:
            block = self.live_depth
        return code_of_levels(
            (self.level(length) for length in range(block + 1)),
            restriction=self.restriction,
        )

    def __repr__(self) -> str:
        return (
            f"PiecewiseCode(source={self.source.name!r}, live_depth={self.live_depth}, "
            f"top={len(self.top())})"
        )


def _as_code(z: Union[TreeSource, PiecewiseCode]) -> PiecewiseCode:
    if isinstance(z, PiecewiseCode):
        return z
    if isinstance(z, TreeSource):
        return PiecewiseCode.root_of(z)
    raise CgmtError(f"expected a tree source or piecewise code, got {type(z).__name__}")


def _resolve_prefix(zc: PiecewiseCode, nu, enforce_floor: bool) -> int:
    """The block number of the requested prefix, checked against the code."""
    if isinstance(nu, SubtreeCodePrefix):
        block = nu.validated_block
        if block is None:
            raise CgmtError("requested prefix carries no complete block")
        want = tuple(nu.marking().levels)
        got = tuple(zc.level(length) for length in range(block + 1))
        if want != got:
            raise CgmtError("requested prefix disagrees with the ambient code")
    else:
        block = int(nu)
        if block < 0:
            raise CgmtError(f"prefix block must be nonnegative, got {block}")
    if enforce_floor and block < zc.live_depth:
        raise CgmtError("interpolation must resume at or beyond the explicit working depth")
    return block


def _marking_within_budget(zc: PiecewiseCode, block: int, budget: int) -> BlockMarking:
    marking = zc.marking(block)
    size = sum(len(level) for level in marking.levels)
    if size > budget:
        raise BudgetExceeded(f"marking at block {block} holds {size} strings (budget {budget})")
    return marking


# -- interpolation ------------------------------------------------------------------


@dataclass(frozen=True)
class InterpolationResult:
    """A refined code plus the exact values that justified selecting it."""

    code: PiecewiseCode
    bracket: MeasureBracket
    top_level: int
    restored: int
    values: tuple[tuple[int, AlgebraicWeight], ...]


def interpolate_subset(
    z: Union[TreeSource, PiecewiseCode],
    nu,
    s,
    n: int,
    c,
    eps,
    window: int = 2,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> InterpolationResult:
    """Refine z above the prefix nu until block values land in [c, c+eps).

    The prefix is given as a block number (the code through that block is
    taken from z itself) or as an explicit code prefix that must agree with
    z.  Values are verified exactly at every block of the verification
    window; deeper levels of the result delegate to the ambient source.
    """
    zc = _as_code(z)
    s = Fraction(s)
    if s <= 0:
        raise PreconditionMeasure("interpolation needs s > 0")
    if n < 0:
        raise CgmtError(f"granularity must be nonnegative, got {n}")
    if window < 0:
        raise CgmtError(f"window must be nonnegative, got {window}")
    c_w = _as_weight(c)
    eps_w = _as_weight(eps)
    if eps_w.sign() <= 0:
        raise CgmtError("eps must be positive")
    if c_w.sign() < 0:
        raise CgmtError("the target lower bound must be nonnegative")
    n_prime = _resolve_prefix(zc, nu, enforce_floor=True)
    if n_prime < n:
        raise CgmtError("the prefix block must be at least the granularity")

    if c_w.is_zero():
        return _interpolate_above_zero(zc, n_prime, s, n, eps_w, window, budget)

    roots = zc.level(n_prime)
    if not roots:
        raise PreconditionMeasure("the ambient code is dead at the requested prefix")
    bound = c_w + eps_w
    top_cap = n_prime
    while not (_pw(s, top_cap) < eps_w and _pw(s, top_cap) * len(roots) < bound):
        top_cap += 1
    for m in range(n_prime, top_cap + 1):
        found = _probe(zc, n_prime, m, s, n, c_w, eps_w, window, budget)
        if found is not None:
            return found
    raise NoStableIndex(window)


def _interpolate_above_zero(
    zc: PiecewiseCode,
    n_prime: int,
    s: Fraction,
    n: int,
    eps_w: AlgebraicWeight,
    window: int,
    budget: int,
) -> InterpolationResult:
    # c = 0: either certify the values vanish, or lift the target to a
    # positive floor that the tree is known to clear and recurse.
    half = eps_w * _HALF
    spread = max(len(zc.level(n_prime)), 1)
    probe_block = n_prime
    while not (_pw(s, probe_block) * spread < half):
        probe_block += 1
    deep = probe_block + window
    value = htilde(_marking_within_budget(zc, deep, budget), s, n, want_witness=False).value
    if value.is_zero():
        marking = _marking_within_budget(zc, deep + window, budget)
        values = tuple(
            (
                k,
                htilde(
                    BlockMarking(k, marking.levels[: k + 1], restriction=True),
                    s,
                    n,
                    want_witness=False,
                ).value,
            )
            for k in range(deep, deep + window + 1)
        )
        zero = AlgebraicWeight.zero()
        bracket = MeasureBracket(zero, zero, deep + window, deep)
        return InterpolationResult(zc, bracket, deep, 0, values)
    floor = value if value < half else half
    return interpolate_subset(
        zc, n_prime, s, n, floor, eps_w - floor, window=window, budget=budget
    )


def _probe(
    zc: PiecewiseCode,
    n_prime: int,
    m: int,
    s: Fraction,
    n: int,
    c_w: AlgebraicWeight,
    eps_w: AlgebraicWeight,
    window: int,
    budget: int,
) -> Optional[InterpolationResult]:
    """Run the restore sweep with its top at level m; None if no index lands."""
    deep = m + window
    big = _marking_within_budget(zc, deep, budget)
    z_top = big.levels[m]
    if not z_top:
        raise PreconditionMeasure(f"the ambient tree dies before level {m}")
    skeleton = set()
    for rho in big.levels[n_prime]:
        branch = min((t for t in z_top if t.startswith(rho)), default=None)
        if branch is not None:
            skeleton.add(branch)
    removed = sorted(z_top - skeleton, key=lambda t: (int(t[::-1], 2) if t else 0, t))
    total = len(removed)
    base = big.levels[: n_prime + 1]

    tops: dict[int, frozenset[str]] = {}
    values: dict[tuple[int, int], AlgebraicWeight] = {}

    def top_at(i: int) -> frozenset[str]:
        got = tops.get(i)
        if got is None:
            got = tops[i] = frozenset(skeleton) | frozenset(removed[:i])
        return got

    def levels_for(top: frozenset[str], block: int) -> tuple[frozenset[str], ...]:
        levels = list(base)
        for length in range(n_prime + 1, m + 1):
            levels.append(frozenset(t[:length] for t in top))
        for length in range(m + 1, block + 1):
            levels.append(frozenset(t for t in big.levels[length] if t[:m] in top))
        return tuple(levels)

    def value_at(i: int, block: int) -> AlgebraicWeight:
        got = values.get((i, block))
        if got is None:
            marking = BlockMarking(block, levels_for(top_at(i), block), restriction=True)
            got = values[(i, block)] = htilde(marking, s, n, want_witness=False).value
        return got

    picks = []
    for block in range(m, deep + 1):
        # the full sweep is the ambient tree itself; below target means the
        # caller's lower-bound promise is false at this depth
        if value_at(total, block) < c_w:
            raise PreconditionMeasure(f"ambient block value below the target at block {block}")
        lo, hi = 0, total
        while lo < hi:
            mid = (lo + hi) // 2
            if value_at(mid, block) < c_w:
                lo = mid + 1
            else:
                hi = mid
        picks.append(lo)

    index = max(picks)
    window_values = tuple((block, value_at(index, block)) for block in range(m, deep + 1))
    bound = c_w + eps_w
    if not all(v < bound for _, v in window_values):
        return None
    code = PiecewiseCode(
        zc.source, m, levels_for(top_at(index), m), restriction=zc.restriction
    )
    upper_block, upper = max(window_values, key=lambda kv: (kv[1], kv[0]))
    bracket = MeasureBracket(c_w, upper, deep, upper_block)
    return InterpolationResult(code, bracket, m, index, window_values)


def approx_subset(
    src, s, n: int, c, eps, window: int = 2, budget: int = DEFAULT_SEARCH_BUDGET
) -> InterpolationResult:
    """Extract a subtree of src with block values pinned in [c, c+eps)."""
    return interpolate_subset(_as_code(src), n, s, n, c, eps, window=window, budget=budget)


def pruned_approx_subset(
    src: TreeSource, s, n: int, c, eps, window: int = 2, budget: int = DEFAULT_SEARCH_BUDGET
) -> InterpolationResult:
    """approx_subset over the pruned restriction of src.

    Every mark of the output lies on an infinite branch, so the result
    additionally satisfies the marked-child condition everywhere.
    """
    extendible = src.require_extendible()
    pruned = TreeSource(member=extendible, extendible=extendible, name=f"{src.name}:pruned")
    return interpolate_subset(
        PiecewiseCode.root_of(pruned), n, s, n, c, eps, window=window, budget=budget
    )


# -- thinning -----------------------------------------------------------------------


@dataclass(frozen=True)
class BranchReport:
    """Verdict for one length-n branch: kept as-is or re-interpolated."""

    branch: str
    kept: bool
    value: AlgebraicWeight
    block: int


@dataclass(frozen=True)
class ThinningCertificate:
    granularity: int
    baseline: AlgebraicWeight
    theta: AlgebraicWeight
    branches: tuple[BranchReport, ...]
    floor_granularity: int
    floor_target: AlgebraicWeight
    floor_value: AlgebraicWeight
    floor_block: int

    def replaced(self) -> tuple[str, ...]:
        return tuple(r.branch for r in self.branches if not r.kept)


def thin_test(
    z: Union[TreeSource, PiecewiseCode], s, n: int, tau: str, theta, depth: int
) -> bool:
    """Is the branch above tau already at its baseline weight, slack theta?"""
    check_bits(tau)
    if len(tau) != n:
        raise CgmtError(f"branch must have length {n}, got {tau!r}")
    zc = _as_code(z)
    value = htilde(zc.restricted(tau).marking(depth), s, n + 1, want_witness=False).value
    return value <= _pw(Fraction(s), n) + _as_weight(theta)


def thinify(
    z: Union[TreeSource, PiecewiseCode],
    s,
    n: int,
    nu,
    c,
    theta,
    window: int = 2,
    n0: int = 0,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> tuple[PiecewiseCode, ThinningCertificate]:
    """Force every length-n branch to baseline weight without losing the floor.

    Branches already within theta of 2^(-ns) at granularity n+1 are kept;
    fat branches are re-interpolated on their restriction targeting
    [2^(-ns), 2^(-ns)+theta).  The floor `c` at granularity n0 is re-verified
    exactly on the merged result.  Levels at or below the block named by nu
    are never touched.
    """
    zc = _as_code(z)
    s_frac = Fraction(s)
    if s_frac <= 0:
        raise PreconditionMeasure("thinning needs s > 0")
    floor = _resolve_prefix(zc, nu, enforce_floor=False)
    theta_w = _as_weight(theta)
    c_w = _as_weight(c)
    baseline = _pw(s_frac, n)
    threshold = baseline + theta_w

    current = zc
    reports = []
    for tau in sorted(zc.level(n)):
        start = max(floor, current.live_depth, n + 1)
        check_block = start + window
        restricted = current.restricted(tau)
        value = htilde(
            restricted.marking(check_block), s_frac, n + 1, want_witness=False
        ).value
        if value <= threshold:
            reports.append(BranchReport(tau, True, value, check_block))
            continue
        if theta_w.is_zero():
            # the target bracket [baseline, baseline) admits no value
            raise NoStableIndex(window)
        refined = interpolate_subset(
            restricted, start, s_frac, n + 1, baseline, theta_w, window=window, budget=budget
        )
        new_depth = refined.code.live_depth
        merged = tuple(
            frozenset(t for t in current.level(length) if not compatible(t, tau))
            | refined.code.level(length)
            for length in range(new_depth + 1)
        )
        current = PiecewiseCode(
            current.source, new_depth, merged, restriction=current.restriction
        )
        reports.append(
            BranchReport(tau, False, refined.bracket.upper, refined.bracket.upper_block)
        )

    deep = current.live_depth + window
    floor_value = htilde(current.marking(deep), s_frac, n0, want_witness=False).value
    if floor_value < c_w:
        raise PreconditionMeasure(f"thinning lost the certified floor at block {deep}")
    certificate = ThinningCertificate(
        granularity=n,
        baseline=baseline,
        theta=theta_w,
        branches=tuple(reports),
        floor_granularity=n0,
        floor_target=c_w,
        floor_value=floor_value,
        floor_block=deep,
    )
    return current, certificate


# -- staged extraction --------------------------------------------------------------


@dataclass(frozen=True)
class RefinementCertificate:
    """Snapshot of one pipeline stage, re-checkable by htilde alone.

    levels holds the marked strings per length out to the deepest checked
    block, so both verdicts can be recomputed from the certificate itself.
    """

    stage: int
    dimension: Fraction
    levels: tuple[tuple[str, ...], ...]
    lower_granularity: int
    lower_target: AlgebraicWeight
    lower_checks: tuple[tuple[int, AlgebraicWeight], ...]
    upper_granularity: int
    upper_target: AlgebraicWeight
    upper_witness: tuple[int, AlgebraicWeight]
    theta: AlgebraicWeight

    def marking(self, block: int) -> BlockMarking:
        if block >= len(self.levels):
            raise CgmtError("certificate records levels only to its checked depth")
        return BlockMarking(
            block, tuple(frozenset(level) for level in self.levels[: block + 1])
        )

    def verify(self) -> bool:
        """Recompute both verdicts from the recorded levels."""
        for block, value in self.lower_checks:
            got = htilde(
                self.marking(block), self.dimension, self.lower_granularity, want_witness=False
            ).value
            if got != value or got < self.lower_target:
                return False
        block, value = self.upper_witness
        got = htilde(
            self.marking(block), self.dimension, self.upper_granularity, want_witness=False
        ).value
        return got == value and got < self.upper_target


def besicovitch_extract(
    src: TreeSource,
    s,
    c,
    n0: int,
    stages: int,
    window: int = 2,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> tuple[PiecewiseCode, tuple[RefinementCertificate, ...]]:
    """Staged subset extraction with per-stage upper bounds closing on c.

    One base interpolation pins the granularity-n0 value just above c; each
    stage n then thins at granularity n with a slack budgeted so the stage
    n+1 value stays below c + 2^(-(n+1)).  Certificates are recorded for
    stages n0+1..stages, and blocks at or below a recorded witness are
    frozen for the rest of the run, so the final code reproduces every
    recorded upper verdict bit-exactly.
    """
    extendible = src.require_extendible()
    ambient = TreeSource(member=extendible, extendible=extendible, name=f"{src.name}:pruned")
    if stages <= n0:
        raise CgmtError("need at least one stage beyond the base granularity")
    if n0 < 0:
        raise CgmtError(f"base granularity must be nonnegative, got {n0}")
    s_frac = Fraction(s)
    c_w = _as_weight(c)
    margin = AlgebraicWeight.two_power(-stages)  # the final-stage gap to c

    code = PiecewiseCode.root_of(ambient)
    try:
        base = interpolate_subset(
            code, n0, s_frac, n0, c_w, margin * _HALF, window=window, budget=budget
        )
    except BudgetExceeded as exc:
        raise BudgetExceeded(f"stage {n0}: {exc}") from exc
    current = base.code
    committed = base.top_level

    certificates = []
    for n in range(n0, stages):
        branch_count = max(len(current.level(n)), 1)
        theta = margin * Fraction(1, (1 << (n - n0 + 3)) * branch_count)
        try:
            current, thin_cert = thinify(
                current, s_frac, n, committed, c_w, theta, window=window, n0=n0, budget=budget
            )
        except BudgetExceeded as exc:
            raise BudgetExceeded(f"stage {n}: {exc}") from exc
        witness_block = current.live_depth
        deep = thin_cert.floor_block
        upper = htilde(
            current.marking(witness_block), s_frac, n + 1, want_witness=False
        ).value
        target = c_w + AlgebraicWeight.two_power(-(n + 1))
        if not upper < target:
            raise CgmtError(f"stage {n + 1} upper verdict failed to close")
        certificates.append(
            RefinementCertificate(
                stage=n + 1,
                dimension=s_frac,
                levels=tuple(tuple(sorted(current.level(length))) for length in range(deep + 1)),
                lower_granularity=n0,
                lower_target=c_w,
                lower_checks=((deep, thin_cert.floor_value),),
                upper_granularity=n + 1,
                upper_target=target,
                upper_witness=(witness_block, upper),
                theta=theta,
            )
        )
        committed = max(committed, witness_block)
    return current, tuple(certificates)


# -- category and path extraction ---------------------------------------------------


@dataclass(frozen=True)
class MonotoneFn:
    """Pure callback, non-increasing under extension (spot-checked)."""

    eval: Callable[[str], AlgebraicWeight]
    name: str = "f"


@dataclass(frozen=True)
class DensityTarget:
    """Infimum target alpha with a strictly decreasing tolerance schedule."""

    alpha: AlgebraicWeight
    schedule: tuple[AlgebraicWeight, ...]

    def __post_init__(self) -> None:
        for eps in self.schedule:
            if eps.sign() <= 0:
                raise CgmtError("tolerances must be positive")
        for a, b in zip(self.schedule, self.schedule[1:]):
            if not b < a:
                raise CgmtError("tolerances must decrease strictly")

    @staticmethod
    def geometric(alpha, stages: int) -> "DensityTarget":
        return DensityTarget(
            _as_weight(alpha),
            tuple(AlgebraicWeight.two_power(-j) for j in range(stages)),
        )


@dataclass(frozen=True)
class DensityCertificate:
    alpha: AlgebraicWeight
    records: tuple[tuple[int, AlgebraicWeight, str, AlgebraicWeight], ...]


def _extensions(stem: str, extendible: Callable[[str], bool], include_stem: bool):
    """Extendible extensions of stem in length-lex order."""
    if include_stem:
        yield stem
    frontier = [stem]
    while frontier:
        grown = []
        for parent in frontier:
            for child in (parent + "0", parent + "1"):
                if extendible(child):
                    yield child
                    grown.append(child)
        frontier = grown


def _leftmost_from(stem: str, extendible: Callable[[str], bool], depth: int) -> str:
    path = stem
    while len(path) < depth:
        if extendible(path + "0"):
            path += "0"
        elif extendible(path + "1"):
            path += "1"
        else:
            raise NotExtendible(f"dead end at {path!r}")
    return path


def baire_intersect(
    src: TreeSource,
    opens: Sequence[Callable[[str], bool]],
    start: str,
    depth: int,
    cap: int = DEFAULT_SEARCH_BUDGET,
) -> str:
    """A single extendible string meeting every open set, stage by stage.

    Each open is an upward-closed membership callback.  Stages that already
    hold at the current stem cost nothing; otherwise proper extensions are
    searched in length-lex order, testing at most cap candidates.
    """
    check_bits(start)
    extendible = src.require_extendible()
    if not extendible(start):
        raise NotExtendible(f"start {start!r} is not on an infinite branch")
    stem = start
    for stage, accepts in enumerate(opens):
        if accepts(stem):
            continue
        tested = 0
        found = None
        for candidate in _extensions(stem, extendible, include_stem=False):
            tested += 1
            if tested > cap:
                raise DensityViolated(stage, cap)
            if accepts(candidate):
                found = candidate
                break
        if found is None:
            raise DensityViolated(stage, cap)
        stem = found
    if len(stem) > depth:
        raise CgmtError(f"constructed stem is longer than the requested depth {depth}")
    return _leftmost_from(stem, extendible, depth)


def dense_monotone_min(
    src: TreeSource,
    f: MonotoneFn,
    target: DensityTarget,
    density: Optional[Callable[[str, AlgebraicWeight], str]] = None,
    depth: int = 16,
    cap: int = DEFAULT_SEARCH_BUDGET,
) -> tuple[str, DensityCertificate]:
    """Drive f below alpha + eps_n along one extendible path.

    With a density callback, each stage asks it for an extension and then
    verifies the answer exactly; without one, extensions are searched in
    length-lex order under the cap.  Records one (stage, eps, prefix, value)
    row per stage.
    """
    extendible = src.require_extendible()
    if not extendible(""):
        raise NotExtendible(f"{src.name}: no infinite branch at the root")
    stem = ""
    previous: Optional[AlgebraicWeight] = None
    records = []
    for stage, eps in enumerate(target.schedule):
        bound = target.alpha + eps
        found = None
        if density is not None:
            answer = density(stem, eps)
            if (
                isinstance(answer, str)
                and answer.startswith(stem)
                and extendible(answer)
            ):
                value = _as_weight(f.eval(answer))
                if value < bound:
                    found = (answer, value)
            if found is None:
                raise DensityViolated(stage, 0)
        else:
            tested = 0
            for candidate in _extensions(stem, extendible, include_stem=True):
                tested += 1
                if tested > cap:
                    raise DensityViolated(stage, cap)
                value = _as_weight(f.eval(candidate))
                if value < bound:
                    found = (candidate, value)
                    break
            if found is None:
                raise DensityViolated(stage, cap)
        stem, value = found
        if previous is not None and not value <= previous:
            raise CgmtError("callback value increased along the chain; not monotone")
        previous = value
        records.append((stage, eps, stem, value))
    path = _leftmost_from(stem, extendible, depth)
    return path, DensityCertificate(alpha=target.alpha, records=tuple(records))


def lebesgue_path(
    src: TreeSource,
    c,
    depth: int,
    cap: Optional[int] = None,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> str:
    """A path through a tree promised to have unit-dimension mass exactly c.

    Each bit is fixed by finding a level m at which one child cylinder plus
    everything outside the current cylinder weighs less than c; the path
    takes the other child.  Level weights come from the source's closed-form
    extension counts when available, else from budgeted enumeration.
    """
    c = Fraction(c)
    if not 0 < c <= 1:
        raise CgmtError(f"the mass promise must lie in (0, 1], got {c}")
    if cap is None:
        cap = depth + 8
    counts = src.extension_count
    if counts is None:
        counts = _enumerated_counts(src, budget)
    if not src.member(""):
        raise PromiseViolated(cap)

    path = ""
    for k in range(depth):
        step = None
        for m in range(k + 1, cap + 1):
            scale = Fraction(1, 1 << m)
            outside = (counts("", m) - counts(path, m)) * scale
            for i in (0, 1):
                if counts(path + str(i), m) * scale + outside < c:
                    step = (m, str(1 - i))
                    break
            if step is not None:
                break
        if step is None:
            raise PromiseViolated(cap)
        m, bit = step
        path += bit
        if counts(path, m) == 0:
            # the qualifying side carries no mass, so the promise was false
            raise PromiseViolated(cap)
    return path


def _enumerated_counts(src: TreeSource, budget: int) -> Callable[[str, int], int]:
    levels: list[list[str]] = [[""]] if src.member("") else [[]]
    total = 1

    def counts(tau: str, m: int) -> int:
        nonlocal total
        while len(levels) <= m:
            grown = [
                c for t in levels[-1] for c in (t + "0", t + "1") if src.member(c)
            ]
            total += len(grown)
            if total > budget:
                raise BudgetExceeded(
                    f"level enumeration passed {budget} strings; provide extension counts"
                )
            levels.append(grown)
        if m < len(tau):
            return 0
        return sum(1 for t in levels[m] if t.startswith(tau))

    return counts
