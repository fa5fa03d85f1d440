"""Closed-set presentations and subset-code validation.

A closed subset of Cantor space is presented as a TreeSource: a pure
membership callback on its tree of finite prefixes, optionally with an
extendibility callback (does the node lie on an infinite path) and a
closed-form per-level count.  Finite truncations are stored as per-level
bitmaps.

Subset candidates inside an ambient tree are bit-string codes over the
length-lex enumeration.  validate_code checks the marking discipline:
marked strings form a prefix-closed subtree of the ambient tree with a
mark on every complete length level, and (for pruned codes) every marked
node whose children are in view has a marked child.  Restrictions of a
code to the strings compatible with a fixed node may lose whole levels;
they carry a restriction flag instead of failing validation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional

from .core import (
    BudgetExceeded,
    CgmtError,
    check_bits,
    block_length,
    block_of_prefix_length,
    compatible,
    index_of,
    iter_strings,
    string_at,
)


class NotExtendible(CgmtError):
    """A path construction hit a node with no extendible child."""


class CodeViolation(CgmtError):
    """A code prefix violates the marking discipline.

    condition: 1 prefix-closure, 2 ambient membership, 3 level coverage,
    4 pruned child condition.  witness: offending string (or block level
    rendered as a decimal string, for condition 3).
    """

    def __init__(self, condition: int, witness: str, detail: str):
        super().__init__(f"condition ({condition}) violated at {witness!r}: {detail}")
        self.condition = condition
        self.witness = witness


class Condition1Violation(CodeViolation):
    def __init__(self, witness: str):
        super().__init__(1, witness, "marked string with unmarked parent")


class Condition2Violation(CodeViolation):
    def __init__(self, witness: str):
        super().__init__(2, witness, "marked string outside the ambient tree")


class Condition3Violation(CodeViolation):
    def __init__(self, level: int):
        super().__init__(3, str(level), "complete level with no marked string")


class PrunedViolation(CodeViolation):
    def __init__(self, witness: str):
        super().__init__(4, witness, "marked string with both children in view, neither marked")


# -- tree sources -------------------------------------------------------------


@dataclass(frozen=True)
class TreeSource:
    """Oracle presentation of a tree of binary strings.

    member must be pure and prefix-closed (spot-checked only).  extendible,
    when present, answers whether the node has arbitrarily long extensions;
    operations that need it say so and fail without it.  extension_count,
    when present, gives the exact number of length-m members extending a
    string without enumeration (deep mass computations need it).
    """

    member: Callable[[str], bool]
    extendible: Optional[Callable[[str], bool]] = None
    extension_count: Optional[Callable[[str, int], int]] = None
    name: str = "tree"

    def require_extendible(self) -> Callable[[str], bool]:
        if self.extendible is None:
            raise NotExtendible(f"{self.name}: no extendibility callback")
        return self.extendible

    def level_count(self, m: int) -> Optional[int]:
        if self.extension_count is None:
            return None
        return self.extension_count("", m)


def full_tree() -> TreeSource:
    def count(tau: str, m: int) -> int:
        return 1 << (m - len(tau)) if m >= len(tau) else 0

    return TreeSource(
        member=lambda s: True,
        extendible=lambda s: True,
        extension_count=count,
        name="full",
    )


def rooted_tree(root: str) -> TreeSource:
    """Prefixes of root plus everything extending root."""
    check_bits(root)

    def member(s: str) -> bool:
        return compatible(s, root)

    def count(tau: str, m: int) -> int:
        if m < len(tau) or not member(tau):
            return 0
        base = max(len(tau), len(root))
        return 1 << (m - base) if m >= base else 1

    name = {"0": "branch-left", "1": "branch-right"}.get(root, f"rooted:{root}")
    return TreeSource(member=member, extendible=member, extension_count=count, name=name)


def dyadic_tree(p: int, k: int) -> TreeSource:
    """The first p length-k strings in lex order, full above, measure p/2^k."""
    if not (0 < p <= 1 << k):
        raise CgmtError(f"dyadic tree needs 0 < p <= 2^k, got p={p}, k={k}")

    def member(s: str) -> bool:
        if len(s) >= k:
            return int(s[:k], 2) < p
        # survives iff the leftmost length-k extension is selected
        return (int(s, 2) << (k - len(s)) < p) if s else True

    def count(tau: str, m: int) -> int:
        if m < len(tau) or not member(tau):
            return 0
        if len(tau) >= k:
            return 1 << (m - len(tau))
        if m >= k:
            # selected length-k ranks extending tau, full above
            lo = int(tau, 2) << (k - len(tau)) if tau else 0
            hi = min(lo + (1 << (k - len(tau))), p)
            return (hi - lo) << (m - k)
        # length-m members extending tau: ranks whose leftmost fill is selected
        lo = int(tau, 2) << (m - len(tau)) if tau else 0
        hi = min(lo + (1 << (m - len(tau))), -(-p // (1 << (k - m))))
        return max(hi - lo, 0)

    return TreeSource(member=member, extendible=member, extension_count=count, name=f"dyadic:{p}/2^{k}")


def levels_of_source(
    src: TreeSource, depth: int, budget: Optional[int] = None
) -> list[list[str]]:
    """Members per level 0..depth, found by child expansion from the root.

    Only children of discovered members are probed, so the result is
    prefix-closed even against a sloppy callback.
    """
    if not src.member(""):
        return [[] for _ in range(depth + 1)]
    levels = [[""]]
    seen = 1
    for _ in range(depth):
        nxt = []
        for s in levels[-1]:
            for c in (s + "0", s + "1"):
                if src.member(c):
                    nxt.append(c)
                    seen += 1
                    if budget is not None and seen > budget:
                        raise BudgetExceeded(f"{src.name}: more than {budget} nodes to depth {depth}")
        levels.append(nxt)
    return levels


# -- truncations ---------------------------------------------------------------


@dataclass(frozen=True)
class TruncatedTree:
    """Tree cut at a fixed depth, one bitmap per level (bit j = lex rank j)."""

    depth: int
    levels: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.levels) != self.depth + 1:
            raise CgmtError("level count does not match depth")
        for length, bits in enumerate(self.levels):
            if bits < 0 or bits >> (1 << length):
                raise CgmtError(f"level {length} bitmap out of range")
        for length in range(1, self.depth + 1):
            if self.levels[length] and _fold_children(self.levels[length], length) & ~self.levels[length - 1]:
                raise CgmtError(f"not prefix-closed at level {length}")

    @staticmethod
    def from_strings(strings: Iterable[str], depth: int) -> "TruncatedTree":
        """Collect the strings (cut at depth) and all their initial segments."""
        levels = [0] * (depth + 1)
        for s in strings:
            check_bits(s)
            s = s[:depth]
            for length in range(len(s) + 1):
                levels[length] |= 1 << _rank(s[:length])
        return TruncatedTree(depth, tuple(levels))

    @staticmethod
    def from_source(src: TreeSource, depth: int, budget: Optional[int] = None) -> "TruncatedTree":
        levels = levels_of_source(src, depth, budget)
        return TruncatedTree(depth, tuple(_bitmap(level) for level in levels))

    @staticmethod
    def full(depth: int) -> "TruncatedTree":
        return TruncatedTree(depth, tuple((1 << (1 << L)) - 1 for L in range(depth + 1)))

    def member(self, s: str) -> bool:
        check_bits(s)
        if len(s) > self.depth:
            return False
        return bool(self.levels[len(s)] >> _rank(s) & 1)

    def level_strings(self, length: int) -> list[str]:
        if not 0 <= length <= self.depth:
            return []
        return [format(j, f"0{length}b") if length else "" for j in _iter_bits(self.levels[length])]

    def count(self, length: int) -> int:
        if not 0 <= length <= self.depth:
            return 0
        return self.levels[length].bit_count()

    def is_empty(self) -> bool:
        return self.levels[0] == 0

    def to_source(self) -> TreeSource:
        """Membership to the truncation depth; extendible means reaching it."""
        pruned = prune_truncation(self)

        def count(tau: str, m: int) -> int:
            if m < len(tau):
                return 0
            return sum(1 for s in self.level_strings(m) if s.startswith(tau))

        return TreeSource(
            member=self.member,
            extendible=pruned.member,
            extension_count=count,
            name=f"truncated:{self.depth}",
        )


def _rank(s: str) -> int:
    return int(s, 2) if s else 0


def _bitmap(strings: Iterable[str]) -> int:
    bits = 0
    for s in strings:
        bits |= 1 << _rank(s)
    return bits


def _iter_bits(bits: int) -> Iterator[int]:
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


def _fold_children(child_bits: int, child_length: int) -> int:
    """Bitmap of parents having at least one set child."""
    width = 1 << child_length
    lsb_first = format(child_bits, f"0{width}b")[::-1]
    merged = [
        "1" if lsb_first[2 * j] == "1" or lsb_first[2 * j + 1] == "1" else "0"
        for j in range(width // 2)
    ]
    return int("".join(reversed(merged)) or "0", 2)


def prune_truncation(t: TruncatedTree) -> TruncatedTree:
    """Keep exactly the strings with an extension at the truncation depth."""
    levels = list(t.levels)
    for length in range(t.depth, 0, -1):
        levels[length - 1] &= _fold_children(levels[length], length)
    return TruncatedTree(t.depth, tuple(levels))


# -- subset codes ---------------------------------------------------------------


@dataclass(frozen=True)
class BlockMarking:
    """Marked strings grouped by length, through one complete block.

    block is the deepest complete level (-1 for the empty prefix, which
    carries no information at all).  A restriction marking may have empty
    levels; an ordinary validated marking may not.
    """

    block: int
    levels: tuple[frozenset[str], ...]
    restriction: bool = False

    def __post_init__(self) -> None:
        if len(self.levels) != self.block + 1:
            raise CgmtError("marking levels do not match block")

    def marked_at(self, length: int) -> frozenset[str]:
        if not 0 <= length <= self.block:
            return frozenset()
        return self.levels[length]

    def is_marked(self, s: str) -> bool:
        return s in self.marked_at(len(s))

    def restrict(self, tau: str) -> "BlockMarking":
        check_bits(tau)
        return BlockMarking(
            self.block,
            tuple(frozenset(s for s in level if compatible(s, tau)) for level in self.levels),
            restriction=True,
        )

    @staticmethod
    def empty() -> "BlockMarking":
        return BlockMarking(-1, ())


@dataclass(frozen=True)
class SubtreeCodePrefix:
    """A validated code prefix: bits[i] marks the i-th string in length-lex order."""

    bits: str
    validated_block: Optional[int]
    pruned: bool = False
    restriction: bool = False

    def length(self) -> int:
        return len(self.bits)

    def is_marked(self, s: str) -> bool:
        i = index_of(s)
        return i < len(self.bits) and self.bits[i] == "1"

    def marked_strings(self) -> Iterator[str]:
        for i, b in enumerate(self.bits):
            if b == "1":
                yield string_at(i)

    def marking(self, block: Optional[int] = None) -> BlockMarking:
        """Marked level sets through `block` (default: deepest complete block)."""
        if block is None:
            block = self.validated_block if self.validated_block is not None else -1
        if block < 0:
            return BlockMarking.empty()
        if self.validated_block is None or block > self.validated_block:
            raise CgmtError(f"block {block} not complete in a length-{len(self.bits)} prefix")
        levels: list[set[str]] = [set() for _ in range(block + 1)]
        for i in range(block_length(block)):
            if self.bits[i] == "1":
                s = string_at(i)
                levels[len(s)].add(s)
        return BlockMarking(
            block, tuple(frozenset(l) for l in levels), restriction=self.restriction
        )


def validate_code(nu: str, ambient: TreeSource, pruned: bool = False) -> SubtreeCodePrefix:
    """Check the marking discipline, reporting the first violated condition."""
    check_bits(nu)
    block = block_of_prefix_length(len(nu))
    marked = [b == "1" for b in nu]
    for i, m in enumerate(marked):
        if m and i:
            s = string_at(i)
            if not marked[index_of(s[:-1])]:
                raise Condition1Violation(s)
    for i, m in enumerate(marked):
        if m and not ambient.member(string_at(i)):
            raise Condition2Violation(string_at(i))
    if block is not None:
        for n in range(block + 1):
            start = block_length(n - 1) if n else 0
            if not any(marked[start : block_length(n)]):
                raise Condition3Violation(n)
    if pruned:
        for i, m in enumerate(marked):
            if not m:
                continue
            s = string_at(i)
            right = index_of(s + "1")
            if right < len(nu) and not (marked[right - 1] or marked[right]):
                raise PrunedViolation(s)
    return SubtreeCodePrefix(nu, block, pruned=pruned)


def code_of_levels(
    levels: Iterable[Iterable[str]], pruned: bool = False, restriction: bool = False
) -> SubtreeCodePrefix:
    """Assemble a code prefix from per-level marked sets (unchecked)."""
    rows = []
    for n, level in enumerate(levels):
        row = ["0"] * (1 << n)
        for s in level:
            row[_rank(s)] = "1"
        rows.append("".join(row))
    return SubtreeCodePrefix(
        "".join(rows), len(rows) - 1 if rows else None, pruned=pruned, restriction=restriction
    )


def code_of_tree(t: TruncatedTree) -> SubtreeCodePrefix:
    """The canonical code marking every member of the truncation."""
    return code_of_levels(t.level_strings(L) for L in range(t.depth + 1))


def restrict(z: SubtreeCodePrefix, tau: str) -> SubtreeCodePrefix:
    """Marks of z compatible with tau; flagged, since levels may empty out."""
    check_bits(tau)
    out = [
        b if b == "0" or compatible(string_at(i), tau) else "0"
        for i, b in enumerate(z.bits)
    ]
    return SubtreeCodePrefix("".join(out), z.validated_block, pruned=False, restriction=True)


# -- separable sequences ---------------------------------------------------------


@dataclass(frozen=True)
class PathGenerator:
    """Deterministic infinite binary sequence, queried by prefix length."""

    prefix_fn: Callable[[int], str]
    name: str = "path"

    def prefix(self, length: int) -> str:
        out = self.prefix_fn(length)
        if len(out) != length or (out and out.strip("01")):
            raise CgmtError(f"{self.name}: generator returned a bad prefix")
        return out


def constant_tail_path(stem: str, tail: str = "0") -> PathGenerator:
    check_bits(stem)
    check_bits(tail)

    def prefix_fn(length: int) -> str:
        if length <= len(stem):
            return stem[:length]
        return (stem + tail * (length - len(stem)))[:length]

    return PathGenerator(prefix_fn, name=f"{stem or 'root'}+{tail}*")


def leftmost_extension_path(src: TreeSource, stem: str) -> PathGenerator:
    ext = src.require_extendible()
    if not ext(stem):
        raise NotExtendible(f"{src.name}: {stem!r} is not extendible")
    grown = [stem]

    def prefix_fn(length: int) -> str:
        cur = grown[0]
        while len(cur) < length:
            if ext(cur + "0"):
                cur += "0"
            elif ext(cur + "1"):
                cur += "1"
            else:
                raise NotExtendible(f"{src.name}: dead end below {stem!r}")
        grown[0] = cur
        return cur[:length]

    return PathGenerator(prefix_fn, name=f"leftmost:{stem or 'root'}")


@dataclass(frozen=True)
class SeparableSequence:
    generators: tuple[PathGenerator, ...]


def leftmost_path(src: TreeSource, depth: int) -> str:
    ext = src.require_extendible()
    if not ext(""):
        raise NotExtendible(f"{src.name}: root is not extendible")
    return leftmost_extension_path(src, "").prefix(depth)


def separable_from_pruned(src: TreeSource, count: int, depth: int) -> SeparableSequence:
    """Leftmost-extension generators for the first `count` members in length-lex order."""
    gens: list[PathGenerator] = []
    if count:
        for s in iter_strings(depth):
            if src.member(s):
                gens.append(leftmost_extension_path(src, s))
                if len(gens) == count:
                    break
        else:
            raise NotExtendible(f"{src.name}: fewer than {count} members to depth {depth}")
    return SeparableSequence(tuple(gens))


def tree_from_separable(seq: SeparableSequence, depth: int) -> TruncatedTree:
    return TruncatedTree.from_strings((g.prefix(depth) for g in seq.generators), depth)
