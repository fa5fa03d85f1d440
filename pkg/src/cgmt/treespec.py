"""Tree-spec documents: JSON descriptions of closed sets, parsed to sources.

Three kinds are accepted:

  builtin    {"kind": "builtin", "name": "full" | "branch-left" |
              "branch-right" | "dyadic(p/q)"} with q a power of two
  explicit   {"kind": "explicit", "depth": D, "members": [...]}, the list
              prefix-closed as written; extendibility means reaching the
              truncation depth
  automatic  {"kind": "automatic", "transitions": [[t0, t1], ...],
              "accepting": [...], "start": 0}, acceptance prefix-closed
              (no non-accepting state may reach an accepting one);
              extendibility means the run state reaches a cycle that
              stays accepting

Builtins and automatic specs carry exact closed-form level counts, so
deep mass computations work without enumeration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

from .core import CgmtError, check_bits
from .trees import TreeSource, TruncatedTree, dyadic_tree, full_tree, rooted_tree


class ParseError(CgmtError):
    """Malformed tree-spec document."""


class NotPrefixClosed(ParseError):
    """A listed or accepted string whose parent is missing."""

    def __init__(self, witness: str):
        self.witness = witness
        super().__init__(f"not prefix-closed at {witness!r}")


BUILTIN_NAMES = ("full", "branch-left", "branch-right", "dyadic(p/q)")


@dataclass(frozen=True)
class TreeSpec:
    """Parsed spec document, still declarative; source() materializes it."""

    kind: str
    name: Optional[str] = None
    depth: Optional[int] = None
    members: Optional[tuple[str, ...]] = None
    transitions: Optional[tuple[tuple[int, int], ...]] = None
    accepting: Optional[frozenset[int]] = None
    start: int = 0

    def source(self) -> TreeSource:
        if self.kind == "builtin":
            return _builtin_source(self.name)
        if self.kind == "explicit":
            return _explicit_source(self.members, self.depth)
        return _automatic_source(self.transitions, self.accepting, self.start)


def _parse_dyadic(text: str) -> tuple[int, int]:
    try:
        c = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad dyadic constant {text!r}") from exc
    if not 0 < c <= 1:
        raise ParseError(f"dyadic constant must be in (0, 1], got {c}")
    if c.denominator & (c.denominator - 1):
        raise ParseError(f"dyadic constant needs a power-of-two denominator, got {c}")
    k = c.denominator.bit_length() - 1
    return c.numerator, k


def _builtin_source(name: Optional[str]) -> TreeSource:
    if name == "full":
        return full_tree()
    if name == "branch-left":
        return rooted_tree("0")
    if name == "branch-right":
        return rooted_tree("1")
    if name and name.startswith("dyadic(") and name.endswith(")"):
        p, k = _parse_dyadic(name[len("dyadic(") : -1])
        return dyadic_tree(p, k)
    raise ParseError(f"unknown builtin {name!r}; known: {', '.join(BUILTIN_NAMES)}")


def _explicit_source(members: Optional[Sequence[str]], depth: Optional[int]) -> TreeSource:
    if depth is None or members is None:
        raise ParseError("explicit spec needs depth and members")
    listed = set()
    for s in members:
        try:
            check_bits(s)
        except CgmtError as exc:
            raise ParseError(str(exc)) from exc
        if len(s) > depth:
            raise ParseError(f"member {s!r} longer than depth {depth}")
        listed.add(s)
    for s in sorted(listed, key=lambda t: (len(t), t)):
        if s and s[:-1] not in listed:
            raise NotPrefixClosed(s)
    return TruncatedTree.from_strings(listed, depth).to_source()


def _automatic_source(
    transitions: Optional[Sequence[Sequence[int]]],
    accepting: Optional[frozenset[int]],
    start: int,
) -> TreeSource:
    if transitions is None or accepting is None:
        raise ParseError("automatic spec needs transitions and accepting")
    states = len(transitions)
    if states == 0:
        raise ParseError("automatic spec needs at least one state")
    table = []
    for q, row in enumerate(transitions):
        if len(row) != 2:
            raise ParseError(f"state {q} needs exactly two transitions")
        for target in row:
            if not isinstance(target, int) or not 0 <= target < states:
                raise ParseError(f"state {q} transition target {target!r} out of range")
        table.append((row[0], row[1]))
    for q in accepting:
        if not 0 <= q < states:
            raise ParseError(f"accepting state {q} out of range")
    if not 0 <= start < states:
        raise ParseError(f"start state {start} out of range")

    _check_prefix_closed(table, accepting, start)
    live = _live_states(table, accepting)

    def run(sigma: str) -> int:
        q = start
        for bit in sigma:
            q = table[q][bit == "1"]
        return q

    def member(sigma: str) -> bool:
        check_bits(sigma)
        # prefix-closure is validated, so the final state decides
        return run(sigma) in accepting

    def extendible(sigma: str) -> bool:
        check_bits(sigma)
        return run(sigma) in live

    @lru_cache(maxsize=None)
    def paths(q: int, remaining: int) -> int:
        if q not in accepting:
            return 0
        if remaining == 0:
            return 1
        return paths(table[q][0], remaining - 1) + paths(table[q][1], remaining - 1)

    def count(tau: str, m: int) -> int:
        if m < len(tau) or not member(tau):
            return 0
        return paths(run(tau), m - len(tau))

    return TreeSource(member=member, extendible=extendible, extension_count=count, name="automatic")


def _check_prefix_closed(table, accepting, start) -> None:
    """Exact check: no reachable non-accepting state may reach an accepting one.

    Witnesses are built from shortest paths, so the reported string is a
    minimal violation.
    """
    via: dict[int, str] = {start: ""}
    frontier = [start]
    while frontier:
        nxt = []
        for q in frontier:
            for bit in (0, 1):
                r = table[q][bit]
                if r not in via:
                    via[r] = via[q] + "01"[bit]
                    nxt.append(r)
        frontier = nxt
    for q, stem in sorted(via.items(), key=lambda kv: (len(kv[1]), kv[1])):
        if q in accepting:
            continue
        tail = _shortest_path_to_accepting(table, accepting, q)
        if tail is not None:
            raise NotPrefixClosed(stem + tail)


def _shortest_path_to_accepting(table, accepting, src: int) -> Optional[str]:
    via: dict[int, str] = {src: ""}
    frontier = [src]
    while frontier:
        nxt = []
        for q in frontier:
            for bit in (0, 1):
                r = table[q][bit]
                if r in via:
                    continue
                via[r] = via[q] + "01"[bit]
                if r in accepting:
                    return via[r]
                nxt.append(r)
        frontier = nxt
    return None


def _live_states(table, accepting) -> frozenset[int]:
    """Greatest fixpoint: accepting states with an all-accepting infinite run."""
    live = set(accepting)
    changed = True
    while changed:
        changed = False
        for q in sorted(live):
            if table[q][0] not in live and table[q][1] not in live:
                live.discard(q)
                changed = True
    return frozenset(live)


def spec_from_obj(obj: dict) -> TreeSpec:
    if not isinstance(obj, dict):
        raise ParseError(f"spec document must be an object, got {type(obj).__name__}")
    kind = obj.get("kind")
    if kind == "builtin":
        name = obj.get("name")
        if not isinstance(name, str):
            raise ParseError("builtin spec needs a name")
        return TreeSpec(kind="builtin", name=name)
    if kind == "explicit":
        depth = obj.get("depth")
        members = obj.get("members")
        if not isinstance(depth, int) or depth < 0:
            raise ParseError(f"explicit spec needs a nonnegative integer depth, got {depth!r}")
        if not isinstance(members, list) or not all(isinstance(s, str) for s in members):
            raise ParseError("explicit spec needs a list of member strings")
        return TreeSpec(kind="explicit", depth=depth, members=tuple(members))
    if kind == "automatic":
        transitions = obj.get("transitions")
        accepting = obj.get("accepting")
        if not isinstance(transitions, list) or not all(isinstance(r, list) for r in transitions):
            raise ParseError("automatic spec needs a transition table")
        if not isinstance(accepting, list) or not all(isinstance(q, int) for q in accepting):
            raise ParseError("automatic spec needs an accepting state list")
        start = obj.get("start", 0)
        if not isinstance(start, int):
            raise ParseError(f"start must be an integer, got {start!r}")
        return TreeSpec(
            kind="automatic",
            transitions=tuple(tuple(r) for r in transitions),
            accepting=frozenset(accepting),
            start=start,
        )
    raise ParseError(f"unknown spec kind {kind!r}; expected builtin, explicit, or automatic")


def parse_spec_text(text: str) -> TreeSource:
    """Parse a spec document given as a JSON string (or a bare builtin name)."""
    stripped = text.strip()
    if not stripped.startswith("{"):
        return _builtin_source(stripped)
    try:
        obj = json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return spec_from_obj(obj).source()


def parse_spec(path: str) -> TreeSource:
    """Load and materialize a tree-spec document from a file path.

    As a convenience the path may instead be a bare builtin name (full,
    branch-left, branch-right, dyadic(p/q)); real files always win when
    they exist.
    """
    import os

    if not os.path.exists(path):
        try:
            return _builtin_source(path)
        except ParseError:
            pass
        raise ParseError(f"no such spec file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec_text(fh.read())
