"""Tests for the interpolation engine and the staged pipelines.

Expected numbers fall in three groups: closed forms checked by hand
(single-cover weights, unit-dimension totals), values frozen from oracle
runs that were verified against independent DP recomputation, and pure
error-path assertions.
"""

from fractions import Fraction

import pytest

from cgmt.core import BudgetExceeded, CgmtError
from cgmt.construct import (
    DensityTarget,
    DensityViolated,
    MonotoneFn,
    NoStableIndex,
    PiecewiseCode,
    PromiseViolated,
    approx_subset,
    baire_intersect,
    besicovitch_extract,
    dense_monotone_min,
    interpolate_subset,
    lebesgue_path,
    pruned_approx_subset,
    thin_test,
    thinify,
)
from cgmt.measure import PreconditionMeasure, htilde
from cgmt.trees import (
    NotExtendible,
    TreeSource,
    TruncatedTree,
    dyadic_tree,
    full_tree,
    prune_truncation,
    rooted_tree,
    validate_code,
)
from cgmt.weights import AlgebraicWeight

HALF = Fraction(1, 2)


def W(x) -> AlgebraicWeight:
    return AlgebraicWeight.from_rational(Fraction(x))


def exactly(value: AlgebraicWeight, expected) -> bool:
    return (value - W(expected)).is_zero()


def grown_source(t: TruncatedTree) -> TreeSource:
    """Extend a truncation to an infinite tree: full growth above each leaf."""
    pruned = prune_truncation(t)
    d = t.depth

    def member(s: str) -> bool:
        return t.member(s) if len(s) <= d else t.member(s[:d])

    def extendible(s: str) -> bool:
        return pruned.member(s) if len(s) <= d else t.member(s[:d])

    def count(tau: str, m: int) -> int:
        if m <= d:
            return sum(1 for x in t.level_strings(m) if x.startswith(tau))
        if len(tau) >= d:
            return (1 << (m - len(tau))) if member(tau) else 0
        leaves = sum(1 for x in t.level_strings(d) if x.startswith(tau))
        return leaves << (m - d)

    return TreeSource(member=member, extendible=extendible, extension_count=count, name="grown")


def counting_source(base: TreeSource, forbid_counts: bool = True) -> tuple[TreeSource, dict]:
    calls = {"member": 0, "extendible": 0}

    def member(s: str) -> bool:
        calls["member"] += 1
        return base.member(s)

    def extendible(s: str) -> bool:
        calls["extendible"] += 1
        return base.require_extendible()(s)

    def no_counts(tau: str, m: int) -> int:
        raise AssertionError("extension_count must stay untouched here")

    return (
        TreeSource(
            member=member,
            extendible=extendible,
            extension_count=no_counts if forbid_counts else None,
            name=f"{base.name}:counting",
        ),
        calls,
    )


# -- piecewise codes --------------------------------------------------------------


def test_root_code_shape():
    zc = PiecewiseCode.root_of(full_tree())
    assert zc.live_depth == 0
    assert zc.top() == {""}
    assert len(zc.level(3)) == 8
    assert zc.marked("101")
    assert not zc.restriction
    marking = zc.marking(2)
    assert [len(level) for level in marking.levels] == [1, 2, 4]


def test_code_rejects_bad_levels():
    with pytest.raises(CgmtError):
        PiecewiseCode(full_tree(), 2, (frozenset([""]), frozenset(["0"]), frozenset(["11"])))
    with pytest.raises(CgmtError):
        PiecewiseCode(rooted_tree("0"), 1, (frozenset([""]), frozenset(["1"])))
    with pytest.raises(CgmtError):
        PiecewiseCode(full_tree(), 1, (frozenset([""]),))


def test_restricted_code_filters():
    zc = PiecewiseCode.root_of(full_tree()).restricted("1")
    assert zc.restriction
    assert zc.level(2) == {"10", "11"}
    assert not zc.marked("01")
    assert zc.marked("110")


def test_code_prefix_roundtrip():
    zc = PiecewiseCode.root_of(full_tree())
    cp = zc.to_code_prefix(2)
    assert cp.bits == "1111111"
    validate_code(cp.bits, full_tree())


# -- interpolation ----------------------------------------------------------------


def test_interpolate_left_half_unit_dimension():
    # full tree, s=1, n=0, target [1/2, 3/4): one level-1 branch carries exactly 1/2
    r = approx_subset(full_tree(), 1, 0, HALF, Fraction(1, 4))
    assert r.top_level == 1
    assert r.restored == 0
    assert r.code.top() == {"0"}
    assert [b for b, _ in r.values] == [1, 2, 3]
    assert all(exactly(v, HALF) for _, v in r.values)
    assert exactly(r.bracket.lower, HALF)
    assert exactly(r.bracket.upper, HALF)


def test_interpolate_identity_case():
    # the ambient value is already inside [c, c+eps); the sweep returns the tree itself
    r = approx_subset(full_tree(), 1, 0, 1, Fraction(1, 8))
    assert r.top_level == 0
    assert r.restored == 0
    assert r.code.top() == {""}
    assert all(exactly(v, 1) for _, v in r.values)


def test_interpolate_half_dimension_pair():
    r = approx_subset(full_tree(), HALF, 1, 1, Fraction(1, 8))
    assert r.top_level == 2
    assert r.code.top() == {"00", "10"}
    assert [b for b, _ in r.values] == [2, 3, 4]
    assert all(exactly(v, 1) for _, v in r.values)
    assert exactly(r.bracket.upper, 1)


def test_interpolate_zero_target_positive_tree():
    # c=0 defers to a positive floor below eps; here floor = eps/2 = 1/8
    r = approx_subset(full_tree(), 1, 0, 0, Fraction(1, 4))
    for _, v in r.values:
        assert v >= W(Fraction(1, 8))
        assert v < W(Fraction(1, 4))
    assert exactly(r.bracket.lower, Fraction(1, 8))


def test_interpolate_zero_target_dead_tree():
    dead = TruncatedTree.full(2).to_source()
    r = approx_subset(dead, 1, 0, 0, Fraction(1, 4))
    assert r.bracket.lower.is_zero()
    assert r.bracket.upper.is_zero()
    assert all(v.is_zero() for _, v in r.values)


def test_interpolate_precondition_failures():
    with pytest.raises(PreconditionMeasure):
        approx_subset(full_tree(), 1, 0, 2, Fraction(1, 4))
    with pytest.raises(PreconditionMeasure):
        approx_subset(rooted_tree("0"), 1, 0, Fraction(3, 4), Fraction(1, 8))


def test_interpolate_argument_guards():
    with pytest.raises(CgmtError):
        approx_subset(full_tree(), 1, 0, HALF, 0)
    with pytest.raises(CgmtError):
        approx_subset(full_tree(), 1, 0, -1, Fraction(1, 4))
    with pytest.raises(PreconditionMeasure):
        approx_subset(full_tree(), 0, 0, HALF, Fraction(1, 4))
    base = approx_subset(full_tree(), HALF, 1, 1, Fraction(1, 8)).code
    with pytest.raises(CgmtError):
        interpolate_subset(base, 1, HALF, 1, 1, Fraction(1, 8))


def test_interpolate_prefix_resume():
    base = approx_subset(full_tree(), HALF, 1, 1, Fraction(1, 8)).code
    r = interpolate_subset(base, 3, HALF, 2, 1, Fraction(1, 8))
    # the level-2 cover {00,10} keeps every window block at exactly 1
    assert r.top_level == 3
    assert r.code.top() == {"000", "001", "100", "101"}
    for length in range(4):
        assert r.code.level(length) == base.level(length)
    assert all(exactly(v, 1) for _, v in r.values)


def test_interpolate_prefix_disagreement():
    zc = PiecewiseCode.root_of(full_tree())
    wrong = validate_code("110", full_tree())
    with pytest.raises(CgmtError):
        interpolate_subset(zc, wrong, 1, 0, HALF, Fraction(1, 4))
    agreeing = validate_code("111", full_tree())
    r = interpolate_subset(zc, agreeing, 1, 1, 1, Fraction(1, 8))
    assert r.code.top() <= {"0", "1"} or r.top_level >= 1


def test_pruned_variant_child_condition():
    r = pruned_approx_subset(full_tree(), HALF, 1, 1, Fraction(1, 8))
    assert r.code.top() == {"00", "10"}
    assert all(exactly(v, 1) for _, v in r.values)
    cp = r.code.to_code_prefix(r.code.live_depth + 2)
    validate_code(cp.bits, full_tree(), pruned=True)


def test_interpolate_random_brackets():
    import random

    rng = random.Random(0)
    stable = 0
    unstable = 0
    for _ in range(30):
        depth = rng.randint(2, 4)
        leaves = [
            format(j, f"0{depth}b")
            for j in range(1 << depth)
            if rng.random() < 0.7
        ]
        if not leaves:
            leaves = ["0" * depth]
        src = grown_source(TruncatedTree.from_strings(leaves, depth))
        s = rng.choice([HALF, Fraction(2, 3), Fraction(1)])
        n = rng.choice([0, 1])
        zc = PiecewiseCode.root_of(src)
        total = htilde(zc.marking(max(depth, n) + 2), s, n, want_witness=False).value
        if total.is_zero():
            continue
        c = total * Fraction(rng.randint(1, 8), 8)
        eps = W(Fraction(1, 1 << rng.randint(3, 6)))
        try:
            r = interpolate_subset(zc, n, s, n, c, eps)
        except NoStableIndex:
            unstable += 1
            continue
        stable += 1
        for _, v in r.values:
            assert v >= c
            assert v < c + eps
        for length in range(r.code.live_depth + 3):
            for sigma in r.code.level(length):
                assert src.member(sigma)
        assert r.code.level(n) <= zc.level(n)
    assert stable >= 20, f"only {stable} stable runs ({unstable} unstable)"


# -- thinning ---------------------------------------------------------------------


def test_thin_test_examples():
    assert not thin_test(full_tree(), HALF, 1, "0", 0, 6)
    assert thin_test(rooted_tree("0"), HALF, 1, "1", 0, 6)
    assert thin_test(full_tree(), HALF, 1, "0", 2, 6)
    with pytest.raises(CgmtError):
        thin_test(full_tree(), HALF, 1, "01", 0, 6)


def test_thinify_full_half_dimension():
    out, cert = thinify(full_tree(), HALF, 1, 0, 1, Fraction(1, 64))
    assert cert.replaced() == ("0", "1")
    assert out.live_depth == 5
    assert len(out.top()) == 12
    assert {"10000", "10100", "11000", "11100"} <= out.top()
    assert exactly(cert.floor_value, 1)
    assert cert.floor_block == 7
    for tau in ("0", "1"):
        assert thin_test(out, HALF, 1, tau, Fraction(1, 64), 7)


def test_thinify_already_thin_is_identity():
    zc = PiecewiseCode.root_of(full_tree())
    out, cert = thinify(zc, 1, 1, 0, 1, 0)
    assert out is zc
    assert cert.replaced() == ()
    assert all(report.kept for report in cert.branches)
    assert exactly(cert.floor_value, 1)


def test_thinify_theta_zero_unattainable():
    with pytest.raises(NoStableIndex) as info:
        thinify(full_tree(), HALF, 1, 0, 1, 0)
    assert info.value.window == 2


def test_thinify_floor_guard():
    with pytest.raises(PreconditionMeasure):
        thinify(full_tree(), HALF, 1, 0, Fraction(9, 8), Fraction(1, 64))


def test_thinify_random_floor_and_transfer():
    import random

    rng = random.Random(7)
    checked = 0
    while checked < 50:
        depth = rng.randint(2, 3)
        leaves = [
            format(j, f"0{depth}b")
            for j in range(1 << depth)
            if rng.random() < 0.75
        ]
        if not leaves:
            continue
        src = grown_source(TruncatedTree.from_strings(leaves, depth))
        s = rng.choice([HALF, Fraction(1)])
        n = rng.choice([0, 1])
        theta = Fraction(1, 1 << rng.randint(4, 6))
        zc = PiecewiseCode.root_of(src)
        c = htilde(zc.marking(depth + 2), s, n, want_witness=False).value
        if c.is_zero():
            continue
        try:
            out, cert = thinify(zc, s, n, 0, c, theta)
        except (NoStableIndex, PreconditionMeasure):
            continue
        checked += 1
        deep = out.live_depth + 2
        floor = htilde(out.marking(deep), s, n, want_witness=False).value
        assert floor >= c
        assert exactly(cert.floor_value - floor, 0) or cert.floor_block != deep
        # transfer: the next-granularity value stays within the branch-count slack
        w = htilde(out.marking(deep), s, n, want_witness=False).value
        u = htilde(out.marking(deep), s, n + 1, want_witness=False).value
        slack = W(theta) * len(out.level(n))
        assert u <= w + slack
        for tau in sorted(out.level(n)):
            assert thin_test(out, s, n, tau, theta, deep)


# -- staged extraction ------------------------------------------------------------


def test_besicovitch_half_dimension_run():
    code, certs = besicovitch_extract(full_tree(), HALF, 1, 0, 6)
    assert code.live_depth == 12
    assert [c.stage for c in certs] == [1, 2, 3, 4, 5, 6]
    for cert in certs:
        assert cert.verify()
        assert exactly(cert.lower_target, 1)
        assert exactly(cert.upper_target, 1 + Fraction(1, 1 << cert.stage))
        for _, value in cert.lower_checks:
            assert exactly(value, 1)
        assert exactly(cert.upper_witness[1], 1)
    assert [c.upper_witness[0] for c in certs] == [2, 2, 6, 6, 12, 12]
    assert [c.lower_checks[0][0] for c in certs] == [4, 4, 8, 8, 14, 14]
    final = htilde(code.marking(14), HALF, 0, want_witness=False).value
    assert exactly(final, 1)


def test_besicovitch_unit_dimension_trivial():
    code, certs = besicovitch_extract(full_tree(), 1, 1, 0, 4)
    assert code.live_depth == 0
    assert len(certs) == 4
    for cert in certs:
        assert cert.verify()
        assert exactly(cert.upper_witness[1], 1)


def test_besicovitch_precondition():
    with pytest.raises(PreconditionMeasure):
        besicovitch_extract(full_tree(), HALF, 3, 0, 4)


def test_besicovitch_certificate_detects_tampering():
    import dataclasses

    _, certs = besicovitch_extract(full_tree(), 1, 1, 0, 2)
    cert = certs[0]
    block, value = cert.upper_witness
    forged = dataclasses.replace(cert, upper_witness=(block, value + W(Fraction(1, 16))))
    assert not forged.verify()
    forged_low = dataclasses.replace(
        cert, lower_checks=((cert.lower_checks[0][0], W(Fraction(1, 2))),)
    )
    assert not forged_low.verify()


# -- unit-dimension path extraction -----------------------------------------------


def test_lebesgue_full_tree_all_ones():
    assert lebesgue_path(full_tree(), 1, 8) == "11111111"


def test_lebesgue_left_half():
    # bit 0: only i=1 has empty mass; afterwards i=0 qualifies at every step
    assert lebesgue_path(rooted_tree("0"), HALF, 8) == "01111111"


def test_lebesgue_dyadic_three_quarters():
    assert lebesgue_path(dyadic_tree(3, 2), Fraction(3, 4), 12) == "101111111111"


def test_lebesgue_depth_64_members():
    cases = [
        (rooted_tree("0"), HALF),
        (rooted_tree("00"), Fraction(1, 4)),
        (dyadic_tree(3, 2), Fraction(3, 4)),
    ]
    for src, c in cases:
        path = lebesgue_path(src, c, 64)
        assert len(path) == 64
        for k in range(65):
            assert src.member(path[:k])


def test_lebesgue_false_promise():
    with pytest.raises(PromiseViolated) as info:
        lebesgue_path(rooted_tree("0"), Fraction(3, 4), 8)
    assert info.value.cap == 16
    with pytest.raises(PromiseViolated):
        lebesgue_path(dyadic_tree(3, 2), 1, 8)


def test_lebesgue_enumerated_counts_route():
    bare = TreeSource(member=rooted_tree("0").member, name="bare")
    assert lebesgue_path(bare, HALF, 8) == "01111111"
    with pytest.raises(BudgetExceeded):
        lebesgue_path(bare, HALF, 32, budget=50)


def test_lebesgue_rejects_bad_mass():
    with pytest.raises(CgmtError):
        lebesgue_path(full_tree(), 0, 8)
    with pytest.raises(CgmtError):
        lebesgue_path(full_tree(), 2, 8)


# -- category and minimization ----------------------------------------------------


def test_baire_all_accepting_leftmost():
    path = baire_intersect(full_tree(), [lambda s: True] * 3, "", 6)
    assert path == "000000"


def test_baire_contains_one():
    path = baire_intersect(full_tree(), [lambda s: "1" in s], "", 6)
    assert path == "100000"
    assert any("1" in path[:k] for k in range(7))


def test_baire_respects_tree():
    src = rooted_tree("01")
    path = baire_intersect(src, [lambda s: s.count("1") >= 2], "", 8)
    assert path == "01100000"
    for k in range(9):
        assert src.require_extendible()(path[:k])


def test_baire_multi_stage_independent_recheck():
    opens = [
        lambda s: "1" in s,
        lambda s: len(s) >= 3 and s[2] == "1",
        lambda s: "11" in s,
    ]
    path = baire_intersect(full_tree(), opens, "", 10)
    for accepts in opens:
        assert any(accepts(path[:k]) for k in range(11))


def test_baire_empty_open_and_dead_start():
    with pytest.raises(DensityViolated) as info:
        baire_intersect(full_tree(), [lambda s: False], "", 6, cap=64)
    assert info.value.stage == 0
    assert info.value.cap == 64
    with pytest.raises(NotExtendible):
        baire_intersect(rooted_tree("0"), [lambda s: True], "1", 6)


def test_dense_min_constant_function():
    f = MonotoneFn(lambda s: W(Fraction(1, 3)))
    target = DensityTarget.geometric(W(Fraction(1, 3)), 4)
    path, cert = dense_monotone_min(full_tree(), f, target, depth=12)
    assert path == "0" * 12
    assert len(cert.records) == 4
    assert all(stem == "" for _, _, stem, _ in cert.records)


def test_dense_min_measure_instantiation():
    # driving the restricted cover weight below every 2^{-n} is exactly the
    # regularity extraction loop, with the callback choosing deeper cylinders
    root = PiecewiseCode.root_of(full_tree())

    def weight_of(sigma: str) -> AlgebraicWeight:
        marking = root.restricted(sigma).marking(len(sigma) + 2)
        return htilde(marking, HALF, 0, want_witness=False).value

    f = MonotoneFn(weight_of, name="restricted-weight")
    target = DensityTarget.geometric(W(0), 5)

    def density(stem: str, eps: AlgebraicWeight) -> str:
        candidate = stem + "0"
        while not weight_of(candidate) < eps:
            candidate += "0"
        return candidate

    path, cert = dense_monotone_min(full_tree(), f, target, density=density, depth=24)
    assert len(path) == 24
    previous = None
    for stage, eps, stem, value in cert.records:
        assert (weight_of(stem) - value).is_zero()
        assert value < W(0) + eps
        if previous is not None:
            assert value <= previous
        previous = value


def test_dense_min_first_one_counterexample():
    def first_one(s: str) -> AlgebraicWeight:
        k = s.find("1")
        return W(1) if k < 0 else W(Fraction(1, 1 << (k + 1)))

    f = MonotoneFn(first_one, name="first-one")
    target = DensityTarget.geometric(W(0), 6)
    with pytest.raises(DensityViolated) as info:
        dense_monotone_min(full_tree(), f, target, depth=12, cap=300)
    assert info.value.stage == 1
    assert info.value.cap == 300


def test_dense_min_dishonest_callback():
    f = MonotoneFn(lambda s: W(1))
    target = DensityTarget.geometric(W(0), 3)
    with pytest.raises(DensityViolated) as info:
        dense_monotone_min(full_tree(), f, target, density=lambda stem, eps: stem, depth=8)
    assert info.value.stage == 0
    with pytest.raises(DensityViolated):
        dense_monotone_min(
            rooted_tree("0"),
            MonotoneFn(lambda s: W(0)),
            DensityTarget.geometric(W(0), 2),
            density=lambda stem, eps: "11",
            depth=8,
        )


def test_dense_min_monotone_chain_guard():
    f = MonotoneFn(lambda s: W(Fraction(len(s), 8)))
    target = DensityTarget(alpha=W(1), schedule=(W(1), W(HALF)))
    with pytest.raises(CgmtError, match="monotone"):
        dense_monotone_min(
            full_tree(), f, target, density=lambda stem, eps: stem + "0", depth=8
        )


def test_density_target_validation():
    with pytest.raises(CgmtError):
        DensityTarget(alpha=W(0), schedule=(W(1), W(1)))
    with pytest.raises(CgmtError):
        DensityTarget(alpha=W(0), schedule=(W(1), W(0)))


# -- oracle discipline ------------------------------------------------------------


def test_membership_ops_never_consult_extendible():
    src, calls = counting_source(full_tree())
    approx_subset(src, HALF, 1, 1, Fraction(1, 8))
    assert calls["member"] > 0
    assert calls["extendible"] == 0

    src, calls = counting_source(full_tree())
    interpolate_subset(PiecewiseCode.root_of(src), 0, 1, 0, HALF, Fraction(1, 4))
    assert calls["extendible"] == 0

    src, calls = counting_source(full_tree())
    thinify(src, HALF, 1, 0, 1, Fraction(1, 64))
    assert calls["extendible"] == 0


def test_jump_ops_use_both_oracles_only():
    src, calls = counting_source(full_tree())
    pruned_approx_subset(src, HALF, 1, 1, Fraction(1, 8))
    assert calls["extendible"] > 0

    src, calls = counting_source(full_tree())
    baire_intersect(src, [lambda s: "1" in s], "", 6)
    assert calls["extendible"] > 0

    src, calls = counting_source(full_tree())
    dense_monotone_min(
        src, MonotoneFn(lambda s: W(0)), DensityTarget.geometric(W(0), 2), depth=6
    )
    assert calls["extendible"] > 0

    src, calls = counting_source(full_tree())
    besicovitch_extract(src, 1, 1, 0, 2)
    assert calls["extendible"] > 0
