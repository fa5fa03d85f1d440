import random
from fractions import Fraction

import pytest

from helpers_markings import random_marking

from cgmt.core import BudgetExceeded, CgmtError
from cgmt.measure import (
    CoverSet,
    DepthTooLarge,
    LengthViolation,
    MeasureBracket,
    NotACover,
    compare_measures,
    count_covers,
    cover_weight,
    htilde,
    htilde_bruteforce,
    marking_of_source,
    measure_sequence,
    verify_delta_cover,
    verify_marking_cover,
)
from cgmt.trees import (
    BlockMarking,
    TruncatedTree,
    code_of_levels,
    full_tree,
    prune_truncation,
    rooted_tree,
    validate_code,
)
from cgmt.weights import AlgebraicWeight

W = AlgebraicWeight
HALF = Fraction(1, 2)


def marking_of(*levels: set) -> BlockMarking:
    return BlockMarking(len(levels) - 1, tuple(frozenset(l) for l in levels))


# -- frozen single values -----------------------------------------------------


def test_case2_short_prefix():
    v = htilde(BlockMarking.empty(), HALF, 2)
    assert v.value == W.from_rational(2)
    assert v.witness.strings == {"00", "01", "10", "11"}


def test_case2_block_below_granularity():
    m = marking_of({""}, {"0", "1"})
    v = htilde(m, HALF, 2)
    assert v.value == W.from_rational(2)
    assert v.at_block == 1


def test_full_block2_half_dimension():
    m = marking_of({""}, {"0", "1"}, {"00", "01", "10", "11"})
    v = htilde(m, HALF, 1)
    assert v.value == W.two_power(Fraction(-1, 2)) * 2
    assert v.witness.strings == {"0", "1"}


def test_left_half_unit_dimension():
    m = marking_of({""}, {"0"}, {"00", "01"})
    v = htilde(m, 1, 0)
    assert v.value == W.from_rational(HALF)
    assert v.witness.strings == {"0"}


def test_empty_top_is_zero():
    m = BlockMarking(2, (frozenset({""}), frozenset(), frozenset()), restriction=True)
    assert htilde(m, HALF, 0).value.is_zero()
    assert htilde_bruteforce(m, HALF, 0).value.is_zero()


def test_single_leaf():
    m = marking_of({""}, {"1"}, {"10"}, {"100"})
    v = htilde(m, 1, 0)
    assert v.value == W.from_rational(Fraction(1, 8))
    assert v.witness.strings == {"100"}
    b = htilde_bruteforce(m, 1, 0)
    assert b.value == v.value


def test_tie_prefers_shallow_single():
    # At s = 1 every split is a tie; the witness should sit at level n.
    m = marking_of({""}, {"0", "1"}, {"00", "01", "10", "11"})
    v = htilde(m, 1, 1)
    assert v.witness.strings == {"0", "1"}
    assert v.value == W.from_rational(1)


# -- brute force as independent oracle ------------------------------------------


@pytest.mark.parametrize("s", [HALF, Fraction(2, 3), Fraction(1), Fraction(3, 2)])
def test_oracle_equivalence(s):
    rng = random.Random(f"oracle:{s}")
    for _ in range(50):
        n = rng.randint(0, 2)
        marking = random_marking(rng, n=n)
        a = htilde(marking, s, n)
        b = htilde_bruteforce(marking, s, n)
        assert a.value == b.value, (marking, s, n)
        assert verify_marking_cover(a.witness, marking, n, s) == a.value
        assert verify_marking_cover(b.witness, marking, n, s) == b.value


def test_bruteforce_depth_guard():
    deep = marking_of(*[{format(0, f"0{L}b") if L else ""} for L in range(9)])
    with pytest.raises(DepthTooLarge):
        htilde_bruteforce(deep, 1, 0)


def test_bruteforce_budget_guard():
    full = marking_of_source(full_tree(), 6)
    assert count_covers(full, 0) > 1_000_000
    with pytest.raises(BudgetExceeded):
        htilde_bruteforce(full, 1, 0, budget=1000)


# -- invariants -----------------------------------------------------------------


def test_prefix_monotonicity():
    rng = random.Random("prefix-mono")
    for _ in range(60):
        marking = random_marking(rng, allow_empty_top=False)
        s = rng.choice([HALF, Fraction(2, 3), Fraction(1), Fraction(3, 2)])
        n = rng.randint(0, 2)
        values = []
        for k in range(marking.block + 1):
            sub = BlockMarking(k, marking.levels[: k + 1])
            values.append(htilde(sub, s, n, want_witness=False).value)
        for earlier, later in zip(values, values[1:]):
            assert earlier >= later


def test_upper_bound_level_n_cover():
    rng = random.Random("upper")
    for _ in range(40):
        marking = random_marking(rng)
        s = rng.choice([HALF, Fraction(1), Fraction(3, 2)])
        n = rng.randint(0, 2)
        bound = W.two_power((1 - s) * n)
        assert htilde(marking, s, n, want_witness=False).value <= bound


def test_granularity_monotonicity():
    rng = random.Random("delta")
    for _ in range(40):
        n = rng.randint(0, 2)
        marking = random_marking(rng, n=n + 1, allow_empty_top=False)
        if marking.block < n + 1:
            continue
        s = rng.choice([HALF, Fraction(2, 3), Fraction(1)])
        a = htilde(marking, s, n, want_witness=False).value
        b = htilde(marking, s, n + 1, want_witness=False).value
        assert a <= b


def test_top_block_determinism():
    rng = random.Random("top-det")
    for _ in range(40):
        marking = random_marking(rng, allow_empty_top=False)
        m = marking.block
        # same top level, all intermediate marks replaced by bare ancestors
        levels = [set() for _ in range(m + 1)]
        levels[m] = set(marking.levels[m])
        for length in range(m, 0, -1):
            levels[length - 1] = {s[:-1] for s in levels[length]}
        lean = BlockMarking(m, tuple(frozenset(l) for l in levels))
        s = rng.choice([HALF, Fraction(1), Fraction(3, 2)])
        assert (
            htilde(marking, s, 1, want_witness=False).value
            == htilde(lean, s, 1, want_witness=False).value
        )


def test_unit_dimension_closed_form():
    rng = random.Random("lebesgue-form")
    for _ in range(40):
        marking = random_marking(rng, allow_empty_top=False)
        count = len(marking.marked_at(marking.block))
        expected = W.two_power(-marking.block) * count
        for n in range(0, marking.block + 1):
            assert htilde(marking, 1, n, want_witness=False).value == expected


# -- cover verification ------------------------------------------------------------


def test_verify_delta_cover_accepts_witness():
    t = prune_truncation(TruncatedTree.from_strings(["000", "011", "110"], 3))
    marking = marking_of_source(t.to_source(), 3)
    for s, n in [(HALF, 1), (Fraction(1), 0), (Fraction(3, 2), 2)]:
        v = htilde(marking, s, n)
        assert verify_delta_cover(v.witness, t, n, s) == v.value


def test_verify_delta_cover_rejects():
    t = TruncatedTree.full(2)
    with pytest.raises(LengthViolation):
        verify_delta_cover(CoverSet(frozenset({""}), 0, 2), t, 1, 1)
    with pytest.raises(NotACover) as e:
        verify_delta_cover(CoverSet(frozenset({"0"}), 0, 2), t, 0, 1)
    assert e.value.witness in {"10", "11"}


def test_cover_set_length_invariant():
    with pytest.raises(CgmtError):
        CoverSet(frozenset({"0"}), 2, 3)


def test_cover_weight_values():
    assert cover_weight(["0", "1"], HALF) == W.two_power(Fraction(-1, 2)) * 2
    assert cover_weight([], 1).is_zero()
    assert cover_weight(["00", "01", "10", "11"], HALF) == W.from_rational(2)


# -- sequences and comparison --------------------------------------------------------


def test_measure_sequence_full_tree():
    for n, expected in [(0, W.from_rational(1)), (1, W.two_power(-HALF) * 2), (2, W.from_rational(2))]:
        values = measure_sequence(full_tree(), HALF, n, [n + 1, n + 2, n + 4])
        assert all(v.value == expected for v in values)


def test_measure_sequence_unit_dimension_constant():
    values = measure_sequence(full_tree(), 1, 0, [0, 1, 3, 5])
    assert all(v.value == W.from_rational(1) for v in values)
    values = measure_sequence(rooted_tree("0"), 1, 0, [1, 2, 5])
    assert all(v.value == W.from_rational(HALF) for v in values)


def test_measure_sequence_monotone():
    rng = random.Random("seq")
    for _ in range(20):
        depth = rng.randint(2, 5)
        strings = [
            "".join(rng.choice("01") for _ in range(depth)) for _ in range(rng.randint(1, 10))
        ]
        src = TruncatedTree.from_strings(strings, depth).to_source()
        values = measure_sequence(src, HALF, 1, list(range(depth + 1)))
        for earlier, later in zip(values, values[1:]):
            assert earlier.value >= later.value


def test_measure_sequence_rejects_unsorted():
    with pytest.raises(CgmtError):
        measure_sequence(full_tree(), 1, 0, [2, 1])


def test_compare_measures_reflexive():
    r = compare_measures(full_tree(), full_tree(), HALF, 1, Fraction(1, 100), 4)
    assert r.verified and r.stable_block == 0


def test_compare_measures_subtree():
    r = compare_measures(rooted_tree("0"), full_tree(), 1, 0, Fraction(1, 4), 4)
    assert r.verified
    back = compare_measures(full_tree(), rooted_tree("0"), 1, 0, Fraction(1, 4), 4)
    assert not back.verified and back.stable_block is None


def test_compare_measures_on_codes():
    code = validate_code("1" * 15, full_tree())
    r = compare_measures(code, code, 1, 0, Fraction(1, 8), 3)
    assert r.verified
    with pytest.raises(CgmtError):
        compare_measures(code, code, 1, 0, Fraction(1, 8), 9)


def test_bracket_validation():
    with pytest.raises(CgmtError):
        MeasureBracket(W.from_rational(1), W.from_rational(HALF), 0, 0)
    b = MeasureBracket(W.from_rational(HALF), W.from_rational(1), 2, 3)
    assert b.lower_block == 2


def test_restriction_marking_zero():
    code = validate_code("1" * 7, full_tree())
    from cgmt.trees import restrict

    r = restrict(code, "00")
    marking = r.marking()
    v = htilde(marking, HALF, 1)
    assert v.value == W.two_power(-1)
    gone = restrict(code, "000000")  # nothing marked that deep except prefixes
    assert htilde(gone.marking(), HALF, 0).value == W.two_power(-1)
