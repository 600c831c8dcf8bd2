"""Ordinal criteria, consensus, and fitness arithmetic."""

from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sap_engine.fitness import (
    ConsensusResult,
    CriterionSet,
    FitnessWeights,
    OrdinalLevel,
    assess_diversity,
    compute_consensus,
    compute_fitness,
    normalize_answer,
    parse_level,
    pen,
    score,
)

LEVELS = [OrdinalLevel.LOW, OrdinalLevel.MEDIUM, OrdinalLevel.HIGH]
levels_st = st.sampled_from(LEVELS)


def test_score_and_pen_mapping():
    assert [score(l) for l in LEVELS] == [0, 1, 2]
    assert [pen(l) for l in LEVELS] == [0, 1, 2]


def test_ordinal_comparisons():
    assert OrdinalLevel.LOW < OrdinalLevel.MEDIUM < OrdinalLevel.HIGH
    assert OrdinalLevel.HIGH >= OrdinalLevel.HIGH
    assert not OrdinalLevel.HIGH < OrdinalLevel.LOW


def test_parse_level():
    assert parse_level("HIGH") is OrdinalLevel.HIGH
    assert parse_level("  medium ") is OrdinalLevel.MEDIUM
    assert parse_level("bogus") is None
    assert parse_level(None) is None


def test_weights_must_be_nonnegative():
    with pytest.raises(ValueError):
        FitnessWeights(w_c=Fraction(-1))


def test_normalize_answer():
    assert normalize_answer("  The  Cat. ") == "the cat"
    assert normalize_answer("A") == "a"
    assert normalize_answer("yes!?") == "yes"
    assert normalize_answer("") == ""
    assert normalize_answer("  \t ") == ""


# Independent oracle: literal level values, literal arithmetic.
_ORACLE_VALUE = {"low": 0, "medium": 1, "high": 2}


def test_fitness_unit_weight_lookup_table():
    unit = FitnessWeights()
    for c, d, u, e in product(LEVELS, repeat=4):
        expected = (
            _ORACLE_VALUE[c.value]
            + _ORACLE_VALUE[d.value]
            + _ORACLE_VALUE[e.value]
            - _ORACLE_VALUE[u.value]
        )
        got = compute_fitness(CriterionSet(c=c, d=d, u=u, e=e), unit)
        assert got == Fraction(expected)
        assert Fraction(-2) <= got <= Fraction(6)


@given(c=levels_st, d=levels_st, u=levels_st, e=levels_st)
def test_fitness_monotone_in_rewards_antitone_in_uncertainty(c, d, u, e):
    unit = FitnessWeights()
    base = compute_fitness(CriterionSet(c=c, d=d, u=u, e=e), unit)
    bumped_c = compute_fitness(CriterionSet(c=OrdinalLevel.HIGH, d=d, u=u, e=e), unit)
    assert bumped_c >= base
    bumped_u = compute_fitness(CriterionSet(c=c, d=d, u=OrdinalLevel.HIGH, e=e), unit)
    assert bumped_u <= base


def test_fitness_respects_weights():
    crit = CriterionSet(
        c=OrdinalLevel.HIGH,
        d=OrdinalLevel.LOW,
        u=OrdinalLevel.MEDIUM,
        e=OrdinalLevel.MEDIUM,
    )
    w = FitnessWeights(Fraction(1, 2), Fraction(3), Fraction(1), Fraction(2))
    # 1/2*2 + 3*0 + 1*1 - 2*1 = 0
    assert compute_fitness(crit, w) == Fraction(0)


def test_consensus_three_of_four():
    result = compute_consensus([(1, "A"), (2, "A"), (3, "A"), (4, "B")])
    assert result.consensus_answer == "a"
    assert result.winning_fraction == Fraction(3, 4)
    assert result.global_level is OrdinalLevel.HIGH
    assert result.per_principle_match == [
        OrdinalLevel.HIGH,
        OrdinalLevel.HIGH,
        OrdinalLevel.HIGH,
        OrdinalLevel.LOW,
    ]


def test_consensus_tie_breaks_lexicographically():
    result = compute_consensus([(1, "beta"), (2, "alpha")])
    assert result.consensus_answer == "alpha"
    assert result.winning_fraction == Fraction(1, 2)
    assert result.global_level is OrdinalLevel.MEDIUM


def test_consensus_thresholds():
    # Exactly 2/3 is high.
    result = compute_consensus([(1, "x"), (2, "x"), (3, "y")])
    assert result.winning_fraction == Fraction(2, 3)
    assert result.global_level is OrdinalLevel.HIGH
    # Exactly 1/2 is medium.
    result = compute_consensus([(1, "x"), (2, "y"), (3, "x"), (4, "z")])
    assert result.global_level is OrdinalLevel.MEDIUM
    # Below 1/2 is low.
    result = compute_consensus([(1, "x"), (2, "y"), (3, "z")])
    assert result.global_level is OrdinalLevel.LOW


def test_consensus_empty_answers_never_match():
    result = compute_consensus([(1, ""), (2, "  "), (3, "a")])
    assert result.consensus_answer == "a"
    assert result.winning_fraction == Fraction(1, 3)
    assert result.per_principle_match[:2] == [OrdinalLevel.LOW, OrdinalLevel.LOW]


def test_consensus_all_empty():
    result = compute_consensus([(1, ""), (2, "")])
    assert result.consensus_answer == ""
    assert result.winning_fraction == Fraction(0)
    assert result.global_level is OrdinalLevel.LOW
    assert result.per_principle_match == [OrdinalLevel.LOW, OrdinalLevel.LOW]


def test_consensus_near_match_is_medium():
    # 5 shared tokens, union 6: Jaccard 5/6 reaches the 4/5 proxy threshold.
    winner = "red car near the door"
    near = "red car near the door parked"
    result = compute_consensus([(1, winner), (2, winner), (3, near)])
    assert result.per_principle_match[2] is OrdinalLevel.MEDIUM


def test_consensus_custom_equivalence_judge():
    result = compute_consensus(
        [(1, "two"), (2, "two"), (3, "2")],
        equiv=lambda a, b: {a, b} == {"two", "2"},
    )
    assert result.per_principle_match[2] is OrdinalLevel.MEDIUM


def test_consensus_requires_representatives():
    with pytest.raises(ValueError):
        compute_consensus([])


@given(
    answers=st.lists(
        st.text(alphabet="abc ", min_size=0, max_size=6), min_size=1, max_size=8
    )
)
def test_consensus_shape_invariants(answers):
    result = compute_consensus(list(enumerate(answers)))
    assert len(result.per_principle_match) == len(answers)
    assert 0 <= result.winning_fraction <= 1
    if result.consensus_answer:
        assert any(
            normalize_answer(a) == result.consensus_answer for a in answers
        )


def test_diversity_reported_level_wins():
    assert (
        assess_diversity(["x", "x"], reported=OrdinalLevel.HIGH)
        is OrdinalLevel.HIGH
    )


def test_diversity_fallback_counts():
    assert assess_diversity(["x", "X "]) is OrdinalLevel.LOW
    assert assess_diversity(["x", "y"]) is OrdinalLevel.HIGH
    assert assess_diversity(["x", "y", "x"]) is OrdinalLevel.MEDIUM
    with pytest.raises(ValueError):
        assess_diversity([])


def test_consensus_result_as_dict():
    doc = ConsensusResult(
        consensus_answer="a",
        winning_fraction=Fraction(3, 4),
        global_level=OrdinalLevel.HIGH,
        per_principle_match=[OrdinalLevel.LOW],
    ).as_dict()
    assert doc == {
        "answer": "a",
        "winning_fraction": "3/4",
        "level": "high",
        "per_principle": ["low"],
    }
