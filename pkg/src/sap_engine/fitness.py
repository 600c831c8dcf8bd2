"""Ordinal criteria and scalar fitness for reasoning principles.

Every evaluation signal in the engine is a three-level ordinal value
(low/medium/high).  The four per-principle signals (consensus match,
within-principle diversity, uncertainty, evidence validity) combine into a
single rational fitness used for elite selection.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence


class OrdinalLevel(enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"

    def __lt__(self, other: "OrdinalLevel") -> bool:
        return _ORDER[self] < _ORDER[other]

    def __le__(self, other: "OrdinalLevel") -> bool:
        return _ORDER[self] <= _ORDER[other]

    def __gt__(self, other: "OrdinalLevel") -> bool:
        return _ORDER[self] > _ORDER[other]

    def __ge__(self, other: "OrdinalLevel") -> bool:
        return _ORDER[self] >= _ORDER[other]


_ORDER = {OrdinalLevel.LOW: 0, OrdinalLevel.MEDIUM: 1, OrdinalLevel.HIGH: 2}


def score(level: OrdinalLevel) -> int:
    """Ordinal reward mapping: low -> 0, medium -> 1, high -> 2."""
    return _ORDER[level]


def pen(level: OrdinalLevel) -> int:
    """Ordinal penalty mapping, numerically identical to ``score``."""
    return _ORDER[level]


def parse_level(raw: str) -> Optional[OrdinalLevel]:
    """Case-insensitive parse of an ordinal level; None if unrecognized."""
    try:
        return OrdinalLevel(raw.strip().lower())
    except (ValueError, AttributeError):
        return None


@dataclass(frozen=True)
class FitnessWeights:
    w_c: Fraction = Fraction(1)
    w_d: Fraction = Fraction(1)
    w_e: Fraction = Fraction(1)
    w_u: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        for name in ("w_c", "w_d", "w_e", "w_u"):
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")


@dataclass(frozen=True)
class CriterionSet:
    """The four discrete evaluation signals for one principle."""

    c: OrdinalLevel  # consensus match
    d: OrdinalLevel  # within-principle diversity
    u: OrdinalLevel  # uncertainty of the representative route
    e: OrdinalLevel  # evidence validity

    def as_dict(self) -> dict:
        return {
            "consensus_match": self.c.value,
            "diversity": self.d.value,
            "uncertainty": self.u.value,
            "evidence": self.e.value,
        }


@dataclass
class ConsensusResult:
    consensus_answer: str
    winning_fraction: Fraction
    global_level: OrdinalLevel
    per_principle_match: list[OrdinalLevel] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "answer": self.consensus_answer,
            "winning_fraction": str(self.winning_fraction),
            "level": self.global_level.value,
            "per_principle": [m.value for m in self.per_principle_match],
        }


_TRAILING_PUNCT = ".,!?"


def normalize_answer(raw: str) -> str:
    """Canonical answer form: trimmed, casefolded, single-spaced, no
    trailing sentence punctuation."""
    text = " ".join(raw.split()).casefold()
    return text.rstrip(_TRAILING_PUNCT).rstrip()


def _token_jaccard(a: str, b: str) -> Fraction:
    ta, tb = set(a.split()), set(b.split())
    if not ta and not tb:
        return Fraction(1)
    union = ta | tb
    if not union:
        return Fraction(1)
    return Fraction(len(ta & tb), len(union))


# Offline proxy for the model-judged answer-equivalence relation.
JACCARD_EQUIV_THRESHOLD = Fraction(4, 5)


def compute_consensus(
    representatives: Sequence[tuple[object, str]],
    equiv: Optional[Callable[[str, str], bool]] = None,
) -> ConsensusResult:
    """Majority vote over the population's representative answers.

    ``representatives`` is a sequence of (principle_id, raw answer).  The
    modal normalized answer wins; ties break to the lexicographically
    smallest normalized answer.  Global level: winning fraction >= 2/3 is
    high, >= 1/2 is medium, else low.  Per-principle match: exact
    normalized match -> high; equivalence-judged (or token-Jaccard >= 0.8
    when no judge is supplied) -> medium; else low.  Empty answers never
    match.
    """
    if not representatives:
        raise ValueError("representatives must be nonempty")

    normalized = [normalize_answer(answer) for _, answer in representatives]
    counts: dict[str, int] = {}
    for answer in normalized:
        if answer:
            counts[answer] = counts.get(answer, 0) + 1

    if counts:
        top = max(counts.values())
        winner = min(a for a, n in counts.items() if n == top)
        fraction = Fraction(top, len(representatives))
    else:
        winner = ""
        fraction = Fraction(0)

    if fraction >= Fraction(2, 3):
        level = OrdinalLevel.HIGH
    elif fraction >= Fraction(1, 2):
        level = OrdinalLevel.MEDIUM
    else:
        level = OrdinalLevel.LOW

    matches: list[OrdinalLevel] = []
    for answer in normalized:
        if not answer or not winner:
            matches.append(OrdinalLevel.LOW)
        elif answer == winner:
            matches.append(OrdinalLevel.HIGH)
        elif equiv is not None:
            matches.append(OrdinalLevel.MEDIUM if equiv(answer, winner) else OrdinalLevel.LOW)
        elif _token_jaccard(answer, winner) >= JACCARD_EQUIV_THRESHOLD:
            matches.append(OrdinalLevel.MEDIUM)
        else:
            matches.append(OrdinalLevel.LOW)

    return ConsensusResult(
        consensus_answer=winner,
        winning_fraction=fraction,
        global_level=level,
        per_principle_match=matches,
    )


def assess_diversity(
    route_answers: Sequence[str],
    reported: Optional[OrdinalLevel] = None,
) -> OrdinalLevel:
    """Diversity of the routes under one principle.

    The model-reported level wins when present; otherwise fall back to the
    count of distinct normalized answers: 1 distinct -> low, all distinct
    -> high, anything between -> medium.
    """
    if reported is not None:
        return reported
    if not route_answers:
        raise ValueError("route_answers must be nonempty")
    distinct = len({normalize_answer(a) for a in route_answers})
    if distinct <= 1:
        return OrdinalLevel.LOW
    if distinct == len(route_answers):
        return OrdinalLevel.HIGH
    return OrdinalLevel.MEDIUM


def compute_fitness(crit: CriterionSet, w: FitnessWeights) -> Fraction:
    """Scalar fitness: weighted reward on c/d/e minus weighted uncertainty
    penalty, in exact rational arithmetic."""
    return (
        w.w_c * score(crit.c)
        + w.w_d * score(crit.d)
        + w.w_e * score(crit.e)
        - w.w_u * pen(crit.u)
    )
