"""Final-answer epilogue: elite projection, optional aggregator call, and
the conservative fallback that can never fail."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .client import ModelClient, ParseError, TransportFailure
from .evolution import GenerationRecord
from .fitness import OrdinalLevel, parse_level
from .routing import Task
from .templates import TemplateContext, TemplateKind


class Provenance(enum.Enum):
    ELITE = "elite"
    AGGREGATED = "aggregated"
    FALLBACK = "fallback"


@dataclass
class FinalAnswer:
    answer: str
    reasons: list[str]
    uncertainty: OrdinalLevel
    provenance: Provenance

    def __post_init__(self) -> None:
        if not self.answer and not (
            self.provenance is Provenance.FALLBACK
            and self.uncertainty is OrdinalLevel.HIGH
        ):
            raise ValueError("empty answer requires fallback provenance and high uncertainty")

    def as_dict(self) -> dict:
        return {
            "answer": self.answer,
            "reasons": self.reasons,
            "uncertainty": self.uncertainty.value,
            "provenance": self.provenance.value,
        }


def decide_elite(record: GenerationRecord) -> FinalAnswer:
    """Project the top elite's representative answer as the final answer."""
    for index in record.elite_indices:
        if record.fitness[index] is None:
            continue
        evaluation = record.evaluations[index]
        if evaluation is None:
            continue
        representative = evaluation.representative
        if representative.final_answer.strip():
            return FinalAnswer(
                answer=representative.final_answer,
                reasons=list(representative.reasons),
                uncertainty=representative.uncertainty,
                provenance=Provenance.ELITE,
            )
    return fallback(record)


def aggregate(
    record: GenerationRecord,
    task: Task,
    summary: str,
    client: ModelClient,
    temperature: float = 0.3,
    max_tokens: int = 512,
    seed: int = 0,
) -> FinalAnswer:
    """One aggregator call over the representative summaries; any failure
    is absorbed by the fallback."""
    candidates = []
    for evaluation in record.evaluations:
        if evaluation is None:
            continue
        representative = evaluation.representative
        if representative.final_answer.strip():
            candidates.append((representative.final_answer, representative.summary))
    if not candidates:
        return fallback(record)
    ctx = TemplateContext(
        prompt=task.prompt,
        summary=summary,
        candidates=tuple(candidates),
        image_refs=task.image_sources,
        temperature=temperature,
        max_tokens=max_tokens,
        seed=seed,
    )
    try:
        payload = client.complete(TemplateKind.AGGREGATE, ctx)
    except (ParseError, TransportFailure):
        return fallback(record)
    body = payload.body
    if not body["answer"].strip():
        return fallback(record)
    return FinalAnswer(
        answer=body["answer"],
        reasons=list(body["reasons"]),
        uncertainty=parse_level(body["uncertainty"]) or OrdinalLevel.HIGH,
        provenance=Provenance.AGGREGATED,
    )


def fallback(record: GenerationRecord) -> FinalAnswer:
    """Representative answer of the best consensus-group member, with
    uncertainty forced to high.

    Group membership is exact consensus match (c_i high).  With no such
    member the overall best principle stands in; with nothing evaluated at
    all the answer is empty.
    """
    def best_of(indices: list[int]) -> str:
        ranked = sorted(
            indices,
            key=lambda i: (
                -record.fitness[i],
                record.principles[i].birth_generation,
                record.principles[i].id,
            ),
        )
        for i in ranked:
            answer = record.representative_answer(i)
            if answer.strip():
                return answer
        return ""

    finite = [i for i in range(len(record.principles)) if record.fitness[i] is not None]
    group = [
        i
        for i in finite
        if record.consensus.per_principle_match[i] is OrdinalLevel.HIGH
    ]
    answer = best_of(group) if group else ""
    if not answer:
        answer = best_of(finite) if finite else ""
    return FinalAnswer(
        answer=answer,
        reasons=[],
        uncertainty=OrdinalLevel.HIGH,
        provenance=Provenance.FALLBACK,
    )
