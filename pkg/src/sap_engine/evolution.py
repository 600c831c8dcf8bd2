"""Population initialization and the (mu+lambda) generation loop.

Each generation evaluates every principle (routes, criteria, consensus,
fitness), keeps the top-mu as elites, and asks the model for lambda fresh
offspring conditioned on those elites.  Elites carry their routes forward
through the client's response memo, so re-evaluating an unchanged
principle costs no model calls while its consensus-dependent criteria are
still recomputed against the current population.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .client import ModelClient, ParseError, TransportFailure
from .config import RunConfig
from .fitness import (
    ConsensusResult,
    CriterionSet,
    OrdinalLevel,
    assess_diversity,
    compute_consensus,
    compute_fitness,
    normalize_answer,
)
from .grounding import GroundingSet, assess_evidence_level, canonicalize_evidence
from .routing import (
    EvaluationError,
    PrincipleEvaluation,
    Task,
    infer_routes,
)
from .templates import EliteDescriptor, TemplateContext, TemplateKind


class InitializationError(RuntimeError):
    """The initial principle population could not be obtained."""


@dataclass(frozen=True)
class Principle:
    id: int
    text: str
    birth_generation: int

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("principle text must be nonempty")


@dataclass
class GenerationRecord:
    generation: int
    principles: list[Principle]
    evaluations: list[Optional[PrincipleEvaluation]]
    criteria: list[Optional[CriterionSet]]
    fitness: list[Optional[Fraction]]  # None marks a failed evaluation
    best_fitness: Optional[Fraction]
    elite_indices: list[int]
    consensus: ConsensusResult

    def route_token_counts(self) -> list[int]:
        counts = []
        for evaluation in self.evaluations:
            if evaluation is not None:
                counts.extend(r.token_count for r in evaluation.routes)
        return counts

    def representative_answer(self, index: int) -> str:
        evaluation = self.evaluations[index]
        if evaluation is None:
            return ""
        return evaluation.representative.final_answer

    def as_dict(self) -> dict:
        return {
            "generation": self.generation,
            "principles": [
                {"id": p.id, "text": p.text, "birth_generation": p.birth_generation}
                for p in self.principles
            ],
            "fitness": [None if f is None else str(f) for f in self.fitness],
            "best_fitness": None if self.best_fitness is None else str(self.best_fitness),
            "elite_indices": self.elite_indices,
            "consensus": self.consensus.as_dict(),
            "criteria": [None if c is None else c.as_dict() for c in self.criteria],
            "evaluations": [
                None
                if e is None
                else {
                    "principle_id": e.principle_id,
                    "representative_index": e.representative_index,
                    "short_batch": e.short_batch,
                    "reported_diversity": (
                        None if e.reported_diversity is None else e.reported_diversity.value
                    ),
                    "routes": [
                        {
                            "final_answer": r.final_answer,
                            "summary": r.summary,
                            "uncertainty": r.uncertainty.value,
                            "reasons": r.reasons,
                            "evidence": r.evidence_raw,
                            "tokens": r.token_count,
                            "placeholder": r.placeholder,
                        }
                        for r in e.routes
                    ],
                }
                for e in self.evaluations
            ],
        }


def _request_principles(
    client: ModelClient,
    kind: TemplateKind,
    ctx: TemplateContext,
    wanted: int,
    avoid_texts: list[str],
) -> list[str]:
    """One principle-batch call plus at most one top-up retry, then padding
    by suffixed duplication."""
    seen: set[str] = {normalize_answer(t) for t in avoid_texts}
    collected: list[str] = []

    def absorb(texts: list[str]) -> None:
        for text in texts:
            key = normalize_answer(text)
            if key and key not in seen:
                seen.add(key)
                collected.append(text)

    payload = client.complete(kind, ctx)
    absorb(payload.body["principles"])

    if len(collected) < wanted:
        retry_ctx = TemplateContext(
            prompt=ctx.prompt,
            summary=ctx.summary,
            count=wanted - len(collected),
            elites=ctx.elites,
            image_refs=ctx.image_refs,
            temperature=ctx.temperature,
            max_tokens=ctx.max_tokens,
            seed=ctx.seed,
            avoid=tuple(avoid_texts + collected),
        )
        try:
            payload = client.complete(kind, retry_ctx)
            absorb(payload.body["principles"])
        except (ParseError, TransportFailure):
            pass

    variant = 2
    while collected and len(collected) < wanted:
        base = collected[len(collected) % max(len(collected), 1)]
        candidate = f"{base} (variant {variant})"
        variant += 1
        absorb([candidate])
    return collected[:wanted]


def init_population(
    task: Task, summary: str, n: int, client: ModelClient, config: RunConfig
) -> list[Principle]:
    """Sample the generation-0 population with a single batched call (plus
    the short-batch top-up)."""
    if n < 1:
        raise ValueError("population size must be >= 1")
    ctx = TemplateContext(
        prompt=task.prompt,
        summary=summary,
        count=n,
        image_refs=task.image_sources,
        temperature=config.init_stage.temperature,
        max_tokens=config.init_stage.max_tokens,
        seed=config.seed,
    )
    try:
        texts = _request_principles(client, TemplateKind.PRINCIPLE_INIT, ctx, n, [])
    except (ParseError, TransportFailure) as exc:
        raise InitializationError(f"principle initialization failed: {exc}") from exc
    if not texts:
        raise InitializationError("model returned zero principles after retry")
    return [Principle(id=i + 1, text=t, birth_generation=0) for i, t in enumerate(texts)]


def evaluate_generation(
    population: list[Principle],
    task: Task,
    summary: str,
    gs: GroundingSet,
    config: RunConfig,
    client: ModelClient,
    generation: int,
) -> GenerationRecord:
    """Evaluate every principle and assemble the generation record.

    Route inference runs concurrently per principle; consensus, criteria,
    and fitness are computed after the join.
    """

    def evaluate_one(principle: Principle) -> PrincipleEvaluation:
        evaluation = infer_routes(
            task,
            summary,
            principle.id,
            principle.text,
            config.tau,
            config.dispatch_mode,
            client,
            temperature=config.route_stage.temperature,
            max_tokens=config.route_stage.max_tokens,
            seed=config.seed,
        )
        for route in evaluation.routes:
            route.evidence_resolved = canonicalize_evidence(route.evidence_raw, gs)
        return evaluation

    raw_results = client.dispatcher.map(evaluate_one, population)
    evaluations: list[Optional[PrincipleEvaluation]] = []
    for result in raw_results:
        if isinstance(result, PrincipleEvaluation):
            evaluations.append(result)
        elif isinstance(result, (EvaluationError, ParseError, TransportFailure)):
            evaluations.append(None)
        elif isinstance(result, Exception):
            raise result
        else:
            evaluations.append(result)

    representatives = [
        (p.id, "" if e is None else e.representative.final_answer)
        for p, e in zip(population, evaluations)
    ]
    consensus = compute_consensus(representatives)

    criteria: list[Optional[CriterionSet]] = []
    fitness: list[Optional[Fraction]] = []
    for i, evaluation in enumerate(evaluations):
        if evaluation is None:
            criteria.append(None)
            fitness.append(None)
            continue
        diversity = assess_diversity(
            [r.final_answer for r in evaluation.routes],
            reported=evaluation.reported_diversity,
        )
        representative = evaluation.representative
        crit = CriterionSet(
            c=consensus.per_principle_match[i],
            d=diversity,
            u=representative.uncertainty,
            e=assess_evidence_level(representative.evidence_resolved),
        )
        criteria.append(crit)
        fitness.append(compute_fitness(crit, config.weights))

    finite = [f for f in fitness if f is not None]
    best = max(finite) if finite else None
    record = GenerationRecord(
        generation=generation,
        principles=list(population),
        evaluations=evaluations,
        criteria=criteria,
        fitness=fitness,
        best_fitness=best,
        elite_indices=[],
        consensus=consensus,
    )
    record.elite_indices = select_elites(record, config.mu)
    return record


def select_elites(record: GenerationRecord, mu: int) -> list[int]:
    """Indices of the mu best principles; failed evaluations rank last and
    are excluded while any finite fitness exists.

    Ties break toward the older principle (smaller birth generation), then
    the smaller id.
    """
    if mu > len(record.principles):
        raise ValueError("mu exceeds population size")
    indexed = list(range(len(record.principles)))
    finite = [i for i in indexed if record.fitness[i] is not None]
    failed = [i for i in indexed if record.fitness[i] is None]
    finite.sort(
        key=lambda i: (
            -record.fitness[i],
            record.principles[i].birth_generation,
            record.principles[i].id,
        )
    )
    failed.sort(key=lambda i: (record.principles[i].birth_generation, record.principles[i].id))
    ranked = finite + failed
    return ranked[:mu]


def propose_offspring(
    elites: list[tuple[Principle, CriterionSet, int]],
    lam: int,
    task: Task,
    summary: str,
    client: ModelClient,
    config: RunConfig,
    generation: int,
    next_id: int,
) -> list[Principle]:
    """One evolve call (plus top-up) conditioned on elite texts, ordinal
    criteria, and rank; never the scalar fitness."""
    if not elites:
        raise ValueError("elites must be nonempty")
    if lam < 1:
        raise ValueError("lambda must be >= 1")
    descriptors = tuple(
        EliteDescriptor(text=p.text, criteria=c, rank=rank) for p, c, rank in elites
    )
    ctx = TemplateContext(
        prompt=task.prompt,
        summary=summary,
        count=lam,
        elites=descriptors,
        image_refs=task.image_sources,
        temperature=config.evolve_stage.temperature,
        max_tokens=config.evolve_stage.max_tokens,
        seed=config.seed,
    )
    elite_texts = [p.text for p, _, _ in elites]
    try:
        texts = _request_principles(
            client, TemplateKind.PRINCIPLE_EVOLVE, ctx, lam, elite_texts
        )
    except (ParseError, TransportFailure) as exc:
        raise InitializationError(f"offspring proposal failed: {exc}") from exc
    if not texts:
        raise InitializationError("model returned zero offspring after retry")
    return [
        Principle(id=next_id + i, text=t, birth_generation=generation)
        for i, t in enumerate(texts)
    ]


def run_evolution(
    task: Task,
    gs: GroundingSet,
    config: RunConfig,
    client: ModelClient,
    summary: str,
) -> tuple[GenerationRecord, list[GenerationRecord]]:
    """Full loop: init + evaluate, then T rounds of elite-keep, offspring,
    re-evaluate.  Best fitness is asserted non-decreasing at runtime."""
    n = config.mu + config.lam
    population = init_population(task, summary, n, client, config)
    record = evaluate_generation(population, task, summary, gs, config, client, 0)
    history = [record]
    next_id = max(p.id for p in population) + 1

    for t in range(1, config.generations + 1):
        previous = history[-1]
        elite_rows = [
            (previous.principles[i], previous.criteria[i], rank)
            for rank, i in enumerate(previous.elite_indices, start=1)
            if previous.criteria[i] is not None
        ]
        if not elite_rows:
            # Every principle failed; re-evaluate the same population.
            elites = [previous.principles[i] for i in previous.elite_indices]
            offspring = []
        else:
            elites = [row[0] for row in elite_rows] + [
                previous.principles[i]
                for i in previous.elite_indices
                if previous.criteria[i] is None
            ]
            offspring = propose_offspring(
                elite_rows, config.lam, task, summary, client, config, t, next_id
            )
            next_id += len(offspring)
        population = elites + offspring
        if len(population) < n:
            # Offspring shortfall after dedup and padding failed; keep
            # survivors from the previous population to hold size.
            survivors = [
                p for p in previous.principles if p not in population
            ]
            population = population + survivors[: n - len(population)]
        record = evaluate_generation(population, task, summary, gs, config, client, t)
        if (
            record.best_fitness is not None
            and previous.best_fitness is not None
            and record.best_fitness < previous.best_fitness
        ):
            raise AssertionError(
                f"best fitness regressed at generation {t}: "
                f"{previous.best_fitness} -> {record.best_fitness}"
            )
        history.append(record)

    return history[-1], history
