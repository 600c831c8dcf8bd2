"""Multi-route inference for one principle and representative selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .client import ModelClient, ParseError, TransportFailure, _estimate_tokens
from .fitness import OrdinalLevel, parse_level, score
from .grounding import EvidenceRef
from .templates import TemplateContext, TemplateKind

ONE_CALL = "one-call"
PER_ROUTE = "per-route"
DISPATCH_MODES = (ONE_CALL, PER_ROUTE)


class EvaluationError(RuntimeError):
    """No usable routes could be obtained for a principle."""


@dataclass(frozen=True)
class Task:
    prompt: str
    image_sources: tuple[str, ...] = ()  # order defines image_index


@dataclass
class Route:
    reasoning: str
    summary: str
    final_answer: str
    reasons: list[str]
    uncertainty: OrdinalLevel
    evidence_raw: list[str]
    evidence_resolved: list[Union[EvidenceRef, str]] = field(default_factory=list)
    token_count: int = 0
    placeholder: bool = False

    @classmethod
    def empty_placeholder(cls) -> "Route":
        return cls(
            reasoning="",
            summary="",
            final_answer="",
            reasons=[],
            uncertainty=OrdinalLevel.HIGH,
            evidence_raw=[],
            placeholder=True,
        )


@dataclass
class PrincipleEvaluation:
    principle_id: int
    routes: list[Route]
    reported_diversity: Optional[OrdinalLevel] = None
    representative_index: int = 1  # 1-based
    short_batch: bool = False
    calls_used: int = 0

    @property
    def representative(self) -> Route:
        return self.routes[self.representative_index - 1]


def _route_from_body(body: dict) -> Route:
    text = " ".join([body["reasoning"], body["summary"], body["final_answer"]])
    return Route(
        reasoning=body["reasoning"],
        summary=body["summary"],
        final_answer=body["final_answer"],
        reasons=list(body["reasons"]),
        uncertainty=parse_level(body["uncertainty"]) or OrdinalLevel.HIGH,
        evidence_raw=list(body["evidence"]),
        token_count=_estimate_tokens(text),
    )


def infer_routes(
    task: Task,
    summary: str,
    principle_id: int,
    principle_text: str,
    tau: int,
    mode: str,
    client: ModelClient,
    temperature: float = 0.7,
    max_tokens: int = 1024,
    seed: Optional[int] = None,
) -> PrincipleEvaluation:
    """Obtain tau reasoning routes for one principle.

    one-call mode issues a single request asking for tau routes (the model
    also reports a diversity level); per-route mode issues tau independent
    single-route requests with distinct seeds and leaves diversity unset.
    Short batches are padded with empty-answer, high-uncertainty
    placeholders so the population size stays invariant.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if mode not in DISPATCH_MODES:
        raise ValueError(f"unknown dispatch mode {mode!r}")

    routes: list[Route] = []
    reported: Optional[OrdinalLevel] = None
    failures = 0
    calls = 0

    if mode == ONE_CALL:
        ctx = TemplateContext(
            prompt=task.prompt,
            summary=summary,
            principle=principle_text,
            tau=tau,
            image_refs=task.image_sources,
            temperature=temperature,
            max_tokens=max_tokens,
            seed=seed,
        )
        try:
            payload = client.complete(TemplateKind.MULTI_ROUTE, ctx)
            calls = 1
        except TransportFailure:
            raise EvaluationError(f"route inference failed for principle {principle_id}")
        except ParseError:
            payload = None
            calls = 1
        if payload is not None:
            body_routes = payload.body["routes"][:tau]
            routes = [_route_from_body(b) for b in body_routes]
            if payload.body.get("diversity"):
                reported = parse_level(payload.body["diversity"])
            if payload.usage_tokens and routes:
                share = payload.usage_tokens // len(routes)
                for r in routes:
                    r.token_count = share
                routes[0].token_count += payload.usage_tokens - share * len(routes)
    else:
        for j in range(tau):
            ctx = TemplateContext(
                prompt=task.prompt,
                summary=summary,
                principle=principle_text,
                tau=1,
                image_refs=task.image_sources,
                temperature=temperature,
                max_tokens=max_tokens,
                seed=None if seed is None else seed + j,
            )
            try:
                payload = client.complete(TemplateKind.MULTI_ROUTE, ctx)
                calls += 1
                route = _route_from_body(payload.body["routes"][0])
                if payload.usage_tokens:
                    route.token_count = payload.usage_tokens
                routes.append(route)
            except TransportFailure:
                failures += 1
            except ParseError:
                calls += 1
        if failures == tau:
            raise EvaluationError(f"all route requests failed for principle {principle_id}")

    short = len(routes) < tau
    while len(routes) < tau:
        routes.append(Route.empty_placeholder())

    evaluation = PrincipleEvaluation(
        principle_id=principle_id,
        routes=routes,
        reported_diversity=reported,
        short_batch=short,
        calls_used=calls,
    )
    evaluation.representative_index = select_representative(evaluation)
    return evaluation


def select_representative(evaluation: PrincipleEvaluation) -> int:
    """1-based index of the route carrying this principle's answer.

    Nonempty answers are preferred outright; among those, minimal
    uncertainty wins, ties going to the lowest route index.  If every
    answer is empty the first route stands.
    """
    if not evaluation.routes:
        raise ValueError("routes must be nonempty")
    answered = [
        (i, r)
        for i, r in enumerate(evaluation.routes)
        if r.final_answer.strip()
    ]
    if not answered:
        return 1
    best_i, _ = min(answered, key=lambda pair: (score(pair[1].uncertainty), pair[0]))
    return best_i + 1
