"""Prompt templates for the four engine stages and their shared constraint
blocks.

Rendering is a pure function of the template context: identical context
yields byte-identical requests, which is what makes response memoization
and replay-style tests possible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .fitness import CriterionSet


class TemplateKind(enum.Enum):
    PRINCIPLE_INIT = "principle_init"
    PRINCIPLE_EVOLVE = "principle_evolve"
    MULTI_ROUTE = "multi_route"
    AGGREGATE = "aggregate"


class RenderError(ValueError):
    """A required template placeholder is missing from the context."""


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]  # (role, text), roles in {system, user}
    image_refs: tuple[str, ...] = ()
    temperature: float = 0.7
    max_tokens: int = 1024
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not any(role == "user" for role, _ in self.messages):
            raise ValueError("ChatRequest needs at least one user message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    @property
    def text(self) -> str:
        """All message text joined; used by invariant checks and mocks."""
        return "\n\n".join(text for _, text in self.messages)


EVIDENCE_HIERARCHY_BLOCK = """\
[Evidence Hierarchy]
- Image(s) are the most reliable evidence.
- Textual summaries and feedback are auxiliary and may be noisy.
- Text must never override visual observation.
- When uncertainty remains, respond conservatively."""

GROUNDING_REFERENCE_BLOCK = """\
[Grounding Reference Rule]
- Grounding summaries may be incomplete or incorrect.
- Use them only to guide where to look in the image(s).
- Do not assume grounded attributes unless visually verified.
- If conflicts arise, trust the image(s)."""

STRICT_OUTPUT_BLOCK = """\
[Strict Output Rule]
- Follow the specified JSON schema exactly.
- Do not add extra fields or free-form explanations.
- Use predefined discrete levels for uncertainty and evaluation.
- If information is missing, return a valid placeholder."""

CONSTRAINT_BLOCKS = "\n\n".join(
    [EVIDENCE_HIERARCHY_BLOCK, GROUNDING_REFERENCE_BLOCK, STRICT_OUTPUT_BLOCK]
)

_INIT_BODY = """\
Generate several high-level reasoning principles for answering the visual question.
The image(s) are the primary source of truth.
The grounding summary is optional and may be incomplete or incorrect.
Each principle should describe a general way to reason from visual evidence,
not a specific answer.
Avoid assuming details that cannot be directly verified from the image(s)."""

_EVOLVE_BODY = """\
Refine the reasoning principles for visual question answering.
The image(s) remain the most reliable evidence.
Fitness signals and summaries may be noisy and should be used cautiously.
Preserve strengths of effective principles, discard misleading ones,
and propose new principles that better encourage verification
against visual evidence.
Do not assume that high-scoring principles are always correct."""

_MULTI_ROUTE_BODY = """\
Answer the visual question using the image(s)
and the single active reasoning principle below.
Generate multiple distinct reasoning routes under the same principle.
For each route:
- Base the reasoning on observable visual evidence.
- Cite visual cues when possible.
- Report uncertainty if evidence is weak or ambiguous.
The grounding summary is only a reference and may be incorrect.
If unsure, do not guess."""

_AGGREGATE_BODY = """\
Synthesize a final answer from multiple candidate answers.
Treat the image(s) as the authoritative evidence.
Candidate answers may be inconsistent or incorrect.
Prefer answers that are better supported by visual evidence.
Express uncertainty if no answer is clearly justified.
Do not introduce new assumptions beyond what can be verified
from the image(s)."""

_ROUTE_SCHEMA_HINT = (
    '{"routes": [{"reasoning": str, "summary": str, "final_answer": str, '
    '"reasons": [str], "uncertainty": "low|medium|high", "evidence": [str]}], '
    '"diversity": "low|medium|high"}'
)


@dataclass(frozen=True)
class EliteDescriptor:
    """One elite shown to the evolve prompt: text plus ordinal criteria and
    rank, never the scalar fitness."""

    text: str
    criteria: CriterionSet
    rank: int


@dataclass
class TemplateContext:
    prompt: str = ""
    summary: str = ""
    principle: Optional[str] = None
    tau: Optional[int] = None
    count: Optional[int] = None  # how many principles to generate
    elites: Sequence[EliteDescriptor] = field(default_factory=tuple)
    candidates: Sequence[tuple[str, str]] = field(default_factory=tuple)  # (answer, summary)
    avoid: Sequence[str] = field(default_factory=tuple)  # texts a retry must not repeat
    image_refs: Sequence[str] = field(default_factory=tuple)
    temperature: float = 0.7
    max_tokens: int = 1024
    seed: Optional[int] = None


def _need(value, name: str, kind: TemplateKind):
    if value is None or (isinstance(value, (str, tuple, list)) and len(value) == 0):
        raise RenderError(f"{kind.value} template requires '{name}'")
    return value


def render_template(kind: TemplateKind, ctx: TemplateContext) -> ChatRequest:
    """Render one stage prompt into a ChatRequest.

    The system message carries the three shared constraint blocks; the user
    message carries the stage body plus context sections.
    """
    sections: list[str] = []
    if kind is TemplateKind.PRINCIPLE_INIT:
        _need(ctx.prompt, "prompt", kind)
        count = _need(ctx.count, "count", kind)
        sections.append(_INIT_BODY)
        sections.append(f"Question:\n{ctx.prompt}")
        sections.append(f"Grounding summary:\n{ctx.summary or '(none)'}")
        if ctx.avoid:
            sections.append(
                "Do not repeat any of these principles:\n"
                + "\n".join(f"- {text}" for text in ctx.avoid)
            )
        sections.append(
            f"Generate exactly {count} principles.\n"
            'Return JSON only: {"principles": [str, ...]}'
        )
    elif kind is TemplateKind.PRINCIPLE_EVOLVE:
        _need(ctx.prompt, "prompt", kind)
        elites = _need(ctx.elites, "elites", kind)
        count = _need(ctx.count, "count", kind)
        sections.append(_EVOLVE_BODY)
        sections.append(f"Question:\n{ctx.prompt}")
        sections.append(f"Grounding summary:\n{ctx.summary or '(none)'}")
        lines = ["Current elite principles (best first):"]
        for elite in elites:
            crit = elite.criteria.as_dict()
            lines.append(
                f"{elite.rank}. {elite.text}\n"
                f"   consensus_match={crit['consensus_match']}, "
                f"diversity={crit['diversity']}, "
                f"uncertainty={crit['uncertainty']}, "
                f"evidence={crit['evidence']}"
            )
        sections.append("\n".join(lines))
        if ctx.avoid:
            sections.append(
                "Do not repeat any of these principles:\n"
                + "\n".join(f"- {text}" for text in ctx.avoid)
            )
        sections.append(
            f"Propose exactly {count} new principles, distinct from the elites.\n"
            'Return JSON only: {"principles": [str, ...]}'
        )
    elif kind is TemplateKind.MULTI_ROUTE:
        _need(ctx.prompt, "prompt", kind)
        principle = _need(ctx.principle, "principle", kind)
        tau = _need(ctx.tau, "tau", kind)
        sections.append(_MULTI_ROUTE_BODY)
        sections.append(f"Question:\n{ctx.prompt}")
        sections.append(f"Grounding summary:\n{ctx.summary or '(none)'}")
        sections.append(f"Active reasoning principle:\n{principle}")
        sections.append(
            f"Generate exactly {tau} distinct reasoning routes.\n"
            f"Return JSON only: {_ROUTE_SCHEMA_HINT}"
        )
    elif kind is TemplateKind.AGGREGATE:
        _need(ctx.prompt, "prompt", kind)
        candidates = _need(ctx.candidates, "candidates", kind)
        sections.append(_AGGREGATE_BODY)
        sections.append(f"Question:\n{ctx.prompt}")
        sections.append(f"Grounding summary:\n{ctx.summary or '(none)'}")
        lines = ["Candidate answers:"]
        for i, (answer, summary) in enumerate(candidates, start=1):
            lines.append(f"{i}. answer: {answer}\n   summary: {summary}")
        sections.append("\n".join(lines))
        sections.append(
            'Return JSON only: {"answer": str, "reasons": [str], '
            '"uncertainty": "low|medium|high"}'
        )
    else:  # pragma: no cover
        raise RenderError(f"unknown template kind {kind!r}")

    user_text = "\n\n".join(sections)
    return ChatRequest(
        messages=(("system", CONSTRAINT_BLOCKS), ("user", user_text)),
        image_refs=tuple(ctx.image_refs),
        temperature=ctx.temperature,
        max_tokens=ctx.max_tokens,
        seed=ctx.seed,
    )
