"""End-to-end run: grounding, evolution, final decision, report assembly."""

from __future__ import annotations

from typing import Optional, Union

import httpx

from .aggregation import FinalAnswer, aggregate, decide_elite
from .client import ModelClient
from .config import ConfigError, RunConfig
from .evolution import GenerationRecord, run_evolution
from .grounding import GroundingSet, build_grounding_summary, load_grounding_set
from .routing import Task
from .scheduler import Dispatcher, cost_report


class TaskError(ValueError):
    """Malformed task document."""


def parse_task(doc: dict) -> Task:
    if not isinstance(doc, dict):
        raise TaskError("task document must be a JSON object")
    prompt = doc.get("prompt")
    if not isinstance(prompt, str) or not prompt.strip():
        raise TaskError("task field 'prompt' must be a nonempty string")
    images = doc.get("images", [])
    if not isinstance(images, list) or not all(isinstance(i, str) for i in images):
        raise TaskError("task field 'images' must be a list of strings")
    return Task(prompt=prompt, image_sources=tuple(images))


def run_pipeline(
    task_doc: dict,
    manifest_doc: Union[dict, str, bytes],
    config: RunConfig,
    transport: Optional[httpx.BaseTransport] = None,
) -> dict:
    """Execute the full loop and return the run-history document.

    Raises ConfigError for configuration problems, InitializationError when
    no population could be sampled; per-principle failures are absorbed
    into the report.
    """
    if not config.endpoints:
        raise ConfigError("at least one model endpoint is required for a run")
    task = parse_task(task_doc)
    gs = load_grounding_set(manifest_doc, cap=config.max_objects)
    summary = build_grounding_summary(gs)

    dispatcher = Dispatcher(config.endpoints, serial=config.serial)
    client = ModelClient(
        dispatcher,
        attempts=config.attempts,
        backoff_base=config.backoff_base,
        transport=transport,
        memo={} if config.route_cache else None,
    )
    try:
        final_record, history = run_evolution(task, gs, config, client, summary)
        final = _decide(final_record, task, summary, client, config)
        cost = cost_report(history, config)
    finally:
        client.close()

    return {
        "config": config.as_dict(),
        "generations": [record.as_dict() for record in history],
        "final_answer": final.as_dict(),
        "cost": cost.as_dict(),
        "model_calls": client.calls_sent,
    }


def _decide(
    record: GenerationRecord,
    task: Task,
    summary: str,
    client: ModelClient,
    config: RunConfig,
) -> FinalAnswer:
    if config.decision == "aggregate":
        return aggregate(
            record,
            task,
            summary,
            client,
            temperature=config.aggregate_stage.temperature,
            max_tokens=config.aggregate_stage.max_tokens,
            seed=config.seed,
        )
    return decide_elite(record)
