"""Final-answer decision paths: elite projection, aggregation, fallback."""

import json

import httpx

from sap_engine.config import build_config
from sap_engine.pipeline import run_pipeline
from sap_engine.scheduler import Endpoint

from stubs import CountingStub, gather_text, scripted_reply

ENDPOINT = Endpoint(url="http://mock/v1/chat", model="m")


def cfg(**kw):
    kw.setdefault("endpoints", [ENDPOINT])
    kw.setdefault("attempts", 1)
    return build_config(**kw)


def test_aggregate_decision_adds_one_call(task_doc, manifest_doc, counting_stub):
    doc = run_pipeline(
        task_doc, manifest_doc, cfg(decision="aggregate"), transport=counting_stub.transport()
    )
    assert counting_stub.calls == 9
    assert doc["final_answer"]["provenance"] == "aggregated"
    assert doc["final_answer"]["answer"] == "a"
    assert doc["final_answer"]["uncertainty"] == "low"


def test_aggregate_sees_candidate_answers(task_doc, manifest_doc):
    aggregate_prompts = []

    def reply(body):
        text = gather_text(body)
        if "Synthesize a final answer" in text:
            aggregate_prompts.append(text)
        return scripted_reply(body)

    stub = CountingStub(reply)
    run_pipeline(
        task_doc, manifest_doc, cfg(decision="aggregate"), transport=stub.transport()
    )
    assert len(aggregate_prompts) == 1
    assert "answer: a" in aggregate_prompts[0]
    assert "answer: b" in aggregate_prompts[0]


def test_aggregator_failure_falls_back(task_doc, manifest_doc):
    def reply(body):
        if "Synthesize a final answer" in gather_text(body):
            return None  # handled below as a 500
        return scripted_reply(body)

    def handler(request: httpx.Request) -> httpx.Response:
        doc = reply(json.loads(request.content))
        if doc is None:
            return httpx.Response(500, json={"error": "down"})
        return httpx.Response(200, json=doc)

    doc = run_pipeline(
        task_doc,
        manifest_doc,
        cfg(decision="aggregate"),
        transport=httpx.MockTransport(handler),
    )
    final = doc["final_answer"]
    assert final["provenance"] == "fallback"
    assert final["answer"] == "a"  # best exact-consensus member
    assert final["uncertainty"] == "high"


def test_aggregator_garbage_falls_back(task_doc, manifest_doc):
    def reply(body):
        if "Synthesize a final answer" in gather_text(body):
            return {"choices": [{"message": {"content": "no json"}}]}
        return scripted_reply(body)

    stub = CountingStub(reply)
    doc = run_pipeline(
        task_doc, manifest_doc, cfg(decision="aggregate"), transport=stub.transport()
    )
    assert doc["final_answer"]["provenance"] == "fallback"
    assert doc["final_answer"]["answer"] == "a"


def test_all_routes_unusable_yields_empty_fallback(task_doc, manifest_doc):
    def reply(body):
        text = gather_text(body)
        if "single active reasoning principle" in text:
            return {"choices": [{"message": {"content": "cannot comply"}}]}
        return scripted_reply(body)

    stub = CountingStub(reply)
    doc = run_pipeline(task_doc, manifest_doc, cfg(), transport=stub.transport())
    final = doc["final_answer"]
    assert final == {
        "answer": "",
        "reasons": [],
        "uncertainty": "high",
        "provenance": "fallback",
    }
    # Placeholder routes still keep the records schema-complete.
    for record in doc["generations"]:
        for evaluation in record["evaluations"]:
            assert evaluation is not None
            assert all(r["placeholder"] for r in evaluation["routes"])


def test_elite_empty_answer_falls_back(task_doc, manifest_doc):
    def reply(body):
        text = gather_text(body)
        if "single active reasoning principle" in text and "Offspring principle" not in text:
            payload = {
                "routes": [
                    {
                        "final_answer": "",
                        "summary": "",
                        "uncertainty": "low",
                        "reasons": [],
                        "evidence": ["img#1_obj#1(cat)"],
                    },
                    {
                        "final_answer": "",
                        "summary": "",
                        "uncertainty": "low",
                        "reasons": [],
                        "evidence": [],
                    },
                ],
                "diversity": "low",
            }
            return {
                "choices": [{"message": {"content": json.dumps(payload)}}],
                "usage": {"completion_tokens": 10},
            }
        return scripted_reply(body)

    stub = CountingStub(reply)
    doc = run_pipeline(task_doc, manifest_doc, cfg(), transport=stub.transport())
    final = doc["final_answer"]
    # Elites answer nothing, so the offspring's consensus answer "b" stands
    # in through the fallback with forced-high uncertainty.
    assert final["provenance"] == "fallback"
    assert final["answer"] == "b"
    assert final["uncertainty"] == "high"
