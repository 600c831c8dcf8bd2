"""JSON schemas for the two public documents: the grounding manifest the
engine ingests and the run-history report it emits."""

from __future__ import annotations

import jsonschema

GROUNDING_MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["images", "objects"],
    "properties": {
        "images": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["image_index", "source_id", "width", "height"],
                "properties": {
                    "image_index": {"type": "integer", "minimum": 1},
                    "source_id": {"type": "string"},
                    "width": {"type": "integer", "minimum": 1},
                    "height": {"type": "integer", "minimum": 1},
                },
            },
        },
        "objects": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["image_index", "object_index", "label"],
                "properties": {
                    "image_index": {"type": "integer", "minimum": 1},
                    "object_index": {"type": "integer", "minimum": 1},
                    "label": {"type": "string", "minLength": 1},
                    "bbox": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 4,
                        "maxItems": 4,
                    },
                    "score": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
    },
}

_LEVEL = {"type": "string", "enum": ["low", "medium", "high"]}
_RATIONAL = {"type": "string", "pattern": r"^-?\d+(/\d+)?$"}

_ROUTE_SCHEMA = {
    "type": "object",
    "required": ["final_answer", "summary", "uncertainty", "reasons", "evidence", "tokens"],
    "properties": {
        "final_answer": {"type": "string"},
        "summary": {"type": "string"},
        "uncertainty": _LEVEL,
        "reasons": {"type": "array", "items": {"type": "string"}},
        "evidence": {"type": "array", "items": {"type": "string"}},
        "tokens": {"type": "integer", "minimum": 0},
        "placeholder": {"type": "boolean"},
    },
}

_GENERATION_RECORD_SCHEMA = {
    "type": "object",
    "required": [
        "generation",
        "principles",
        "fitness",
        "best_fitness",
        "elite_indices",
        "consensus",
        "criteria",
        "evaluations",
    ],
    "properties": {
        "generation": {"type": "integer", "minimum": 0},
        "principles": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "text", "birth_generation"],
                "properties": {
                    "id": {"type": "integer"},
                    "text": {"type": "string", "minLength": 1},
                    "birth_generation": {"type": "integer", "minimum": 0},
                },
            },
        },
        "fitness": {"type": "array", "items": {"anyOf": [_RATIONAL, {"type": "null"}]}},
        "best_fitness": {"anyOf": [_RATIONAL, {"type": "null"}]},
        "elite_indices": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "consensus": {
            "type": "object",
            "required": ["answer", "winning_fraction", "level", "per_principle"],
            "properties": {
                "answer": {"type": "string"},
                "winning_fraction": _RATIONAL,
                "level": _LEVEL,
                "per_principle": {"type": "array", "items": _LEVEL},
            },
        },
        "criteria": {
            "type": "array",
            "items": {
                "anyOf": [
                    {"type": "null"},
                    {
                        "type": "object",
                        "required": ["consensus_match", "diversity", "uncertainty", "evidence"],
                        "properties": {
                            "consensus_match": _LEVEL,
                            "diversity": _LEVEL,
                            "uncertainty": _LEVEL,
                            "evidence": _LEVEL,
                        },
                    },
                ]
            },
        },
        "evaluations": {
            "type": "array",
            "items": {
                "anyOf": [
                    {"type": "null"},
                    {
                        "type": "object",
                        "required": ["principle_id", "representative_index", "routes"],
                        "properties": {
                            "principle_id": {"type": "integer"},
                            "representative_index": {"type": "integer", "minimum": 1},
                            "short_batch": {"type": "boolean"},
                            "reported_diversity": {"anyOf": [_LEVEL, {"type": "null"}]},
                            "routes": {"type": "array", "items": _ROUTE_SCHEMA},
                        },
                    },
                ]
            },
        },
    },
}

RUN_HISTORY_SCHEMA = {
    "type": "object",
    "required": ["config", "generations", "final_answer", "cost"],
    "properties": {
        "config": {"type": "object"},
        "generations": {"type": "array", "items": _GENERATION_RECORD_SCHEMA, "minItems": 1},
        "final_answer": {
            "type": "object",
            "required": ["answer", "reasons", "uncertainty", "provenance"],
            "properties": {
                "answer": {"type": "string"},
                "reasons": {"type": "array", "items": {"type": "string"}},
                "uncertainty": _LEVEL,
                "provenance": {"type": "string", "enum": ["elite", "aggregated", "fallback"]},
            },
        },
        "cost": {
            "type": "object",
            "required": [
                "total_tokens",
                "route_count",
                "mean_route_length",
                "sap_attention_cost",
                "longcot_attention_cost",
                "ratio",
            ],
        },
        "simulation": {"type": "object"},
    },
}


def validate_manifest_document(doc: dict) -> None:
    jsonschema.validate(doc, GROUNDING_MANIFEST_SCHEMA)


def validate_run_history(doc: dict) -> None:
    jsonschema.validate(doc, RUN_HISTORY_SCHEMA)
