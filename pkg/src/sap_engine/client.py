"""Chat-endpoint client: wire exchange with retry/backoff, lenient
structured-output parsing, and a deterministic per-run response memo.

The memo is what makes re-evaluating an unchanged principle free: a
byte-identical request inside one run reuses the recorded reply instead of
issuing a new call.  Disable it (route cache off) to re-sample every
generation literally.
"""

from __future__ import annotations

import base64
import json
import mimetypes
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import httpx

from .scheduler import Dispatcher, Endpoint
from .templates import ChatRequest, TemplateContext, TemplateKind, render_template

LEVEL_NAMES = {"low", "medium", "high"}


class TransportFailure(RuntimeError):
    """All transport attempts failed for one request."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class ParseError(ValueError):
    """No schema-valid JSON document could be extracted from a reply."""


@dataclass
class StructuredPayload:
    kind: TemplateKind
    body: dict
    warnings: list[str] = field(default_factory=list)
    usage_tokens: Optional[int] = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, StructuredPayload):
            return NotImplemented
        return self.kind == other.kind and self.body == other.body


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def extract_json_document(raw: str) -> Optional[dict]:
    """First balanced JSON object in ``raw``, fenced or bare."""
    candidates = [m.group(1) for m in _FENCE_RE.finditer(raw)]
    candidates.append(raw)
    decoder = json.JSONDecoder()
    for text in candidates:
        start = text.find("{")
        while start != -1:
            try:
                doc, _ = decoder.raw_decode(text[start:])
            except json.JSONDecodeError:
                start = text.find("{", start + 1)
                continue
            if isinstance(doc, dict):
                return doc
            start = text.find("{", start + 1)
    return None


def _normalize_level(
    value, fallback: str, field_name: str, warnings: list[str]
) -> str:
    if isinstance(value, str) and value.strip().lower() in LEVEL_NAMES:
        return value.strip().lower()
    warnings.append(f"{field_name}: unrecognized level {value!r}, using {fallback}")
    return fallback


def _parse_route(route, idx: int, warnings: list[str]) -> dict:
    if not isinstance(route, dict):
        raise ParseError(f"routes[{idx}] is not an object")
    out = {
        "reasoning": route.get("reasoning", ""),
        "summary": route.get("summary", ""),
        "final_answer": route.get("final_answer", ""),
        "reasons": route.get("reasons", []),
        "uncertainty": _normalize_level(
            route.get("uncertainty"), "high", f"routes[{idx}].uncertainty", warnings
        ),
        "evidence": route.get("evidence", []),
    }
    for key in ("reasoning", "summary", "final_answer"):
        if not isinstance(out[key], str):
            out[key] = str(out[key])
            warnings.append(f"routes[{idx}].{key}: coerced to string")
    if not isinstance(out["reasons"], list):
        out["reasons"] = [str(out["reasons"])]
        warnings.append(f"routes[{idx}].reasons: coerced to list")
    out["reasons"] = [str(r) for r in out["reasons"]]
    if not isinstance(out["evidence"], list):
        out["evidence"] = [str(out["evidence"])]
        warnings.append(f"routes[{idx}].evidence: coerced to list")
    out["evidence"] = [str(e) for e in out["evidence"]]
    return out


def parse_structured(kind: TemplateKind, raw: str) -> StructuredPayload:
    """Extract and validate the structured reply for one template kind.

    Lenient on framing (prose or code fences around the JSON are fine),
    strict on structure.  Unknown ordinal values degrade to the
    conservative default (high for uncertainty, low otherwise) and set a
    warning on the payload.
    """
    doc = extract_json_document(raw)
    if doc is None:
        raise ParseError(f"no JSON document found in reply for {kind.value}")

    warnings: list[str] = []
    if kind in (TemplateKind.PRINCIPLE_INIT, TemplateKind.PRINCIPLE_EVOLVE):
        principles = doc.get("principles")
        if not isinstance(principles, list):
            raise ParseError("reply lacks a 'principles' array")
        kept = []
        for i, p in enumerate(principles):
            if isinstance(p, str) and p.strip():
                kept.append(p.strip())
            else:
                warnings.append(f"principles[{i}]: dropped non-string or empty entry")
        body = {"principles": kept}
    elif kind is TemplateKind.MULTI_ROUTE:
        routes = doc.get("routes")
        if not isinstance(routes, list) or not routes:
            raise ParseError("reply lacks a nonempty 'routes' array")
        parsed = [_parse_route(r, i, warnings) for i, r in enumerate(routes)]
        diversity = doc.get("diversity")
        if diversity is not None:
            diversity = _normalize_level(diversity, "low", "diversity", warnings)
        body = {"routes": parsed, "diversity": diversity}
    elif kind is TemplateKind.AGGREGATE:
        answer = doc.get("answer")
        if not isinstance(answer, str):
            raise ParseError("reply lacks a string 'answer' field")
        reasons = doc.get("reasons", [])
        if not isinstance(reasons, list):
            reasons = [str(reasons)]
            warnings.append("reasons: coerced to list")
        body = {
            "answer": answer,
            "reasons": [str(r) for r in reasons],
            "uncertainty": _normalize_level(
                doc.get("uncertainty"), "high", "uncertainty", warnings
            ),
        }
    else:  # pragma: no cover
        raise ParseError(f"unknown template kind {kind!r}")

    return StructuredPayload(kind=kind, body=body, warnings=warnings)


CORRECTIVE_INSTRUCTION = (
    "Your previous reply could not be parsed as the required JSON document. "
    "Reply again with JSON only, following the schema exactly."
)


def request_key(req: ChatRequest) -> str:
    return json.dumps(
        {
            "messages": list(req.messages),
            "image_refs": list(req.image_refs),
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "seed": req.seed,
        },
        sort_keys=True,
    )


def _estimate_tokens(text: str) -> int:
    return len(text.split())


class ModelClient:
    """HTTP chat-completions client bound to a dispatcher.

    Safe for concurrent use: retry state is per-request and the memo dict
    is guarded by the GIL for single get/set operations.
    """

    def __init__(
        self,
        dispatcher: Dispatcher,
        attempts: int = 3,
        backoff_base: float = 0.5,
        timeout: float = 120.0,
        transport: Optional[httpx.BaseTransport] = None,
        memo: Optional[dict] = None,
    ):
        if attempts < 1:
            raise ValueError("attempts must be >= 1")
        self.dispatcher = dispatcher
        self.attempts = attempts
        self.backoff_base = backoff_base
        self.memo = memo  # None disables response memoization
        self.calls_sent = 0
        self._http = httpx.Client(transport=transport, timeout=timeout)

    def close(self) -> None:
        self._http.close()

    def _image_part(self, ref: str) -> dict:
        path = Path(ref)
        if path.is_file():
            mime = mimetypes.guess_type(ref)[0] or "image/png"
            data = base64.b64encode(path.read_bytes()).decode("ascii")
            url = f"data:{mime};base64,{data}"
        else:
            url = ref
        return {"type": "image_url", "image_url": {"url": url}}

    def _wire_body(self, endpoint: Endpoint, req: ChatRequest) -> dict:
        messages = []
        for i, (role, text) in enumerate(req.messages):
            # Image parts ride on the last user message.
            is_last_user = role == "user" and i == max(
                j for j, (r, _) in enumerate(req.messages) if r == "user"
            )
            if req.image_refs and is_last_user:
                content: object = [{"type": "text", "text": text}] + [
                    self._image_part(ref) for ref in req.image_refs
                ]
            else:
                content = text
            messages.append({"role": role, "content": content})
        body = {
            "model": endpoint.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.seed is not None:
            body["seed"] = req.seed
        return body

    def _post_once(self, endpoint: Endpoint, req: ChatRequest) -> tuple[str, Optional[int]]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(endpoint.auth_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        response = self._http.post(
            endpoint.url, json=self._wire_body(endpoint, req), headers=headers
        )
        if response.status_code >= 500:
            raise httpx.HTTPStatusError(
                f"server error {response.status_code}",
                request=response.request,
                response=response,
            )
        if response.status_code >= 300:
            raise TransportFailure(
                f"endpoint returned status {response.status_code}", attempts=1
            )
        try:
            doc = response.json()
            text = doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise TransportFailure(f"malformed wire payload: {exc}", attempts=1) from exc
        usage = None
        if isinstance(doc.get("usage"), dict):
            completion = doc["usage"].get("completion_tokens")
            if isinstance(completion, int):
                usage = completion
        return text, usage

    def send_chat(self, req: ChatRequest) -> str:
        text, _ = self._send(req)
        return text

    def _send(self, req: ChatRequest) -> tuple[str, Optional[int]]:
        last_error: Optional[Exception] = None
        with self.dispatcher.slot() as endpoint:
            for attempt in range(self.attempts):
                try:
                    self.calls_sent += 1
                    return self._post_once(endpoint, req)
                except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                    last_error = exc
                    if attempt + 1 < self.attempts:
                        time.sleep(self.backoff_base * (2**attempt))
        raise TransportFailure(str(last_error), attempts=self.attempts)

    def complete(self, kind: TemplateKind, ctx: TemplateContext) -> StructuredPayload:
        """Render, exchange, and parse one structured call.

        On a parse failure the request is re-sent once with a corrective
        instruction; a second failure raises ParseError for the caller's
        fallback to absorb.
        """
        req = render_template(kind, ctx)
        key = request_key(req)
        if self.memo is not None and key in self.memo:
            raw, usage = self.memo[key]
            payload = parse_structured(kind, raw)
            payload.usage_tokens = usage
            return payload

        raw, usage = self._send(req)
        try:
            payload = parse_structured(kind, raw)
        except ParseError:
            corrective = ChatRequest(
                messages=req.messages + (("user", CORRECTIVE_INSTRUCTION),),
                image_refs=req.image_refs,
                temperature=req.temperature,
                max_tokens=req.max_tokens,
                seed=req.seed,
            )
            raw, usage = self._send(corrective)
            payload = parse_structured(kind, raw)  # may raise ParseError
        if self.memo is not None:
            self.memo[key] = (raw, usage)
        payload.usage_tokens = usage
        return payload
