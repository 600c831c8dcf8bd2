"""Scripted deterministic model endpoint shared by the test suite,
available both as an in-process httpx transport and as a real threaded
HTTP server."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import httpx

INIT_PRINCIPLES = [
    "Check every referenced object directly in the image before answering",
    "Compare candidate regions systematically across the whole scene",
    "Trust direct visual evidence over textual summaries",
    "Weigh textual cues cautiously and re-examine the image on conflict",
]

OFFSPRING_PRINCIPLES = [
    "Offspring principle one: verify object counts twice",
    "Offspring principle two: enumerate spatial relations",
]

GOOD_ROUTE_BATCH = {
    "routes": [
        {
            "reasoning": "The image clearly shows a cat next to a dog near the door.",
            "summary": "Cat and dog visible; answer follows from the cat.",
            "final_answer": "a",
            "reasons": ["the cat is present"],
            "uncertainty": "low",
            "evidence": ["img#1_obj#1(cat)", "img#1_obj#2(dog)"],
        },
        {
            "reasoning": "Checking the left half of the image confirms the animal.",
            "summary": "Left-half check agrees.",
            "final_answer": "a",
            "reasons": ["left-half check agrees"],
            "uncertainty": "low",
            "evidence": ["img#1_obj#1(cat)", "img#1_obj#2(dog)"],
        },
    ],
    "diversity": "medium",
}

WEAK_ROUTE_BATCH = {
    "routes": [
        {
            "reasoning": "Hard to tell from the image.",
            "summary": "Uncertain.",
            "final_answer": "b",
            "reasons": [],
            "uncertainty": "high",
            "evidence": [],
        },
        {
            "reasoning": "Still ambiguous.",
            "summary": "Uncertain again.",
            "final_answer": "b",
            "reasons": [],
            "uncertainty": "high",
            "evidence": [],
        },
    ],
    "diversity": "low",
}


def gather_text(body: dict) -> str:
    """All message text from a chat-completions wire body."""
    parts = []
    for message in body.get("messages", []):
        content = message.get("content")
        if isinstance(content, str):
            parts.append(content)
        elif isinstance(content, list):
            for part in content:
                if isinstance(part, dict) and part.get("type") == "text":
                    parts.append(part.get("text", ""))
    return "\n".join(parts)


def scripted_reply(body: dict) -> dict:
    """Deterministic stub covering all four template kinds."""
    text = gather_text(body)
    if "Generate several high-level reasoning principles" in text:
        payload = {"principles": INIT_PRINCIPLES}
    elif "Refine the reasoning principles" in text:
        payload = {"principles": OFFSPRING_PRINCIPLES}
    elif "single active reasoning principle" in text:
        if "Offspring principle" in text:
            payload = WEAK_ROUTE_BATCH
        else:
            payload = GOOD_ROUTE_BATCH
    elif "Synthesize a final answer" in text:
        payload = {"answer": "a", "reasons": ["population consensus"], "uncertainty": "low"}
    else:
        payload = {"error": "unrecognized prompt"}
    return {
        "choices": [{"message": {"content": json.dumps(payload)}}],
        "usage": {"completion_tokens": 60},
    }


class CountingStub:
    """Wraps a reply function with thread-safe call counting."""

    def __init__(self, reply=scripted_reply):
        self.reply = reply
        self.calls = 0
        self._lock = threading.Lock()

    def transport(self) -> httpx.MockTransport:
        def handler(request: httpx.Request) -> httpx.Response:
            with self._lock:
                self.calls += 1
            body = json.loads(request.content)
            return httpx.Response(200, json=self.reply(body))

        return httpx.MockTransport(handler)


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 - http.server API
        length = int(self.headers.get("Content-Length", "0"))
        body = json.loads(self.rfile.read(length)) if length else {}
        server = self.server
        with server.lock:
            server.calls += 1
        reply = json.dumps(server.reply(body)).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(reply)))
        self.end_headers()
        self.wfile.write(reply)

    def log_message(self, *args):  # quiet
        pass


class StubServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, reply=scripted_reply):
        super().__init__(("127.0.0.1", 0), _StubHandler)
        self.reply = reply
        self.calls = 0
        self.lock = threading.Lock()

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}/v1/chat/completions"
