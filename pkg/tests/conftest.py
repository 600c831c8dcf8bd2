"""Shared fixtures: grounding manifests and the scripted model endpoint."""

from __future__ import annotations

import threading

import pytest

from stubs import CountingStub, StubServer


@pytest.fixture
def manifest_doc() -> dict:
    return {
        "images": [
            {"image_index": 1, "source_id": "scene.png", "width": 640, "height": 480}
        ],
        "objects": [
            {
                "image_index": 1,
                "object_index": 1,
                "label": "cat",
                "bbox": [10, 10, 100, 120],
                "score": 0.9,
            },
            {
                "image_index": 1,
                "object_index": 2,
                "label": "dog",
                "bbox": [200, 50, 380, 300],
                "score": 0.8,
            },
        ],
    }


@pytest.fixture
def task_doc() -> dict:
    return {"prompt": "Which animal is next to the door?", "images": ["scene.png"]}


@pytest.fixture
def counting_stub() -> CountingStub:
    return CountingStub()


@pytest.fixture
def stub_server():
    server = StubServer()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()
