from __future__ import annotations

import pytest

from hopharness import conformance
from hopharness.errors import BackendError
from hopharness.modelio import HttpBackend, QueryInstance, generate

from .stub_server import StubServer


def test_health_endpoint():
    with StubServer() as server:
        payload = HttpBackend(server.url).health()
    assert payload == {"status": "ok", "model": "stub-echo"}


def test_echo_round_trip_and_order():
    with StubServer() as server:
        backend = HttpBackend(server.url)
        batch = [QueryInstance(id=f"q{i}", question=f"text {i}") for i in range(5)]
        preds = generate(backend, batch)
    assert [p.answer for p in preds] == [f"text {i}" for i in range(5)]


def test_chunked_batches_preserve_order():
    with StubServer() as server:
        backend = HttpBackend(server.url, chunk_size=2, in_flight=3)
        batch = [QueryInstance(id=f"q{i}", question=f"text {i}") for i in range(7)]
        preds = generate(backend, batch)
    assert [p.answer for p in preds] == [f"text {i}" for i in range(7)]


def test_retries_through_transient_503():
    with StubServer(fail_503=2) as server:
        backend = HttpBackend(server.url, retries=3, backoff=0.01)
        preds = generate(backend, [QueryInstance(id="a", question="hi")])
    assert preds[0].answer == "hi"


def test_unreachable_backend_raises_with_failed_ids():
    backend = HttpBackend("http://127.0.0.1:1", retries=1, backoff=0.01, timeout=0.5)
    with pytest.raises(BackendError) as excinfo:
        generate(backend, [QueryInstance(id="a", question="hi"), QueryInstance(id="b", question="yo")])
    assert set(excinfo.value.failed_ids) == {"a", "b"}


def test_oversized_input_isolated_per_instance():
    with StubServer(max_input_chars=50) as server:
        backend = HttpBackend(server.url)
        batch = [
            QueryInstance(id="ok-1", question="short"),
            QueryInstance(id="big", question="x" * 100),
            QueryInstance(id="ok-2", question="also short"),
        ]
        preds = generate(backend, batch)
    by_id = {p.id: p for p in preds}
    assert by_id["ok-1"].error is None and by_id["ok-1"].answer == "short"
    assert by_id["ok-2"].error is None
    assert by_id["big"].error is not None and "413" in by_id["big"].error


def test_conformance_suite_against_stub():
    with StubServer(max_input_chars=4096) as server:
        results = conformance.run_all(server.url)
    failed = [name for name, ok, _ in results if not ok]
    assert failed == [], results
