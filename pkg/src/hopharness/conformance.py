"""Wire-protocol conformance checks for generation servers.

Each check drives a live server through the client and returns (name, ok,
detail). The same suite runs against any server implementing the protocol,
so a new adapter is conformant exactly when these pass.
"""

from __future__ import annotations

import requests

from .errors import BackendError
from .modelio import HttpBackend, Prediction, QueryInstance, generate


def check_health(url: str) -> tuple[str, bool, str]:
    backend = HttpBackend(url)
    try:
        payload = backend.health()
    except requests.RequestException as exc:
        return ("health", False, str(exc))
    ok = payload.get("status") == "ok" and bool(payload.get("model"))
    return ("health", ok, str(payload))


def check_echo_roundtrip(url: str) -> tuple[str, bool, str]:
    backend = HttpBackend(url)
    preds = generate(backend, [QueryInstance(id="echo-1", question="abc")])
    ok = len(preds) == 1 and preds[0].answer == "abc" and preds[0].error is None
    return ("echo-roundtrip", ok, repr(preds))


def check_ordered_batch(url: str) -> tuple[str, bool, str]:
    backend = HttpBackend(url)
    batch = [QueryInstance(id=f"b-{i}", question=f"item {i}") for i in range(3)]
    preds = generate(backend, batch)
    ok = [p.id for p in preds] == [b.id for b in batch] and all(
        p.answer == b.question for p, b in zip(preds, batch)
    )
    return ("ordered-batch", ok, repr(preds))


def check_oversized(url: str, max_input_chars: int = 4096) -> tuple[str, bool, str]:
    """An oversized instance must fail alone without sinking its batch."""
    backend = HttpBackend(url)
    oversized = "x" * (max_input_chars + 1)
    preds = generate(
        backend,
        [
            QueryInstance(id="small-1", question="ok"),
            QueryInstance(id="big-1", question=oversized),
            QueryInstance(id="small-2", question="fine"),
        ],
    )
    by_id: dict[str, Prediction] = {p.id: p for p in preds}
    ok = (
        len(preds) == 3
        and by_id["small-1"].error is None
        and by_id["small-2"].error is None
        and by_id["big-1"].error is not None
    )
    return ("oversized-isolated", ok, repr(preds))


def check_malformed(url: str) -> tuple[str, bool, str]:
    response = requests.post(f"{url.rstrip('/')}/generate", json={"bogus": True}, timeout=10)
    return ("malformed-400", response.status_code == 400, f"status {response.status_code}")


def run_all(url: str, max_input_chars: int = 4096) -> list[tuple[str, bool, str]]:
    results = [
        check_health(url),
        check_echo_roundtrip(url),
        check_ordered_batch(url),
        check_oversized(url, max_input_chars),
        check_malformed(url),
    ]
    return results


__all__ = [
    "BackendError",
    "check_health",
    "check_echo_roundtrip",
    "check_ordered_batch",
    "check_oversized",
    "check_malformed",
    "run_all",
]
