"""Uniform generation interface: HTTP client plus builtin reference models.

All backends consume fully assembled input strings and return one answer per
instance, in request order. The builtin backends (echo, chain oracle,
shortcut-taker, scripted) are deterministic and exist to test and simulate
the harness without any neural model.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

import requests

from . import synthkg
from .corpus import MultiHopExample
from .errors import BackendError, HarnessError
from .kg import TripleStore

INTERMEDIATE_PROMPT = "Intermediate answer:"
FINAL_PROMPT = "Final answer:"
PROMPTS = (INTERMEDIATE_PROMPT, FINAL_PROMPT)

ANSWER_SEPARATOR = " # "
UNKNOWN = "unknown"

_QUESTION_ANCHORS = (
    "Return the ",
    "What is the ",
    "Which entities",
    "Which one of the following",
    "Which of the entities",
)


@dataclass(frozen=True)
class QueryInstance:
    id: str
    question: str
    context: str | None = None
    prompt: str | None = None

    def __post_init__(self):
        if self.prompt is not None and self.prompt not in PROMPTS:
            raise HarnessError(f"unsupported prompt {self.prompt!r}")


@dataclass(frozen=True)
class Prediction:
    id: str
    answer: str
    latency: float = 0.0
    error: str | None = None


@dataclass(frozen=True)
class BackendAnswer:
    text: str = ""
    error: str | None = None


class GenerationBackend(Protocol):
    name: str

    def answer_batch(self, items: Sequence[tuple[str, str]]) -> list[BackendAnswer]:
        """Answer (id, input) pairs, one answer per item, in order."""
        ...


def assemble_input(instance: QueryInstance) -> str:
    """Join context, question, and prompt with single spaces."""
    parts = []
    if instance.context:
        parts.append(instance.context)
    parts.append(instance.question)
    if instance.prompt:
        parts.append(instance.prompt)
    return " ".join(parts)


def generate(backend: GenerationBackend, batch: Sequence[QueryInstance]) -> list[Prediction]:
    """Run a batch through a backend, preserving request order."""
    ids = [inst.id for inst in batch]
    if len(set(ids)) != len(ids):
        raise BackendError("duplicate instance ids in batch")
    if not batch:
        return []
    items = [(inst.id, assemble_input(inst)) for inst in batch]
    start = time.monotonic()
    answers = backend.answer_batch(items)
    elapsed = time.monotonic() - start
    if len(answers) != len(batch):
        raise BackendError(
            f"backend {backend.name} returned {len(answers)} answers for {len(batch)} instances",
            failed_ids=tuple(ids),
        )
    per_item = elapsed / len(batch)
    return [
        Prediction(inst.id, ans.text, latency=per_item, error=ans.error)
        for inst, ans in zip(batch, answers)
    ]


def _strip_prompt(text: str) -> tuple[str, str | None]:
    for prompt in PROMPTS:
        if text.endswith(prompt):
            return text[: -len(prompt)].rstrip(), prompt
    return text, None


def _extract_question(text: str) -> str:
    """Drop any prepended context by anchoring on the last template prefix."""
    best = -1
    for anchor in _QUESTION_ANCHORS:
        idx = text.rfind(anchor)
        if idx > best:
            best = idx
    return text[best:] if best >= 0 else text


def _join_names(names) -> str:
    ordered = sorted(names)
    return ANSWER_SEPARATOR.join(ordered) if ordered else UNKNOWN


class EchoBackend:
    """Returns every input unchanged."""

    name = "echo"

    def answer_batch(self, items: Sequence[tuple[str, str]]) -> list[BackendAnswer]:
        return [BackendAnswer(text) for _, text in items]


def _apply_condition(kg: TripleStore, candidates: Sequence[str], parsed: synthkg.ParsedQuestion) -> list[str]:
    if parsed.rel2 is not None and parsed.anchor2 is not None:
        return [c for c in candidates if parsed.anchor2 in kg.objects(c, parsed.rel2)]
    if parsed.superlative is not None:
        keyed = [(kg.attribute(c, parsed.attribute), c) for c in candidates]
        keyed = [(v, c) for v, c in keyed if v is not None]
        if not keyed:
            return []
        best = min(keyed) if parsed.superlative == "smallest" else max(keyed)
        return [best[1]]
    if parsed.comparator is not None:
        out = []
        for c in candidates:
            value = kg.attribute(c, parsed.attribute)
            if value is None or type(value) is not type(parsed.threshold):
                continue
            if parsed.comparator in ("greater than", "after"):
                if value > parsed.threshold:
                    out.append(c)
            elif value < parsed.threshold:
                out.append(c)
        return out
    return []


def _hop1_ids(kg: TripleStore, parsed: synthkg.ParsedQuestion) -> list[str]:
    if parsed.kind == "multi_composition":
        return list(kg.objects(parsed.anchor, parsed.rel1))
    return list(kg.subjects(parsed.rel1, parsed.anchor))


class ChainOracle:
    """Reference reasoner: resolves hop1 then hop2 inside the graph."""

    name = "chain-oracle"

    def __init__(self, kg: TripleStore):
        self.kg = kg

    def answer_batch(self, items: Sequence[tuple[str, str]]) -> list[BackendAnswer]:
        return [BackendAnswer(self._answer(text)) for _, text in items]

    def _answer(self, text: str) -> str:
        kg = self.kg
        body, prompt = _strip_prompt(text)
        parsed = synthkg.parse_question(kg, _extract_question(body))
        if parsed is None:
            return UNKNOWN
        if parsed.kind == "hop1_objects":
            return _join_names(kg.name(i) for i in kg.objects(parsed.anchor, parsed.rel1))
        if parsed.kind == "hop1_subjects":
            return _join_names(kg.name(i) for i in kg.subjects(parsed.rel1, parsed.anchor))
        if parsed.kind == "entity_object":
            final: list[str] = []
            for b in parsed.bridges:
                final.extend(o for o in kg.objects(b, parsed.rel2) if o not in final)
            return _join_names(kg.name(i) for i in final)
        if parsed.kind == "hop2_template":
            kept = _apply_condition(kg, parsed.candidates, parsed)
            return _join_names(kg.name(i) for i in kept)
        hop1 = _hop1_ids(kg, parsed)
        if prompt == INTERMEDIATE_PROMPT:
            return _join_names(kg.name(i) for i in hop1)
        if parsed.kind == "multi_composition":
            final = []
            for b in hop1:
                final.extend(o for o in kg.objects(b, parsed.rel2) if o not in final)
            return _join_names(kg.name(i) for i in final)
        return _join_names(kg.name(i) for i in _apply_condition(kg, hop1, parsed))


class ShortcutModel:
    """Answers multi-hop questions from type priors, bypassing the first hop.

    The prior for a question form is the globally most common candidate set
    of its relation (modal object set for "the R of E" questions, modal
    subject set for "have E as their R" questions). Candidate-list questions
    are answered from the listed candidates and are usually correct; entity
    and multi-hop questions ignore the specific entity and are wrong unless
    the prior happens to coincide with gold.
    """

    name = "shortcut"

    def __init__(self, kg: TripleStore):
        self.kg = kg
        self._objects_prior: dict[str, tuple[str, ...]] = {}
        self._subjects_prior: dict[str, tuple[str, ...]] = {}

    def _prior(self, rel: str, direction: str) -> tuple[str, ...]:
        cache = self._objects_prior if direction == "objects" else self._subjects_prior
        if rel not in cache:
            counts: dict[tuple[str, ...], int] = {}
            keys = sorted(self.kg.names)
            for key in keys:
                group = (
                    self.kg.objects(key, rel) if direction == "objects" else self.kg.subjects(rel, key)
                )
                if group:
                    counts[tuple(sorted(group))] = counts.get(tuple(sorted(group)), 0) + 1
            if not counts:
                cache[rel] = ()
            else:
                cache[rel] = min(counts, key=lambda g: (-counts[g], g))
        return cache[rel]

    def answer_batch(self, items: Sequence[tuple[str, str]]) -> list[BackendAnswer]:
        return [BackendAnswer(self._answer(text)) for _, text in items]

    def _answer(self, text: str) -> str:
        kg = self.kg
        body, prompt = _strip_prompt(text)
        parsed = synthkg.parse_question(kg, _extract_question(body))
        if parsed is None:
            return UNKNOWN
        if parsed.kind == "hop1_objects":
            return _join_names(kg.name(i) for i in self._prior(parsed.rel1, "objects"))
        if parsed.kind == "hop1_subjects":
            return _join_names(kg.name(i) for i in self._prior(parsed.rel1, "subjects"))
        if parsed.kind == "entity_object":
            return _join_names(kg.name(i) for i in self._prior(parsed.rel2, "objects"))
        if parsed.kind == "hop2_template":
            kept = _apply_condition(kg, parsed.candidates, parsed)
            return _join_names(kg.name(i) for i in kept)
        direction = "objects" if parsed.kind == "multi_composition" else "subjects"
        prior = self._prior(parsed.rel1, direction)
        if prompt == INTERMEDIATE_PROMPT:
            return _join_names(kg.name(i) for i in prior)
        if parsed.kind == "multi_composition":
            return _join_names(kg.name(i) for i in self._prior(parsed.rel2, "objects"))
        return _join_names(kg.name(i) for i in _apply_condition(kg, prior, parsed))


def _unit_draw(*parts) -> float:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


class ScriptedModel:
    """Emits gold answers with configured per-role probabilities.

    Correctness draws are seeded per example id, so the hop1/hop2 outcomes
    that condition the multi-hop rate are reproducible without state.
    """

    name = "scripted"

    RATE_KEYS = ("hop1", "hop2", "multi|00", "multi|01", "multi|10", "multi|11")

    def __init__(self, rates: dict[str, float], seed: int, examples: Sequence[MultiHopExample]):
        for key in self.RATE_KEYS:
            if key not in rates:
                raise HarnessError(f"missing correctness rate {key!r}")
            if not 0.0 <= rates[key] <= 1.0:
                raise HarnessError(f"correctness rate {key!r} outside [0, 1]: {rates[key]}")
        self.rates = dict(rates)
        self.seed = seed
        self._index: dict[str, tuple[str, str, tuple[str, ...]]] = {}
        for ex in examples:
            self._index[ex.hop1.question] = (ex.id, "hop1", ex.hop1.answers)
            self._index[ex.hop2.question] = (ex.id, "hop2", ex.hop2.answers)
            self._index[ex.question] = (ex.id, "multi", ex.answers)

    def _correct(self, example_id: str, role: str) -> bool:
        if role in ("hop1", "hop2"):
            return _unit_draw(self.seed, example_id, role) < self.rates[role]
        s1 = int(self._correct(example_id, "hop1"))
        s2 = int(self._correct(example_id, "hop2"))
        return _unit_draw(self.seed, example_id, "multi") < self.rates[f"multi|{s1}{s2}"]

    def answer_batch(self, items: Sequence[tuple[str, str]]) -> list[BackendAnswer]:
        out = []
        for _, text in items:
            body, _ = _strip_prompt(text)
            entry = self._index.get(_extract_question(body))
            if entry is None:
                digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
                out.append(BackendAnswer(f"noise-{digest}"))
                continue
            example_id, role, answers = entry
            if self._correct(example_id, role):
                out.append(BackendAnswer(ANSWER_SEPARATOR.join(answers)))
            else:
                out.append(BackendAnswer(f"wrong-{role}-{example_id}"))
        return out


class HttpBackend:
    """Client for the POST /generate, GET /health wire protocol."""

    def __init__(
        self,
        url: str,
        *,
        max_new_tokens: int = 64,
        timeout: float = 30.0,
        in_flight: int = 8,
        chunk_size: int = 16,
        retries: int = 3,
        backoff: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.url = url.rstrip("/")
        self.max_new_tokens = max_new_tokens
        self.timeout = timeout
        self.in_flight = max(1, in_flight)
        self.chunk_size = max(1, chunk_size)
        self.retries = retries
        self.backoff = backoff
        self.session = session or requests.Session()
        self.name = f"http:{self.url}"

    def health(self) -> dict:
        response = self.session.get(f"{self.url}/health", timeout=self.timeout)
        response.raise_for_status()
        return response.json()

    def _post(self, items: Sequence[tuple[str, str]]) -> requests.Response:
        payload = {
            "instances": [{"id": i, "input": text} for i, text in items],
            "parameters": {"max_new_tokens": self.max_new_tokens, "greedy": True},
        }
        failed = tuple(i for i, _ in items)
        for attempt in range(self.retries + 1):
            try:
                response = self.session.post(f"{self.url}/generate", json=payload, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                if attempt == self.retries:
                    raise BackendError(f"backend unreachable: {exc}", failed_ids=failed) from exc
            else:
                if response.status_code == 503 and attempt < self.retries:
                    pass
                else:
                    return response
            time.sleep(self.backoff * 2**attempt)
        raise BackendError("backend unreachable after retries", failed_ids=failed)

    def _answers_from(self, response: requests.Response, items: Sequence[tuple[str, str]]) -> list[BackendAnswer]:
        try:
            data = response.json()
            by_id = {p["id"]: p["answer"] for p in data["predictions"]}
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendError(
                f"malformed response body: {exc}", failed_ids=tuple(i for i, _ in items)
            ) from exc
        missing = [i for i, _ in items if i not in by_id]
        if missing:
            raise BackendError("response missing predictions", failed_ids=tuple(missing))
        return [BackendAnswer(by_id[i]) for i, _ in items]

    def _answer_chunk(self, items: Sequence[tuple[str, str]]) -> list[BackendAnswer]:
        response = self._post(items)
        if response.status_code == 200:
            return self._answers_from(response, items)
        if response.status_code == 413 and len(items) > 1:
            # Isolate oversized instances so the rest of the batch survives.
            out: list[BackendAnswer] = []
            for item in items:
                out.extend(self._answer_chunk([item]))
            return out
        if response.status_code == 413:
            return [BackendAnswer(error=f"oversized input (413) for id {items[0][0]}")]
        raise BackendError(
            f"backend returned HTTP {response.status_code}: {response.text[:200]}",
            failed_ids=tuple(i for i, _ in items),
        )

    def answer_batch(self, items: Sequence[tuple[str, str]]) -> list[BackendAnswer]:
        chunks = [items[i : i + self.chunk_size] for i in range(0, len(items), self.chunk_size)]
        if len(chunks) == 1:
            return self._answer_chunk(chunks[0])
        with ThreadPoolExecutor(max_workers=self.in_flight) as pool:
            results = list(pool.map(self._answer_chunk, chunks))
        return [answer for chunk in results for answer in chunk]


def chain_oracle(kg: TripleStore) -> ChainOracle:
    return ChainOracle(kg)


def shortcut_model(kg: TripleStore) -> ShortcutModel:
    return ShortcutModel(kg)


def scripted_model(rates: dict[str, float], seed: int, examples: Sequence[MultiHopExample]) -> ScriptedModel:
    return ScriptedModel(rates, seed, examples)
