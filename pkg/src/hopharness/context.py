"""Pseudo-gold plus negative context assembly for oracle-book probing.

The pseudo-gold passage is the lowest-rank retrieved passage containing a
gold answer (normalized substring containment); the negative is the first
containing none. Concatenation order is a deterministic per-example coin so
contexts are byte-identical across runs under the same seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import MultiHopExample, Passage, RetrievalRun
from .errors import ContextError, HarnessError
from .evaluation import normalize
from .synthkg import hop_qid

PASSAGE_SEPARATOR = "\n"

_SCAN_LIMIT = 100


@dataclass(frozen=True)
class ContextPair:
    example_id: str
    hop_index: int
    positive: Passage
    negative: Passage
    order_seed: int


@dataclass(frozen=True)
class MultiHopContext:
    pairs: tuple[ContextPair, ...]
    rendered: str


def _contains_any(text: str, answers: Iterable[str]) -> bool:
    haystack = normalize(text)
    return any(normalize(answer) in haystack for answer in answers if normalize(answer))


def select_pseudo_gold(run: RetrievalRun, qid: str, answers: Sequence[str]) -> Passage:
    """First-by-rank passage containing any gold answer."""
    for passage in run.for_qid(qid)[:_SCAN_LIMIT]:
        if _contains_any(passage.text, answers):
            return passage
    raise ContextError("no pseudo-gold passage contains an answer", qid=qid)


def select_negative(run: RetrievalRun, qid: str, answers: Sequence[str]) -> Passage:
    """First-by-rank passage containing no gold answer."""
    for passage in run.for_qid(qid)[:_SCAN_LIMIT]:
        if not _contains_any(passage.text, answers):
            return passage
    raise ContextError("every passage contains an answer; no negative", qid=qid)


def positive_first(order_seed: int, example_id: str, hop_index: int) -> bool:
    """Deterministic coin for the concatenation order of one context pair."""
    digest = hashlib.sha256(f"{order_seed}:{example_id}:{hop_index}".encode("utf-8")).digest()
    return digest[0] % 2 == 0


def assemble(pair: ContextPair) -> str:
    first_positive = positive_first(pair.order_seed, pair.example_id, pair.hop_index)
    ordered = (pair.positive, pair.negative) if first_positive else (pair.negative, pair.positive)
    return PASSAGE_SEPARATOR.join(p.text for p in ordered)


def assemble_multihop(pairs: Sequence[ContextPair]) -> MultiHopContext:
    if len(pairs) != 2 or [p.hop_index for p in pairs] != [1, 2]:
        raise HarnessError("multi-hop context needs exactly the hop-1 and hop-2 pairs, in order")
    rendered = PASSAGE_SEPARATOR.join(assemble(p) for p in pairs)
    return MultiHopContext(tuple(pairs), rendered)


class ContextBook:
    """Rendered contexts per example: hop 1, hop 2, and their concatenation."""

    def __init__(self, by_hop: dict[tuple[str, int], str]):
        self._by_hop = dict(by_hop)

    def has(self, example_id: str) -> bool:
        return (example_id, 1) in self._by_hop and (example_id, 2) in self._by_hop

    def rendered(self, example_id: str, slot) -> str:
        if slot == "multi":
            return PASSAGE_SEPARATOR.join(
                (self._by_hop[(example_id, 1)], self._by_hop[(example_id, 2)])
            )
        return self._by_hop[(example_id, slot)]

    def items(self) -> list[tuple[str, int, str]]:
        return [(ex, hop, text) for (ex, hop), text in sorted(self._by_hop.items())]


def build_pairs(
    run: RetrievalRun, example: MultiHopExample, order_seed: int
) -> tuple[ContextPair, ContextPair]:
    pairs = []
    for hop_index, hop in ((1, example.hop1), (2, example.hop2)):
        qid = hop_qid(example.id, hop_index)
        pairs.append(
            ContextPair(
                example_id=example.id,
                hop_index=hop_index,
                positive=select_pseudo_gold(run, qid, hop.answers),
                negative=select_negative(run, qid, hop.answers),
                order_seed=order_seed,
            )
        )
    return pairs[0], pairs[1]


def build_contexts(
    run: RetrievalRun, examples: Sequence[MultiHopExample], order_seed: int
) -> tuple[ContextBook, list[tuple[str, str]]]:
    """Assemble contexts for every example; report the ones lacking passages."""
    by_hop: dict[tuple[str, int], str] = {}
    skipped: list[tuple[str, str]] = []
    for example in examples:
        try:
            pair1, pair2 = build_pairs(run, example, order_seed)
        except ContextError as exc:
            skipped.append((example.id, str(exc)))
            continue
        by_hop[(example.id, 1)] = assemble(pair1)
        by_hop[(example.id, 2)] = assemble(pair2)
    return ContextBook(by_hop), skipped


def write_cache(path: str | Path, book: ContextBook) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for example_id, hop, rendered in book.items():
            fh.write(json.dumps({"id": example_id, "hop": hop, "rendered": rendered}, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_cache(path: str | Path) -> ContextBook:
    by_hop: dict[tuple[str, int], str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            by_hop[(record["id"], int(record["hop"]))] = record["rendered"]
    return ContextBook(by_hop)
