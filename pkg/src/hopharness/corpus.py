"""Dataset, lexicon, and retrieval-run loading.

All input files are UTF-8 and line-delimited. Dataset files carry one JSON
record per line (schema documented in docs/formats.md); retrieval runs are
tab-separated (qid, rank, text); lexicons are tab-separated (id, name).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from . import decompose as dec
from .errors import DecompositionError, RecordError

logger = logging.getLogger(__name__)

MAX_PASSAGES = 100


@dataclass(frozen=True)
class HopQuestion:
    question: str
    answers: tuple[str, ...]
    placeholder_form: str | None = None


@dataclass(frozen=True)
class MultiHopExample:
    id: str
    qtype: str
    question: str
    answers: tuple[str, ...]
    hop1: HopQuestion
    hop2: HopQuestion
    sparql: str | None = None
    hop_count: int = 2


@dataclass(frozen=True)
class Passage:
    rank: int
    text: str


@dataclass(frozen=True)
class RetrievalRun:
    """Ranked passages per question id, capped at the top 100."""

    passages: dict[str, tuple[Passage, ...]] = field(default_factory=dict)

    def for_qid(self, qid: str) -> tuple[Passage, ...]:
        return self.passages.get(qid, ())


class EntityLexicon:
    """Entity identifier to canonical surface name."""

    def __init__(self, names: dict[str, str]):
        for ident, name in names.items():
            if not name:
                raise RecordError(f"empty name for identifier {ident!r}")
        self._names = dict(names)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, identifier: str) -> bool:
        return self.lookup(identifier) is not None

    def lookup(self, identifier: str) -> str | None:
        """Look up an identifier, falling back to its prefix-local part."""
        if identifier in self._names:
            return self._names[identifier]
        _, _, local = identifier.rpartition(":")
        if local and local in self._names:
            return self._names[local]
        return None

    def items(self) -> Iterable[tuple[str, str]]:
        return self._names.items()


def _require(record: dict, key: str, index: int):
    if key not in record or record[key] in (None, "", []):
        raise RecordError("missing or empty", index=index, field=key)
    return record[key]


def _answers(record: dict, key: str, index: int) -> tuple[str, ...]:
    values = _require(record, key, index)
    if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
        raise RecordError("expected a list of strings", index=index, field=key)
    for v in values:
        if not v.strip():
            raise RecordError("blank answer string", index=index, field=key)
    return tuple(values)


def _iter_json_lines(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(f"invalid JSON: {exc}", index=index) from None
            if not isinstance(record, dict):
                raise RecordError("record is not a JSON object", index=index)
            yield index, record


def raw_from_record(record: dict, index: int) -> dec.RawExample:
    qtype = _require(record, "qtype", index)
    if qtype not in dec.QTYPES:
        raise RecordError(f"unknown qtype {qtype!r}", index=index, field="qtype")
    if qtype == "composition":
        if not record.get("machine_question") and not record.get("bridge_entity"):
            raise RecordError(
                "composition needs machine_question or bridge_entity", index=index, field="machine_question"
            )
        hop1 = tuple(record.get("hop1_answers") or ())
    else:
        hop1 = _answers(record, "hop1_answers", index)
    return dec.RawExample(
        id=str(_require(record, "id", index)),
        qtype=qtype,
        question=_require(record, "question", index),
        answers=_answers(record, "answers", index),
        source_question=_require(record, "source_question", index),
        phrase=_require(record, "phrase", index),
        machine_question=record.get("machine_question"),
        bridge_entity=record.get("bridge_entity"),
        hop1_answers=hop1,
        sparql=record.get("sparql"),
    )


def example_from_raw(raw: dec.RawExample) -> MultiHopExample:
    pair = dec.decompose(raw)
    example = MultiHopExample(
        id=raw.id,
        qtype=raw.qtype,
        question=raw.question,
        answers=raw.answers,
        hop1=HopQuestion(pair.hop1_question, pair.hop1_answers),
        hop2=HopQuestion(pair.hop2_question, pair.hop2_answers, pair.hop2_placeholder),
        sparql=raw.sparql,
    )
    _validate_example(example)
    return example


def _validate_example(example: MultiHopExample) -> None:
    if example.hop_count != 2:
        raise RecordError(f"hop_count must be 2, got {example.hop_count}", field="hop_count")
    if set(example.hop2.answers) != set(example.answers):
        raise RecordError(
            "second-hop answers differ from the multi-hop answers",
            field="answers",
        )
    if not example.answers:
        raise RecordError("empty answer set", field="answers")
    form = example.hop2.placeholder_form
    if form is not None and form.count(dec.PLACEHOLDER) != 1:
        raise RecordError(
            f"placeholder form must contain {dec.PLACEHOLDER!r} exactly once",
            field="placeholder_form",
        )


def load_cwq(path: str | Path, *, skip_invalid: bool = False) -> list[MultiHopExample]:
    """Load a ComplexWebQuestions-style dataset file.

    Hop questions are populated by the decomposition heuristics; invalid
    records abort the load unless ``skip_invalid`` is set, in which case they
    are logged and dropped.
    """
    examples: list[MultiHopExample] = []
    for index, record in _iter_json_lines(path):
        try:
            examples.append(example_from_raw(raw_from_record(record, index)))
        except (RecordError, DecompositionError) as exc:
            if skip_invalid:
                logger.warning("skipping record %d: %s", index, exc)
                continue
            if isinstance(exc, DecompositionError):
                raise RecordError(str(exc), index=index) from None
            raise
    if not examples:
        raise RecordError(f"no records in {path}")
    return examples


def load_hotpotqa_decomposed(path: str | Path, *, skip_invalid: bool = False) -> list[MultiHopExample]:
    """Load manually decomposed HotpotQA examples.

    Hop questions are taken verbatim from the annotations; every example is
    tagged composition. Records without exactly two hops are rejected.
    """
    examples: list[MultiHopExample] = []
    for index, record in _iter_json_lines(path):
        try:
            examples.append(_hotpot_example(record, index))
        except RecordError as exc:
            if skip_invalid:
                logger.warning("skipping record %d: %s", index, exc)
                continue
            raise
    if not examples:
        raise RecordError(f"no records in {path}")
    return examples


def _hotpot_example(record: dict, index: int) -> MultiHopExample:
    hops = _require(record, "hops", index)
    if not isinstance(hops, list) or len(hops) != 2:
        raise RecordError(
            f"expected exactly 2 annotated hops, got {len(hops) if isinstance(hops, list) else type(hops).__name__}",
            index=index,
            field="hops",
        )
    answers = _answers(record, "answers", index)
    hop_questions = []
    for h, hop in enumerate(hops):
        if not isinstance(hop, dict):
            raise RecordError("hop is not a JSON object", index=index, field="hops")
        question = _require(hop, "question", index)
        hop_answers = _answers(hop, "answers", index) if h == 0 else answers
        hop_questions.append(
            HopQuestion(question, hop_answers, hop.get("placeholder_form") if h == 1 else None)
        )
    if "answers" in hops[1] and set(_answers(hops[1], "answers", index)) != set(answers):
        raise RecordError("second-hop answers differ from the multi-hop answers", index=index, field="hops")
    example = MultiHopExample(
        id=str(_require(record, "id", index)),
        qtype="composition",
        question=_require(record, "question", index),
        answers=answers,
        hop1=hop_questions[0],
        hop2=hop_questions[1],
        sparql=record.get("sparql"),
    )
    _validate_example(example)
    return example


def load_retrieval_run(path: str | Path) -> RetrievalRun:
    """Load a tab-separated (qid, rank, text) retrieval run file.

    Per-question lists come out sorted by rank; entries beyond rank 100 are
    dropped. Duplicate or non-positive ranks are errors.
    """
    by_qid: dict[str, dict[int, str]] = {}
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise RecordError("expected qid<TAB>rank<TAB>text", index=index)
            qid, rank_text, text = parts
            try:
                rank = int(rank_text)
            except ValueError:
                raise RecordError(f"rank {rank_text!r} is not an integer", index=index, field="rank") from None
            if rank < 1:
                raise RecordError(f"non-positive rank {rank}", index=index, field="rank")
            slots = by_qid.setdefault(qid, {})
            if rank in slots:
                raise RecordError(f"duplicate rank {rank} for qid {qid!r}", index=index, field="rank")
            slots[rank] = text
    passages: dict[str, tuple[Passage, ...]] = {}
    for qid, slots in by_qid.items():
        ranks = sorted(slots)
        if ranks[0] != 1:
            raise RecordError(f"ranks for qid {qid!r} do not start at 1", field="rank")
        passages[qid] = tuple(Passage(r, slots[r]) for r in ranks if r <= MAX_PASSAGES)
    return RetrievalRun(passages)


def load_lexicon(path: str | Path) -> EntityLexicon:
    """Load a tab-separated identifier/name lexicon file."""
    names: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise RecordError("expected id<TAB>name", index=index)
            ident, name = parts
            if ident in names:
                raise RecordError(f"duplicate identifier {ident!r}", index=index)
            if not name:
                raise RecordError(f"empty name for identifier {ident!r}", index=index)
            names[ident] = name
    return EntityLexicon(names)


def write_examples(path: str | Path, records: Iterable[dict]) -> None:
    """Write dataset records as one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def write_lexicon(path: str | Path, lexicon: EntityLexicon) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ident, name in sorted(lexicon.items()):
            fh.write(f"{ident}\t{name}\n")


def write_retrieval_run(path: str | Path, run: RetrievalRun) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(run.passages):
            for passage in run.passages[qid]:
                fh.write(f"{qid}\t{passage.rank}\t{passage.text}\n")
