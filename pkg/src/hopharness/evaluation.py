"""Exact-match scoring, probing orchestration, and correctness analyses.

EM uses set semantics over "#"-separated entries: a prediction is correct
iff its normalized entries equal the normalized gold set, so order and
duplicates never matter. The three probing modes produce per-example
records that aggregate into confusion matrices, conditional success rates,
and chain-vs-prompt consistency.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from . import decompose as dec
from . import modelio
from .corpus import MultiHopExample
from .errors import HarnessError

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")

CONFIGURATIONS = ("00", "01", "10", "11")


def normalize(text: str) -> str:
    """Lowercase, strip punctuation and articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLE_RE.sub(" ", text)
    return " ".join(text.split())


def prediction_set(text: str) -> frozenset[str]:
    """Normalized entry set of a "#"-separated prediction string."""
    return frozenset(e for e in (normalize(part) for part in text.split("#")) if e)


def em(prediction: str, golds: Iterable[str]) -> bool:
    """True iff all gold answers are predicted and nothing extra appears."""
    golds = list(golds)
    if not golds:
        raise HarnessError("em() needs a non-empty gold set")
    gold_set = frozenset(e for e in (normalize(g) for g in golds) if e)
    return prediction_set(prediction) == gold_set


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    qtype: str
    a1: str | None = None
    a2: str | None = None
    a: str | None = None
    a1_star: str | None = None
    a2_star: str | None = None
    s1: bool | None = None
    s2: bool | None = None
    s: bool | None = None


@dataclass(frozen=True)
class ProbeOutcome:
    records: tuple[PredictionRecord, ...]
    failures: tuple[tuple[str, str], ...] = ()
    degenerate: tuple[str, ...] = ()


def _context_for(contexts, example_id: str, slot):
    if contexts is None:
        return None
    return contexts.rendered(example_id, slot)


def _instances(examples, suffix: str, question_of, contexts, slot, prompt=None):
    out = []
    for ex in examples:
        out.append(
            modelio.QueryInstance(
                id=f"{ex.id}::{suffix}",
                question=question_of(ex),
                context=_context_for(contexts, ex.id, slot),
                prompt=prompt,
            )
        )
    return out


def _filter_available(examples, contexts) -> tuple[list[MultiHopExample], list[tuple[str, str]]]:
    if contexts is None:
        return list(examples), []
    kept, dropped = [], []
    for ex in examples:
        if contexts.has(ex.id):
            kept.append(ex)
        else:
            dropped.append((ex.id, "no context"))
    return kept, dropped


def probe_separate(model, examples: Sequence[MultiHopExample], contexts=None) -> ProbeOutcome:
    """Query hop1, hop2, and the multi-hop question independently."""
    examples, failures = _filter_available(examples, contexts)
    if not examples:
        return ProbeOutcome((), tuple(failures))
    preds1 = modelio.generate(model, _instances(examples, "hop1", lambda e: e.hop1.question, contexts, 1))
    preds2 = modelio.generate(model, _instances(examples, "hop2", lambda e: e.hop2.question, contexts, 2))
    preds = modelio.generate(model, _instances(examples, "multi", lambda e: e.question, contexts, "multi"))
    records = []
    for ex, p1, p2, p in zip(examples, preds1, preds2, preds):
        error = p1.error or p2.error or p.error
        if error:
            failures.append((ex.id, error))
            continue
        records.append(
            PredictionRecord(
                id=ex.id,
                qtype=ex.qtype,
                a1=p1.answer,
                a2=p2.answer,
                a=p.answer,
                s1=em(p1.answer, ex.hop1.answers),
                s2=em(p2.answer, ex.hop2.answers),
                s=em(p.answer, ex.answers),
            )
        )
    return ProbeOutcome(tuple(records), tuple(failures))


def probe_chain(model, examples: Sequence[MultiHopExample], contexts=None) -> ProbeOutcome:
    """Answer hop1, substitute the prediction into the placeholder, answer again."""
    missing = [ex.id for ex in examples if ex.hop2.placeholder_form is None]
    if missing:
        raise HarnessError(
            "chain probing needs hop2 placeholder forms; missing for: " + ", ".join(missing[:5])
        )
    examples, failures = _filter_available(examples, contexts)
    if not examples:
        return ProbeOutcome((), tuple(failures))
    preds1 = modelio.generate(model, _instances(examples, "hop1", lambda e: e.hop1.question, contexts, 1))
    degenerate: list[str] = []
    round2: list[modelio.QueryInstance] = []
    kept: list[tuple[MultiHopExample, modelio.Prediction]] = []
    for ex, p1 in zip(examples, preds1):
        if p1.error:
            failures.append((ex.id, p1.error))
            continue
        entries = [part.strip() for part in p1.answer.split("#")]
        entries = [part for part in entries if part]
        if not entries:
            degenerate.append(ex.id)
            entries = [""]
        instantiated = dec.substitute(ex.hop2.placeholder_form, entries)
        round2.append(
            modelio.QueryInstance(
                id=f"{ex.id}::hop2chain",
                question=instantiated,
                context=_context_for(contexts, ex.id, 2),
            )
        )
        kept.append((ex, p1))
    preds2 = modelio.generate(model, round2) if round2 else []
    records = []
    for (ex, p1), p2 in zip(kept, preds2):
        if p2.error:
            failures.append((ex.id, p2.error))
            continue
        records.append(PredictionRecord(id=ex.id, qtype=ex.qtype, a1=p1.answer, a2_star=p2.answer))
    return ProbeOutcome(tuple(records), tuple(failures), tuple(degenerate))


def probe_multihop_prompts(model, examples: Sequence[MultiHopExample], contexts=None) -> ProbeOutcome:
    """Ask the multi-hop question for intermediate and final answers."""
    examples, failures = _filter_available(examples, contexts)
    if not examples:
        return ProbeOutcome((), tuple(failures))
    inter = modelio.generate(
        model,
        _instances(examples, "inter", lambda e: e.question, contexts, "multi", prompt=modelio.INTERMEDIATE_PROMPT),
    )
    final = modelio.generate(
        model,
        _instances(examples, "final", lambda e: e.question, contexts, "multi", prompt=modelio.FINAL_PROMPT),
    )
    records = []
    for ex, pi, pf in zip(examples, inter, final):
        error = pi.error or pf.error
        if error:
            failures.append((ex.id, error))
            continue
        records.append(PredictionRecord(id=ex.id, qtype=ex.qtype, a1_star=pi.answer, a=pf.answer))
    return ProbeOutcome(tuple(records), tuple(failures))


def merge_records(*groups: Sequence[PredictionRecord]) -> list[PredictionRecord]:
    """Combine partial records by example id; later non-null fields win."""
    merged: dict[str, PredictionRecord] = {}
    order: list[str] = []
    for group in groups:
        for record in group:
            if record.id not in merged:
                merged[record.id] = record
                order.append(record.id)
                continue
            base = merged[record.id]
            updates = {k: v for k, v in asdict(record).items() if v is not None and k != "id"}
            merged[record.id] = replace(base, **updates)
    return [merged[i] for i in order]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Joint percentages over correctness configurations plus conditionals."""

    joint: dict[tuple[int, str], float]
    conditional: dict[str, float | None]
    n: int


def confusion(records: Sequence[PredictionRecord]) -> ConfusionMatrix:
    if not records:
        raise HarnessError("confusion() needs at least one record")
    counts: dict[tuple[int, str], int] = {(s, cfg): 0 for s in (1, 0) for cfg in CONFIGURATIONS}
    for record in records:
        if record.s1 is None or record.s2 is None or record.s is None:
            raise HarnessError(f"record {record.id} lacks correctness bits")
        cfg = f"{int(record.s1)}{int(record.s2)}"
        counts[(int(record.s), cfg)] += 1
    n = len(records)
    joint = {key: 100.0 * count / n for key, count in counts.items()}
    conditional: dict[str, float | None] = {}
    for cfg in CONFIGURATIONS:
        denom = counts[(1, cfg)] + counts[(0, cfg)]
        conditional[cfg] = counts[(1, cfg)] / denom if denom else None
    return ConfusionMatrix(joint, conditional, n)


def confusion_by_type(records: Sequence[PredictionRecord]) -> dict[str, ConfusionMatrix]:
    out = {"overall": confusion(records)}
    for qtype in sorted({r.qtype for r in records}):
        out[qtype] = confusion([r for r in records if r.qtype == qtype])
    return out


@dataclass(frozen=True)
class ConsistencyReport:
    hop1_pct: float
    hop2_pct: float
    n: int


def consistency(records: Sequence[PredictionRecord]) -> ConsistencyReport:
    """Agreement between prompt-derived and chain-derived predictions."""
    if not records:
        raise HarnessError("consistency() needs at least one record")
    hop1_hits = hop2_hits = 0
    for record in records:
        if None in (record.a1_star, record.a1, record.a, record.a2_star):
            raise HarnessError(f"record {record.id} lacks chain or prompt predictions")
        hop1_hits += prediction_set(record.a1_star) == prediction_set(record.a1)
        hop2_hits += prediction_set(record.a) == prediction_set(record.a2_star)
    n = len(records)
    return ConsistencyReport(100.0 * hop1_hits / n, 100.0 * hop2_hits / n, n)


def consistency_by_type(records: Sequence[PredictionRecord]) -> dict[str, ConsistencyReport]:
    out = {"overall": consistency(records)}
    for qtype in sorted({r.qtype for r in records}):
        out[qtype] = consistency([r for r in records if r.qtype == qtype])
    return out


def em_summary(records: Sequence[PredictionRecord]) -> dict[str, dict[str, float | None]]:
    """EM percentages per question group (hop1/hop2/multi), overall and per type."""

    def summarize(subset: Sequence[PredictionRecord]) -> dict[str, float | None]:
        out: dict[str, float | None] = {}
        for label, bit in (("hop1", "s1"), ("hop2", "s2"), ("multi", "s")):
            bits = [getattr(r, bit) for r in subset if getattr(r, bit) is not None]
            out[label] = 100.0 * sum(bits) / len(bits) if bits else None
        out["n"] = float(len(subset))
        return out

    result = {"overall": summarize(records)}
    for qtype in sorted({r.qtype for r in records}):
        result[qtype] = summarize([r for r in records if r.qtype == qtype])
    return result


def write_records(path: str | Path, records: Sequence[PredictionRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(asdict(record), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_records(path: str | Path) -> list[PredictionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(PredictionRecord(**json.loads(line)))
    return records
