"""Training-corpus emission for the zero-shot supervision settings.

Settings map one example to a fixed bundle of (input, target) instances:
single-hop NL questions, the multi-hop NL question, the concatenation of
hop1 with the hop2 placeholder form, and SPARQL pseudo-questions. Targets
join the gold answers with " # " so multi-answer generation round-trips
through exact match.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import decompose as dec
from . import sparql
from .corpus import EntityLexicon, MultiHopExample
from .errors import HarnessError, SparqlError

SETTINGS = ("SM-NL", "S-NL", "S-NL+Concat", "SM-SPARQL", "Combo")

TARGET_SEPARATOR = " # "
CONTEXT_SEPARATOR = "\n"

_ROLES_BY_SETTING = {
    "SM-NL": ("hop1", "hop2", "multi"),
    "S-NL": ("hop1", "hop2"),
    "S-NL+Concat": ("hop1", "hop2", "concat"),
    "SM-SPARQL": ("sparql-hop1", "sparql-hop2", "sparql-multi"),
    "Combo": ("hop1", "hop2", "concat", "sparql-hop1", "sparql-hop2", "sparql-multi"),
}

_CONTEXT_SLOT = {
    "hop1": 1,
    "hop2": 2,
    "multi": "multi",
    "concat": "multi",
    "sparql-hop1": 1,
    "sparql-hop2": 2,
    "sparql-multi": "multi",
}


@dataclass(frozen=True)
class TrainingInstance:
    input: str
    target: str
    setting: str
    source_id: str
    role: str

    def __post_init__(self):
        if not self.target:
            raise HarnessError(f"empty target for {self.source_id} ({self.role})")
        if self.role not in _ROLES_BY_SETTING[self.setting]:
            raise HarnessError(f"role {self.role!r} not allowed in setting {self.setting}")


@dataclass(frozen=True)
class EmissionReport:
    instances: tuple[TrainingInstance, ...]
    skipped: tuple[tuple[str, str], ...] = ()


def _target(answers: Sequence[str]) -> str:
    return TARGET_SEPARATOR.join(answers)


def _nl_parts(example: MultiHopExample, roles) -> dict[str, tuple[str, str]]:
    parts: dict[str, tuple[str, str]] = {}
    if "hop1" in roles:
        parts["hop1"] = (example.hop1.question, _target(example.hop1.answers))
    if "hop2" in roles:
        parts["hop2"] = (example.hop2.question, _target(example.hop2.answers))
    if "multi" in roles:
        parts["multi"] = (example.question, _target(example.answers))
    return parts


def _concat_part(example: MultiHopExample, keep_placeholder: bool) -> tuple[str, str]:
    form = example.hop2.placeholder_form
    if form is None:
        raise HarnessError("no placeholder form")
    second = form if keep_placeholder else dec.substitute(form, example.hop1.answers)
    return f"{example.hop1.question} {second}", _target(example.answers)


def _sparql_parts(example: MultiHopExample, lexicon: EntityLexicon) -> dict[str, tuple[str, str]]:
    if not example.sparql:
        raise SparqlError("no SPARQL query attached")
    query = sparql.parse(example.sparql)
    hop1, hop2 = sparql.split_hops(query)
    hop2_pseudo = dec.substitute(
        sparql.render_pseudo_question(hop2, lexicon), example.hop1.answers
    )
    return {
        "sparql-hop1": (sparql.render_pseudo_question(hop1, lexicon), _target(example.hop1.answers)),
        "sparql-hop2": (hop2_pseudo, _target(example.answers)),
        "sparql-multi": (sparql.render_pseudo_question(query, lexicon), _target(example.answers)),
    }


def emit(
    setting: str,
    examples: Sequence[MultiHopExample],
    lexicon: EntityLexicon | None = None,
    contexts=None,
    *,
    keep_placeholder: bool = True,
) -> EmissionReport:
    """Emit the training instances of one setting, in example order.

    Examples missing SPARQL (or failing the hop split) are skipped and
    counted in SPARQL settings; a missing context in oracle-book mode is an
    error rather than a skip.
    """
    if setting not in SETTINGS:
        raise HarnessError(f"unknown setting {setting!r}; expected one of {', '.join(SETTINGS)}")
    roles = _ROLES_BY_SETTING[setting]
    needs_sparql = any(r.startswith("sparql-") for r in roles)
    if needs_sparql and lexicon is None:
        raise HarnessError(f"setting {setting} requires an entity lexicon")

    instances: list[TrainingInstance] = []
    skipped: list[tuple[str, str]] = []
    for example in examples:
        parts = _nl_parts(example, roles)
        try:
            if "concat" in roles:
                parts["concat"] = _concat_part(example, keep_placeholder)
            if needs_sparql:
                parts.update(_sparql_parts(example, lexicon))
        except (HarnessError, SparqlError) as exc:
            skipped.append((example.id, str(exc)))
            continue
        for role in roles:
            text, target = parts[role]
            if contexts is not None:
                if not contexts.has(example.id):
                    raise HarnessError(f"oracle-book emission lacks a context for {example.id}")
                text = contexts.rendered(example.id, _CONTEXT_SLOT[role]) + CONTEXT_SEPARATOR + text
            instances.append(TrainingInstance(text, target, setting, example.id, role))
    return EmissionReport(tuple(instances), tuple(skipped))


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n"}.get(nxt, "\\" + nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def write_corpus(path: str | Path, setting: str, report: EmissionReport) -> dict:
    """Write instances as escaped input<TAB>target lines plus a manifest."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for inst in report.instances:
            fh.write(f"{_escape(inst.input)}\t{_escape(inst.target)}\n")
    counts: dict[str, int] = {}
    for inst in report.instances:
        counts[inst.role] = counts.get(inst.role, 0) + 1
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    manifest = {
        "setting": setting,
        "n_instances": len(report.instances),
        "counts_per_role": dict(sorted(counts.items())),
        "n_skipped": len(report.skipped),
        "skipped": [list(s) for s in report.skipped],
        "sha256": digest,
    }
    manifest_path = path.with_name(path.name + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def read_corpus(path: str | Path) -> list[tuple[str, str]]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            left, _, right = line.partition("\t")
            pairs.append((_unescape(left), _unescape(right)))
    return pairs
