"""Synthetic knowledge graphs and two-hop questions with brute-force gold.

The generated worlds are small enough for exhaustive oracles but structured
enough to exercise all four question types. Questions are rendered from
fixed templates with slots; the same template grammar is what the builtin
reference backends parse, so every generated question is answerable in
principle.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import random
import re
from dataclasses import dataclass

from . import corpus, sparql
from .corpus import MultiHopExample, Passage, RetrievalRun
from .decompose import RawExample
from .errors import HarnessError
from .kg import LiteralValue, TripleStore

PREFIX = ("ns", "http://synth.example/")

_ADJECTIVES = (
    "amber", "brisk", "cedar", "dapper", "ebon", "fervid", "gilded", "hazel",
    "ivory", "jade", "keen", "lucid", "mellow", "noble", "ochre", "pluvial",
    "quartz", "russet", "sable", "tawny", "umber", "vivid", "wry", "zesty",
)
_NOUNS = (
    "falcon", "harbor", "lantern", "meadow", "nimbus", "orchard", "prism",
    "quarry", "ridge", "spire", "thicket", "vale", "warden", "yonder",
    "zephyr", "bastion", "cipher", "delta", "ember", "fjord", "grove",
)
_RELATIONS = (
    "mentor", "rival", "patron", "supplier", "neighbor", "founder",
    "sponsor", "guardian", "successor", "landlord", "architect", "curator",
    "chronicler", "envoy", "steward", "quartermaster",
)
_NUMERIC_ATTRIBUTES = ("calling_code", "founding_year", "elevation_score", "budget_rank")
_DATE_ATTRIBUTES = ("charter_date",)

QTYPES = ("composition", "conjunction", "superlative", "comparative")


def derive_rng(*parts) -> random.Random:
    """Seed an RNG from a stable hash so parallel derivations agree across runs."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def display(identifier: str) -> str:
    return identifier.replace("_", " ")


def build(seed: int, n_entities: int = 200, n_relations: int = 12, fanout: int = 2) -> TripleStore:
    """Build a connected synthetic store with all-distinct attribute values."""
    if n_entities < 10:
        raise HarnessError("n_entities must be at least 10")
    if n_entities > len(_ADJECTIVES) * len(_NOUNS):
        raise HarnessError(
            f"cannot name {n_entities} entities uniquely (pool of {len(_ADJECTIVES) * len(_NOUNS)})"
        )
    if fanout < 1:
        raise HarnessError("fanout must be at least 1")
    rng = derive_rng(seed, "kg")
    name_pool = [f"{a.title()} {n.title()}" for a in _ADJECTIVES for n in _NOUNS]
    names_list = rng.sample(name_pool, n_entities)
    entities = [f"e{i:04d}" for i in range(n_entities)]
    names = dict(zip(entities, names_list))

    if n_relations <= len(_RELATIONS):
        relations = list(_RELATIONS[:n_relations])
    else:
        relations = list(_RELATIONS) + [f"liaison_{k}" for k in range(n_relations - len(_RELATIONS))]

    # Spanning tree for connectivity; preferential attachment makes some
    # entities popular so candidate-set priors are non-degenerate.
    slots: dict[tuple[str, str], list[str]] = {}
    for i in range(1, n_entities):
        weights = [1.0 / (j + 1) for j in range(i)]
        parent = rng.choices(entities[:i], weights=weights, k=1)[0]
        rel = relations[i % len(relations)]
        slots[(entities[i], rel)] = [parent]

    ranked = {rel: rng.sample(entities, n_entities) for rel in relations}
    for s in entities:
        for rel in relations:
            have = slots.get((s, rel), [])
            want = 0 if not have and rng.random() > 0.45 else rng.randint(1, fanout)
            if want <= len(have):
                continue
            pool = ranked[rel]
            weights = [1.0 / (j + 2) ** 1.3 for j in range(n_entities)]
            picks = rng.choices(pool, weights=weights, k=4 * fanout)
            for obj in picks:
                if len(have) >= want:
                    break
                if obj != s and obj not in have:
                    have.append(obj)
            if have:
                slots[(s, rel)] = have

    triples = [(s, rel, o) for (s, rel), objs in sorted(slots.items()) for o in objs]

    attributes: list[tuple[str, str, LiteralValue]] = []
    for attr in _NUMERIC_ATTRIBUTES:
        values = rng.sample(range(100, 100 + 50 * n_entities), n_entities)
        attributes.extend((e, attr, v) for e, v in zip(entities, values))
    base = _dt.date(1950, 1, 1)
    for attr in _DATE_ATTRIBUTES:
        offsets = rng.sample(range(40_000), n_entities)
        attributes.extend((e, attr, base + _dt.timedelta(days=d)) for e, d in zip(entities, offsets))

    return TripleStore(names, triples, attributes)


@dataclass(frozen=True)
class QuestionSpec:
    """Executable description of one generated two-hop question."""

    qtype: str
    anchor: str
    rel1: str
    rel2: str | None = None
    anchor2: str | None = None
    attribute: str | None = None
    superlative: str | None = None
    comparator: str | None = None
    threshold: LiteralValue | None = None


def gold(kg: TripleStore, spec: QuestionSpec) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Brute-force gold answers (hop1 names, final names) in canonical order."""
    if spec.qtype == "composition":
        hop1_ids = list(kg.objects(spec.anchor, spec.rel1))
        final_ids: list[str] = []
        for b in hop1_ids:
            final_ids.extend(o for o in kg.objects(b, spec.rel2) if o not in final_ids)
    else:
        hop1_ids = list(kg.subjects(spec.rel1, spec.anchor))
        if spec.qtype == "conjunction":
            final_ids = [c for c in hop1_ids if spec.anchor2 in kg.objects(c, spec.rel2)]
        elif spec.qtype == "superlative":
            keyed = [(kg.attribute(c, spec.attribute), c) for c in hop1_ids]
            keyed = [(v, c) for v, c in keyed if v is not None]
            if not keyed:
                return _names(kg, hop1_ids), ()
            best = min(keyed) if spec.superlative == "smallest" else max(keyed)
            final_ids = [best[1]]
        else:
            final_ids = [c for c in hop1_ids if _passes(kg.attribute(c, spec.attribute), spec)]
    return _names(kg, hop1_ids), _names(kg, final_ids)


def _passes(value: LiteralValue | None, spec: QuestionSpec) -> bool:
    if value is None:
        return False
    if spec.comparator in ("greater than", "after"):
        return value > spec.threshold
    return value < spec.threshold


def _names(kg: TripleStore, ids: list[str] | tuple[str, ...]) -> tuple[str, ...]:
    return tuple(sorted(kg.name(i) for i in ids))


def _threshold_text(value: LiteralValue) -> str:
    return value.isoformat() if isinstance(value, _dt.date) else str(value)


def nl_questions(kg: TripleStore, spec: QuestionSpec) -> dict[str, str]:
    """Render the multi-hop question and decomposition inputs for a spec."""
    anchor = kg.name(spec.anchor)
    rel1 = display(spec.rel1)
    if spec.qtype == "composition":
        bridge = ", ".join(_names(kg, kg.objects(spec.anchor, spec.rel1)))
        rel2 = display(spec.rel2)
        phrase = f"the {rel1} of {anchor}"
        multi = f"What is the {rel2} of {phrase}?"
        return {
            "question": multi,
            "machine_question": multi,
            "source_question": f"What is the {rel2} of {bridge}?",
            "phrase": phrase,
        }
    hop1_q = f"Which entities have {anchor} as their {rel1}?"
    if spec.qtype == "conjunction":
        rel2 = display(spec.rel2)
        anchor2 = kg.name(spec.anchor2)
        condition = f"{rel2} is {anchor2}"
        multi = f"Which entities that have {anchor} as their {rel1} also have {anchor2} as their {rel2}?"
    elif spec.qtype == "superlative":
        attr = display(spec.attribute)
        condition = f"{attr} is {spec.superlative}"
        multi = f"Which of the entities that have {anchor} as their {rel1} has the {spec.superlative} {attr}?"
    else:
        attr = display(spec.attribute)
        value = _threshold_text(spec.threshold)
        condition = f"{attr} is {spec.comparator} {value}"
        multi = f"Which of the entities that have {anchor} as their {rel1} have {attr} {spec.comparator} {value}?"
    return {"question": multi, "source_question": hop1_q, "phrase": condition}


def spec_sparql(spec: QuestionSpec) -> str:
    """Serialize the multi-hop query equivalent to a spec."""
    ns = f"{PREFIX[0]}:"
    var_x = sparql.Variable("x")
    var_n = sparql.Variable("n")
    prefixes = (PREFIX,)
    if spec.qtype == "composition":
        patterns = (
            sparql.TriplePattern(sparql.Entity(ns + spec.anchor), sparql.Entity(ns + spec.rel1), sparql.Variable("mid")),
            sparql.TriplePattern(sparql.Variable("mid"), sparql.Entity(ns + spec.rel2), var_x),
        )
        filters: tuple = ()
        ordering = None
    elif spec.qtype == "conjunction":
        patterns = (
            sparql.TriplePattern(var_x, sparql.Entity(ns + spec.rel1), sparql.Entity(ns + spec.anchor)),
            sparql.TriplePattern(var_x, sparql.Entity(ns + spec.rel2), sparql.Entity(ns + spec.anchor2)),
        )
        filters = ()
        ordering = None
    else:
        patterns = (
            sparql.TriplePattern(var_x, sparql.Entity(ns + spec.rel1), sparql.Entity(ns + spec.anchor)),
            sparql.TriplePattern(var_x, sparql.Entity(ns + spec.attribute), var_n),
        )
        if spec.qtype == "superlative":
            filters = ()
            direction = "asc" if spec.superlative == "smallest" else "desc"
            ordering = sparql.Ordering("n", direction, 1)
        else:
            op = ">" if spec.comparator in ("greater than", "after") else "<"
            filters = (sparql.Comparison("n", op, sparql.Literal(spec.threshold)),)
            ordering = None
    query = sparql.SparqlQuery(prefixes, ("x",), True, patterns, filters, ordering)
    return sparql.serialize(query)


def _draw_spec(kg: TripleStore, qtype: str, rng: random.Random) -> QuestionSpec | None:
    entities = sorted(kg.names)
    relations = sorted(kg.relations)
    if qtype == "composition":
        anchor = rng.choice(entities)
        rel1 = rng.choice(relations)
        bridges = kg.objects(anchor, rel1)
        if not bridges:
            return None
        rel2 = rng.choice(relations)
        if not any(kg.objects(b, rel2) for b in bridges):
            return None
        return QuestionSpec(qtype, anchor, rel1, rel2=rel2)
    anchor = rng.choice(entities)
    rel1 = rng.choice(relations)
    candidates = kg.subjects(rel1, anchor)
    if len(candidates) < 2:
        return None
    if qtype == "conjunction":
        pivot = rng.choice(sorted(candidates))
        rel2 = rng.choice(relations)
        targets = kg.objects(pivot, rel2)
        if not targets:
            return None
        anchor2 = rng.choice(sorted(targets))
        return QuestionSpec(qtype, anchor, rel1, rel2=rel2, anchor2=anchor2)
    attribute = rng.choice(sorted(kg.attribute_names))
    values = sorted(v for v in (kg.attribute(c, attribute) for c in candidates) if v is not None)
    if len(values) < 2:
        return None
    if qtype == "superlative":
        return QuestionSpec(qtype, anchor, rel1, attribute=attribute, superlative=rng.choice(("smallest", "largest")))
    k = rng.randrange(1, len(values))
    if rng.random() < 0.5:
        comparator = "after" if isinstance(values[0], _dt.date) else "greater than"
        threshold = values[k - 1]
    else:
        comparator = "before" if isinstance(values[0], _dt.date) else "less than"
        threshold = values[k]
    return QuestionSpec(qtype, anchor, rel1, attribute=attribute, comparator=comparator, threshold=threshold)


def gen_raw(kg: TripleStore, qtype: str, n: int, seed: int) -> list[RawExample]:
    """Draw n distinct question specs of one type and render raw examples."""
    if qtype not in QTYPES:
        raise HarnessError(f"unknown question type {qtype!r}")
    rng = derive_rng(seed, "gen", qtype)
    seen: set[QuestionSpec] = set()
    raws: list[RawExample] = []
    attempts = 0
    last_progress = 0
    max_attempts = 200 * n
    while len(raws) < n:
        attempts += 1
        if attempts > max_attempts or attempts - last_progress > 20_000:
            raise HarnessError(
                f"insufficient graph diversity: produced {len(raws)}/{n} {qtype} examples "
                f"after {attempts - 1} attempts"
            )
        spec = _draw_spec(kg, qtype, rng)
        if spec is None or spec in seen:
            continue
        hop1_names, final_names = gold(kg, spec)
        if not hop1_names or not final_names:
            continue
        seen.add(spec)
        last_progress = attempts
        rendered = nl_questions(kg, spec)
        raws.append(
            RawExample(
                id=f"{qtype}-{len(raws):05d}",
                qtype=qtype,
                question=rendered["question"],
                answers=final_names,
                source_question=rendered["source_question"],
                phrase=rendered["phrase"],
                machine_question=rendered.get("machine_question"),
                hop1_answers=hop1_names,
                sparql=spec_sparql(spec),
            )
        )
    return raws


def gen_examples(kg: TripleStore, qtype: str, n: int, seed: int) -> list[MultiHopExample]:
    return [corpus.example_from_raw(raw) for raw in gen_raw(kg, qtype, n, seed)]


def raw_to_record(raw: RawExample) -> dict:
    record = {
        "id": raw.id,
        "qtype": raw.qtype,
        "question": raw.question,
        "answers": list(raw.answers),
        "source_question": raw.source_question,
        "phrase": raw.phrase,
        "hop1_answers": list(raw.hop1_answers),
    }
    if raw.machine_question is not None:
        record["machine_question"] = raw.machine_question
    if raw.bridge_entity is not None:
        record["bridge_entity"] = raw.bridge_entity
    if raw.sparql is not None:
        record["sparql"] = raw.sparql
    return record


# ---------------------------------------------------------------------------
# Template grammar shared with the builtin reference backends

@dataclass(frozen=True)
class ParsedQuestion:
    kind: str
    anchor: str | None = None
    rel1: str | None = None
    rel2: str | None = None
    anchor2: str | None = None
    attribute: str | None = None
    superlative: str | None = None
    comparator: str | None = None
    threshold: LiteralValue | None = None
    bridges: tuple[str, ...] = ()
    candidates: tuple[str, ...] = ()


_RE_HOP1_OBJECTS = re.compile(r"^Return the (?P<rel>.+?) of (?P<ent>.+?)\.$")
_RE_ENTITY_OBJECT = re.compile(r"^What is the (?P<rel>.+?) of (?P<rest>.+)\?$")
_RE_HOP1_SUBJECTS = re.compile(r"^Which entities have (?P<ent>.+) as their (?P<rel>.+?)\?$")
_RE_HOP2_TEMPLATE = re.compile(r"^Which one of the following (?P<cond>.+?): (?P<cands>.+)\?$")
_RE_MULTI_CONJ = re.compile(
    r"^Which entities that have (?P<ent>.+?) as their (?P<rel1>.+?) also have (?P<ent2>.+?) as their (?P<rel2>.+?)\?$"
)
_RE_MULTI_SUPER = re.compile(
    r"^Which of the entities that have (?P<ent>.+?) as their (?P<rel1>.+?) has the (?P<dir>smallest|largest) (?P<attr>.+?)\?$"
)
_RE_MULTI_COMPA = re.compile(
    r"^Which of the entities that have (?P<ent>.+?) as their (?P<rel1>.+?) have (?P<attr>.+?) "
    r"(?P<cmp>greater than|less than|after|before) (?P<val>.+?)\?$"
)


def _rel_id(kg: TripleStore, text: str) -> str | None:
    ident = text.strip().replace(" ", "_")
    return ident if ident in kg.relations else None


def _attr_id(kg: TripleStore, text: str) -> str | None:
    ident = text.strip().replace(" ", "_")
    return ident if ident in kg.attribute_names else None


def _entity_id(kg: TripleStore, text: str) -> str | None:
    return kg.entity_by_name(text.strip())


def _entity_list(kg: TripleStore, text: str) -> tuple[str, ...] | None:
    ids = []
    for part in text.split(", "):
        ident = _entity_id(kg, part)
        if ident is None:
            return None
        ids.append(ident)
    return tuple(ids)


def _parse_threshold(text: str) -> LiteralValue | None:
    text = text.strip()
    if re.fullmatch(r"\d{4}-\d{2}-\d{2}", text):
        try:
            return _dt.date.fromisoformat(text)
        except ValueError:
            return None
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    if re.fullmatch(r"-?\d+\.\d+", text):
        return float(text)
    return None


def _parse_condition(kg: TripleStore, condition: str) -> dict | None:
    m = re.fullmatch(r"(?P<attr>.+?) is (?P<dir>smallest|largest)", condition)
    if m:
        attr = _attr_id(kg, m.group("attr"))
        return {"attribute": attr, "superlative": m.group("dir")} if attr else None
    m = re.fullmatch(r"(?P<attr>.+?) is (?P<cmp>greater than|less than|after|before) (?P<val>.+)", condition)
    if m:
        attr = _attr_id(kg, m.group("attr"))
        threshold = _parse_threshold(m.group("val"))
        if attr is None or threshold is None:
            return None
        return {"attribute": attr, "comparator": m.group("cmp"), "threshold": threshold}
    m = re.fullmatch(r"(?P<rel>.+?) is (?P<ent>.+)", condition)
    if m:
        rel = _rel_id(kg, m.group("rel"))
        ent = _entity_id(kg, m.group("ent"))
        if rel is None or ent is None:
            return None
        return {"rel2": rel, "anchor2": ent}
    return None


def parse_question(kg: TripleStore, question: str) -> ParsedQuestion | None:
    """Parse a question against the synthetic template grammar."""
    question = question.strip()
    m = _RE_HOP1_OBJECTS.match(question)
    if m:
        rel = _rel_id(kg, m.group("rel"))
        ent = _entity_id(kg, m.group("ent"))
        if rel and ent:
            return ParsedQuestion("hop1_objects", anchor=ent, rel1=rel)
        return None
    m = _RE_MULTI_CONJ.match(question)
    if m:
        rel1, rel2 = _rel_id(kg, m.group("rel1")), _rel_id(kg, m.group("rel2"))
        ent, ent2 = _entity_id(kg, m.group("ent")), _entity_id(kg, m.group("ent2"))
        if rel1 and rel2 and ent and ent2:
            return ParsedQuestion("multi_conjunction", anchor=ent, rel1=rel1, rel2=rel2, anchor2=ent2)
        return None
    m = _RE_MULTI_SUPER.match(question)
    if m:
        rel1 = _rel_id(kg, m.group("rel1"))
        ent = _entity_id(kg, m.group("ent"))
        attr = _attr_id(kg, m.group("attr"))
        if rel1 and ent and attr:
            return ParsedQuestion(
                "multi_superlative", anchor=ent, rel1=rel1, attribute=attr, superlative=m.group("dir")
            )
        return None
    m = _RE_MULTI_COMPA.match(question)
    if m:
        rel1 = _rel_id(kg, m.group("rel1"))
        ent = _entity_id(kg, m.group("ent"))
        attr = _attr_id(kg, m.group("attr"))
        threshold = _parse_threshold(m.group("val"))
        if rel1 and ent and attr and threshold is not None:
            return ParsedQuestion(
                "multi_comparative", anchor=ent, rel1=rel1, attribute=attr,
                comparator=m.group("cmp"), threshold=threshold,
            )
        return None
    m = _RE_HOP1_SUBJECTS.match(question)
    if m:
        rel = _rel_id(kg, m.group("rel"))
        ent = _entity_id(kg, m.group("ent"))
        if rel and ent:
            return ParsedQuestion("hop1_subjects", anchor=ent, rel1=rel)
        return None
    m = _RE_HOP2_TEMPLATE.match(question)
    if m:
        condition = _parse_condition(kg, m.group("cond"))
        candidates = _entity_list(kg, m.group("cands"))
        if condition is None or candidates is None:
            return None
        return ParsedQuestion("hop2_template", candidates=candidates, **condition)
    m = _RE_ENTITY_OBJECT.match(question)
    if m:
        rel = _rel_id(kg, m.group("rel"))
        if rel is None:
            return None
        rest = m.group("rest")
        nested = re.fullmatch(r"the (?P<rel1>.+?) of (?P<ent>.+)", rest)
        if nested:
            rel1 = _rel_id(kg, nested.group("rel1"))
            ent = _entity_id(kg, nested.group("ent"))
            if rel1 and ent:
                return ParsedQuestion("multi_composition", anchor=ent, rel1=rel1, rel2=rel)
            return None
        bridges = _entity_list(kg, rest)
        if bridges is None:
            return None
        return ParsedQuestion("entity_object", rel2=rel, bridges=bridges)
    return None


# ---------------------------------------------------------------------------
# Synthetic retrieval runs for oracle-book probing

def hop_qid(example_id: str, hop: int) -> str:
    return f"{example_id}#hop{hop}"


def gen_retrieval_run(
    kg: TripleStore,
    examples: list[MultiHopExample],
    seed: int,
    n_passages: int = 8,
) -> RetrievalRun:
    """Fabricate ranked passages per hop question.

    Each hop gets one passage quoting a gold answer and several fillers about
    unrelated entities, so pseudo-gold and negative selection always succeed.
    """
    passages: dict[str, tuple[Passage, ...]] = {}
    all_names = sorted(kg.names.values())
    for example in examples:
        for hop, hop_q in ((1, example.hop1), (2, example.hop2)):
            rng = derive_rng(seed, "run", example.id, hop)
            answers = set(hop_q.answers)
            fillers = [n for n in all_names if n not in answers]
            texts = []
            gold_name = rng.choice(sorted(answers))
            texts.append(f"Records state that {gold_name} appears in the chronicle.")
            for j in range(n_passages - 1):
                name = rng.choice(fillers)
                texts.append(f"Chronicle entry {j} discusses {name} at length.")
            rng.shuffle(texts)
            passages[hop_qid(example.id, hop)] = tuple(
                Passage(rank, text) for rank, text in enumerate(texts, start=1)
            )
    return RetrievalRun(passages)
