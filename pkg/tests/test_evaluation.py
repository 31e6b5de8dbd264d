from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hopharness import evaluation, modelio
from hopharness.corpus import HopQuestion, MultiHopExample
from hopharness.errors import HarnessError
from hopharness.evaluation import (
    PredictionRecord,
    confusion,
    consistency,
    em,
    merge_records,
    normalize,
)
from hopharness.modelio import BackendAnswer


class MappingBackend:
    """Returns canned answers keyed by the assembled input, recording inputs."""

    name = "mapping"

    def __init__(self, mapping: dict[str, str], default: str = "unknown"):
        self.mapping = dict(mapping)
        self.default = default
        self.inputs: list[str] = []

    def answer_batch(self, items):
        out = []
        for _, text in items:
            self.inputs.append(text)
            out.append(BackendAnswer(self.mapping.get(text, self.default)))
        return out


# --- normalize ------------------------------------------------------------

def test_normalize_examples():
    assert normalize("The  Niger River.") == "niger river"
    assert normalize("New Orleans Saints") == "new orleans saints"
    assert normalize("A An The") == ""


def test_normalize_idempotent_on_random_strings():
    rng = random.Random(5)
    alphabet = "abc XYZ.,!?'\"-#123  the an a"
    for _ in range(1000):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 40)))
        once = normalize(text)
        assert normalize(once) == once


@given(st.text(max_size=60))
def test_normalize_idempotent_property(text):
    once = normalize(text)
    assert normalize(once) == once


# --- exact match ----------------------------------------------------------

def test_em_single_answer():
    assert em("New Orleans Saints", {"New Orleans Saints"})


def test_em_multi_answer_hash_separated():
    assert em("Miami Dolphins # New Orleans Saints", {"Miami Dolphins", "New Orleans Saints"})


def test_em_missing_answer_fails():
    assert not em("Miami Dolphins", {"Miami Dolphins", "New Orleans Saints"})


def test_em_extra_answer_fails():
    assert not em("Miami Dolphins # New Orleans Saints", {"Miami Dolphins"})


def test_em_dedups_prediction_entries():
    assert em("a # b # b", {"b", "a"})


def test_em_requires_non_empty_golds():
    with pytest.raises(HarnessError):
        em("x", set())


def _oracle_em(prediction: str, golds) -> bool:
    """Independent set-equality oracle with a handwritten normalizer."""

    def norm(text: str) -> str:
        kept = []
        for ch in text.lower():
            if ch.isalnum() or ch.isspace():
                kept.append(ch)
            # punctuation dropped
        words = [w for w in "".join(kept).split() if w not in ("a", "an", "the")]
        return " ".join(words)

    pred_entries = set()
    for part in prediction.split("#"):
        entry = norm(part)
        if entry:
            pred_entries.add(entry)
    gold_entries = set()
    for gold in golds:
        entry = norm(gold)
        if entry:
            gold_entries.add(entry)
    return pred_entries == gold_entries


def test_em_agrees_with_brute_force_oracle_on_randomized_cases():
    rng = random.Random(17)
    vocab = ["Mali", "Niger River", "the INS", "U.S.", "2004", "New Orleans Saints", "a priori"]
    for _ in range(1000):
        golds = rng.sample(vocab, rng.randrange(1, 4))
        entries = [rng.choice(vocab) for _ in range(rng.randrange(0, 5))] + golds
        rng.shuffle(entries)
        if rng.random() < 0.4:
            entries = entries[: rng.randrange(1, len(entries) + 1)]
        prediction = " # ".join(entries) if entries else ""
        assert em(prediction, golds) == _oracle_em(prediction, golds)


_entry = st.text(alphabet="abcdef XYZ.,'-", min_size=1, max_size=10)


@given(golds=st.lists(_entry, min_size=1, max_size=4), seed=st.integers(0, 100))
def test_em_symmetric_under_order(golds, seed):
    rng = random.Random(seed)
    shuffled = list(golds)
    rng.shuffle(shuffled)
    prediction = " # ".join(shuffled)
    assert em(prediction, golds) == em(" # ".join(golds), shuffled)


# --- probing --------------------------------------------------------------

def test_probe_separate_with_chain_oracle(synth_kg, synth_examples):
    oracle = modelio.chain_oracle(synth_kg)
    outcome = evaluation.probe_separate(oracle, synth_examples[:50])
    assert len(outcome.records) == 50
    assert all(r.s1 and r.s2 and r.s for r in outcome.records)


def test_probe_separate_echo_is_wrong(synth_examples):
    outcome = evaluation.probe_separate(modelio.EchoBackend(), synth_examples[:5])
    assert all(not (r.s1 or r.s2 or r.s) for r in outcome.records)


def test_probe_separate_empty_examples(synth_kg):
    outcome = evaluation.probe_separate(modelio.chain_oracle(synth_kg), [])
    assert outcome.records == ()


def _example(placeholder="Which continent is #1 located?"):
    return MultiHopExample(
        id="ex-1",
        qtype="composition",
        question="On which continent is Limonese Creole spoken?",
        answers=("North America",),
        hop1=HopQuestion("Return the country where Limonese Creole is spoken.", ("Costa Rica",)),
        hop2=HopQuestion("Which continent is Costa Rica located?", ("North America",), placeholder),
    )


def test_probe_chain_substitutes_predicted_entity():
    example = _example()
    backend = MappingBackend({example.hop1.question: "Flying Dutchman"})
    evaluation.probe_chain(backend, [example])
    assert "Which continent is Flying Dutchman located?" in backend.inputs


def test_probe_chain_renders_multi_answer_prediction_as_list():
    example = _example()
    backend = MappingBackend({example.hop1.question: "X # Y"})
    evaluation.probe_chain(backend, [example])
    assert "Which continent is X, Y located?" in backend.inputs


def test_probe_chain_empty_prediction_is_degenerate_not_fatal():
    example = _example()
    backend = MappingBackend({example.hop1.question: ""}, default="")
    outcome = evaluation.probe_chain(backend, [example])
    assert outcome.degenerate == ("ex-1",)
    assert "Which continent is  located?" in backend.inputs


def test_probe_chain_requires_placeholder_forms():
    example = _example(placeholder=None)
    with pytest.raises(HarnessError, match="placeholder"):
        evaluation.probe_chain(modelio.EchoBackend(), [example])


def test_probe_chain_oracle_reaches_gold(synth_kg, synth_examples):
    oracle = modelio.chain_oracle(synth_kg)
    outcome = evaluation.probe_chain(oracle, synth_examples[:30])
    for record, example in zip(outcome.records, synth_examples[:30]):
        assert em(record.a2_star, example.answers), example.id


def test_probe_prompts_appear_verbatim():
    example = _example()
    backend = MappingBackend({})
    evaluation.probe_multihop_prompts(backend, [example])
    assert backend.inputs[0].endswith(" Intermediate answer:")
    assert backend.inputs[1].endswith(" Final answer:")
    assert example.question in backend.inputs[0]


def test_probe_prompts_oracle_matches_gold(synth_kg, synth_examples):
    oracle = modelio.chain_oracle(synth_kg)
    outcome = evaluation.probe_multihop_prompts(oracle, synth_examples[:30])
    for record, example in zip(outcome.records, synth_examples[:30]):
        assert em(record.a1_star, example.hop1.answers)
        assert em(record.a, example.answers)


# --- confusion ------------------------------------------------------------

def _records_with_counts(counts: dict[str, tuple[int, int]]) -> list[PredictionRecord]:
    records = []
    for cfg, (correct, wrong) in counts.items():
        s1, s2 = cfg[0] == "1", cfg[1] == "1"
        for i in range(correct):
            records.append(PredictionRecord(f"{cfg}-c{i}", "composition", s1=s1, s2=s2, s=True))
        for i in range(wrong):
            records.append(PredictionRecord(f"{cfg}-w{i}", "composition", s1=s1, s2=s2, s=False))
    return records


def test_confusion_conditionals_match_hand_counts():
    counts = {"11": (45, 5), "01": (9, 11), "10": (2, 18), "00": (1, 9)}
    matrix = confusion(_records_with_counts(counts))
    assert matrix.conditional == {"11": 0.90, "01": 0.45, "10": 0.10, "00": 0.10}
    # Independent recount.
    total = sum(c + w for c, w in counts.values())
    for cfg, (correct, wrong) in counts.items():
        assert matrix.joint[(1, cfg)] == pytest.approx(100.0 * correct / total)
        assert matrix.joint[(0, cfg)] == pytest.approx(100.0 * wrong / total)
    assert sum(matrix.joint.values()) == pytest.approx(100.0, abs=1e-9)


def test_confusion_all_correct_degenerate():
    records = [
        PredictionRecord(f"r{i}", "conjunction", s1=True, s2=True, s=True) for i in range(8)
    ]
    matrix = confusion(records)
    assert matrix.joint[(1, "11")] == 100.0
    assert matrix.conditional["11"] == 1.0
    assert matrix.conditional["00"] is None


def test_confusion_rejects_incomplete_records():
    with pytest.raises(HarnessError, match="correctness bits"):
        confusion([PredictionRecord("r", "composition", s1=True)])


def test_confusion_by_type_includes_overall(synth_kg, synth_examples):
    outcome = evaluation.probe_separate(modelio.chain_oracle(synth_kg), synth_examples[:40])
    matrices = evaluation.confusion_by_type(outcome.records)
    assert "overall" in matrices
    assert set(matrices) > {"overall"}


# --- consistency ----------------------------------------------------------

def test_consistency_identical_strings_is_total():
    records = [
        PredictionRecord("r1", "composition", a1="x", a1_star="x", a="y", a2_star="y"),
    ]
    report = consistency(records)
    assert (report.hop1_pct, report.hop2_pct) == (100.0, 100.0)


def test_consistency_disjoint_tokens_is_zero():
    records = [
        PredictionRecord("r1", "composition", a1="alpha", a1_star="beta", a="gamma", a2_star="delta"),
    ]
    report = consistency(records)
    assert (report.hop1_pct, report.hop2_pct) == (0.0, 0.0)


def test_consistency_uses_set_semantics():
    records = [
        PredictionRecord("r1", "composition", a1="b # a", a1_star="a # b # a", a="z", a2_star="Z."),
    ]
    report = consistency(records)
    assert (report.hop1_pct, report.hop2_pct) == (100.0, 100.0)


def test_consistency_chain_oracle_is_total(synth_kg, synth_examples):
    oracle = modelio.chain_oracle(synth_kg)
    subset = synth_examples[:30]
    chain = evaluation.probe_chain(oracle, subset)
    prompts = evaluation.probe_multihop_prompts(oracle, subset)
    merged = merge_records(chain.records, prompts.records)
    report = consistency(merged)
    assert (report.hop1_pct, report.hop2_pct) == (100.0, 100.0)


def test_consistency_rejects_partial_records():
    with pytest.raises(HarnessError, match="chain or prompt"):
        consistency([PredictionRecord("r", "composition", a1="x")])


# --- plumbing -------------------------------------------------------------

def test_merge_records_combines_fields():
    merged = merge_records(
        [PredictionRecord("r1", "composition", a1="x", s1=True)],
        [PredictionRecord("r1", "composition", a2_star="y")],
    )
    assert merged == [PredictionRecord("r1", "composition", a1="x", s1=True, a2_star="y")]


def test_records_file_round_trip(tmp_path, synth_kg, synth_examples):
    outcome = evaluation.probe_separate(modelio.chain_oracle(synth_kg), synth_examples[:10])
    path = tmp_path / "records.jsonl"
    evaluation.write_records(path, outcome.records)
    assert evaluation.read_records(path) == list(outcome.records)
