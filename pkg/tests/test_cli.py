from __future__ import annotations

import json

import pytest

from hopharness.cli import main

WORLD = ["--kg-seed", "7", "--entities", "120", "--relations", "10", "--fanout", "2"]


@pytest.fixture(scope="module")
def world_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("world")
    code = main(
        [
            "synth", "--seed", "7", "--entities", "120", "--relations", "10",
            "--fanout", "2", "--per-type", "10", "--out", str(out),
        ]
    )
    assert code == 0
    return out


def test_synth_outputs_and_manifest(world_dir):
    assert (world_dir / "dataset.jsonl").exists()
    assert (world_dir / "lexicon.tsv").exists()
    assert (world_dir / "run.tsv").exists()
    manifest = json.loads((world_dir / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"dataset.jsonl", "lexicon.tsv", "run.tsv"}


def test_decompose_command(world_dir, tmp_path):
    out = tmp_path / "dec"
    assert main(["decompose", "--dataset", str(world_dir / "dataset.jsonl"), "--out", str(out)]) == 0
    lines = (out / "decompositions.jsonl").read_text().splitlines()
    assert len(lines) == 40
    first = json.loads(lines[0])
    assert first["hop2_placeholder"].count("#1") == 1


def test_context_command(world_dir, tmp_path):
    out = tmp_path / "ctx"
    code = main(
        [
            "context", "--dataset", str(world_dir / "dataset.jsonl"),
            "--run", str(world_dir / "run.tsv"), "--seed", "3", "--out", str(out),
        ]
    )
    assert code == 0
    report = json.loads((out / "context_report.json").read_text())
    assert report["n_skipped"] == 0
    assert (out / "contexts.jsonl").exists()


@pytest.fixture(scope="module")
def probe_dir(world_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("probe")
    code = main(
        [
            "probe", "--dataset", str(world_dir / "dataset.jsonl"),
            "--backend", "chain-oracle", "--mode", "all", *WORLD, "--out", str(out),
        ]
    )
    assert code == 0
    return out


def test_probe_records_written(probe_dir):
    lines = (probe_dir / "records.jsonl").read_text().splitlines()
    assert len(lines) == 40
    record = json.loads(lines[0])
    assert record["s1"] is True and record["s"] is True
    assert record["a2_star"] is not None


def test_analyze_reports_oracle_signature(probe_dir, tmp_path):
    out = tmp_path / "analysis"
    assert main(["analyze", "--records", str(probe_dir / "records.jsonl"), "--out", str(out)]) == 0
    analysis = json.loads((out / "analysis.json").read_text())
    assert analysis["confusion"]["overall"]["conditional"]["11"] == 1.0
    assert analysis["consistency"]["overall"]["hop1_pct"] == 100.0
    assert "| overall |" in (out / "tables.md").read_text()


def test_analyze_is_byte_identical_across_runs(probe_dir, tmp_path):
    outs = []
    for name in ("a1", "a2"):
        out = tmp_path / name
        assert main(["analyze", "--records", str(probe_dir / "records.jsonl"), "--out", str(out)]) == 0
        outs.append((out / "analysis.json").read_bytes() + (out / "tables.md").read_bytes())
    assert outs[0] == outs[1]


def test_report_renders_svg(probe_dir, tmp_path):
    out = tmp_path / "report"
    assert main(["report", "--records", str(probe_dir / "records.jsonl"), "--out", str(out)]) == 0
    svg = (out / "confusion_overall.svg").read_text()
    assert svg.startswith("<svg")
    assert "s1s2=11" in svg
    assert (out / "report.md").exists()


def test_probe_oracle_book_with_context_cache(world_dir, tmp_path):
    ctx_out = tmp_path / "ctx"
    assert main(
        [
            "context", "--dataset", str(world_dir / "dataset.jsonl"),
            "--run", str(world_dir / "run.tsv"), "--seed", "3", "--out", str(ctx_out),
        ]
    ) == 0
    out = tmp_path / "probe"
    code = main(
        [
            "probe", "--dataset", str(world_dir / "dataset.jsonl"),
            "--backend", "chain-oracle", "--mode", "separate",
            "--contexts", str(ctx_out / "contexts.jsonl"), *WORLD, "--out", str(out),
        ]
    )
    assert code == 0
    record = json.loads((out / "records.jsonl").read_text().splitlines()[0])
    assert record["s"] is True  # oracle still parses with context prepended


def test_traingen_command(world_dir, tmp_path):
    out = tmp_path / "corpus"
    code = main(
        [
            "traingen", "--dataset", str(world_dir / "dataset.jsonl"), "--setting", "Combo",
            "--lexicon", str(world_dir / "lexicon.tsv"), "--out", str(out),
        ]
    )
    assert code == 0
    manifest = json.loads((out / "corpus-Combo.tsv.manifest.json").read_text())
    assert manifest["n_instances"] == 240
    assert manifest["n_skipped"] == 0


def test_probe_unreachable_backend_exits_2_without_outputs(world_dir, tmp_path):
    out = tmp_path / "downprobe"
    code = main(
        [
            "probe", "--dataset", str(world_dir / "dataset.jsonl"),
            "--backend", "http://127.0.0.1:1", "--mode", "separate", "--out", str(out),
        ]
    )
    assert code == 2
    assert not (out / "records.jsonl").exists()


def test_validation_error_exits_1(tmp_path):
    code = main(["analyze", "--records", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path / "o")])
    assert code == 1


def test_scripted_backend_via_cli(world_dir, tmp_path):
    out = tmp_path / "scripted"
    rates = json.dumps(
        {"hop1": 1.0, "hop2": 1.0, "multi|11": 1.0, "multi|01": 0.0, "multi|10": 0.0, "multi|00": 0.0}
    )
    code = main(
        [
            "probe", "--dataset", str(world_dir / "dataset.jsonl"),
            "--backend", "scripted", "--rates", rates, "--seed", "5",
            "--mode", "separate", "--out", str(out),
        ]
    )
    assert code == 0
    records = [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]
    assert all(r["s1"] and r["s2"] and r["s"] for r in records)


def test_backend_url_env_override(world_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("HOPHARNESS_BACKEND_URL", "http://127.0.0.1:1")
    out = tmp_path / "envprobe"
    code = main(
        [
            "probe", "--dataset", str(world_dir / "dataset.jsonl"),
            "--mode", "separate", "--out", str(out),
        ]
    )
    assert code == 2  # env-configured backend was used (and is unreachable)


def test_probe_without_backend_is_a_validation_error(world_dir, tmp_path, monkeypatch):
    monkeypatch.delenv("HOPHARNESS_BACKEND_URL", raising=False)
    code = main(
        [
            "probe", "--dataset", str(world_dir / "dataset.jsonl"),
            "--mode", "separate", "--out", str(tmp_path / "o"),
        ]
    )
    assert code == 1


def test_analyze_handles_partially_probed_records(tmp_path):
    from hopharness.evaluation import PredictionRecord, write_records

    records = [
        PredictionRecord("r1", "composition", a1="x", a2="y", a="z", s1=True, s2=True, s=True,
                         a1_star="x", a2_star="z"),
        PredictionRecord("r2", "composition", a1="x", a2="y", a="z", s1=False, s2=True, s=False),
    ]
    path = tmp_path / "records.jsonl"
    write_records(path, records)
    out = tmp_path / "analysis"
    assert main(["analyze", "--records", str(path), "--out", str(out)]) == 0
    analysis = json.loads((out / "analysis.json").read_text())
    assert analysis["confusion"]["overall"]["n"] == 2
    assert analysis["consistency"]["overall"]["n"] == 1
