"""Command-line entry point.

Subcommands: synth, decompose, context, probe, analyze, traingen, report.
Every run writes its outputs plus a manifest (config echo, versions, content
hashes) under the chosen output directory. Exit codes: 0 success, 1
validation error, 2 backend failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__, context, corpus, evaluation, modelio, report, synthkg, traingen
from .errors import BackendError, HarnessError

BACKEND_URL_ENV = "HOPHARNESS_BACKEND_URL"
OUT_DIR_ENV = "HOPHARNESS_OUT_DIR"

BUILTIN_BACKENDS = ("chain-oracle", "shortcut", "echo", "scripted")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(out_dir: Path, command: str, config: dict, outputs: list[Path]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "versions": {"hopharness": __version__, "python": platform.python_version()},
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    _write_json(out_dir / "manifest.json", manifest)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_echo(args) -> dict:
    return {k: v if isinstance(v, (str, int, float, bool, type(None))) else str(v)
            for k, v in vars(args).items() if k != "func"}


def _load_examples(args) -> list[corpus.MultiHopExample]:
    if args.format == "hotpot":
        return corpus.load_hotpotqa_decomposed(args.dataset, skip_invalid=args.skip_invalid)
    return corpus.load_cwq(args.dataset, skip_invalid=args.skip_invalid)


def _add_dataset_args(parser) -> None:
    parser.add_argument("--dataset", required=True, help="line-delimited dataset file")
    parser.add_argument("--format", choices=("cwq", "hotpot"), default="cwq")
    parser.add_argument("--skip-invalid", action="store_true", help="log and drop invalid records")


def _add_out_arg(parser) -> None:
    parser.add_argument(
        "--out",
        default=os.environ.get(OUT_DIR_ENV),
        required=os.environ.get(OUT_DIR_ENV) is None,
        help=f"output directory (or ${OUT_DIR_ENV})",
    )


def _add_kg_args(parser) -> None:
    parser.add_argument("--kg-seed", type=int, default=7, help="synthetic world seed for builtin backends")
    parser.add_argument("--entities", type=int, default=200)
    parser.add_argument("--relations", type=int, default=12)
    parser.add_argument("--fanout", type=int, default=2)


def cmd_synth(args) -> int:
    out = _out_dir(args)
    kg = synthkg.build(args.seed, args.entities, args.relations, args.fanout)
    raws = []
    for qtype in synthkg.QTYPES:
        raws.extend(synthkg.gen_raw(kg, qtype, args.per_type, args.seed))
    examples = [corpus.example_from_raw(r) for r in raws]
    dataset_path = out / "dataset.jsonl"
    corpus.write_examples(dataset_path, (synthkg.raw_to_record(r) for r in raws))
    lexicon_path = out / "lexicon.tsv"
    corpus.write_lexicon(lexicon_path, kg.lexicon())
    run_path = out / "run.tsv"
    corpus.write_retrieval_run(run_path, synthkg.gen_retrieval_run(kg, examples, args.seed, args.run_passages))
    _write_manifest(out, "synth", _config_echo(args), [dataset_path, lexicon_path, run_path])
    print(f"wrote {len(examples)} examples ({args.per_type} per type) to {dataset_path}")
    return 0


def cmd_decompose(args) -> int:
    out = _out_dir(args)
    examples = _load_examples(args)
    path = out / "decompositions.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "id": ex.id,
                        "qtype": ex.qtype,
                        "question": ex.question,
                        "answers": list(ex.answers),
                        "hop1_question": ex.hop1.question,
                        "hop1_answers": list(ex.hop1.answers),
                        "hop2_question": ex.hop2.question,
                        "hop2_placeholder": ex.hop2.placeholder_form,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )
    _write_manifest(out, "decompose", _config_echo(args), [path])
    print(f"decomposed {len(examples)} examples into {path}")
    return 0


def cmd_context(args) -> int:
    out = _out_dir(args)
    examples = _load_examples(args)
    run = corpus.load_retrieval_run(args.run)
    book, skipped = context.build_contexts(run, examples, args.seed)
    cache_path = out / "contexts.jsonl"
    context.write_cache(cache_path, book)
    report_path = out / "context_report.json"
    _write_json(report_path, {"n_examples": len(examples), "n_skipped": len(skipped), "skipped": skipped})
    _write_manifest(out, "context", _config_echo(args), [cache_path, report_path])
    print(f"built contexts for {len(examples) - len(skipped)} examples ({len(skipped)} skipped)")
    return 0


def _build_backend(args, examples):
    spec = args.backend or os.environ.get(BACKEND_URL_ENV)
    if spec is None:
        raise HarnessError(f"no backend given (use --backend or ${BACKEND_URL_ENV})")
    if spec.startswith(("http://", "https://")):
        return modelio.HttpBackend(spec, in_flight=args.in_flight)
    if spec not in BUILTIN_BACKENDS:
        raise HarnessError(f"unknown backend {spec!r}; builtin backends: {', '.join(BUILTIN_BACKENDS)}")
    if spec == "echo":
        return modelio.EchoBackend()
    if spec == "scripted":
        if not args.rates:
            raise HarnessError("scripted backend needs --rates (JSON text or a path to one)")
        try:
            is_file = Path(args.rates).is_file()
        except OSError:
            is_file = False
        rates = json.loads(Path(args.rates).read_text() if is_file else args.rates)
        return modelio.ScriptedModel(rates, args.seed, examples)
    kg = synthkg.build(args.kg_seed, args.entities, args.relations, args.fanout)
    return modelio.ChainOracle(kg) if spec == "chain-oracle" else modelio.ShortcutModel(kg)


def cmd_probe(args) -> int:
    out = _out_dir(args)
    examples = _load_examples(args)
    backend = _build_backend(args, examples)
    contexts = context.read_cache(args.contexts) if args.contexts else None
    outcomes = {}
    if args.mode in ("separate", "all"):
        outcomes["separate"] = evaluation.probe_separate(backend, examples, contexts)
    if args.mode in ("chain", "all"):
        outcomes["chain"] = evaluation.probe_chain(backend, examples, contexts)
    if args.mode in ("prompts", "all"):
        outcomes["prompts"] = evaluation.probe_multihop_prompts(backend, examples, contexts)
    records = evaluation.merge_records(*(o.records for o in outcomes.values()))
    records_path = out / "records.jsonl"
    evaluation.write_records(records_path, records)
    probe_report = {
        mode: {
            "n_records": len(o.records),
            "failures": [list(f) for f in o.failures],
            "degenerate": list(o.degenerate),
        }
        for mode, o in outcomes.items()
    }
    report_path = out / "probe_report.json"
    _write_json(report_path, probe_report)
    _write_manifest(out, "probe", _config_echo(args), [records_path, report_path])
    print(f"probed {len(records)} examples with {backend.name} into {records_path}")
    return 0


def _confusion_records(records):
    return [r for r in records if None not in (r.s1, r.s2, r.s)]


def _consistency_records(records):
    return [r for r in records if None not in (r.a1_star, r.a1, r.a, r.a2_star)]


def _analysis_payload(records):
    payload: dict = {"em": evaluation.em_summary(records)}
    complete = _confusion_records(records)
    if complete:
        payload["confusion"] = {
            key: {
                "n": m.n,
                "joint": {f"{s},{cfg}": round(v, 6) for (s, cfg), v in sorted(m.joint.items())},
                "conditional": {cfg: (None if v is None else round(v, 6)) for cfg, v in m.conditional.items()},
            }
            for key, m in evaluation.confusion_by_type(complete).items()
        }
    chained = _consistency_records(records)
    if chained:
        payload["consistency"] = {
            key: asdict(rep) for key, rep in evaluation.consistency_by_type(chained).items()
        }
    return payload


def cmd_analyze(args) -> int:
    out = _out_dir(args)
    records = evaluation.read_records(args.records)
    if not records:
        raise HarnessError(f"no records in {args.records}")
    payload = _analysis_payload(records)
    analysis_path = out / "analysis.json"
    _write_json(analysis_path, payload)
    lines = ["# Analysis", "", "## Exact match", "", report.em_table(evaluation.em_summary(records))]
    if "confusion" in payload:
        lines += ["", "## Correctness confusion"]
        for key, matrix in evaluation.confusion_by_type(_confusion_records(records)).items():
            lines += ["", f"### {key}", "", report.confusion_table(matrix)]
    if "consistency" in payload:
        lines += [
            "", "## Consistency", "",
            report.consistency_table(evaluation.consistency_by_type(_consistency_records(records))),
        ]
    tables_path = out / "tables.md"
    tables_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(out, "analyze", _config_echo(args), [analysis_path, tables_path])
    print(f"analysis written to {analysis_path}")
    return 0


def cmd_traingen(args) -> int:
    out = _out_dir(args)
    examples = _load_examples(args)
    lexicon = corpus.load_lexicon(args.lexicon) if args.lexicon else None
    contexts = context.read_cache(args.contexts) if args.contexts else None
    emitted = traingen.emit(
        args.setting,
        examples,
        lexicon,
        contexts,
        keep_placeholder=not args.substitute_gold,
    )
    corpus_path = out / f"corpus-{args.setting.replace('+', '-')}.tsv"
    manifest = traingen.write_corpus(corpus_path, args.setting, emitted)
    _write_manifest(
        out,
        "traingen",
        _config_echo(args),
        [corpus_path, corpus_path.with_name(corpus_path.name + ".manifest.json")],
    )
    print(f"emitted {manifest['n_instances']} instances ({manifest['n_skipped']} skipped) to {corpus_path}")
    return 0


def cmd_report(args) -> int:
    out = _out_dir(args)
    records = evaluation.read_records(args.records)
    if not records:
        raise HarnessError(f"no records in {args.records}")
    outputs = []
    lines = ["# Probe report", "", "## Exact match", "", report.em_table(evaluation.em_summary(records))]
    complete = _confusion_records(records)
    if complete:
        matrices = evaluation.confusion_by_type(complete)
        lines += ["", "## Correctness confusion"]
        for key, matrix in matrices.items():
            svg_path = out / f"confusion_{key}.svg"
            svg_path.write_text(report.confusion_svg(matrix, f"Confusion: {key}"), encoding="utf-8")
            outputs.append(svg_path)
            lines += ["", f"### {key}", "", report.confusion_table(matrix), "", f"![confusion {key}]({svg_path.name})"]
    chained = _consistency_records(records)
    if chained:
        lines += ["", "## Consistency", "", report.consistency_table(evaluation.consistency_by_type(chained))]
    report_path = out / "report.md"
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    outputs.append(report_path)
    _write_manifest(out, "report", _config_echo(args), outputs)
    print(f"report written to {report_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hopharness", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hopharness {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic world and dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--entities", type=int, default=200)
    p.add_argument("--relations", type=int, default=12)
    p.add_argument("--fanout", type=int, default=2)
    p.add_argument("--per-type", type=int, default=100)
    p.add_argument("--run-passages", type=int, default=8)
    _add_out_arg(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("decompose", help="decompose a dataset into hop questions")
    _add_dataset_args(p)
    _add_out_arg(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("context", help="build pseudo-gold/negative contexts from a retrieval run")
    _add_dataset_args(p)
    p.add_argument("--run", required=True, help="retrieval run file (qid, rank, text)")
    p.add_argument("--seed", type=int, default=0, help="concatenation-order seed")
    _add_out_arg(p)
    p.set_defaults(func=cmd_context)

    p = sub.add_parser("probe", help="query a backend in one or more probing modes")
    _add_dataset_args(p)
    p.add_argument("--backend", default=None, help=f"builtin name or http URL (or ${BACKEND_URL_ENV})")
    p.add_argument("--mode", choices=("separate", "chain", "prompts", "all"), default="all")
    p.add_argument("--contexts", default=None, help="context cache for oracle-book probing")
    p.add_argument("--rates", default=None, help="scripted backend rate table (JSON text or path)")
    p.add_argument("--seed", type=int, default=0, help="scripted backend seed")
    p.add_argument("--in-flight", type=int, default=8)
    _add_kg_args(p)
    _add_out_arg(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("analyze", help="re-aggregate a records file (no backend access)")
    p.add_argument("--records", required=True)
    _add_out_arg(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("traingen", help="emit a training corpus for one setting")
    _add_dataset_args(p)
    p.add_argument("--setting", choices=traingen.SETTINGS, required=True)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--contexts", default=None)
    p.add_argument("--substitute-gold", action="store_true", help="substitute gold answers into concat inputs")
    _add_out_arg(p)
    p.set_defaults(func=cmd_traingen)

    p = sub.add_parser("report", help="render markdown tables and SVG heatmaps")
    p.add_argument("--records", required=True)
    _add_out_arg(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    except (HarnessError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
