"""Operational command line: ingest, extract, bench, model fitting, serving.

Batch operations tolerate bad records: one malformed file or ticket is
reported and skipped, never aborting the run.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from opsassist.bench import MODES, DelayedProvider, load_cases, run_bench
from opsassist.config import load_config
from opsassist.errors import OpsAssistError, ValidationFailed
from opsassist.kb import KnowledgeStore, Level, Provenance, sop_from_dict
from opsassist.llm import (
    HashingEmbedder,
    Message,
    canonical_prompt,
    fingerprint,
    load_transcript,
)
from opsassist.llm.gateway import CallLog
from opsassist.runtime import Runtime, build_runtime
from opsassist.sopgen import SopExtractor
from opsassist.tickets import Ticket, assign, fit, model_from_dict, model_to_dict


def _load_runtime(args: argparse.Namespace) -> Runtime:
    config = load_config(args.config)
    if args.data_dir:
        config = dataclasses.replace(config, data_dir=args.data_dir)
    return build_runtime(config)


def _print(payload: Any) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True))


# ------------------------------------------------------------------- ingest


def _entry_records(path: Path) -> list[tuple[str, dict]]:
    """(source name, record) pairs from a directory of .json files or a .jsonl."""
    pairs: list[tuple[str, dict]] = []
    if path.is_dir():
        for file in sorted(path.glob("*.json")):
            pairs.append((file.name, json.loads(file.read_text(encoding="utf-8"))))
    else:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                pairs.append((f"{path.name}:{lineno}", json.loads(line)))
    return pairs


def ingest_path(
    path: str | Path,
    level: int,
    base_id: str,
    data_dir: str | Path,
    dimension: int = 64,
) -> tuple[int, list[str]]:
    """Parse, validate, embed, and store entries; returns (count, warnings).

    Level-1 records are procedure objects (or {key, value} wrappers whose
    value parses as one); level-2 records are {key, value} documents.
    """
    path = Path(path)
    data_dir = Path(data_dir)
    embedder = HashingEmbedder(dimension)
    if level == int(Level.SOP):
        store = KnowledgeStore(
            data_dir / "kb" / "sop.jsonl",
            base_id="sop",
            level=Level.SOP,
            embedder=embedder,
            description="validated operating procedures",
            id_prefix="sop",
        )
    elif level == int(Level.INTERNAL):
        store = KnowledgeStore(
            data_dir / "kb" / f"internal-{base_id}.jsonl",
            base_id=base_id,
            level=Level.INTERNAL,
            embedder=embedder,
            description=f"internal documents: {base_id}",
            id_prefix=base_id,
        )
    else:
        raise ValueError("ingest targets level 1 or 2")

    count = 0
    warnings: list[str] = []
    sources: list[tuple[str, dict]]
    try:
        sources = _entry_records(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    for name, record in sources:
        try:
            if not isinstance(record, dict):
                raise ValidationFailed(["record is not an object"])
            if level == int(Level.SOP):
                if "problem_desc" in record:
                    store.upsert_sop(sop_from_dict(record))
                else:
                    store.upsert_sop(sop_from_dict(json.loads(record["value"])))
            else:
                provenance = [
                    Provenance(kind=p.get("kind", "manual"), ref=p.get("ref", ""))
                    for p in record.get("provenance", [])
                ]
                store.add_entry(
                    key=str(record["key"]),
                    value=str(record["value"]),
                    provenance=provenance,
                    entry_id=record.get("id"),
                )
            count += 1
        except Exception as exc:
            detail = getattr(exc, "problems", None)
            reason = "; ".join(detail) if detail else str(exc)
            warnings.append(f"{name}: {reason}")
    return count, warnings


# ------------------------------------------------------------------ extract


def _ticket_from_row(row: dict, fallback_id: str) -> Ticket:
    if "ticket" in row:
        return Ticket.from_dict(row["ticket"])
    turns = []
    for turn in row.get("turns", []):
        if isinstance(turn, dict):
            turns.append((str(turn.get("role", "user")), str(turn.get("text", ""))))
        else:
            turns.append((str(turn[0]), str(turn[1])))
    return Ticket(
        id=str(row.get("id", fallback_id)),
        turns=tuple(turns),
        outcome=str(row.get("outcome", "")),
    )


def extract_batch(
    runtime: Runtime,
    tickets_path: str | Path,
    runs: int | None = None,
    stability_threshold: int | None = None,
) -> dict:
    """Run the distillation pipeline per ticket; failures isolate."""
    extractor = runtime.extractor
    sopgen = runtime.config.sopgen
    if runs is not None or stability_threshold is not None:
        sopgen = dataclasses.replace(
            sopgen,
            generation_runs=runs if runs is not None else sopgen.generation_runs,
            stability_threshold=(
                stability_threshold
                if stability_threshold is not None
                else sopgen.stability_threshold
            ),
        )
        extractor = SopExtractor(
            runtime.gateway,
            runtime.sop_store,
            config=sopgen,
            retrieval=runtime.config.retrieval,
            escalations=runtime.escalations,
        )

    counts = {
        "tickets": 0,
        "valid": 0,
        "invalid": 0,
        "accepted": 0,
        "escalated": 0,
        "merged": 0,
        "added": 0,
        "errors": 0,
    }
    reports: list[dict] = []
    with open(tickets_path, "r", encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    for i, row in enumerate(rows, start=1):
        counts["tickets"] += 1
        try:
            ticket = _ticket_from_row(row, fallback_id=f"batch-{i:04d}")
            report = extractor.extract_and_integrate(
                ticket, runtime.new_budget(), CallLog()
            )
        except Exception as exc:
            counts["errors"] += 1
            reports.append({"ticket": row.get("id", f"batch-{i:04d}"), "error": str(exc)})
            continue
        reports.append(report.to_dict())
        if report.screened_out:
            counts["invalid"] += 1
            continue
        counts["valid"] += 1
        if report.escalated:
            counts["escalated"] += 1
        elif report.outcome is not None:
            counts["accepted"] += 1
            if report.outcome.action == "replace":
                counts["merged"] += 1
            else:
                counts["added"] += 1
    return {"counts": counts, "reports": reports}


# ------------------------------------------------------------------- main


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="config file (yaml or json)")
    parser.add_argument("--data-dir", default=None, help="override the data directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opsassist")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load knowledge entries into a store")
    _add_common(p)
    p.add_argument("--path", required=True, help="directory of .json files or a .jsonl file")
    p.add_argument("--level", type=int, required=True, choices=[1, 2])
    p.add_argument("--base-id", default="docs", help="store name for level-2 entries")
    p.add_argument("--dimension", type=int, default=64)

    p = sub.add_parser("extract", help="distill procedures from a ticket batch")
    _add_common(p)
    p.add_argument("--tickets", required=True, help="jsonl of resolved tickets")
    p.add_argument("--runs", type=int, default=None, help="generation runs per ticket")
    p.add_argument("--stability-threshold", type=int, default=None)

    p = sub.add_parser("bench", help="run the scripted benchmark")
    _add_common(p)
    p.add_argument("--cases", required=True, help="jsonl of benchmark cases")
    p.add_argument("--mode", required=True, choices=list(MODES))
    p.add_argument("--trace-dir", default=None, help="write one trace file per case")
    p.add_argument("--report", default=None, help="write the full report as JSON")
    p.add_argument(
        "--call-delay",
        type=float,
        default=0.0,
        help="synthetic per-call provider delay in seconds",
    )

    p = sub.add_parser("fit-cause-model", help="fit the cause-attribution model")
    _add_common(p)
    p.add_argument("--examples", required=True, help="jsonl of {features, cause} rows")
    p.add_argument("--alpha", type=float, default=None, help="smoothing strength")
    p.add_argument("--out", default=None, help="output path (default: data dir)")

    p = sub.add_parser("assign", help="attribute a cause from ticket features")
    _add_common(p)
    p.add_argument("--model", default=None, help="model file (default: data dir)")
    p.add_argument("--features", required=True, help="comma-separated feature list")
    p.add_argument("--threshold", type=float, default=None)

    p = sub.add_parser("fingerprint", help="transcript tooling: canonical prompt hashes")
    _add_common(p)
    p.add_argument("--file", default=None, help="JSON file with {tag, messages}")
    p.add_argument("--tag", default=None, help="stage tag for a one-message prompt")
    p.add_argument("--text", default=None, help="user text for a one-message prompt")
    p.add_argument("--transcript", default=None, help="list fingerprints in a transcript")
    p.add_argument("--canonical", action="store_true", help="print the canonical prompt too")

    p = sub.add_parser("serve", help="run the HTTP service")
    _add_common(p)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)

    return parser


def _cmd_ingest(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    data_dir = args.data_dir or config.data_dir
    count, warnings = ingest_path(
        args.path, args.level, args.base_id, data_dir, dimension=args.dimension
    )
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    _print({"ingested": count, "warnings": len(warnings)})
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    runtime = _load_runtime(args)
    summary = extract_batch(
        runtime, args.tickets, runs=args.runs, stability_threshold=args.stability_threshold
    )
    _print(summary)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.data_dir:
        config = dataclasses.replace(config, data_dir=args.data_dir)
    providers = None
    if args.call_delay > 0:
        from opsassist.runtime import build_provider

        data_dir = Path(config.data_dir)
        if config.llm.providers:
            base = {
                name: build_provider(name, spec, data_dir)
                for name, spec in config.llm.providers.items()
            }
        else:
            from opsassist.llm import ReplayProvider

            base = {
                config.llm.default_provider: ReplayProvider(
                    sorted((data_dir / "transcripts").glob("*.jsonl")),
                    provider_id=config.llm.default_provider,
                )
            }
        providers = {
            name: DelayedProvider(p, args.call_delay) for name, p in base.items()
        }
    runtime = build_runtime(config, providers=providers)
    cases = load_cases(args.cases)
    report = run_bench(runtime, cases, args.mode, trace_dir=args.trace_dir)
    for row in report.rows:
        if row.error:
            print(f"warning: case {row.case_id} errored: {row.error}", file=sys.stderr)
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.to_dict(), indent=2, ensure_ascii=False, sort_keys=True),
            encoding="utf-8",
        )
    _print(report.to_dict())
    return 0


def _cmd_fit_cause_model(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.data_dir:
        config = dataclasses.replace(config, data_dir=args.data_dir)
    examples: list[tuple[list[str], str]] = []
    with open(args.examples, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            examples.append(([str(f) for f in row["features"]], str(row["cause"])))
    alpha = args.alpha if args.alpha is not None else config.tickets.smoothing_alpha
    model = fit(
        examples,
        causes=config.tickets.causes,
        alpha=alpha,
        priors_override=config.tickets.expert_priors or None,
    )
    out = Path(args.out) if args.out else Path(config.data_dir) / "cause_model.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps(model_to_dict(model), indent=2, ensure_ascii=False, sort_keys=True),
        encoding="utf-8",
    )
    _print({"model": str(out), "examples": len(examples), "causes": len(model.causes)})
    return 0


def _cmd_assign(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.data_dir:
        config = dataclasses.replace(config, data_dir=args.data_dir)
    model_path = Path(args.model) if args.model else Path(config.data_dir) / "cause_model.json"
    model = model_from_dict(json.loads(model_path.read_text(encoding="utf-8")))
    features = [f.strip() for f in args.features.split(",") if f.strip()]
    threshold = (
        args.threshold if args.threshold is not None else config.tickets.assign_threshold
    )
    result = assign(model, features, threshold=threshold)
    _print(result.to_dict())
    return 0


def _cmd_fingerprint(args: argparse.Namespace) -> int:
    if args.transcript:
        table = load_transcript(args.transcript)
        _print({"transcript": args.transcript, "fingerprints": sorted(table)})
        return 0
    if args.file:
        payload = json.loads(Path(args.file).read_text(encoding="utf-8"))
        tag = str(payload["tag"])
        messages = [
            Message(role=str(m["role"]), text=str(m["text"])) for m in payload["messages"]
        ]
    elif args.tag is not None and args.text is not None:
        tag = args.tag
        messages = [Message(role="user", text=args.text)]
    else:
        print("fingerprint needs --file, --transcript, or --tag with --text", file=sys.stderr)
        return 2
    out: dict[str, Any] = {"tag": tag, "fingerprint": fingerprint(tag, messages)}
    if args.canonical:
        out["canonical"] = canonical_prompt(tag, messages)
    _print(out)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from opsassist.service import create_app

    config = load_config(args.config)
    if args.data_dir:
        config = dataclasses.replace(config, data_dir=args.data_dir)
    host = args.host or config.service.host
    port = args.port if args.port is not None else config.service.port
    app = create_app(build_runtime(config))
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "extract": _cmd_extract,
    "bench": _cmd_bench,
    "fit-cause-model": _cmd_fit_cause_model,
    "assign": _cmd_assign,
    "fingerprint": _cmd_fingerprint,
    "serve": _cmd_serve,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except OpsAssistError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
