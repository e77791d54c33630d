"""Deterministic fixture world plus scripted model replies for offline runs.

Three things live here because they must stay in lockstep:

* a small knowledge world (procedures, wiki notes, web pages, platform
  fixtures, benchmark cases) written by `build_fixture_world`,
* a scripted chat provider whose replies are pure functions of the prompt,
  so recording the same scenario twice yields identical transcripts,
* scenario drivers that run each end-to-end flow against a runtime.

The intended flow is record-then-replay: `record_transcripts` runs every
scenario once against the scripted provider and writes a single transcript
file; tests then build runtimes whose default provider replays it.  Tests
re-run the same drivers, so any drift between the corpus, the scripts, and
the engine shows up as a replay miss instead of a silent behavior change.
"""

from __future__ import annotations

import dataclasses
import json
import re
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from opsassist.bench import BenchReport, load_cases, run_bench
from opsassist.config import DEFAULT_CAUSES, AppConfig
from opsassist.kb.sop import (
    InvestigationStep,
    Observation,
    ResolutionStep,
    RootCauseBranch,
    SOPRecord,
)
from opsassist.kb.store import KnowledgeStore
from opsassist.kb.types import Level, Provenance
from opsassist.llm.providers import (
    HashingEmbedder,
    RecordingProvider,
    Rule,
    ScriptedProvider,
)
from opsassist.llm.types import ChatRequest
from opsassist.pipeline.runner import TurnResult
from opsassist.runtime import Runtime, build_runtime
from opsassist.textutil import canonical_json, collapse_ws, normalize_label, scrub_volatile
from opsassist.tickets.bayes import fit, model_to_dict
from opsassist.tickets.categorize import categorize_ticket
from opsassist.llm.gateway import CallLog

EMBED_DIM = 64

GOLDEN_SOP_ID = "sop-0001"
KAFKA_SOP_ID = "sop-0005"
NOISE_SOP_IDS = ("sop-0021", "sop-0022", "sop-0023")

# The seeded procedure describes the classic parse failure but only knows the
# line-break cause; the distillation scenarios teach it the column-type cause.
OLD_NFE_PROBLEM_DESC = 'Caused by: java.lang.NumberFormatException: For input string: "xxx"'
NFE_PROBLEM_DESC = 'java.lang.NumberFormatException: For input string: "xxx"'
LINE_BREAK_CAUSE = "The data contains unparsable characters, such as line breaks (\\n)."
COLUMN_TYPE_CAUSE = "Column type in metadata does not match the actual stored data type."
NFE_ERROR_LOG = 'java.lang.NumberFormatException: For input string: "yyyy-mm-dd hh:mm:ss"'

OOM_CAUSE = "Executor heap too small for the shuffle spill of a skewed stage."
QUOTA_CAUSE = "Orphaned temporary files exhausted the staging directory quota."
PERMISSION_CAUSE = "The submitting role lacks the table level read grant."
TIMEOUT_CAUSE = "The gateway session timeout is shorter than the query runtime."
SCHEMA_MERGE_CAUSE = "Partition files carry incompatible column types."
QUEUE_CAUSE = "Queue capacity exhausted by long running ad hoc jobs."
KAFKA_CAUSE = (
    "Consumer group rebalancing storm triggered by a session timeout below the broker minimum."
)
CHECKSUM_CAUSE = "Concurrent writers corrupt the multipart upload checksum."
GC_OVERHEAD_CAUSE = "JVM spends nearly all CPU in garbage collection because the heap is undersized."
PREEMPTION_CAUSE = "The scheduler preempts the job when the queue is over its resource quota."
ACCEPT2_PROBLEM_DESC = "Kafka consumer group stuck rebalancing with growing lag"
ACCEPT2_CAUSE = "Consumer session timeout configured below the broker minimum."

JVM_GUIDE_URL = "https://jvmguide.example.com/gc-overhead"

WEB_Q1 = "gc overhead limit exceeded recovery procedure"
WEB_Q2 = "gc overhead limit exceeded tuning notes"
WEB_Q3 = "jvm gc overhead limit exceeded"


def _canon(text: str) -> str:
    """Markers are matched against scrubbed, whitespace-collapsed prompts."""
    return collapse_ws(scrub_volatile(text))


# --------------------------------------------------------------------- world


def _step(no: int, target: str, action: str, *obs: tuple[str, str]) -> InvestigationStep:
    observations = tuple(Observation(c, o) for c, o in obs) or (
        Observation("the symptom matches", "confirmed"),
    )
    return InvestigationStep(no, target, action, observations)


def simple_sop(
    problem: str,
    cause: str,
    *,
    target: str,
    check: str,
    fix: str,
    extra_fix: str | None = None,
) -> SOPRecord:
    """One-branch procedure with a single confirmed check; enough to cite."""
    resolutions = [ResolutionStep(1, fix)]
    if extra_fix:
        resolutions.append(ResolutionStep(2, extra_fix))
    branch = RootCauseBranch(
        root_cause=cause,
        investigation_steps=(_step(1, target, check),),
        resolution_steps=tuple(resolutions),
    )
    return SOPRecord(problem, (branch,), (Provenance("manual", "seed-corpus"),))


def golden_sop() -> SOPRecord:
    branch = RootCauseBranch(
        root_cause=LINE_BREAK_CAUSE,
        investigation_steps=(
            _step(
                1,
                "task error log",
                "find the first NumberFormatException frame and note the quoted input value",
                ("the quoted value contains a line break or control character", "confirmed"),
                ("the quoted value is clean printable text", "goto 2"),
            ),
            _step(
                2,
                "upstream export file",
                "inspect the raw source rows around the failing record",
                ("raw rows embed unescaped newlines inside quoted fields", "confirmed"),
            ),
        ),
        resolution_steps=(
            ResolutionStep(1, "re-export the source data with line breaks stripped or escaped"),
            ResolutionStep(2, "rerun the ingestion task and confirm the stage completes"),
        ),
    )
    return SOPRecord(OLD_NFE_PROBLEM_DESC, (branch,), (Provenance("manual", "seed-corpus"),))


def seed_sops() -> list[SOPRecord]:
    return [
        golden_sop(),
        simple_sop(
            "Executor lost with java.lang.OutOfMemoryError during a large shuffle",
            OOM_CAUSE,
            target="executor stderr of the failing stage",
            check="look for OutOfMemoryError frames and note the shuffle spill size",
            fix="raise executor memory and repartition the skewed stage before the wide join",
            extra_fix="set a higher shuffle partition count for the job",
        ),
        simple_sop(
            "Task aborted with DiskQuotaExceeded while writing staging output",
            QUOTA_CAUSE,
            target="staging directory usage report",
            check="list the oldest temporary files and sum their size against the quota",
            fix="run the staging cleanup job to remove orphaned temporary files",
            extra_fix="rerun the aborted task after usage drops below the quota",
        ),
        simple_sop(
            "Hive insert fails with a dynamic partition strict mode error",
            "Dynamic partition insert attempted in strict mode without a static partition.",
            target="session configuration",
            check="check hive.exec.dynamic.partition.mode for the failing session",
            fix="set hive.exec.dynamic.partition.mode=nonstrict for the session and rerun",
        ),
        simple_sop(
            "Streaming job checkpoint lag keeps growing",
            KAFKA_CAUSE,
            target="consumer group status",
            check="compare session.timeout.ms of the group against the broker minimum",
            fix="raise session.timeout.ms above the broker minimum and redeploy the job",
            extra_fix="watch the group until rebalancing stops and lag drains",
        ),
        simple_sop(
            "Query fails with permission denied reading a warehouse table",
            PERMISSION_CAUSE,
            target="grant list of the table",
            check="list grants and confirm the submitting role is missing read",
            fix="grant table level read to the submitting role",
        ),
        simple_sop(
            "Interactive query session disconnects with a gateway timeout",
            TIMEOUT_CAUSE,
            target="gateway configuration",
            check="compare session_timeout_seconds against the slowest recent query runtime",
            fix="raise the gateway session timeout or move the query to the batch queue",
        ),
        simple_sop(
            "Parquet scan fails with a schema merge conflict across partitions",
            SCHEMA_MERGE_CAUSE,
            target="partition file footers",
            check="diff the column types recorded in the conflicting partition footers",
            fix="rewrite the offending partitions with the declared column types",
        ),
        simple_sop(
            "Submitted job stays pending in the scheduler queue for hours",
            QUEUE_CAUSE,
            target="queue occupancy dashboard",
            check="list running jobs on the queue and their requested capacity",
            fix="move long running ad hoc jobs to the batch queue or add capacity",
        ),
        simple_sop(
            "Join stage fails with a broadcast table size limit error",
            "Broadcast threshold raised above the driver memory budget.",
            target="job spark configuration",
            check="compare the broadcast threshold against driver memory",
            fix="lower the broadcast threshold or switch the join strategy",
        ),
        simple_sop(
            "Backfill writes duplicate rows into the daily fact table",
            "Backfill window overlapped the regular load window.",
            target="load audit table",
            check="count rows per load id for the affected day",
            fix="delete the overlapping load and re-run the backfill with an exclusive window",
        ),
        simple_sop(
            "Distributed copy aborts with a multipart checksum mismatch",
            CHECKSUM_CAUSE,
            target="copy job attempt history",
            check="look for two concurrent attempts writing the same destination part",
            fix="enable single-writer locking for the destination and retry the copy",
        ),
        simple_sop(
            "Ingestion job rejects rows with a malformed date column",
            "Source system changed the date format without notice.",
            target="sample of rejected rows",
            check="compare the raw date values against the declared format",
            fix="update the ingestion format pattern and replay the rejected rows",
        ),
        simple_sop(
            "Compaction job fails after exceeding the open file limit",
            "Too many small files opened in a single compaction pass.",
            target="compaction job log",
            check="count input files selected by the failing pass",
            fix="cap files per compaction pass and schedule more frequent passes",
        ),
        simple_sop(
            "Scheduled report export writes an empty file",
            "Upstream view returned zero rows after a late partition.",
            target="upstream partition landing times",
            check="compare the export schedule against the latest partition arrival",
            fix="gate the export on partition arrival instead of a fixed schedule",
        ),
        simple_sop(
            "Workflow run stuck in a retry loop on a transient connector error",
            "Connector retries a non idempotent write without a backoff cap.",
            target="workflow retry history",
            check="inspect retry intervals and the duplicate write warnings",
            fix="add a retry cap with exponential backoff and make the write idempotent",
        ),
        simple_sop(
            "Metastore calls time out during peak hours",
            "Metastore connection pool saturated by partition listing calls.",
            target="metastore connection pool metrics",
            check="graph pool usage against the listing call rate",
            fix="raise the pool size and cache partition listings in the client",
        ),
        simple_sop(
            "Cluster autoscaling flaps between minimum and maximum size",
            "Scale up cooldown shorter than the batch arrival interval.",
            target="autoscaler event log",
            check="compare scale events against batch arrival times",
            fix="lengthen the cooldown so one batch cannot trigger two scale cycles",
        ),
        simple_sop(
            "Query on an external table returns stale rows",
            "Partition metadata cache not invalidated after a backfill.",
            target="partition metadata cache",
            check="compare cached partition versions against storage listing",
            fix="invalidate the table metadata after backfills finish",
        ),
        simple_sop(
            "Notebook attach fails with a kernel startup timeout",
            "Kernel image pull blocked by a registry rate limit.",
            target="kernel startup events",
            check="look for image pull throttling in the startup event log",
            fix="mirror the kernel image into the internal registry",
        ),
    ]


def noise_sops() -> list[SOPRecord]:
    """Decoys that share surface tokens with the checkpoint-lag procedure."""
    return [
        simple_sop(
            "Streaming checkpoint lag growing after cluster maintenance",
            "Stale checkpoint retained after the maintenance window restart.",
            target="checkpoint directory timestamps",
            check="compare checkpoint age against the maintenance window",
            fix="clear the stale checkpoint and restart the job from the latest offset",
        ),
        simple_sop(
            "Checkpoint lag growing for a compacted topic",
            "Log compaction pause stalls the consumer offsets.",
            target="topic compaction metrics",
            check="check compaction lag for the subscribed topic",
            fix="resume compaction and raise the consumer fetch size",
        ),
        simple_sop(
            "Streaming job lag alert keeps firing at a fixed threshold",
            "Alert threshold set below the normal catch up lag.",
            target="alert rule definition",
            check="compare the alert threshold against steady state lag",
            fix="raise the alert threshold above the steady state lag",
        ),
    ]


_WIKI_ENTRIES = [
    (
        "NumberFormatException troubleshooting notes for ingestion",
        "Ingestion NumberFormatException usually traces back to unparsable"
        " characters in the source export, such as embedded line breaks."
        " Check the quoted input value in the first stack frame, then inspect"
        " the raw export rows around the failing record.",
    ),
    (
        "Raw export quality checklist before ingestion",
        "Verify quoted fields do not embed unescaped newlines, strip control"
        " characters during export, and spot check numeric columns for stray"
        " text before loading.",
    ),
    (
        "Executor memory tuning guide for shuffle heavy jobs",
        "When executor heap usage stays above 95 percent and GC time climbs"
        " past 40 percent, raise executor memory and repartition skewed"
        " stages; the nightly compaction shuffle is the usual offender.",
    ),
    (
        "Staging area cleanup runbook",
        "Temporary files from aborted loads accumulate under the staging"
        " directory; schedule the cleanup job or run it manually before quota"
        " alerts fire.",
    ),
    (
        "Queue scheduling and preemption policy",
        "The shared queue preempts jobs that exceed their resource share"
        " whenever the queue is over its quota; long running ad hoc jobs"
        " should move to the batch queue.",
    ),
    (
        "Storage quota monitoring dashboard guide",
        "The staging quota dashboard shows per directory usage; orphaned"
        " files older than seven days are safe to remove.",
    ),
]

_WEB_PAGES = [
    (
        "javanotes",
        "https://javanotes.example.org/numberformatexception",
        "How NumberFormatException reports the offending input",
        "The exception message quotes the exact input string that failed to"
        " parse. Control characters inside the quotes usually mean the source"
        " data is corrupt rather than the parser being wrong.",
    ),
    (
        "jvmguide",
        JVM_GUIDE_URL,
        "JVM GC overhead limit exceeded explained",
        "The error means the JVM spends nearly all CPU in garbage collection"
        " because the heap is undersized for the working set. Raise the heap"
        " or shrink the working set; tuning the collector alone rarely helps.",
    ),
    (
        "dataops",
        "https://dataops.example.net/staging-quota",
        "Managing staging area quotas for batch platforms",
        "Staging directories fill up with orphaned temporary files when loads"
        " abort. Automate cleanup and alert well before the hard quota.",
    ),
]

_CAUSE_EXAMPLES = (
    [
        {
            "features": [
                "system:warehouse",
                "module:ingestion",
                "request_type:troubleshooting",
                "action:schema_change",
            ],
            "cause": "missing_knowledge",
        }
    ]
    * 6
    + [
        {
            "features": [
                "system:streaming",
                "module:kafka-consumer",
                "request_type:troubleshooting",
                "action:config_change",
            ],
            "cause": "stale_knowledge",
        }
    ]
    * 5
    + [
        {
            "features": [
                "system:warehouse",
                "module:access",
                "request_type:consultation",
                "action:permission_grant",
            ],
            "cause": "permission_issue",
        }
    ]
    * 5
    + [
        {
            "features": [
                "system:analytics",
                "module:dashboard",
                "request_type:troubleshooting",
                "action:debugging",
            ],
            "cause": "reasoning_error",
        }
    ]
    * 4
)

TASK_LOG_TEXT = (
    "24/05/11 02:14:03 INFO scheduler: stage 4 started\n"
    "24/05/11 02:14:09 ERROR executor: task 17 failed\n"
    "Caused by: java.lang.NumberFormatException: For input string: \"12\n34\"\n"
    "\tat java.lang.Integer.parseInt(Integer.java:652)\n"
    "24/05/11 02:14:09 WARN scheduler: aborting stage 4\n"
)

TASK_METRICS_TEXT = (
    "task: task_88002\n"
    "stage: nightly compaction shuffle\n"
    "heap_used_percent: 97\n"
    "gc_time_percent: 41\n"
    "shuffle_spill_gb: 48\n"
)


def build_fixture_world(root: str | Path, *, noise: bool = False) -> Path:
    """Write a complete data directory; safe to copy per test."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    embedder = HashingEmbedder(EMBED_DIM)

    kb_dir = root / "kb"
    kb_dir.mkdir(exist_ok=True)
    sop_store = KnowledgeStore(
        kb_dir / "sop.jsonl",
        base_id="sop",
        level=Level.SOP,
        embedder=embedder,
        description="validated operating procedures",
        id_prefix="sop",
    )
    for record in seed_sops():
        sop_store.upsert_sop(record)
    if noise:
        for record in noise_sops():
            sop_store.upsert_sop(record)

    wiki = KnowledgeStore(
        kb_dir / "internal-wiki.jsonl",
        base_id="wiki",
        level=Level.INTERNAL,
        embedder=embedder,
        description="internal documents: wiki",
        id_prefix="wiki",
    )
    for key, value in _WIKI_ENTRIES:
        wiki.add_entry(key, value, provenance=[Provenance("manual", "seed-corpus")])

    web_dir = root / "web"
    web_dir.mkdir(exist_ok=True)
    for name, url, title, body in _WEB_PAGES:
        (web_dir / f"{name}.txt").write_text(f"{url}\n{title}\n{body}\n", encoding="utf-8")

    platform = root / "platform"
    (platform / "logs").mkdir(parents=True, exist_ok=True)
    (platform / "metrics").mkdir(exist_ok=True)
    (platform / "configs").mkdir(exist_ok=True)
    (platform / "logs" / "task_12345.txt").write_text(TASK_LOG_TEXT, encoding="utf-8")
    (platform / "metrics" / "task_88002.txt").write_text(TASK_METRICS_TEXT, encoding="utf-8")
    (platform / "configs" / "sql_gateway.txt").write_text(
        "component: sql_gateway\nsession_timeout_seconds: 300\nmax_result_rows: 100000\n",
        encoding="utf-8",
    )

    (root / "agents.json").write_text(
        json.dumps(
            [
                {
                    "name": "diagnosis",
                    "description": "walks the knowledge hierarchy for task failures",
                    "keywords": [
                        "task failure diagnosis",
                        "error log analysis",
                        "platform incident investigation",
                    ],
                }
            ],
            indent=2,
        ),
        encoding="utf-8",
    )
    (root / "background.txt").write_text(
        "Operations assistant for a batch and streaming data platform."
        " Users report failing tasks, slow jobs, and how-to questions."
        " Prefer documented procedures over guesses and cite evidence.\n",
        encoding="utf-8",
    )

    cases = [
        {
            "ticket_id": "t-9001",
            "summary": "how do I enable dynamic partition inserts in hive",
            "resolution": "set hive.exec.dynamic.partition=true and"
            " hive.exec.dynamic.partition.mode=nonstrict for the session,"
            " then rerun the insert",
        },
        {
            "ticket_id": "t-9002",
            "summary": "requesting read access to the finance schema",
            "resolution": "access granted through the standard approval flow",
        },
    ]
    with open(root / "cases.jsonl", "w", encoding="utf-8") as fh:
        for row in cases:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    bench_dir = root / "bench"
    bench_dir.mkdir(exist_ok=True)
    with open(bench_dir / "cases.jsonl", "w", encoding="utf-8") as fh:
        for case in BENCH_CASES:
            row = {
                "id": case.bench_id,
                "request": case.request,
                "expected_root_cause": case.expected_root_cause,
                "structured_context": case.context(),
                "expected_sop_id": case.expected_sop_id,
                "has_logs": bool(case.fields.get("error_log")),
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    with open(root / "cause_examples.jsonl", "w", encoding="utf-8") as fh:
        for row in _CAUSE_EXAMPLES:
            fh.write(json.dumps(row) + "\n")
    model = fit(
        [(tuple(r["features"]), r["cause"]) for r in _CAUSE_EXAMPLES],
        causes=DEFAULT_CAUSES,
    )
    (root / "cause_model.json").write_text(
        json.dumps(model_to_dict(model), indent=2), encoding="utf-8"
    )

    with open(root / "tickets_batch.jsonl", "w", encoding="utf-8") as fh:
        for turns, outcome in (
            (CASE_TICKET_TURNS, CASE_TICKET_OUTCOME),
            (ACCEPT2_TICKET_TURNS, ACCEPT2_TICKET_OUTCOME),
            (ESCALATE_TICKET_TURNS, ESCALATE_TICKET_OUTCOME),
            (CHITCHAT_TICKET_TURNS, CHITCHAT_TICKET_OUTCOME),
        ):
            fh.write(
                json.dumps({"turns": [list(t) for t in turns], "outcome": outcome}) + "\n"
            )

    (root / "transcripts").mkdir(exist_ok=True)
    return root


# ---------------------------------------------------------------- diag cases


def _troubleshoot_answer(cause: str, checks: Sequence[str], fixes: Sequence[str], finding: str) -> dict:
    return {
        "root_cause": cause,
        "investigation_steps": list(checks),
        "resolution_steps": list(fixes),
        "confirmed_findings": [finding],
        "hypotheses": [],
        "missing_information": [],
        "citations": [],
    }


def _consult_answer(explanation: str, recommendation: str) -> dict:
    return {
        "explanation": explanation,
        "recommendation": recommendation,
        "missing_information": [],
        "citations": [],
    }


@dataclass(frozen=True)
class DiagCase:
    """One scripted diagnosis request and the replies that resolve it."""

    name: str
    request: str
    request_type: str = "troubleshooting"
    fields: Mapping[str, str] = dataclasses.field(default_factory=dict)
    keywords: tuple[str, ...] = ("task failure diagnosis",)
    answer: Mapping[str, object] | None = None
    # refs that prove the answer; the matched one becomes the first citation
    requires: tuple[str, ...] = ()
    extra_citations: tuple[str, ...] = ()
    cot_known: bool = False
    wrong_hypothesis: str = "the reported behavior matches no documented cause"
    bench_id: str | None = None
    expected_sop_id: str | None = None
    expected_root_cause: str = ""

    def context(self) -> dict:
        return {
            "request_type": self.request_type,
            "text": self.request,
            "fields": dict(self.fields),
            "keywords": list(self.keywords),
        }

    def citations_for(self, matched: str) -> list[str]:
        out = [matched]
        out.extend(c for c in self.extra_citations if c != matched)
        return out

    def wrong_reply(self) -> dict:
        if self.request_type == "consultation":
            return {
                "explanation": "No grounded explanation was found for this question.",
                "recommendation": "Gather more specific details and retry.",
                "missing_information": ["supporting evidence from the knowledge base"],
                "citations": [],
            }
        return {
            "root_cause": "Not determinable from the available evidence.",
            "investigation_steps": ["collect the failing task id and its error log"],
            "resolution_steps": [],
            "confirmed_findings": [],
            "hypotheses": [self.wrong_hypothesis],
            "missing_information": ["supporting evidence from the knowledge base"],
            "citations": [],
        }


def _bench_case(
    name: str,
    bench_id: str,
    request: str,
    cause: str,
    sop_id: str,
    fields: Mapping[str, str],
    checks: Sequence[str],
    fixes: Sequence[str],
    finding: str,
    *,
    requires: tuple[str, ...] | None = None,
    extra_citations: tuple[str, ...] = (),
    cot_known: bool = False,
) -> DiagCase:
    return DiagCase(
        name=name,
        request=request,
        fields=fields,
        answer=_troubleshoot_answer(cause, checks, fixes, finding),
        requires=requires if requires is not None else (sop_id,),
        extra_citations=extra_citations,
        cot_known=cot_known,
        bench_id=bench_id,
        expected_sop_id=sop_id,
        expected_root_cause=cause,
    )


BENCH_CASES: tuple[DiagCase, ...] = (
    _bench_case(
        "golden",
        "b-001",
        'ingestion task failing with java.lang.NumberFormatException: For input string: "12"',
        LINE_BREAK_CAUSE,
        GOLDEN_SOP_ID,
        {
            "symptom": "nightly ingestion task fails before the load completes",
            "error_log": 'java.lang.NumberFormatException: For input string: "12"',
        },
        ["inspect the first NumberFormatException frame and the quoted input value"],
        ["re-export the source data with line breaks stripped, then rerun the task"],
        "the quoted input value is truncated mid-number",
        requires=(GOLDEN_SOP_ID, "wiki-0001"),
    ),
    _bench_case(
        "oom",
        "b-002",
        "executor lost with outofmemoryerror during the large nightly shuffle",
        OOM_CAUSE,
        "sop-0002",
        {
            "symptom": "executors keep dying during the wide join stage",
            "error_log": "java.lang.OutOfMemoryError: Java heap space",
        },
        ["check executor stderr for OutOfMemoryError and note the spill size"],
        ["raise executor memory and repartition the skewed stage"],
        "the failing stage spills far more than the executor heap",
        requires=("sop-0002", "wiki-0003"),
        cot_known=True,
    ),
    _bench_case(
        "quota",
        "b-003",
        "task aborted with diskquotaexceeded while writing staging output",
        QUOTA_CAUSE,
        "sop-0003",
        {
            "symptom": "loads abort while writing to the staging area",
            "error_log": "DiskQuotaExceeded: staging directory over quota",
        },
        ["sum temporary file sizes in staging against the quota"],
        ["run the staging cleanup job and rerun the aborted task"],
        "orphaned temporary files from aborted loads fill the staging area",
        requires=("sop-0003", "wiki-0004"),
    ),
    _bench_case(
        "permission",
        "b-004",
        "query fails with permission denied reading the sales warehouse table",
        PERMISSION_CAUSE,
        "sop-0006",
        {
            "symptom": "scheduled query started failing after a role change",
            "error_log": "AccessDenied: role etl_reader lacks SELECT on sales.orders",
        },
        ["list grants on the table and compare against the submitting role"],
        ["grant table level read to the submitting role"],
        "the submitting role is missing from the table grant list",
    ),
    _bench_case(
        "timeout",
        "b-005",
        "interactive query session disconnects with a gateway timeout after five minutes",
        TIMEOUT_CAUSE,
        "sop-0007",
        {
            "symptom": "long interactive queries drop mid-run",
            "error_log": "GatewayTimeout: session closed after 300 seconds",
        },
        ["compare the gateway session timeout against the query runtime"],
        ["raise the gateway session timeout or move the query to the batch queue"],
        "the session timeout is shorter than the query runtime",
        cot_known=True,
    ),
    _bench_case(
        "queue",
        "b-006",
        "my submitted job stays pending in the scheduler queue for hours",
        QUEUE_CAUSE,
        "sop-0009",
        {
            "symptom": "jobs sit pending even during off-peak hours",
            "task_id": "task_70914",
        },
        ["list running jobs on the queue with their requested capacity"],
        ["move long running ad hoc jobs to the batch queue"],
        "ad hoc jobs hold the queue capacity around the clock",
    ),
    _bench_case(
        "schema_merge",
        "b-007",
        "our parquet scan fails with a schema merge conflict across partitions",
        SCHEMA_MERGE_CAUSE,
        "sop-0008",
        {
            "symptom": "reads fail only when the scan spans old and new partitions",
            "error_log": "SchemaMergeError: column price is DOUBLE in one file and INT64 in another",
        },
        ["diff column types across the conflicting partition footers"],
        ["rewrite the offending partitions with the declared column types"],
        "two partition generations disagree on the column type",
    ),
    _bench_case(
        "kafka",
        "b-008",
        "streaming job checkpoint lag keeps growing after the consumer group redeploy",
        KAFKA_CAUSE,
        KAFKA_SOP_ID,
        {
            "symptom": "checkpoint lag grows steadily since the redeploy",
            "error_log": "group coordinator: member session timed out, rebalancing",
        },
        ["compare the consumer session timeout against the broker minimum"],
        ["raise session.timeout.ms above the broker minimum and redeploy"],
        "the group rebalances continuously instead of consuming",
    ),
    _bench_case(
        "logs_needed",
        "b-009",
        "nightly load task task_12345 failed and I have no further details",
        LINE_BREAK_CAUSE,
        GOLDEN_SOP_ID,
        {
            "symptom": "nightly load failed without an error snippet in the report",
            "task_id": "task_12345",
        },
        ["fetch the task log and read the first NumberFormatException frame"],
        ["re-export the source data with line breaks stripped, then rerun the task"],
        "the fetched log quotes an input value with an embedded line break",
        requires=("tool:fetch_logs#1",),
        extra_citations=(GOLDEN_SOP_ID,),
    ),
    _bench_case(
        "metrics_needed",
        "b-010",
        "job task_88002 crashes at the same stage every night without an error snippet",
        OOM_CAUSE,
        "sop-0002",
        {
            "symptom": "job dies at the same shuffle stage nightly",
            "task_id": "task_88002",
        },
        ["fetch task metrics and check heap usage and GC time at the failing stage"],
        ["raise executor memory and repartition the skewed stage"],
        "heap sits at 97 percent with GC burning 41 percent of CPU",
        requires=("tool:fetch_metrics#1",),
        extra_citations=("wiki-0003",),
    ),
)

EXTRA_CASES: tuple[DiagCase, ...] = (
    DiagCase(
        name="chat_nfe",
        request="my spark task failed with an error",
        fields={
            "symptom": "spark task failed during the nightly load",
            "error_log": NFE_ERROR_LOG,
            "task_id": "task_12345",
        },
        answer=_troubleshoot_answer(
            LINE_BREAK_CAUSE,
            ["inspect the first NumberFormatException frame and the quoted input value"],
            ["clean the unparsable characters out of the source export and rerun"],
            "the parser rejects a value it cannot read as a number",
        ),
        requires=(GOLDEN_SOP_ID,),
    ),
    DiagCase(
        name="memory_followon",
        request="it failed again this morning with the same numberformatexception error",
        fields={},
        answer=_troubleshoot_answer(
            LINE_BREAK_CAUSE,
            ["re-check the task log for the NumberFormatException frame"],
            ["clean the unparsable characters out of the source export and rerun"],
            "the same parse failure reproduced on the morning run",
        ),
        requires=(GOLDEN_SOP_ID,),
    ),
    DiagCase(
        name="web_descend",
        request="driver crashed with gc overhead limit exceeded and our docs have nothing on it",
        fields={
            "symptom": "driver crashes after minutes of heavy load",
            "error_log": "java.lang.OutOfMemoryError: GC overhead limit exceeded",
        },
        answer=_troubleshoot_answer(
            GC_OVERHEAD_CAUSE,
            ["confirm GC time dominates CPU just before the crash"],
            ["raise the driver heap or shrink the working set"],
            "public guidance matches the observed GC thrash",
        ),
        requires=(JVM_GUIDE_URL,),
    ),
    DiagCase(
        name="model_knowledge",
        request="what is the practical difference between repartition and coalesce",
        request_type="consultation",
        fields={"topic": "repartition versus coalesce"},
        keywords=(),
        answer=_consult_answer(
            "repartition performs a full shuffle to any partition count, while"
            " coalesce only collapses existing partitions without a shuffle,"
            " so it is cheaper but can skew partition sizes.",
            "use coalesce to reduce partitions before a write; use repartition"
            " when increasing parallelism or when balance matters.",
        ),
    ),
    DiagCase(
        name="malformed_planner",
        request="the export job writes partial files on some mornings",
        fields={
            "symptom": "export files are sometimes truncated",
            "task_id": "task_31337",
        },
        wrong_hypothesis="intermittent truncation has no documented procedure yet",
    ),
    DiagCase(
        name="preempted",
        request="the report job is killed intermittently under memory pressure on the shared queue",
        fields={
            "symptom": "report job dies only when the cluster is busy",
            "task_id": "task_40404",
        },
        answer=_troubleshoot_answer(
            PREEMPTION_CAUSE,
            ["check the scheduler events for preemption of the job"],
            ["move the job to the batch queue or raise its queue share"],
            "scheduler events show the job was preempted, not crashed",
        ),
        requires=("wiki-0005",),
    ),
    DiagCase(
        name="budget",
        request="task task_55555 fails and the first search never narrows anything down",
        fields={
            "symptom": "repeated failure with an unhelpful error",
            "task_id": "task_55555",
        },
    ),
    DiagCase(
        name="citation_strip",
        request="distributed copy aborts with a multipart checksum mismatch on retries",
        fields={
            "symptom": "large copies abort near the end",
            "error_log": "ChecksumMismatch: multipart upload part 83",
        },
        answer=_troubleshoot_answer(
            CHECKSUM_CAUSE,
            ["look for two concurrent attempts writing the same destination part"],
            ["enable single-writer locking for the destination and retry"],
            "two attempt ids overlap on the same destination part",
        ),
        requires=("sop-0012",),
        extra_citations=("sop-9999",),
    ),
    DiagCase(
        name="incomplete",
        request="ingest runs have been slow since yesterday without any visible errors",
        fields={"symptom": "ingest runs slowed down without errors"},
        wrong_hypothesis="slowness without an error log points at resource contention",
    ),
    DiagCase(
        name="consult_engine",
        request="compare parquet and orc for long term analytics storage",
        request_type="consultation",
        fields={"topic": "storage format tradeoffs"},
        keywords=(),
        answer=_consult_answer(
            "both are columnar formats with comparable compression; parquet"
            " has broader engine support while orc carries richer built-in"
            " indexes on some stacks.",
            "default to parquet for cross-engine analytics unless the whole"
            " stack is tuned for orc.",
        ),
    ),
    DiagCase(
        name="etl_vague",
        request="my etl job keeps producing strange results",
        keywords=(),
        wrong_hypothesis="no concrete symptom or log was provided",
    ),
    DiagCase(
        name="zzz",
        request="zzz qqq blorp?",
        keywords=(),
        wrong_hypothesis="the request text carries no recognizable platform terms",
    ),
)

DIAG_CASES: tuple[DiagCase, ...] = BENCH_CASES + EXTRA_CASES


def diag_case(name: str) -> DiagCase:
    for case in DIAG_CASES:
        if case.name == name:
            return case
    raise KeyError(name)


def bench_case(name: str) -> "object":
    """BenchCase row for one named diagnosis case."""
    case = diag_case(name)
    if case.bench_id is None:
        raise KeyError(f"{name} is not a benchmark case")
    from opsassist.bench import BenchCase

    return BenchCase(
        id=case.bench_id,
        request=case.request,
        expected_root_cause=case.expected_root_cause,
        structured_context=case.context(),
        expected_sop_id=case.expected_sop_id,
        has_logs=bool(case.fields.get("error_log")),
    )


# -------------------------------------------------------------- chat fixtures


CHAT_NFE_T1 = "my spark task failed with an error"
CHAT_NFE_T2 = (
    "the task id is task_12345 and the log shows"
    ' java.lang.NumberFormatException: For input string: "yyyy-mm-dd hh:mm:ss"'
)
CHAT_NFE_T3 = "it failed again this morning with the same numberformatexception error"

CHAT_NFE_FIELDS = {
    "symptom": "spark task failed during the nightly load",
    "error_log": NFE_ERROR_LOG,
    "task_id": "task_12345",
}

# Console twin of the second chat turn: same intent the chat path converges to.
CHAT_NFE_CONTEXT = {
    "request_type": "troubleshooting",
    "text": CHAT_NFE_T1,
    "fields": dict(CHAT_NFE_FIELDS),
    "keywords": ["task failure diagnosis"],
}

REFUSAL_TEXT = "hello there, anyone up for lunch?"
QUICK_CASE_TEXT = "how do I enable dynamic partition inserts in hive"
SIMPLE_DIRECT_TEXT = "what is a shuffle in a distributed query engine"
SIMPLE_DIRECT_REPLY = (
    "A shuffle redistributes rows across workers so rows with the same key"
    " land on the same partition; it is the expensive all-to-all exchange"
    " between stages."
)
CONSULT_ENGINE_TEXT = "compare parquet and orc for long term analytics storage"
ETL_VAGUE_T1 = "my etl job keeps producing strange results"
ETL_VAGUE_FOLLOWUPS = (
    "it looked weird again today",
    "the numbers just seem off in the morning",
    "honestly it is hard to describe",
)
ZZZ_TEXT = "zzz qqq blorp?"
UNRECORDED_POKE = "unrecorded poke zz9"


# ------------------------------------------------------------ ticket fixtures


CASE_TICKET_TURNS: tuple[tuple[str, str], ...] = (
    ("user", "our nightly ingestion task started failing after we added a column upstream"),
    ("assistant", "could you paste the error log snippet from the failing task?"),
    ("user", "the log shows " + NFE_ERROR_LOG),
    ("assistant", "which column changed and what is its declared type?"),
    (
        "user",
        "last_modified_time was changed upstream from a bigint epoch to a formatted"
        " timestamp string, but the table still declares bigint",
    ),
    (
        "assistant",
        "that mismatch is the cause; correct the column type in the table metadata"
        " and rerun the load",
    ),
    ("user", "confirmed, after correcting the column type the load works"),
)
CASE_TICKET_OUTCOME = "resolved: column type corrected via schema change"

ACCEPT2_TICKET_TURNS: tuple[tuple[str, str], ...] = (
    ("user", "our streaming job lag keeps growing and the consumer group seems stuck rebalancing"),
    ("assistant", "what is session.timeout.ms for the consumer group and the broker minimum?"),
    ("user", "session.timeout.ms is 6000 and the broker minimum is 10000"),
    ("assistant", "raise session.timeout.ms above the broker minimum and redeploy"),
    ("user", "raised it to 30000 and the group is stable now"),
)
ACCEPT2_TICKET_OUTCOME = "resolved: consumer session timeout raised above broker minimum"

ESCALATE_TICKET_TURNS: tuple[tuple[str, str], ...] = (
    ("user", "the revenue dashboard doubled overnight and nobody changed the report"),
    ("assistant", "did the upstream fact table or the join keys change recently?"),
    (
        "user",
        "we found duplicate rows after a backfill but also a new join and a timezone"
        " shift, we fixed several things and it looks right now",
    ),
)
ESCALATE_TICKET_OUTCOME = "resolved: numbers look correct after several changes"

CHITCHAT_TICKET_TURNS: tuple[tuple[str, str], ...] = (
    ("user", "please add me to the analytics mailing list"),
)
CHITCHAT_TICKET_OUTCOME = "resolved: added"

CASE_TICKET_LABELS = {
    "system": "warehouse",
    "module": "ingestion",
    "request_type": "troubleshooting",
    "summary": "Nightly ingestion failed on a number parse error after an upstream column type change.",
    "keywords": ["numberformatexception", "ingestion", "schema"],
    "final_actions": ["schema_change"],
}


def _nfe_draft(verb: str) -> dict:
    """Author drafts agree on the cause; only incidental wording varies."""
    return {
        "problem_desc": NFE_PROBLEM_DESC,
        "content": [
            {
                "root_cause": COLUMN_TYPE_CAUSE,
                "investigation_steps": [
                    {
                        "step": "1",
                        "target": "task error log",
                        "action": f"{verb} the first NumberFormatException frame and note the failing value",
                        "observations": [
                            {
                                "condition": "the failing value is a formatted timestamp while the column is declared bigint",
                                "outcome": "confirmed",
                            },
                            {
                                "condition": "the failing value looks numeric",
                                "outcome": "goto 2",
                            },
                        ],
                    },
                    {
                        "step": "2",
                        "target": "table metadata",
                        "action": "compare the declared column type against the values arriving upstream",
                        "observations": [
                            {
                                "condition": "declared type predates the upstream format change",
                                "outcome": "confirmed",
                            }
                        ],
                    },
                ],
                "resolution_steps": [
                    {"step": "1", "action": "correct the column type in the table metadata"},
                    {"step": "2", "action": "rerun the ingestion task"},
                ],
            }
        ],
    }


def _kafka_draft(cause: str) -> dict:
    return {
        "problem_desc": ACCEPT2_PROBLEM_DESC,
        "content": [
            {
                "root_cause": cause,
                "investigation_steps": [
                    {
                        "step": "1",
                        "target": "consumer group configuration",
                        "action": "compare session.timeout.ms against the broker minimum",
                        "observations": [
                            {
                                "condition": "the session timeout is below the broker minimum",
                                "outcome": "confirmed",
                            }
                        ],
                    }
                ],
                "resolution_steps": [
                    {
                        "step": "1",
                        "action": "raise session.timeout.ms above the broker minimum and redeploy",
                    }
                ],
            }
        ],
    }


def _dashboard_draft(cause: str, check: str, fix: str) -> dict:
    return {
        "problem_desc": "Dashboard metric doubled overnight without a report change",
        "content": [
            {
                "root_cause": cause,
                "investigation_steps": [
                    {
                        "step": "1",
                        "target": "fact table history",
                        "action": check,
                        "observations": [
                            {"condition": "the anomaly matches the check", "outcome": "confirmed"}
                        ],
                    }
                ],
                "resolution_steps": [{"step": "1", "action": fix}],
            }
        ],
    }


AUTHOR_DRAFTS: dict[str, tuple[dict, dict, dict]] = {
    # marker found in the ticket conversation -> one draft per generation run
    "last_modified_time": (_nfe_draft("locate"), _nfe_draft("find"), _nfe_draft("inspect")),
    "session.timeout.ms is 6000": (
        _kafka_draft(ACCEPT2_CAUSE),
        _kafka_draft(ACCEPT2_CAUSE),
        _kafka_draft("Consumer group churn caused by frequent container restarts."),
    ),
    "revenue dashboard doubled": (
        _dashboard_draft(
            "Backfill introduced duplicate fact rows.",
            "count rows per load id for the affected day",
            "delete the duplicate load and re-run with an exclusive window",
        ),
        _dashboard_draft(
            "New join fanned out the fact table.",
            "check row counts before and after the join change",
            "rework the join to be one-to-one before aggregation",
        ),
        _dashboard_draft(
            "Timezone shift double counted a day.",
            "compare event timestamps around midnight in both timezones",
            "normalize event time to UTC before bucketing",
        ),
    ),
}


# -------------------------------------------------------------------- brains


_ITER_RE = re.compile(r"Iteration: (\d+) of")
_LEVEL_RE = re.compile(r"Current level: (\d+)")
_FILTER_QUERY_RE = re.compile(r"Search query: (.*?) Candidates: \d+")
_FILTER_REF_RE = re.compile(r"- ref=(\S+) title=")
_DRAFT_RUN_RE = re.compile(r"Draft run: (\d+) of \d+")

_FLAT_MARKER = "Level 1: validated operating procedures; internal documents: wiki"


def _find_case(prompt: str) -> DiagCase | None:
    for case in DIAG_CASES:
        if f"Request: {_canon(case.request)} " in prompt:
            return case
    return None


def _retrieve(level: int, query: str) -> dict:
    return {"ans_ready": False, "act": "retrieve", "level": level, "query": query}


def _tool(name: str, task_id: str) -> dict:
    return {
        "ans_ready": False,
        "act": "tool",
        "tool": {"name": name, "arguments": {"task_id": task_id}},
    }


def _nosop_script(q1: str, q2: str):
    """Two wiki lookups when the procedure level is unavailable."""

    def script(it: int, level: int, flat: bool, prompt: str):
        # the prompt lists available levels; with procedures present the
        # default stay-or-descend policy is enough
        if flat or "Level 1: validated operating procedures" in prompt:
            return None
        if it == 1:
            return _retrieve(2, q1)
        if it == 2:
            return _retrieve(2, q2)
        return None

    return script


def _planner_logs(it: int, level: int, flat: bool, prompt: str):
    if flat:
        return None
    if it == 1:
        return _tool("fetch_logs", "task_12345")
    if it == 2:
        return _retrieve(1, "numberformatexception for input string ingestion failure")
    return None


def _planner_metrics(it: int, level: int, flat: bool, prompt: str):
    if flat:
        return None
    if it == 1:
        return _tool("fetch_metrics", "task_88002")
    if it == 2:
        return _retrieve(1, "recurring crash at the nightly compaction shuffle stage")
    if it == 3:
        return _retrieve(2, "executor memory tuning guide for shuffle heavy jobs")
    return None


def _planner_web(it: int, level: int, flat: bool, prompt: str):
    if it == 1:
        return _retrieve(1, WEB_Q1)
    if it == 2:
        return _retrieve(2, WEB_Q2)
    if it == 3:
        return _retrieve(3, WEB_Q3)
    return None


def _planner_model(it: int, level: int, flat: bool, prompt: str):
    if it == 1:
        return _retrieve(4, "repartition versus coalesce")
    return {"ans_ready": True}


def _planner_malformed(it: int, level: int, flat: bool, prompt: str):
    if it == 1:
        return "still thinking about where to look..."
    return None


def _planner_preempted(it: int, level: int, flat: bool, prompt: str):
    if flat:
        return None
    if it == 1:
        return _retrieve(1, "report job killed intermittently on the shared queue")
    if it == 2:
        return _retrieve(2, "queue scheduling and preemption policy")
    return None


def _planner_budget(it: int, level: int, flat: bool, prompt: str):
    if it == 1:
        return _retrieve(1, "task_55555 failure first pass")
    if it == 2:
        return _retrieve(1, "task_55555 failure second pass")
    return None


def _planner_chat_nfe(it: int, level: int, flat: bool, prompt: str):
    if flat:
        return None
    if it == 1:
        return _retrieve(1, "numberformatexception for input string during the nightly load")
    return None


def _planner_citation_strip(it: int, level: int, flat: bool, prompt: str):
    if flat:
        return None
    if it == 1:
        return _retrieve(1, "distributed copy multipart checksum mismatch")
    return None


PLANNER_SCRIPTS: dict[str, Callable] = {
    "golden": _nosop_script(
        "numberformatexception troubleshooting notes for ingestion",
        "raw export quality checklist before ingestion",
    ),
    "oom": _nosop_script(
        "executor memory tuning guide for shuffle heavy jobs",
        "raw export quality checklist before ingestion",
    ),
    "quota": _nosop_script(
        "staging area cleanup runbook",
        "storage quota monitoring dashboard guide",
    ),
    "logs_needed": _planner_logs,
    "metrics_needed": _planner_metrics,
    "web_descend": _planner_web,
    "model_knowledge": _planner_model,
    "malformed_planner": _planner_malformed,
    "preempted": _planner_preempted,
    "budget": _planner_budget,
    "chat_nfe": _planner_chat_nfe,
    "citation_strip": _planner_citation_strip,
}


def _brain_planner(prompt: str) -> str:
    case = _find_case(prompt)
    it_match = _ITER_RE.search(prompt)
    level_match = _LEVEL_RE.search(prompt)
    if case is None or it_match is None or level_match is None:
        raise LookupError(f"planner prompt not recognized: {prompt[:160]}")
    it = int(it_match.group(1))
    level = int(level_match.group(1))
    flat = _FLAT_MARKER in prompt
    script = PLANNER_SCRIPTS.get(case.name)
    decision = script(it, level, flat, prompt) if script else None
    if isinstance(decision, str):
        return decision
    if decision is None:
        # default policy: search the current level once, then answer
        if " ref=" in prompt:
            decision = {"ans_ready": True}
        else:
            decision = _retrieve(level, case.request)
    return json.dumps(decision)


def _filter_golden(query: str, refs: list[str]):
    keep = [r for r in refs if r == GOLDEN_SOP_ID]
    if keep:
        return keep
    if query.startswith("numberformatexception troubleshooting"):
        return [r for r in refs if r == "wiki-0001"]
    return []


def _filter_kafka(query: str, refs: list[str]):
    return [r for r in refs if r == KAFKA_SOP_ID]


def _filter_metrics(query: str, refs: list[str]):
    if query.startswith("executor memory tuning guide"):
        return [r for r in refs if r == "wiki-0003"]
    return []


def _filter_web(query: str, refs: list[str]):
    if query == WEB_Q3:
        return [r for r in refs if r.startswith("https://jvmguide")]
    return []


def _filter_preempted(query: str, refs: list[str]):
    if query.startswith("queue scheduling"):
        return [r for r in refs if r == "wiki-0005"]
    return []


FILTER_SCRIPTS: dict[str, Callable] = {
    "golden": _filter_golden,
    "kafka": _filter_kafka,
    "metrics_needed": _filter_metrics,
    "web_descend": _filter_web,
    "preempted": _filter_preempted,
}


def _brain_filter(prompt: str) -> str:
    case = _find_case(prompt)
    query_match = _FILTER_QUERY_RE.search(prompt)
    refs = _FILTER_REF_RE.findall(prompt)
    if case is None or query_match is None:
        raise LookupError(f"filter prompt not recognized: {prompt[:160]}")
    script = FILTER_SCRIPTS.get(case.name)
    keep = script(query_match.group(1), refs) if script else None
    if keep is None:
        keep = refs
    return json.dumps({"keep": keep})


def _noise_kafka_reply(case: DiagCase) -> dict:
    reply = dict(case.answer)
    reply = {k: (list(v) if isinstance(v, list) else v) for k, v in reply.items()}
    reply["citations"] = [KAFKA_SOP_ID, NOISE_SOP_IDS[0]]
    reply["hypotheses"] = ["the recent maintenance window may also have left a stale checkpoint"]
    return reply


def _brain_summary(prompt: str) -> str:
    case = _find_case(prompt)
    if case is None:
        raise LookupError(f"summary prompt not recognized: {prompt[:160]}")
    if case.name == "kafka" and f"ref={NOISE_SOP_IDS[0]} " in prompt:
        # unfiltered noise pulls decoy procedures into the citation list
        return json.dumps(_noise_kafka_reply(case))
    matched = next((ref for ref in case.requires if f"ref={ref} " in prompt), None)
    if case.answer is not None and (not case.requires or matched):
        reply = {k: (list(v) if isinstance(v, list) else v) for k, v in dict(case.answer).items()}
        if case.requires and matched:
            reply["citations"] = case.citations_for(matched)
        return json.dumps(reply)
    if case.cot_known and "Evidence items: 0" in prompt:
        reply = {k: (list(v) if isinstance(v, list) else v) for k, v in dict(case.answer).items()}
        reply["citations"] = []
        reply["confirmed_findings"] = []
        reply["hypotheses"] = ["answered from general platform experience without corpus evidence"]
        return json.dumps(reply)
    return json.dumps(case.wrong_reply())


INTENT_TABLE: tuple[tuple[str, dict | str], ...] = (
    (REFUSAL_TEXT, {"in_scope": False, "reason": "social chat, not a platform request"}),
    (CHAT_NFE_T1, {"in_scope": True, "request_type": "troubleshooting"}),
    (CHAT_NFE_T3, {"in_scope": True, "request_type": "troubleshooting"}),
    (QUICK_CASE_TEXT, {"in_scope": True, "request_type": "consultation"}),
    (SIMPLE_DIRECT_TEXT, {"in_scope": True, "request_type": "consultation"}),
    (CONSULT_ENGINE_TEXT, {"in_scope": True, "request_type": "consultation"}),
    (ETL_VAGUE_T1, {"in_scope": True, "request_type": "troubleshooting"}),
    (ZZZ_TEXT, "zzz?"),
)


def _brain_intent(prompt: str) -> str:
    for marker, reply in INTENT_TABLE:
        if f"Message: {_canon(marker)} " in prompt:
            return reply if isinstance(reply, str) else json.dumps(reply)
    raise LookupError(f"intent prompt not recognized: {prompt[:160]}")


# Later turns contain earlier ones, so more specific markers come first.
CLARIFY_TABLE: tuple[tuple[str, dict], ...] = (
    (
        "the task id is task_12345 and the log shows",
        {"fields": dict(CHAT_NFE_FIELDS), "keywords": ["task failure diagnosis"]},
    ),
    (
        CHAT_NFE_T3,
        {
            "fields": {"symptom": "recurring numberformatexception failure in the nightly load"},
            "keywords": ["task failure diagnosis"],
        },
    ),
    (
        CHAT_NFE_T1,
        {
            "fields": {"symptom": "spark task failed during the nightly load"},
            "keywords": ["task failure diagnosis"],
        },
    ),
    (QUICK_CASE_TEXT, {"fields": {"topic": "hive dynamic partition inserts"}, "keywords": []}),
    (SIMPLE_DIRECT_TEXT, {"fields": {"topic": "shuffle mechanics"}, "keywords": []}),
    (CONSULT_ENGINE_TEXT, {"fields": {"topic": "storage format tradeoffs"}, "keywords": []}),
    (ETL_VAGUE_T1, {"fields": {}, "keywords": []}),
    (
        ZZZ_TEXT,
        {
            "fields": {"symptom": "unspecified platform misbehavior", "task_id": "task_00000"},
            "keywords": [],
        },
    ),
)


def _brain_clarify(prompt: str) -> str:
    for marker, reply in CLARIFY_TABLE:
        if _canon(marker) in prompt:
            return json.dumps(reply)
    raise LookupError(f"clarify prompt not recognized: {prompt[:160]}")


SIMPLICITY_TABLE: tuple[tuple[str, bool], ...] = (
    (SIMPLE_DIRECT_TEXT, True),
    (diag_case("model_knowledge").request, False),
    (CONSULT_ENGINE_TEXT, False),
    (ETL_VAGUE_T1, False),
    (ZZZ_TEXT, False),
)


def _brain_simplicity(prompt: str) -> str:
    for marker, simple in SIMPLICITY_TABLE:
        if f"Request: {_canon(marker)} " in prompt:
            return json.dumps({"simple": simple})
    raise LookupError(f"simplicity prompt not recognized: {prompt[:160]}")


def _brain_quick(prompt: str) -> str:
    if _canon(SIMPLE_DIRECT_TEXT) in prompt:
        return SIMPLE_DIRECT_REPLY
    raise LookupError(f"quick prompt not recognized: {prompt[:160]}")


def _brain_labels(prompt: str) -> str:
    if "last_modified_time" in prompt:
        return json.dumps(CASE_TICKET_LABELS)
    raise LookupError(f"labels prompt not recognized: {prompt[:160]}")


def _brain_screener(prompt: str) -> str:
    if "add me to the" in prompt:
        return json.dumps({"extractable": False, "reason": "no troubleshooting content"})
    return json.dumps({"extractable": True, "reason": "resolved incident with a clear fix"})


def _brain_author(prompt: str) -> str:
    run_match = _DRAFT_RUN_RE.search(prompt)
    if run_match is None:
        raise LookupError(f"author prompt missing run marker: {prompt[:160]}")
    run = int(run_match.group(1))
    for marker, drafts in AUTHOR_DRAFTS.items():
        if _canon(marker) in prompt:
            return json.dumps(drafts[run - 1])
    raise LookupError(f"author prompt not recognized: {prompt[:160]}")


def _brain_editor(prompt: str) -> str:
    start = prompt.find("Draft to check: ")
    end = prompt.find(" Reply with the corrected JSON object only")
    if start < 0 or end < 0:
        raise LookupError(f"editor prompt not recognized: {prompt[:160]}")
    return prompt[start + len("Draft to check: ") : end].strip()


def _split_drafts(prompt: str) -> list[dict]:
    drafts: list[dict] = []
    i = 1
    while True:
        start = prompt.find(f"Draft {i}: ")
        if start < 0:
            break
        start += len(f"Draft {i}: ")
        end = prompt.find(f" Draft {i + 1}: ")
        if end < 0:
            end = prompt.find(" Reply with one JSON object")
        drafts.append(json.loads(prompt[start:end].strip()))
        i += 1
    return drafts


def _brain_reviewer(prompt: str) -> str:
    drafts = _split_drafts(prompt)
    if not drafts:
        raise LookupError(f"reviewer prompt not recognized: {prompt[:160]}")
    groups: list[list[int]] = []
    seen: dict[str, list[int]] = {}
    for idx, draft in enumerate(drafts, start=1):
        label = normalize_label(draft["content"][0]["root_cause"])
        if label not in seen:
            seen[label] = []
            groups.append(seen[label])
        seen[label].append(idx)
    largest = max(groups, key=len)
    return json.dumps({"groups": groups, "representative": largest[0]})


_WORD_RE = re.compile(r"[a-z0-9]+")


def _token_overlap(a: str, b: str) -> float:
    ta, tb = set(_WORD_RE.findall(a.lower())), set(_WORD_RE.findall(b.lower()))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / min(len(ta), len(tb))


def _brain_curator(prompt: str) -> str:
    start = prompt.find("Existing procedure: ")
    mid = prompt.find(" Candidate procedure: ")
    end = prompt.find(" Reply with one JSON object")
    if start < 0 or mid < 0 or end < 0:
        raise LookupError(f"curator prompt not recognized: {prompt[:160]}")
    existing = json.loads(prompt[start + len("Existing procedure: ") : mid].strip())
    candidate = json.loads(prompt[mid + len(" Candidate procedure: ") : end].strip())
    if _token_overlap(existing["problem_desc"], candidate["problem_desc"]) < 0.5:
        return json.dumps({"decision": "distinct", "merged": None})
    known = {normalize_label(b["root_cause"]) for b in candidate["content"]}
    merged_content = list(candidate["content"]) + [
        b for b in existing["content"] if normalize_label(b["root_cause"]) not in known
    ]
    merged = {"problem_desc": candidate["problem_desc"], "content": merged_content}
    return json.dumps({"decision": "merge", "merged": merged})


_BRAINS: dict[str, Callable[[str], str]] = {
    "planner": _brain_planner,
    "filter": _brain_filter,
    "summarizer": _brain_summary,
    "intent": _brain_intent,
    "clarify": _brain_clarify,
    "simplicity": _brain_simplicity,
    "quick": _brain_quick,
    "labels": _brain_labels,
    "screener": _brain_screener,
    "author": _brain_author,
    "editor": _brain_editor,
    "reviewer": _brain_reviewer,
    "curator": _brain_curator,
}


def scripted_reply(request: ChatRequest) -> str:
    from opsassist.llm.fingerprint import canonical_prompt

    prompt = canonical_prompt(request.tag, request.messages)
    brain = _BRAINS.get(request.tag)
    if brain is None:
        raise LookupError(f"no scripted brain for tag {request.tag!r}")
    return brain(prompt)


def scripted_provider() -> ScriptedProvider:
    """Catch-all provider: every reply is computed from the prompt."""
    return ScriptedProvider([Rule(contains="", response=scripted_reply)], provider_id="scripted")


# ------------------------------------------------------------------- drivers


def _assert(cond: bool, msg: str) -> None:
    if not cond:
        raise AssertionError(msg)


def world_bench_cases(runtime: Runtime):
    return load_cases(runtime.data_dir / "bench" / "cases.jsonl")


def _bench_driver(mode: str, case_names: Sequence[str] | None = None):
    def run(runtime: Runtime) -> BenchReport:
        if case_names is None:
            cases = world_bench_cases(runtime)
        else:
            cases = [bench_case(n) for n in case_names]
        report = run_bench(
            runtime, cases, mode, trace_dir=runtime.data_dir / "traces" / mode
        )
        _assert(report.cases == len(cases), f"{mode}: ran {report.cases} of {len(cases)}")
        _assert(report.errors == 0, f"{mode}: {report.errors} errored cases")
        return report

    return run


def drive_ablation(runtime: Runtime) -> dict[str, list]:
    """Same three cases with the hierarchy, flattened, and without procedures."""
    from opsassist.engine.types import EngineOptions
    from opsassist.intents import intent_from_structured_context

    names = ("golden", "oom", "quota")
    out: dict[str, list] = {"hierarchical": [], "flat": [], "no_sop": []}

    def run_arm(arm: str, flat: bool) -> None:
        for name in names:
            case = diag_case(name)
            intent = intent_from_structured_context(case.context(), runtime.config.pipeline)
            options = EngineOptions(
                flat=flat,
                use_filter=True,
                k=runtime.config.retrieval.loop_k,
                max_iterations=runtime.config.engine.max_iterations,
            )
            answer, trace = runtime.engine.run(
                intent, options, budget=runtime.new_budget(), log=CallLog()
            )
            out[arm].append((case, answer, trace))

    run_arm("hierarchical", flat=False)
    run_arm("flat", flat=True)
    runtime.hierarchy.disable_level(Level.SOP)
    try:
        run_arm("no_sop", flat=False)
    finally:
        runtime.hierarchy.enable_level(Level.SOP)
    for arm, rows in out.items():
        for case, answer, trace in rows:
            _assert(
                normalize_label(answer.root_cause or "")
                == normalize_label(case.expected_root_cause),
                f"ablation {arm}/{case.name}: wrong answer {answer.root_cause!r}",
            )
    return out


def _diagnose_driver(name: str):
    def run(runtime: Runtime) -> TurnResult:
        return runtime.pipeline.diagnose(diag_case(name).context())

    return run


def drive_budget(runtime: Runtime) -> TurnResult:
    result = runtime.pipeline.diagnose(diag_case("budget").context())
    _assert("partial" in (result.answer.flags if result.answer else ()), "expected partial answer")
    return result


def drive_chat_refusal(runtime: Runtime) -> TurnResult:
    session = runtime.sessions.create()
    result = runtime.pipeline.handle_chat_turn(session.id, REFUSAL_TEXT)
    _assert(result.kind == "refusal", f"expected refusal, got {result.kind}")
    return result


def drive_chat_session(runtime: Runtime) -> list[TurnResult]:
    """Clarify, answer, then a follow-on request served from session memory."""
    session = runtime.sessions.create()
    turns = [runtime.pipeline.handle_chat_turn(session.id, CHAT_NFE_T1)]
    _assert(turns[0].kind == "followup", f"turn 1: {turns[0].kind}")
    _assert(turns[0].followup_field == "error_log", f"asked {turns[0].followup_field}")
    turns.append(runtime.pipeline.handle_chat_turn(session.id, CHAT_NFE_T2))
    _assert(turns[1].kind == "answer", f"turn 2: {turns[1].kind}")
    turns.append(runtime.pipeline.handle_chat_turn(session.id, CHAT_NFE_T3))
    _assert(turns[2].kind == "answer", f"turn 3: {turns[2].kind}")
    return turns


def drive_chat_console_twin(runtime: Runtime) -> TurnResult:
    result = runtime.pipeline.diagnose(CHAT_NFE_CONTEXT)
    _assert(result.kind == "answer", f"console twin: {result.kind}")
    return result


def drive_chat_quick_case(runtime: Runtime) -> TurnResult:
    session = runtime.sessions.create()
    result = runtime.pipeline.handle_chat_turn(session.id, QUICK_CASE_TEXT)
    _assert(result.citations == ("t-9001",), f"citations {result.citations}")
    return result


def drive_chat_simple_direct(runtime: Runtime) -> TurnResult:
    session = runtime.sessions.create()
    result = runtime.pipeline.handle_chat_turn(session.id, SIMPLE_DIRECT_TEXT)
    _assert(result.text == SIMPLE_DIRECT_REPLY, f"unexpected reply {result.text[:60]}")
    return result


def drive_chat_consult_engine(runtime: Runtime) -> TurnResult:
    session = runtime.sessions.create()
    result = runtime.pipeline.handle_chat_turn(session.id, CONSULT_ENGINE_TEXT)
    _assert(result.kind == "answer", f"consult: {result.kind}")
    return result


def drive_chat_exhausted(runtime: Runtime) -> list[TurnResult]:
    session = runtime.sessions.create()
    turns = [runtime.pipeline.handle_chat_turn(session.id, ETL_VAGUE_T1)]
    for text in ETL_VAGUE_FOLLOWUPS:
        turns.append(runtime.pipeline.handle_chat_turn(session.id, text))
    _assert(
        [t.kind for t in turns] == ["followup", "followup", "followup", "answer"],
        f"kinds {[t.kind for t in turns]}",
    )
    return turns


def drive_chat_intent_malformed(runtime: Runtime) -> TurnResult:
    session = runtime.sessions.create()
    result = runtime.pipeline.handle_chat_turn(session.id, ZZZ_TEXT)
    _assert(result.kind == "answer", f"fail-open turn: {result.kind}")
    return result


def _add_ticket(runtime: Runtime, turns, outcome):
    return runtime.tickets.add(list(turns), outcome=outcome)


def drive_sop_merge_rerun(runtime: Runtime) -> tuple:
    ticket = _add_ticket(runtime, CASE_TICKET_TURNS, CASE_TICKET_OUTCOME)
    first = runtime.extractor.extract_and_integrate(ticket, runtime.new_budget(), CallLog())
    _assert(first.outcome is not None and first.outcome.action == "replace", f"{first.to_dict()}")
    _assert(first.outcome.entry_id == GOLDEN_SOP_ID, f"merged into {first.outcome.entry_id}")
    second = runtime.extractor.extract_and_integrate(ticket, runtime.new_budget(), CallLog())
    _assert(second.outcome is not None and second.outcome.action == "replace", "rerun must merge")
    return first, second


def drive_sop_accept2_rerun(runtime: Runtime) -> tuple:
    ticket = _add_ticket(runtime, ACCEPT2_TICKET_TURNS, ACCEPT2_TICKET_OUTCOME)
    first = runtime.extractor.extract_and_integrate(ticket, runtime.new_budget(), CallLog())
    _assert(first.outcome is not None and first.outcome.action == "add", f"{first.to_dict()}")
    second = runtime.extractor.extract_and_integrate(ticket, runtime.new_budget(), CallLog())
    _assert(
        second.outcome is not None and second.outcome.action == "replace",
        "rerun must merge into the added entry",
    )
    _assert(second.outcome.entry_id == first.outcome.entry_id, "rerun created a duplicate")
    return first, second


def drive_sop_escalate(runtime: Runtime):
    ticket = _add_ticket(runtime, ESCALATE_TICKET_TURNS, ESCALATE_TICKET_OUTCOME)
    report = runtime.extractor.extract_and_integrate(ticket, runtime.new_budget(), CallLog())
    _assert(report.escalated, f"expected escalation: {report.to_dict()}")
    _assert(len(runtime.escalations) == 1, "escalation queue should hold one item")
    return report


def drive_sop_screen_out(runtime: Runtime):
    ticket = _add_ticket(runtime, CHITCHAT_TICKET_TURNS, CHITCHAT_TICKET_OUTCOME)
    report = runtime.extractor.extract_and_integrate(ticket, runtime.new_budget(), CallLog())
    _assert(report.screened_out, f"expected screen-out: {report.to_dict()}")
    return report


def drive_sop_batch(runtime: Runtime) -> dict:
    from opsassist.cli import extract_batch

    result = extract_batch(runtime, runtime.data_dir / "tickets_batch.jsonl")
    counts = result["counts"]
    expected = {
        "tickets": 4,
        "invalid": 1,
        "valid": 3,
        "accepted": 2,
        "merged": 1,
        "added": 1,
        "escalated": 1,
        "errors": 0,
    }
    for key, value in expected.items():
        _assert(counts.get(key) == value, f"batch counts {counts} != {expected}")
    return result


def drive_ticket_labeling(runtime: Runtime):
    from opsassist.tickets.bayes import assign

    ticket = _add_ticket(runtime, CASE_TICKET_TURNS, CASE_TICKET_OUTCOME)
    labels = categorize_ticket(
        runtime.gateway,
        ticket,
        runtime.config.tickets.action_vocabulary,
        runtime.new_budget(),
        CallLog(),
    )
    runtime.tickets.set_labels(ticket.id, labels)
    _assert(labels.final_actions == ("schema_change",), f"actions {labels.final_actions}")
    result = assign(
        runtime.cause_model,
        labels.features(),
        threshold=runtime.config.tickets.assign_threshold,
    )
    runtime.tickets.set_assignment(ticket.id, result)
    _assert(result.cause == "missing_knowledge", f"cause {result.cause}")
    _assert(result.decision == "auto", f"decision {result.decision}")
    return labels, result


# ----------------------------------------------------------------- scenarios


def tight_budget(config: AppConfig) -> AppConfig:
    return dataclasses.replace(
        config, engine=dataclasses.replace(config.engine, max_chat_calls=3)
    )


@dataclass(frozen=True)
class Scenario:
    name: str
    run: Callable[[Runtime], object]
    noise: bool = False
    configure: Callable[[AppConfig], AppConfig] | None = None


SCENARIOS: tuple[Scenario, ...] = (
    Scenario("bench_full", _bench_driver("full")),
    Scenario("bench_rag", _bench_driver("rag")),
    Scenario("bench_cot", _bench_driver("cot")),
    Scenario("bench_vanilla", _bench_driver("vanilla_deepsearch")),
    Scenario("bench_noise_full", _bench_driver("full", ["kafka"]), noise=True),
    Scenario(
        "bench_noise_vanilla", _bench_driver("vanilla_deepsearch", ["kafka"]), noise=True
    ),
    Scenario("ablation", drive_ablation),
    Scenario("web_descend", _diagnose_driver("web_descend")),
    Scenario("model_knowledge", _diagnose_driver("model_knowledge")),
    Scenario("malformed_planner", _diagnose_driver("malformed_planner")),
    Scenario("preempted", _diagnose_driver("preempted")),
    Scenario("budget", drive_budget, configure=tight_budget),
    Scenario("citation_strip", _diagnose_driver("citation_strip")),
    Scenario("incomplete", _diagnose_driver("incomplete")),
    Scenario("chat_refusal", drive_chat_refusal),
    Scenario("chat_session", drive_chat_session),
    Scenario("chat_console_twin", drive_chat_console_twin),
    Scenario("chat_quick_case", drive_chat_quick_case),
    Scenario("chat_simple_direct", drive_chat_simple_direct),
    Scenario("chat_consult_engine", drive_chat_consult_engine),
    Scenario("chat_exhausted", drive_chat_exhausted),
    Scenario("chat_intent_malformed", drive_chat_intent_malformed),
    Scenario("sop_merge_rerun", drive_sop_merge_rerun),
    Scenario("sop_accept2_rerun", drive_sop_accept2_rerun),
    Scenario("sop_escalate", drive_sop_escalate),
    Scenario("sop_screen_out", drive_sop_screen_out),
    Scenario("sop_batch", drive_sop_batch),
    Scenario("ticket_labeling", drive_ticket_labeling),
)


def scenario(name: str) -> Scenario:
    for sc in SCENARIOS:
        if sc.name == name:
            return sc
    raise KeyError(name)


def scenario_config(data_dir: str | Path, configure=None) -> AppConfig:
    config = AppConfig(data_dir=str(data_dir))
    if configure is not None:
        config = configure(config)
    return config


def fresh_world(template: str | Path, dest: str | Path, transcript: str | Path | None = None) -> Path:
    """Copy a world template; optionally drop a transcript into it."""
    dest = Path(dest)
    shutil.copytree(template, dest)
    if transcript is not None:
        target = dest / "transcripts"
        target.mkdir(exist_ok=True)
        shutil.copy(transcript, target / "scripted.jsonl")
    return dest


def replay_runtime(
    template: str | Path,
    transcript: str | Path,
    dest: str | Path,
    configure=None,
) -> Runtime:
    world = fresh_world(template, dest, transcript)
    return build_runtime(scenario_config(world, configure))


def record_transcripts(
    main_template: str | Path,
    noise_template: str | Path,
    out_path: str | Path,
    work_dir: str | Path,
) -> int:
    """Run every scenario against the scripted provider; write one transcript."""
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    recorder = RecordingProvider(scripted_provider(), provider_id="default")
    for sc in SCENARIOS:
        template = noise_template if sc.noise else main_template
        world = fresh_world(template, work_dir / f"rec-{sc.name}")
        runtime = build_runtime(
            scenario_config(world, sc.configure), providers={"default": recorder}
        )
        sc.run(runtime)
    return recorder.write(out_path)
