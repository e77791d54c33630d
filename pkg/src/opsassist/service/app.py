"""HTTP boundary for the assistant.

Routes are thin: they validate payloads, delegate to the runtime, and store
one trace per completed request. Mutating endpoints accept a client-supplied
``request_key``; replaying a key returns the stored response without
repeating the mutation.
"""

from __future__ import annotations

import dataclasses
import json
import threading
from pathlib import Path
from typing import Any

from fastapi import Depends, FastAPI, Header, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from opsassist.errors import OpsAssistError, UnknownSession, ValidationFailed
from opsassist.intents import intent_from_structured_context
from opsassist.kb import Level, Provenance, sop_from_dict
from opsassist.llm import CallLog
from opsassist.runtime import Runtime
from opsassist.service.traces import TraceStore
from opsassist.tickets import assign, categorize_ticket

_ERROR_STATUS = {
    "unknown_session": 404,
    "unknown_ticket": 404,
    "unknown_trace": 404,
    "unknown_replace_target": 404,
    "validation_failed": 422,
    "schema_violation": 422,
    "empty_training_set": 422,
    "budget_exceeded": 429,
    "provider_unavailable": 503,
    "replay_miss": 503,
    "transport_timeout": 503,
    "malformed_output": 502,
    "level4_requested": 400,
}

_LEVEL_NAMES = {"SOP": Level.SOP, "INTERNAL": Level.INTERNAL, "WEB": Level.WEB}


def _error_body(code: str, message: str, detail: Any = None) -> dict:
    return {"code": code, "message": message, "detail": detail}


class IdempotencyLedger:
    """Replays stored responses for repeated client request keys."""

    def __init__(self, path: Path):
        self._path = path
        self._lock = threading.Lock()
        self._table: dict[str, tuple[int, dict]] = {}
        if path.exists():
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    row = json.loads(line)
                    self._table[row["key"]] = (int(row["status"]), row["body"])

    def get(self, key: str) -> tuple[int, dict] | None:
        with self._lock:
            return self._table.get(key)

    def put(self, key: str, status: int, body: dict) -> None:
        with self._lock:
            self._table[key] = (status, body)
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"key": key, "status": status, "body": body}, ensure_ascii=False))
                fh.write("\n")


# ------------------------------------------------------------- request bodies


class MessageBody(BaseModel):
    text: str
    request_key: str | None = None


class DiagnoseBody(BaseModel):
    request_type: str = "troubleshooting"
    text: str = ""
    fields: dict[str, str] = Field(default_factory=dict)
    keywords: list[str] = Field(default_factory=list)
    request_key: str | None = None


class TicketBody(BaseModel):
    turns: list[dict[str, str]]
    outcome: str = ""
    request_key: str | None = None


class ActionBody(BaseModel):
    request_key: str | None = None


class UpsertBody(BaseModel):
    level: int
    base_id: str | None = None
    sop: dict | None = None
    key: str | None = None
    value: str | None = None
    replace_id: str | None = None
    provenance: list[dict[str, str]] = Field(default_factory=list)
    request_key: str | None = None


def create_app(runtime: Runtime) -> FastAPI:
    app = FastAPI(title="opsassist", docs_url=None, redoc_url=None)
    traces = TraceStore(runtime.data_dir / "traces")
    ledger = IdempotencyLedger(runtime.data_dir / "idempotency.jsonl")
    session_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()
    config = runtime.config

    def session_lock(session_id: str) -> threading.Lock:
        with locks_guard:
            return session_locks.setdefault(session_id, threading.Lock())

    # ------------------------------------------------------------ plumbing

    async def require_token(authorization: str | None = Header(default=None)) -> None:
        token = config.service.bearer_token
        if not token:
            return
        if authorization != f"Bearer {token}":
            raise _Unauthorized()

    class _Unauthorized(Exception):
        pass

    @app.exception_handler(_Unauthorized)
    async def _unauthorized_handler(request: Request, exc: _Unauthorized):
        return JSONResponse(
            status_code=401,
            content=_error_body("unauthorized", "missing or invalid bearer token"),
        )

    @app.exception_handler(OpsAssistError)
    async def _ops_error_handler(request: Request, exc: OpsAssistError):
        detail = getattr(exc, "problems", None)
        detail = list(detail) if detail else None
        return JSONResponse(
            status_code=_ERROR_STATUS.get(exc.code, 500),
            content=_error_body(exc.code, str(exc), detail),
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        problems = [
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        ]
        return JSONResponse(
            status_code=422,
            content=_error_body("schema_violation", "request body is invalid", problems),
        )

    @app.exception_handler(ValueError)
    async def _value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=422,
            content=_error_body("validation_failed", str(exc), None),
        )

    @app.exception_handler(Exception)
    async def _fallback_handler(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500,
            content=_error_body("internal_error", "unexpected server error", None),
        )

    def idempotent(key: str | None, op: str, run) -> JSONResponse:
        """Run `run()` once per (op, key); replays return the stored body."""
        if key:
            stored = ledger.get(f"{op}:{key}")
            if stored is not None:
                status, body = stored
                return JSONResponse(status_code=status, content=body)
        body, status = run()
        if key:
            ledger.put(f"{op}:{key}", status, body)
        return JSONResponse(status_code=status, content=body)

    def categorize_now(ticket_id: str) -> None:
        ticket = runtime.tickets.get(ticket_id)
        try:
            labels = categorize_ticket(
                runtime.gateway,
                ticket,
                config.tickets.action_vocabulary,
                runtime.new_budget(),
                CallLog(),
            )
            runtime.tickets.set_labels(ticket_id, labels)
        except Exception:
            runtime.tickets.set_status(ticket_id, "manual")

    # ------------------------------------------------------------- endpoints

    @app.get("/v1/health")
    async def health():
        return {"status": "ok"}

    @app.post("/v1/sessions", dependencies=[Depends(require_token)])
    async def create_session():
        session = runtime.sessions.create()
        return {"session_id": session.id, "channel": "chat"}

    @app.get("/v1/sessions/{session_id}/messages", dependencies=[Depends(require_token)])
    async def list_messages(session_id: str):
        session = runtime.sessions.get(session_id)
        return {"session_id": session.id, "turns": list(session.turns)}

    @app.post("/v1/sessions/{session_id}/messages", dependencies=[Depends(require_token)])
    async def post_message(session_id: str, body: MessageBody):
        session = runtime.sessions.get(session_id)

        def run() -> tuple[dict, int]:
            with session_lock(session_id):
                try:
                    result = runtime.pipeline.handle_chat_turn(session_id, body.text)
                except UnknownSession:
                    raise
                except OpsAssistError as exc:
                    # the turn still completes: safe text, error-tagged trace
                    envelope = {
                        "channel": "chat",
                        "stages": [{"stage": "error", "code": exc.code, "message": str(exc)}],
                        "routing": None,
                        "engine": None,
                        "answer": None,
                        "reply": config.pipeline.safe_response,
                        "flags": ["error"],
                    }
                    trace_id = traces.put(envelope)
                    session.turns.append({"role": "user", "text": body.text})
                    session.turns.append(
                        {
                            "role": "assistant",
                            "text": config.pipeline.safe_response,
                            "kind": "answer",
                            "error": exc.code,
                            "trace_id": trace_id,
                        }
                    )
                    payload = {
                        "session_id": session_id,
                        "kind": "answer",
                        "text": config.pipeline.safe_response,
                        "citations": [],
                        "followup_field": None,
                        "trace_id": trace_id,
                        "error": _error_body(exc.code, str(exc)),
                    }
                    return payload, 200
                trace_id = traces.put(result.envelope("chat"))
                if session.turns:
                    session.turns[-1]["trace_id"] = trace_id
                payload = {
                    "session_id": session_id,
                    "kind": result.kind,
                    "text": result.text,
                    "citations": list(result.citations),
                    "followup_field": result.followup_field,
                    "trace_id": trace_id,
                    "error": None,
                }
                return payload, 200

        return idempotent(body.request_key, f"msg:{session_id}", run)

    @app.post("/v1/diagnose", dependencies=[Depends(require_token)])
    async def diagnose(body: DiagnoseBody):
        context = {
            "request_type": body.request_type,
            "text": body.text,
            "fields": body.fields,
            "keywords": body.keywords,
        }
        # the console contract rejects incomplete context instead of clarifying
        intent = intent_from_structured_context(context, config.pipeline)
        if intent.missing_fields:
            raise ValidationFailed(
                [f"missing required field: {name}" for name in intent.missing_fields]
            )

        def run() -> tuple[dict, int]:
            result = runtime.pipeline.diagnose(context)
            trace_id = traces.put(result.envelope("console"))
            payload = {
                "kind": result.kind,
                "reply": result.text,
                "answer": result.answer.to_dict() if result.answer else None,
                "citations": list(result.citations),
                "trace_id": trace_id,
            }
            return payload, 200

        return idempotent(body.request_key, "diagnose", run)

    @app.get("/v1/traces/{trace_id}", dependencies=[Depends(require_token)])
    async def get_trace(trace_id: str):
        data = traces.get_bytes(trace_id)
        return Response(content=data, media_type="application/json")

    @app.post("/v1/tickets", dependencies=[Depends(require_token)])
    async def ingest_ticket(body: TicketBody):
        turns = [(t.get("role", "user"), t.get("text", "")) for t in body.turns]
        if not turns:
            raise ValidationFailed(["ticket needs at least one turn"])

        def run() -> tuple[dict, int]:
            ticket = runtime.tickets.add(turns, outcome=body.outcome)
            if config.service.categorize_async:
                worker = threading.Thread(
                    target=categorize_now, args=(ticket.id,), daemon=True
                )
                worker.start()
            else:
                categorize_now(ticket.id)
            current = runtime.tickets.get(ticket.id)
            return {"ticket_id": ticket.id, "status": current.status}, 201

        return idempotent(body.request_key, "ticket", run)

    @app.get("/v1/tickets/{ticket_id}", dependencies=[Depends(require_token)])
    async def get_ticket(ticket_id: str):
        ticket = runtime.tickets.get(ticket_id)
        labels = runtime.tickets.labels(ticket_id)
        return {
            "ticket": ticket.to_dict(),
            "labels": labels.to_dict() if labels else None,
            "assignment": runtime.tickets.assignment(ticket_id),
        }

    @app.post("/v1/tickets/{ticket_id}/assign", dependencies=[Depends(require_token)])
    async def assign_ticket(ticket_id: str, body: ActionBody):
        if runtime.cause_model is None:
            raise ValidationFailed(["no cause model fitted; run fit-cause-model first"])
        labels = runtime.tickets.labels(ticket_id)
        if labels is None:
            categorize_now(ticket_id)
            labels = runtime.tickets.labels(ticket_id)
        if labels is None:
            raise ValidationFailed([f"ticket {ticket_id} could not be labeled"])

        def run() -> tuple[dict, int]:
            result = assign(
                runtime.cause_model,
                labels.features(),
                threshold=config.tickets.assign_threshold,
            )
            runtime.tickets.set_assignment(ticket_id, result)
            return {"ticket_id": ticket_id, "assignment": result.to_dict()}, 200

        return idempotent(body.request_key, f"assign:{ticket_id}", run)

    @app.post("/v1/tickets/{ticket_id}/extract", dependencies=[Depends(require_token)])
    async def trigger_extraction(ticket_id: str, body: ActionBody):
        ticket = runtime.tickets.get(ticket_id)

        def run() -> tuple[dict, int]:
            report = runtime.extractor.extract_and_integrate(
                ticket, runtime.new_budget(), CallLog()
            )
            return {"ticket_id": ticket_id, "report": report.to_dict()}, 200

        return idempotent(body.request_key, f"extract:{ticket_id}", run)

    # ------------------------------------------------------------- kb admin

    def _parse_level(raw: str) -> Level:
        name = raw.strip().upper()
        if name in _LEVEL_NAMES:
            return _LEVEL_NAMES[name]
        try:
            return Level(int(name))
        except (ValueError, KeyError):
            raise ValidationFailed([f"unknown level {raw!r}"])

    def _admin_stores():
        return [runtime.sop_store, *runtime.internal_stores]

    @app.get("/v1/kb/levels", dependencies=[Depends(require_token)])
    async def list_levels():
        rows = []
        for level, description in runtime.hierarchy.describe_levels():
            rows.append(
                {
                    "level": level,
                    "description": description,
                    "disabled": runtime.hierarchy.is_disabled(Level(level)),
                }
            )
        for level in (Level.SOP, Level.INTERNAL, Level.WEB):
            if runtime.hierarchy.is_disabled(level) and int(level) not in [r["level"] for r in rows]:
                rows.append({"level": int(level), "description": "", "disabled": True})
        rows.sort(key=lambda r: r["level"])
        return {"levels": rows}

    @app.post("/v1/kb/levels/{level}/disable", dependencies=[Depends(require_token)])
    async def disable_level(level: str, body: ActionBody):
        parsed = _parse_level(level)

        def run() -> tuple[dict, int]:
            runtime.hierarchy.disable_level(parsed)
            return {"level": int(parsed), "disabled": True}, 200

        return idempotent(body.request_key, f"disable:{int(parsed)}", run)

    @app.post("/v1/kb/levels/{level}/enable", dependencies=[Depends(require_token)])
    async def enable_level(level: str, body: ActionBody):
        parsed = _parse_level(level)

        def run() -> tuple[dict, int]:
            runtime.hierarchy.enable_level(parsed)
            return {"level": int(parsed), "disabled": False}, 200

        return idempotent(body.request_key, f"enable:{int(parsed)}", run)

    @app.get("/v1/kb/entries", dependencies=[Depends(require_token)])
    async def list_entries(level: int | None = None, base_id: str | None = None):
        rows = []
        for store in _admin_stores():
            if level is not None and int(store.level) != level:
                continue
            if base_id is not None and store.base_id != base_id:
                continue
            rows.extend(entry.to_dict() for entry in store.entries())
        return {"entries": rows}

    @app.get("/v1/kb/entries/{entry_id}", dependencies=[Depends(require_token)])
    async def get_entry(entry_id: str):
        for store in _admin_stores():
            entry = store.get(entry_id)
            if entry is not None:
                return {"entry": entry.to_dict()}
        raise ValidationFailed([f"no entry {entry_id!r}"])

    @app.post("/v1/kb/entries", dependencies=[Depends(require_token)])
    async def upsert_entry(body: UpsertBody):
        provenance = [
            Provenance(kind=p.get("kind", "manual"), ref=p.get("ref", "")) for p in body.provenance
        ]

        def run() -> tuple[dict, int]:
            if body.level == int(Level.SOP):
                if body.sop is None:
                    raise ValidationFailed(["level-1 upsert needs a 'sop' object"])
                record = sop_from_dict(body.sop)
                if provenance:
                    record = dataclasses.replace(record, provenance=tuple(provenance))
                entry = runtime.sop_store.upsert_sop(record, replace_id=body.replace_id)
                return {"entry": entry.to_dict()}, 201
            if body.level == int(Level.INTERNAL):
                if not body.key or body.value is None:
                    raise ValidationFailed(["level-2 upsert needs 'key' and 'value'"])
                stores = [
                    s
                    for s in runtime.internal_stores
                    if body.base_id is None or s.base_id == body.base_id
                ]
                if not stores:
                    raise ValidationFailed(
                        [f"no internal store {body.base_id!r}" if body.base_id else "no internal stores configured"]
                    )
                store = stores[0]
                if body.replace_id:
                    entry = store.replace_entry(body.replace_id, body.key, body.value, provenance)
                else:
                    entry = store.add_entry(body.key, body.value, provenance)
                return {"entry": entry.to_dict()}, 201
            raise ValidationFailed([f"entries live at level 1 or 2, not {body.level}"])

        return idempotent(body.request_key, "upsert", run)

    # ------------------------------------------------------------- frontend

    frontend = Path(config.service.frontend_dir)
    if frontend.is_dir() and (frontend / "index.html").exists():
        app.mount("/", StaticFiles(directory=str(frontend), html=True), name="ui")

    return app
