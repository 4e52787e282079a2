"""HTTP workbench: the peer network behind a small JSON API.

One service process hosts every peer of one process spec.  Humans (or the
bundled UI) act through it: initiate cases, read their own replica, develop
buds, commit, acknowledge deliveries.  Responses scoped to an actor only ever
contain labels that actor is accredited to read (plus its structuring
grants).  All mutations are persisted as append-only command logs, one JSON
lines file per case; restarting the service replays them.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import re
import threading
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import CaseRuntime, Peer, RouteMode
from .errors import (
    ArborflowError,
    EmptyGuidesError,
    GuideChoiceRequiredError,
    GuideMismatchError,
    NoReplicaError,
    NotAccreditedError,
    StaleReplicaError,
    UnknownActorError,
    UnknownCaseError,
)
from .expansion import GuidePolicy
from .model import Artifact, ProcessSpec
from .projection import project_artifact_rooted
from .serialize import (
    FormatError,
    artifact_to_dict,
    production_from_dict,
    production_to_dict,
    spec_to_dict,
)

log = logging.getLogger(__name__)

STATE_DIR_ENV = "ARBORFLOW_STATE_DIR"

_STATUS_BY_ERROR = {
    NotAccreditedError: 403,
    UnknownActorError: 404,
    UnknownCaseError: 404,
    GuideChoiceRequiredError: 409,
    StaleReplicaError: 409,
    NoReplicaError: 409,
    EmptyGuidesError: 409,
    GuideMismatchError: 409,
}


def _status_for(exc: ArborflowError) -> int:
    for klass, status in _STATUS_BY_ERROR.items():
        if isinstance(exc, klass):
            return status
    return 400


class CreateCaseRequest(BaseModel):
    actor: Optional[str] = None


class DevelopRequest(BaseModel):
    actor: str
    addr: list[int]
    production: dict
    payload: Optional[str] = None


class CommitRequest(BaseModel):
    actor: str
    guidePolicy: str = Field(default=GuidePolicy.EXTERNAL.value)
    seed: Optional[int] = None
    guideIndex: Optional[int] = None


class ActorRequest(BaseModel):
    actor: str


class CommandLog:
    """Append-only JSON-lines persistence, one file per case."""

    _SUFFIX = re.compile(r"(\d+)")

    def __init__(self, state_dir: Path) -> None:
        self.state_dir = state_dir
        state_dir.mkdir(parents=True, exist_ok=True)

    def append(self, case_id: str, record: dict) -> None:
        path = self.state_dir / f"{case_id}.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def replay(self, runtime: CaseRuntime) -> int:
        """Re-execute every persisted command; returns the number applied."""

        def file_key(p: Path):
            m = self._SUFFIX.search(p.stem)
            return (p.stem if m is None else p.stem[: m.start()], int(m.group(1)) if m else 0)

        applied = 0
        for path in sorted(self.state_dir.glob("*.jsonl"), key=file_key):
            with path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    self._apply(runtime, json.loads(line))
                    applied += 1
        return applied

    @staticmethod
    def _apply(runtime: CaseRuntime, record: dict) -> None:
        op = record["op"]
        case_id = record["caseId"]
        if op == "initiate":
            runtime.initiate(case_id)
        elif op == "develop":
            payload = record.get("payload")
            runtime.develop(
                record["actor"],
                case_id,
                tuple(record["addr"]),
                production_from_dict(record["production"]),
                base64.b64decode(payload) if payload else None,
            )
        elif op == "commit":
            runtime.commit(
                record["actor"],
                case_id,
                GuidePolicy(record["guidePolicy"]),
                seed=record.get("seed"),
                guide_index=record.get("guideIndex"),
            )
        elif op == "discard":
            runtime.discard(record["actor"], case_id)
        elif op == "ack":
            runtime.acknowledge(record["actor"], case_id)
        else:
            raise FormatError(f"unknown persisted command {op!r}")


def _actor_case_summary(peer: Peer, case_id: str) -> dict:
    case = peer.cases.get(case_id)
    if case is None:
        return {"hasReplica": False, "edited": False, "needsAck": False, "readyCount": 0}
    ready = len(peer.list_ready_tasks(case_id)) if case.replica is not None else 0
    return {
        "hasReplica": case.replica is not None,
        "edited": case.edited,
        "needsAck": case.needs_ack,
        "readyCount": ready,
    }


def _projected_final(peer: Peer, final: Optional[Artifact]) -> Optional[dict]:
    if final is None:
        return None
    projected = project_artifact_rooted(final, peer.view, peer.local.context())
    return artifact_to_dict(projected)


def create_app(
    spec: ProcessSpec,
    state_dir: Optional[os.PathLike] = None,
    static_dir: Optional[os.PathLike] = None,
) -> FastAPI:
    """Build the workbench application for one process spec."""
    runtime = CaseRuntime(spec)
    command_log: Optional[CommandLog] = None
    if state_dir is None and os.environ.get(STATE_DIR_ENV):
        state_dir = os.environ[STATE_DIR_ENV]
    if state_dir is not None:
        command_log = CommandLog(Path(state_dir))
        applied = command_log.replay(runtime)
        if applied:
            log.info("replayed %d persisted commands from %s", applied, state_dir)

    app = FastAPI(title="arborflow workbench", version="0.1.0")
    lock = threading.RLock()

    def persist(case_id: str, record: dict) -> None:
        if command_log is not None:
            command_log.append(case_id, record)

    @app.exception_handler(ArborflowError)
    async def on_domain_error(request: Request, exc: ArborflowError):
        return JSONResponse(status_code=_status_for(exc), content=exc.payload())

    @app.exception_handler(FormatError)
    async def on_format_error(request: Request, exc: FormatError):
        return JSONResponse(
            status_code=400, content={"error": "bad-format", "message": str(exc)}
        )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"error": "bad-request", "message": str(exc)}
        )

    @app.get("/api/spec")
    def get_spec(actor: Optional[str] = Query(default=None)) -> dict:
        with lock:
            if actor is None:
                doc = spec_to_dict(runtime.spec)
                doc["distinguishedAxiom"] = runtime.spec.grammar.axioms[0]
                return doc
            peer = runtime.peer(actor)
            local = peer.local.grammar
            return {
                "actor": actor,
                "actors": list(runtime.spec.actors),
                "initiator": runtime.spec.initiator,
                "grammar": {
                    "sorts": [{"name": s.name} for s in local.sorts],
                    "axioms": list(local.axioms),
                    "productions": [production_to_dict(p) for p in local.productions],
                },
                "write": sorted(peer.writable),
                "read": sorted(peer.readable),
            }

    @app.get("/api/cases")
    def list_cases(actor: Optional[str] = Query(default=None)) -> list[dict]:
        with lock:
            peer = runtime.peer(actor) if actor is not None else None
            rows = []
            for case_id in runtime.case_ids():
                row: dict[str, Any] = {
                    "id": case_id,
                    "status": runtime.status.get(case_id, "active"),
                }
                if peer is not None:
                    row.update(_actor_case_summary(peer, case_id))
                rows.append(row)
            return rows

    @app.post("/api/cases", status_code=201)
    def create_case(body: Optional[CreateCaseRequest] = None) -> dict:
        with lock:
            actor = body.actor if body is not None and body.actor else runtime.spec.initiator
            if actor != runtime.spec.initiator:
                raise NotAccreditedError(
                    f"only the initiator ({runtime.spec.initiator!r}) may initiate a case"
                )
            case_id = runtime.initiate()
            persist(case_id, {"op": "initiate", "caseId": case_id})
            return {"caseId": case_id, "status": runtime.status[case_id]}

    @app.get("/api/cases/{case_id}")
    def get_case(case_id: str, actor: str = Query(...)) -> dict:
        with lock:
            peer = runtime.peer(actor)
            if case_id not in runtime.status:
                raise UnknownCaseError(f"no case {case_id!r}")
            case = peer.cases.get(case_id)
            status = runtime.status.get(case_id, "active")
            doc: dict[str, Any] = {
                "id": case_id,
                "status": status,
                "actor": actor,
                "replica": None,
                "readyTasks": [],
                "log": [],
                "needsAck": False,
                "edited": False,
            }
            if case is not None:
                doc["needsAck"] = case.needs_ack
                doc["edited"] = case.edited
                doc["log"] = list(case.log)
                if case.replica is not None:
                    doc["replica"] = artifact_to_dict(case.replica)
                    doc["readyTasks"] = [
                        t.to_dict() for t in peer.list_ready_tasks(case_id)
                    ]
            if status == "terminated":
                doc["final"] = _projected_final(peer, runtime.final.get(case_id))
            return doc

    @app.post("/api/cases/{case_id}/develop")
    def develop(case_id: str, body: DevelopRequest) -> dict:
        with lock:
            peer = runtime.peer(body.actor)
            production = production_from_dict(body.production)
            try:
                payload = base64.b64decode(body.payload, validate=True) if body.payload else None
            except Exception:
                raise FormatError("'payload' must be base64") from None
            replica = peer.develop_bud(case_id, tuple(body.addr), production, payload)
            persist(
                case_id,
                {
                    "op": "develop",
                    "caseId": case_id,
                    "actor": body.actor,
                    "addr": list(body.addr),
                    "production": production_to_dict(production),
                    **({"payload": body.payload} if body.payload else {}),
                },
            )
            return {
                "replica": artifact_to_dict(replica),
                "readyTasks": [t.to_dict() for t in peer.list_ready_tasks(case_id)],
            }

    @app.post("/api/cases/{case_id}/commit")
    def commit(case_id: str, body: CommitRequest) -> dict:
        with lock:
            try:
                policy = GuidePolicy(body.guidePolicy)
            except ValueError:
                raise FormatError(f"unknown guide policy {body.guidePolicy!r}") from None
            peer = runtime.peer(body.actor)
            _, decision = runtime.commit(
                body.actor,
                case_id,
                policy,
                seed=body.seed,
                guide_index=body.guideIndex,
            )
            persist(
                case_id,
                {
                    "op": "commit",
                    "caseId": case_id,
                    "actor": body.actor,
                    "guidePolicy": policy.value,
                    "seed": body.seed,
                    "guideIndex": body.guideIndex,
                },
            )
            case = peer.cases.get(case_id)
            replica = case.replica if case is not None else None
            doc = {
                "mode": decision.mode.value,
                "destinations": sorted(decision.destinations),
                "status": runtime.status.get(case_id, "active"),
                "replica": artifact_to_dict(replica) if replica is not None else None,
            }
            if decision.mode is RouteMode.TERMINATE:
                doc["final"] = _projected_final(peer, runtime.final.get(case_id))
            return doc

    @app.post("/api/cases/{case_id}/route-ack")
    def route_ack(case_id: str, body: ActorRequest) -> dict:
        with lock:
            case = runtime.acknowledge(body.actor, case_id)
            persist(
                case_id, {"op": "ack", "caseId": case_id, "actor": body.actor}
            )
            return {"id": case_id, "needsAck": case.needs_ack}

    @app.post("/api/cases/{case_id}/discard")
    def discard(case_id: str, body: ActorRequest) -> dict:
        with lock:
            peer = runtime.peer(body.actor)
            case = runtime.discard(body.actor, case_id)
            persist(
                case_id, {"op": "discard", "caseId": case_id, "actor": body.actor}
            )
            return {
                "replica": artifact_to_dict(case.replica),
                "readyTasks": [t.to_dict() for t in peer.list_ready_tasks(case_id)],
            }

    @app.get("/api/cases/{case_id}/trace")
    def trace(case_id: str) -> dict:
        with lock:
            if case_id not in runtime.status:
                raise UnknownCaseError(f"no case {case_id!r}")
            final = runtime.final.get(case_id)
            return {
                "id": case_id,
                "status": runtime.status[case_id],
                "events": [e for e in runtime.trace if e.get("caseId") == case_id],
                "final": artifact_to_dict(final) if final is not None else None,
            }

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    app.state.runtime = runtime
    return app
