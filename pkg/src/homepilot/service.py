"""HTTP service for the review console and automation clients.

Sessions run the pipeline in background threads and stream stage progress over
server-sent events (plain GET polling works too). All simulator and memory
mutations are serialized through one lock; the console is a thin client, so
every state change it can make maps to exactly one endpoint here.
"""

from __future__ import annotations

import asyncio
import json
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .config import AppConfig, build_agent
from .domain import (
    ProposalStatus,
    TaskProposal,
    WrongStatus,
    proposal_to_json,
)
from .pipeline import (
    AddSubtask,
    Agent,
    Approve,
    InvalidIndex,
    Reject,
    RemoveSubtask,
    SchemaViolationError,
    SetParameter,
)
from .simulator import UnknownAttribute, UnknownDevice

TERMINAL = {"approved", "rejected", "failed"}


@dataclass
class SessionRecord:
    session_id: str
    instruction: str
    proposal: TaskProposal | None = None
    events: list[dict] = field(default_factory=list)
    status: str = "running"
    answers: list = field(default_factory=list)
    escalation: list = field(default_factory=list)

    def push(self, stage: str, status: str, detail: str = ""):
        self.events.append({"seq": len(self.events), "stage": stage, "status": status, "detail": detail})

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "instruction": self.instruction,
            "status": self.status,
            "events": list(self.events),
            "proposal": json.loads(proposal_to_json(self.proposal)) if self.proposal else None,
            "answers": [list(a) for a in self.answers],
            "escalation": [r.to_json() for r in self.escalation],
        }


class InstructionIn(BaseModel):
    text: str


class FeedbackIn(BaseModel):
    action: str
    text: str | None = None
    index: int | None = None
    subtask_index: int | None = None
    slot: str | None = None
    value: object = None


class EventIn(BaseModel):
    device: str
    attribute: str
    value: object


class AvailabilityIn(BaseModel):
    available: bool


def create_app(agent: Agent | None = None, config: AppConfig | None = None) -> FastAPI:
    provider_error: str | None = None
    if agent is None:
        try:
            agent = build_agent(config or AppConfig())
        except ValueError as exc:
            # Boot anyway so clients get a clear 503 instead of no service.
            provider_error = str(exc)
            agent = build_agent(AppConfig())
    app = FastAPI(title="homepilot")
    sessions: dict[str, SessionRecord] = {}
    lock = threading.Lock()  # serializes home/memory mutations
    app.state.agent = agent
    app.state.sessions = sessions

    def run_session(record: SessionRecord):
        try:
            result = agent.run_instruction(record.instruction, progress=record.push)
            with lock:
                record.proposal = result.proposal
                record.escalation = result.escalation_records
                if result.proposal.status is ProposalStatus.FAILED:
                    record.status = "failed"
                    record.push("pipeline", "failed", "; ".join(result.proposal.notices))
                else:
                    record.status = "awaiting_review"
                    record.push("review", "awaiting_review")
        except Exception as exc:  # defensive: a session must always terminate
            with lock:
                record.status = "failed"
                record.push("pipeline", "failed", str(exc))

    @app.post("/instructions", status_code=202)
    def post_instruction(body: InstructionIn):
        if provider_error:
            raise HTTPException(
                status_code=503, detail=f"provider unconfigured: {provider_error}"
            )
        if not body.text.strip():
            raise HTTPException(status_code=400, detail="instruction text is empty")
        record = SessionRecord(session_id=uuid.uuid4().hex[:12], instruction=body.text)
        sessions[record.session_id] = record
        record.push("pipeline", "accepted")
        threading.Thread(target=run_session, args=(record,), daemon=True).start()
        return {"session_id": record.session_id}

    def _get(session_id: str) -> SessionRecord:
        record = sessions.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return record

    @app.get("/sessions")
    def list_sessions():
        return [
            {"session_id": r.session_id, "instruction": r.instruction, "status": r.status}
            for r in sessions.values()
        ]

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _get(session_id).snapshot()

    @app.get("/sessions/{session_id}/events")
    async def stream_events(session_id: str):
        record = _get(session_id)

        async def generator():
            sent = 0
            while True:
                while sent < len(record.events):
                    event = record.events[sent]
                    sent += 1
                    yield f"data: {json.dumps(event)}\n\n"
                if record.status in TERMINAL or record.status == "awaiting_review":
                    if sent >= len(record.events):
                        yield f"data: {json.dumps({'stage': 'stream', 'status': 'done'})}\n\n"
                        return
                await asyncio.sleep(0.02)

        return StreamingResponse(generator(), media_type="text/event-stream")

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: FeedbackIn):
        record = _get(session_id)
        if record.proposal is None:
            raise HTTPException(status_code=409, detail="session still drafting")
        try:
            action = body.action
            with lock:
                if action == "approve":
                    approved, answers = agent.approve(
                        record.proposal, replay_token=f"approve:{record.session_id}"
                    )
                    record.proposal = approved
                    record.answers = answers
                    record.status = "approved"
                    record.push("review", "approved")
                elif action == "reject":
                    record.proposal = agent.apply_feedback(record.proposal, Reject())
                    record.status = "rejected"
                    record.push("review", "rejected")
                elif action == "add_subtask":
                    if not body.text:
                        raise HTTPException(status_code=400, detail="add_subtask needs text")
                    record.proposal = agent.apply_feedback(record.proposal, AddSubtask(body.text))
                    record.push("review", "edited", f"added {body.text!r}")
                elif action == "remove_subtask":
                    if body.index is None:
                        raise HTTPException(status_code=400, detail="remove_subtask needs index")
                    record.proposal = agent.apply_feedback(
                        record.proposal, RemoveSubtask(body.index)
                    )
                    record.push("review", "edited", f"removed subtask {body.index}")
                elif action == "set_parameter":
                    if body.subtask_index is None or body.slot is None:
                        raise HTTPException(
                            status_code=400, detail="set_parameter needs subtask_index and slot"
                        )
                    record.proposal = agent.apply_feedback(
                        record.proposal,
                        SetParameter(body.subtask_index, body.slot, body.value),
                    )
                    record.push("review", "edited", f"set {body.slot}={body.value!r}")
                else:
                    raise HTTPException(status_code=400, detail=f"unknown action {action!r}")
        except WrongStatus as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except (SchemaViolationError, InvalidIndex) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return record.snapshot()

    @app.get("/schemas")
    def get_schemas():
        return {
            name: {
                "commands": [
                    {
                        "name": spec.name,
                        "args": [
                            {
                                "name": a.name,
                                "kind": a.kind,
                                "enum": list(a.enum) if a.enum else None,
                                "min": a.minimum,
                                "max": a.maximum,
                            }
                            for a in spec.args
                        ],
                    }
                    for spec in schema.commands
                ],
                "attributes": [
                    {
                        "name": a.name,
                        "kind": a.kind,
                        "enum": list(a.enum) if a.enum else None,
                        "min": a.minimum,
                        "max": a.maximum,
                    }
                    for a in schema.attributes
                ],
            }
            for name, schema in agent.corpus.schemas.items()
        }

    @app.get("/memory")
    def get_memory():
        return agent.memory.export_graph()

    @app.get("/preferences")
    def get_preferences():
        agent.prefs.refresh(agent.log_store, mode=agent.extraction_mode)
        return {
            "tables": [t.to_json() for t in agent.prefs.tables().values()],
            "effects": agent.prefs.effect_map.to_json(),
        }

    @app.get("/home")
    def get_home():
        return agent.home.to_json()

    @app.get("/home/rules")
    def get_rules():
        return agent.home.to_json()["rules"]

    @app.get("/home/log")
    def get_log(limit: int = 50):
        return [r.to_json() for r in agent.home.event_log[-limit:]]

    @app.post("/home/events")
    def post_event(body: EventIn):
        try:
            with lock:
                fired = agent.home.emit_event(body.device, body.attribute, body.value)
        except (UnknownDevice, UnknownAttribute) as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return [r.to_json() for r in fired]

    @app.post("/home/devices/{device_name}/availability")
    def post_availability(device_name: str, body: AvailabilityIn):
        try:
            with lock:
                agent.home.set_availability(device_name, body.available)
        except UnknownDevice as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"device": device_name, "available": body.available}

    console_dir = _console_dist()
    if console_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=console_dir, html=True), name="console")

    return app


def _console_dist():
    from pathlib import Path

    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None
