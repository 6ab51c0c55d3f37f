"""HTTP session service: a human plays Bob against the simulated Alice.

Wire protocol (JSON over HTTP):

    POST /sessions                         create a session (external schedule)
    POST /sessions/{id}/context            {"context": "M1" | "M2" | "none"}
    POST /sessions/{id}/reveal             disclose Alice's committed turn
    GET  /sessions/{id}/report             live statistics + settled history

Alice's whole turn is executed and committed when Bob submits his context:
the submit response carries commitment_hash, the lowercase hex SHA-256 of
salt + canonical record JSON (sorted keys, compact separators), with the
salt disclosed only at reveal. A client can therefore verify that nothing
was recomputed after Bob's choices became known. Errors are JSON
{code, message}.
"""
from __future__ import annotations

import hashlib
import json
import secrets
import threading
import time
from dataclasses import dataclass, field

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse

from . import lg_stats
from .cli import config_from_dict, json_safe
from .protocol import (
    Context,
    ProtocolError,
    RoundRecord,
    ScheduleKind,
    SessionConfig,
    play_round,
    settle,
)

PHASE_AWAITING_CONTEXT = "AwaitingContext"
PHASE_AWAITING_REVEAL = "AwaitingReveal"
PHASE_SETTLED = "Settled"

DEFAULT_SESSION_TIMEOUT = 1800.0


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def unknown_session(session_id: str) -> ApiError:
    return ApiError(404, "UnknownSession", f"no session {session_id!r}")


def wrong_phase(expected: str, actual: str) -> ApiError:
    return ApiError(409, "WrongPhase", f"expected phase {expected}, session is in {actual}")


def canonical_record_dict(record: RoundRecord) -> dict:
    """Fixed-shape JSON view of a record; the object whose serialization
    is committed to. Only JSON-exact types (ints, bools, strings, null)."""
    gt = record.ground_truth_boxes or (None, None, None)
    return {
        "round_id": record.round_id,
        "engine": record.engine.value,
        "context": record.context.value,
        "bob_outcome": None if record.bob_outcome is None else record.bob_outcome.value,
        "alice_m3": record.alice_m3,
        "alice_bets": record.alice_bets,
        "alice_wins": record.alice_wins,
        "gt_box_t1": gt[0],
        "gt_box_t2": gt[1],
        "gt_box_t3": gt[2],
        "seed_path": record.seed_path,
    }


def canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def commitment_hash(salt: str, canonical: str) -> str:
    return hashlib.sha256((salt + canonical).encode("utf-8")).hexdigest()


@dataclass
class _PendingRound:
    record: RoundRecord
    canonical: str
    salt: str
    hash: str
    payoff: float


@dataclass
class _Session:
    session_id: str
    config: SessionConfig
    phase: str = PHASE_AWAITING_CONTEXT
    ledger: float = 0.0
    history: list = field(default_factory=list)
    pending: _PendingRound | None = None
    last_access: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def next_round_id(self) -> int:
        return len(self.history) + 1


class SessionStore:
    def __init__(self, timeout: float = DEFAULT_SESSION_TIMEOUT):
        self.timeout = timeout
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()

    def create(self, config: SessionConfig) -> _Session:
        session = _Session(session_id=secrets.token_hex(16), config=config)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> _Session:
        now = time.monotonic()
        with self._lock:
            session = self._sessions.get(session_id)
            if session is not None and now - session.last_access > self.timeout:
                del self._sessions[session_id]
                session = None
            if session is None:
                raise unknown_session(session_id)
            session.last_access = now
            return session


def _session_view(session: _Session) -> dict:
    return {
        "session_id": session.session_id,
        "phase": session.phase,
        "round_id": session.next_round_id if session.phase != PHASE_SETTLED else len(session.history),
        "rounds_total": session.config.rounds,
        "rounds_played": len(session.history),
        "engine": session.config.engine.value,
        "odds": session.config.odds,
        "ledger": session.ledger,
    }


def _report_payload(session: _Session) -> dict:
    records = [p.record for p in session.history]
    report = lg_stats.report_or_none(records)
    payload = _session_view(session)
    payload["report"] = None if report is None else report.to_dict()
    bet_stats = {}
    for ctx in (Context.M1, Context.M2, Context.NONE):
        rounds = [r for r in records if r.context is ctx]
        decided = [r for r in rounds if r.alice_wins is not None]
        wins = sum(1 for r in decided if r.alice_wins)
        bet_stats[ctx.value] = {
            "rounds": len(rounds),
            "alice_true": sum(1 for r in rounds if r.alice_m3),
            "bet_rate": (sum(1 for r in rounds if r.alice_m3) / len(rounds)) if rounds else None,
            "bets_decided": len(decided),
            "win_rate": wins / len(decided) if decided else None,
        }
    payload["per_context"] = bet_stats
    payload["history"] = [
        {
            "record": canonical_record_dict(p.record),
            "commitment_hash": p.hash,
            "salt": p.salt,
            "payoff_delta": p.payoff,
        }
        for p in session.history
    ]
    return json_safe(payload)


def create_app(
    default_config: SessionConfig | None = None,
    session_timeout: float = DEFAULT_SESSION_TIMEOUT,
    webui_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="threebox game service")
    store = SessionStore(timeout=session_timeout)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.middleware("http")
    async def _cors(request: Request, call_next):
        if request.method == "OPTIONS":
            response = JSONResponse(content={})
        else:
            response = await call_next(request)
        response.headers["Access-Control-Allow-Origin"] = "*"
        response.headers["Access-Control-Allow-Methods"] = "GET, POST, OPTIONS"
        response.headers["Access-Control-Allow-Headers"] = "Content-Type"
        return response

    @app.post("/sessions")
    def create_session(body: dict | None = Body(default=None)):
        if body:
            try:
                config = config_from_dict(body)
            except (ValueError, TypeError) as exc:
                raise ApiError(400, "InvalidConfig", str(exc)) from None
        elif default_config is not None:
            config = default_config
        else:
            raise ApiError(400, "InvalidConfig", "no config supplied and no server default")
        if config.context_schedule.kind is not ScheduleKind.EXTERNAL:
            raise ApiError(
                400, "InvalidConfig", 'interactive sessions require context_schedule "external"'
            )
        session = store.create(config)
        return _session_view(session)

    @app.post("/sessions/{session_id}/context")
    def submit_context(session_id: str, body: dict = Body(...)):
        session = store.get(session_id)
        with session.lock:
            if session.phase != PHASE_AWAITING_CONTEXT:
                raise wrong_phase(PHASE_AWAITING_CONTEXT, session.phase)
            try:
                context = Context(body.get("context"))
            except ValueError:
                raise ApiError(
                    400, "InvalidContext",
                    f'context must be "M1", "M2" or "none", got {body.get("context")!r}',
                ) from None
            round_id = session.next_round_id
            try:
                record = play_round(session.config, round_id, context=context)
            except ProtocolError as exc:
                raise ApiError(400, "InvalidContext", str(exc)) from None
            canonical = canonical_json(canonical_record_dict(record))
            salt = secrets.token_hex(16)
            session.pending = _PendingRound(
                record=record,
                canonical=canonical,
                salt=salt,
                hash=commitment_hash(salt, canonical),
                payoff=settle(record, session.config.odds),
            )
            session.phase = PHASE_AWAITING_REVEAL
            response = {
                "phase": session.phase,
                "round_id": round_id,
                "context": context.value,
                "commitment_hash": session.pending.hash,
            }
            if record.bob_outcome is not None:
                response["bob_outcome"] = record.bob_outcome.value
            return response

    @app.post("/sessions/{session_id}/reveal")
    def reveal_and_settle(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if session.phase != PHASE_AWAITING_REVEAL or session.pending is None:
                raise wrong_phase(PHASE_AWAITING_REVEAL, session.phase)
            pending = session.pending
            session.pending = None
            session.history.append(pending)
            session.ledger += pending.payoff
            if len(session.history) >= session.config.rounds:
                session.phase = PHASE_SETTLED
            else:
                session.phase = PHASE_AWAITING_CONTEXT
            record = pending.record
            return json_safe(
                {
                    "phase": session.phase,
                    "round_id": record.round_id,
                    "alice_m3": record.alice_m3,
                    "alice_bets": record.alice_bets,
                    "alice_wins": record.alice_wins,
                    "payoff_delta": pending.payoff,
                    "ledger": session.ledger,
                    "salt": pending.salt,
                    "commitment_hash": pending.hash,
                    "record": canonical_record_dict(record),
                    "rounds_played": len(session.history),
                    "rounds_total": session.config.rounds,
                }
            )

    @app.get("/sessions/{session_id}/report")
    def session_report(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return _report_payload(session)

    if webui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=webui_dir, html=True), name="webui")

    return app
