"""HTTP service over the engine: status, sessions, proposals, simulations.

One service instance owns one store. Mutations funnel through the
engine's single-writer lock; reads are served from immutable snapshots.
The store file is persisted after every mutation and again on graceful
shutdown, and every event is appended to a tab-separated audit log next
to the store.

Proposals are created by the service itself: when an ingested session
fires the compression trigger, the configured compressor is invoked
immediately and the engine moves to awaiting_approval. While a proposal
is pending, new sessions are refused with a phase_conflict. If the
compressor fails, the engine stays in trigger_fired and the next
session POST retries the compression before anything else.

Error bodies are uniform: {"error": {"code": ..., "message": ...}} with
code one of phase_conflict, not_found, validation, compressor_failed,
io.
"""

from __future__ import annotations

import contextlib
import json
import socket
import threading
import uuid
from dataclasses import asdict, dataclass

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from . import memfile, memory, simulator
from .budget import BudgetError, GateConfig, ModelProfile
from .compressors import Compressor, TruncatingCompressor
from .engine import (
    Engine,
    EngineConfig,
    EngineEvent,
    EventCode,
    Phase,
    PhaseError,
    UnknownProposalError,
)
from .memory import MemoryStoreError
from .simulator import (
    AppendOnly,
    ConstantGrowth,
    DivergenceSeries,
    Homeostatic,
    RetrievalFragment,
    SeededRandomGrowth,
    SimulationError,
    SimulationSpec,
    Workload,
    fig2_preset,
)

MAX_SYNC_ROWS = 10_000
MAX_EVENT_WAIT_MS = 30_000

_STATUS_BY_CODE = {
    "validation": 400,
    "not_found": 404,
    "phase_conflict": 409,
    "compressor_failed": 502,
    "io": 500,
}


class ApiError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=_STATUS_BY_CODE[self.code],
            content={"error": {"code": self.code, "message": self.message}},
        )


def _event_dict(event: EngineEvent) -> dict:
    return {
        "at": event.at,
        "code": event.code.value,
        "phase": event.phase.value,
        "footprint": event.footprint,
        "position_estimate": event.position_estimate,
        "proposal_id": event.proposal_id,
        "payload": event.payload,
    }


def _proposal_summary(p) -> dict:
    return {
        "proposal_id": p.proposal_id,
        "status": p.status,
        "tokens_before": p.tokens_before,
        "tokens_after": p.tokens_after,
        "fidelity_at_compression": p.fidelity_at_compression,
        "past_gate": p.past_gate,
        "created_at": p.created_at,
        "absorbed_sessions": len(p.absorbed_session_ids),
        "rationale": p.rationale,
    }


def _proposal_detail(p) -> dict:
    detail = _proposal_summary(p)
    detail.update(
        {
            "deep_before": p.deep_before,
            "deep_proposed": p.deep_proposed,
            "absorbed_session_ids": list(p.absorbed_session_ids),
        }
    )
    return detail


@dataclass
class SimulationRun:
    run_id: str
    request: dict
    series: DivergenceSeries


class Service:
    """Engine owner plus run registry and persistence plumbing."""

    def __init__(
        self,
        config: EngineConfig,
        store_path: str,
        compressor: Compressor | None = None,
        create: bool = False,
    ):
        self.store_path = store_path
        self.audit_path = store_path + ".audit.log"
        store = self._load_or_create(config, create)
        self._audit_file = open(self.audit_path, "a", encoding="utf-8")
        self.engine = Engine(
            config,
            compressor or TruncatingCompressor(target_tokens=config.deep_cap // 2),
            store=store,
            audit_sink=self._audit_file,
        )
        self.runs: dict[str, SimulationRun] = {}
        self._runs_lock = threading.Lock()
        # Serializes multi-step mutations (ingest + auto-propose, decide)
        # beyond the engine's per-operation lock.
        self._mutate_lock = threading.Lock()

    def _load_or_create(self, config: EngineConfig, create: bool):
        try:
            return memfile.load(self.store_path)
        except FileNotFoundError:
            if not create:
                raise
            store = memory.empty_store(
                recent_soft_cap=config.recent_soft_cap,
                profile_name=config.profile.name,
            )
            memfile.save(store, self.store_path)
            return store

    def persist(self) -> None:
        memfile.save(self.engine.state.store, self.store_path)

    def close(self) -> None:
        self.persist()
        self._audit_file.close()

    # -- engine operations ---------------------------------------------

    def ingest_session(self, content: str) -> list[EngineEvent]:
        with self._mutate_lock:
            events: list[EngineEvent] = []
            if self.engine.state.phase is Phase.TRIGGER_FIRED:
                # A previous compression attempt failed; retry it before
                # refusing the session for phase reasons.
                events.extend(self.engine.propose())
                if self.engine.state.phase is Phase.TRIGGER_FIRED:
                    raise ApiError(
                        "compressor_failed",
                        "; ".join(
                            e.payload.get("error", "compressor failed")
                            for e in events
                            if e.code is EventCode.COMPRESSOR_FAILED
                        )
                        or "compressor failed",
                    )
            try:
                events.extend(self.engine.ingest(content))
            except PhaseError as exc:
                raise ApiError("phase_conflict", str(exc)) from exc
            except MemoryStoreError as exc:
                raise ApiError("validation", str(exc)) from exc
            # Compression is service-driven: a fired trigger immediately asks
            # the compressor for a proposal. A failure here still ingested the
            # session, so it is reported in the events, not as an error.
            if self.engine.state.phase is Phase.TRIGGER_FIRED:
                events.extend(self.engine.propose())
            self.persist()
            return events

    def decide(self, proposal_id: str, decision: str, rationale: str) -> list[EngineEvent]:
        with self._mutate_lock:
            state = self.engine.state
            for archived in state.archived:
                if archived.proposal_id == proposal_id:
                    raise ApiError(
                        "phase_conflict",
                        f"proposal {proposal_id} already {archived.status}",
                    )
            if state.pending is None or state.pending.proposal_id != proposal_id:
                raise ApiError("not_found", f"unknown proposal id: {proposal_id}")
            if decision not in ("approve", "reject"):
                raise ApiError(
                    "validation",
                    f"decision must be approve or reject, got {decision!r}",
                )
            try:
                events = self.engine.decide(proposal_id, decision, rationale)
            except memory.DeepCapExceededError as exc:
                raise ApiError("validation", str(exc)) from exc
            except (PhaseError, UnknownProposalError) as exc:
                raise ApiError("phase_conflict", str(exc)) from exc
            self.persist()
            return events

    def run_simulation(self, request: dict) -> SimulationRun:
        spec = parse_simulation_request(request)
        rows = spec.workload.session_count * len(spec.strategies)
        if rows > MAX_SYNC_ROWS:
            raise ApiError(
                "validation",
                f"{rows} session-strategy rows exceed the synchronous limit"
                f" of {MAX_SYNC_ROWS}",
            )
        series = spec.run()
        run = SimulationRun(run_id=str(uuid.uuid4()), request=request, series=series)
        with self._runs_lock:
            self.runs[run.run_id] = run
        return run


# ---------------------------------------------------------------------------
# Simulation request parsing
# ---------------------------------------------------------------------------

def parse_simulation_request(request: dict) -> SimulationSpec:
    if not isinstance(request, dict):
        raise ApiError("validation", "request body must be an object")
    if request.get("preset") == "fig2":
        return fig2_preset()
    if request.get("preset"):
        raise ApiError("validation", f"unknown preset: {request['preset']!r}")
    try:
        growth_spec = request["growth"]
        kind = growth_spec["kind"]
        if kind == "constant":
            growth = ConstantGrowth(int(growth_spec["tokens_per_session"]))
        elif kind == "seeded-random":
            growth = SeededRandomGrowth(
                mean=float(growth_spec["mean"]),
                spread=float(growth_spec["spread"]),
                seed=int(growth_spec["seed"]),
            )
        else:
            raise ApiError("validation", f"unknown growth kind: {kind!r}")
        strategies = []
        for s in request["strategies"]:
            s_kind = s["kind"]
            if s_kind == "append_only":
                strategies.append(AppendOnly())
            elif s_kind == "homeostatic":
                strategies.append(
                    Homeostatic(
                        absorption_cadence=s.get("absorption_cadence", 5),
                        compression_ratio=float(s.get("compression_ratio", 0.2)),
                        base_tokens=int(s.get("base_tokens", 1000)),
                        trigger_policy=s.get("trigger_policy", "effective"),
                    )
                )
            elif s_kind == "retrieval":
                strategies.append(
                    RetrievalFragment(
                        fragments_per_query=int(s.get("fragments_per_query", 4)),
                        fragment_tokens=int(s.get("fragment_tokens", 400)),
                    )
                )
            else:
                raise ApiError("validation", f"unknown strategy kind: {s_kind!r}")
        profile_spec = request.get(
            "profile", {"name": "default", "window_size": 200_000,
                        "degradation_rate": 0.02}
        )
        gate_spec = request.get(
            "gate", {"fidelity_target": 0.975, "trigger_fraction": 0.5}
        )
        spec = SimulationSpec(
            workload=Workload(int(request["sessions"]), growth),
            strategies=tuple(strategies),
            profile=ModelProfile(
                name=str(profile_spec.get("name", "default")),
                window_size=int(profile_spec["window_size"]),
                degradation_rate=float(profile_spec["degradation_rate"]),
            ),
            gate=GateConfig(
                fidelity_target=float(gate_spec["fidelity_target"]),
                trigger_fraction=float(gate_spec.get("trigger_fraction", 0.5)),
            ),
            boundary=int(request.get("boundary", 14_000)),
        )
    except ApiError:
        raise
    except (KeyError, TypeError, ValueError, SimulationError, BudgetError) as exc:
        raise ApiError("validation", f"bad simulation request: {exc}") from exc
    return spec


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------

def create_app(service: Service) -> FastAPI:
    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        service.close()

    app = FastAPI(title="homeostat", lifespan=lifespan)
    app.state.service = service

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return exc.response()

    def status_dict() -> dict:
        return asdict(service.engine.status())

    @app.get("/v1/status")
    def get_status() -> dict:
        return status_dict()

    @app.get("/v1/budget")
    def get_budget() -> dict:
        report = service.engine.status()
        return {
            "footprint": report.footprint,
            "position_estimate": report.position_estimate,
            "fidelity": report.fidelity,
            "gate_position": report.gate_position,
            "effective_trigger": report.effective_trigger,
            "quality_budget": report.quality_budget,
            "gate_unreachable": report.gate_unreachable,
        }

    @app.post("/v1/sessions")
    async def post_session(request: Request) -> dict:
        body = await _json_body(request)
        content = body.get("content")
        if not isinstance(content, str) or not content:
            raise ApiError("validation", "content must be a non-empty string")
        events = service.ingest_session(content)
        return {"events": [_event_dict(e) for e in events], "status": status_dict()}

    @app.get("/v1/proposals")
    def get_proposals() -> dict:
        state = service.engine.state
        proposals = [_proposal_summary(p) for p in state.archived]
        if state.pending is not None:
            proposals.append(_proposal_summary(state.pending))
        return {"proposals": proposals}

    @app.get("/v1/proposals/{proposal_id}")
    def get_proposal(proposal_id: str) -> dict:
        state = service.engine.state
        if state.pending is not None and state.pending.proposal_id == proposal_id:
            return _proposal_detail(state.pending)
        for archived in state.archived:
            if archived.proposal_id == proposal_id:
                return _proposal_detail(archived)
        raise ApiError("not_found", f"unknown proposal id: {proposal_id}")

    @app.post("/v1/proposals/{proposal_id}/decision")
    async def post_decision(proposal_id: str, request: Request) -> dict:
        body = await _json_body(request)
        decision = body.get("decision", "")
        rationale = body.get("rationale", "")
        if not isinstance(rationale, str):
            raise ApiError("validation", "rationale must be a string")
        events = service.decide(proposal_id, decision, rationale)
        return {"events": [_event_dict(e) for e in events], "status": status_dict()}

    @app.get("/v1/memory/deep")
    def get_deep() -> dict:
        deep = service.engine.state.store.deep
        return {
            "content": deep.content,
            "token_count": deep.token_count,
            "revision": deep.revision,
            "last_rewrite_at": deep.last_rewrite_at,
        }

    @app.get("/v1/memory/recent")
    def get_recent() -> dict:
        store = service.engine.state.store
        return {
            "records": [
                {
                    "session_id": r.session_id,
                    "ordinal": r.ordinal,
                    "token_count": r.token_count,
                    "crystallized": r.crystallized,
                    "created_at": r.created_at,
                    "content": r.content,
                }
                for r in store.recent
            ],
            "soft_cap": store.recent_soft_cap,
            "total_tokens": store.recent_tokens,
        }

    @app.post("/v1/simulations")
    async def post_simulation(request: Request) -> dict:
        body = await _json_body(request)
        run = service.run_simulation(body)
        return {
            "run_id": run.run_id,
            "rows": len(run.series.rows),
            "strategies": list(run.series.strategies),
        }

    @app.get("/v1/simulations/{run_id}")
    def get_simulation(run_id: str) -> dict:
        run = service.runs.get(run_id)
        if run is None:
            raise ApiError("not_found", f"unknown run id: {run_id}")
        return {
            "run_id": run.run_id,
            "request": run.request,
            "rows": [asdict(r) for r in run.series.rows],
        }

    @app.get("/v1/simulations/{run_id}/export")
    def export_simulation(run_id: str) -> Response:
        run = service.runs.get(run_id)
        if run is None:
            raise ApiError("not_found", f"unknown run id: {run_id}")
        return PlainTextResponse(
            simulator.render_series(run.series).decode("utf-8"),
            media_type="text/csv",
        )

    @app.get("/v1/events")
    def get_events(since: int = 0, wait_ms: int = 0) -> dict:
        if since < 0:
            raise ApiError("validation", "since must be >= 0")
        wait = min(max(wait_ms, 0), MAX_EVENT_WAIT_MS)
        events = service.engine.events_since(since, wait_ms=wait)
        return {
            "events": [_event_dict(e) for e in events],
            "next_offset": since + len(events),
        }

    return app


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except json.JSONDecodeError as exc:
        raise ApiError("validation", f"request body is not valid JSON: {exc}")
    if not isinstance(body, dict):
        raise ApiError("validation", "request body must be a JSON object")
    return body


# ---------------------------------------------------------------------------
# Serving
# ---------------------------------------------------------------------------

def serve(
    config: EngineConfig,
    store_path: str,
    bind: str = "127.0.0.1:8764",
    compressor: Compressor | None = None,
    create: bool = False,
    announce=print,
) -> None:
    """Run the service until interrupted; persists the store on shutdown.

    Binds the socket before starting so `host:0` reports the actual
    port. Store load failures (missing file without --create, BOM,
    checksum mismatch) raise before anything starts listening.
    """
    import uvicorn

    host, _, port_text = bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise ApiError("validation", f"bind must be host:port, got {bind!r}")
    try:
        service = Service(config, store_path, compressor=compressor, create=create)
    except (OSError, MemoryStoreError) as exc:
        raise ApiError("io", str(exc)) from exc
    app = create_app(service)

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, int(port_text)))
    except OSError as exc:
        raise ApiError("io", f"cannot bind {bind}: {exc}") from exc
    actual_host, actual_port = sock.getsockname()[:2]
    announce(f"homeostat serving {store_path} on http://{actual_host}:{actual_port}")

    server = uvicorn.Server(
        uvicorn.Config(app, log_level="warning", access_log=False)
    )
    server.run(sockets=[sock])
