"""The regulatory cycle: accumulate, compress, rewrite, shed.

The engine is an explicit state machine over an immutable MemoryStore.
Sessions accumulate in the recent layer; when the estimated channel
position crosses the effective trigger, the engine stops accumulating,
asks a compressor for a deep-memory rewrite, and parks the result as a
proposal awaiting a human decision. Approval applies the rewrite and
sheds the absorbed records (the sawtooth drop); rejection archives the
proposal and resumes accumulation unchanged. Deep memory can only ever
change through an approved proposal.

Position is estimated, not measured: hidden consumers (internal
reasoning passes, tool output) spend window invisibly, so the estimate
inflates the stored footprint by a configurable margin.

State transitions are pure functions returning (new state, events).
The Engine class wraps them with single-writer locking and an
append-only audit journal; every event carries enough payload to replay
the store from scratch, which is how the audit trail is verified.
"""

from __future__ import annotations

import json
import math
import threading
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, IO, Iterable, Sequence

from . import memory
from .budget import (
    CurveShape,
    GateConfig,
    LINEAR,
    ModelProfile,
    effective_trigger,
    fidelity_at,
    gate_position,
    quality_budget,
)
from .compressors import Compressor, CompressorFailure
from .memory import MemoryStore, SessionRecord, now_iso

DEFAULT_INSTRUCTION = (
    "Rewrite deep memory to maximize signal, minimize tokens. "
    "Preserve trajectory coherence. Shed what has been absorbed."
)
DEFAULT_HIDDEN_MARGIN = 0.10


class EngineError(Exception):
    pass


class PhaseError(EngineError):
    """Operation invoked in a phase that does not permit it."""


class UnknownProposalError(EngineError):
    pass


class Phase(str, Enum):
    ACCUMULATING = "accumulating"
    TRIGGER_FIRED = "trigger_fired"
    AWAITING_APPROVAL = "awaiting_approval"
    REWRITING = "rewriting"
    SHEDDING = "shedding"


class EventCode(str, Enum):
    SESSION_INGESTED = "SESSION_INGESTED"
    TRIGGER_FIRED = "TRIGGER_FIRED"
    PAST_GATE_WARNING = "PAST_GATE_WARNING"
    PROPOSAL_CREATED = "PROPOSAL_CREATED"
    COMPRESSOR_FAILED = "COMPRESSOR_FAILED"
    PROPOSAL_APPROVED = "PROPOSAL_APPROVED"
    PROPOSAL_REJECTED = "PROPOSAL_REJECTED"
    DEEP_REWRITTEN = "DEEP_REWRITTEN"
    RECORDS_SHED = "RECORDS_SHED"


@dataclass(frozen=True)
class EngineConfig:
    profile: ModelProfile
    gate: GateConfig
    curve: CurveShape = LINEAR
    compression_instruction: str = DEFAULT_INSTRUCTION
    deep_cap: int = memory.DEFAULT_DEEP_CAP
    recent_soft_cap: int = memory.DEFAULT_RECENT_SOFT_CAP
    hidden_token_margin: float = DEFAULT_HIDDEN_MARGIN

    def __post_init__(self) -> None:
        if not 0.0 <= self.hidden_token_margin < 1.0:
            raise EngineError(
                f"hidden_token_margin must be in [0,1), got {self.hidden_token_margin}"
            )

    @property
    def gate_position(self) -> int:
        return gate_position(self.profile, self.gate)

    @property
    def effective_trigger(self) -> int:
        return effective_trigger(self.gate_position, self.gate)


@dataclass(frozen=True)
class CompressionProposal:
    """A candidate deep-memory rewrite parked for a human decision."""

    proposal_id: str
    deep_before: str
    deep_proposed: str
    absorbed_session_ids: tuple[str, ...]
    tokens_before: int
    tokens_after: int
    fidelity_at_compression: float
    past_gate: bool
    created_at: str
    status: str = "pending"  # pending | approved | rejected
    rationale: str = ""


@dataclass(frozen=True)
class EngineState:
    store: MemoryStore
    phase: Phase = Phase.ACCUMULATING
    position_estimate: int = 0
    pending: CompressionProposal | None = None
    archived: tuple[CompressionProposal, ...] = ()


@dataclass(frozen=True)
class EngineEvent:
    at: str
    code: EventCode
    phase: Phase
    footprint: int
    position_estimate: int
    proposal_id: str | None = None
    payload: dict = field(default_factory=dict)

    def audit_line(self) -> str:
        """Tab-separated audit record.

        Six fixed columns (timestamp, code, phase, footprint, position
        estimate, proposal id or ``-``) plus a compact JSON payload
        column so the log alone can rebuild the store.
        """
        payload = (
            json.dumps(self.payload, sort_keys=True, ensure_ascii=False)
            if self.payload
            else "-"
        )
        return "\t".join(
            [
                self.at,
                self.code.value,
                self.phase.value,
                str(self.footprint),
                str(self.position_estimate),
                self.proposal_id or "-",
                payload,
            ]
        )


def estimate_position(footprint: int, config: EngineConfig) -> int:
    """Footprint inflated by the hidden-token margin, rounded up."""
    return math.ceil(round(footprint * (1.0 + config.hidden_token_margin), 6))


def new_state(config: EngineConfig, store: MemoryStore | None = None) -> EngineState:
    store = store if store is not None else memory.empty_store(
        recent_soft_cap=config.recent_soft_cap, profile_name=config.profile.name
    )
    return EngineState(
        store=store,
        phase=Phase.ACCUMULATING,
        position_estimate=estimate_position(store.total_footprint, config),
    )


def _event(
    state: EngineState,
    code: EventCode,
    *,
    phase: Phase | None = None,
    proposal_id: str | None = None,
    payload: dict | None = None,
    now: str | None = None,
) -> EngineEvent:
    return EngineEvent(
        at=now or now_iso(),
        code=code,
        phase=phase or state.phase,
        footprint=state.store.total_footprint,
        position_estimate=state.position_estimate,
        proposal_id=proposal_id,
        payload=payload or {},
    )


# ---------------------------------------------------------------------------
# Transitions
# ---------------------------------------------------------------------------

def ingest(
    state: EngineState,
    config: EngineConfig,
    session_content: str,
    *,
    session_id: str | None = None,
    now: str | None = None,
) -> tuple[EngineState, list[EngineEvent]]:
    """Append a session and re-evaluate the trigger.

    Only legal while accumulating. Fires the trigger when the position
    estimate reaches the effective trigger; additionally warns when the
    estimate is already past the gate, because a compression started
    there runs in the degraded region.
    """
    if state.phase is not Phase.ACCUMULATING:
        raise PhaseError(f"cannot ingest in phase {state.phase.value}")
    store, record = memory.append_session(
        state.store, session_content, session_id=session_id, created_at=now
    )
    position = estimate_position(store.total_footprint, config)
    state = replace(state, store=store, position_estimate=position)
    events = [
        _event(
            state,
            EventCode.SESSION_INGESTED,
            payload={
                "session_id": record.session_id,
                "ordinal": record.ordinal,
                "token_count": record.token_count,
                "content": record.content,
                "created_at": record.created_at,
            },
            now=now,
        )
    ]
    if position >= config.effective_trigger:
        state = replace(state, phase=Phase.TRIGGER_FIRED)
        events.append(
            _event(
                state,
                EventCode.TRIGGER_FIRED,
                payload={"effective_trigger": config.effective_trigger},
                now=now,
            )
        )
        if position > config.gate_position:
            events.append(
                _event(
                    state,
                    EventCode.PAST_GATE_WARNING,
                    payload={"gate_position": config.gate_position},
                    now=now,
                )
            )
    return state, events


def crystallizable_records(store: MemoryStore) -> tuple[SessionRecord, ...]:
    """Records eligible for absorption: everything but the newest.

    Keeping the most recent session in the recent layer preserves
    working continuity across the compression.
    """
    return store.recent[:-1] if len(store.recent) > 1 else ()


def propose(
    state: EngineState,
    config: EngineConfig,
    compressor: Compressor,
    *,
    now: str | None = None,
) -> tuple[EngineState, list[EngineEvent]]:
    """Ask the compressor for a rewrite and park it for approval.

    A compressor failure leaves the engine exactly where it was, in
    trigger_fired, with a COMPRESSOR_FAILED event; no partial state.
    """
    if state.phase is not Phase.TRIGGER_FIRED:
        raise PhaseError(f"cannot propose in phase {state.phase.value}")
    records = crystallizable_records(state.store)
    try:
        proposed = compressor.compress(
            state.store.deep.content, records, config.compression_instruction
        )
    except CompressorFailure as exc:
        events = [
            _event(state, EventCode.COMPRESSOR_FAILED, payload={"error": str(exc)},
                   now=now)
        ]
        return state, events
    tokenizer = memory.get_tokenizer(state.store.tokenizer_id)
    proposal = CompressionProposal(
        proposal_id=str(uuid.uuid4()),
        deep_before=state.store.deep.content,
        deep_proposed=proposed,
        absorbed_session_ids=tuple(r.session_id for r in records),
        tokens_before=state.store.deep.token_count
        + sum(r.token_count for r in records),
        tokens_after=memory.count_tokens(proposed, tokenizer),
        fidelity_at_compression=fidelity_at(
            config.profile, state.position_estimate, config.curve
        ),
        past_gate=state.position_estimate > config.gate_position,
        created_at=now or now_iso(),
    )
    state = replace(state, phase=Phase.AWAITING_APPROVAL, pending=proposal)
    events = [
        _event(
            state,
            EventCode.PROPOSAL_CREATED,
            proposal_id=proposal.proposal_id,
            payload={
                "tokens_before": proposal.tokens_before,
                "tokens_after": proposal.tokens_after,
                "fidelity_at_compression": proposal.fidelity_at_compression,
                "past_gate": proposal.past_gate,
                "absorbed_session_ids": list(proposal.absorbed_session_ids),
            },
            now=now,
        )
    ]
    return state, events


def decide(
    state: EngineState,
    config: EngineConfig,
    proposal_id: str,
    decision: str,
    rationale: str = "",
    *,
    now: str | None = None,
) -> tuple[EngineState, list[EngineEvent]]:
    """Apply a human decision to the pending proposal.

    Approval rewrites deep memory wholesale, crystallizes and sheds the
    absorbed records, and returns to accumulation; the transient
    rewriting and shedding phases are visible in the emitted events.
    Rejection archives the proposal with its rationale and changes
    nothing else. An approval whose rewrite exceeds the deep cap fails
    and leaves the proposal pending.
    """
    if state.phase is not Phase.AWAITING_APPROVAL or state.pending is None:
        raise PhaseError(f"no pending proposal in phase {state.phase.value}")
    if state.pending.proposal_id != proposal_id:
        raise UnknownProposalError(f"unknown proposal id: {proposal_id}")
    if decision not in ("approve", "reject"):
        raise EngineError(f"decision must be approve or reject, got {decision!r}")

    proposal = state.pending
    if decision == "reject":
        archived = replace(proposal, status="rejected", rationale=rationale)
        state = replace(
            state,
            phase=Phase.ACCUMULATING,
            pending=None,
            archived=state.archived + (archived,),
        )
        return state, [
            _event(
                state,
                EventCode.PROPOSAL_REJECTED,
                proposal_id=proposal_id,
                payload={"rationale": rationale},
                now=now,
            )
        ]

    # Approval path: rewrite, crystallize, shed. apply_rewrite enforces the
    # deep cap before any state changes, so a failure leaves the proposal
    # pending.
    store = memory.apply_rewrite(
        state.store,
        proposal.deep_proposed,
        deep_cap=config.deep_cap,
        rewritten_at=now,
    )
    rewriting = replace(state, store=store, phase=Phase.REWRITING)
    events = [
        _event(
            rewriting,
            EventCode.DEEP_REWRITTEN,
            proposal_id=proposal_id,
            payload={"revision": store.deep.revision,
                     "tokens_after": store.deep.token_count},
            now=now,
        )
    ]
    store = memory.mark_crystallized(store, proposal.absorbed_session_ids)
    store = memory.shed(store, proposal.absorbed_session_ids)
    position = estimate_position(store.total_footprint, config)
    shedding = replace(rewriting, store=store, phase=Phase.SHEDDING,
                       position_estimate=position)
    events.append(
        _event(
            shedding,
            EventCode.RECORDS_SHED,
            proposal_id=proposal_id,
            payload={"shed_session_ids": list(proposal.absorbed_session_ids)},
            now=now,
        )
    )
    archived = replace(proposal, status="approved", rationale=rationale)
    state = replace(
        shedding,
        phase=Phase.ACCUMULATING,
        pending=None,
        archived=state.archived + (archived,),
    )
    events.append(
        _event(
            state,
            EventCode.PROPOSAL_APPROVED,
            proposal_id=proposal_id,
            payload={
                "rationale": rationale,
                "deep_proposed": proposal.deep_proposed,
                "absorbed_session_ids": list(proposal.absorbed_session_ids),
                "rewritten_at": store.deep.last_rewrite_at,
            },
            now=now,
        )
    )
    return state, events


@dataclass(frozen=True)
class BudgetReport:
    """Everything an operator needs to see at a glance."""

    phase: str
    footprint: int
    position_estimate: int
    fidelity: float
    gate_position: int
    effective_trigger: int
    quality_budget: int
    gate_unreachable: bool
    deep_revision: int
    deep_tokens: int
    recent_tokens: int
    recent_records: int
    recent_soft_cap: int
    pending_proposal: dict | None


def status(state: EngineState, config: EngineConfig) -> BudgetReport:
    gate_pos = config.gate_position
    pending = None
    if state.pending is not None:
        p = state.pending
        pending = {
            "proposal_id": p.proposal_id,
            "tokens_before": p.tokens_before,
            "tokens_after": p.tokens_after,
            "fidelity_at_compression": p.fidelity_at_compression,
            "past_gate": p.past_gate,
            "created_at": p.created_at,
        }
    return BudgetReport(
        phase=state.phase.value,
        footprint=state.store.total_footprint,
        position_estimate=state.position_estimate,
        fidelity=fidelity_at(config.profile, state.position_estimate, config.curve),
        gate_position=gate_pos,
        effective_trigger=config.effective_trigger,
        quality_budget=quality_budget(
            config.profile, state.position_estimate, gate_pos
        ),
        gate_unreachable=gate_pos >= config.profile.window_size,
        deep_revision=state.store.deep.revision,
        deep_tokens=state.store.deep.token_count,
        recent_tokens=state.store.recent_tokens,
        recent_records=len(state.store.recent),
        recent_soft_cap=state.store.recent_soft_cap,
        pending_proposal=pending,
    )


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

def replay(events: Iterable[EngineEvent], base: MemoryStore) -> MemoryStore:
    """Rebuild a store by applying the journal to a fresh base store.

    Only SESSION_INGESTED and PROPOSAL_APPROVED mutate the store; their
    payloads carry everything needed for an exact reconstruction,
    timestamps included.
    """
    store = base
    for event in events:
        if event.code is EventCode.SESSION_INGESTED:
            store, _ = memory.append_session(
                store,
                event.payload["content"],
                session_id=event.payload["session_id"],
                created_at=event.payload["created_at"],
            )
        elif event.code is EventCode.PROPOSAL_APPROVED:
            store = memory.apply_rewrite(
                store,
                event.payload["deep_proposed"],
                rewritten_at=event.payload["rewritten_at"],
            )
            absorbed = event.payload["absorbed_session_ids"]
            store = memory.mark_crystallized(store, absorbed)
            store = memory.shed(store, absorbed)
    return store


# ---------------------------------------------------------------------------
# Stateful owner
# ---------------------------------------------------------------------------

class Engine:
    """Single-writer owner of engine state, journal and audit sink.

    All mutations run serially under one lock; reads return immutable
    snapshots and need no coordination. The journal is append-only and
    is the authority for replay checks.
    """

    def __init__(
        self,
        config: EngineConfig,
        compressor: Compressor,
        store: MemoryStore | None = None,
        audit_sink: IO[str] | None = None,
        clock: Callable[[], str] = now_iso,
    ):
        self.config = config
        self.compressor = compressor
        self._state = new_state(config, store)
        self._base_store = self._state.store
        self.journal: list[EngineEvent] = []
        self._audit_sink = audit_sink
        self._clock = clock
        self._lock = threading.Lock()
        self._changed = threading.Condition(self._lock)

    @property
    def state(self) -> EngineState:
        return self._state

    def _record(self, events: Sequence[EngineEvent]) -> None:
        self.journal.extend(events)
        if self._audit_sink is not None:
            for event in events:
                self._audit_sink.write(event.audit_line() + "\n")
            self._audit_sink.flush()
        self._changed.notify_all()

    def ingest(self, content: str) -> list[EngineEvent]:
        with self._lock:
            state, events = ingest(
                self._state, self.config, content, now=self._clock()
            )
            self._state = state
            self._record(events)
            return events

    def propose(self) -> list[EngineEvent]:
        with self._lock:
            state, events = propose(
                self._state, self.config, self.compressor, now=self._clock()
            )
            self._state = state
            self._record(events)
            return events

    def decide(self, proposal_id: str, decision: str,
               rationale: str = "") -> list[EngineEvent]:
        with self._lock:
            state, events = decide(
                self._state, self.config, proposal_id, decision, rationale,
                now=self._clock(),
            )
            self._state = state
            self._record(events)
            return events

    def status(self) -> BudgetReport:
        return status(self._state, self.config)

    def events_since(self, offset: int, wait_ms: int = 0) -> list[EngineEvent]:
        """Journal tail from offset; optionally long-poll for new events."""
        deadline_wait = max(0.0, wait_ms / 1000.0)
        with self._lock:
            if offset < len(self.journal):
                return self.journal[offset:]
            if deadline_wait:
                self._changed.wait(timeout=deadline_wait)
            return self.journal[offset:]

    def replay_store(self) -> MemoryStore:
        with self._lock:
            return replay(self.journal, self._base_store)
