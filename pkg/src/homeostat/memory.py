"""Two-layer persistent memory: rewrite-only deep layer + append recent layer.

Deep Memory is replaced wholesale on every rewrite, never extended in
place; its revision counter increments by exactly one per rewrite.
Recent Context is an append-only list of session records under an
advisory soft cap; records are shed only after they have been marked
crystallized (absorbed into deep memory).

MemoryStore values are immutable; every operation returns a new store.
A single writer should own the authoritative store, with readers holding
snapshots.
"""

from __future__ import annotations

import math
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Callable, Iterable

DEFAULT_RECENT_SOFT_CAP = 8_000
DEFAULT_DEEP_CAP = 8_000

EPOCH_ISO = "1970-01-01T00:00:00+00:00"


class MemoryStoreError(ValueError):
    """Base class for memory-store violations."""


class EmptyContentError(MemoryStoreError):
    pass


class UnknownSessionError(MemoryStoreError):
    pass


class NotCrystallizedError(MemoryStoreError):
    pass


class DeepCapExceededError(MemoryStoreError):
    pass


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# Tokenizers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tokenizer:
    """Deterministic token counter identified by a stable id.

    The id travels in the persistence file header so counts can be
    re-verified on load.
    """

    id: str
    count: Callable[[str], int]


def _count_bytes4(content: str) -> int:
    return math.ceil(len(content.encode("utf-8")) / 4)


# Default heuristic: one token per 4 bytes of UTF-8, rounded up.
BYTES4 = Tokenizer(id="bytes4", count=_count_bytes4)

_TOKENIZERS: dict[str, Tokenizer] = {BYTES4.id: BYTES4}


def register_tokenizer(tokenizer: Tokenizer) -> None:
    _TOKENIZERS[tokenizer.id] = tokenizer


def get_tokenizer(tokenizer_id: str) -> Tokenizer:
    try:
        return _TOKENIZERS[tokenizer_id]
    except KeyError:
        raise MemoryStoreError(f"unknown tokenizer id: {tokenizer_id!r}") from None


def count_tokens(content: str, tokenizer: Tokenizer = BYTES4) -> int:
    """Token count of content under the given tokenizer (deterministic)."""
    return tokenizer.count(content)


# ---------------------------------------------------------------------------
# Store types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeepMemory:
    """The rewrite-only long-term layer."""

    content: str = ""
    token_count: int = 0
    revision: int = 0
    last_rewrite_at: str = EPOCH_ISO


@dataclass(frozen=True)
class SessionRecord:
    """One session's accumulated content in the recent layer."""

    session_id: str
    ordinal: int
    content: str
    token_count: int
    crystallized: bool = False
    created_at: str = EPOCH_ISO


@dataclass(frozen=True)
class MemoryStore:
    """Deep memory plus ordered recent records, with token accounting."""

    deep: DeepMemory = field(default_factory=DeepMemory)
    recent: tuple[SessionRecord, ...] = ()
    recent_soft_cap: int = DEFAULT_RECENT_SOFT_CAP
    profile_name: str = "default"
    tokenizer_id: str = BYTES4.id

    @property
    def total_footprint(self) -> int:
        return self.deep.token_count + sum(r.token_count for r in self.recent)

    @property
    def recent_tokens(self) -> int:
        return sum(r.token_count for r in self.recent)

    def record(self, session_id: str) -> SessionRecord:
        for rec in self.recent:
            if rec.session_id == session_id:
                return rec
        raise UnknownSessionError(f"unknown session id: {session_id}")


def empty_store(
    recent_soft_cap: int = DEFAULT_RECENT_SOFT_CAP,
    profile_name: str = "default",
    tokenizer_id: str = BYTES4.id,
) -> MemoryStore:
    get_tokenizer(tokenizer_id)  # fail fast on unknown ids
    return MemoryStore(
        recent_soft_cap=recent_soft_cap,
        profile_name=profile_name,
        tokenizer_id=tokenizer_id,
    )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def append_session(
    store: MemoryStore,
    content: str,
    *,
    session_id: str | None = None,
    created_at: str | None = None,
) -> tuple[MemoryStore, SessionRecord]:
    """Append one session record with the next ordinal.

    Deep memory is untouched; the footprint grows by the record's token
    count. The soft cap is advisory and never blocks an append.
    """
    if not content:
        raise EmptyContentError("session content must be non-empty")
    tokenizer = get_tokenizer(store.tokenizer_id)
    next_ordinal = store.recent[-1].ordinal + 1 if store.recent else 1
    record = SessionRecord(
        session_id=session_id or str(uuid.uuid4()),
        ordinal=next_ordinal,
        content=content,
        token_count=count_tokens(content, tokenizer),
        crystallized=False,
        created_at=created_at or now_iso(),
    )
    return replace(store, recent=store.recent + (record,)), record


def mark_crystallized(store: MemoryStore, session_ids: Iterable[str]) -> MemoryStore:
    """Flag records as absorbed and therefore eligible for shedding.

    Idempotent; unknown ids are an error naming the id.
    """
    ids = set(session_ids)
    known = {r.session_id for r in store.recent}
    for sid in ids:
        if sid not in known:
            raise UnknownSessionError(f"unknown session id: {sid}")
    recent = tuple(
        replace(r, crystallized=True) if r.session_id in ids else r
        for r in store.recent
    )
    return replace(store, recent=recent)


def apply_rewrite(
    store: MemoryStore,
    new_deep_content: str,
    *,
    deep_cap: int | None = None,
    rewritten_at: str | None = None,
) -> MemoryStore:
    """Replace deep memory wholesale and increment its revision.

    The replacement is unconditional even when the content is identical:
    a rewrite is a replacement, not a diff. Content over the deep cap is
    rejected before any state changes.
    """
    if not new_deep_content:
        raise EmptyContentError("deep memory content must be non-empty")
    tokenizer = get_tokenizer(store.tokenizer_id)
    tokens = count_tokens(new_deep_content, tokenizer)
    if deep_cap is not None and tokens > deep_cap:
        raise DeepCapExceededError(
            f"rewrite is {tokens} tokens, deep memory cap is {deep_cap}"
        )
    deep = DeepMemory(
        content=new_deep_content,
        token_count=tokens,
        revision=store.deep.revision + 1,
        last_rewrite_at=rewritten_at or now_iso(),
    )
    return replace(store, deep=deep)


def shed(store: MemoryStore, session_ids: Iterable[str]) -> MemoryStore:
    """Remove crystallized records; refuse to shed anything unabsorbed."""
    ids = set(session_ids)
    if not ids:
        return store
    for sid in ids:
        record = store.record(sid)  # raises on unknown ids
        if not record.crystallized:
            raise NotCrystallizedError(
                f"session {sid} is not crystallized; crystallize before shedding"
            )
    recent = tuple(r for r in store.recent if r.session_id not in ids)
    return replace(store, recent=recent)
