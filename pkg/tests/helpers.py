"""Shared test helpers: store fuzzing and an independent naive re-simulation.

The naive simulator is deliberately written from scratch against the
documented ledger rules, with its own fidelity arithmetic, so it can
serve as an oracle for the production simulator.
"""

from __future__ import annotations

import random
import uuid

from homeostat.memory import (
    DeepMemory,
    MemoryStore,
    SessionRecord,
    count_tokens,
)
from homeostat.simulator import (
    AppendOnly,
    Homeostatic,
    RetrievalFragment,
)

CONTENT_ALPHABET = (
    list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789")
    + list(" =-#_.,:;!?()[]{}'\"/\\|@$%^&*+~`<>")
    + ["\n", "\n", "\n", " ", " ", "é", "ß", "軸", "Ω", "🎯", "\r"]
)
TRICKY_LINES = [
    "===DEEP_MEMORY rev=9 tokens=9===",
    "===RECENT_CONTEXT cap=1===",
    "===END===",
    "---SESSION id=x ordinal=1 tokens=1 crystallized=0 at=t---",
    "#CHECKSUM deadbeef",
    "#HOMEOSTAT v1 tokenizer=bytes4 checksum=crc32",
    " === leading space then marker",
    "   --- deeper indent marker",
    "# plain comment-looking line",
    "--- not a real marker",
    "=== also not ===",
]


def random_content(rng: random.Random, max_len: int = 120) -> str:
    pieces: list[str] = []
    for _ in range(rng.randint(1, max_len)):
        pieces.append(rng.choice(CONTENT_ALPHABET))
    if rng.random() < 0.4:
        insert_at = rng.randint(0, len(pieces))
        pieces[insert_at:insert_at] = ["\n", rng.choice(TRICKY_LINES), "\n"]
    text = "".join(pieces)
    return text if text else "x"


def random_store(rng: random.Random) -> MemoryStore:
    """A structurally valid store with adversarial content."""
    deep_content = random_content(rng) if rng.random() < 0.9 else ""
    deep = DeepMemory(
        content=deep_content,
        token_count=count_tokens(deep_content),
        revision=rng.randint(0, 50),
        last_rewrite_at="2026-01-0%dT0%d:00:00+00:00" % (rng.randint(1, 9), rng.randint(0, 9)),
    )
    records = []
    ordinal = 0
    for _ in range(rng.randint(0, 6)):
        ordinal += rng.randint(1, 3)  # gaps are legal; order is not optional
        content = random_content(rng)
        records.append(
            SessionRecord(
                session_id=str(uuid.UUID(int=rng.getrandbits(128))),
                ordinal=ordinal,
                content=content,
                token_count=count_tokens(content),
                crystallized=rng.random() < 0.3,
                created_at="2026-02-1%dT1%d:30:00+00:00" % (rng.randint(0, 9), rng.randint(0, 9)),
            )
        )
    return MemoryStore(
        deep=deep,
        recent=tuple(records),
        recent_soft_cap=rng.choice([1000, 8000, 20000]),
        profile_name=rng.choice(["default", "lab-a", "ch.2"]),
    )


# ---------------------------------------------------------------------------
# Naive re-simulation (independent oracle)
# ---------------------------------------------------------------------------

def _naive_fidelity(degradation_rate: float, position: int) -> float:
    loss = degradation_rate * position / 100000.0
    if loss > 1.0:
        return 0.0
    return 1.0 - loss


def naive_rows(workload, strategy, profile, gate, boundary):
    """Step-by-step re-simulation sharing no ledger code with the library.

    Returns tuples shaped like SeriesRow fields, in session order.
    """
    sizes = list(workload.sizes())
    out = []
    if isinstance(strategy, AppendOnly):
        total = 0
        for n, g in enumerate(sizes, 1):
            total = total + g
            out.append((n, strategy.label, total, total,
                        _naive_fidelity(profile.degradation_rate, total),
                        1.0, 1.0, total > boundary))
        return out

    if isinstance(strategy, RetrievalFragment):
        spent = 0
        for n, g in enumerate(sizes, 1):
            got = strategy.fragments_per_query
            if n - 1 < got:
                got = n - 1
            window = got * strategy.fragment_tokens + g
            spent += g + got * strategy.fragment_tokens
            out.append((n, strategy.label, window, spent,
                        _naive_fidelity(profile.degradation_rate, window),
                        1.0, min(n, strategy.fragments_per_query + 1) / n,
                        window > boundary))
        return out

    assert isinstance(strategy, Homeostatic)
    # Trigger point re-derived by linear search instead of the closed form.
    trigger = None
    if strategy.trigger_policy is not None:
        target = gate.fidelity_target
        pos = 0
        while _naive_fidelity(profile.degradation_rate, pos + 1) >= target:
            pos += 1
        gate_pos = pos
        if strategy.trigger_policy == "at-gate":
            trigger = gate_pos
        else:
            trigger = int(gate_pos * gate.trigger_fraction)
    deep = 0
    recent = 0
    retained = 1.0
    spent = 0
    for n, g in enumerate(sizes, 1):
        spent += g
        pour = g
        if trigger is not None:
            while recent + pour >= trigger:
                pour = pour - (trigger - recent)
                retained = retained * _naive_fidelity(
                    profile.degradation_rate, trigger
                )
                deep = int(
                    strategy.base_tokens
                    + strategy.compression_ratio * (deep + trigger)
                )
                spent += deep
                recent = 0
        recent += pour
        out.append((n, strategy.label, deep + recent, spent,
                    _naive_fidelity(profile.degradation_rate, recent),
                    retained, 1.0, deep + recent > boundary))
        if (strategy.absorption_cadence is not None
                and n % strategy.absorption_cadence == 0 and recent > 0):
            retained = retained * _naive_fidelity(profile.degradation_rate, recent)
            deep = int(strategy.base_tokens
                       + strategy.compression_ratio * (deep + recent))
            spent += deep
            recent = 0
    return out
