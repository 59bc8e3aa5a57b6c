"""Pluggable compressors that rewrite deep memory from absorbed sessions.

The engine never compresses by itself; it hands deep memory, the
crystallizable records and the compression instruction to a compressor
and routes the proposed rewrite through human approval. Three reference
implementations ship with the engine:

- IdentityCompressor returns deep memory unchanged (exercises rejection
  paths without needing a model).
- TruncatingCompressor performs a deterministic extractive reduction to
  a target token count (drives simulations and tests).
- ExternalCompressor shells out to a configured command, which is the
  integration point for a real model: the request document goes to the
  command's stdin as JSON, the proposed deep content comes back on
  stdout.

Implementations must either be deterministic for identical inputs or
declare themselves non-deterministic, which excludes them from replay
equality checks.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

from .memory import SessionRecord, Tokenizer, BYTES4, count_tokens


class CompressorFailure(RuntimeError):
    """The compressor produced no usable output."""


@runtime_checkable
class Compressor(Protocol):
    deterministic: bool

    def compress(
        self, deep_before: str, records: Sequence[SessionRecord], instruction: str
    ) -> str:
        """Return proposed deep memory content absorbing the records."""
        ...


@dataclass
class IdentityCompressor:
    """Proposes deep memory exactly as it is."""

    deterministic: bool = True

    def compress(
        self, deep_before: str, records: Sequence[SessionRecord], instruction: str
    ) -> str:
        return deep_before if deep_before else "(empty deep memory)"


@dataclass
class TruncatingCompressor:
    """Extractive reduction: keep leading lines up to a token target.

    Joins deep memory with the absorbed records and keeps whole lines
    while they fit the target; the first line that does not fit is cut
    at the byte boundary. Purely mechanical and deterministic, so
    simulations and replay tests can run without a model.
    """

    target_tokens: int = 4_000
    tokenizer: Tokenizer = BYTES4
    deterministic: bool = True

    def compress(
        self, deep_before: str, records: Sequence[SessionRecord], instruction: str
    ) -> str:
        corpus = [deep_before] if deep_before else []
        corpus.extend(rec.content for rec in records)
        kept: list[str] = []
        budget = self.target_tokens
        for line in "\n".join(corpus).split("\n"):
            cost = count_tokens(line + "\n", self.tokenizer)
            if cost <= budget:
                kept.append(line)
                budget -= cost
                continue
            remaining_bytes = max(0, budget * 4 - 1)
            if remaining_bytes:
                clipped = line.encode("utf-8")[:remaining_bytes]
                kept.append(clipped.decode("utf-8", errors="ignore"))
            break
        proposed = "\n".join(kept).rstrip("\n")
        return proposed if proposed else "(empty deep memory)"


@dataclass
class ExternalCompressor:
    """Runs a configured command as the compression backend.

    stdin receives a JSON request: deep_before, the absorbed records
    (id, ordinal, token_count, content), the instruction, and the deep
    memory token budget. stdout must carry the proposed deep content.
    A non-zero exit status or empty output is a CompressorFailure.
    """

    command: Sequence[str]
    token_budget: int = 8_000
    timeout_seconds: float = 120.0
    deterministic: bool = False

    def compress(
        self, deep_before: str, records: Sequence[SessionRecord], instruction: str
    ) -> str:
        request = {
            "deep_before": deep_before,
            "records": [
                {
                    "session_id": rec.session_id,
                    "ordinal": rec.ordinal,
                    "token_count": rec.token_count,
                    "content": rec.content,
                }
                for rec in records
            ],
            "instruction": instruction,
            "token_budget": self.token_budget,
        }
        try:
            result = subprocess.run(
                list(self.command),
                input=json.dumps(request).encode("utf-8"),
                capture_output=True,
                timeout=self.timeout_seconds,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise CompressorFailure(f"compressor command failed: {exc}") from exc
        if result.returncode != 0:
            raise CompressorFailure(
                f"compressor exited {result.returncode}: "
                f"{result.stderr.decode('utf-8', errors='replace')[:500]}"
            )
        proposed = result.stdout.decode("utf-8", errors="replace").strip("\n")
        if not proposed.strip():
            raise CompressorFailure("compressor produced empty output")
        return proposed
