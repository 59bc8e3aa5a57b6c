"""Fidelity budget mathematics for bounded, lossy context channels.

A channel is described by a ModelProfile: a hard window size W and a
degradation rate D expressed as fractional fidelity loss per 100,000
tokens. From those two numbers everything else is derived:

- fidelity_at(P): output quality at token position P. The default model
  is linear, 1 - D*P/100K, clamped at zero. The three-region shape keeps
  the linear form up to an onset position and degrades superlinearly
  past it (the collapse region).
- gate_position: the position where fidelity crosses the configured
  target. Depends only on D and the target, never on window size.
- effective_trigger: the earlier position where compression should
  actually fire, leaving headroom for the compression pass itself to run
  inside the same channel. Default: half the gate.
- effective_fidelity: encoding-aware refinement over content segments.
  A segment aligned with the channel's existing encoding ("warm") costs
  less than novel, unaligned content ("cold"); each segment scales D by
  its encoding_factor.

All functions are pure and operate on immutable values; call them from
any number of threads without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

# Degradation rates are defined per this many tokens.
DEGRADATION_UNIT = 100_000


class BudgetError(ValueError):
    """Invalid channel profile or gate configuration."""


def _whole_tokens(value: float) -> int:
    """Floor to whole tokens, absorbing float noise just below integers."""
    return math.floor(round(value, 6))


def _ceil_tokens(value: float) -> int:
    return math.ceil(round(value, 6))


@dataclass(frozen=True)
class ModelProfile:
    """A bounded lossy channel: window size W, degradation rate D.

    degradation_rate is a fraction per 100K tokens, e.g. 0.02 means the
    channel loses 2% fidelity per 100K tokens of accumulated context.
    """

    name: str
    window_size: int
    degradation_rate: float

    def __post_init__(self) -> None:
        if self.window_size <= 0:
            raise BudgetError(f"window_size must be > 0, got {self.window_size}")
        if self.degradation_rate <= 0:
            raise BudgetError(
                f"degradation_rate must be > 0, got {self.degradation_rate}"
            )


@dataclass(frozen=True)
class GateConfig:
    """Where compression must fire.

    fidelity_target is the acceptable fidelity at compression time, a
    design parameter of the application domain. trigger_fraction places
    the effective trigger as a fraction of the gate position (default
    0.5: fire at half the gate, preserving headroom for the compression
    operation itself).
    """

    fidelity_target: float
    trigger_fraction: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.fidelity_target < 1.0:
            raise BudgetError(
                f"fidelity_target must be in (0,1), got {self.fidelity_target}"
            )
        if not 0.0 < self.trigger_fraction <= 1.0:
            raise BudgetError(
                f"trigger_fraction must be in (0,1], got {self.trigger_fraction}"
            )


@dataclass(frozen=True)
class CurveShape:
    """Shape of the degradation curve.

    kind "linear" is the first-order model. kind "three-region" equals
    the linear shape below onset_position and degrades faster above it:

        loss(P) = (D*P/100K) * (1 + 2*((P - onset)/100K)**collapse_exponent)

    The multiplier is 1 at the onset, so the curve is continuous. The
    true shape is empirical and unmeasured; onset and exponent are
    parameters, defaulting to an onset at 100K tokens and a quadratic
    collapse.
    """

    kind: str = "linear"
    onset_position: int = 100_000
    collapse_exponent: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "three-region"):
            raise BudgetError(f"unknown curve kind: {self.kind!r}")
        if self.kind == "three-region":
            if self.onset_position < 0:
                raise BudgetError("onset_position must be >= 0")
            if self.collapse_exponent < 1:
                raise BudgetError("collapse_exponent must be >= 1")


LINEAR = CurveShape(kind="linear")


@dataclass(frozen=True)
class Segment:
    """A run of injected content with an encoding alignment factor.

    encoding_factor scales the channel's degradation rate for this
    segment: 1.0 is cold injection (novel content at full cost), values
    below 1.0 are warm injection (content aligned with the channel's
    existing encoding, cheaper to carry).
    """

    token_count: int
    encoding_factor: float = 1.0

    def __post_init__(self) -> None:
        if self.token_count < 0:
            raise BudgetError(f"token_count must be >= 0, got {self.token_count}")
        if self.encoding_factor <= 0:
            raise BudgetError(
                f"encoding_factor must be > 0, got {self.encoding_factor}"
            )


def fidelity_at(
    profile: ModelProfile, position: int | float, shape: CurveShape = LINEAR
) -> float:
    """Fidelity of the channel's output at a token position.

    Linear: 1 - D*position/100K, clamped below at 0. Three-region:
    identical to linear up to shape.onset_position, superlinear past it.
    """
    if position < 0:
        raise BudgetError(f"position must be >= 0, got {position}")
    loss = profile.degradation_rate * position / DEGRADATION_UNIT
    if shape.kind == "three-region" and position > shape.onset_position:
        overshoot = (position - shape.onset_position) / DEGRADATION_UNIT
        loss *= 1.0 + 2.0 * overshoot**shape.collapse_exponent
    return max(0.0, 1.0 - loss)


def gate_position(profile: ModelProfile, gate: GateConfig) -> int:
    """Token position where linear fidelity crosses the target.

        gate = 100,000 * (1 - fidelity_target) / D

    Independent of window size: a larger window extends capacity, not
    fidelity duration. May exceed the window; see gate_unreachable.
    """
    exact = DEGRADATION_UNIT * (1.0 - gate.fidelity_target) / profile.degradation_rate
    return _whole_tokens(exact)


def gate_unreachable(profile: ModelProfile, gate: GateConfig) -> bool:
    """True when the window fills before fidelity reaches the target.

    A gate at or beyond the window cannot fire; the channel hits its
    hard capacity limit first.
    """
    return gate_position(profile, gate) >= profile.window_size


def effective_trigger(gate_pos: int, gate: GateConfig) -> int:
    """Position where compression actually fires: a fraction of the gate."""
    if gate_pos < 0:
        raise BudgetError(f"gate position must be >= 0, got {gate_pos}")
    return _whole_tokens(gate_pos * gate.trigger_fraction)


def effective_fidelity(segments: Iterable[Segment], profile: ModelProfile) -> float:
    """Encoding-aware fidelity over an ordered list of segments.

    1 - sum_i(D * encoding_factor_i * tokens_i) / 100K, clamped at 0.
    With every factor at 1.0 this equals fidelity_at of the summed
    position under the linear shape. An empty list is a fresh channel
    (fidelity 1.0).
    """
    # D is factored out of the sum so that uniform factors reduce
    # bit-exactly to the plain curve at the summed position.
    weighted = sum(seg.encoding_factor * seg.token_count for seg in segments)
    loss = profile.degradation_rate * weighted / DEGRADATION_UNIT
    return max(0.0, 1.0 - loss)


def quality_budget(profile: ModelProfile, position: int, gate_pos: int) -> int:
    """Tokens remaining before the earlier of the gate and the window.

    The remaining context window is not empty space; it is the quality
    budget for the next response.
    """
    if position < 0:
        raise BudgetError(f"position must be >= 0, got {position}")
    return max(0, min(profile.window_size, gate_pos) - position)


@dataclass(frozen=True)
class GateReport:
    """Gate arithmetic bundled for reporting surfaces (CLI, status)."""

    gate_position: int
    effective_trigger: int
    gate_unreachable: bool


def gate_report(profile: ModelProfile, gate: GateConfig) -> GateReport:
    pos = gate_position(profile, gate)
    return GateReport(
        gate_position=pos,
        effective_trigger=effective_trigger(pos, gate),
        gate_unreachable=pos >= profile.window_size,
    )
