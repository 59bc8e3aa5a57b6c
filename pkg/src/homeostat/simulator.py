"""Desk-scale divergence simulator for persistence architectures.

Three strategies face the same synthetic session workload:

- append_only carries the whole history forward; footprint grows without
  bound and generation fidelity decays with it.
- homeostatic absorbs accumulated sessions into a compressed deep layer
  on a cadence and/or when the channel position crosses a compression
  trigger; footprint sawtooths and stays bounded.
- retrieval stores everything in an external archive and re-injects a
  fixed number of fragments per query; footprint stays bounded but the
  fraction of accumulated signal co-resident in the window shrinks as
  history grows.

Signal ledger (a model, not a measurement): every session injects one
signal unit. Each compression multiplies retained signal by the channel
fidelity at the position where the compression runs; generation reads
signal at the fidelity of the current position. Compressed deep content
re-enters the channel aligned with its encoding (warm), so it
contributes storage footprint but negligible channel position; cold
appended history counts at full position. Trigger-driven compression
fires exactly at the threshold position: tokens beyond the threshold
land in the fresh accumulation that follows.

Footprint and cumulative expenditure are reported separately: footprint
is tokens held at session end, cumulative expenditure is all tokens the
strategy has written into the system (workload content, plus compression
rewrites for homeostatic, plus re-injected fragments for retrieval).

Everything is deterministic under a fixed seed.
"""

from __future__ import annotations

import io
import random
from dataclasses import dataclass
from typing import Sequence

from .budget import GateConfig, ModelProfile, effective_trigger, fidelity_at, gate_position

CSV_HEADER = (
    "session,strategy,footprint_tokens,cumulative_tokens,"
    "fidelity,retained_signal,coherence,crossed"
)


class SimulationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Workloads
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantGrowth:
    tokens_per_session: int

    def sizes(self, session_count: int) -> list[int]:
        if self.tokens_per_session < 1:
            raise SimulationError("constant growth must be >= 1 token/session")
        return [self.tokens_per_session] * session_count


@dataclass(frozen=True)
class SeededRandomGrowth:
    mean: float
    spread: float
    seed: int

    def sizes(self, session_count: int) -> list[int]:
        if self.mean <= 0 or self.spread < 0:
            raise SimulationError("random growth needs mean > 0 and spread >= 0")
        rng = random.Random(self.seed)
        return [
            max(1, round(rng.uniform(self.mean - self.spread, self.mean + self.spread)))
            for _ in range(session_count)
        ]


GrowthModel = ConstantGrowth | SeededRandomGrowth


@dataclass(frozen=True)
class Workload:
    session_count: int
    growth: GrowthModel

    def __post_init__(self) -> None:
        if self.session_count < 1:
            raise SimulationError(
                f"session_count must be >= 1, got {self.session_count}"
            )

    def sizes(self) -> list[int]:
        return self.growth.sizes(self.session_count)


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AppendOnly:
    label: str = "append_only"


@dataclass(frozen=True)
class Homeostatic:
    """Absorb on a session cadence and/or at a channel-position trigger.

    compression_ratio is output/input size for an absorption; base_tokens
    is the fixed deep-memory overhead every rewrite carries. A ratio of
    1.0 with base 0 degenerates to append-only. trigger_policy selects
    the firing position for position-driven compression: "effective"
    (the early trigger) or "at-gate" (the fidelity gate itself). Either
    mechanism can be disabled (cadence=None / trigger_policy=None).
    """

    absorption_cadence: int | None = 5
    compression_ratio: float = 0.2
    base_tokens: int = 1_000
    trigger_policy: str | None = "effective"
    label: str = "homeostatic"

    def __post_init__(self) -> None:
        if not 0.0 < self.compression_ratio <= 1.0:
            raise SimulationError(
                f"compression_ratio must be in (0,1], got {self.compression_ratio}"
            )
        if self.absorption_cadence is not None and self.absorption_cadence < 1:
            raise SimulationError("absorption_cadence must be >= 1")
        if self.trigger_policy not in (None, "effective", "at-gate"):
            raise SimulationError(
                f"trigger_policy must be effective or at-gate, got {self.trigger_policy!r}"
            )
        if self.base_tokens < 0:
            raise SimulationError("base_tokens must be >= 0")


@dataclass(frozen=True)
class RetrievalFragment:
    fragments_per_query: int = 4
    fragment_tokens: int = 400
    label: str = "retrieval"

    def __post_init__(self) -> None:
        if self.fragments_per_query < 1 or self.fragment_tokens < 1:
            raise SimulationError("retrieval needs >= 1 fragment of >= 1 token")


Strategy = AppendOnly | Homeostatic | RetrievalFragment


# ---------------------------------------------------------------------------
# Series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesRow:
    session: int
    strategy: str
    footprint_tokens: int
    cumulative_tokens: int
    fidelity: float
    retained_signal: float
    coherence: float
    crossed: bool


@dataclass(frozen=True)
class DivergenceSeries:
    rows: tuple[SeriesRow, ...]

    def for_strategy(self, label: str) -> tuple[SeriesRow, ...]:
        return tuple(r for r in self.rows if r.strategy == label)

    @property
    def strategies(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row.strategy, None)
        return tuple(sorted(seen))


# ---------------------------------------------------------------------------
# Core simulation
# ---------------------------------------------------------------------------

def _trigger_point(strategy: Homeostatic, profile: ModelProfile,
                   gate: GateConfig) -> int | None:
    if strategy.trigger_policy is None:
        return None
    gate_pos = gate_position(profile, gate)
    if strategy.trigger_policy == "at-gate":
        return gate_pos
    return effective_trigger(gate_pos, gate)


def _simulate_append_only(
    sizes: Sequence[int], profile: ModelProfile, boundary: int, label: str
) -> list[SeriesRow]:
    rows = []
    footprint = 0
    for n, grown in enumerate(sizes, start=1):
        footprint += grown
        rows.append(
            SeriesRow(
                session=n,
                strategy=label,
                footprint_tokens=footprint,
                cumulative_tokens=footprint,
                fidelity=fidelity_at(profile, footprint),
                retained_signal=1.0,
                coherence=1.0,
                crossed=footprint > boundary,
            )
        )
    return rows


def _simulate_homeostatic(
    sizes: Sequence[int],
    strategy: Homeostatic,
    profile: ModelProfile,
    gate: GateConfig,
    boundary: int,
) -> list[SeriesRow]:
    trigger = _trigger_point(strategy, profile, gate)
    if trigger is not None and trigger < 1:
        raise SimulationError(
            "compression trigger position is below one token; "
            "raise fidelity headroom or disable the trigger policy"
        )
    rows = []
    deep = 0          # compressed layer, warm: storage but no channel position
    recent = 0        # cold accumulation since the last absorption
    retained = 1.0
    expenditure = 0

    def absorb(position: int) -> None:
        nonlocal deep, recent, retained, expenditure
        retained *= fidelity_at(profile, position)
        deep = int(strategy.base_tokens + strategy.compression_ratio * (deep + position))
        expenditure += deep
        recent = 0

    for n, grown in enumerate(sizes, start=1):
        expenditure += grown
        pour = grown
        if trigger is not None:
            while recent + pour >= trigger:
                pour -= trigger - recent
                absorb(trigger)
        recent += pour
        rows.append(
            SeriesRow(
                session=n,
                strategy=strategy.label,
                footprint_tokens=deep + recent,
                cumulative_tokens=expenditure,
                fidelity=fidelity_at(profile, recent),
                retained_signal=retained,
                coherence=1.0,
                crossed=deep + recent > boundary,
            )
        )
        if (
            strategy.absorption_cadence is not None
            and n % strategy.absorption_cadence == 0
            and recent > 0
        ):
            absorb(recent)
    return rows


def _simulate_retrieval(
    sizes: Sequence[int],
    strategy: RetrievalFragment,
    profile: ModelProfile,
    boundary: int,
) -> list[SeriesRow]:
    rows = []
    expenditure = 0
    for n, grown in enumerate(sizes, start=1):
        retrieved = min(strategy.fragments_per_query, n - 1)
        window = retrieved * strategy.fragment_tokens + grown
        expenditure += grown + retrieved * strategy.fragment_tokens
        rows.append(
            SeriesRow(
                session=n,
                strategy=strategy.label,
                footprint_tokens=window,
                cumulative_tokens=expenditure,
                fidelity=fidelity_at(profile, window),
                retained_signal=1.0,
                coherence=min(n, strategy.fragments_per_query + 1) / n,
                crossed=window > boundary,
            )
        )
    return rows


def run(
    workload: Workload,
    strategies: Sequence[Strategy],
    profile: ModelProfile,
    gate: GateConfig,
    boundary: int,
) -> DivergenceSeries:
    """Simulate every strategy over the workload.

    Rows are merged deterministically by (strategy label, session).
    Strategy simulations are independent of one another.
    """
    if boundary < 0:
        raise SimulationError(f"boundary must be >= 0, got {boundary}")
    labels = [s.label for s in strategies]
    if len(set(labels)) != len(labels):
        raise SimulationError(f"duplicate strategy labels: {labels}")
    sizes = workload.sizes()
    rows: list[SeriesRow] = []
    for strategy in strategies:
        if isinstance(strategy, AppendOnly):
            rows.extend(_simulate_append_only(sizes, profile, boundary, strategy.label))
        elif isinstance(strategy, Homeostatic):
            rows.extend(_simulate_homeostatic(sizes, strategy, profile, gate, boundary))
        elif isinstance(strategy, RetrievalFragment):
            rows.extend(_simulate_retrieval(sizes, strategy, profile, boundary))
        else:
            raise SimulationError(f"unknown strategy: {strategy!r}")
    rows.sort(key=lambda r: (r.strategy, r.session))
    return DivergenceSeries(rows=tuple(rows))


def crossing_session(
    series: DivergenceSeries, strategy_label: str, boundary: int
) -> int | None:
    """First session whose footprint strictly exceeds the boundary."""
    strategy_rows = series.for_strategy(strategy_label)
    if not strategy_rows:
        raise SimulationError(f"series has no strategy {strategy_label!r}")
    for row in strategy_rows:
        if row.footprint_tokens > boundary:
            return row.session
    return None


# ---------------------------------------------------------------------------
# Compression-timing experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParadoxTrial:
    trial: int
    effective_retained: float
    at_gate_retained: float
    effective_compressions: int
    at_gate_compressions: int


@dataclass(frozen=True)
class ParadoxComparison:
    """Early-trigger vs at-gate compression under identical workloads.

    retained values are end-of-run readouts: the signal ledger after all
    compression charges, read out once at the final channel position.
    """

    trials: tuple[ParadoxTrial, ...]
    effective_trigger_position: int
    at_gate_position: int

    @property
    def mean_effective(self) -> float:
        return sum(t.effective_retained for t in self.trials) / len(self.trials)

    @property
    def mean_at_gate(self) -> float:
        return sum(t.at_gate_retained for t in self.trials) / len(self.trials)

    @property
    def effective_wins(self) -> int:
        return sum(
            1 for t in self.trials if t.effective_retained > t.at_gate_retained
        )


def _retained_with_trigger(
    sizes: Sequence[int], trigger: int, profile: ModelProfile
) -> tuple[float, int]:
    """Signal retention with compression firing exactly at a position.

    Multiplies the ledger by fidelity at the trigger position for every
    firing, then by fidelity at the final position for the end-of-run
    readout. Compressed content re-enters warm, so the position resets
    to the overflow beyond the trigger.
    """
    if trigger < 1:
        raise SimulationError("trigger position must be >= 1 token")
    retained = 1.0
    position = 0
    compressions = 0
    for grown in sizes:
        pour = grown
        while position + pour >= trigger:
            pour -= trigger - position
            retained *= fidelity_at(profile, trigger)
            compressions += 1
            position = 0
        position += pour
    return retained * fidelity_at(profile, position), compressions


def paradox_experiment(
    workload: Workload,
    profile: ModelProfile,
    gate: GateConfig,
    trials: int,
    seed: int,
) -> ParadoxComparison:
    """Compare compression timing policies over seeded workloads.

    Each trial draws its own workload (the base workload's shape,
    reseeded per trial) and runs the same homeostatic channel twice,
    differing only in where compression fires: at the effective trigger
    or at the fidelity gate itself. Firing late costs more retained
    signal per compression; firing early splits the same total
    degradation into smaller charges.
    """
    if trials < 1:
        raise SimulationError(f"trials must be >= 1, got {trials}")
    gate_pos = gate_position(profile, gate)
    trigger = effective_trigger(gate_pos, gate)
    results = []
    for k in range(trials):
        growth = workload.growth
        if isinstance(growth, SeededRandomGrowth):
            growth = SeededRandomGrowth(
                mean=growth.mean, spread=growth.spread, seed=seed + k
            )
        sizes = Workload(workload.session_count, growth).sizes()
        eff_retained, eff_count = _retained_with_trigger(sizes, trigger, profile)
        gate_retained, gate_count = _retained_with_trigger(sizes, gate_pos, profile)
        results.append(
            ParadoxTrial(
                trial=k,
                effective_retained=eff_retained,
                at_gate_retained=gate_retained,
                effective_compressions=eff_count,
                at_gate_compressions=gate_count,
            )
        )
    return ParadoxComparison(
        trials=tuple(results),
        effective_trigger_position=trigger,
        at_gate_position=gate_pos,
    )


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def render_series(series: DivergenceSeries) -> bytes:
    """CSV bytes: stable column order, 6-decimal floats, LF, UTF-8."""
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for row in series.rows:
        out.write(
            f"{row.session},{row.strategy},{row.footprint_tokens},"
            f"{row.cumulative_tokens},{row.fidelity:.6f},"
            f"{row.retained_signal:.6f},{row.coherence:.6f},"
            f"{'true' if row.crossed else 'false'}\n"
        )
    return out.getvalue().encode("utf-8")


def export_series(series: DivergenceSeries, destination) -> int:
    """Write the CSV to a path or binary sink; returns bytes written."""
    data = render_series(series)
    if isinstance(destination, str):
        with open(destination, "wb") as fh:
            fh.write(data)
    else:
        destination.write(data)
    return len(data)


def read_series(source) -> DivergenceSeries:
    """Parse the CSV form back into a series (inverse of render)."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        with open(source, "rb") as fh:
            text = fh.read().decode("utf-8")
    else:
        text = source.read().decode("utf-8")
    lines = text.split("\n")
    if not lines or lines[0] != CSV_HEADER:
        raise SimulationError(f"unexpected header: {lines[0]!r}")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        (session, strategy, footprint, cumulative,
         fidelity, retained, coherence, crossed) = line.split(",")
        rows.append(
            SeriesRow(
                session=int(session),
                strategy=strategy,
                footprint_tokens=int(footprint),
                cumulative_tokens=int(cumulative),
                fidelity=float(fidelity),
                retained_signal=float(retained),
                coherence=float(coherence),
                crossed=crossed == "true",
            )
        )
    return DivergenceSeries(rows=tuple(rows))


# ---------------------------------------------------------------------------
# Bundled preset
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationSpec:
    """A complete, runnable parameter set for run()."""

    workload: Workload
    strategies: tuple[Strategy, ...]
    profile: ModelProfile
    gate: GateConfig
    boundary: int

    def run(self) -> DivergenceSeries:
        return run(self.workload, self.strategies, self.profile, self.gate,
                   self.boundary)


def fig2_preset() -> SimulationSpec:
    """The bundled desk-scale divergence preset.

    62 sessions of constant 270-token growth against a 14K-token
    boundary; append-only versus a homeostatic strategy absorbing every
    5 sessions at a 0.2 compression ratio over a 1,000-token deep base.
    """
    return SimulationSpec(
        workload=Workload(session_count=62, growth=ConstantGrowth(270)),
        strategies=(
            AppendOnly(),
            Homeostatic(
                absorption_cadence=5,
                compression_ratio=0.2,
                base_tokens=1_000,
                trigger_policy="effective",
            ),
        ),
        profile=ModelProfile(name="default", window_size=200_000,
                             degradation_rate=0.02),
        gate=GateConfig(fidelity_target=0.975, trigger_fraction=0.5),
        boundary=14_000,
    )
