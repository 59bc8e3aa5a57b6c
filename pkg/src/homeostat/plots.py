"""Figure rendering for simulator series and fidelity curves.

Charts are written straight to files (PNG, PDF or SVG by extension) so
the CLI can drop them alongside the CSV export. Rendering is headless;
no display is required.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .budget import (
    CurveShape,
    GateConfig,
    LINEAR,
    ModelProfile,
    effective_trigger,
    fidelity_at,
    gate_position,
)
from .simulator import DivergenceSeries

_STRATEGY_COLORS = {
    "append_only": "#c23b22",
    "homeostatic": "#1f4e9c",
    "retrieval": "#3a7d44",
}


def plot_divergence(
    series: DivergenceSeries, path: str, boundary: int | None = None
) -> str:
    """Footprint over sessions, one line per strategy.

    The boundary, when given, is drawn as a dotted horizontal line; the
    sawtooth of a bounded strategy and the linear growth of an unbounded
    one are the point of the chart.
    """
    fig, ax = plt.subplots(figsize=(9, 5))
    for label in series.strategies:
        rows = series.for_strategy(label)
        ax.plot(
            [r.session for r in rows],
            [r.footprint_tokens for r in rows],
            label=label,
            color=_STRATEGY_COLORS.get(label),
            linewidth=2,
        )
    if boundary is not None:
        ax.axhline(boundary, color="#d98e04", linestyle=":", linewidth=1.5,
                   label=f"boundary ({boundary:,} tokens)")
    ax.set_xlabel("session")
    ax.set_ylabel("memory footprint (tokens)")
    ax.set_title("Footprint divergence by persistence strategy")
    ax.grid(True, color="0.9")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_fidelity_curve(
    profile: ModelProfile,
    gate: GateConfig,
    path: str,
    curve: CurveShape | None = None,
    max_position: int | None = None,
) -> str:
    """The degradation curve with the gate and trigger marked.

    Always draws the linear model; when a three-region shape is given it
    is overlaid so the collapse region past the onset is visible.
    """
    gate_pos = gate_position(profile, gate)
    trigger = effective_trigger(gate_pos, gate)
    limit = max_position or max(int(gate_pos * 1.6), profile.window_size // 2, 1000)
    xs = list(range(0, limit + 1, max(1, limit // 400)))

    fig, ax = plt.subplots(figsize=(9, 5))
    ax.plot(xs, [fidelity_at(profile, x) for x in xs],
            color="#1f4e9c", linewidth=2, label="linear model")
    if curve is not None and curve.kind == "three-region":
        ax.plot(xs, [fidelity_at(profile, x, curve) for x in xs],
                color="#c23b22", linewidth=2, label="three-region shape")
    ax.axhline(gate.fidelity_target, color="#3a7d44", linestyle=":",
               label=f"fidelity target ({gate.fidelity_target:.3f})")
    ax.axvline(gate_pos, color="#3a7d44", linestyle="--", linewidth=1,
               label=f"gate ({gate_pos:,} tokens)")
    ax.axvline(trigger, color="0.4", linestyle="--", linewidth=1,
               label=f"effective trigger ({trigger:,} tokens)")
    ax.set_xlabel("position (tokens)")
    ax.set_ylabel("fidelity")
    ax.set_ylim(bottom=max(0.0, min(fidelity_at(profile, limit), gate.fidelity_target) - 0.05),
                top=1.005)
    ax.set_title(f"Degradation curve: {profile.name} "
                 f"(D={profile.degradation_rate:.3%} per 100K)")
    ax.grid(True, color="0.9")
    ax.legend(loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
