// Maps /v1 payloads onto what the dashboard displays. Pure presentation:
// every number shown comes from a response field; the only arithmetic here
// is converting server-provided token positions into 0..1 ratios for bar
// widths and formatting values for humans.

import type { ApiEvent, StatusReport } from "./types.js";

export interface GaugeView {
  // All in tokens, straight from the status payload.
  position: number;
  trigger: number;
  gate: number;
  // 0..1 fractions of the gauge's span (the gate) for CSS positioning.
  positionRatio: number;
  triggerRatio: number;
  fidelityText: string;
  budgetText: string;
  zone: "accumulating" | "past-trigger" | "past-gate";
}

export interface DashboardView {
  phase: string;
  phaseLabel: string;
  footprintText: string;
  positionText: string;
  revision: number;
  recentRecords: number;
  gauge: GaugeView;
  pendingProposalId: string | null;
  pastGateWarning: boolean;
  gateUnreachable: boolean;
}

export function formatTokens(value: number): string {
  return value.toLocaleString("en-US");
}

export function formatFidelity(value: number): string {
  return (value * 100).toFixed(2) + "%";
}

const PHASE_LABELS: Record<string, string> = {
  accumulating: "Accumulating",
  trigger_fired: "Trigger fired",
  awaiting_approval: "Awaiting approval",
  rewriting: "Rewriting",
  shedding: "Shedding",
};

function clamp01(value: number): number {
  if (!Number.isFinite(value) || value < 0) return 0;
  return value > 1 ? 1 : value;
}

export function buildDashboard(status: StatusReport): DashboardView {
  const span = status.gate_position > 0 ? status.gate_position : 1;
  const zone =
    status.position_estimate > status.gate_position
      ? "past-gate"
      : status.position_estimate >= status.effective_trigger
        ? "past-trigger"
        : "accumulating";
  const pending = status.pending_proposal;
  return {
    phase: status.phase,
    phaseLabel: PHASE_LABELS[status.phase] ?? status.phase,
    footprintText: formatTokens(status.footprint),
    positionText: formatTokens(status.position_estimate),
    revision: status.deep_revision,
    recentRecords: status.recent_records,
    gauge: {
      position: status.position_estimate,
      trigger: status.effective_trigger,
      gate: status.gate_position,
      positionRatio: clamp01(status.position_estimate / span),
      triggerRatio: clamp01(status.effective_trigger / span),
      fidelityText: formatFidelity(status.fidelity),
      budgetText: formatTokens(status.quality_budget),
      zone,
    },
    pendingProposalId: pending ? pending.proposal_id : null,
    pastGateWarning: Boolean(pending && pending.past_gate) || zone === "past-gate",
    gateUnreachable: status.gate_unreachable,
  };
}

export interface TimelinePoint {
  index: number;
  footprint: number;
  label: string;
  kind: "session" | "absorption";
}

// The footprint timeline is accumulated from the event stream: one point
// per ingested session, plus the drop recorded when records are shed. The
// sawtooth is the approval mechanism made visible.
export function timelineFromEvents(events: ApiEvent[]): TimelinePoint[] {
  const points: TimelinePoint[] = [];
  for (const event of events) {
    if (event.code === "SESSION_INGESTED") {
      points.push({
        index: points.length,
        footprint: event.footprint,
        label: `session -> ${formatTokens(event.footprint)} tokens`,
        kind: "session",
      });
    } else if (event.code === "RECORDS_SHED") {
      points.push({
        index: points.length,
        footprint: event.footprint,
        label: `absorption -> ${formatTokens(event.footprint)} tokens`,
        kind: "absorption",
      });
    }
  }
  return points;
}

export function appendTimeline(
  existing: TimelinePoint[],
  fresh: ApiEvent[]
): TimelinePoint[] {
  const addition = timelineFromEvents(fresh);
  return existing.concat(
    addition.map((p) => ({ ...p, index: existing.length + p.index }))
  );
}
