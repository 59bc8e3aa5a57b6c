// HTML rendering via template strings. No framework: the console is one
// dashboard with a proposal panel, and string templates keep it inspectable.

import type { DiffLine, DiffStats } from "./diff.js";
import type { ProposalDetail } from "./types.js";
import type { DashboardView, TimelinePoint } from "./viewmodel.js";
import { formatFidelity, formatTokens } from "./viewmodel.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderDashboard(view: DashboardView, stale: boolean): string {
  const staleBanner = stale
    ? `<div class="banner banner-stale">Connection lost; showing the last
       data received, nothing here is live.</div>`
    : "";
  const pastGate = view.pastGateWarning
    ? `<div class="banner banner-danger">Past the fidelity gate: a compression
       started now runs in the degraded region of the curve.</div>`
    : "";
  const unreachable = view.gateUnreachable
    ? `<div class="banner banner-warn">Gate beyond the window: capacity fills
       before fidelity reaches the target.</div>`
    : "";
  return `
  ${staleBanner}${pastGate}${unreachable}
  <section class="cards">
    <div class="card"><span class="card-label">Phase</span>
      <span class="card-value phase-${view.phase}">${escapeHtml(view.phaseLabel)}</span></div>
    <div class="card"><span class="card-label">Footprint</span>
      <span class="card-value">${view.footprintText}</span><span class="card-unit">tokens</span></div>
    <div class="card"><span class="card-label">Position estimate</span>
      <span class="card-value">${view.positionText}</span><span class="card-unit">tokens</span></div>
    <div class="card"><span class="card-label">Fidelity</span>
      <span class="card-value">${view.gauge.fidelityText}</span></div>
    <div class="card"><span class="card-label">Quality budget</span>
      <span class="card-value">${view.gauge.budgetText}</span><span class="card-unit">tokens</span></div>
    <div class="card"><span class="card-label">Deep revision</span>
      <span class="card-value">${view.revision}</span></div>
  </section>
  ${renderGauge(view)}
  `;
}

function renderGauge(view: DashboardView): string {
  const positionPct = (view.gauge.positionRatio * 100).toFixed(2);
  const triggerPct = (view.gauge.triggerRatio * 100).toFixed(2);
  return `
  <section class="gauge zone-${view.gauge.zone}" aria-label="fidelity budget gauge">
    <div class="gauge-track">
      <div class="gauge-fill" style="width: ${positionPct}%"></div>
      <div class="gauge-mark gauge-trigger" style="left: ${triggerPct}%"
           title="effective trigger at ${formatTokens(view.gauge.trigger)} tokens"></div>
      <div class="gauge-mark gauge-gate" style="left: 100%"
           title="gate at ${formatTokens(view.gauge.gate)} tokens"></div>
    </div>
    <div class="gauge-legend">
      <span>position ${formatTokens(view.gauge.position)}</span>
      <span>trigger ${formatTokens(view.gauge.trigger)}</span>
      <span>gate ${formatTokens(view.gauge.gate)}</span>
    </div>
  </section>`;
}

export function renderProposal(
  detail: ProposalDetail,
  diff: DiffLine[],
  stats: DiffStats
): string {
  const delta = detail.tokens_after - detail.tokens_before;
  const deltaText = `${delta >= 0 ? "+" : ""}${formatTokens(delta)}`;
  const pastGate = detail.past_gate
    ? `<span class="pill pill-danger" title="this compression was proposed past
        the fidelity gate">past gate</span>`
    : "";
  const decided =
    detail.status === "pending"
      ? `<div class="decision-row">
           <input id="rationale" type="text" placeholder="rationale (recorded in the audit log)" />
           <button id="approve" class="btn btn-approve">Approve rewrite</button>
           <button id="reject" class="btn btn-reject">Reject</button>
         </div>`
      : `<div class="decision-row decided">decision: ${escapeHtml(detail.status)}
           ${detail.rationale ? "&mdash; " + escapeHtml(detail.rationale) : ""}</div>`;
  return `
  <section class="proposal">
    <header>
      <h2>Compression proposal <code>${escapeHtml(detail.proposal_id.slice(0, 8))}</code></h2>
      <div class="proposal-meta">
        <span class="pill">${formatTokens(detail.tokens_before)} &rarr;
          ${formatTokens(detail.tokens_after)} tokens (${deltaText})</span>
        <span class="pill">fidelity at compression
          ${formatFidelity(detail.fidelity_at_compression)}</span>
        <span class="pill">${detail.absorbed_session_ids.length} sessions absorbed</span>
        ${pastGate}
      </div>
    </header>
    ${decided}
    <div class="diff-stats">+${stats.added} / -${stats.removed} lines,
      ${stats.unchanged} unchanged</div>
    <table class="diff">${diff.map(renderDiffLine).join("")}</table>
  </section>`;
}

function renderDiffLine(line: DiffLine): string {
  const left = line.leftNumber === null ? "" : String(line.leftNumber);
  const right = line.rightNumber === null ? "" : String(line.rightNumber);
  const sigil = line.kind === "added" ? "+" : line.kind === "removed" ? "-" : " ";
  return `<tr class="diff-${line.kind}"><td class="num">${left}</td>` +
    `<td class="num">${right}</td><td class="sigil">${sigil}</td>` +
    `<td class="text">${escapeHtml(line.text)}</td></tr>`;
}

export function renderTimeline(points: TimelinePoint[]): string {
  if (points.length === 0) {
    return `<section class="timeline"><p class="empty">No sessions yet.</p></section>`;
  }
  const peak = Math.max(...points.map((p) => p.footprint), 1);
  const bars = points
    .map((p) => {
      const height = Math.max(2, Math.round((p.footprint / peak) * 100));
      return `<div class="bar bar-${p.kind}" style="height: ${height}%"
        title="${escapeHtml(p.label)}"></div>`;
    })
    .join("");
  return `
  <section class="timeline" aria-label="footprint per session">
    <h2>Footprint timeline</h2>
    <div class="bars">${bars}</div>
    <div class="timeline-legend"><span class="key key-session">session</span>
      <span class="key key-absorption">absorption</span>
      <span>peak ${formatTokens(peak)} tokens</span></div>
  </section>`;
}
