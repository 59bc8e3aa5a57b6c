import { describe, expect, it } from "vitest";

import { diffLines, diffStats } from "../src/diff.js";
import { escapeHtml, renderDashboard, renderProposal, renderTimeline } from "../src/render.js";
import type { ProposalDetail } from "../src/types.js";
import { buildDashboard, timelineFromEvents } from "../src/viewmodel.js";

function detail(overrides: Partial<ProposalDetail> = {}): ProposalDetail {
  return {
    proposal_id: "abcd1234-rest",
    status: "pending",
    rationale: "",
    tokens_before: 60_000,
    tokens_after: 4_000,
    fidelity_at_compression: 0.98515,
    past_gate: false,
    created_at: "2026-08-11T00:00:00+00:00",
    deep_before: "alpha\nbeta",
    deep_proposed: "alpha\ngamma",
    absorbed_session_ids: ["s1", "s2"],
    ...overrides,
  };
}

describe("escapeHtml", () => {
  it("neutralizes markup in memory content", () => {
    expect(escapeHtml(`<img src=x onerror="x()">&'`)).toBe(
      "&lt;img src=x onerror=&quot;x()&quot;&gt;&amp;&#39;"
    );
  });
});

describe("renderProposal", () => {
  it("shows decision controls only while pending", () => {
    const d = detail();
    const diff = diffLines(d.deep_before, d.deep_proposed);
    const html = renderProposal(d, diff, diffStats(diff));
    expect(html).toContain('id="approve"');
    expect(html).toContain('id="reject"');
    const decided = renderProposal(
      detail({ status: "approved", rationale: "good" }),
      diff,
      diffStats(diff)
    );
    expect(decided).not.toContain('id="approve"');
    expect(decided).toContain("approved");
    expect(decided).toContain("good");
  });

  it("highlights past-gate proposals", () => {
    const d = detail({ past_gate: true });
    const diff = diffLines(d.deep_before, d.deep_proposed);
    expect(renderProposal(d, diff, diffStats(diff))).toContain("past gate");
  });

  it("escapes memory content inside the diff", () => {
    const d = detail({
      deep_before: "<script>alert(1)</script>",
      deep_proposed: "safe",
    });
    const diff = diffLines(d.deep_before, d.deep_proposed);
    const html = renderProposal(d, diff, diffStats(diff));
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("renderDashboard", () => {
  const base = {
    phase: "accumulating",
    footprint: 100,
    position_estimate: 110,
    fidelity: 0.99998,
    gate_position: 125_000,
    effective_trigger: 62_500,
    quality_budget: 124_890,
    gate_unreachable: false,
    deep_revision: 2,
    deep_tokens: 50,
    recent_tokens: 50,
    recent_records: 1,
    recent_soft_cap: 8_000,
    pending_proposal: null,
  };

  it("renders the gauge with trigger and gate marks", () => {
    const html = renderDashboard(buildDashboard(base), false);
    expect(html).toContain("gauge-trigger");
    expect(html).toContain("gauge-gate");
    expect(html).toContain("125,000");
  });

  it("shows the stale banner on connection loss, never fabricating data", () => {
    const html = renderDashboard(buildDashboard(base), true);
    expect(html).toContain("banner-stale");
    expect(html).toContain("100"); // last known values still shown
  });

  it("raises the degraded-region banner past the gate", () => {
    const html = renderDashboard(
      buildDashboard({ ...base, position_estimate: 126_000 }),
      false
    );
    expect(html).toContain("banner-danger");
    expect(html).toContain("degraded region");
  });
});

describe("renderTimeline", () => {
  it("draws one bar per point with absorption styling", () => {
    const points = timelineFromEvents([
      { at: "", code: "SESSION_INGESTED", phase: "accumulating", footprint: 500,
        position_estimate: 500, proposal_id: null, payload: {} },
      { at: "", code: "RECORDS_SHED", phase: "shedding", footprint: 100,
        position_estimate: 100, proposal_id: null, payload: {} },
    ]);
    const html = renderTimeline(points);
    expect((html.match(/class="bar /g) ?? []).length).toBe(2);
    expect(html).toContain("bar-absorption");
  });

  it("handles the empty state", () => {
    expect(renderTimeline([])).toContain("No sessions yet");
  });
});
