// Console controller: holds the event offset, refreshes the view model from
// the service, and submits decisions. DOM-free so tests can drive it
// headlessly; main.ts binds it to the page.

import { ApiError, ConsoleClient } from "./client.js";
import { diffLines, diffStats, type DiffLine, type DiffStats } from "./diff.js";
import type { ProposalDetail, StatusReport } from "./types.js";
import {
  appendTimeline,
  buildDashboard,
  type DashboardView,
  type TimelinePoint,
} from "./viewmodel.js";

export interface ConsoleSnapshot {
  dashboard: DashboardView | null;
  proposal: ProposalDetail | null;
  diff: DiffLine[];
  stats: DiffStats;
  timeline: TimelinePoint[];
  stale: boolean;
  notice: string | null;
}

export type SnapshotListener = (snapshot: ConsoleSnapshot) => void;

export class ConsoleApp {
  private offset = 0;
  private timeline: TimelinePoint[] = [];
  private status: StatusReport | null = null;
  private proposal: ProposalDetail | null = null;
  private stale = false;
  private notice: string | null = null;

  constructor(
    private readonly client: ConsoleClient,
    private readonly listener: SnapshotListener
  ) {}

  snapshot(): ConsoleSnapshot {
    const diff =
      this.proposal === null
        ? []
        : diffLines(this.proposal.deep_before, this.proposal.deep_proposed);
    return {
      dashboard: this.status === null ? null : buildDashboard(this.status),
      proposal: this.proposal,
      diff,
      stats: diffStats(diff),
      timeline: this.timeline,
      stale: this.stale,
      notice: this.notice,
    };
  }

  private publish(): void {
    this.listener(this.snapshot());
  }

  async refresh(): Promise<void> {
    try {
      this.status = await this.client.status();
      const pending = this.status.pending_proposal;
      if (pending) {
        this.proposal = await this.client.proposal(pending.proposal_id);
      } else if (this.proposal !== null && this.proposal.status === "pending") {
        // The pending proposal was decided elsewhere; fetch its outcome.
        this.proposal = await this.client.proposal(this.proposal.proposal_id);
      }
      this.stale = false;
    } catch (error) {
      // Never fabricate values: keep the last data and flag it stale.
      this.stale = true;
      this.notice = error instanceof Error ? error.message : String(error);
    }
    this.publish();
  }

  /** One poll step: pull the event tail, extend the timeline, refresh. */
  async pollOnce(waitMs = 0): Promise<number> {
    try {
      const page = await this.client.events(this.offset, waitMs);
      if (page.events.length > 0) {
        this.timeline = appendTimeline(this.timeline, page.events);
        this.offset = page.next_offset;
        await this.refresh();
      } else {
        this.publish();
      }
      this.stale = false;
      return page.events.length;
    } catch (error) {
      this.stale = true;
      this.notice = error instanceof Error ? error.message : String(error);
      this.publish();
      return 0;
    }
  }

  async submitDecision(
    decision: "approve" | "reject",
    rationale: string
  ): Promise<void> {
    if (this.proposal === null || this.proposal.status !== "pending") {
      this.notice = "no pending proposal to decide";
      this.publish();
      return;
    }
    try {
      const response = await this.client.decide(
        this.proposal.proposal_id,
        decision,
        rationale
      );
      this.status = response.status;
      this.proposal = await this.client.proposal(this.proposal.proposal_id);
      this.notice = `proposal ${decision}d`;
    } catch (error) {
      if (error instanceof ApiError) {
        // not_found / phase_conflict come back verbatim with retry guidance.
        this.notice = `${error.code}: ${error.message} - refresh and retry`;
        await this.refresh();
        return;
      }
      this.stale = true;
      this.notice = error instanceof Error ? error.message : String(error);
    }
    this.publish();
  }

  /** Long-poll loop for the live page; not used by tests. */
  async run(waitMs = 20_000): Promise<never> {
    await this.refresh();
    // eslint-disable-next-line no-constant-condition
    while (true) {
      await this.pollOnce(waitMs);
    }
  }
}
