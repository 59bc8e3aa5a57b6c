// Page bootstrap: binds the controller to the DOM and wires the buttons.

import { ConsoleApp, type ConsoleSnapshot } from "./app.js";
import { ConsoleClient } from "./client.js";
import { renderDashboard, renderProposal, renderTimeline } from "./render.js";

function baseUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "http://127.0.0.1:8764";
}

const dashboardEl = document.getElementById("dashboard")!;
const proposalEl = document.getElementById("proposal")!;
const timelineEl = document.getElementById("timeline")!;
const noticeEl = document.getElementById("notice")!;

const client = new ConsoleClient(baseUrl());
const app = new ConsoleApp(client, render);

function render(snapshot: ConsoleSnapshot): void {
  if (snapshot.dashboard) {
    dashboardEl.innerHTML = renderDashboard(snapshot.dashboard, snapshot.stale);
  }
  proposalEl.innerHTML = snapshot.proposal
    ? renderProposal(snapshot.proposal, snapshot.diff, snapshot.stats)
    : `<p class="empty">No compression proposal pending.</p>`;
  timelineEl.innerHTML = renderTimeline(snapshot.timeline);
  noticeEl.textContent = snapshot.notice ?? "";

  const approve = document.getElementById("approve");
  const reject = document.getElementById("reject");
  const rationale = () =>
    (document.getElementById("rationale") as HTMLInputElement | null)?.value ?? "";
  approve?.addEventListener("click", () => {
    void app.submitDecision("approve", rationale());
  });
  reject?.addEventListener("click", () => {
    void app.submitDecision("reject", rationale());
  });
}

void app.run();
