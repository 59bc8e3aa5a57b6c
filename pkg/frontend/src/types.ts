// Payload shapes of the engine's /v1 endpoints. The console renders these
// verbatim; every number it shows originates in one of these responses.

export interface PendingProposalSummary {
  proposal_id: string;
  tokens_before: number;
  tokens_after: number;
  fidelity_at_compression: number;
  past_gate: boolean;
  created_at: string;
}

export interface StatusReport {
  phase: string;
  footprint: number;
  position_estimate: number;
  fidelity: number;
  gate_position: number;
  effective_trigger: number;
  quality_budget: number;
  gate_unreachable: boolean;
  deep_revision: number;
  deep_tokens: number;
  recent_tokens: number;
  recent_records: number;
  recent_soft_cap: number;
  pending_proposal: PendingProposalSummary | null;
}

export interface ProposalDetail extends PendingProposalSummary {
  status: "pending" | "approved" | "rejected";
  rationale: string;
  deep_before: string;
  deep_proposed: string;
  absorbed_session_ids: string[];
}

export interface ApiEvent {
  at: string;
  code: string;
  phase: string;
  footprint: number;
  position_estimate: number;
  proposal_id: string | null;
  payload: Record<string, unknown>;
}

export interface EventsPage {
  events: ApiEvent[];
  next_offset: number;
}

export interface DecisionResponse {
  events: ApiEvent[];
  status: StatusReport;
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}
