// Thin typed client over the engine's /v1 endpoints.

import type {
  ApiErrorBody,
  DecisionResponse,
  EventsPage,
  ProposalDetail,
  StatusReport,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly httpStatus: number
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ConsoleClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (!response.ok) {
      let code = "io";
      let message = `${response.status} on ${path}`;
      try {
        const body = (await response.json()) as ApiErrorBody;
        code = body.error.code;
        message = body.error.message;
      } catch {
        // body was not the uniform error shape; keep the fallback
      }
      throw new ApiError(code, message, response.status);
    }
    return (await response.json()) as T;
  }

  status(): Promise<StatusReport> {
    return this.request<StatusReport>("/v1/status");
  }

  proposal(id: string): Promise<ProposalDetail> {
    return this.request<ProposalDetail>(`/v1/proposals/${id}`);
  }

  deepMemory(): Promise<{ content: string; token_count: number; revision: number }> {
    return this.request("/v1/memory/deep");
  }

  postSession(content: string): Promise<DecisionResponse> {
    return this.request<DecisionResponse>("/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ content }),
    });
  }

  decide(
    proposalId: string,
    decision: "approve" | "reject",
    rationale: string
  ): Promise<DecisionResponse> {
    return this.request<DecisionResponse>(
      `/v1/proposals/${proposalId}/decision`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ decision, rationale }),
      }
    );
  }

  events(since: number, waitMs = 0): Promise<EventsPage> {
    const wait = waitMs > 0 ? `&wait_ms=${waitMs}` : "";
    return this.request<EventsPage>(`/v1/events?since=${since}${wait}`);
  }
}
