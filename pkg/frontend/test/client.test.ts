import { describe, expect, it } from "vitest";

import { ApiError, ConsoleClient, type FetchLike } from "../src/client.js";

function fakeFetch(
  handler: (input: string, init?: RequestInit) => { status: number; body: unknown }
): FetchLike {
  return async (input, init) => {
    const result = handler(input, init);
    return new Response(JSON.stringify(result.body), {
      status: result.status,
      headers: { "content-type": "application/json" },
    });
  };
}

describe("ConsoleClient", () => {
  it("joins the base url and parses payloads", async () => {
    const calls: string[] = [];
    const client = new ConsoleClient(
      "http://example:1",
      fakeFetch((input) => {
        calls.push(input);
        return { status: 200, body: { phase: "accumulating" } };
      })
    );
    const status = await client.status();
    expect(status.phase).toBe("accumulating");
    expect(calls).toEqual(["http://example:1/v1/status"]);
  });

  it("posts decisions with the uniform body", async () => {
    let seen: { url: string; body: unknown } | null = null;
    const client = new ConsoleClient(
      "http://example:1",
      fakeFetch((input, init) => {
        seen = { url: input, body: JSON.parse(String(init?.body)) };
        return { status: 200, body: { events: [], status: {} } };
      })
    );
    await client.decide("abc", "approve", "fine");
    expect(seen!.url).toBe("http://example:1/v1/proposals/abc/decision");
    expect(seen!.body).toEqual({ decision: "approve", rationale: "fine" });
  });

  it("surfaces the service's error code and message verbatim", async () => {
    const client = new ConsoleClient(
      "http://example:1",
      fakeFetch(() => ({
        status: 409,
        body: { error: { code: "phase_conflict", message: "already approved" } },
      }))
    );
    const error = await client.status().catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.code).toBe("phase_conflict");
    expect(error.message).toBe("already approved");
    expect(error.httpStatus).toBe(409);
  });

  it("adds wait_ms only when long-polling", async () => {
    const urls: string[] = [];
    const client = new ConsoleClient(
      "http://example:1",
      fakeFetch((input) => {
        urls.push(input);
        return { status: 200, body: { events: [], next_offset: 0 } };
      })
    );
    await client.events(3);
    await client.events(3, 5_000);
    expect(urls).toEqual([
      "http://example:1/v1/events?since=3",
      "http://example:1/v1/events?since=3&wait_ms=5000",
    ]);
  });
});
