import { describe, expect, it } from "vitest";

import {
  encodeOutgoing,
  isValidOracleResponse,
  makeOracleResponse,
  parseIncoming,
} from "../src/protocol.js";

const REQUEST = JSON.stringify({
  type: "query_request",
  session: "s1",
  run_id: "r1",
  step: 12,
  state: { cube: [0.3, -0.2], effector: [0.0, 0.1] },
  budget_remaining: 99,
  timeout_ms: 5000,
});

describe("parseIncoming", () => {
  it("parses a well-formed query_request", () => {
    const msg = parseIncoming(REQUEST);
    expect(msg).not.toBeNull();
    expect(msg!.type).toBe("query_request");
    if (msg!.type === "query_request") {
      expect(msg!.step).toBe(12);
      expect(msg!.state.cube).toEqual([0.3, -0.2]);
    }
  });

  it("ignores unknown fields", () => {
    const withExtra = JSON.stringify({
      ...JSON.parse(REQUEST),
      surprise: { nested: true },
    });
    expect(parseIncoming(withExtra)).not.toBeNull();
  });

  it("drops malformed input", () => {
    expect(parseIncoming("not json")).toBeNull();
    expect(parseIncoming("[1,2,3]")).toBeNull();
    expect(parseIncoming('{"type":"mystery"}')).toBeNull();
    expect(parseIncoming('{"type":"query_request","step":"twelve"}')).toBeNull();
    expect(
      parseIncoming(
        JSON.stringify({ ...JSON.parse(REQUEST), state: { cube: [1] } }),
      ),
    ).toBeNull();
  });

  it("parses step updates and errors", () => {
    const update = parseIncoming(
      JSON.stringify({
        type: "step_update",
        step: 5,
        state: { cube: [0, 0], effector: [0.1, 0.1] },
        queried: false,
        reward: 0.04,
        episode_return: 0.2,
      }),
    );
    expect(update?.type).toBe("step_update");
    const err = parseIncoming(JSON.stringify({ type: "error", message: "nope" }));
    expect(err?.type).toBe("error");
  });
});

describe("outgoing responses", () => {
  it("builds schema-valid responses", () => {
    const response = makeOracleResponse("s1", 12, [0.25, -0.4]);
    expect(isValidOracleResponse(response)).toBe(true);
  });

  it("encodes as a single JSON line", () => {
    const line = encodeOutgoing(makeOracleResponse("s1", 1, [0, 0]));
    expect(line.endsWith("\n")).toBe(true);
    expect(JSON.parse(line).type).toBe("oracle_response");
  });

  it("rejects malformed response objects", () => {
    expect(isValidOracleResponse({ type: "oracle_response" })).toBe(false);
    expect(
      isValidOracleResponse({
        type: "oracle_response",
        session: "s",
        step: 1.5,
        action: [0, 0],
      }),
    ).toBe(false);
    expect(
      isValidOracleResponse({
        type: "oracle_response",
        session: "s",
        step: 1,
        action: [0, Infinity],
      }),
    ).toBe(false);
  });
});
