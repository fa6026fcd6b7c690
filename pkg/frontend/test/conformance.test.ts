import { describe, expect, it } from "vitest";

import { canvasToWorkspace, workspaceToCanvas } from "../src/mapping.js";
import { isValidOracleResponse, parseIncoming } from "../src/protocol.js";
import { ConsoleSession } from "../src/session.js";

const SIZE = { width: 420, height: 420 };

/**
 * Scripted driver standing in for the training bridge: issues synthetic
 * query requests, collects the console's responses, and checks each one
 * against the wire schema and the coordinate contract.
 */
describe("console protocol conformance", () => {
  it("answers 100 synthetic queries with schema-valid, step-matched, "
     + "round-trip-accurate responses", () => {
    const sent: string[] = [];
    const nowBox = { t: 50_000 };
    const session = new ConsoleSession({
      sessionId: "conformance",
      send: (line) => sent.push(line),
      now: () => nowBox.t,
    });
    session.markLive();

    let rngState = 123456789;
    const rand = () => {
      // deterministic LCG so the test is reproducible
      rngState = (1103515245 * rngState + 12345) % 2147483648;
      return rngState / 2147483648;
    };

    const targets: Array<{ step: number; want: { x: number; y: number } }> = [];
    for (let i = 0; i < 100; i++) {
      const step = 10 + i * 7;
      const cube: [number, number] = [rand() - 0.5, rand() - 0.5];
      session.handleMessage(
        JSON.stringify({
          type: "query_request",
          session: "conformance",
          run_id: "synthetic",
          step,
          state: { cube, effector: [0, 0] },
          budget_remaining: 1000 - i,
          timeout_ms: 4000,
        }),
      );
      expect(session.pending?.step).toBe(step);

      // the operator clicks an arbitrary workspace point
      const want = { x: rand() - 0.5, y: rand() - 0.5 };
      const click = workspaceToCanvas(want, SIZE);
      const result = session.submitCorrection(click, SIZE);
      expect(result.ok).toBe(true);
      targets.push({ step, want });
      nowBox.t += 500;
    }

    expect(sent).toHaveLength(100);
    sent.forEach((line, i) => {
      const parsed = JSON.parse(line);
      // wire-schema validation
      expect(isValidOracleResponse(parsed)).toBe(true);
      expect(parsed.session).toBe("conformance");
      // step matching
      expect(parsed.step).toBe(targets[i].step);
      // coordinate mapping round-trips to within 1e-6 of the clicked point
      expect(Math.abs(parsed.action[0] - targets[i].want.x)).toBeLessThan(1e-6);
      expect(Math.abs(parsed.action[1] - targets[i].want.y)).toBeLessThan(1e-6);
    });

    // every query resolved: nothing pending, the log is complete and ordered
    expect(session.pending).toBeNull();
    expect(session.queryLog).toHaveLength(100);
    expect(session.queryLog.every((e) => e.answeredBy === "human")).toBe(true);
  });

  it("round-trips clicks through the canvas mapping at sub-1e-6 accuracy", () => {
    for (let i = 0; i < 50; i++) {
      const want = { x: (i % 10) / 10 - 0.45, y: Math.floor(i / 10) / 10 - 0.25 };
      const back = canvasToWorkspace(workspaceToCanvas(want, SIZE), SIZE);
      expect(Math.abs(back.x - want.x)).toBeLessThan(1e-6);
      expect(Math.abs(back.y - want.y)).toBeLessThan(1e-6);
    }
  });

  it("drops malformed driver messages without corrupting the session", () => {
    const sent: string[] = [];
    const session = new ConsoleSession({ sessionId: "c", send: (l) => sent.push(l) });
    session.markLive();
    const malformed = [
      "",
      "{",
      '{"type":"query_request"}',
      '{"type":"query_request","session":"c","run_id":"r","step":1,'
        + '"state":{"cube":[0,0],"effector":[0]},"budget_remaining":1,"timeout_ms":10}',
      JSON.stringify({ type: "unknown_blob", step: 2 }),
    ];
    for (const line of malformed) session.handleMessage(line);
    expect(session.pending).toBeNull();
    expect(sent).toHaveLength(0);
    expect(session.queryLog).toHaveLength(0);
  });

  it("parseIncoming tolerates responses echoed back (as the server would see them)", () => {
    // the console's own lines are not valid *incoming* console messages
    expect(parseIncoming('{"type":"oracle_response","session":"c","step":1,"action":[0,0]}'))
      .toBeNull();
  });
});
