/**
 * Wire protocol with the training bridge: newline-delimited JSON messages.
 *
 * Field names and types are normative; unknown fields on incoming messages
 * are ignored, malformed messages are dropped by returning null.
 */

export interface WorkspaceState {
  cube: [number, number];
  effector: [number, number];
}

export interface QueryRequest {
  type: "query_request";
  session: string;
  run_id: string;
  step: number;
  state: WorkspaceState;
  budget_remaining: number;
  timeout_ms: number;
}

export interface StepUpdate {
  type: "step_update";
  step: number;
  state: WorkspaceState;
  queried: boolean;
  reward: number;
  episode_return: number;
  done?: boolean;
}

export interface OracleResponse {
  type: "oracle_response";
  session: string;
  step: number;
  action: [number, number];
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type Incoming = QueryRequest | StepUpdate | ErrorMessage;

function isNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isPair(v: unknown): v is [number, number] {
  return Array.isArray(v) && v.length === 2 && isNumber(v[0]) && isNumber(v[1]);
}

function isWorkspaceState(v: unknown): v is WorkspaceState {
  if (typeof v !== "object" || v === null) return false;
  const s = v as Record<string, unknown>;
  return isPair(s.cube) && isPair(s.effector);
}

/** Parse one incoming line; null for anything that does not validate. */
export function parseIncoming(raw: string): Incoming | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const m = msg as Record<string, unknown>;
  switch (m.type) {
    case "query_request":
      if (
        typeof m.session === "string" &&
        typeof m.run_id === "string" &&
        isNumber(m.step) &&
        isWorkspaceState(m.state) &&
        isNumber(m.budget_remaining) &&
        isNumber(m.timeout_ms)
      ) {
        return {
          type: "query_request",
          session: m.session,
          run_id: m.run_id,
          step: m.step,
          state: m.state,
          budget_remaining: m.budget_remaining,
          timeout_ms: m.timeout_ms,
        };
      }
      return null;
    case "step_update":
      if (
        isNumber(m.step) &&
        isWorkspaceState(m.state) &&
        typeof m.queried === "boolean" &&
        isNumber(m.reward) &&
        isNumber(m.episode_return)
      ) {
        return {
          type: "step_update",
          step: m.step,
          state: m.state,
          queried: m.queried,
          reward: m.reward,
          episode_return: m.episode_return,
          done: typeof m.done === "boolean" ? m.done : undefined,
        };
      }
      return null;
    case "error":
      if (typeof m.message === "string") {
        return { type: "error", message: m.message };
      }
      return null;
    default:
      return null;
  }
}

export function makeOracleResponse(
  session: string,
  step: number,
  action: [number, number],
): OracleResponse {
  return { type: "oracle_response", session, step, action };
}

export function encodeOutgoing(msg: OracleResponse | ErrorMessage): string {
  return JSON.stringify(msg) + "\n";
}

/** Validate an outgoing response object against the wire schema. */
export function isValidOracleResponse(v: unknown): v is OracleResponse {
  if (typeof v !== "object" || v === null) return false;
  const m = v as Record<string, unknown>;
  return (
    m.type === "oracle_response" &&
    typeof m.session === "string" &&
    isNumber(m.step) &&
    Number.isInteger(m.step) &&
    isPair(m.action)
  );
}
