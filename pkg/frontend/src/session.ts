/**
 * Console session state: one pending query at a time, a step-ordered query
 * log, and rolling telemetry series for the charts.
 *
 * The session is transport-agnostic: it receives raw message lines and emits
 * outgoing lines through a callback, so tests can drive it without a socket.
 */

import {
  CanvasSize,
  Point,
  canvasToWorkspace,
  clampToWorkspace,
} from "./mapping.js";
import {
  Incoming,
  QueryRequest,
  StepUpdate,
  encodeOutgoing,
  makeOracleResponse,
  parseIncoming,
} from "./protocol.js";

export type ConnectionState = "connecting" | "live" | "lost";

export interface PendingQuery {
  step: number;
  state: QueryRequest["state"];
  deadline: number; // epoch ms
  budgetRemaining: number;
  timeoutMs: number;
}

export interface QueryLogEntry {
  step: number;
  answeredBy: "human" | "timeout_fallback";
  latencyMs: number;
  action: [number, number] | null; // null when the deadline expired unanswered
}

export interface SeriesPoint {
  step: number;
  value: number;
}

export interface SubmitResult {
  ok: boolean;
  notice?: string;
}

const MAX_SERIES_POINTS = 500;

export interface SessionOptions {
  sessionId: string;
  runId?: string;
  send: (line: string) => void;
  now?: () => number;
}

export class ConsoleSession {
  readonly sessionId: string;
  runId: string;
  connection: ConnectionState = "connecting";
  pending: PendingQuery | null = null;
  budgetRemaining: number | null = null;
  initialBudget: number | null = null;
  lastNotice = "";
  queryLog: QueryLogEntry[] = [];
  returnSeries: SeriesPoint[] = [];
  queriesPerEpisodeSeries: SeriesPoint[] = [];
  latestState: QueryRequest["state"] | null = null;

  private send: (line: string) => void;
  private now: () => number;
  private lastTelemetryStep = -1;
  private pendingSince = 0;
  private episodeQueries = 0;
  private finishedEpisodes: number[] = []; // query counts of completed episodes

  constructor(options: SessionOptions) {
    this.sessionId = options.sessionId;
    this.runId = options.runId ?? "";
    this.send = options.send;
    this.now = options.now ?? (() => Date.now());
  }

  markLive(): void {
    this.connection = "live";
  }

  markLost(): void {
    this.connection = "lost";
    this.clearPending("timeout_fallback");
  }

  /** Route one raw line; malformed input is dropped without state changes. */
  handleMessage(raw: string): void {
    const msg: Incoming | null = parseIncoming(raw);
    if (msg === null) return;
    switch (msg.type) {
      case "query_request":
        this.onQueryRequest(msg);
        break;
      case "step_update":
        this.onStepUpdate(msg);
        break;
      case "error":
        this.lastNotice = msg.message;
        break;
    }
  }

  private onQueryRequest(msg: QueryRequest): void {
    if (msg.session !== this.sessionId) return; // not addressed to this console
    // single-slot contract: a newer request supersedes a stale pending one
    if (this.pending !== null) {
      this.finishPending("timeout_fallback", null);
    }
    this.runId = msg.run_id;
    this.latestState = msg.state;
    this.budgetRemaining = msg.budget_remaining;
    if (this.initialBudget === null || msg.budget_remaining > this.initialBudget) {
      this.initialBudget = msg.budget_remaining;
    }
    this.pendingSince = this.now();
    this.pending = {
      step: msg.step,
      state: msg.state,
      deadline: this.pendingSince + msg.timeout_ms,
      budgetRemaining: msg.budget_remaining,
      timeoutMs: msg.timeout_ms,
    };
  }

  private onStepUpdate(msg: StepUpdate): void {
    if (msg.step <= this.lastTelemetryStep) return; // out-of-order: dropped
    this.lastTelemetryStep = msg.step;
    this.latestState = msg.state;
    this.pushSeries(this.returnSeries, { step: msg.step, value: msg.episode_return });
    if (msg.queried) this.episodeQueries += 1;
    if (msg.done === true) {
      this.finishedEpisodes.push(this.episodeQueries);
      if (this.finishedEpisodes.length > 50) this.finishedEpisodes.shift();
      this.episodeQueries = 0;
      const window = this.finishedEpisodes;
      const mean = window.reduce((a, b) => a + b, 0) / window.length;
      this.pushSeries(this.queriesPerEpisodeSeries, { step: msg.step, value: mean });
    }
  }

  private pushSeries(series: SeriesPoint[], point: SeriesPoint): void {
    series.push(point);
    if (series.length > MAX_SERIES_POINTS) series.shift();
  }

  /**
   * Submit the operator's click as the corrective action.
   *
   * Ignored (with a notice) when no query is pending; rejected locally when
   * the deadline has already expired.
   */
  submitCorrection(canvasPoint: Point, size: CanvasSize): SubmitResult {
    if (this.pending === null) {
      this.lastNotice = "no query is waiting for a correction";
      return { ok: false, notice: this.lastNotice };
    }
    if (this.now() > this.pending.deadline) {
      this.finishPending("timeout_fallback", null);
      this.lastNotice = "deadline expired; the scripted oracle answered";
      return { ok: false, notice: this.lastNotice };
    }
    const target = clampToWorkspace(canvasToWorkspace(canvasPoint, size));
    const action: [number, number] = [target.x, target.y];
    const response = makeOracleResponse(this.sessionId, this.pending.step, action);
    this.send(encodeOutgoing(response));
    this.finishPending("human", action);
    return { ok: true };
  }

  /** Clear an expired pending query; call from a timer. */
  expireDeadline(): void {
    if (this.pending !== null && this.now() > this.pending.deadline) {
      this.finishPending("timeout_fallback", null);
    }
  }

  private clearPending(answeredBy: "human" | "timeout_fallback"): void {
    if (this.pending !== null) this.finishPending(answeredBy, null);
  }

  private finishPending(
    answeredBy: "human" | "timeout_fallback",
    action: [number, number] | null,
  ): void {
    if (this.pending === null) return;
    this.queryLog.push({
      step: this.pending.step,
      answeredBy,
      latencyMs: Math.max(0, Math.round(this.now() - this.pendingSince)),
      action,
    });
    this.pending = null;
  }

  /** Budget meter fraction in [0, 1]; full before any query arrives. */
  budgetFraction(): number {
    if (this.initialBudget === null || this.initialBudget === 0) return 1.0;
    return Math.max(0, Math.min(1, (this.budgetRemaining ?? 0) / this.initialBudget));
  }

  countdownMs(): number | null {
    if (this.pending === null) return null;
    return Math.max(0, this.pending.deadline - this.now());
  }
}
