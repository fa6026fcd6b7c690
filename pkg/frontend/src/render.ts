/** Canvas drawing for the workspace scene and the two telemetry charts. */

import { workspaceToCanvas } from "./mapping.js";
import { ConsoleSession, SeriesPoint } from "./session.js";

export function drawWorkspace(
  ctx: CanvasRenderingContext2D,
  session: ConsoleSession,
): void {
  const size = { width: ctx.canvas.width, height: ctx.canvas.height };
  ctx.clearRect(0, 0, size.width, size.height);

  const lost = session.connection === "lost";
  ctx.globalAlpha = lost ? 0.35 : 1.0;

  // workspace boundary
  ctx.strokeStyle = session.pending ? "#e67e22" : "#888";
  ctx.lineWidth = session.pending ? 4 : 1.5;
  ctx.strokeRect(1, 1, size.width - 2, size.height - 2);

  const state = session.pending?.state ?? session.latestState;
  if (state) {
    const cube = workspaceToCanvas({ x: state.cube[0], y: state.cube[1] }, size);
    const eff = workspaceToCanvas({ x: state.effector[0], y: state.effector[1] }, size);
    ctx.fillStyle = "#c0392b";
    ctx.fillRect(cube.x - 7, cube.y - 7, 14, 14);
    ctx.beginPath();
    ctx.arc(eff.x, eff.y, 6, 0, Math.PI * 2);
    ctx.fillStyle = "#2980b9";
    ctx.fill();
  }

  if (session.pending) {
    const remaining = session.countdownMs() ?? 0;
    ctx.fillStyle = "#e67e22";
    ctx.font = "16px monospace";
    ctx.fillText(`answer within ${(remaining / 1000).toFixed(1)}s`, 10, 24);
  }
  if (lost) {
    ctx.globalAlpha = 1.0;
    ctx.fillStyle = "#555";
    ctx.font = "18px sans-serif";
    ctx.fillText("connection lost - reconnecting...", 10, size.height / 2);
  }
  ctx.globalAlpha = 1.0;
}

export function drawSeries(
  ctx: CanvasRenderingContext2D,
  series: SeriesPoint[],
  color: string,
  label: string,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#ccc";
  ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(label, 6, 12);
  if (series.length < 2) return;

  const values = series.map((p) => p.value);
  const lo = Math.min(0, ...values);
  const hi = Math.max(1e-9, ...values);
  const x = (i: number) => (i / (series.length - 1)) * (width - 8) + 4;
  const y = (v: number) => height - 4 - ((v - lo) / (hi - lo)) * (height - 20);

  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  series.forEach((p, i) => {
    if (i === 0) ctx.moveTo(x(i), y(p.value));
    else ctx.lineTo(x(i), y(p.value));
  });
  ctx.stroke();
}

export function drawBudgetMeter(element: HTMLElement, fraction: number): void {
  const pct = Math.round(fraction * 100);
  element.style.width = `${pct}%`;
  element.textContent = `${pct}%`;
}
