/** Console entry point: websocket wiring, DOM events, render loop. */

import { ConsoleSession } from "./session.js";
import { drawBudgetMeter, drawSeries, drawWorkspace } from "./render.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

function main(): void {
  const host = param("host", window.location.hostname || "127.0.0.1");
  const port = param("port", "8765");
  const sessionId = param("session", "console");

  const scene = document.getElementById("scene") as HTMLCanvasElement;
  const returnsChart = document.getElementById("returns") as HTMLCanvasElement;
  const queriesChart = document.getElementById("queries") as HTMLCanvasElement;
  const meter = document.getElementById("meter-fill") as HTMLElement;
  const status = document.getElementById("status") as HTMLElement;
  const logList = document.getElementById("query-log") as HTMLElement;

  let socket: WebSocket | null = null;
  const session = new ConsoleSession({
    sessionId,
    send: (line) => socket?.send(line),
  });

  function connect(): void {
    socket = new WebSocket(`ws://${host}:${port}`);
    socket.addEventListener("open", () => session.markLive());
    socket.addEventListener("message", (event) => {
      session.handleMessage(String(event.data));
    });
    socket.addEventListener("close", () => {
      session.markLost();
      setTimeout(connect, 1500);
    });
    socket.addEventListener("error", () => socket?.close());
  }

  scene.addEventListener("click", (event) => {
    const rect = scene.getBoundingClientRect();
    const point = { x: event.clientX - rect.left, y: event.clientY - rect.top };
    const result = session.submitCorrection(point, {
      width: rect.width,
      height: rect.height,
    });
    if (!result.ok && result.notice) {
      status.textContent = result.notice;
      setTimeout(() => (status.textContent = ""), 2500);
    }
  });

  setInterval(() => session.expireDeadline(), 100);

  function render(): void {
    drawWorkspace(scene.getContext("2d")!, session);
    drawSeries(returnsChart.getContext("2d")!, session.returnSeries,
      "#2980b9", "episode return");
    drawSeries(queriesChart.getContext("2d")!, session.queriesPerEpisodeSeries,
      "#27ae60", "queries / episode");
    drawBudgetMeter(meter, session.budgetFraction());
    const last = session.queryLog.slice(-8).reverse();
    logList.innerHTML = last
      .map((e) => {
        const action = e.action
          ? `(${e.action[0].toFixed(3)}, ${e.action[1].toFixed(3)})`
          : "-";
        return `<li>step ${e.step}: ${e.answeredBy} ${action} [${e.latencyMs}ms]</li>`;
      })
      .join("");
    requestAnimationFrame(render);
  }

  connect();
  requestAnimationFrame(render);
}

window.addEventListener("load", main);
