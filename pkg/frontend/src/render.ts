/** DOM rendering. Renderers rebuild their container from the model, so
 * on-screen order is exactly trace order no matter how the stream chunked. */

import type { PendingClarification, SessionView } from "./model.js";
import type {
  ClarificationRequestEvent,
  PlantSnapshot,
  SessionSummary,
  ToolCallEvent,
  ToolResultEvent,
  TraceEvent,
} from "./types.js";

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderTrace(container: HTMLElement, events: TraceEvent[]): void {
  container.replaceChildren();
  for (const event of events) {
    container.appendChild(traceRow(event));
  }
}

function traceRow(event: TraceEvent): HTMLElement {
  const row = el("div", `trace-row trace-${event.type}`);
  row.dataset.ts = String(event.ts);
  row.dataset.type = event.type;
  switch (event.type) {
    case "task_received": {
      row.appendChild(el("span", "row-label", "task"));
      row.appendChild(el("code", "row-body", JSON.stringify(event.task)));
      break;
    }
    case "tools_discovered": {
      const servers = event.servers as Record<string, string[]>;
      const text = Object.entries(servers)
        .map(([server, tools]) => `${server}: ${tools.join(", ") || "(none)"}`)
        .join(" | ");
      row.appendChild(el("span", "row-label", "tools"));
      row.appendChild(el("span", "row-body", text));
      const degraded = (event.degraded as string[]) ?? [];
      if (degraded.length) {
        row.appendChild(el("span", "badge badge-error", `degraded: ${degraded.join(", ")}`));
      }
      break;
    }
    case "plan_note": {
      row.appendChild(el("span", "row-label", "note"));
      row.appendChild(el("span", "row-body", String(event.note)));
      break;
    }
    case "tool_call": {
      const call = event as ToolCallEvent;
      row.classList.add("tool-call-row");
      row.appendChild(el("span", "badge badge-server", call.server ?? "?"));
      row.appendChild(el("span", "row-tool", call.tool));
      row.appendChild(el("code", "row-args", JSON.stringify(call.args)));
      break;
    }
    case "tool_result": {
      const result = event as ToolResultEvent;
      row.appendChild(
        el("span", `badge ${result.is_error ? "badge-error" : "badge-ok"}`,
           result.is_error ? "error" : "ok"),
      );
      row.appendChild(el("span", "row-body", result.content.join(" ")));
      break;
    }
    case "clarification_request": {
      const request = event as ClarificationRequestEvent;
      row.appendChild(el("span", "row-label", "needs you"));
      row.appendChild(el("span", "row-body", request.question));
      break;
    }
    case "clarification_answer": {
      row.appendChild(el("span", "row-label", "answered"));
      row.appendChild(el("span", "row-body", String(event.answer)));
      break;
    }
    case "done": {
      row.appendChild(el("span", "badge badge-ok", "done"));
      row.appendChild(el("span", "row-body", String(event.summary ?? "")));
      break;
    }
    case "failed": {
      row.appendChild(el("span", "badge badge-error", "failed"));
      row.appendChild(el("span", "row-body", String(event.reason ?? "")));
      break;
    }
    default: {
      row.appendChild(el("span", "row-label", event.type));
    }
  }
  return row;
}

export function renderClarification(
  container: HTMLElement,
  pending: PendingClarification | null,
  answering: boolean,
  onAnswer: (answer: unknown) => void,
): void {
  container.replaceChildren();
  if (pending === null) {
    container.classList.add("hidden");
    return;
  }
  container.classList.remove("hidden");
  const card = el("div", "clarification-card");
  card.appendChild(el("p", "clarification-question", pending.question));
  if (pending.options && pending.options.length > 0) {
    const list = el("div", "clarification-options");
    for (const option of pending.options) {
      const button = el("button", "option-button", String(option)) as HTMLButtonElement;
      button.disabled = answering;
      button.addEventListener("click", () => onAnswer(option));
      list.appendChild(button);
    }
    card.appendChild(list);
  } else {
    const input = el("input", "clarification-input") as HTMLInputElement;
    input.placeholder = "your answer";
    const send = el("button", "option-button", "answer") as HTMLButtonElement;
    send.disabled = answering;
    send.addEventListener("click", () => onAnswer(input.value));
    card.appendChild(input);
    card.appendChild(send);
  }
  container.appendChild(card);
}

export function renderPlant(container: HTMLElement, snapshot: PlantSnapshot): void {
  container.replaceChildren();
  const grid = el("div", "plant-grid");
  for (const station of snapshot.stations) {
    const cell = el("div", "station");
    cell.dataset.station = station;
    cell.appendChild(el("h4", "station-name", station));
    for (const [id, wp] of Object.entries(snapshot.workpieces)) {
      if (wp.location === station) {
        cell.appendChild(el("span", "chip chip-workpiece", `${id} (${wp.material}, ${wp.holes.length} holes)`));
      }
    }
    if (snapshot.robot.location === station) {
      const label = snapshot.robot.carrying
        ? `robot ▸ carrying ${snapshot.robot.carrying}`
        : "robot";
      cell.appendChild(el("span", "chip chip-robot", label));
    }
    if (station === "drill_station") {
      cell.appendChild(el("span", `chip chip-drill drill-${snapshot.drill.state}`, `drill: ${snapshot.drill.state}`));
    }
    grid.appendChild(cell);
  }
  container.appendChild(grid);
  container.appendChild(el("div", "plant-clock", `t = ${snapshot.clock} ms`));
}

export function renderSessions(
  container: HTMLElement,
  sessions: SessionSummary[],
  activeId: string | null,
  onSelect: (sessionId: string) => void,
): void {
  container.replaceChildren();
  for (const session of sessions) {
    const row = el("button", "session-row") as HTMLButtonElement;
    row.dataset.sessionId = session.session_id;
    if (session.session_id === activeId) row.classList.add("active");
    const status = session.terminal ?? (session.pending_clarification ? "waiting for you" : "running");
    row.textContent = `${session.session_id} — ${status}`;
    row.addEventListener("click", () => onSelect(session.session_id));
    container.appendChild(row);
  }
}

export function renderBanner(container: HTMLElement, message: string | null): void {
  container.textContent = message ?? "";
  container.classList.toggle("hidden", message === null);
}

export function renderToast(container: HTMLElement, view: SessionView): void {
  container.textContent = view.toast ?? "";
  container.classList.toggle("hidden", view.toast === null);
}
