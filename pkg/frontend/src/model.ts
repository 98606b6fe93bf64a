/** View model: a pure reducer from trace events to what the screen shows.
 *
 * The clarification card is pending exactly when the last blocking event is
 * an unanswered clarification_request and the session has not terminated.
 */

import type { ClarificationRequestEvent, TraceEvent } from "./types.js";

export interface PendingClarification {
  ts: number;
  question: string;
  options: unknown[] | null;
  category: string | null;
}

export interface SessionView {
  sessionId: string;
  events: TraceEvent[];
  terminal: "done" | "failed" | null;
  pending: PendingClarification | null;
  /** set while an answer POST is in flight so double-clicks do nothing */
  answering: boolean;
  toast: string | null;
}

export function emptyView(sessionId: string): SessionView {
  return { sessionId, events: [], terminal: null, pending: null, answering: false, toast: null };
}

/** Append one event, ignoring duplicates replayed after a reconnect. */
export function applyEvent(view: SessionView, event: TraceEvent): SessionView {
  if (view.events.some((e) => e.ts === event.ts)) {
    return view;
  }
  const events = [...view.events, event].sort((a, b) => a.ts - b.ts);
  return { ...view, events, ...derive(events) };
}

export function applyEvents(view: SessionView, incoming: TraceEvent[]): SessionView {
  return incoming.reduce(applyEvent, view);
}

function derive(events: TraceEvent[]): Pick<SessionView, "terminal" | "pending"> {
  let terminal: SessionView["terminal"] = null;
  let pending: PendingClarification | null = null;
  for (const event of events) {
    if (event.type === "done" || event.type === "failed") {
      terminal = event.type;
      pending = null;
    } else if (event.type === "clarification_request") {
      const request = event as ClarificationRequestEvent;
      pending = {
        ts: request.ts,
        question: request.question,
        options: request.options ?? null,
        category: request.category ?? null,
      };
    } else if (event.type === "clarification_answer") {
      pending = null;
    }
  }
  return { terminal, pending };
}

export function withToast(view: SessionView, toast: string | null): SessionView {
  return { ...view, toast };
}

export function withAnswering(view: SessionView, answering: boolean): SessionView {
  return { ...view, answering };
}

/** Index to resume an event stream from after a disconnect. */
export function nextEventIndex(view: SessionView): number {
  return view.events.length === 0 ? 0 : view.events[view.events.length - 1]!.ts + 1;
}
