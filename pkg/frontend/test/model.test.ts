import { describe, expect, test } from "vitest";

import { applyEvent, applyEvents, emptyView, nextEventIndex } from "../src/model.js";
import type { TraceEvent } from "../src/types.js";

const request: TraceEvent = {
  ts: 3,
  type: "clarification_request",
  question: "Which diameter?",
  options: [3, 5, 8],
  category: "unsupported_diameter",
};

function view(...events: TraceEvent[]) {
  return applyEvents(emptyView("s1"), events);
}

describe("pending clarification", () => {
  test("set while the request is the last blocking event", () => {
    const v = view({ ts: 0, type: "task_received" }, request);
    expect(v.pending).not.toBeNull();
    expect(v.pending!.question).toBe("Which diameter?");
    expect(v.pending!.options).toEqual([3, 5, 8]);
  });

  test("cleared by the matching answer", () => {
    const v = view(request, { ts: 4, type: "clarification_answer", answer: 8 });
    expect(v.pending).toBeNull();
  });

  test("cleared when the session terminates without an answer", () => {
    const v = view(request, { ts: 4, type: "failed", reason: "needs_user" });
    expect(v.pending).toBeNull();
    expect(v.terminal).toBe("failed");
  });

  test("a second request re-arms the card", () => {
    const v = view(
      request,
      { ts: 4, type: "clarification_answer", answer: 8 },
      { ...request, ts: 5, question: "really?" },
    );
    expect(v.pending!.question).toBe("really?");
  });
});

describe("event ordering and resume", () => {
  test("duplicates from a resumed stream are dropped", () => {
    const v = view(
      { ts: 0, type: "task_received" },
      { ts: 1, type: "plan_note" },
      { ts: 1, type: "plan_note" },
      { ts: 0, type: "task_received" },
    );
    expect(v.events.map((e) => e.ts)).toEqual([0, 1]);
  });

  test("out-of-order arrival is sorted by logical timestamp", () => {
    const v = view({ ts: 2, type: "plan_note" }, { ts: 0, type: "task_received" }, {
      ts: 1,
      type: "tools_discovered",
    });
    expect(v.events.map((e) => e.ts)).toEqual([0, 1, 2]);
  });

  test("nextEventIndex resumes after the newest event", () => {
    expect(nextEventIndex(emptyView("s"))).toBe(0);
    expect(nextEventIndex(view({ ts: 0, type: "task_received" }, { ts: 1, type: "done" }))).toBe(2);
  });
});

describe("terminal", () => {
  test("done marks the view terminal", () => {
    const v = view({ ts: 0, type: "task_received" }, { ts: 1, type: "done", summary: "ok" });
    expect(v.terminal).toBe("done");
  });

  test("applyEvent does not mutate the previous view", () => {
    const before = view({ ts: 0, type: "task_received" });
    const after = applyEvent(before, { ts: 1, type: "done" });
    expect(before.events).toHaveLength(1);
    expect(after.events).toHaveLength(2);
  });
});
