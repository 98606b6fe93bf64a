// @vitest-environment jsdom
//
// Console round-trip against a mock orchestrator speaking the documented
// wire contract: submit the scenario-2 task, see the clarification card the
// moment its event arrives, click 8, and watch the session resume to done.

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { afterEach, beforeEach, describe, expect, test } from "vitest";

import { OrchestratorClient } from "../src/api.js";
import { ConsoleApp, type ConsoleDom } from "../src/main.js";
import { parseTranscript } from "../src/replay.js";
import type { StructuredTask, TraceEvent } from "../src/types.js";
import { startMockOrchestrator, type MockOrchestrator } from "./mockOrchestrator.js";

const transcript = parseTranscript(
  readFileSync(join(__dirname, "fixtures", "scenario-2.ndjson"), "utf-8"),
);

const PLANT = {
  clock: 0,
  stations: ["storage", "drill_station", "assembly_station", "dock"],
  workpieces: { wp1: { location: "drill_station", material: "steel", holes: [] } },
  robot: { location: "dock", carrying: null },
  drill: { state: "Idle", current_job: null, last_error: null },
};

const TASK: StructuredTask = {
  workpiece: "wp1",
  material: "steel",
  diameter_mm: 7,
  target_station: "assembly_station",
};

function makeDom(): ConsoleDom {
  const make = (id: string) => {
    const node = document.createElement("div");
    node.id = id;
    document.body.appendChild(node);
    return node;
  };
  document.body.replaceChildren();
  return {
    banner: make("banner"),
    sessions: make("sessions"),
    trace: make("trace"),
    clarification: make("clarification"),
    plant: make("plant"),
    toast: make("toast"),
  };
}

async function until(predicate: () => boolean, what: string, timeoutMs = 5000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
  throw new Error(`timed out waiting for ${what}`);
}

describe("scenario-2 round trip", () => {
  let mock: MockOrchestrator;
  let dom: ConsoleDom;
  let app: ConsoleApp;

  beforeEach(async () => {
    expect(transcript.error).toBeNull();
    mock = await startMockOrchestrator(transcript.events as TraceEvent[], PLANT);
    dom = makeDom();
    app = new ConsoleApp(new OrchestratorClient(mock.base), dom, 10);
  });

  afterEach(async () => {
    await mock.close();
  });

  test("clarification card appears with the request and clicking 8 resumes to done", async () => {
    const session = app.submitTask(TASK);

    // the card must show up as soon as the clarification_request event lands
    await until(
      () => dom.clarification.querySelector(".option-button") !== null,
      "clarification card",
    );
    const lastRow = dom.trace.lastElementChild as HTMLElement;
    expect(lastRow.dataset.type).toBe("clarification_request");
    expect(app.view!.pending!.category).toBe("unsupported_diameter");

    const options = [...dom.clarification.querySelectorAll(".option-button")];
    expect(options.map((b) => b.textContent)).toEqual(
      ["3", "5", "6", "8", "10", "12", "16", "20", "25", "30", "40", "50"],
    );
    (options.find((b) => b.textContent === "8") as HTMLButtonElement).click();

    await session;
    expect(mock.answers).toEqual([8]);
    expect(app.view!.terminal).toBe("done");
    expect(dom.clarification.classList.contains("hidden")).toBe(true);

    // full trace rendered in order, ending in the done row
    const ts = [...dom.trace.children].map((row) => Number((row as HTMLElement).dataset.ts));
    expect(ts).toEqual(transcript.events.map((e) => e.ts));
    expect((dom.trace.lastElementChild as HTMLElement).dataset.type).toBe("done");
  });

  test("a stale answer from a second tab gets a conflict toast", async () => {
    const session = app.submitTask(TASK);
    await until(() => app.view?.pending != null, "pending clarification");

    // tab A answers through its own connection
    const other = new OrchestratorClient(mock.base);
    expect(await other.answerClarification("sess-1", 8)).toBe("ok");
    await session;

    // tab B answers late: the orchestrator replies 409 and the UI toasts
    expect(await other.answerClarification("sess-1", 12)).toBe("conflict");
    expect(mock.answers).toEqual([8]);
  });

  test("plant panel renders from the snapshot endpoint", async () => {
    await app.refreshPlant();
    expect(dom.plant.querySelector('[data-station="drill_station"]')!.textContent).toContain(
      "wp1",
    );
  });

  test("session list shows the running session", async () => {
    await app.refreshSessions();
    expect(dom.sessions.textContent).toContain("sess-1");
  });
});

describe("orchestrator down", () => {
  test("submit shows the connection banner and creates no session", async () => {
    const dom = makeDom();
    const app = new ConsoleApp(new OrchestratorClient("http://127.0.0.1:9"), dom, 10);
    await expect(app.submitTask(TASK)).rejects.toThrow();
    expect(dom.banner.textContent).toContain("orchestrator unreachable");
    expect(dom.trace.childElementCount).toBe(0);
  });
});

describe("replay is read-only", () => {
  test("replaying scenario-2 renders the trace but no live card", () => {
    const dom = makeDom();
    const app = new ConsoleApp(new OrchestratorClient("http://127.0.0.1:9"), dom, 10);
    app.replayTranscript(
      readFileSync(join(__dirname, "fixtures", "scenario-2.ndjson"), "utf-8"),
    );
    expect(dom.trace.childElementCount).toBe(transcript.events.length);
    expect(dom.clarification.classList.contains("hidden")).toBe(true);
    expect(dom.banner.classList.contains("hidden")).toBe(true);
  });

  test("a truncated transcript surfaces a parse error panel", () => {
    const dom = makeDom();
    const app = new ConsoleApp(new OrchestratorClient("http://127.0.0.1:9"), dom, 10);
    app.replayTranscript('{"ts":0,"type":"task_received"}\n{"ts":1,"ty');
    expect(dom.banner.textContent).toContain("transcript error");
    expect(dom.trace.childElementCount).toBe(1);
  });
});
