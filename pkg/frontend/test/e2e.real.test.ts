// @vitest-environment jsdom
//
// The same scenario-2 round trip, but against the real cell: `harness serve`
// boots the plant, the three tool servers and the orchestrator in one child
// process and the console drives it over plain HTTP. Skipped when the Python
// package is not installed next to this repo.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";

import { afterAll, beforeAll, describe, expect, test } from "vitest";

import { OrchestratorClient } from "../src/api.js";
import { ConsoleApp, type ConsoleDom } from "../src/main.js";
import type { StructuredTask } from "../src/types.js";

const pythonAvailable =
  spawnSync("python3", ["-c", "import mcpcell"], { timeout: 20000 }).status === 0;

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

async function until(predicate: () => boolean, what: string, timeoutMs = 15000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
  throw new Error(`timed out waiting for ${what}`);
}

describe.skipIf(!pythonAvailable)("scenario-2 against the real cell", () => {
  let child: ChildProcess;
  let base = "";

  beforeAll(async () => {
    child = spawn(
      "python3",
      ["-m", "mcpcell.harness.cli", "serve", "--listen", "127.0.0.1:0"],
      { stdio: ["ignore", "pipe", "ignore"] },
    );
    let buffer = "";
    base = await new Promise<string>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("harness serve never came up")), 20000);
      child.stdout!.on("data", (chunk: Buffer) => {
        buffer += chunk.toString();
        const match = buffer.match(/session API listening on (\S+)/);
        if (match) {
          clearTimeout(timer);
          resolve(match[1]!);
        }
      });
      child.on("exit", () => reject(new Error("harness serve exited early")));
    });
  }, 30000);

  afterAll(() => {
    child.kill("SIGTERM");
  });

  test("clarify, click 8, session runs to done and the plant shows the hole", async () => {
    const dom = makeDom();
    const app = new ConsoleApp(new OrchestratorClient(base), dom, 50);
    const session = app.submitTask(TASK);

    await until(
      () => dom.clarification.querySelector(".option-button") !== null,
      "clarification card from the live orchestrator",
    );
    expect((dom.trace.lastElementChild as HTMLElement).dataset.type).toBe(
      "clarification_request",
    );

    const eight = [...dom.clarification.querySelectorAll(".option-button")].find(
      (b) => b.textContent === "8",
    ) as HTMLButtonElement;
    expect(eight).toBeDefined();
    eight.click();

    await session;
    expect(app.view!.terminal).toBe("done");

    await app.refreshPlant();
    const assembly = dom.plant.querySelector('[data-station="assembly_station"]')!;
    expect(assembly.textContent).toContain("wp1");
    expect(assembly.textContent).toContain("1 holes");
  }, 30000);
});
