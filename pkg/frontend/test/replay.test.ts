import { readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, test } from "vitest";

import { parseTranscript } from "../src/replay.js";

const fixture = (name: string) =>
  readFileSync(join(__dirname, "fixtures", name), "utf-8");

describe("parseTranscript", () => {
  test("parses a real harness transcript", () => {
    const { events, error } = parseTranscript(fixture("scenario-1.ndjson"));
    expect(error).toBeNull();
    expect(events.at(-1)!.type).toBe("done");
    expect(events.filter((e) => e.type === "tool_call")).toHaveLength(3);
  });

  test("empty file gives an empty trace without error", () => {
    expect(parseTranscript("")).toEqual({ events: [], error: null });
    expect(parseTranscript("\n\n")).toEqual({ events: [], error: null });
  });

  test("truncated line reports its position and keeps earlier events", () => {
    const text = '{"ts":0,"type":"task_received"}\n{"ts":1,"ty';
    const { events, error } = parseTranscript(text);
    expect(events).toHaveLength(1);
    expect(error).toContain("line 2");
  });

  test("non-event JSON is rejected", () => {
    const { error } = parseTranscript('{"ts":0,"type":"x"}\n[1,2,3]\n');
    expect(error).toContain("line 2");
  });
});
