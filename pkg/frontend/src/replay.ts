/** Read-only replay of harness transcripts (the same NDJSON event schema
 * as the live stream, so the rendering pipeline is shared). */

import type { TraceEvent } from "./types.js";

export interface ReplayResult {
  events: TraceEvent[];
  error: string | null;
}

export function parseTranscript(text: string): ReplayResult {
  const events: TraceEvent[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i]!.trim();
    if (!line) continue;
    let parsed: unknown;
    try {
      parsed = JSON.parse(line);
    } catch {
      return { events, error: `line ${i + 1} is not valid JSON (truncated transcript?)` };
    }
    const event = parsed as TraceEvent;
    if (typeof event !== "object" || event === null || typeof event.type !== "string") {
      return { events, error: `line ${i + 1} is not a trace event` };
    }
    events.push(event);
  }
  return { events, error: null };
}
