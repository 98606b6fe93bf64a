/** HTTP client for the orchestrator session API.
 *
 * The console's only writes are session creation and clarification answers;
 * everything else is read-only. It never speaks MCP or the device bus.
 */

import { streamNdjson } from "./ndjson.js";
import type { PlantSnapshot, SessionSummary, Task, TraceEvent } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, public status: number) {
    super(message);
  }
}

export class OrchestratorClient {
  constructor(public baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async createSession(task: Task, planner?: string): Promise<string> {
    const resp = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(planner ? { task, planner } : { task }),
    });
    if (!resp.ok) {
      throw new ApiError(await errorText(resp), resp.status);
    }
    const body = (await resp.json()) as { session_id: string };
    return body.session_id;
  }

  /** Stream trace events from `from` onwards; ends at the terminal event. */
  async *events(sessionId: string, from = 0): AsyncGenerator<TraceEvent> {
    const url = `${this.baseUrl}/sessions/${sessionId}/events${from ? `?from=${from}` : ""}`;
    const resp = await fetch(url);
    if (!resp.ok || resp.body === null) {
      throw new ApiError(await errorText(resp), resp.status);
    }
    for await (const obj of streamNdjson(resp.body)) {
      yield obj as TraceEvent;
    }
  }

  /** Returns "ok", or "conflict" when the session is not waiting (stale
   * answer, second tab). */
  async answerClarification(sessionId: string, answer: unknown): Promise<"ok" | "conflict"> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/clarification`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ answer }),
    });
    if (resp.status === 409) return "conflict";
    if (!resp.ok) throw new ApiError(await errorText(resp), resp.status);
    return "ok";
  }

  async plant(): Promise<PlantSnapshot> {
    const resp = await fetch(`${this.baseUrl}/plant`);
    if (!resp.ok) throw new ApiError(await errorText(resp), resp.status);
    return (await resp.json()) as PlantSnapshot;
  }

  async sessions(): Promise<SessionSummary[]> {
    const resp = await fetch(`${this.baseUrl}/sessions`);
    if (!resp.ok) throw new ApiError(await errorText(resp), resp.status);
    return (await resp.json()) as SessionSummary[];
  }
}

async function errorText(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { error?: string };
    return body.error ?? `HTTP ${resp.status}`;
  } catch {
    return `HTTP ${resp.status}`;
  }
}
