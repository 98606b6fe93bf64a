/** Console controller: wires the API client, view model and renderers.
 *
 * Kept free of planning logic on purpose: the only writes this app ever
 * performs are session creation and clarification answers.
 */

import { ApiError, OrchestratorClient } from "./api.js";
import {
  applyEvent,
  emptyView,
  nextEventIndex,
  withAnswering,
  withToast,
  type SessionView,
} from "./model.js";
import {
  renderBanner,
  renderClarification,
  renderPlant,
  renderSessions,
  renderToast,
  renderTrace,
} from "./render.js";
import { parseTranscript } from "./replay.js";
import type { Task } from "./types.js";

export interface ConsoleDom {
  banner: HTMLElement;
  sessions: HTMLElement;
  trace: HTMLElement;
  clarification: HTMLElement;
  plant: HTMLElement;
  toast: HTMLElement;
}

const RETRY_DELAY_MS = 1000;

export class ConsoleApp {
  view: SessionView | null = null;
  replayMode = false;

  constructor(
    public client: OrchestratorClient,
    private dom: ConsoleDom,
    private retryDelayMs: number = RETRY_DELAY_MS,
  ) {}

  async submitTask(task: Task, planner?: string): Promise<string> {
    let sessionId: string;
    try {
      sessionId = await this.client.createSession(task, planner);
    } catch (err) {
      renderBanner(this.dom.banner, `orchestrator unreachable: ${describe(err)}`);
      throw err;
    }
    renderBanner(this.dom.banner, null);
    void this.refreshSessions();
    await this.follow(sessionId);
    return sessionId;
  }

  /** Subscribe to a session's event stream, resuming after disconnects,
   * until the trace terminates. */
  async follow(sessionId: string): Promise<void> {
    this.replayMode = false;
    this.view = emptyView(sessionId);
    this.renderAll();
    while (this.view.terminal === null) {
      try {
        for await (const event of this.client.events(sessionId, nextEventIndex(this.view))) {
          if (this.view.sessionId !== sessionId) return; // user switched away
          this.view = applyEvent(this.view, event);
          this.renderAll();
        }
        if (this.view.terminal === null) {
          // stream ended early (server restart); go around and resume
          await sleep(this.retryDelayMs);
        }
      } catch (err) {
        renderBanner(this.dom.banner, `event stream lost: ${describe(err)}; retrying`);
        await sleep(this.retryDelayMs);
      }
    }
    renderBanner(this.dom.banner, null);
    void this.refreshSessions();
  }

  async answer(answer: unknown): Promise<void> {
    if (this.view === null || this.view.pending === null || this.view.answering) return;
    this.view = withAnswering(this.view, true);
    this.renderAll();
    try {
      const outcome = await this.client.answerClarification(this.view.sessionId, answer);
      this.view = withToast(
        withAnswering(this.view, false),
        outcome === "conflict" ? "session already resumed elsewhere" : null,
      );
    } catch (err) {
      this.view = withToast(withAnswering(this.view, false), `answer failed: ${describe(err)}`);
    }
    this.renderAll();
  }

  replayTranscript(text: string): void {
    this.replayMode = true;
    const { events, error } = parseTranscript(text);
    this.view = events.reduce(applyEvent, emptyView("replay"));
    this.view = withAnswering(this.view, true); // read-only: never answerable
    this.renderAll();
    renderBanner(this.dom.banner, error === null ? null : `transcript error: ${error}`);
  }

  renderAll(): void {
    if (this.view === null) return;
    renderTrace(this.dom.trace, this.view.events);
    renderClarification(
      this.dom.clarification,
      this.replayMode ? null : this.view.pending,
      this.view.answering,
      (answer) => void this.answer(answer),
    );
    renderToast(this.dom.toast, this.view);
  }

  async refreshPlant(): Promise<void> {
    try {
      renderPlant(this.dom.plant, await this.client.plant());
    } catch {
      // plant proxy is optional; leave the last good snapshot in place
    }
  }

  async refreshSessions(): Promise<void> {
    try {
      const sessions = await this.client.sessions();
      renderSessions(this.dom.sessions, sessions, this.view?.sessionId ?? null, (id) =>
        void this.follow(id),
      );
    } catch {
      // list refresh is best-effort
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.message} (${err.status})`;
  return err instanceof Error ? err.message : String(err);
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Browser entry point. */
export function boot(): void {
  const query = new URLSearchParams(window.location.search);
  const base = query.get("api") ?? "http://127.0.0.1:8800";
  const dom: ConsoleDom = {
    banner: document.getElementById("banner")!,
    sessions: document.getElementById("sessions")!,
    trace: document.getElementById("trace")!,
    clarification: document.getElementById("clarification")!,
    plant: document.getElementById("plant")!,
    toast: document.getElementById("toast")!,
  };
  const app = new ConsoleApp(new OrchestratorClient(base), dom);

  const form = document.getElementById("task-form") as HTMLFormElement;
  form.addEventListener("submit", (submitEvent) => {
    submitEvent.preventDefault();
    const data = new FormData(form);
    const freeText = String(data.get("free_text") ?? "").trim();
    const task: Task = freeText
      ? { free_text: freeText }
      : {
          workpiece: String(data.get("workpiece")),
          material: String(data.get("material")),
          diameter_mm: Number(data.get("diameter_mm")),
          target_station: String(data.get("target_station")),
        };
    const planner = String(data.get("planner") ?? "") || undefined;
    void app.submitTask(task, planner).catch(() => undefined);
  });

  const replayInput = document.getElementById("replay-file") as HTMLInputElement;
  replayInput.addEventListener("change", () => {
    const file = replayInput.files?.[0];
    if (!file) return;
    void file.text().then((text) => app.replayTranscript(text));
  });

  void app.refreshPlant();
  void app.refreshSessions();
  setInterval(() => void app.refreshPlant(), 1000); // 1 Hz snapshot poll
  setInterval(() => void app.refreshSessions(), 2000);
}

declare global {
  interface Window {
    __CONSOLE_NO_BOOT__?: boolean;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && !window.__CONSOLE_NO_BOOT__) {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", boot);
  } else if (document.getElementById("task-form")) {
    boot();
  }
}
