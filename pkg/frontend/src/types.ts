/** Shared shapes for the orchestrator wire formats the console consumes. */

export interface TraceEvent {
  ts: number;
  type: string;
  [key: string]: unknown;
}

export interface ToolCallEvent extends TraceEvent {
  type: "tool_call";
  server: string | null;
  tool: string;
  args: Record<string, unknown>;
}

export interface ToolResultEvent extends TraceEvent {
  type: "tool_result";
  server: string | null;
  tool: string;
  is_error: boolean;
  content: string[];
  structured: Record<string, unknown> | null;
}

export interface ClarificationRequestEvent extends TraceEvent {
  type: "clarification_request";
  question: string;
  options: unknown[] | null;
  category: string | null;
}

export interface StructuredTask {
  workpiece: string;
  material: string;
  diameter_mm: number;
  target_station: string;
}

export type Task = StructuredTask | { free_text: string };

export interface SessionSummary {
  session_id: string;
  task: Record<string, unknown>;
  terminal: string | null;
  pending_clarification: boolean;
  events: number;
}

export interface PlantSnapshot {
  clock: number;
  stations: string[];
  workpieces: Record<
    string,
    { location: string | null; material: string; holes: { diameter_mm: number; rpm_used: number }[] }
  >;
  robot: { location: string; carrying: string | null };
  drill: { state: string; current_job: Record<string, unknown> | null; last_error: string | null };
}
