/** Newline-delimited JSON plumbing for the event stream and transcripts. */

/** Accumulates stream chunks and yields complete lines regardless of how
 * the transport split them. */
export class LineBuffer {
  private tail = "";

  push(chunk: string): string[] {
    this.tail += chunk;
    const lines: string[] = [];
    let idx: number;
    while ((idx = this.tail.indexOf("\n")) >= 0) {
      const line = this.tail.slice(0, idx).trim();
      this.tail = this.tail.slice(idx + 1);
      if (line) lines.push(line);
    }
    return lines;
  }

  /** Whatever is left after the stream closed (a truncated line, if any). */
  flush(): string | null {
    const rest = this.tail.trim();
    this.tail = "";
    return rest || null;
  }
}

/** Parse a response body as NDJSON objects, in order. Throws on a malformed
 * or truncated line: the orchestrator never emits partial lines, so seeing
 * one means the payload is not a trace. */
export async function* streamNdjson(body: ReadableStream<Uint8Array>): AsyncGenerator<unknown> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  const buffer = new LineBuffer();
  try {
    while (true) {
      const { value, done } = await reader.read();
      if (done) break;
      for (const line of buffer.push(decoder.decode(value, { stream: true }))) {
        yield JSON.parse(line);
      }
    }
    for (const line of buffer.push(decoder.decode())) {
      yield JSON.parse(line);
    }
    const leftover = buffer.flush();
    if (leftover !== null) {
      yield JSON.parse(leftover); // throws on truncation, by design
    }
  } finally {
    reader.releaseLock();
  }
}
