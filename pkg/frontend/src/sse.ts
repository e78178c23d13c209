// Incremental parser for text/event-stream bodies read via fetch.
//
// The server frames each delta as "id: <seq>\ndata: <json>\n\n" and sends
// ": keepalive" comment lines during idle periods. Frames can arrive split
// across arbitrary chunk boundaries, so the parser buffers partial lines.

export interface SseEvent {
  id: string | null;
  data: string;
}

export class SseParser {
  private buffer = "";
  private id: string | null = null;
  private data: string[] = [];

  /** Feed one decoded chunk; returns every event completed by it. */
  push(chunk: string): SseEvent[] {
    this.buffer += chunk;
    const events: SseEvent[] = [];
    for (;;) {
      const newline = this.buffer.indexOf("\n");
      if (newline < 0) break;
      let line = this.buffer.slice(0, newline);
      this.buffer = this.buffer.slice(newline + 1);
      if (line.endsWith("\r")) line = line.slice(0, -1);
      const event = this.line(line);
      if (event) events.push(event);
    }
    return events;
  }

  private line(line: string): SseEvent | null {
    if (line === "") {
      if (this.data.length === 0) {
        this.id = null;
        return null;
      }
      const event = { id: this.id, data: this.data.join("\n") };
      this.id = null;
      this.data = [];
      return event;
    }
    if (line.startsWith(":")) return null; // comment / keepalive
    const colon = line.indexOf(":");
    const field = colon < 0 ? line : line.slice(0, colon);
    let value = colon < 0 ? "" : line.slice(colon + 1);
    if (value.startsWith(" ")) value = value.slice(1);
    if (field === "id") this.id = value;
    else if (field === "data") this.data.push(value);
    return null;
  }
}

export interface StreamHandle {
  close(): void;
  done: Promise<void>;
}

/**
 * Open the event stream and invoke onEvent per parsed frame. The returned
 * handle's `done` resolves when the stream ends (server close or abort)
 * and rejects on transport errors other than an intentional close.
 */
export function openEventStream(
  url: string,
  onEvent: (event: SseEvent) => void,
): StreamHandle {
  const controller = new AbortController();
  const done = (async () => {
    const response = await fetch(url, {
      signal: controller.signal,
      headers: { accept: "text/event-stream" },
    });
    if (!response.ok || !response.body) {
      throw new Error(`event stream failed: ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    for (;;) {
      const { done: finished, value } = await reader.read();
      if (finished) break;
      for (const event of parser.push(decoder.decode(value, { stream: true }))) {
        onEvent(event);
      }
    }
  })().catch((err) => {
    if (!controller.signal.aborted) throw err;
  });
  return { close: () => controller.abort(), done };
}
