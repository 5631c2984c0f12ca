// Incremental text/event-stream parser.
//
// Chunks arrive at arbitrary byte boundaries, so the parser buffers the
// trailing partial line between push() calls.  Field handling follows the
// SSE spec: `event:`, `data:` (multi-line joined with \n), `id:`, one
// optional leading space stripped from values, `:`-prefixed comment lines
// surfaced separately (the gateway uses them as heartbeats).

import type { Frame } from "./types.js";

export interface SseEvent {
  event: string;
  id: number | null;
  data: string;
}

export class SseParser {
  private buffer = "";
  private event: string | null = null;
  private id: number | null = null;
  private data: string[] = [];

  push(chunk: string): { events: SseEvent[]; comments: string[] } {
    this.buffer += chunk;
    const events: SseEvent[] = [];
    const comments: string[] = [];

    for (;;) {
      const nl = this.buffer.indexOf("\n");
      if (nl === -1) break;
      let line = this.buffer.slice(0, nl);
      this.buffer = this.buffer.slice(nl + 1);
      if (line.endsWith("\r")) line = line.slice(0, -1);

      if (line === "") {
        if (this.event !== null || this.data.length > 0) {
          events.push({
            event: this.event ?? "message",
            id: this.id,
            data: this.data.join("\n"),
          });
        }
        this.event = null;
        this.id = null;
        this.data = [];
        continue;
      }
      if (line.startsWith(":")) {
        comments.push(line.slice(1).trimStart());
        continue;
      }

      const colon = line.indexOf(":");
      const field = colon === -1 ? line : line.slice(0, colon);
      let value = colon === -1 ? "" : line.slice(colon + 1);
      if (value.startsWith(" ")) value = value.slice(1);

      switch (field) {
        case "event":
          this.event = value;
          break;
        case "data":
          this.data.push(value);
          break;
        case "id": {
          const n = Number(value);
          if (Number.isInteger(n)) this.id = n;
          break;
        }
        default:
          break; // unknown fields are ignored per spec
      }
    }
    return { events, comments };
  }
}

export function toFrame(ev: SseEvent): Frame {
  return { event: ev.event, id: ev.id ?? 0, data: JSON.parse(ev.data) };
}
