// Resumable event-stream subscription.
//
// One live stream per open session.  The subscription remembers the next
// sequence number it expects; after any disconnect it reopens the stream
// with `from_seq` set to that number, and anything the server replays
// below it is dropped.  Together those two rules make delivery exactly
// once in frame order, no matter how often the connection breaks.

import type { GatewayClient } from "./client.js";
import { SseParser, toFrame } from "./sse.js";
import type { Frame } from "./types.js";

export type StreamState = "connecting" | "open" | "reconnecting" | "stopped";

export interface StreamCallbacks {
  onFrame: (frame: Frame) => void;
  onState?: (state: StreamState, detail?: string) => void;
  onHeartbeat?: () => void;
}

const RECONNECT_DELAY_MS = 500;

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class EventStream {
  private nextSeq: number;
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(
    private readonly client: GatewayClient,
    private readonly sessionId: string,
    private readonly callbacks: StreamCallbacks,
    fromSeq = 1,
    private readonly delayFn: (ms: number) => Promise<void> = sleep,
  ) {
    this.nextSeq = fromSeq;
  }

  get cursor(): number {
    return this.nextSeq;
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.callbacks.onState?.("stopped");
  }

  async run(): Promise<void> {
    let attempt = 0;
    while (!this.stopped) {
      this.callbacks.onState?.(attempt === 0 ? "connecting" : "reconnecting", `#${attempt}`);
      this.controller = new AbortController();
      try {
        const resp = await this.client.openStream(
          this.sessionId,
          this.nextSeq,
          this.controller.signal,
        );
        if (!resp.ok || resp.body === null) {
          throw new Error(`stream request failed with ${resp.status}`);
        }
        this.callbacks.onState?.("open");
        attempt = 0;
        await this.consume(resp.body);
      } catch (err) {
        if (this.stopped) return;
        attempt += 1;
        await this.delayFn(RECONNECT_DELAY_MS);
        continue;
      }
      if (this.stopped) return;
      // server closed a healthy stream; resume from the cursor
      attempt += 1;
      await this.delayFn(RECONNECT_DELAY_MS);
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return;
      const { events, comments } = parser.push(decoder.decode(value, { stream: true }));
      if (comments.length > 0) this.callbacks.onHeartbeat?.();
      for (const ev of events) {
        const frame = toFrame(ev);
        if (frame.id < this.nextSeq) continue; // replayed duplicate
        this.nextSeq = frame.id + 1;
        this.callbacks.onFrame(frame);
      }
    }
  }
}
