// Pure frame-log reducer: UI state is a function of the received frames
// and nothing else, so replaying a recorded log reproduces the identical
// transcript.  Frames are sorted by id before reduction; rendered order
// is sequence order by construction.

import type {
  Badges,
  Frame,
  MessageBody,
  Transcript,
  TraceEntry,
  TurnView,
  UiMessage,
} from "./types.js";

function emptyBadges(): Badges {
  return { degraded: false, alert: false, source: null };
}

function asSource(value: unknown): "rag" | "web" | null {
  return value === "rag" || value === "web" ? value : null;
}

function messageFromBody(body: MessageBody, badges: Badges): UiMessage {
  return {
    seq: body.seq,
    author: body.author,
    text: body.text,
    media: body.media,
    badges,
  };
}

interface TurnAccumulator {
  view: TurnView;
  bodies: Map<string, MessageBody>;
  traceIds: Map<string, TraceEntry>;
  sawTerminal: boolean;
}

function newTurn(turnId: string): TurnAccumulator {
  return {
    view: { turnId, messages: [], trace: [], alerts: [], error: null, running: true },
    bodies: new Map(),
    traceIds: new Map(),
    sawTerminal: false,
  };
}

function describe(frame: Frame): TraceEntry | null {
  const body = frame.data.body;
  switch (frame.event) {
    case "decision": {
      const worker = body.worker;
      const label = body.decision === "finish" ? "decision: finish" : `decision: ${worker}`;
      return { seq: frame.id, label, detail: String(body.raw ?? "") };
    }
    case "tool_call":
      return {
        seq: frame.id,
        label: `tool: ${body.tool}`,
        detail: `worker=${body.worker} source=${body.source}`,
      };
    case "backend_call":
      return {
        seq: frame.id,
        label: `backend: ${body.binding}`,
        detail: `${body.kind} ${body.model ?? ""}`.trim(),
      };
    case "degraded":
      return { seq: frame.id, label: "degraded", detail: String(body.reason ?? "") };
    case "alert":
      return {
        seq: frame.id,
        label: "alert",
        detail: `binding=${body.binding} count=${body.count}`,
      };
    default:
      return null;
  }
}

export function reduceTranscript(frames: Frame[]): Transcript {
  const ordered = [...frames].sort((a, b) => a.id - b.id);
  const turns = new Map<string, TurnAccumulator>();
  const order: string[] = [];

  for (const frame of ordered) {
    const turnId = frame.data.turn_id;
    let acc = turns.get(turnId);
    if (!acc) {
      acc = newTurn(turnId);
      turns.set(turnId, acc);
      order.push(turnId);
    }

    switch (frame.event) {
      case "message": {
        const body = frame.data.body as unknown as MessageBody;
        acc.bodies.set(body.message_id, body);
        if (body.author === "user") {
          acc.view.messages.push(messageFromBody(body, emptyBadges()));
        } else {
          const entry = {
            seq: frame.id,
            label: `message: ${body.author}`,
            detail: body.text,
          };
          acc.view.trace.push(entry);
          acc.traceIds.set(body.message_id, entry);
        }
        break;
      }
      case "done": {
        acc.sawTerminal = true;
        acc.view.running = false;
        const finalId = String(frame.data.body.message_id ?? "");
        const body = acc.bodies.get(finalId);
        if (body) {
          const badges: Badges = {
            degraded: frame.data.body.degraded === true || body.meta.degraded === "true",
            alert: acc.view.alerts.length > 0,
            source: asSource(body.meta.source),
          };
          acc.view.messages.push(messageFromBody(body, badges));
          // the promoted answer leaves the trace so it renders exactly once
          const promoted = acc.traceIds.get(finalId);
          if (promoted) {
            acc.view.trace = acc.view.trace.filter((e) => e !== promoted);
          }
        }
        break;
      }
      case "error": {
        acc.sawTerminal = true;
        acc.view.running = false;
        const body = frame.data.body;
        acc.view.error = `${body.error}: ${body.detail}`;
        break;
      }
      case "alert": {
        const entry = describe(frame);
        if (entry) acc.view.trace.push(entry);
        acc.view.alerts.push(entry?.detail ?? "");
        break;
      }
      default: {
        const entry = describe(frame);
        if (entry) acc.view.trace.push(entry);
        break;
      }
    }
  }

  const views = order.map((id) => turns.get(id)!.view);
  const last = order.length > 0 ? turns.get(order[order.length - 1]!)! : null;
  return {
    turns: views,
    typing: last !== null && !last.sawTerminal,
  };
}
