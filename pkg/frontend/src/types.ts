// Gateway wire contract: one SSE frame per engine event, ids are the
// session's contiguous sequence numbers, `body` is the engine event verbatim.

export interface Frame {
  event: string;
  id: number;
  data: FrameData;
}

export interface FrameData {
  type: string;
  turn_id: string;
  seq: number;
  body: Record<string, unknown>;
}

export interface MediaRef {
  kind: string;
  digest: string;
  media_type: string;
}

export interface MessageBody {
  message_id: string;
  author: string;
  seq: number;
  text: string;
  media: MediaRef[];
  meta: Record<string, string>;
}

export interface WorkflowInfo {
  id: string;
  name: string;
  workers: string[];
}

// UI model: everything the renderer needs, derived purely from the frame log.

export type Source = "rag" | "web" | null;

export interface Badges {
  degraded: boolean;
  alert: boolean;
  source: Source;
}

export interface UiMessage {
  seq: number;
  author: string;
  text: string;
  media: MediaRef[];
  badges: Badges;
}

export interface TraceEntry {
  seq: number;
  label: string;
  detail: string;
}

export interface TurnView {
  turnId: string;
  messages: UiMessage[];
  trace: TraceEntry[];
  alerts: string[];
  error: string | null;
  running: boolean;
}

export interface Transcript {
  turns: TurnView[];
  typing: boolean;
}
