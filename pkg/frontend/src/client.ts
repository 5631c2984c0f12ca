// Thin typed wrapper over the gateway's HTTP surface.  Configuration is
// exactly two values: base URL and optional bearer token.

import type { WorkflowInfo } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface Diagnostic {
  code: string;
  message: string;
  severity: string;
}

export class GatewayError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly diagnostics: Diagnostic[] = [],
  ) {
    super(`${status}: ${detail}`);
    this.name = "GatewayError";
  }
}

async function raise(resp: Response): Promise<never> {
  let detail = resp.statusText;
  let diagnostics: Diagnostic[] = [];
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
    if (Array.isArray(body.diagnostics)) diagnostics = body.diagnostics;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new GatewayError(resp.status, detail, diagnostics);
}

export class GatewayClient {
  constructor(
    readonly baseUrl: string,
    readonly token: string | null = null,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    return this.token ? { ...extra, authorization: `Bearer ${this.token}` } : extra;
  }

  private async request(path: string, init: RequestInit = {}): Promise<Response> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      ...init,
      headers: this.headers((init.headers as Record<string, string>) ?? {}),
    });
    if (!resp.ok) await raise(resp);
    return resp;
  }

  async listWorkflows(): Promise<WorkflowInfo[]> {
    const resp = await this.request("/v1/workflows");
    return (await resp.json()).workflows;
  }

  async createSession(workflowId: string): Promise<string> {
    const resp = await this.request("/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ workflow_id: workflowId }),
    });
    return (await resp.json()).session_id;
  }

  async sendMessage(
    sessionId: string,
    text: string,
    files: File[] = [],
  ): Promise<string> {
    const form = new FormData();
    if (text) form.append("text", text);
    for (const f of files) form.append("files", f, f.name);
    const resp = await this.request(`/v1/sessions/${sessionId}/messages`, {
      method: "POST",
      body: form,
    });
    return (await resp.json()).turn_id;
  }

  async ingest(file: File): Promise<{ doc_id: string; chunks: number }> {
    const form = new FormData();
    form.append("file", file, file.name);
    const resp = await this.request("/v1/rag/documents", { method: "POST", body: form });
    return resp.json();
  }

  /** Content-addressed media URL; <img>/<video> tags load straight from it. */
  blobUrl(digest: string): string {
    return `${this.baseUrl}/v1/blobs/${digest}`;
  }

  eventsUrl(sessionId: string, fromSeq: number): string {
    return `${this.baseUrl}/v1/sessions/${sessionId}/events?from_seq=${fromSeq}`;
  }

  /** Raw streaming GET for the event stream; the caller owns the body. */
  openStream(sessionId: string, fromSeq: number, signal?: AbortSignal): Promise<Response> {
    return this.fetchFn(this.eventsUrl(sessionId, fromSeq), {
      headers: this.headers({ accept: "text/event-stream" }),
      signal,
    } as RequestInit);
  }
}
