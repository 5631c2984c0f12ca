import { describe, expect, it } from "vitest";

import { GatewayClient, GatewayError } from "../src/client.js";

type Call = { url: string; init?: RequestInit };

function scripted(status: number, body: unknown) {
  const calls: Call[] = [];
  const fetchFn = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
  return { calls, fetchFn };
}

describe("GatewayClient", () => {
  it("creates a session and returns its id", async () => {
    const { calls, fetchFn } = scripted(201, { session_id: "s1" });
    const client = new GatewayClient("http://gw", null, fetchFn);
    expect(await client.createSession("rag")).toBe("s1");
    expect(calls[0]?.url).toBe("http://gw/v1/sessions");
    expect(calls[0]?.init?.body).toBe('{"workflow_id":"rag"}');
  });

  it("attaches the bearer token to every request", async () => {
    const { calls, fetchFn } = scripted(200, { workflows: [] });
    const client = new GatewayClient("http://gw", "sekrit", fetchFn);
    await client.listWorkflows();
    const headers = calls[0]?.init?.headers as Record<string, string>;
    expect(headers.authorization).toBe("Bearer sekrit");
  });

  it("maps 404 onto a GatewayError with the server detail", async () => {
    const { fetchFn } = scripted(404, { detail: "unknown workflow 'ghost'" });
    const client = new GatewayClient("http://gw", null, fetchFn);
    await expect(client.createSession("ghost")).rejects.toMatchObject({
      status: 404,
      detail: "unknown workflow 'ghost'",
    });
  });

  it("carries validation diagnostics through a 422", async () => {
    const { fetchFn } = scripted(422, {
      detail: "workflow does not validate",
      diagnostics: [{ code: "W002", message: "two supervisors", severity: "error" }],
    });
    const client = new GatewayClient("http://gw", null, fetchFn);
    const err = await client.createSession("bad").catch((e) => e);
    expect(err).toBeInstanceOf(GatewayError);
    expect(err.diagnostics).toEqual([
      { code: "W002", message: "two supervisors", severity: "error" },
    ]);
  });

  it("sends text and files as one multipart message", async () => {
    const { calls, fetchFn } = scripted(202, { turn_id: "s1-t1" });
    const client = new GatewayClient("http://gw", null, fetchFn);
    const file = new File([new Uint8Array([137, 80])], "pic.png", { type: "image/png" });
    expect(await client.sendMessage("s1", "look", [file])).toBe("s1-t1");
    const form = calls[0]?.init?.body as FormData;
    expect(form.get("text")).toBe("look");
    expect((form.get("files") as File).name).toBe("pic.png");
  });

  it.each([[409], [413], [415]])("surfaces %d as a message-level error", async (status) => {
    const { fetchFn } = scripted(status, { detail: `rejected with ${status}` });
    const client = new GatewayClient("http://gw", null, fetchFn);
    await expect(client.sendMessage("s1", "x")).rejects.toMatchObject({
      status,
      detail: `rejected with ${status}`,
    });
  });

  it("builds content-addressed blob and resumable event URLs", () => {
    const client = new GatewayClient("http://gw");
    expect(client.blobUrl("abc123")).toBe("http://gw/v1/blobs/abc123");
    expect(client.eventsUrl("s1", 42)).toBe("http://gw/v1/sessions/s1/events?from_seq=42");
  });
});
