// Browser entry point: wires the gateway client, the resumable event
// stream, the pure reducer, and the renderer into one chat page.

import { GatewayClient, GatewayError } from "./client.js";
import { mountTranscript } from "./render.js";
import { EventStream, type StreamState } from "./stream.js";
import { reduceTranscript } from "./transcript.js";
import type { Frame, WorkflowInfo } from "./types.js";

const CSS = `
:root { color-scheme: light dark; }
body { margin: 0; font: 14px/1.5 system-ui, sans-serif; }
.shell { max-width: 760px; margin: 0 auto; padding: 16px; }
.setup, .composer { display: flex; gap: 8px; margin-bottom: 12px; flex-wrap: wrap; }
.setup input, .setup select, .composer input[type=text] { flex: 1; padding: 6px 8px; min-width: 160px; }
.banner { padding: 8px 12px; border-radius: 4px; margin-bottom: 12px; display: none; }
.banner.on { display: block; background: #b33; color: #fff; }
.diag { font-family: monospace; white-space: pre-wrap; color: #b33; }
.msg { margin: 8px 0; padding: 8px 12px; border-radius: 6px; }
.msg-user { background: #2563eb22; }
.msg-agent { background: #88888822; }
.msg-error { background: #b3333322; color: #b33; }
.msg-author { font-weight: 600; font-size: 12px; margin-bottom: 2px; }
.msg-body { white-space: pre-wrap; }
.badge { font-size: 10px; font-weight: 700; border-radius: 3px; padding: 1px 5px; margin-left: 6px; }
.badge-rag { background: #16a34a; color: #fff; }
.badge-web { background: #2563eb; color: #fff; }
.badge-degraded { background: #d97706; color: #fff; }
.badge-alert { background: #b33; color: #fff; }
.trace { margin: 6px 0 6px 12px; font-size: 12px; opacity: 0.85; }
.trace-label { font-weight: 600; }
.thumb { display: block; max-width: 320px; margin-top: 6px; border-radius: 4px; }
.typing { margin: 8px 0; opacity: 0.6; font-style: italic; }
.pending { opacity: 0.6; }
`;

interface AppState {
  client: GatewayClient | null;
  sessionId: string | null;
  frames: Frame[];
  stream: EventStream | null;
  pendingText: string | null;
  sendError: string | null;
}

const state: AppState = {
  client: null,
  sessionId: null,
  frames: [],
  stream: null,
  pendingText: null,
  sendError: null,
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

export function bootstrap(root: HTMLElement): void {
  const style = document.createElement("style");
  style.textContent = CSS;
  document.head.appendChild(style);

  const shell = el("div", { class: "shell" });
  const banner = el("div", { class: "banner" });
  const setup = el("div", { class: "setup" });
  const baseInput = el("input", { type: "text", value: "http://127.0.0.1:8080", title: "gateway" });
  const tokenInput = el("input", { type: "password", placeholder: "bearer token (optional)" });
  const workflowSelect = el("select");
  const openButton = el("button", {}, "open session");
  setup.append(baseInput, tokenInput, workflowSelect, openButton);

  const diagPanel = el("div", { class: "diag" });
  const chat = el("div", { class: "chat" });

  const composer = el("div", { class: "composer" });
  const textInput = el("input", { type: "text", placeholder: "message" });
  const fileInput = el("input", { type: "file", multiple: "" });
  const sendButton = el("button", {}, "send");
  composer.append(textInput, fileInput, sendButton);

  shell.append(banner, setup, diagPanel, chat, composer);
  root.appendChild(shell);

  const setBanner = (text: string | null) => {
    banner.textContent = text ?? "";
    banner.className = text ? "banner on" : "banner";
  };

  const redraw = () => {
    const client = state.client;
    if (!client) return;
    mountTranscript(chat, reduceTranscript(state.frames), (d) => client.blobUrl(d));
    if (state.pendingText !== null) {
      const row = el("div", { class: "msg msg-user pending" });
      row.append(el("div", { class: "msg-author" }, "user"));
      row.append(el("div", { class: "msg-body" }, state.pendingText));
      chat.appendChild(row);
    }
    if (state.sendError !== null) {
      chat.appendChild(el("div", { class: "msg msg-error" }, state.sendError));
    }
    chat.scrollTop = chat.scrollHeight;
  };

  const loadWorkflows = async () => {
    const client = new GatewayClient(baseInput.value, tokenInput.value || null);
    try {
      const workflows: WorkflowInfo[] = await client.listWorkflows();
      workflowSelect.replaceChildren(
        ...workflows.map((w) => el("option", { value: w.id }, `${w.name} (${w.workers.length} workers)`)),
      );
      setBanner(null);
    } catch {
      setBanner(`gateway unreachable at ${baseInput.value}`);
    }
  };

  const onStreamState = (s: StreamState) => {
    if (s === "reconnecting") setBanner("connection lost, resuming…");
    else if (s === "open") setBanner(null);
  };

  openButton.addEventListener("click", async () => {
    const client = new GatewayClient(baseInput.value, tokenInput.value || null);
    diagPanel.textContent = "";
    state.stream?.stop();
    try {
      const sessionId = await client.createSession(workflowSelect.value);
      state.client = client;
      state.sessionId = sessionId;
      state.frames = [];
      state.pendingText = null;
      state.sendError = null;
      redraw();
      const stream = new EventStream(client, sessionId, {
        onFrame: (frame) => {
          state.frames.push(frame);
          // server frame for our optimistic row arrived; drop the ghost
          if (frame.event === "message" && frame.data.body.author === "user") {
            state.pendingText = null;
          }
          redraw();
        },
        onState: onStreamState,
      });
      state.stream = stream;
      void stream.run();
      setBanner(null);
    } catch (err) {
      if (err instanceof GatewayError) {
        setBanner(err.detail);
        diagPanel.textContent = err.diagnostics
          .map((d) => `${d.code} ${d.severity}: ${d.message}`)
          .join("\n");
      } else {
        setBanner(`gateway unreachable at ${baseInput.value}`);
      }
    }
  });

  sendButton.addEventListener("click", async () => {
    const { client, sessionId } = state;
    if (!client || !sessionId) return;
    const text = textInput.value.trim();
    const files = Array.from(fileInput.files ?? []);
    if (!text && files.length === 0) return;
    state.pendingText = text || `(${files.length} file${files.length === 1 ? "" : "s"})`;
    state.sendError = null;
    redraw();
    try {
      await client.sendMessage(sessionId, text, files);
      textInput.value = "";
      fileInput.value = "";
    } catch (err) {
      state.pendingText = null;
      state.sendError = err instanceof GatewayError ? err.detail : String(err);
      redraw();
    }
  });

  textInput.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") sendButton.click();
  });
  baseInput.addEventListener("change", () => void loadWorkflows());
  tokenInput.addEventListener("change", () => void loadWorkflows());

  void loadWorkflows();
}

const rootEl = document.getElementById("app");
if (rootEl) bootstrap(rootEl);
