// Transcript renderer.  Builds the chat column as an HTML string from the
// reduced transcript model alone, so two renders of the same frame log are
// byte-identical.  Media loads from content-addressed gateway URLs.

import type { MediaRef, Transcript, TurnView, UiMessage } from "./types.js";

export type BlobUrlFn = (digest: string) => string;

const escapeHtml = (s: string): string =>
  s
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");

function mediaTag(media: MediaRef, blobUrl: BlobUrlFn): string {
  const url = escapeHtml(blobUrl(media.digest));
  const kind = media.media_type.split("/")[0];
  if (kind === "image") {
    return `<img class="thumb" src="${url}" alt="${escapeHtml(media.kind)}">`;
  }
  if (kind === "video") {
    return `<video class="thumb" src="${url}" controls></video>`;
  }
  if (kind === "audio") {
    return `<audio src="${url}" controls></audio>`;
  }
  return `<a href="${url}">${escapeHtml(media.digest.slice(0, 12))}</a>`;
}

function badgeSpans(msg: UiMessage): string {
  const badges: string[] = [];
  if (msg.badges.source === "rag") badges.push('<span class="badge badge-rag">RAG</span>');
  if (msg.badges.source === "web") badges.push('<span class="badge badge-web">WEB</span>');
  if (msg.badges.degraded) badges.push('<span class="badge badge-degraded">DEGRADED</span>');
  if (msg.badges.alert) badges.push('<span class="badge badge-alert">ALERT</span>');
  return badges.join("");
}

function messageRow(msg: UiMessage, blobUrl: BlobUrlFn): string {
  const role = msg.author === "user" ? "user" : "agent";
  const media = msg.media.map((m) => mediaTag(m, blobUrl)).join("");
  return (
    `<div class="msg msg-${role}" data-seq="${msg.seq}">` +
    `<div class="msg-author">${escapeHtml(msg.author)}${badgeSpans(msg)}</div>` +
    `<div class="msg-body">${escapeHtml(msg.text)}${media}</div>` +
    `</div>`
  );
}

function traceBlock(turn: TurnView): string {
  if (turn.trace.length === 0) return "";
  const rows = turn.trace
    .map(
      (e) =>
        `<div class="trace-row" data-seq="${e.seq}">` +
        `<span class="trace-label">${escapeHtml(e.label)}</span> ` +
        `<span class="trace-detail">${escapeHtml(e.detail)}</span></div>`,
    )
    .join("");
  return (
    `<details class="trace"><summary>agent trace (${turn.trace.length})</summary>` +
    `${rows}</details>`
  );
}

function turnBlock(turn: TurnView, blobUrl: BlobUrlFn): string {
  const parts: string[] = [`<section class="turn" data-turn="${escapeHtml(turn.turnId)}">`];
  for (const msg of turn.messages) {
    if (msg.author === "user") parts.push(messageRow(msg, blobUrl));
  }
  parts.push(traceBlock(turn));
  for (const msg of turn.messages) {
    if (msg.author !== "user") parts.push(messageRow(msg, blobUrl));
  }
  if (turn.error !== null) {
    parts.push(`<div class="msg msg-error">${escapeHtml(turn.error)}</div>`);
  }
  parts.push("</section>");
  return parts.join("");
}

export function renderTranscriptHtml(transcript: Transcript, blobUrl: BlobUrlFn): string {
  const turns = transcript.turns.map((t) => turnBlock(t, blobUrl)).join("");
  const typing = transcript.typing ? '<div class="typing">thinking&hellip;</div>' : "";
  return turns + typing;
}

export function mountTranscript(
  container: HTMLElement,
  transcript: Transcript,
  blobUrl: BlobUrlFn,
): void {
  container.innerHTML = renderTranscriptHtml(transcript, blobUrl);
}
