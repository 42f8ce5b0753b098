// Pure HTML renderers. Everything shown comes from API data; these
// functions fabricate markup only, never content.

import { SelectedEquipment, TraceEvent, TransitionEdge } from "./api.js";
import { ChatMessage, ChatViewModel, visitCounts } from "./model.js";

export function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderMessages(messages: ChatMessage[]): string {
  return messages
    .map(
      (m) =>
        `<div class="message ${m.role}" title="${escapeHtml(m.timestamp)}">` +
        `<span class="role">${m.role}</span>` +
        `<span class="text">${escapeHtml(m.text)}</span></div>`,
    )
    .join("\n");
}

export function renderComposer(vm: ChatViewModel): string {
  const disabled = vm.pending ? " disabled" : "";
  const placeholder = vm.awaitingClarification
    ? "Answer the clarification question..."
    : "Describe your process requirements or ask a question...";
  return (
    `<input id="prompt-input" type="text" value="${escapeHtml(vm.draft)}" ` +
    `placeholder="${placeholder}"${disabled}>` +
    `<button id="send-button" type="submit"${disabled}>Send</button>`
  );
}

/** Phases in first-appearance order over the edge list. */
export function phaseOrder(edges: TransitionEdge[]): string[] {
  const seen: string[] = [];
  for (const edge of edges) {
    for (const phase of [edge.from, edge.to]) {
      if (!seen.includes(phase)) seen.push(phase);
    }
  }
  return seen;
}

export function renderStatePanel(
  edges: TransitionEdge[],
  vm: ChatViewModel,
): string {
  const counts = visitCounts(vm.trace);
  const boxes = phaseOrder(edges)
    .map((phase) => {
      const count = counts.get(phase) ?? 0;
      const classes = ["phase"];
      if (phase === vm.phase) classes.push("current");
      if (count > 0) classes.push("visited");
      return (
        `<div class="${classes.join(" ")}" data-phase="${escapeHtml(phase)}" ` +
        `data-count="${count}">` +
        `<span class="name">${escapeHtml(phase)}</span>` +
        `<span class="count">${count}</span></div>`
      );
    })
    .join("\n");
  return `<div class="state-panel">${boxes}</div>`;
}

export const TRACE_KINDS = [
  "all",
  "llm_exchange",
  "retrieval",
  "catalog_query",
  "transition",
  "user_message",
  "answer",
];

export function renderTraceList(trace: TraceEvent[], filter: string): string {
  const rows = trace
    .filter((ev) => filter === "all" || ev.kind === filter)
    .map((ev) => {
      const summary = summarizeEvent(ev);
      return (
        `<li class="trace-event kind-${escapeHtml(ev.kind)}" data-seq="${ev.sequence_no}">` +
        `<span class="seq">#${ev.sequence_no}</span>` +
        `<span class="kind">${escapeHtml(ev.kind)}</span>` +
        `<span class="phase">${escapeHtml(ev.phase)}</span>` +
        `<span class="summary">${escapeHtml(summary)}</span></li>`
      );
    })
    .join("\n");
  return `<ul class="trace-list">${rows}</ul>`;
}

function summarizeEvent(ev: TraceEvent): string {
  const p = ev.payload as Record<string, unknown>;
  switch (ev.kind) {
    case "transition":
      return `${p.from} -> ${p.to} (${p.trigger})`;
    case "llm_exchange":
      return `${p.template_id} attempt ${p.attempt}`;
    case "retrieval":
      return `${p.chunk_id} score ${Number(p.score).toFixed(4)}`;
    case "catalog_query":
      return String(p.op ?? "");
    case "user_message":
      return String(p.text ?? "");
    case "answer":
      return String(p.kind ?? "");
    default:
      return "";
  }
}

export function renderEquipmentCards(selected: SelectedEquipment[]): string {
  const cards = selected
    .map((entry) => {
      const r = entry.record;
      const title = (s: string) =>
        s.replace(/\b\w/g, (c) => c.toUpperCase());
      return (
        `<div class="equipment-card" data-record="${escapeHtml(r.id)}">` +
        `<div class="line">Brand: ${escapeHtml(r.brand)}</div>` +
        `<div class="line">Type: ${escapeHtml(title(r.subtype))}</div>` +
        `<div class="line">Model: ${escapeHtml(r.model)}</div>` +
        `<div class="ratio">requirements satisfied: ${(entry.satisfaction_ratio * 100).toFixed(0)}%</div>` +
        `</div>`
      );
    })
    .join("\n");
  return `<div class="equipment-cards">${cards}</div>`;
}

export function renderToast(vm: ChatViewModel): string {
  if (vm.toast) return `<div class="toast">${escapeHtml(vm.toast)}</div>`;
  if (vm.error) return `<div class="error-banner">${escapeHtml(vm.error)}</div>`;
  return "";
}

export function renderPhaseBadge(vm: ChatViewModel): string {
  return `<span class="phase-badge ${vm.pending ? "pending" : ""}">${escapeHtml(vm.phase)}</span>`;
}
