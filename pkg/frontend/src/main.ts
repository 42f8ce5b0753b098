// Browser glue: wires the controller and renderers to the DOM and polls
// the state endpoint once per second while a turn is pending.

import { ApiClient, TransitionEdge } from "./api.js";
import { ChatController } from "./model.js";
import {
  TRACE_KINDS,
  renderComposer,
  renderEquipmentCards,
  renderMessages,
  renderPhaseBadge,
  renderStatePanel,
  renderToast,
  renderTraceList,
} from "./render.js";

const SERVER_BASE =
  (window as unknown as { EQUIPCOPILOT_SERVER?: string }).EQUIPCOPILOT_SERVER ??
  "http://127.0.0.1:8080";

const api = new ApiClient(SERVER_BASE);
let edges: TransitionEdge[] = [];
let traceFilter = "all";

function byId(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

const controller = new ChatController(api, () => redraw());

function redraw(): void {
  const vm = controller.vm;
  byId("messages").innerHTML = renderMessages(vm.messages);
  byId("composer").innerHTML = renderComposer(vm);
  byId("phase-badge").innerHTML = renderPhaseBadge(vm);
  byId("state-panel").innerHTML = renderStatePanel(edges, vm);
  byId("trace").innerHTML = renderTraceList(vm.trace, traceFilter);
  byId("notices").innerHTML = renderToast(vm);
  const cards = controller.lastSnapshot?.selected_equipment ?? [];
  byId("equipment").innerHTML = renderEquipmentCards(cards);
  bindComposer();
  byId("messages").scrollTop = byId("messages").scrollHeight;
}

function bindComposer(): void {
  const form = byId("composer-form") as HTMLFormElement;
  form.onsubmit = (event) => {
    event.preventDefault();
    const input = byId("prompt-input") as HTMLInputElement;
    void submit(input.value);
  };
}

async function submit(text: string): Promise<void> {
  await controller.send(text);
  if (controller.sessionId) await controller.refreshState();
  redraw();
}

function bindFilter(): void {
  const select = byId("trace-filter") as HTMLSelectElement;
  select.innerHTML = TRACE_KINDS.map((k) => `<option value="${k}">${k}</option>`).join("");
  select.onchange = () => {
    traceFilter = select.value;
    redraw();
  };
}

// Live view while a turn runs server-side.
setInterval(() => {
  if (controller.vm.pending && controller.sessionId) {
    void controller.refreshState();
  }
}, 1000);

async function start(): Promise<void> {
  try {
    edges = (await api.getTransitions()).edges;
  } catch {
    // The panel stays empty until the server is reachable.
    edges = [];
  }
  bindFilter();
  redraw();
}

void start();
