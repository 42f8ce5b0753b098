// Shared test scaffolding: a scripted fetch and trace fixtures.

import { FetchLike, TraceEvent, TransitionEdge } from "../src/api.js";

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

export type Route = {
  method: string;
  path: string | RegExp;
  respond: (call: RecordedCall) => Response | Promise<Response>;
  once?: boolean;
  used?: boolean;
};

/** FIFO-matching scripted fetch, mirroring how the backend is scripted. */
export function scriptedFetch(routes: Route[]): { fetch: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    const call = { url, method, body };
    calls.push(call);
    for (const route of routes) {
      if (route.once && route.used) continue;
      const pathMatch =
        typeof route.path === "string" ? url.endsWith(route.path) : route.path.test(url);
      if (route.method === method && pathMatch) {
        route.used = true;
        return route.respond(call);
      }
    }
    throw new Error(`no scripted route for ${method} ${url}`);
  };
  return { fetch: fetchFn, calls };
}

export const EDGES: TransitionEdge[] = [
  { from: "AwaitingInput", event: "user_message", to: "RoutingIntent" },
  { from: "RoutingIntent", event: "intent_selection", to: "ExtractingRequirements" },
  { from: "RoutingIntent", event: "intent_general", to: "RetrievingKnowledge" },
  { from: "ExtractingRequirements", event: "requirements_extracted", to: "GroupingRequirements" },
  { from: "GroupingRequirements", event: "requirements_grouped", to: "DeterminingOperation" },
  { from: "DeterminingOperation", event: "operation_determined", to: "SelectingSubtype" },
  { from: "SelectingSubtype", event: "subtype_selected", to: "SelectingEquipment" },
  { from: "SelectingEquipment", event: "equipment_selected", to: "EvaluatingSelection" },
  { from: "EvaluatingSelection", event: "verdict_suitable", to: "GeneratingAnswer" },
  { from: "EvaluatingSelection", event: "verdict_unsuitable", to: "AwaitingClarification" },
  { from: "AwaitingClarification", event: "user_message", to: "DeterminingOperation" },
  { from: "RetrievingKnowledge", event: "knowledge_retrieved", to: "GeneratingAnswer" },
  { from: "GeneratingAnswer", event: "answer_emitted", to: "Done" },
];

let seq = 0;

export function resetSeq(): void {
  seq = 0;
}

export function transitionEvent(from: string, to: string, trigger = "test"): TraceEvent {
  return {
    sequence_no: seq++,
    timestamp: "2026-01-01T00:00:00+00:00",
    phase: from,
    kind: "transition",
    payload: { from, to, trigger },
  };
}

export function plainEvent(kind: string, phase: string, payload: Record<string, unknown> = {}): TraceEvent {
  return { sequence_no: seq++, timestamp: "2026-01-01T00:00:00+00:00", phase, kind, payload };
}

/** Trace deltas for a selection turn that ends in a clarification question. */
export function firstPassDelta(): TraceEvent[] {
  return [
    plainEvent("user_message", "AwaitingInput", { text: "need a robot" }),
    transitionEvent("AwaitingInput", "RoutingIntent", "user_message"),
    transitionEvent("RoutingIntent", "ExtractingRequirements", "intent_selection"),
    transitionEvent("ExtractingRequirements", "GroupingRequirements", "requirements_extracted"),
    transitionEvent("GroupingRequirements", "DeterminingOperation", "requirements_grouped"),
    transitionEvent("DeterminingOperation", "SelectingSubtype", "operation_determined"),
    transitionEvent("SelectingSubtype", "SelectingEquipment", "subtype_selected"),
    transitionEvent("SelectingEquipment", "EvaluatingSelection", "equipment_selected"),
    transitionEvent("EvaluatingSelection", "AwaitingClarification", "verdict_unsuitable"),
    plainEvent("answer", "AwaitingClarification", { kind: "clarification", text: "what payload?" }),
  ];
}

/** Trace delta for the restart pass that completes the selection. */
export function restartPassDelta(): TraceEvent[] {
  return [
    plainEvent("user_message", "AwaitingClarification", { text: "5 kg" }),
    transitionEvent("AwaitingClarification", "DeterminingOperation", "user_message"),
    transitionEvent("DeterminingOperation", "SelectingSubtype", "operation_determined"),
    transitionEvent("SelectingSubtype", "SelectingEquipment", "subtype_selected"),
    transitionEvent("SelectingEquipment", "EvaluatingSelection", "equipment_selected"),
    transitionEvent("EvaluatingSelection", "GeneratingAnswer", "verdict_suitable"),
    transitionEvent("GeneratingAnswer", "Done", "answer_emitted"),
    plainEvent("answer", "Done", { kind: "selection", text: "Brand: Epson ..." }),
  ];
}
