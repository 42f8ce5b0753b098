// Chat view model and the controller driving it. All state changes flow
// through the controller so the UI can never issue overlapping turns for
// one session.

import { ApiClient, ApiError, StateSnapshot, TraceEvent, TurnResponse } from "./api.js";

export interface ChatMessage {
  role: "user" | "assistant" | "system";
  text: string;
  timestamp: string;
}

export interface ChatViewModel {
  messages: ChatMessage[];
  phase: string;
  trace: TraceEvent[];
  pending: boolean;
  draft: string;
  toast: string | null;
  error: string | null;
  awaitingClarification: boolean;
}

export function createViewModel(): ChatViewModel {
  return {
    messages: [],
    phase: "AwaitingInput",
    trace: [],
    pending: false,
    draft: "",
    toast: null,
    error: null,
    awaitingClarification: false,
  };
}

/** Visits per phase, counted from transition events in the trace. */
export function visitCounts(trace: TraceEvent[]): Map<string, number> {
  const counts = new Map<string, number>();
  for (const event of trace) {
    if (event.kind !== "transition") continue;
    const target = event.payload["to"];
    if (typeof target === "string") {
      counts.set(target, (counts.get(target) ?? 0) + 1);
    }
  }
  return counts;
}

function looksLikeSnapshot(value: unknown): value is StateSnapshot {
  if (typeof value !== "object" || value === null) return false;
  const snap = value as Record<string, unknown>;
  return typeof snap.phase === "string" && Array.isArray(snap.trace);
}

export class ChatController {
  vm: ChatViewModel = createViewModel();
  sessionId: string | null = null;
  lastSnapshot: StateSnapshot | null = null;

  constructor(
    private api: ApiClient,
    private onChange: (vm: ChatViewModel) => void = () => {},
    private clock: () => string = () => new Date().toISOString(),
  ) {}

  private emit(): void {
    this.onChange(this.vm);
  }

  private push(role: ChatMessage["role"], text: string): void {
    this.vm.messages.push({ role, text, timestamp: this.clock() });
  }

  /** Send one user message; auto-creates (or re-creates) the session. */
  async send(text: string): Promise<void> {
    if (!text.trim()) return;
    if (this.vm.pending) {
      this.vm.toast = "turn in progress";
      this.emit();
      return;
    }
    this.vm.pending = true;
    this.vm.toast = null;
    this.vm.error = null;
    this.vm.draft = text;
    this.emit();
    try {
      const sessionId = await this.ensureSession();
      const response = await this.api.sendMessage(sessionId, text);
      this.applyTurn(text, response);
      this.vm.draft = "";
    } catch (err) {
      await this.handleSendError(err, text);
    }
    this.vm.pending = false;
    this.emit();
  }

  private async ensureSession(): Promise<string> {
    // A Done session takes no further turns; the next message opens a new one.
    if (this.sessionId === null || this.vm.phase === "Done") {
      const created = await this.api.createSession();
      this.sessionId = created.session_id;
      if (this.vm.phase === "Done") {
        this.vm.phase = "AwaitingInput";
        this.vm.trace = [];
      }
    }
    return this.sessionId;
  }

  private applyTurn(text: string, response: TurnResponse): void {
    this.push("user", text);
    this.push("assistant", response.reply);
    this.vm.phase = response.phase;
    this.vm.trace = this.vm.trace.concat(response.trace_delta);
    this.vm.awaitingClarification = response.phase === "AwaitingClarification";
  }

  private async handleSendError(err: unknown, text: string): Promise<void> {
    if (err instanceof ApiError && err.status === 404) {
      // Server restarted and lost the session: open a fresh one, tell the
      // user, and retry the message once.
      this.sessionId = null;
      this.vm.phase = "AwaitingInput";
      this.vm.trace = [];
      this.push("system", "The previous session was lost; a new one was started.");
      try {
        const sessionId = await this.ensureSession();
        const response = await this.api.sendMessage(sessionId, text);
        this.applyTurn(text, response);
        this.vm.draft = "";
        return;
      } catch (retryErr) {
        err = retryErr;
      }
    }
    if (err instanceof ApiError && err.status === 409) {
      this.vm.toast = "turn in progress";
      return; // draft stays in the input
    }
    const message = err instanceof Error ? err.message : String(err);
    this.vm.error = `Sending failed (${message}). Your message is kept; press send to retry.`;
  }

  /** Poll the state endpoint; malformed payloads keep the last good state. */
  async refreshState(): Promise<void> {
    if (this.sessionId === null) return;
    let snapshot: unknown;
    try {
      snapshot = await this.api.getState(this.sessionId);
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      this.vm.error = `State refresh failed (${message}).`;
      this.emit();
      return;
    }
    if (!looksLikeSnapshot(snapshot)) {
      this.vm.error = "State snapshot was malformed; showing the last good state.";
      this.emit();
      return;
    }
    this.lastSnapshot = snapshot;
    this.vm.phase = snapshot.phase;
    this.vm.trace = snapshot.trace;
    this.vm.error = null;
    this.emit();
  }
}
