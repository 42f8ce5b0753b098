// Thin typed client for the copilot service. The fetch function is
// injectable so tests can run against a scripted API.

export interface TraceEvent {
  sequence_no: number;
  timestamp: string;
  phase: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface TurnResponse {
  reply: string;
  phase: string;
  trace_delta: TraceEvent[];
}

export interface SelectedEquipment {
  record_id: string;
  satisfied: number[];
  unsatisfied: number[];
  unknown: number[];
  satisfaction_ratio: number;
  record: {
    id: string;
    brand: string;
    model: string;
    equipment_class: string;
    subtype: string;
    attributes: Record<string, { kind: string; value: unknown; unit?: string }>;
  };
}

export interface StateSnapshot {
  session_id: string;
  phase: string;
  history: [string, string][];
  trace: TraceEvent[];
  selected_equipment: SelectedEquipment[];
  [key: string]: unknown;
}

export interface TransitionEdge {
  from: string;
  event: string;
  to: string;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  createSession(): Promise<{ session_id: string }> {
    return this.request("/sessions", { method: "POST" });
  }

  sendMessage(sessionId: string, text: string): Promise<TurnResponse> {
    return this.request(`/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  getState(sessionId: string): Promise<StateSnapshot> {
    return this.request(`/sessions/${sessionId}/state`);
  }

  getTransitions(): Promise<{ edges: TransitionEdge[] }> {
    return this.request("/transitions");
  }
}
