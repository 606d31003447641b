// Thin typed client over the agent service. Every console mutation maps to
// exactly one call here, so the service request log is the audit trail.

import type {
  FeedbackAction,
  HomeView,
  LogRecord,
  MemoryGraph,
  PreferenceView,
  SchemaIndex,
  SessionListing,
  SessionSnapshot,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await response.text();
  if (!response.ok) {
    let detail = body;
    try {
      detail = JSON.parse(body).detail ?? body;
    } catch {
      // plain-text error body
    }
    throw new ApiError(response.status, String(detail));
  }
  return body ? (JSON.parse(body) as T) : (undefined as T);
}

export class ConsoleApi {
  constructor(public base: string = "") {}

  submitInstruction(text: string): Promise<{ session_id: string }> {
    return request(`${this.base}/instructions`, {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }

  listSessions(): Promise<SessionListing[]> {
    return request(`${this.base}/sessions`);
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return request(`${this.base}/sessions/${sessionId}`);
  }

  sendFeedback(sessionId: string, action: FeedbackAction): Promise<SessionSnapshot> {
    return request(`${this.base}/sessions/${sessionId}/feedback`, {
      method: "POST",
      body: JSON.stringify(action),
    });
  }

  getMemory(): Promise<MemoryGraph> {
    return request(`${this.base}/memory`);
  }

  getPreferences(): Promise<PreferenceView> {
    return request(`${this.base}/preferences`);
  }

  getHome(): Promise<HomeView> {
    return request(`${this.base}/home`);
  }

  getLog(limit = 50): Promise<LogRecord[]> {
    return request(`${this.base}/home/log?limit=${limit}`);
  }

  getSchemas(): Promise<SchemaIndex> {
    return request(`${this.base}/schemas`);
  }

  emitEvent(device: string, attribute: string, value: unknown): Promise<LogRecord[]> {
    return request(`${this.base}/home/events`, {
      method: "POST",
      body: JSON.stringify({ device, attribute, value }),
    });
  }

  setAvailability(device: string, available: boolean): Promise<unknown> {
    return request(`${this.base}/home/devices/${encodeURIComponent(device)}/availability`, {
      method: "POST",
      body: JSON.stringify({ available }),
    });
  }

  /** Wait until the pipeline parks the session (polling fallback for SSE). */
  async waitForReview(sessionId: string, timeoutMs = 15000): Promise<SessionSnapshot> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const snapshot = await this.getSession(sessionId);
      if (snapshot.status !== "running") return snapshot;
      if (Date.now() > deadline) throw new Error(`session ${sessionId} never settled`);
      await new Promise((resolve) => setTimeout(resolve, 50));
    }
  }
}
