import type {
  AdvancePayload,
  FeedbackBody,
  PosteriorPayload,
  QueryPayload,
  SessionConfigDocument,
  SessionStatePayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/** Thin JSON client for the session service; every method maps 1:1 to an
 * endpoint and surfaces non-2xx responses as ApiError. */
export class ApiClient {
  constructor(public baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const doc = await resp.json();
        detail = typeof doc.detail === "string" ? doc.detail
          : Array.isArray(doc.errors) ? doc.errors.join("; ")
          : JSON.stringify(doc);
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  healthz(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  createSession(config: SessionConfigDocument, seed?: number):
      Promise<{ id: string; state: SessionStatePayload }> {
    return this.request("POST", "/sessions", seed === undefined ? { config } : { config, seed });
  }

  getState(id: string): Promise<SessionStatePayload> {
    return this.request("GET", `/sessions/${id}`);
  }

  getQuery(id: string): Promise<QueryPayload> {
    return this.request("GET", `/sessions/${id}/query`);
  }

  postFeedback(id: string, body: FeedbackBody): Promise<{ state: SessionStatePayload }> {
    return this.request("POST", `/sessions/${id}/feedback`, body);
  }

  advance(id: string): Promise<AdvancePayload> {
    return this.request("POST", `/sessions/${id}/advance`);
  }

  getPosterior(id: string): Promise<PosteriorPayload> {
    return this.request("GET", `/sessions/${id}/posterior`);
  }

  getHistory(id: string): Promise<{ events: Record<string, unknown>[]; digest: string }> {
    return this.request("GET", `/sessions/${id}/history`);
  }
}
