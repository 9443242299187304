import type { Activity, RatingPayload, SessionView, SubmitResponse } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Raised for HTTP-level rejections so callers can tell them apart from
 * network failures (plain fetch rejections). */
export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return resp.json() as Promise<T>;
  }

  async createSession(activity: Activity, raterId: string): Promise<SessionView> {
    return this.post("/api/sessions", { activity, rater_id: raterId });
  }

  async getSession(sessionId: string): Promise<SessionView> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/sessions/${sessionId}`);
    if (!resp.ok) throw await parseError(resp);
    return resp.json() as Promise<SessionView>;
  }

  async submitRating(
    sessionId: string,
    taskId: string,
    payload: RatingPayload,
  ): Promise<SubmitResponse> {
    return this.post(`/api/sessions/${sessionId}/ratings`, {
      task_id: taskId,
      payload,
    });
  }
}
