import { ApiClient, ApiError } from "./api.js";
import type { RatingPayload, SubmitResponse } from "./types.js";

export type SubmitOutcome =
  | { kind: "ok"; response: SubmitResponse }
  | { kind: "offline" }
  | { kind: "rejected"; detail: string };

interface PendingSubmission {
  sessionId: string;
  taskId: string;
  payload: RatingPayload;
}

/** Single-slot retry queue for submissions.
 *
 * The UI is pessimistic: one rating is in flight at a time and the counter
 * only moves on a server ack. A network failure parks the submission here;
 * retrying re-sends the identical request. If the original request actually
 * landed (ack was lost), the server rejects the duplicate and we recover the
 * true state with a session fetch, so nothing is ever counted twice.
 */
export class SubmitQueue {
  private pending: PendingSubmission | null = null;

  constructor(private api: ApiClient) {}

  get hasPending(): boolean {
    return this.pending !== null;
  }

  async submit(
    sessionId: string,
    taskId: string,
    payload: RatingPayload,
  ): Promise<SubmitOutcome> {
    this.pending = { sessionId, taskId, payload };
    return this.flush();
  }

  async flush(): Promise<SubmitOutcome> {
    if (!this.pending) throw new Error("nothing queued");
    const { sessionId, taskId, payload } = this.pending;
    try {
      const response = await this.api.submitRating(sessionId, taskId, payload);
      this.pending = null;
      return { kind: "ok", response };
    } catch (err) {
      if (err instanceof ApiError) {
        this.pending = null;
        if (err.status === 422 && err.detail.includes("already submitted")) {
          // the lost-ack case: the first attempt landed, resync instead
          const view = await this.api.getSession(sessionId);
          return {
            kind: "ok",
            response: {
              remaining: view.remaining,
              next_task: view.task,
              completion_code: view.completion_code,
            },
          };
        }
        return { kind: "rejected", detail: err.detail };
      }
      // network failure: keep it queued for retry
      return { kind: "offline" };
    }
  }
}
