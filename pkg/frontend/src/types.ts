/** Wire types for the rating service REST API.
 *
 * The client is a pure view over these payloads: hidden model labels are
 * stripped server-side and must never appear here.
 */

export type Activity = "mos" | "head2head";

export interface MosTask {
  task_id: string;
  image_uri: string;
  caption: string;
}

export interface HeadToHeadTask {
  task_id: string;
  image_uri: string;
  caption_a: string;
  caption_b: string;
}

export type Task = MosTask | HeadToHeadTask;

export function isHeadToHead(task: Task): task is HeadToHeadTask {
  return "caption_a" in task;
}

export interface OptionLabels {
  helpfulness: string[];
  correctness: string[];
}

export interface SessionView {
  session_id: string;
  activity: Activity;
  remaining: number;
  task: Task | null;
  option_labels?: OptionLabels;
  completion_code?: string;
}

export interface SubmitResponse {
  remaining: number;
  next_task?: Task | null;
  completion_code?: string;
}

export type SkipReason = "cant_tell" | "not_visible";

export type RatingPayload =
  | { helpfulness: number; correctness: number }
  | { winner: "A" | "B" | "tie"; axis: "helpfulness" | "correctness" }
  | { skip: SkipReason };
