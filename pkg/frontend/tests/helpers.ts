/** Shared test utilities: a fake in-memory rating server and DOM helpers. */

import type { FetchLike } from "../src/api.js";

export const HELPFULNESS = [
  "Not helpful at all",
  "Slightly helpful",
  "Moderately helpful",
  "Helpful",
  "Very helpful",
];

export const CORRECTNESS = [
  "Completely wrong",
  "Mostly wrong",
  "Slightly wrong",
  "Slightly right",
  "Mostly right",
  "Completely right",
];

export interface FakeServerOptions {
  activity?: "mos" | "head2head";
  tasks?: number;
}

/** Minimal reimplementation of the service protocol for UI unit tests.
 * The protocol itself is verified against the real service in
 * conformance.test.ts; this fake only needs to be shape-compatible. */
export function fakeServer(options: FakeServerOptions = {}) {
  const activity = options.activity ?? "mos";
  const total = options.tasks ?? 10;
  let counter = 0;
  const nextTask = () => {
    counter += 1;
    return activity === "mos"
      ? {
          task_id: `t${counter}`,
          image_uri: `images/${counter}.jpg`,
          caption: `caption ${counter}`,
        }
      : {
          task_id: `t${counter}`,
          image_uri: `images/${counter}.jpg`,
          caption_a: `first caption ${counter}`,
          caption_b: `second caption ${counter}`,
        };
  };

  const state = {
    remaining: total,
    submissions: [] as Array<{ task_id: string; payload: any }>,
    requests: [] as Array<{ url: string; body: any }>,
  };

  const fetchFn: FetchLike = async (url, init) => {
    const body = init?.body ? JSON.parse(init.body as string) : null;
    state.requests.push({ url, body });
    const json = (obj: unknown, status = 200) =>
      new Response(JSON.stringify(obj), {
        status,
        headers: { "Content-Type": "application/json" },
      });

    if (url.endsWith("/api/sessions") && init?.method === "POST") {
      return json({
        session_id: "s000001",
        activity,
        remaining: state.remaining,
        task: nextTask(),
        option_labels: { helpfulness: HELPFULNESS, correctness: CORRECTNESS },
      });
    }
    if (url.includes("/ratings")) {
      state.submissions.push({ task_id: body.task_id, payload: body.payload });
      if (!("skip" in body.payload)) state.remaining -= 1;
      if (state.remaining === 0) {
        return json({ remaining: 0, completion_code: "c0ffee00c0ffee00" });
      }
      return json({ remaining: state.remaining, next_task: nextTask() });
    }
    if (url.includes("/api/sessions/")) {
      return json({
        session_id: "s000001",
        activity,
        remaining: state.remaining,
        task: nextTask(),
      });
    }
    return json({ detail: "not found" }, 404);
  };

  return { fetchFn, state };
}

export function pick(root: HTMLElement, testId: string): HTMLElement {
  const node = root.querySelector<HTMLElement>(`[data-test="${testId}"]`);
  if (!node) throw new Error(`missing [data-test="${testId}"]`);
  return node;
}

export function choose(root: HTMLElement, name: string, index: number): void {
  const input = root.querySelector<HTMLInputElement>(
    `input[data-test="option-${name}-${index}"]`,
  );
  if (!input) throw new Error(`missing option ${name}[${index}]`);
  input.checked = true;
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

export function submitForm(root: HTMLElement): void {
  const form = root.querySelector<HTMLFormElement>('[data-test="rating-form"]');
  if (!form) throw new Error("missing rating form");
  form.dispatchEvent(new Event("submit", { cancelable: true, bubbles: true }));
}

export async function waitFor(
  predicate: () => boolean,
  timeoutMs = 5000,
): Promise<void> {
  const start = Date.now();
  while (!predicate()) {
    if (Date.now() - start > timeoutMs) throw new Error("waitFor timed out");
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}
