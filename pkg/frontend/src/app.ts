import { ApiClient } from "./api.js";
import { SubmitQueue } from "./queue.js";
import type {
  Activity,
  OptionLabels,
  RatingPayload,
  SessionView,
  SkipReason,
  SubmitResponse,
  Task,
} from "./types.js";
import { isHeadToHead } from "./types.js";

const SKIP_BUTTONS: Array<{ reason: SkipReason; label: string }> = [
  { reason: "cant_tell", label: "I can't tell" },
  { reason: "not_visible", label: "Image/Caption not visible" },
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function radioGroup(
  name: string,
  options: string[],
  onChange: () => void,
): HTMLFieldSetElement {
  const fieldset = el("fieldset", { "data-test": `group-${name}` });
  options.forEach((label, index) => {
    const wrapper = el("label", { class: "option" });
    const input = el("input", {
      type: "radio",
      name,
      value: String(index),
      "data-test": `option-${name}-${index}`,
    });
    input.addEventListener("change", onChange);
    wrapper.append(input, document.createTextNode(label));
    fieldset.append(wrapper);
  });
  return fieldset;
}

function selectedValue(root: HTMLElement, name: string): string | null {
  const checked = root.querySelector<HTMLInputElement>(
    `input[name="${name}"]:checked`,
  );
  return checked ? checked.value : null;
}

/** Controller for one rating session in one browser tab. */
export class RaterApp {
  private queue: SubmitQueue;
  private sessionId = "";
  private activity: Activity = "mos";
  private labels: OptionLabels = { helpfulness: [], correctness: [] };
  private remaining = 0;
  private task: Task | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {
    this.queue = new SubmitQueue(api);
  }

  renderStart(): void {
    this.root.replaceChildren();
    const form = el("form", { "data-test": "start-form" });
    form.append(
      el("h1", {}, "Caption rating study"),
      el("label", {}, "Rater ID: "),
    );
    const rater = el("input", { type: "text", "data-test": "rater-id" });
    const activity = el("select", { "data-test": "activity" });
    activity.append(
      el("option", { value: "mos" }, "Rate single captions"),
      el("option", { value: "head2head" }, "Compare two captions"),
    );
    const start = el("button", { type: "submit", "data-test": "start" }, "Start session");
    form.append(rater, activity, start);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.start(activity.value as Activity, rater.value || "anonymous");
    });
    this.root.append(form);
  }

  async start(activity: Activity, raterId: string): Promise<SessionView> {
    const view = await this.api.createSession(activity, raterId);
    this.sessionId = view.session_id;
    this.activity = view.activity;
    if (view.option_labels) this.labels = view.option_labels;
    this.remaining = view.remaining;
    this.task = view.task ?? null;
    this.renderTask();
    return view;
  }

  /** Currently displayed task id, for tests and debugging. */
  get currentTaskId(): string | null {
    return this.task ? this.task.task_id : null;
  }

  get remainingCount(): number {
    return this.remaining;
  }

  renderTask(): void {
    this.root.replaceChildren();
    if (!this.task) {
      this.root.append(el("p", {}, "No task available."));
      return;
    }
    const task = this.task;
    const container = el("div", { "data-test": "task", "data-task-id": task.task_id });
    container.append(
      el("p", { "data-test": "remaining" }, `Tasks remaining: ${this.remaining}`),
      el("img", { src: task.image_uri, alt: "image to rate" }),
    );

    const form = el("form", { "data-test": "rating-form" });
    const submit = el("button", { type: "submit", "data-test": "submit" }, "Submit");
    submit.disabled = true;

    const refresh = () => {
      submit.disabled = this.readSelection(form) === null;
    };

    if (isHeadToHead(task)) {
      container.append(
        el("blockquote", { "data-test": "caption-a" }, `A: ${task.caption_a}`),
        el("blockquote", { "data-test": "caption-b" }, `B: ${task.caption_b}`),
      );
      form.append(
        el("p", {}, "Which axis are you judging?"),
        radioGroup("axis", ["Helpfulness", "Correctness"], refresh),
        el("p", {}, "Which caption is better?"),
        radioGroup("winner", ["Caption A", "Tie", "Caption B"], refresh),
      );
    } else {
      container.append(el("blockquote", { "data-test": "caption" }, task.caption));
      form.append(
        el("p", {}, "How helpful is this caption?"),
        radioGroup("helpfulness", this.labels.helpfulness, refresh),
        el("p", {}, "How correct is this caption?"),
        radioGroup("correctness", this.labels.correctness, refresh),
      );
    }

    form.append(submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const payload = this.readSelection(form);
      if (payload) void this.submit(payload);
    });
    container.append(form);

    const skips = el("div", { "data-test": "skips" });
    for (const { reason, label } of SKIP_BUTTONS) {
      const button = el("button", { type: "button", "data-test": `skip-${reason}` }, label);
      button.addEventListener("click", () => void this.submit({ skip: reason }));
      skips.append(button);
    }
    container.append(skips);
    this.root.append(container);
  }

  private readSelection(form: HTMLElement): RatingPayload | null {
    if (this.activity === "head2head") {
      const axis = selectedValue(form, "axis");
      const winner = selectedValue(form, "winner");
      if (axis === null || winner === null) return null;
      return {
        winner: (["A", "tie", "B"] as const)[Number(winner)],
        axis: axis === "0" ? "helpfulness" : "correctness",
      };
    }
    const helpfulness = selectedValue(form, "helpfulness");
    const correctness = selectedValue(form, "correctness");
    if (helpfulness === null || correctness === null) return null;
    return { helpfulness: Number(helpfulness), correctness: Number(correctness) };
  }

  async submit(payload: RatingPayload): Promise<void> {
    if (!this.task) return;
    const outcome = await this.queue.submit(this.sessionId, this.task.task_id, payload);
    this.handleOutcome(outcome);
  }

  async retryPending(): Promise<void> {
    if (!this.queue.hasPending) return;
    this.handleOutcome(await this.queue.flush());
  }

  private handleOutcome(
    outcome: Awaited<ReturnType<SubmitQueue["flush"]>>,
  ): void {
    if (outcome.kind === "offline") {
      this.renderOfflineBanner();
      return;
    }
    if (outcome.kind === "rejected") {
      this.renderError(outcome.detail);
      return;
    }
    this.applyAck(outcome.response);
  }

  private applyAck(response: SubmitResponse): void {
    this.remaining = response.remaining;
    if (response.completion_code) {
      this.renderComplete(response.completion_code);
      return;
    }
    this.task = response.next_task ?? null;
    this.renderTask();
  }

  private renderOfflineBanner(): void {
    const existing = this.root.querySelector('[data-test="offline-banner"]');
    if (existing) return;
    const banner = el("div", { "data-test": "offline-banner", role: "alert" });
    banner.append(el("span", {}, "Connection lost. Your answer is saved and will be re-sent."));
    const retry = el("button", { type: "button", "data-test": "retry" }, "Retry");
    retry.addEventListener("click", () => void this.retryPending());
    banner.append(retry);
    this.root.prepend(banner);
  }

  private renderError(detail: string): void {
    const note = el("div", { "data-test": "server-error", role: "alert" }, detail);
    this.root.prepend(note);
  }

  private renderComplete(code: string): void {
    this.root.replaceChildren(
      el("h1", {}, "Session complete"),
      el("p", {}, "Thank you! Your completion code is:"),
      el("code", { "data-test": "completion-code" }, code),
    );
  }
}
