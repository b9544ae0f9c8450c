/** Annotation UI: read the abstract and four blinded summaries, score the
 * three aspects per summary, rank the four, submit, repeat. */

import { ApiClient } from "./api.js";
import {
  FormState,
  emptyForm,
  isComplete,
  missingScores,
  setRanking,
  setScore,
  toPayload,
} from "./form.js";
import { moveDown, moveToPosition, moveUp } from "./ranking.js";
import { ASPECTS, Aspect, ItemView } from "./types.js";
import { validateAnnotation } from "./validate.js";

const api = new ApiClient();

let form: FormState | null = null;
let currentItem: ItemView | null = null;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function assessorId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("assessor");
  if (fromQuery) {
    window.localStorage.setItem("assessor_id", fromQuery);
    return fromQuery;
  }
  const stored = window.localStorage.getItem("assessor_id");
  if (stored) {
    return stored;
  }
  const entered = window.prompt("Enter your assessor id") ?? "anonymous";
  window.localStorage.setItem("assessor_id", entered);
  return entered;
}

function root(): HTMLElement {
  return document.getElementById("app") as HTMLElement;
}

function banner(message: string, retry?: () => void): HTMLElement {
  const box = el("div", { class: "banner" }, message);
  if (retry) {
    const button = el("button", { type: "button" }, "Retry");
    button.addEventListener("click", retry);
    box.append(" ", button);
  }
  return box;
}

function showTransient(message: string): void {
  const note = el("div", { class: "notice" }, message);
  root().prepend(note);
  window.setTimeout(() => note.remove(), 4000);
}

function renderCompletion(progress: { completed: number; assigned: number }): void {
  root().replaceChildren(
    el("section", { class: "completion" },
      el("h1", {}, "All done"),
      el("p", {},
        `You have annotated ${progress.completed} of ${progress.assigned} ` +
        "assigned items. Thank you!"),
    ),
  );
}

function protocolPanel(item: ItemView): HTMLElement {
  const details = el("details", { class: "protocol" },
    el("summary", {}, "Assessment guidance"));
  for (const [aspect, text] of Object.entries(item.protocol)) {
    details.append(el("h4", {}, aspect), el("p", {}, text));
  }
  return details;
}

function scoreRow(label: string, aspect: Aspect): HTMLElement {
  const row = el("div", { class: "score-row", id: `score-${label}-${aspect}` },
    el("span", { class: "aspect-name" }, aspect));
  for (let value = 1; value <= 4; value += 1) {
    const input = el("input", {
      type: "radio",
      name: `score-${label}-${aspect}`,
      value: String(value),
    }) as HTMLInputElement;
    input.addEventListener("change", () => {
      if (form) {
        form = setScore(form, label, aspect, value);
        refreshControls();
      }
    });
    row.append(el("label", { class: "score-choice" }, input, String(value)));
  }
  return row;
}

function candidatePanel(label: string, summary: string): HTMLElement {
  const panel = el("section", { class: "candidate", id: `candidate-${label}` },
    el("h3", {}, `Summary ${label}`),
    el("p", { class: "summary-text" }, summary));
  for (const aspect of ASPECTS) {
    panel.append(scoreRow(label, aspect));
  }
  return panel;
}

function rankingList(): HTMLElement {
  const list = el("ol", { class: "ranking", id: "ranking" });
  renderRanking(list);
  return list;
}

function renderRanking(list: HTMLElement): void {
  if (!form) {
    return;
  }
  list.replaceChildren();
  form.ranking.forEach((label, position) => {
    const entry = el("li", {
      class: "rank-entry",
      draggable: "true",
      "data-label": label,
    }, el("span", { class: "rank-pos" }, `${position + 1}.`),
       el("span", {}, `Summary ${label}`));

    entry.addEventListener("dragstart", (event) => {
      (event as DragEvent).dataTransfer?.setData("text/plain", label);
    });
    entry.addEventListener("dragover", (event) => event.preventDefault());
    entry.addEventListener("drop", (event) => {
      event.preventDefault();
      const dragged = (event as DragEvent).dataTransfer?.getData("text/plain");
      if (dragged && form) {
        form = setRanking(form, moveToPosition(form.ranking, dragged, position));
        renderRanking(list);
        refreshControls();
      }
    });

    const up = el("button", { type: "button", class: "rank-move", "aria-label": `move ${label} up` }, "↑");
    up.addEventListener("click", () => {
      if (form) {
        form = setRanking(form, moveUp(form.ranking, label));
        renderRanking(list);
        refreshControls();
      }
    });
    const down = el("button", { type: "button", class: "rank-move", "aria-label": `move ${label} down` }, "↓");
    down.addEventListener("click", () => {
      if (form) {
        form = setRanking(form, moveDown(form.ranking, label));
        renderRanking(list);
        refreshControls();
      }
    });
    entry.append(up, down);
    list.append(entry);
  });
}

function refreshControls(): void {
  const submit = document.getElementById("submit") as HTMLButtonElement | null;
  if (!submit || !form) {
    return;
  }
  submit.disabled = !isComplete(form);
  document.querySelectorAll(".score-row.missing").forEach((node) =>
    node.classList.remove("missing"));
}

function highlightProblems(fields: string[]): void {
  for (const field of fields) {
    document.getElementById(field)?.classList.add("missing");
  }
}

function renderItem(item: ItemView, progress: { completed: number; assigned: number }): void {
  currentItem = item;
  form = emptyForm(item, assessorId());
  const container = el("div", { class: "item" },
    el("header", {},
      el("h1", {}, "Summary assessment"),
      el("p", { class: "progress", id: "progress" },
        `Item ${progress.completed + 1} of ${progress.assigned}`),
    ),
    el("section", { class: "abstract" },
      el("h2", {}, "Article abstract"),
      el("p", {}, item.abstract)),
    protocolPanel(item),
  );
  const candidates = el("div", { class: "candidates" });
  for (const candidate of item.candidates) {
    candidates.append(candidatePanel(candidate.blinded_label, candidate.summary));
  }
  container.append(
    candidates,
    el("section", { class: "rank-section" },
      el("h2", {}, "Rank the summaries (best first)"),
      rankingList()),
    el("div", { class: "actions" },
      el("button", { type: "button", id: "submit", disabled: "true" }, "Submit"),
      el("div", { class: "errors", id: "errors" })),
  );
  root().replaceChildren(container);

  const submit = document.getElementById("submit") as HTMLButtonElement;
  submit.addEventListener("click", () => void submitCurrent());
}

async function submitCurrent(): Promise<void> {
  if (!form) {
    return;
  }
  const payload = toPayload(form);
  const problems = validateAnnotation(payload);
  const errors = document.getElementById("errors") as HTMLElement;
  if (problems.length > 0) {
    errors.textContent = problems.map((p) => p.message).join("; ");
    highlightProblems(problems.map((p) => p.field));
    missingScores(form).forEach(({ label, aspect }) =>
      document.getElementById(`score-${label}-${aspect}`)?.classList.add("missing"));
    return;
  }
  try {
    const result = await api.submitAnnotation(payload);
    if (result.status === 201) {
      await loadNext();
    } else if (result.status === 409) {
      showTransient("Already annotated on another device; moving on.");
      await loadNext();
    } else {
      errors.textContent = String(result.body.error ?? "submission rejected");
    }
  } catch {
    root().prepend(banner("Could not reach the service; your answers are kept.",
                          () => void submitCurrent()));
  }
}

async function loadNext(): Promise<void> {
  try {
    const response = await api.fetchNextItem(assessorId());
    if (response.done || response.item === null) {
      renderCompletion(response.progress);
    } else {
      renderItem(response.item, response.progress);
    }
  } catch {
    // keep whatever form is on screen; offer a retry
    root().prepend(banner("Could not reach the service.", () => void loadNext()));
  }
}

window.addEventListener("DOMContentLoaded", () => void loadNext());
