/**
 * DOM wiring. All rendering logic lives in render.ts; this file only moves
 * strings into the page and events into state transitions.
 */

import { JsonParseError } from "./json.js";
import { SchemaError, loadBundle } from "./loader.js";
import {
  renderErrorPanel,
  renderHeader,
  renderMacroTable,
  renderReportView,
  renderSentenceView,
  renderTopicMetrics,
  renderTopicSelector,
} from "./render.js";
import {
  AppState,
  bundleLoaded,
  currentTopic,
  initialState,
  loadFailed,
  selectSentence,
  selectTopic,
  setScope,
} from "./state.js";

let state: AppState = initialState();

function byId(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el;
}

function update(next: AppState): void {
  state = next;
  render();
}

function render(): void {
  const header = byId("header");
  const sidebar = byId("sidebar-topic");
  const main = byId("main");
  const error = byId("error");

  error.innerHTML = state.error === null ? "" : renderErrorPanel(state.error);

  if (state.bundle === null) {
    header.innerHTML = "<h1>Report evaluation viewer</h1>";
    main.innerHTML = `<p class="hint">Choose an exported bundle JSON file to begin.</p>`;
    sidebar.innerHTML = "";
    return;
  }

  header.innerHTML = renderHeader(state.bundle);
  sidebar.innerHTML = renderTopicSelector(state.bundle, state.topicId);
  const select = byId("topic-select") as HTMLSelectElement;
  select.addEventListener("change", () => update(selectTopic(state, select.value)));

  if (state.scope === "run") {
    main.innerHTML = renderMacroTable(state.bundle);
    return;
  }

  const topic = currentTopic(state);
  if (topic === null) {
    main.innerHTML = `<p class="hint">No topic selected.</p>`;
    return;
  }
  let html = renderTopicMetrics(topic) + renderReportView(topic);
  if (state.sentenceIndex !== null) {
    html += renderSentenceView(topic, state.sentenceIndex);
  }
  main.innerHTML = html;
  for (const li of main.querySelectorAll<HTMLElement>("[data-sentence]")) {
    li.addEventListener("click", () => {
      const index = Number(li.dataset["sentence"]);
      update(selectSentence(state, Number.isNaN(index) ? null : index));
    });
  }
}

function describeLoadError(exc: unknown): string {
  if (exc instanceof JsonParseError) return `Could not parse bundle: ${exc.message}`;
  if (exc instanceof SchemaError) return `Bundle schema error: ${exc.message}`;
  return `Could not load bundle: ${String(exc)}`;
}

function wireControls(): void {
  const input = byId("bundle-file") as HTMLInputElement;
  input.addEventListener("change", () => {
    const file = input.files?.[0];
    if (file === undefined) return;
    byId("main").innerHTML = `<p class="hint">Loading ${file.name}...</p>`;
    file
      .text()
      .then((text) => update(bundleLoaded(state, loadBundle(text))))
      .catch((exc: unknown) => update(loadFailed(state, describeLoadError(exc))));
  });

  for (const radio of document.querySelectorAll<HTMLInputElement>("input[name=scope]")) {
    radio.addEventListener("change", () => {
      if (radio.checked) update(setScope(state, radio.value === "topic" ? "topic" : "run"));
    });
  }
}

wireControls();
render();
