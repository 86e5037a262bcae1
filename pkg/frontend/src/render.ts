/**
 * HTML fragment builders. Every function is pure string-in, string-out so the
 * views are testable without a DOM. Numbers are emitted as the bundle's own
 * tokens (RawNum.raw), never re-formatted.
 */

import type {
  CitationView,
  MetricRow,
  SentenceView,
  TopicView,
  VizBundle,
} from "./types.js";
import { IMPORTANCE_WEIGHT_LABEL } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export type OutcomeClass = "reward" | "penalty" | "neutral";

export function outcomeClass(outcome: CitationView["outcome"]): OutcomeClass {
  switch (outcome) {
    case "REWARD":
      return "reward";
    case "PENALTY":
      return "penalty";
    case "NEUTRAL":
      return "neutral";
  }
}

export function renderHeader(bundle: VizBundle): string {
  return `<h1>Run <span class="run-id">${escapeHtml(bundle.runId)}</span></h1>`;
}

export function renderTopicSelector(bundle: VizBundle, selected: string | null): string {
  const options = bundle.topics
    .map((t) => {
      const id = escapeHtml(t.requestId);
      const sel = t.requestId === selected ? " selected" : "";
      return `<option value="${id}"${sel}>${id}</option>`;
    })
    .join("");
  return `<select id="topic-select">${options}</select>`;
}

function metricTable(rows: MetricRow[], cssClass: string): string {
  const body = rows
    .map(
      (row) =>
        `<tr><th>${escapeHtml(row.key)}</th>` +
        `<td class="num">${escapeHtml(row.value.raw)}</td></tr>`,
    )
    .join("");
  return `<table class="${cssClass}">${body}</table>`;
}

export function renderMacroTable(bundle: VizBundle): string {
  const missing =
    bundle.macro.missingTopics.length > 0
      ? bundle.macro.missingTopics.map(escapeHtml).join(", ")
      : "none";
  return (
    `<section class="macro"><h2>Run-level metrics</h2>` +
    metricTable(bundle.macro.rows, "macro-table") +
    `<p class="missing-topics">Missing topics: ${missing}</p></section>`
  );
}

export function renderTopicMetrics(topic: TopicView): string {
  const cards = topic.metrics.core
    .map(
      (row) =>
        `<div class="metric-card"><div class="metric-label">${escapeHtml(row.key)}</div>` +
        `<div class="num">${escapeHtml(row.value.raw)}</div></div>`,
    )
    .join("");
  const flags =
    topic.metrics.flags.length > 0
      ? `<p class="flags">Flags: ${topic.metrics.flags.map(escapeHtml).join(", ")}</p>`
      : "";
  return (
    `<section class="topic-metrics"><h2>Topic ${escapeHtml(topic.requestId)}</h2>` +
    `<div class="metric-cards">${cards}</div>` +
    `<h3>Fine-grained</h3>` +
    metricTable(topic.metrics.fine, "fine-table") +
    flags +
    `</section>`
  );
}

function supportBadge(sentence: SentenceView): string {
  if (sentence.citations.length === 0) {
    return sentence.missingCitationPenalty
      ? `<span class="badge missing-citation">needs citation</span>`
      : `<span class="badge uncited">uncited</span>`;
  }
  const supported = sentence.citations.every((c) => c.attests);
  return supported
    ? `<span class="badge supported">supported</span>`
    : `<span class="badge unsupported">unsupported</span>`;
}

export function renderReportView(topic: TopicView): string {
  const sentences = topic.sentences
    .map(
      (s) =>
        `<li class="sentence" data-sentence="${s.index}">` +
        supportBadge(s) +
        ` <span class="sentence-text">${escapeHtml(s.text)}</span></li>`,
    )
    .join("");
  const nuggets = topic.nuggets
    .map((n) => {
      const status = n.answered
        ? `<span class="badge answered">answered</span>`
        : `<span class="badge missed">missed</span>`;
      const weight = IMPORTANCE_WEIGHT_LABEL[n.importance] ?? "?";
      const by = n.answeredBySentences.join(", ");
      return (
        `<tr class="${n.answered ? "answered" : "missed"}">` +
        `<td>${escapeHtml(n.nuggetId)}</td>` +
        `<td>${escapeHtml(n.question)}</td>` +
        `<td>${escapeHtml(n.importance)} (${weight})</td>` +
        `<td>${escapeHtml(n.combinator)}</td>` +
        `<td>${status}</td>` +
        `<td class="answered-by">${by}</td></tr>`
      );
    })
    .join("");
  return (
    `<section class="report-view"><h3>Sentences</h3>` +
    `<ol class="sentences" start="0">${sentences}</ol>` +
    `<h3>Nuggets</h3><table class="nugget-table">` +
    `<thead><tr><th>id</th><th>question</th><th>importance</th>` +
    `<th>combinator</th><th>status</th><th>answered by</th></tr></thead>` +
    `<tbody>${nuggets}</tbody></table></section>`
  );
}

export function renderSentenceView(topic: TopicView, index: number): string {
  const sentence = topic.sentences.find((s) => s.index === index);
  if (sentence === undefined) {
    return `<section class="sentence-view"><p>No sentence ${index} in this report.</p></section>`;
  }
  const citations =
    sentence.citations.length === 0
      ? `<p>${sentence.missingCitationPenalty ? "Uncited, but judged to need a citation." : "Uncited."}</p>`
      : `<table class="citation-table"><thead><tr><th>document</th><th>relevant</th>` +
        `<th>attests</th><th>outcome</th></tr></thead><tbody>` +
        sentence.citations
          .map(
            (c) =>
              `<tr class="${outcomeClass(c.outcome)}"><td>${escapeHtml(c.docId)}</td>` +
              `<td>${c.relevant ? "yes" : "no"}</td>` +
              `<td>${c.attests ? "yes" : "no"}</td>` +
              `<td>${c.outcome}</td></tr>`,
          )
          .join("") +
        `</tbody></table>`;
  const answers =
    sentence.answers.length === 0
      ? `<p>No nugget answers attested by this sentence.</p>`
      : `<ul class="attested-answers">` +
        sentence.answers
          .map(
            (a) =>
              `<li class="attested">${escapeHtml(a.nuggetId)} / ${escapeHtml(a.answerId)}` +
              ` <span class="badge attested">attested</span></li>`,
          )
          .join("") +
        `</ul>`;
  return (
    `<section class="sentence-view"><h3>Sentence ${sentence.index}</h3>` +
    `<blockquote>${escapeHtml(sentence.text)}</blockquote>` +
    `<h4>Citations</h4>${citations}` +
    `<h4>Nugget answers</h4>${answers}</section>`
  );
}

export function renderErrorPanel(message: string): string {
  return `<div class="error-panel">${escapeHtml(message)}</div>`;
}
