/**
 * View model for an exported evaluation bundle.
 *
 * Metric leaves are RawNum (value + source token) so every number the app
 * shows is the bundle's own spelling; the viewer performs no arithmetic.
 */

import type { RawNum } from "./json.js";

export interface MetricRow {
  key: string;
  value: RawNum;
}

export interface MacroView {
  runId: string;
  rows: MetricRow[]; // bundle order, including n_topics
  missingTopics: string[];
}

export interface TopicMetricsView {
  core: MetricRow[]; // precision, recalls, F1s
  fine: MetricRow[];
  flags: string[];
}

export interface CitationView {
  docId: string;
  relevant: boolean;
  attests: boolean;
  outcome: "REWARD" | "PENALTY" | "NEUTRAL";
}

export interface AnswerRef {
  nuggetId: string;
  answerId: string;
}

export interface SentenceView {
  index: number;
  text: string;
  citations: CitationView[];
  missingCitationPenalty: boolean;
  answers: AnswerRef[];
}

export interface NuggetView {
  nuggetId: string;
  question: string;
  importance: string;
  combinator: string;
  answered: boolean;
  answeredBySentences: number[];
}

export interface TopicView {
  requestId: string;
  metrics: TopicMetricsView;
  sentences: SentenceView[];
  nuggets: NuggetView[];
}

export interface VizBundle {
  runId: string;
  macro: MacroView;
  topics: TopicView[];
}

/** Display weight for a nugget importance label. Labels, not arithmetic. */
export const IMPORTANCE_WEIGHT_LABEL: Record<string, string> = {
  vital: "1.0",
  okay: "0.5",
};
