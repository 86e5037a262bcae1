/**
 * Bundle loading: number-preserving parse plus schema validation.
 * Schema errors name the exact path of the offending field so a bad export
 * is diagnosable from the error panel alone.
 */

import { JsonObject, JsonValue, RawNum, parseJsonPreserving } from "./json.js";
import type {
  AnswerRef,
  CitationView,
  MacroView,
  MetricRow,
  NuggetView,
  SentenceView,
  TopicMetricsView,
  TopicView,
  VizBundle,
} from "./types.js";

export class SchemaError extends Error {
  constructor(
    readonly path: string,
    reason: string,
  ) {
    super(`${path}: ${reason}`);
    this.name = "SchemaError";
  }
}

const TOPIC_CORE_FIELDS = [
  "sentence_precision",
  "nugget_recall",
  "nugget_recall_weighted",
  "f1",
  "f1_weighted",
];
const OUTCOMES = new Set(["REWARD", "PENALTY", "NEUTRAL"]);

function isObject(value: JsonValue): value is JsonObject {
  return typeof value === "object" && value !== null && !Array.isArray(value)
    && !(value instanceof RawNum);
}

function getObject(value: JsonValue, path: string): JsonObject {
  if (!isObject(value)) throw new SchemaError(path, "expected an object");
  return value;
}

function getArray(value: JsonValue | undefined, path: string): JsonValue[] {
  if (!Array.isArray(value)) throw new SchemaError(path, "expected an array");
  return value;
}

function getString(obj: JsonObject, key: string, path: string): string {
  const value = obj[key];
  if (typeof value !== "string") throw new SchemaError(`${path}.${key}`, "expected a string");
  return value;
}

function getBool(obj: JsonObject, key: string, path: string): boolean {
  const value = obj[key];
  if (typeof value !== "boolean") throw new SchemaError(`${path}.${key}`, "expected a boolean");
  return value;
}

function getNum(obj: JsonObject, key: string, path: string): RawNum {
  const value = obj[key];
  if (!(value instanceof RawNum)) throw new SchemaError(`${path}.${key}`, "expected a number");
  return value;
}

function getStringArray(obj: JsonObject, key: string, path: string): string[] {
  const items = getArray(obj[key], `${path}.${key}`);
  return items.map((item, i) => {
    if (typeof item !== "string") {
      throw new SchemaError(`${path}.${key}[${i}]`, "expected a string");
    }
    return item;
  });
}

/** Every numeric field of `obj`, in bundle order. */
function numericRows(obj: JsonObject): MetricRow[] {
  const rows: MetricRow[] = [];
  for (const [key, value] of Object.entries(obj)) {
    if (value instanceof RawNum) rows.push({ key, value });
  }
  return rows;
}

function requireKeys(obj: JsonObject, keys: string[], path: string): void {
  for (const key of keys) {
    if (!(key in obj)) throw new SchemaError(`${path}.${key}`, "missing field");
  }
}

function parseMacro(value: JsonValue, path: string): MacroView {
  const obj = getObject(value, path);
  requireKeys(obj, ["run_id", ...TOPIC_CORE_FIELDS, "n_topics", "missing_topics"], path);
  return {
    runId: getString(obj, "run_id", path),
    rows: numericRows(obj),
    missingTopics: getStringArray(obj, "missing_topics", path),
  };
}

function parseTopicMetrics(value: JsonValue, path: string): TopicMetricsView {
  const obj = getObject(value, path);
  requireKeys(obj, [...TOPIC_CORE_FIELDS, "fine", "flags"], path);
  const fine = getObject(obj["fine"] ?? null, `${path}.fine`);
  const core = TOPIC_CORE_FIELDS.map((key) => ({ key, value: getNum(obj, key, path) }));
  return {
    core,
    fine: numericRows(fine),
    flags: getStringArray(obj, "flags", path),
  };
}

function parseCitation(value: JsonValue, path: string): CitationView {
  const obj = getObject(value, path);
  const outcome = getString(obj, "outcome", path);
  if (!OUTCOMES.has(outcome)) {
    throw new SchemaError(`${path}.outcome`, `unknown outcome ${JSON.stringify(outcome)}`);
  }
  return {
    docId: getString(obj, "doc_id", path),
    relevant: getBool(obj, "relevant", path),
    attests: getBool(obj, "attests", path),
    outcome: outcome as CitationView["outcome"],
  };
}

function parseAnswerRef(value: JsonValue, path: string): AnswerRef {
  const obj = getObject(value, path);
  return {
    nuggetId: getString(obj, "nugget_id", path),
    answerId: getString(obj, "answer_id", path),
  };
}

function parseSentence(value: JsonValue, path: string): SentenceView {
  const obj = getObject(value, path);
  return {
    index: getNum(obj, "index", path).num,
    text: getString(obj, "text", path),
    citations: getArray(obj["citations"], `${path}.citations`).map((c, i) =>
      parseCitation(c, `${path}.citations[${i}]`),
    ),
    missingCitationPenalty: getBool(obj, "missing_citation_penalty", path),
    answers: getArray(obj["answers"], `${path}.answers`).map((a, i) =>
      parseAnswerRef(a, `${path}.answers[${i}]`),
    ),
  };
}

function parseNugget(value: JsonValue, path: string): NuggetView {
  const obj = getObject(value, path);
  return {
    nuggetId: getString(obj, "nugget_id", path),
    question: getString(obj, "question", path),
    importance: getString(obj, "importance", path),
    combinator: getString(obj, "combinator", path),
    answered: getBool(obj, "answered", path),
    answeredBySentences: getArray(obj["answered_by_sentences"], `${path}.answered_by_sentences`)
      .map((v, i) => {
        if (!(v instanceof RawNum)) {
          throw new SchemaError(`${path}.answered_by_sentences[${i}]`, "expected a number");
        }
        return v.num;
      }),
  };
}

function parseTopic(value: JsonValue, path: string): TopicView {
  const obj = getObject(value, path);
  return {
    requestId: getString(obj, "request_id", path),
    metrics: parseTopicMetrics(obj["metrics"] ?? null, `${path}.metrics`),
    sentences: getArray(obj["sentences"], `${path}.sentences`).map((s, i) =>
      parseSentence(s, `${path}.sentences[${i}]`),
    ),
    nuggets: getArray(obj["nuggets"], `${path}.nuggets`).map((n, i) =>
      parseNugget(n, `${path}.nuggets[${i}]`),
    ),
  };
}

/**
 * Parse and validate a bundle file's text.
 * Throws JsonParseError (with position) or SchemaError (with field path).
 */
export function loadBundle(text: string): VizBundle {
  const root = getObject(parseJsonPreserving(text), "$");
  const runId = getString(root, "run_id", "$");
  const macro = parseMacro(root["macro"] ?? null, "$.macro");
  const topics = getArray(root["topics"], "$.topics").map((t, i) =>
    parseTopic(t, `$.topics[${i}]`),
  );
  return { runId, macro, topics };
}
