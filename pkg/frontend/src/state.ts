/**
 * Application state as pure transitions. The bundle itself is never mutated;
 * a failed load keeps the previous bundle usable.
 */

import type { TopicView, VizBundle } from "./types.js";

export type Scope = "run" | "topic";

export interface AppState {
  bundle: VizBundle | null;
  scope: Scope;
  topicId: string | null;
  sentenceIndex: number | null;
  error: string | null;
}

export function initialState(): AppState {
  return { bundle: null, scope: "run", topicId: null, sentenceIndex: null, error: null };
}

export function bundleLoaded(state: AppState, bundle: VizBundle): AppState {
  return {
    ...state,
    bundle,
    scope: "run",
    topicId: bundle.topics.length > 0 ? bundle.topics[0]!.requestId : null,
    sentenceIndex: null,
    error: null,
  };
}

export function loadFailed(state: AppState, message: string): AppState {
  return { ...state, error: message };
}

export function setScope(state: AppState, scope: Scope): AppState {
  return { ...state, scope };
}

export function selectTopic(state: AppState, topicId: string): AppState {
  if (state.topicId === topicId) return state;
  return { ...state, topicId, sentenceIndex: null };
}

export function selectSentence(state: AppState, index: number | null): AppState {
  return { ...state, sentenceIndex: index };
}

export function currentTopic(state: AppState): TopicView | null {
  if (state.bundle === null || state.topicId === null) return null;
  return state.bundle.topics.find((t) => t.requestId === state.topicId) ?? null;
}
