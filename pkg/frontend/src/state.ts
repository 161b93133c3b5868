// View state and the operations that keep its invariants: the compare pair
// only ever names existing versions, and the expanded set only ever names
// bubbles present in the graph on screen.

import type { GraphDoc } from "./types.js";

export interface ViewState {
  /** Version whose graph is on screen; null before the first load. */
  version: number | null;
  aggregation: string;
  /** Bubble vertex ids currently expanded in place. */
  expanded: Set<string>;
  selectedNode: string | null;
  /** Pair of versions under comparison, or null for the single-version view. */
  compare: [number, number] | null;
}

export const DEFAULT_AGGREGATION = "threshold:10";

export function initialState(): ViewState {
  return {
    version: null,
    aggregation: DEFAULT_AGGREGATION,
    expanded: new Set(),
    selectedNode: null,
    compare: null,
  };
}

export function selectVersion(state: ViewState, seq: number, known: number[]): ViewState {
  if (!known.includes(seq)) {
    return state;
  }
  return { ...state, version: seq, expanded: new Set(), selectedNode: null };
}

export function setAggregation(state: ViewState, mode: string): ViewState {
  if (mode === state.aggregation) {
    return state;
  }
  return { ...state, aggregation: mode, expanded: new Set() };
}

export function setCompare(state: ViewState, a: number, b: number, known: number[]): ViewState {
  if (!known.includes(a) || !known.includes(b)) {
    return state;
  }
  return { ...state, compare: [a, b], expanded: new Set() };
}

export function clearCompare(state: ViewState): ViewState {
  if (state.compare === null) {
    return state;
  }
  return { ...state, compare: null };
}

export function selectNode(state: ViewState, nodeId: string | null): ViewState {
  return { ...state, selectedNode: nodeId };
}

export function toggleBubble(state: ViewState, bubbleId: string, graph: GraphDoc): ViewState {
  const isBubble = graph.vertices.some((v) => v.id === bubbleId && v.kind === "bubble");
  if (!isBubble) {
    return state;
  }
  const expanded = new Set(state.expanded);
  if (expanded.has(bubbleId)) {
    expanded.delete(bubbleId);
  } else {
    expanded.add(bubbleId);
  }
  return { ...state, expanded };
}

/** Drop expanded entries that no longer name a bubble of `graph`. */
export function pruneExpanded(state: ViewState, graph: GraphDoc): ViewState {
  const bubbles = new Set(graph.vertices.filter((v) => v.kind === "bubble").map((v) => v.id));
  const expanded = new Set([...state.expanded].filter((id) => bubbles.has(id)));
  if (expanded.size === state.expanded.size) {
    return state;
  }
  return { ...state, expanded };
}
