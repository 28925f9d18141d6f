// Console state and the transitions that keep it honest: the rendered
// response always belongs to the displayed query and engine toggle, and a
// response from a superseded request is dropped on the floor.

import type { EngineChoice, SearchResponse, SuggestionEntry } from "./types.js";

export interface ConsoleState {
  query: string;
  engine: EngineChoice;
  lastResponse: SearchResponse | null;
  suggestions: SuggestionEntry[];
  inFlight: boolean;
  requestId: number; // id of the newest search request
  error: string | null;
}

export function initialState(): ConsoleState {
  return {
    query: "",
    engine: "two-tier",
    lastResponse: null,
    suggestions: [],
    inFlight: false,
    requestId: 0,
    error: null,
  };
}

export function toggleEngine(state: ConsoleState): ConsoleState {
  return { ...state, engine: state.engine === "two-tier" ? "vsm" : "two-tier" };
}

/** Start a search; the returned id must accompany the eventual response. */
export function beginSearch(
  state: ConsoleState,
  query: string,
): { state: ConsoleState; requestId: number } {
  const requestId = state.requestId + 1;
  return {
    state: { ...state, query, requestId, inFlight: true, suggestions: [], error: null },
    requestId,
  };
}

/** Apply a response; stale ids (superseded by a newer request) are discarded. */
export function applyResponse(
  state: ConsoleState,
  requestId: number,
  response: SearchResponse,
): ConsoleState {
  if (requestId !== state.requestId) {
    return state;
  }
  return { ...state, lastResponse: response, inFlight: false, error: null };
}

export function applyError(
  state: ConsoleState,
  requestId: number,
  message: string,
): ConsoleState {
  if (requestId !== state.requestId) {
    return state;
  }
  return { ...state, inFlight: false, error: message };
}

export function applySuggestions(
  state: ConsoleState,
  forPrefix: string,
  entries: SuggestionEntry[],
): ConsoleState {
  // suggestions for text the user has already replaced are stale too
  if (!state.query.startsWith(forPrefix)) {
    return state;
  }
  return { ...state, suggestions: entries };
}

export function setQueryText(state: ConsoleState, query: string): ConsoleState {
  return { ...state, query };
}

export function clearSuggestions(state: ConsoleState): ConsoleState {
  return state.suggestions.length ? { ...state, suggestions: [] } : state;
}

/** Type-ahead only fires from two characters of real input. */
export function shouldFetchSuggestions(text: string): boolean {
  return text.trim().length >= 2;
}
