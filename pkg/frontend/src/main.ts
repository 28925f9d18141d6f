// DOM wiring: one search pane, one in-flight request at a time, responses
// matched to requests by id so a slow older answer can never clobber a
// newer one.

import { ApiClient } from "./api.js";
import { debounce } from "./debounce.js";
import { renderError, renderSearch, renderSuggestions } from "./render.js";
import {
  applyError,
  applyResponse,
  applySuggestions,
  beginSearch,
  clearSuggestions,
  initialState,
  setQueryText,
  shouldFetchSuggestions,
  toggleEngine,
  type ConsoleState,
} from "./state.js";

const BASE_URL = (window as { SHOPQL_BASE_URL?: string }).SHOPQL_BASE_URL ?? "";
const client = new ApiClient(BASE_URL);
let state: ConsoleState = initialState();

const input = document.getElementById("query") as HTMLInputElement;
const form = document.getElementById("search-form") as HTMLFormElement;
const engineToggle = document.getElementById("engine-toggle") as HTMLInputElement;
const engineLabel = document.getElementById("engine-label") as HTMLElement;
const resultsPane = document.getElementById("results") as HTMLElement;
const suggestionsPane = document.getElementById("suggestions") as HTMLElement;

function paint(): void {
  engineLabel.textContent = state.engine;
  if (state.error) {
    resultsPane.innerHTML = renderError(state.error);
  } else if (state.lastResponse) {
    resultsPane.innerHTML = renderSearch(state.lastResponse);
  }
  suggestionsPane.innerHTML = renderSuggestions(state.suggestions);
}

async function runSearch(query: string): Promise<void> {
  if (!query.trim()) {
    return;
  }
  const begun = beginSearch(state, query);
  state = begun.state;
  input.value = query;
  paint();
  try {
    const response = await client.search(query, state.engine);
    state = applyResponse(state, begun.requestId, response);
  } catch (error) {
    state = applyError(state, begun.requestId, (error as Error).message);
  }
  paint();
}

const fetchSuggestions = debounce(async (prefix: string) => {
  try {
    const response = await client.suggest(prefix);
    state = applySuggestions(state, prefix, response.entries);
  } catch {
    // suggestion failures stay silent; the input keeps working
    state = clearSuggestions(state);
  }
  paint();
}, 200);

form.addEventListener("submit", (event) => {
  event.preventDefault();
  void runSearch(input.value);
});

input.addEventListener("input", () => {
  state = setQueryText(state, input.value);
  if (shouldFetchSuggestions(input.value)) {
    fetchSuggestions(input.value.trim());
  } else {
    state = clearSuggestions(state);
    paint();
  }
});

suggestionsPane.addEventListener("click", (event) => {
  const item = (event.target as HTMLElement).closest<HTMLElement>(".suggestion");
  if (item?.dataset.query) {
    void runSearch(item.dataset.query);
  }
});

engineToggle.addEventListener("change", () => {
  state = toggleEngine(state);
  paint();
  if (state.query.trim()) {
    void runSearch(state.query); // re-issue so the decision reflects the toggle
  }
});

paint();
