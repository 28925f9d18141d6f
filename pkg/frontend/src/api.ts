// Thin client for the service API. The console is a pure client: every
// number and string it shows originates from one of these responses.

import type { EngineChoice, SearchResponse, SuggestResponse } from "./types.js";

export function buildSearchUrl(
  baseUrl: string,
  query: string,
  engine: EngineChoice,
  k = 10,
): string {
  const params = new URLSearchParams({ q: query, k: String(k) });
  // the engine toggle changes exactly this one parameter
  if (engine === "vsm") {
    params.set("engine", "vsm");
  }
  return `${baseUrl}/v1/search?${params.toString()}`;
}

export function buildSuggestUrl(baseUrl: string, prefix: string, k = 8): string {
  const params = new URLSearchParams({ prefix, k: String(k) });
  return `${baseUrl}/v1/suggest?${params.toString()}`;
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  async search(query: string, engine: EngineChoice, k = 10): Promise<SearchResponse> {
    const response = await fetch(buildSearchUrl(this.baseUrl, query, engine, k));
    if (!response.ok) {
      const detail = await response.json().catch(() => ({}));
      throw new Error(detail.message ?? `search failed with ${response.status}`);
    }
    return (await response.json()) as SearchResponse;
  }

  async suggest(prefix: string, k = 8): Promise<SuggestResponse> {
    const response = await fetch(buildSuggestUrl(this.baseUrl, prefix, k));
    if (!response.ok) {
      throw new Error(`suggest failed with ${response.status}`);
    }
    return (await response.json()) as SuggestResponse;
  }
}
