// Wire types mirroring the service's versioned JSON (/v1).

export const SUPPORTED_SCHEMA_VERSION = 1;

export type EngineChoice = "two-tier" | "vsm";

export interface ResultEntry {
  sku: string;
  title: string;
  price: number | null;
  tier: number | null;
  position: number;
  score: number | null;
}

export interface RouteDecision {
  path: "PARSED" | "VSM_FALLBACK";
  reason?: { kind: string; [key: string]: unknown };
}

export interface TraceStep {
  action: "RelaxValue" | "DropAtom";
  kind: string;
  from?: string;
  to?: string;
  distance?: number;
  rationale?: string;
}

export interface FallbackTrace {
  steps: TraceStep[];
  message: string;
}

export interface ParseBlock {
  atoms: Array<
    | { kind: string; value: string }
    | { attr: string; op: string; bound: number }
  >;
  confidence: number;
  sql_text: string | null;
}

export interface SearchResponse {
  schema_version: number;
  query: string;
  results: ResultEntry[];
  decision: RouteDecision;
  trace: FallbackTrace | null;
  explanation: string;
  parse: ParseBlock | null;
  timing: Record<string, number>;
}

export interface SuggestionEntry {
  query: string;
  source: "HEAD" | "SYNTHETIC";
  result_count: number;
}

export interface SuggestResponse {
  schema_version: number;
  entries: SuggestionEntry[];
}
