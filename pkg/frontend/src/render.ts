// HTML renderers. Pure string-in string-out so they test without a DOM;
// main.ts owns the actual elements. Every displayed value comes straight
// from a service response — the console computes no relevance of its own.

import {
  SUPPORTED_SCHEMA_VERSION,
  type ParseBlock,
  type SearchResponse,
  type SuggestionEntry,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderError(message: string): string {
  return `<div class="banner error">${escapeHtml(message)}</div>`;
}

function renderDecision(response: SearchResponse): string {
  const { decision } = response;
  const reason = decision.reason
    ? ` <span class="reason">(${escapeHtml(String(decision.reason.kind))})</span>`
    : "";
  return `<div class="decision ${decision.path.toLowerCase()}">route: ${decision.path}${reason}</div>`;
}

function renderParsePanel(parse: ParseBlock | null, decision: SearchResponse["decision"]): string {
  if (!parse) {
    const note =
      decision.reason?.kind === "ParseFailure"
        ? `parse failed: ${escapeHtml(String(decision.reason.detail ?? ""))}`
        : "no parse available";
    return `<section class="parse-panel"><h3>Parse</h3><p class="empty">${note}</p></section>`;
  }
  const atoms = parse.atoms
    .map((atom) =>
      "kind" in atom
        ? `<li><code>${escapeHtml(atom.kind)} = ${escapeHtml(atom.value)}</code></li>`
        : `<li><code>${escapeHtml(atom.attr)} ${escapeHtml(atom.op)} ${atom.bound}</code></li>`,
    )
    .join("");
  const sql = parse.sql_text
    ? `<pre class="sql">${escapeHtml(parse.sql_text)}</pre>`
    : "";
  return (
    `<section class="parse-panel"><h3>Parse</h3>` +
    `<ul class="atoms">${atoms}</ul>` +
    `<div class="confidence">confidence ${parse.confidence.toFixed(2)}</div>` +
    sql +
    `</section>`
  );
}

function renderResultCards(response: SearchResponse): string {
  if (response.results.length === 0) {
    return `<p class="empty-state">No results for this query.</p>`;
  }
  const cards = response.results
    .map((result) => {
      const badge =
        result.tier !== null
          ? `<span class="badge tier-${result.tier}">tier ${result.tier}</span>`
          : `<span class="badge keyword">keyword</span>`;
      const price = result.price !== null ? `${result.price.toFixed(2)}` : "—";
      return (
        `<li class="card" data-sku="${escapeHtml(result.sku)}">` +
        `<span class="position">#${result.position}</span> ` +
        `<span class="title">${escapeHtml(result.title)}</span> ` +
        badge +
        ` <span class="price">${price}</span></li>`
      );
    })
    .join("");
  return `<ol class="results">${cards}</ol>`;
}

/** Full search view: banner, decision, result cards, parse panel. */
export function renderSearch(response: SearchResponse): string {
  if (response.schema_version !== SUPPORTED_SCHEMA_VERSION) {
    // no partial render on a schema we do not understand
    return renderError(
      `Unsupported response schema ${response.schema_version} ` +
        `(console speaks ${SUPPORTED_SCHEMA_VERSION}).`,
    );
  }
  const banner = `<div class="banner explanation">${escapeHtml(response.explanation)}</div>`;
  return (
    banner +
    renderDecision(response) +
    renderResultCards(response) +
    renderParsePanel(response.parse, response.decision)
  );
}

export function renderSuggestions(entries: SuggestionEntry[]): string {
  if (entries.length === 0) {
    return "";
  }
  const items = entries
    .map(
      (entry) =>
        `<li class="suggestion" data-query="${escapeHtml(entry.query)}">` +
        `${escapeHtml(entry.query)} <span class="source">${entry.source.toLowerCase()}` +
        ` · ${entry.result_count}</span></li>`,
    )
    .join("");
  return `<ul class="suggestions">${items}</ul>`;
}
