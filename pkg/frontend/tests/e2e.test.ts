// End-to-end: build and start the real engine service, then drive the
// console's client + state + render stack against it. Covers one
// exact-match query, one relaxed (RelaxValue) query, one keyword-routed
// query, and the engine toggle.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { renderSearch } from "../src/render.js";
import { applyResponse, beginSearch, initialState, toggleEngine } from "../src/state.js";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

const CATALOG = `sku,Name,Description,Manufacturer,Category,Color,Material,Gender,Price,Popularity
M001,prada purple shoes,Elegant purple leather shoes by prada for men.,prada,shoes,purple,leather,men,120.00,10
M002,gucci dark red shoes,Classic dark red leather shoes by gucci for women.,gucci,shoes,dark red,leather,women,80.00,50
M003,nike blue shirts,Sporty blue cotton shirts by nike for men.,nike,shirts,blue,cotton,men,30.00,900
M004,prada red shirts,Premium red cotton shirts by prada for women.,prada,shirts,red,cotton,women,60.00,20
M005,gucci purple gloves,Stylish purple leather gloves by gucci for kids.,gucci,gloves,purple,leather,kids,25.00,5
M006,nike white shoes,Durable white cotton shoes by nike for men.,nike,shoes,white,cotton,men,45.00,300
M007,prada blue shoes,Modern blue leather shoes by prada for women.,prada,shoes,blue,leather,women,150.00,70
M008,gucci red belts,Classic red leather belts by gucci for men.,gucci,belts,red,leather,men,35.00,15
`;

const CONFIG = `schema:
  kinds: [SORTAL, BRAND, COLOR, MATERIAL, GENDER, PRICE]
  vocab_seeds:
    SORTAL: [shoes, shirts, gloves, belts]
  similarity:
    COLOR:
      - [purple, dark red, 0.2]
      - [purple, red, 0.4]
strategies:
  - {tag: BRAND, type: config, source: Manufacturer}
  - {tag: COLOR, type: config, source: Color}
  - {tag: MATERIAL, type: config, source: Material}
  - {tag: GENDER, type: config, source: Gender}
  - tag: SORTAL
    type: heuristic
    rule: first_noun_overlap
    params: {description_column: Description, category_column: Category}
  - {tag: PRICE, type: config, source: Price}
grammar:
  text: |
    [SORTAL]
    [COLOR] [SORTAL]
    [BRAND] [SORTAL]
    [BRAND] [COLOR] [SORTAL]
    [SORTAL] under [PRICE]
synonyms:
  sneakers: [shoes]
training: {seed: 13, epochs: 8, calibration_split: 0.1}
generation: {n: 400, seed: 3, policy: over_generate}
router: {threshold: 0.5, k: 10, fields: [Name, Description]}
fallback:
  priority: [COLOR, MATERIAL, GENDER, BRAND]
signals:
  popularity_column: Popularity
suggestions: {limit: 150}
`;

let server: ChildProcess | undefined;
const client = new ApiClient(BASE);

async function waitUntilReady(): Promise<void> {
  for (let attempt = 0; attempt < 120; attempt++) {
    try {
      const response = await fetch(`${BASE}/v1/suggest?prefix=pu&k=1`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error("service did not become ready");
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "shopql-console-"));
  writeFileSync(join(dir, "catalog.csv"), CATALOG);
  writeFileSync(join(dir, "shop.yaml"), CONFIG);
  const dataDir = join(dir, "data");

  const index = spawnSync(
    "python3",
    [
      "-m", "shopql.cli", "index",
      "--catalog", join(dir, "catalog.csv"),
      "--config", join(dir, "shop.yaml"),
      "--data-dir", dataDir,
    ],
    { encoding: "utf-8", timeout: 120000 },
  );
  if (index.status !== 0) {
    throw new Error(`index failed: ${index.stderr}`);
  }

  server = spawn(
    "python3",
    [
      "-m", "shopql.cli", "serve",
      "--config", join(dir, "shop.yaml"),
      "--data-dir", dataDir,
      "--port", String(PORT),
    ],
    { stdio: "ignore" },
  );
  await waitUntilReady();
}, 180000);

afterAll(() => {
  server?.kill();
});

describe("console against the live service", () => {
  it("renders an exact-match query with decision, banner and sql panel", async () => {
    const begun = beginSearch(initialState(), "purple shoes");
    const response = await client.search("purple shoes", begun.state.engine);
    const state = applyResponse(begun.state, begun.requestId, response);
    expect(state.lastResponse?.decision.path).toBe("PARSED");
    const html = renderSearch(state.lastResponse!);
    expect(html).toContain("route: PARSED");
    expect(html).toContain(response.explanation); // verbatim banner
    expect(response.explanation).toBe("Showing exact matches for purple shoes.");
    expect(html).toContain("SELECT sku FROM products WHERE");
    expect(html).toContain("prada purple shoes");
    expect(html).toContain("tier 0");
  }, 30000);

  it("renders a relaxed query with the RelaxValue banner verbatim", async () => {
    const begun = beginSearch(initialState(), "purple belts");
    const response = await client.search("purple belts", begun.state.engine);
    const state = applyResponse(begun.state, begun.requestId, response);
    expect(response.decision.path).toBe("PARSED");
    expect(response.trace?.steps[0]?.action).toBe("RelaxValue");
    expect(response.explanation).toBe(
      "We don't have purple belts, showing red belts instead.",
    );
    const html = renderSearch(state.lastResponse!);
    expect(html).toContain("We don't have purple belts, showing red belts instead.");
    expect(html).toContain("gucci red belts");
  }, 30000);

  it("renders a keyword-routed query with its reason", async () => {
    const begun = beginSearch(initialState(), "zxqv");
    const response = await client.search("zxqv", begun.state.engine);
    const state = applyResponse(begun.state, begun.requestId, response);
    expect(response.decision.path).toBe("VSM_FALLBACK");
    expect(response.decision.reason?.kind).toBe("ParseFailure");
    const html = renderSearch(state.lastResponse!);
    expect(html).toContain("route: VSM_FALLBACK");
    expect(html).toContain("ParseFailure");
  }, 30000);

  it("toggling the engine changes the displayed route decision", async () => {
    let state = initialState();
    const first = beginSearch(state, "purple shoes");
    state = applyResponse(
      first.state,
      first.requestId,
      await client.search("purple shoes", first.state.engine),
    );
    expect(renderSearch(state.lastResponse!)).toContain("route: PARSED");

    state = toggleEngine(state);
    expect(state.engine).toBe("vsm");
    const second = beginSearch(state, "purple shoes");
    state = applyResponse(
      second.state,
      second.requestId,
      await client.search("purple shoes", second.state.engine),
    );
    const html = renderSearch(state.lastResponse!);
    expect(html).toContain("route: VSM_FALLBACK");
    expect(html).toContain("LowConfidence");
  }, 30000);

  it("suggestions include grammar queries with live result counts", async () => {
    const response = await client.suggest("purple sh");
    expect(response.entries.length).toBeGreaterThan(0);
    for (const entry of response.entries) {
      expect(entry.query.startsWith("purple sh")).toBe(true);
      expect(entry.result_count).toBeGreaterThan(0);
    }
  }, 30000);
});
