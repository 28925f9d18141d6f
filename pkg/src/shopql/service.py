"""HTTP surface of the engine.

All endpoints live under ``/v1`` and speak versioned JSON; errors are
problem-detail objects ``{status, code, message}``. Reads are side-effect
free and unlimited; ``POST /v1/index`` holds an exclusive build lock and
swaps the whole immutable component bundle atomically, so readers see either
the old engine or the new one, never a mix.
"""

from __future__ import annotations

import threading
import time
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .catalog import load_catalog, parse_catalog
from .config import load_engine_config, parse_engine_config
from .engine import EngineState, build_engine, build_summary, run_query, suggest_queries
from .errors import ShopQLError
from .forms import atoms_to_json
from .vsm import RouteOutcome

SCHEMA_VERSION = 1


class IndexRequest(BaseModel):
    catalog_path: Optional[str] = None
    catalog_text: Optional[str] = None
    config_path: Optional[str] = None
    config_text: Optional[str] = None
    train: bool = True
    head_queries: Optional[dict[str, int]] = None


def _problem(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"status": status, "code": code, "message": message},
    )


def search_response(query: str, state: EngineState, outcome: RouteOutcome) -> dict:
    """Serialize a route outcome; every response carries an explanation and
    (when parsed) the exact program text that ran."""
    results = []
    for hit in outcome.hits:
        product = state.kb.by_sku(hit.sku)
        results.append(
            {
                "sku": hit.sku,
                "title": product.raw.get("Name", hit.sku),
                "price": product.price,
                "tier": hit.tier,
                "position": hit.position,
                "score": hit.score,
            }
        )
    decision: dict = {"path": outcome.decision.path}
    if outcome.decision.reason is not None:
        decision["reason"] = outcome.decision.reason
    trace = None
    if outcome.trace is not None:
        steps = []
        for step in outcome.trace.steps:
            if hasattr(step, "from_value"):
                steps.append(
                    {
                        "action": "RelaxValue",
                        "kind": step.kind,
                        "from": step.from_value,
                        "to": step.to_value,
                        "distance": step.distance,
                        "rationale": step.rationale,
                    }
                )
            else:
                steps.append(
                    {"action": "DropAtom", "kind": step.kind, "rationale": step.rationale}
                )
        trace = {"steps": steps, "message": outcome.trace.message}

    if outcome.decision.path == "PARSED" and outcome.trace is not None:
        explanation = outcome.trace.message
    else:
        base = f"Showing keyword results for '{query}'."
        explanation = f"{outcome.trace.message} {base}" if outcome.trace else base

    parse_block = None
    if outcome.parse is not None:
        parse_block = {
            "atoms": atoms_to_json(outcome.parse.form),
            "confidence": outcome.parse.confidence,
            "sql_text": outcome.sql_text,
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "query": query,
        "results": results,
        "decision": decision,
        "trace": trace,
        "explanation": explanation,
        "parse": parse_block,
        "timing": dict(outcome.timings_us),
    }


def create_app(initial_state: Optional[EngineState] = None) -> FastAPI:
    app = FastAPI(title="shopql", version="1.0")
    app.state.engine = initial_state
    app.state.build_lock = threading.Lock()

    @app.exception_handler(ShopQLError)
    async def handle_engine_error(request: Request, exc: ShopQLError):
        return _problem(400, exc.__class__.__name__, str(exc))

    def engine_or_none() -> Optional[EngineState]:
        return app.state.engine

    @app.post("/v1/index")
    def index_endpoint(body: IndexRequest):
        if not app.state.build_lock.acquire(blocking=False):
            return _problem(409, "BuildInProgress", "an index build is already running")
        started = time.perf_counter()
        try:
            if body.config_text:
                config = parse_engine_config(body.config_text)
            elif body.config_path:
                config = load_engine_config(body.config_path)
            else:
                return _problem(400, "MissingConfig", "config_path or config_text required")
            if body.catalog_text:
                catalog = parse_catalog(body.catalog_text)
            elif body.catalog_path:
                if not Path(body.catalog_path).exists():
                    return _problem(
                        400, "MissingCatalog", f"no such catalog: {body.catalog_path}"
                    )
                catalog = load_catalog(body.catalog_path)
            else:
                return _problem(400, "MissingCatalog", "catalog_path or catalog_text required")
            state = build_engine(
                catalog, config, train_model=body.train, head_queries=body.head_queries
            )
            app.state.engine = state  # atomic swap
            return build_summary(state, started)
        except ShopQLError as exc:
            return _problem(400, exc.__class__.__name__, str(exc))
        finally:
            app.state.build_lock.release()

    @app.get("/v1/search")
    def search_endpoint(
        q: str = Query(default=""),
        k: int = Query(default=10, ge=1, le=500),
        engine: str = Query(default="two-tier"),
    ):
        state = engine_or_none()
        if state is None or state.model is None:
            return _problem(503, "NotIndexed", "no indexed catalog; POST /v1/index first")
        if not q.strip():
            return _problem(400, "EmptyQuery", "q must be non-empty")
        if engine not in ("two-tier", "vsm"):
            return _problem(400, "BadEngine", "engine must be 'two-tier' or 'vsm'")
        outcome = run_query(state, q, k=k, engine=engine)
        return search_response(q, state, outcome)

    @app.get("/v1/parse")
    def parse_endpoint(q: str = Query(default="")):
        from .plans import compile_form
        from .tagger import ParseFailure, parse

        state = engine_or_none()
        if state is None or state.model is None:
            return _problem(503, "NoModel", "no parser model loaded")
        if not q.strip():
            return _problem(400, "EmptyQuery", "q must be non-empty")
        result = parse(state.model, q)
        if isinstance(result, ParseFailure):
            return {
                "schema_version": SCHEMA_VERSION,
                "failure": True,
                "reason": result.reason,
            }
        return {
            "schema_version": SCHEMA_VERSION,
            "failure": False,
            "atoms": atoms_to_json(result.form),
            "alignment": [[token, label] for token, label in result.labeled],
            "confidence": result.confidence,
            "sql_text": compile_form(result.form, state.fingerprint).sql_text,
            "warnings": list(result.warnings),
        }

    @app.get("/v1/suggest")
    def suggest_endpoint(
        prefix: str = Query(default=""),
        k: int = Query(default=8, ge=1, le=50),
    ):
        state = engine_or_none()
        if state is None or state.pool is None:
            return _problem(503, "NotBuilt", "suggestion pool not built")
        entries = suggest_queries(state, prefix, k)
        return {
            "schema_version": SCHEMA_VERSION,
            "entries": [
                {"query": e.query, "source": e.source, "result_count": e.result_count}
                for e in entries
            ],
        }

    return app
