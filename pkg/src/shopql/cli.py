"""Command-line interface mirroring the HTTP endpoints one-to-one, plus the
offline steps (generate / train / eval), so the whole pipeline is scriptable
without the service running.

Exit codes: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .catalog import load_catalog
from .config import load_engine_config
from .errors import ShopQLError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="engine config document (YAML)")
    parser.add_argument("--data-dir", type=Path, default=Path("shopql-data"),
                        help="artifact directory (default: ./shopql-data)")
    parser.add_argument("--seed", type=int, default=None, help="override configured seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shopql", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="tag a catalog and build all artifacts")
    _add_common(p_index)
    p_index.add_argument("--catalog", type=Path, required=True)
    p_index.add_argument("--no-train", action="store_true",
                         help="build only the knowledge base and keyword index")

    p_generate = sub.add_parser("generate", help="write the synthetic triple dataset")
    _add_common(p_generate)
    p_generate.add_argument("--n", type=int, default=None)
    p_generate.add_argument("--policy", choices=("non_empty_only", "over_generate"))
    p_generate.add_argument("--out", type=Path, default=None)

    p_train = sub.add_parser("train", help="train the parser on a triple dataset")
    _add_common(p_train)
    p_train.add_argument("--dataset", type=Path, default=None)
    p_train.add_argument("--epochs", type=int, default=None)

    p_search = sub.add_parser("search", help="run a query against built artifacts")
    _add_common(p_search)
    p_search.add_argument("--q", required=True)
    p_search.add_argument("--k", type=int, default=10)
    p_search.add_argument("--engine", choices=("two-tier", "vsm"), default="two-tier")

    p_parse = sub.add_parser("parse", help="inspect a query's logical form")
    _add_common(p_parse)
    p_parse.add_argument("--q", required=True)

    p_suggest = sub.add_parser("suggest", help="type-ahead suggestions for a prefix")
    _add_common(p_suggest)
    p_suggest.add_argument("--prefix", required=True)
    p_suggest.add_argument("--k", type=int, default=8)

    p_eval = sub.add_parser("eval", help="run the engine comparison experiment")
    _add_common(p_eval)
    p_eval.add_argument("--stream-size", type=int, default=100000)
    p_eval.add_argument("--report-dir", type=Path, default=None)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    _add_common(p_serve)
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")

    return parser


def _require_config(args) -> "EngineConfig":
    if not args.config:
        raise ShopQLError("--config is required for this command")
    return load_engine_config(args.config)


def _load_state(args):
    from .engine import load_engine

    config = _require_config(args)
    return load_engine(args.data_dir, config)


def _cmd_index(args) -> int:
    from .engine import build_engine, build_summary, save_engine

    started = time.perf_counter()
    config = _require_config(args)
    catalog = load_catalog(args.catalog)
    state = build_engine(catalog, config, train_model=not args.no_train)
    save_engine(state, args.data_dir)
    print(json.dumps(build_summary(state, started), indent=2, sort_keys=True))
    return 0


def _cmd_generate(args) -> int:
    from . import catalog as cat
    from .engine import load_grammar
    from .grammar import compile_grammar, generate_triples, save_triples

    config = _require_config(args)
    kb = cat.load_kb(args.data_dir / "kb.json")
    generator = compile_grammar(load_grammar(config), kb)
    gen_cfg = config.generation
    n = args.n if args.n is not None else gen_cfg.n
    seed = args.seed if args.seed is not None else gen_cfg.seed
    policy = args.policy or gen_cfg.policy
    triples = generate_triples(generator, n, seed, policy)
    out = args.out or (args.data_dir / "triples.jsonl")
    save_triples(triples, out)
    print(f"wrote {len(triples)} triples to {out}")
    return 0


def _cmd_train(args) -> int:
    import dataclasses

    from . import catalog as cat
    from .grammar import load_triples
    from .tagger import save_model, train

    config = _require_config(args)
    kb = cat.load_kb(args.data_dir / "kb.json")
    dataset = args.dataset or (args.data_dir / "triples.jsonl")
    triples = load_triples(dataset)
    training = config.training
    if args.epochs is not None:
        training = dataclasses.replace(training, epochs=args.epochs)
    if args.seed is not None:
        training = dataclasses.replace(training, seed=args.seed)
    model = train(triples, training, kb)
    save_model(model, args.data_dir / "model.json")
    print(
        json.dumps(
            {
                "model": str(args.data_dir / "model.json"),
                "dataset_hash": model.dataset_hash,
                "calibration_exact_match": model.metadata.get("calibration_exact_match"),
            },
            indent=2,
        )
    )
    return 0


def _cmd_search(args) -> int:
    from .engine import run_query
    from .service import search_response

    state = _load_state(args)
    outcome = run_query(state, args.q, k=args.k, engine=args.engine)
    print(json.dumps(search_response(args.q, state, outcome), indent=2))
    return 0


def _cmd_parse(args) -> int:
    from .forms import atoms_to_json
    from .plans import compile_form
    from .tagger import ParseFailure, parse

    state = _load_state(args)
    if state.model is None:
        raise ShopQLError("no trained model in the data directory")
    result = parse(state.model, args.q)
    if isinstance(result, ParseFailure):
        print(json.dumps({"failure": True, "reason": result.reason}, indent=2))
    else:
        print(
            json.dumps(
                {
                    "failure": False,
                    "atoms": atoms_to_json(result.form),
                    "alignment": [[t, l] for t, l in result.labeled],
                    "confidence": result.confidence,
                    "sql_text": compile_form(result.form, state.fingerprint).sql_text,
                },
                indent=2,
            )
        )
    return 0


def _cmd_suggest(args) -> int:
    from .engine import suggest_queries

    state = _load_state(args)
    entries = suggest_queries(state, args.prefix, args.k)
    print(
        json.dumps(
            [
                {"query": e.query, "source": e.source, "result_count": e.result_count}
                for e in entries
            ],
            indent=2,
        )
    )
    return 0


def _cmd_eval(args) -> int:
    from .harness import (
        EngineComponents,
        compare_engines,
        fit_powerlaw,
        sample_query_stream,
        save_report,
        synthetic_query_log,
    )

    state = _load_state(args)
    if state.model is None or not state.triples:
        raise ShopQLError("eval needs trained artifacts (run `shopql index` first)")
    seed = args.seed if args.seed is not None else state.config.generation.seed
    queries = [t.query for t in state.triples]
    log = synthetic_query_log(queries, seed=seed)
    dist = fit_powerlaw(log)
    stream = sample_query_stream(dist, args.stream_size, seed)
    golden = {t.query: t.golden for t in state.triples}
    forms = {t.query: t.form for t in state.triples}
    components = EngineComponents(
        kb=state.kb,
        model=state.model,
        index=state.index,
        router=state.config.router,
        policy=state.config.fallback,
        signals=state.signals,
        weights=state.config.ranking_weights,
        query_forms=forms,
    )
    report = compare_engines(stream, golden, components, seed=seed)
    report_dir = args.report_dir or (args.data_dir / "reports")
    json_path, text_path = save_report(report, report_dir)
    print(report.to_text())
    print(f"report written to {json_path} and {text_path}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .engine import load_engine
    from .service import create_app

    config = _require_config(args)
    state = None
    if (args.data_dir / "kb.json").exists():
        state = load_engine(args.data_dir, config)
    app = create_app(initial_state=state)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "index": _cmd_index,
    "generate": _cmd_generate,
    "train": _cmd_train,
    "search": _cmd_search,
    "parse": _cmd_parse,
    "suggest": _cmd_suggest,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ShopQLError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
