"""Command-line entry points: ingest, simulate, gridsearch, serve.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import CorpusError
from .formats import ingest_corpus, write_corpus
from .providers import ProviderConfig, make_provider
from .session import SessionEngine
from .simulate import (
    SimulationConfig,
    grid_rows_to_csv,
    grid_search,
    load_corpus,
    run_simulation,
)


def load_config_file(path: str | Path) -> dict:
    raw = Path(path).read_bytes()
    if str(path).endswith(".json"):
        return json.loads(raw)
    if str(path).endswith(".toml"):
        return tomllib.loads(raw.decode("utf-8"))
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return tomllib.loads(raw.decode("utf-8"))


def _aggregate_path(out: str) -> str:
    path = Path(out)
    return str(path.with_name(path.stem + "_aggregate" + (path.suffix or ".csv")))


def _cmd_ingest(args) -> int:
    corpus = ingest_corpus(args.embeddings, labels=args.labels)
    labeled = sum(1 for lab in corpus.labels if lab is not None)
    print(f"ingested {len(corpus)} records, dimension {corpus.dimension}, {labeled} labeled")
    if args.out:
        write_corpus(corpus, args.out)
        print(f"wrote canonical store to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    config = SimulationConfig.from_dict(load_config_file(args.config))
    report = run_simulation(config)
    report.to_csv(args.out)
    aggregate = _aggregate_path(args.out)
    report.aggregate_to_csv(aggregate)
    print(f"wrote {args.out} and {aggregate}")
    for strategy in report.strategies:
        print(
            f"{strategy}: map@{report.k_map} {report.mean_map(strategy, 0):.3f} -> "
            f"{report.mean_map(strategy, report.rounds):.3f}, "
            f"recall@{report.k_recall} {report.mean_recall(strategy, 0):.3f} -> "
            f"{report.mean_recall(strategy, report.rounds):.3f}"
        )
    return 0


def _cmd_gridsearch(args) -> int:
    raw = load_config_file(args.config)
    grid = raw.get("grid")
    config = SimulationConfig.from_dict(raw)
    corpus = load_corpus(config)
    rows = grid_search(grid, config, corpus=corpus)
    grid_rows_to_csv(rows, args.out, k_map=config.k_map, k_recall=config.k_recall)
    print(f"wrote {args.out} ({len(rows)} configurations)")
    best = rows[0]
    print(
        f"best: C={best.C} positives={best.positives} multiplier={best.negative_multiplier} "
        f"kernel={best.kernel} retrieval_limit={best.retrieval_limit} "
        f"map={best.final_map:.3f}"
    )
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    corpus = ingest_corpus(args.corpus, labels=args.labels)
    provider_config = ProviderConfig(
        mode=args.provider,
        remote_url=args.provider_url,
        timeout=args.provider_timeout,
    )
    provider = make_provider(provider_config, corpus.dimension)
    engine = SessionEngine(corpus, provider, retrieval_limit=args.retrieval_limit)
    app = create_app(engine, ui_dir=args.ui_dir)
    print(f"serving {len(corpus)} records on {args.host}:{args.port} (provider: {args.provider})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xcal", description="Interactive image retrieval toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate an embedding file, optionally writing the binary store")
    p_ingest.add_argument("embeddings", help="embedding file (binary XCAL or JSONL)")
    p_ingest.add_argument("--labels", help="id,label CSV")
    p_ingest.add_argument("--out", help="write the canonical binary store here")
    p_ingest.set_defaults(func=_cmd_ingest)

    p_sim = sub.add_parser("simulate", help="run the interactive-learning simulation")
    p_sim.add_argument("--config", required=True, help="JSON or TOML simulation config")
    p_sim.add_argument("--out", default="report.csv", help="per-scene CSV path")
    p_sim.set_defaults(func=_cmd_simulate)

    p_grid = sub.add_parser("gridsearch", help="grid-search system parameters")
    p_grid.add_argument("--config", required=True, help="JSON or TOML config; optional [grid] section")
    p_grid.add_argument("--out", default="gridsearch.csv", help="ranked configurations CSV")
    p_grid.set_defaults(func=_cmd_gridsearch)

    p_serve = sub.add_parser("serve", help="serve the HTTP session API")
    p_serve.add_argument("--corpus", required=True, help="embedding file to serve")
    p_serve.add_argument("--labels", help="id,label CSV")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--provider", choices=["stub", "remote"], default="stub")
    p_serve.add_argument("--provider-url", help="embed sidecar base URL (remote mode)")
    p_serve.add_argument("--provider-timeout", type=float, default=10.0)
    p_serve.add_argument("--retrieval-limit", type=int, default=2500)
    p_serve.add_argument("--ui-dir", help="serve a built web UI from this directory")
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (CorpusError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
