"""Command-line entry point for reproducible experiments.

Subcommands: simulate, generate-traces, recommend, convert-ml100k.
Exit codes: 0 success, 1 validation/input error, 2 runtime failure.
Set PROXREC_LOG (e.g. DEBUG, INFO, WARNING) to control log verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from enum import Enum
from pathlib import Path

from .core import ProxrecError, ValidationError, export_store, import_store
from .experiment import load_experiment
from .ingestion import TraceGenParams, generate_trace, save_trace, convert_ml100k
from .recommender import GroupStrategy, group_recommend, top_n
from .similarity import SimilarityConfig
from .simulator import SimResult, run

logger = logging.getLogger(__name__)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def _summary(result: SimResult) -> dict:
    final = result.metrics.final
    return {
        "seed": result.config.seed,
        "config": _jsonable(dataclasses.asdict(result.config)),
        "nodes": len(result.nodes),
        "total_records": result.total_records,
        "snapshots": len(result.metrics.rows),
        "final": _jsonable(dataclasses.asdict(final)),
    }


def _cmd_simulate(args) -> int:
    experiment = load_experiment(args.config, seed_override=args.seed)
    result = run(experiment.config)
    outdir = experiment.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    result.metrics.write_csv(outdir / "metrics.csv")
    (outdir / "summary.json").write_text(
        json.dumps(_summary(result), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if args.dump_stores:
        stores_dir = outdir / "stores"
        stores_dir.mkdir(exist_ok=True)
        for node in result.nodes:
            export_store(result.stores[node], stores_dir / f"node_{node}.csv")
    if not args.no_figures:
        from .report import render_metrics_figures

        render_metrics_figures(result.metrics, outdir)
    final = result.metrics.final
    print(
        f"simulated {len(result.nodes)} nodes to t={final.time}: "
        f"spread={final.spread:.4f} coverage={final.coverage:.4f} -> {outdir}"
    )
    return 0


def _cmd_generate_traces(args) -> int:
    params = TraceGenParams(
        n_nodes=args.nodes,
        horizon=args.hours * 3600.0,
        mean_rate=args.rate,
        rate_heterogeneity=args.heterogeneity,
        n_communities=args.communities,
        mean_duration=args.mean_duration,
        seed=args.seed,
    )
    events = generate_trace(params)
    save_trace(events, args.out)
    print(f"wrote {len(events)} encounters to {args.out}")
    return 0


def _similarity_from_args(args) -> SimilarityConfig:
    return SimilarityConfig(
        metric=args.metric,
        min_overlap=args.min_overlap,
        significance_threshold=args.significance_threshold,
    )


def _cmd_recommend(args) -> int:
    if args.user is None and not args.group:
        raise ValidationError("pass --user or --group")
    store = import_store(args.store, owner=args.owner)
    cfg = _similarity_from_args(args)
    if args.group:
        members = [int(m) for m in args.group.split(",") if m != ""]
        strategy = GroupStrategy(args.strategy)
        ranking = group_recommend(members, args.n, store, cfg, args.k, strategy)
        for rank, g in enumerate(ranking, start=1):
            print(f"{rank}. {g.item} score={g.score:.3f} ({strategy.value})")
    else:
        if not store.ratings_of(args.user):
            raise ValidationError(f"unknown user {args.user}: no ratings in {args.store}")
        ranking = top_n(args.user, args.n, store, cfg, args.k)
        for rank, p in enumerate(ranking, start=1):
            print(f"{rank}. {p.item} score={p.score:.3f} basis={p.basis.value}")
    return 0


def _cmd_convert_ml100k(args) -> int:
    count = convert_ml100k(args.src, args.dst)
    print(f"converted {count} ratings -> {args.dst}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxrec",
        description="Simulate proximity-based rating exchange and local recommendation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment file")
    p.add_argument("--config", required=True, type=Path, help="experiment YAML file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.add_argument("--dump-stores", action="store_true", help="write per-node store snapshots")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("generate-traces", help="synthesize a contact trace CSV")
    p.add_argument("--nodes", required=True, type=int)
    p.add_argument("--hours", required=True, type=float)
    p.add_argument("--rate", required=True, type=float, help="contacts per pair per hour")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--communities", type=int, default=1)
    p.add_argument("--heterogeneity", type=float, default=1.0)
    p.add_argument("--mean-duration", type=float, default=60.0, help="seconds")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=_cmd_generate_traces)

    p = sub.add_parser("recommend", help="rank items from a store snapshot")
    p.add_argument("--store", required=True, type=Path, help="store snapshot CSV")
    p.add_argument("--user", type=int, default=None)
    p.add_argument("--group", type=str, default=None, help="comma-separated member ids")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--strategy", choices=[s.value for s in GroupStrategy], default="average")
    p.add_argument("--k", type=int, default=10, help="neighborhood size")
    p.add_argument("--metric", choices=["pearson", "cosine"], default="pearson")
    p.add_argument("--min-overlap", type=int, default=3, help="co-rated items required")
    p.add_argument("--significance-threshold", type=int, default=10)
    p.add_argument("--owner", type=int, default=None, help="snapshot owner, if not inferable")
    p.set_defaults(handler=_cmd_recommend)

    p = sub.add_parser("convert-ml100k", help="convert a u.data file to the ratings CSV format")
    p.add_argument("src", type=Path)
    p.add_argument("dst", type=Path)
    p.set_defaults(handler=_cmd_convert_ml100k)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("PROXREC_LOG", "WARNING").upper())
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ProxrecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("unexpected failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
