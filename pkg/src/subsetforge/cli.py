"""Command-line entry point: ``subsetforge <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .learners import ALL_KINDS, get_learner
from .report import ReportError, emit_ranking_series, emit_sweep_series, emit_wrapper_table
from .schema import DataError, Dataset, canonical_schema, load_csv, stratified_split, write_csv
from .selection import MethodSpec, ProtocolReport, filter_sweep, rank_features, run_wrapper_all
from .synthgen import GeneratorConfig, generate_with_intercept, sidecar_json
from .tuning import SPACE_PRESETS, default_threads

log = logging.getLogger("subsetforge")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

GLOBAL_DEFAULTS = {
    "seed": 42,
    "budget": None,  # per-command default
    "test_fraction": 0.2,
    "threads": None,  # falls back to SUBSETFORGE_THREADS
    "out": ".",
    "enforce_exclusion": False,
    "space": "default",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_globals(p: argparse.ArgumentParser):
    s = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=s, help="master seed (default 42)")
    p.add_argument("--budget", type=int, default=s, help="random-search trials per model")
    p.add_argument("--test-fraction", type=float, default=s, help="held-out share (default 0.2)")
    p.add_argument("--threads", type=int, default=s, help="worker threads (env SUBSETFORGE_THREADS)")
    p.add_argument("--out", default=s, help="output directory (default .)")
    p.add_argument("--enforce-exclusion", action="store_true", default=s,
                   help="drop rows with fewer than 9 months of operation")
    p.add_argument("--space", choices=sorted(SPACE_PRESETS), default=s, help="search-space preset")


def _add_input(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--data", help="dataset CSV")
    g.add_argument("--gen-config", help="generator config JSON; data is synthesized")
    p.add_argument("--features", help="comma-separated predictors to keep (default: all)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subsetforge", description="Feature-subset selection for platform survival models.")
    _add_globals(parser)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("schema", help="print the canonical feature schema")
    _add_globals(p)

    p = sub.add_parser("gen", help="write a synthetic dataset CSV")
    _add_globals(p)
    p.add_argument("--n", type=int, default=2438)
    p.add_argument("--target-rate", type=float, default=None)
    p.add_argument("--noise-std", type=float, default=None)
    p.add_argument("--config", help="generator config JSON (flags override it)")
    p.add_argument("--name", default="synthetic.csv", help="output file name inside --out")

    p = sub.add_parser("rank", help="Spearman ranking series")
    _add_globals(p)
    _add_input(p)

    p = sub.add_parser("sweep", help="filter-method prefix sweep")
    _add_globals(p)
    _add_input(p)
    p.add_argument("--order", choices=("desc", "asc"), default="desc")
    p.add_argument("--sizes", help="comma-separated prefix sizes (default: all)")
    p.add_argument("--models", default="all", help="comma-separated kinds or 'all'")

    p = sub.add_parser("wrapper", help="tune, select, retune and test")
    _add_globals(p)
    _add_input(p)
    p.add_argument("--method", choices=("forward", "backward", "fixed"), required=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--model", default="all", help="learner kind or 'all'")

    p = sub.add_parser("report", help="render a table from protocol-report JSON files")
    _add_globals(p)
    p.add_argument("reports", nargs="+")
    p.add_argument("--name", default="table", help="output file stem inside --out")
    return parser


def _resolve(args) -> argparse.Namespace:
    for k, v in GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    if args.threads is None:
        args.threads = default_threads()
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    if args.budget is not None and args.budget < 1:
        raise UsageError("--budget must be at least 1")
    return args


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)
    return path


def _load_config(path) -> GeneratorConfig:
    with open(path, encoding="utf-8") as fh:
        return GeneratorConfig.from_dict(json.load(fh))


def _dataset(args) -> Dataset:
    if args.data:
        ds = load_csv(args.data, enforce_exclusion=args.enforce_exclusion)
    else:
        ds = generate_with_intercept(_load_config(args.gen_config))[0]
    if args.features:
        names = [n.strip() for n in args.features.split(",") if n.strip()]
        aliases = ds.schema.aliases()
        names = [aliases.get(n, n) for n in names]
        unknown = [n for n in names if n not in ds.feature_names]
        if unknown:
            raise UsageError(f"unknown features: {', '.join(unknown)}")
        ds = ds.select(names)
    return ds


def _kinds(spec: str):
    if spec.lower() == "all":
        return list(ALL_KINDS)
    try:
        return [get_learner(s.strip()) for s in spec.split(",")]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_schema(args) -> int:
    sys.stdout.write(json.dumps({"format_version": 1, **canonical_schema().to_dict()}, indent=2) + "\n")
    return EXIT_OK


def cmd_gen(args) -> int:
    cfg = _load_config(args.config) if args.config else GeneratorConfig()
    d = cfg.to_dict()
    d.update(n_rows=args.n, seed=args.seed)
    if args.target_rate is not None:
        d["target_rate"] = args.target_rate
    if args.noise_std is not None:
        d["noise_std"] = args.noise_std
    cfg = GeneratorConfig.from_dict(d)
    ds, intercept = generate_with_intercept(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out / args.name)
    _write(out, Path(args.name).stem + ".json", sidecar_json(cfg, intercept))
    return EXIT_OK


def cmd_rank(args) -> int:
    text = emit_ranking_series(rank_features(_dataset(args)))
    _write(Path(args.out), "ranking.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    ds = _dataset(args)
    split = stratified_split(ds, args.test_fraction, args.seed)
    order = "descending" if args.order == "desc" else "ascending"
    ranked = rank_features(split.train, order)
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else None
    budget = args.budget if args.budget is not None else 15
    rows = filter_sweep(split, ranked, _kinds(args.models), budget, args.seed, sizes=sizes, preset=args.space,
                        threads=args.threads)
    doc = {"format_version": 1, "order": order, "ranking": ranked.to_dict(), "rows": [r.to_dict() for r in rows]}
    out = Path(args.out)
    _write(out, f"sweep_{args.order}.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if sizes is None or sizes == list(range(sizes[0], sizes[0] + len(sizes))):
        _write(out, f"sweep_{args.order}.csv", emit_sweep_series(rows))
    return EXIT_OK


def _method(args) -> MethodSpec:
    if args.method == "fixed":
        if args.k is None or args.tol is not None:
            raise UsageError("--method fixed takes --k N (and no --tol)")
        return MethodSpec("fixed", args.k)
    if args.tol is None or args.k is not None:
        raise UsageError(f"--method {args.method} takes --tol X (and no --k)")
    return MethodSpec(args.method, args.tol)


def _setting_tag(method: MethodSpec) -> str:
    return f"k{method.setting}" if method.name == "fixed" else f"tol{method.setting:g}"


def cmd_wrapper(args) -> int:
    try:
        method = _method(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    kinds = _kinds(args.model)
    ds = _dataset(args)
    if method.name == "fixed" and method.setting > len(ds.feature_names):
        raise UsageError(f"--k exceeds the {len(ds.feature_names)} available features")
    split = stratified_split(ds, args.test_fraction, args.seed)
    budget = args.budget if args.budget is not None else 30
    reports = run_wrapper_all(split, method, budget, args.seed, kinds, preset=args.space, threads=args.threads)
    out = Path(args.out)
    tag = f"{method.name}_{_setting_tag(method)}"
    for r in reports:
        _write(out, f"report_{tag}_{r.kind}.json", r.to_json() + "\n")
    if len(reports) == len(ALL_KINDS):
        table = emit_wrapper_table(reports)
        _write(out, f"table_{tag}.md", table.to_markdown())
        _write(out, f"table_{tag}.csv", table.to_csv())
        sys.stdout.write(table.to_markdown())
    return EXIT_OK


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        docs = doc if isinstance(doc, list) else doc.get("reports", [doc])
        reports.extend(ProtocolReport.from_dict(d) for d in docs)
    table = emit_wrapper_table(reports)
    out = Path(args.out)
    _write(out, f"{args.name}.md", table.to_markdown())
    _write(out, f"{args.name}.csv", table.to_csv())
    sys.stdout.write(table.to_markdown())
    return EXIT_OK


COMMANDS = {"schema": cmd_schema, "gen": cmd_gen, "rank": cmd_rank, "sweep": cmd_sweep,
            "wrapper": cmd_wrapper, "report": cmd_report}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = _resolve(parser.parse_args(argv))
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        sys.stderr.write(parser.format_usage())
        return EXIT_USAGE
    except (DataError, ReportError, FileNotFoundError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
