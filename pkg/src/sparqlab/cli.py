"""Command-line interface: train one run, compare methods, rebuild reports.

BLAS thread counts are pinned to 1 before numpy loads: the network matrices
are far too small for intra-op threading to pay off, and single-threaded
workers keep multi-run comparisons deterministic and fast.
"""

import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import sys
from pathlib import Path


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="INI config file (defaults used when omitted)")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default ./runs; "
                             "SPARQ_LOG_DIR overrides)")


def _load(args) -> "RunConfig":
    from .config import RunConfig, load_config

    if args.config is not None:
        return load_config(args.config)
    return RunConfig()


def cmd_train(args) -> int:
    from dataclasses import replace

    from .bridge import serve_oracle_bridge
    from .config import with_method_and_seed
    from .harness import run_training

    cfg = _load(args)
    if args.method:
        cfg = with_method_and_seed(cfg, args.method, args.seed if args.seed is not None
                                   else cfg.seed)
    elif args.seed is not None:
        cfg = replace(cfg, seed=args.seed)

    bridge = None
    if args.serve_oracle:
        bridge = serve_oracle_bridge(args.port, session_policy=args.session,
                                     run_id=f"{cfg.gate.kind}-{cfg.seed}")
        print(f"oracle bridge listening on port {bridge.port} "
              f"(session {bridge.session_id})")
    try:
        result = run_training(cfg, args.out, bridge=bridge)
    finally:
        if bridge is not None:
            bridge.stop()
    print(f"method={result.method} seed={result.seed} "
          f"queries={result.total_queries} "
          f"final_success={result.final_eval.success_rate:.3f} "
          f"events={result.events_path}")
    return 0


def cmd_compare(args) -> int:
    from .harness import compare_methods
    from .metrics import format_table

    cfg = _load(args)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    if not seeds:
        print("no seeds given", file=sys.stderr)
        return 2
    methods = args.methods.split(",")
    rows, table_path = compare_methods(cfg, methods, seeds, args.out,
                                       max_workers=args.workers)
    print(format_table(rows))
    print(f"\ntable written to {table_path}")
    return 0


def cmd_report(args) -> int:
    from .config import load_config
    from .metrics import build_table, emit_table, format_table

    log_dir = Path(args.logs)
    run_files = sorted(log_dir.glob("run_*.config.ini"))
    if not run_files:
        print(f"no run logs found under {log_dir}", file=sys.stderr)
        return 2
    groups: dict[str, dict] = {}
    for config_path in run_files:
        # run_<hash>_<method>_<seed>.config.ini; the method may contain "_"
        stem = config_path.name[len("run_"):-len(".config.ini")]
        parts = stem.split("_")
        run_hash, method, seed = parts[0], "_".join(parts[1:-1]), int(parts[-1])
        cfg = load_config(config_path)
        entry = groups.setdefault(run_hash, {"methods": [], "seeds": set(),
                                             "query_cost": cfg.gate.query_cost})
        if method not in entry["methods"]:
            entry["methods"].append(method)
        entry["seeds"].add(seed)
    for run_hash, entry in groups.items():
        rows = build_table(log_dir, run_hash, entry["methods"],
                           sorted(entry["seeds"]), entry["query_cost"])
        out_path = log_dir / f"table_{run_hash}.recomputed.csv"
        emit_table(rows, out_path)
        print(f"# config {run_hash}")
        print(format_table(rows))
        print(f"recomputed table written to {out_path}\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sparqlab",
                                     description="budget-aware oracle-gated RL runs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training configuration")
    _add_common(p_train)
    p_train.add_argument("--method", choices=["no_oracle", "random", "always", "sparq"],
                         default=None, help="gate kind (overrides config)")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--serve-oracle", action="store_true",
                         help="serve the live-console bridge during this run")
    p_train.add_argument("--port", type=int, default=8765)
    p_train.add_argument("--session", type=str, default=None,
                         help="expected console session id (default: generated)")
    p_train.set_defaults(fn=cmd_train)

    p_compare = sub.add_parser("compare", help="run all methods across seeds")
    _add_common(p_compare)
    p_compare.add_argument("--seeds", type=str, default="0,1,2",
                           help="comma-separated seed list")
    p_compare.add_argument("--methods", type=str,
                           default="no_oracle,random,always,sparq")
    p_compare.add_argument("--workers", type=int, default=None)
    p_compare.set_defaults(fn=cmd_compare)

    p_report = sub.add_parser("report", help="rebuild tables from saved logs")
    p_report.add_argument("--logs", type=Path, required=True)
    p_report.set_defaults(fn=cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
