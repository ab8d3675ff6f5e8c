"""
Command Line - the `coevo` entry point

    coevo constants --pmf geometric:0.3 [--damping 0.5] [--k 200] --json
    coevo rw hitting --pmf geometric:0.3 --k 5 --steps 200 --csv
    coevo rw profile --pmf geometric:0.5 --k 1 --t 2
    coevo grow --pmf geometric:0.3 --n 100000 --variant discrete --seed 7 --out tree.bin
    coevo stats --in tree.bin --pagerank 0.5 --fringe 4 --json
    coevo experiment --preset A5 --out report.json --csv-dir out/
"""
import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from .config import get_settings
from .constants import compute_constants
from .distribution import parse_pmf_spec
from .errors import CoevoError
from .harness import ExperimentSpec, preset_specs, run_suite, write_reports
from .loader import load_tree, serialize_tree
from .observables import (
    degree_histogram,
    depth_profile,
    fringe_histogram,
    height,
    martingale_w,
    pagerank_scores,
    root_degree,
)
from .random_walk import expected_profile, hitting_ratio_trace, hitting_time_table
from .simulator import GrowthConfig, grow
from .streams import seeded_rng

logger = logging.getLogger("coevotree")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2


def _print_lines(payload: Dict) -> None:
    for key, value in payload.items():
        print(f"{key}: {value}")


def _emit(payload: Dict, out: Optional[str] = None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text)
    else:
        print(text)


# ==================== COMMANDS ====================

def cmd_constants(args) -> int:
    d = parse_pmf_spec(args.pmf)
    d.check_assumptions()
    constants = compute_constants(d, damping=args.damping, k_max=args.k_max)
    payload = constants.model_dump(mode="json")
    if args.json or args.out:
        _emit(payload, args.out)
    else:
        _print_lines({key: value for key, value in payload.items() if key != "alpha_k_trace"})
    return EXIT_OK


def cmd_rw_hitting(args) -> int:
    d = parse_pmf_spec(args.pmf)
    table = hitting_time_table(d, args.K, args.N)
    trace = hitting_ratio_trace(table, k=1, lag=args.lag)
    if args.csv:
        handle = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            writer = csv.writer(handle)
            writer.writerow(["k", "i", "prob"])
            for k in range(1, table.K + 1):
                for i, p in enumerate(table.row(k)):
                    if p > 0:
                        writer.writerow([k, i, repr(float(p))])
        finally:
            if handle is not sys.stdout:
                handle.close()
        return EXIT_OK
    _emit({
        "pmf": d.spec,
        "K": table.K,
        "N": table.N,
        "trunc_error": table.trunc_error,
        "mass_by_k": {k: float(table.row(k).sum()) for k in range(1, table.K + 1)},
        "ratio_tail": [point.model_dump() for point in trace[-5:]],
    }, args.out)
    return EXIT_OK


def cmd_rw_profile(args) -> int:
    d = parse_pmf_spec(args.pmf)
    N = args.N or int(math.ceil(args.t + 12.0 * math.sqrt(args.t) + 40.0))
    table = hitting_time_table(d, max(args.k, 1), N)
    _emit(expected_profile(table, args.k, args.t).model_dump(), args.out)
    return EXIT_OK


def cmd_grow(args) -> int:
    config = GrowthConfig.from_variant_arg(args.variant, pmf=args.pmf, n=args.n, horizon=args.t, seed=args.seed)
    tree = grow(config, seeded_rng(config.seed))
    tree.validate()
    if args.out:
        serialize_tree(tree, args.out)
    summary = {"n": tree.n, "height": height(tree), "root_degree": root_degree(tree),
               "variant": tree.variant, "pmf": tree.pmf, "seed": tree.seed}
    if tree.birth_time is not None:
        summary["last_birth"] = float(tree.birth_time[-1])
    if args.stats:
        Path(args.stats).write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return EXIT_OK


def cmd_stats(args) -> int:
    tree = load_tree(args.input)
    result = {
        "n": tree.n,
        "height": height(tree),
        "root_degree": root_degree(tree),
        "degree_histogram": degree_histogram(tree).tolist(),
        "depth_profile": depth_profile(tree).counts.tolist(),
    }
    if tree.birth_time is not None:
        result["martingale_w"] = martingale_w(tree)
    if args.pagerank is not None:
        pr = pagerank_scores(tree, args.pagerank)
        top = np.argsort(-pr.scores, kind="stable")[:10]
        result["pagerank"] = {"damping": args.pagerank, "adjusted_total": pr.adjusted_total(),
                              "top": [[int(v), float(pr.scores[v])] for v in top]}
    if args.fringe:
        result["fringe"] = fringe_histogram(tree, args.fringe, args.extended).to_dict()
    if args.json:
        _emit(result, args.out)
    else:
        _print_lines(result)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.threads:
        os.environ["COEVO_THREADS"] = str(args.threads)
        get_settings.cache_clear()
    specs: List[ExperimentSpec] = []
    if args.config:
        document = json.loads(Path(args.config).read_text())
        documents = document if isinstance(document, list) else [document]
        specs.extend(ExperimentSpec.model_validate(doc) for doc in documents)
    for preset in args.preset or []:
        specs.extend(preset_specs(preset, seed=args.seed))
    if not specs:
        print("❌ nothing to run: give --config or --preset", file=sys.stderr)
        return EXIT_ERROR

    reports = run_suite(specs)
    write_reports(reports, Path(args.out) if args.out else None, Path(args.csv_dir) if args.csv_dir else None)
    for report in reports:
        mark = "✅" if report.passed else "❌"
        print(f"{mark} {report.name:>4} {report.kind.value:<20} {report.pmf:<16} "
              f"estimate={report.estimate} predicted={report.predicted} ({report.wall_time:.1f}s)")
    return EXIT_OK if all(report.passed for report in reports) else EXIT_FAILED


# ==================== PARSER ====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coevo", description="Exploration-attachment tree simulator")
    parser.add_argument("--verbose", "-v", action="count", default=0, help="-v for info, -vv for debug logs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="Limit constants of a step law")
    p.add_argument("--pmf", required=True)
    p.add_argument("--damping", type=float)
    p.add_argument("--k", "--k-max", dest="k_max", type=int, default=200, help="largest kernel size in the alpha_k trace")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_constants)

    rw = sub.add_parser("rw", help="Hitting-time tables and profile series")
    rw_sub = rw.add_subparsers(dest="rw_command", required=True)
    p = rw_sub.add_parser("hitting")
    p.add_argument("--pmf", required=True)
    p.add_argument("--k", "--K", dest="K", type=int, default=5, help="levels 1..k")
    p.add_argument("--steps", "--N", dest="N", type=int, default=200, help="walk steps 0..N")
    p.add_argument("--lag", type=int, default=1)
    p.add_argument("--csv", action="store_true", help="emit the q grid as CSV instead of the JSON summary")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rw_hitting)
    p = rw_sub.add_parser("profile")
    p.add_argument("--pmf", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--steps", "--N", dest="N", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rw_profile)

    p = sub.add_parser("grow", help="Grow one tree")
    p.add_argument("--pmf", required=True)
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--n", type=int)
    target.add_argument("--t", type=float)
    p.add_argument("--variant", default="discrete", help="discrete|continuous|killed|pr:<c>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--stats")
    p.set_defaults(func=cmd_grow)

    p = sub.add_parser("stats", help="Statistics of a stored tree")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--pagerank", type=float)
    p.add_argument("--fringe", type=int, default=0)
    p.add_argument("--extended", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("experiment", help="Run experiments from a config or presets")
    p.add_argument("--config")
    p.add_argument("--preset", action="append", help="A1..A14 or ALL; repeatable")
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--csv-dir")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CoevoError, ValidationError, ValueError, OSError) as exc:
        print(f"❌ {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
