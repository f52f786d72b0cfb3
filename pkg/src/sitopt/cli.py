"""Command line interface.

Subcommands:

* ``run``    -- execute one experiment cell (framework or baseline) over seeds
* ``report`` -- aggregate finished run directories into AUC curves and tables
* ``serve``  -- expose a framework instance over the HTTP adapter
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import SitoptError


def _parse_seeds(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sitopt")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment cell")
    run_p.add_argument("--ddm", required=True, type=Path, help="domain model YAML")
    run_p.add_argument("--scenario", required=True, type=Path, help="scenario YAML")
    run_p.add_argument("--detection", help="RuleBased | OPTICS | DBSCAN | kMeans")
    run_p.add_argument("--trigger", help="hypervolume | threshold")
    run_p.add_argument("--baseline", help="BestDistance | BestVelocity | Rules")
    run_p.add_argument("--seeds", default="1", help="comma separated, e.g. 1,2,3")
    run_p.add_argument("--out", required=True, type=Path)

    report_p = sub.add_parser("report", help="aggregate run directories")
    report_p.add_argument("--runs", required=True, nargs="+", type=Path, help="cell directories")
    report_p.add_argument("--out", required=True, type=Path)

    serve_p = sub.add_parser("serve", help="serve the HTTP adapter")
    serve_p.add_argument("--ddm", required=True, type=Path)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8080)
    serve_p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            from .experiments import ExperimentPlan, run

            if args.baseline is None and (args.detection is None or args.trigger is None):
                print("run: need --detection and --trigger, or --baseline", file=sys.stderr)
                return 2
            plan = ExperimentPlan(
                ddm_path=args.ddm,
                scenario_path=args.scenario,
                seeds=_parse_seeds(args.seeds),
                detection=None if args.baseline else args.detection,
                trigger=None if args.baseline else args.trigger,
                baseline=args.baseline,
                out_dir=args.out,
            )
            cell_dir = run(plan)
            print(cell_dir)
        elif args.command == "report":
            from .experiments import report

            out = report(args.runs, args.out)
            print(out)
        elif args.command == "serve":
            import uvicorn

            from .adapter import build_app
            from .coordination import load_framework

            framework = load_framework(args.ddm, seed=args.seed)
            uvicorn.run(build_app(framework), host=args.host, port=args.port)
    except SitoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
