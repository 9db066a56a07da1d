"""Batch figure generation from recorded run logs."""

from __future__ import annotations

import argparse
import sys

from plotkit.figures import plot_barrier, plot_metrics_table, plot_trajectory
from plotkit.logs import LogSchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_traj = sub.add_parser("trajectory", help="overlay robot trajectories per planner")
    p_traj.add_argument("run_dirs", nargs="+", help="run directories (one per planner)")
    p_traj.add_argument("--out", required=True, help="output image path")

    p_bar = sub.add_parser("barrier", help="audited barrier time series for one run")
    p_bar.add_argument("run_dir")
    p_bar.add_argument("--out", required=True)
    p_bar.add_argument("--gamma", type=float, default=0.15)

    p_tab = sub.add_parser("metrics", help="comparison table figure")
    p_tab.add_argument("comparison_csv")
    p_tab.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "trajectory":
            out = plot_trajectory(args.run_dirs, args.out)
        elif args.command == "barrier":
            out = plot_barrier(args.run_dir, args.out, gamma=args.gamma)
        else:
            out = plot_metrics_table(args.comparison_csv, args.out)
    except (LogSchemaError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
