#!/usr/bin/env python3
"""Feedback-level ablation: run the same searches at the three feedback
levels and record the trajectories.

The built-in strategies ignore feedback text, so their scores are
identical across levels; the point of this harness is the structural
comparison (which lines an external optimizer would see) and producing
the per-level CSVs an adapter-driven study would use.  With an adapter
endpoint the levels genuinely change what the optimizer reads.

Usage:
    python3 scripts/run_feedback_ablation.py --outdir results \
        [--strategy hillclimb | --adapter CMD_OR_URL]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mapforge.adapter import AdapterClient
from mapforge.configs import load_app, load_costs, load_machine
from mapforge.evaluator import corpus_path
from mapforge.feedback import LEVELS
from mapforge.search import ObjectiveSpec, external_strategy, run, write_csv

APPS = ["circuit", "cannon", "cosma"]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results")
    parser.add_argument("--apps", nargs="*", default=APPS)
    parser.add_argument("--iters", type=int, default=10)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--strategy", default="hillclimb")
    parser.add_argument("--adapter", help="external optimizer command or URL")
    args = parser.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    machine = load_machine(corpus_path("machines", "p100-cluster.machine"))
    costs = load_costs(corpus_path("costs", "default.costs"))

    for name in args.apps:
        app = load_app(corpus_path("apps", f"{name}.app"))
        for level in LEVELS:
            trajectories = []
            for seed in range(args.seeds):
                if args.adapter:
                    with AdapterClient(args.adapter) as client:
                        strategy = external_strategy(client, app.name,
                                                     machine.name)
                        trajectory = run(app, machine, costs, strategy,
                                         ObjectiveSpec(budget=args.iters),
                                         level, seed)
                else:
                    trajectory = run(app, machine, costs, args.strategy,
                                     ObjectiveSpec(budget=args.iters),
                                     level, seed)
                trajectories.append(trajectory)
            tag = level.replace("+", "_")
            out = outdir / f"{name}_{tag}.csv"
            write_csv(trajectories, out)
            suggestions = sum(
                "Suggestion:" in r.rendered_feedback
                for t in trajectories for r in t.records)
            explanations = sum(
                "Explanation:" in r.rendered_feedback
                for t in trajectories for r in t.records)
            best = max((t.best_score or 0.0) for t in trajectories)
            print(f"{name:8s} {level:24s} best={best:12.4g} "
                  f"explain_lines={explanations:3d} "
                  f"suggest_lines={suggestions:3d} -> {out}")


if __name__ == "__main__":
    main()
