"""
Entry point for `python -m run_all`.

Executes the full pipeline:
    gen-demos → train (per seed, optionally per ablation variant) → metrics → metrics --compare

Usage:
    PYTHONPATH=python python -m run_all --env pointmass2d
    PYTHONPATH=python python -m run_all --env pointmass2d --seeds 0 1 2 --ablations

Example:
    PYTHONPATH=python python -m run_all --env pointmass2d --n-demos 16 --n-expert 1 --total-steps 150000
"""

import argparse
import subprocess
import sys

from run_resolve import find_repo_root, output_root

VARIANTS = {
    "full": [],
    "nopseudo": ["--no-pseudo"],
    "nopedr": ["--no-pedr"],
}


def create_parser():
    parser = argparse.ArgumentParser(
        prog="run_all",
        description="Run the full pipeline: gen-demos → train → metrics (→ ablation comparison)",
    )
    parser.add_argument("--env", default="pointmass2d", help="Environment (pointmass2d or doubleintegrator1d)")
    parser.add_argument("--n-demos", type=int, default=16, help="Trajectories in the generated demo set")
    parser.add_argument("--demo-seed", type=int, default=0, help="Seed of the demo set")
    parser.add_argument("--n-expert", type=int, default=1, help="Expert trajectories used for training")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2], help="Training seeds")
    parser.add_argument("--total-steps", type=int, default=None, help="Environment steps per run")
    parser.add_argument("--config", default=None, help="JSON config passed to every train step")
    parser.add_argument("--out", default=None, help="Output root for runs")
    parser.add_argument(
        "--ablations",
        action="store_true",
        default=False,
        help="Also train the no-pseudo and no-PEDR variants and write ablation_summary.csv",
    )
    return parser


def run_step(label, args):
    """Run a subprocess step. Exit immediately on failure."""
    print(f"[run_all] {label}", flush=True)
    result = subprocess.run(
        [sys.executable] + args,
        cwd=None,
    )
    if result.returncode != 0:
        print(f"[run_all] FAILED at: {label} (exit code {result.returncode})", file=sys.stderr)
        sys.exit(result.returncode)


def main():
    parser = create_parser()
    args = parser.parse_args()
    repo_root = find_repo_root()
    set_name = f"n{args.n_demos}_s{args.demo_seed}"
    demos = str(repo_root / "data" / "demos" / args.env / set_name)
    runs_root = output_root(repo_root, args.out) / args.env
    variants = list(VARIANTS) if args.ablations else ["full"]

    print(f"[run_all] Pipeline start: {args.env}, seeds {args.seeds}, variants {variants}")
    print(f"[run_all] Python: {sys.executable}")
    print("")

    run_step(
        "Demonstrations: gen-demos",
        ["-m", "harness", "gen-demos", "--env", args.env, "--n", str(args.n_demos),
         "--seed", str(args.demo_seed), "--out", demos],
    )
    print("")

    run_dirs = []
    for seed in args.seeds:
        for variant in variants:
            run_name = f"{set_name}_n{args.n_expert}_seed{seed}_{variant}"
            train_args = ["-m", "harness", "train", "--demos", demos, "--seed", str(seed),
                          "--n-expert", str(args.n_expert), "--run-name", run_name, "--quiet"]
            if args.config:
                train_args += ["--config", args.config]
            if args.total_steps is not None:
                train_args += ["--total-steps", str(args.total_steps)]
            if args.out:
                train_args += ["--out", args.out]
            run_step(f"Train: seed {seed}, {variant}", train_args + VARIANTS[variant])
            print("")

            run_dir = str(runs_root / run_name)
            run_step(f"Metrics: {run_name}", ["-m", "harness", "metrics", "--run", run_dir])
            print("")
            run_dirs.append(run_dir)

    if args.ablations:
        run_step(
            "Ablation comparison",
            ["-m", "harness", "metrics", "--compare", *run_dirs,
             "--out", str(runs_root / "ablation_summary.csv")],
        )
        print("")

    print(f"[run_all] All steps completed for: {args.env}")


if __name__ == "__main__":
    main()
