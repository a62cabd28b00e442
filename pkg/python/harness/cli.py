"""
CLI interface for the diffimit harness.

Provides the command-line interface for demonstration generation, training,
evaluation, offline metrics and pseudo-expert sampling.
デモ生成・学習・評価・指標計算・疑似エキスパート出力のコマンドラインインターフェース。
"""

import argparse
import sys

from harness import commands


def _add_train_overrides(parser):
    """Flags that override RunConfig fields (None means "not given")."""
    parser.add_argument("--seed", type=int, default=None, help="Run seed (overrides DIFFIMIT_SEED)")
    parser.add_argument("--out", dest="output_dir", default=None,
                        help="Output root (default: DIFFIMIT_OUTPUT_DIR or output/runs)")
    parser.add_argument("--run-name", default=None, help="Run directory name under <out>/<env>/")
    parser.add_argument("--n-expert", type=int, default=None, help="Use the first n expert trajectories")
    parser.add_argument("--total-steps", type=int, default=None, help="Environment steps")
    parser.add_argument("--warmup-steps", type=int, default=None, help="Random-action steps before updates")
    parser.add_argument("--T", dest="T", type=int, default=None, help="Diffusion steps")
    parser.add_argument("--beta-start", type=float, default=None, help="First noise-schedule beta")
    parser.add_argument("--beta-end", type=float, default=None, help="Last noise-schedule beta")
    parser.add_argument("--pseudo-ratio", type=int, default=None, help="Pseudo-expert draws per expert draw")
    parser.add_argument("--k-expert", type=int, default=None, help="Expert draws per discriminator step")
    parser.add_argument("--gen-every", type=int, default=None, help="Steps between generation events")
    parser.add_argument("--gen-count", type=int, default=None, help="Candidates per generation event")
    parser.add_argument("--eval-every", type=int, default=None, help="Steps between evaluations")
    parser.add_argument("--eval-episodes", type=int, default=None, help="Episodes per evaluation")
    parser.add_argument("--tau-full-dataset", action="store_const", const=True, default=None,
                        help="Compute the acceptance threshold over all expert pairs")
    parser.add_argument("--no-pseudo", dest="use_pseudo", action="store_const", const=False, default=None,
                        help="Ablation: disable pseudo-expert generation")
    parser.add_argument("--no-pedr", dest="use_pedr", action="store_const", const=False, default=None,
                        help="Ablation: uniform replay instead of prioritized replay")
    parser.add_argument("--quiet", dest="progress", action="store_const", const=False, default=None,
                        help="Disable the progress bar")


OVERRIDE_FIELDS = (
    "seed", "output_dir", "run_name", "n_expert", "total_steps", "warmup_steps", "T", "beta_start", "beta_end",
    "pseudo_ratio", "k_expert", "gen_every", "gen_count", "eval_every", "eval_episodes", "tau_full_dataset",
    "use_pseudo", "use_pedr", "progress",
)


def create_parser():
    """
    Creates and returns the argument parser for the harness CLI.

    ハーネス CLI 用の引数パーサを作成して返す。

    Returns:
        argparse.ArgumentParser: Configured argument parser.
    """
    parser = argparse.ArgumentParser(
        prog="harness",
        description="Diffusion-discriminator adversarial imitation learning with prioritized expert replay",
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    demos_parser = subparsers.add_parser("gen-demos", help="Write scripted-expert demonstration trajectories")
    demos_parser.add_argument("--env", required=True, help="Environment (pointmass2d or doubleintegrator1d)")
    demos_parser.add_argument("--n", type=int, required=True, help="Number of trajectories")
    demos_parser.add_argument("--seed", type=int, default=0, help="Seed for the initial states")
    demos_parser.add_argument("--out", default=None, help="Demo set directory (default: data/demos/<env>/n<N>_s<seed>)")

    train_parser = subparsers.add_parser("train", help="Run the training loop")
    source = train_parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--demos", help="Demo set directory (e.g. data/demos/pointmass2d/n16_s0)")
    source.add_argument("--resume", help="Run directory to continue from its last snapshot")
    train_parser.add_argument("--config", default=None, help="JSON file with RunConfig fields")
    _add_train_overrides(train_parser)

    eval_parser = subparsers.add_parser("eval", help="Roll out a checkpoint and print its mean return")
    eval_parser.add_argument("--checkpoint", required=True, help="policy.npz or a demo set's expert.json")
    eval_parser.add_argument("--env", default=None, help="Environment (default: from the run's config.json)")
    eval_parser.add_argument("--episodes", type=int, default=None, help="Episodes (default: 10, or the demo count)")
    eval_parser.add_argument("--seed", type=int, default=None, help="Initial-state seed (default: 0, or the demo seed)")

    metrics_parser = subparsers.add_parser("metrics", help="Compute PCC / FD / PCA exports from a run")
    target = metrics_parser.add_mutually_exclusive_group(required=True)
    target.add_argument("--run", help="Run directory")
    target.add_argument("--compare", nargs="+", help="Run directories of an ablation study")
    metrics_parser.add_argument("--pca-samples", type=int, default=10000, help="Generated candidates for the PCA export")
    metrics_parser.add_argument("--seed", type=int, default=0, help="Seed for generation and subsampling")
    metrics_parser.add_argument("--out", default=None, help="Output file for --compare (default: <output root>/ablation_summary.csv)")

    sample_parser = subparsers.add_parser("sample-pseudo", help="Dump filtered pseudo-expert pairs from a run")
    sample_parser.add_argument("--run", required=True, help="Run directory")
    sample_parser.add_argument("--n", type=int, default=1000, help="Candidates to generate")
    sample_parser.add_argument("--seed", type=int, default=0, help="Generation seed")
    sample_parser.add_argument("--out", default=None, help="CSV path (default: <run>/analysis/pseudo_samples.csv)")

    return parser


def main(argv=None):
    """
    Main entry point for the harness CLI.

    ハーネス CLI のメイン入口。

    Example usage:
        PYTHONPATH=python python -m harness gen-demos --env pointmass2d --n 16 --seed 0
        PYTHONPATH=python python -m harness train --demos data/demos/pointmass2d/n16_s0 --n-expert 1 --seed 0
        PYTHONPATH=python python -m harness eval --checkpoint data/demos/pointmass2d/n16_s0/expert.json
        PYTHONPATH=python python -m harness metrics --run output/runs/pointmass2d/n16_s0_n1_seed0

    Returns:
        int: Exit code (0 on success, 1 on failure).
    """
    parser = create_parser()
    args = parser.parse_args(argv)
    argv = list(sys.argv[1:] if argv is None else argv)

    if args.command is None:
        parser.print_help()
        return 1

    try:
        if args.command == "gen-demos":
            commands.gen_demos(args.env, args.n, args.seed, args.out)
        elif args.command == "train":
            overrides = {name: getattr(args, name) for name in OVERRIDE_FIELDS}
            commands.train(args.demos, args.resume, args.config, overrides, argv)
        elif args.command == "eval":
            commands.evaluate_checkpoint(args.checkpoint, args.env, args.episodes, args.seed)
        elif args.command == "metrics":
            if args.run:
                commands.run_metrics(args.run, args.pca_samples, args.seed)
            else:
                commands.compare_runs(args.compare, args.out)
        elif args.command == "sample-pseudo":
            commands.sample_pseudo(args.run, args.n, args.seed, args.out)
        else:
            parser.print_help()
            return 1
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
