"""
Subcommand implementations behind harness.cli.

Handles:
- demonstration generation (gen-demos)
- run-directory creation, config.json / run.json and the training loop (train)
- checkpoint evaluation (eval)
- offline metrics and ablation comparison (metrics)
- pseudo-expert export (sample-pseudo)

各サブコマンドの実行ロジック：
- デモ生成、学習（実行ディレクトリ・config.json・run.json）、評価
- オフライン指標とアブレーション比較、疑似エキスパート出力
"""

import math
import shutil
import sys
from pathlib import Path

import numpy as np

from ail_errors import ConfigError, ShapeError, TrainingAbort, UndefinedStatisticError
from discriminator import dynamic_threshold, filter_pseudo, generate_pseudo, load_discriminator
from envs import collect_trajectories, get_spec, load_demo_set, random_controller, scripted_expert, write_demo_set
from envs.trajectory import SCRIPTED_CONTROLLER, mean_return
from harness.config import apply_overrides, load_config_file, resolve_config, save_config
from harness.metrics import compute_pcc, export_pca, min_max_normalize, moving_average
from harness.persistence import create_run_metadata, generate_run_id, run_logs, utc_now, write_run_metadata
from harness.training import fd_or_none, random_policy_pairs, run_training, subsample_rows
from record_io import format_real, load_json, write_json_atomic, write_text_atomic
from run_resolve import find_repo_root, output_root, resolve_demos, resolve_run
from sac import act, load_policy

# Overrides still accepted by `train --resume`.
RESUME_FIELDS = ("total_steps", "progress")


def gen_demos(env, n, seed, out=None):
    """
    Writes n scripted-expert trajectories as a demo set.

    スクリプトエキスパートの軌跡 n 本をデモ集合として書き出す。

    Returns:
        Path: The demo set directory.
    """
    spec = get_spec(env)
    if n < 1:
        raise ShapeError(f"--n must be >= 1, got {n}")
    repo_root = find_repo_root()
    out_dir = Path(out) if out else repo_root / "data" / "demos" / spec.name / f"n{n}_s{seed}"

    print(f"[gen-demos] Environment: {spec.name} (horizon {spec.horizon})")
    print(f"[gen-demos] Trajectories: {n}, seed {seed}")
    trajectories = collect_trajectories(spec, lambda s: scripted_expert(spec, s), n, seed)
    manifest = write_demo_set(out_dir, spec, trajectories, seed)
    print(f"[gen-demos] Mean return: {manifest['mean_return']!r}")
    print(f"[gen-demos] Written: {out_dir}")
    return out_dir


def default_run_name(set_name, config):
    name = f"{set_name}_n{config.n_expert}_seed{config.seed}"
    if not config.use_pseudo:
        name += "_nopseudo"
    if not config.use_pedr:
        name += "_nopedr"
    return name


def _prepare_run_dir(run_dir):
    if run_dir.exists():
        if not (run_dir / "config.json").is_file():
            raise FileExistsError(f"{run_dir} exists and is not a run directory; choose another --run-name or --out")
        # Latest run wins, as with the demo sets.
        print(f"[train] Overwriting existing run: {run_dir}")
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True)


def train(demos=None, resume=None, config_path=None, overrides=None, argv=None):
    """
    Resolves the config, creates (or reopens) the run directory and runs training.

    設定を解決し、実行ディレクトリを用意して学習を実行する。
    出力ディレクトリは設定と入力の検証後にのみ作成する。

    Args:
        demos (str or None): Demo set directory for a new run.
        resume (str or None): Run directory to continue.
        config_path (str or None): JSON config file (new runs only).
        overrides (dict): RunConfig field overrides from the CLI (None = not given).
        argv (list): Command line, recorded in run.json.

    Returns:
        Path: The run directory.

    Raises:
        TrainingAbort: If the loop fails (run.json is still written, exit_code 1).
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    repo_root = find_repo_root()

    if resume:
        if config_path:
            raise ConfigError("--config cannot be combined with --resume (the run's config.json is used)")
        extra = sorted(set(overrides) - set(RESUME_FIELDS))
        if extra:
            raise ConfigError(f"only --total-steps and --quiet may change on --resume, got: {', '.join(extra)}")
        run_dir = resolve_run(repo_root, resume)
        config = apply_overrides(load_config_file(run_dir / "config.json"), overrides).validate()
        demos_dir, _, _ = resolve_demos(repo_root, config.demos)
        spec, pairs, manifest = load_demo_set(demos_dir, config.n_expert)
    else:
        demos_dir, _, set_name = resolve_demos(repo_root, demos)
        manifest = load_json(demos_dir / "manifest.json")
        config = resolve_config(config_path, {**overrides, "env": manifest["env"], "demos": str(demos_dir)})
        spec, pairs, manifest = load_demo_set(demos_dir, config.n_expert)
        run_root = output_root(repo_root, config.output_dir or None)
        run_dir = run_root / config.env / (config.run_name or default_run_name(set_name, config))
        _prepare_run_dir(run_dir)
    save_config(run_dir / "config.json", config)

    print(f"[train] Demo set: {demos_dir} ({config.n_expert} of {manifest['num_trajectories']} trajectories)")
    print(f"[train] Run directory: {run_dir}")
    print(f"[train] Steps: {config.total_steps}, seed {config.seed}, "
          f"pseudo {'on' if config.use_pseudo else 'off'}, PEDR {'on' if config.use_pedr else 'off'}")
    print("")

    run_id = generate_run_id()
    started_at = utc_now()
    exit_code = 1
    try:
        _, rows = run_training(config, spec, pairs, run_dir, resume=bool(resume))
        exit_code = 0
    except TrainingAbort:
        print(f"[train] Last snapshot: {run_dir / 'checkpoints'}", file=sys.stderr)
        raise
    finally:
        metadata = create_run_metadata(
            run_id=run_id,
            started_at=started_at,
            finished_at=utc_now(),
            exit_code=exit_code,
            argv=list(argv or []),
            cwd=str(Path.cwd().resolve()),
            demos_dir=demos_dir,
            manifest=manifest,
            config=config,
            run_dir=run_dir,
        )
        write_run_metadata(run_dir, metadata)

    print("")
    if rows:
        print(f"[train] Final mean return: {rows[-1]['mean_true_return']!r} (expert {manifest['mean_return']!r})")
    print(f"[train] run.json written: {run_dir / 'run.json'}")
    print("[train] Done.")
    return run_dir


def evaluate_checkpoint(checkpoint, env=None, episodes=None, seed=None):
    """
    Rolls out a policy checkpoint (deterministic actions) or a scripted-expert descriptor.

    方策チェックポイント、またはスクリプトエキスパート記述子（expert.json）を評価する。
    expert.json の場合は既定でデモ生成時と同じシード・本数を使うため、平均収益は
    manifest.json の mean_return と一致する。

    Returns:
        float: Mean return.
    """
    path = Path(checkpoint)
    if not path.is_file():
        raise FileNotFoundError(f"Checkpoint not found: {path}")

    if path.suffix == ".json":
        descriptor = load_json(path)
        if descriptor.get("record_type") != "scripted_expert":
            raise ConfigError(f"{path}: not a scripted-expert descriptor")
        if env is not None and env != descriptor["env"]:
            raise ConfigError(f"--env {env} does not match the descriptor's env {descriptor['env']}")
        spec = get_spec(descriptor["env"])
        controller = lambda s: scripted_expert(spec, s)
        controller_id = SCRIPTED_CONTROLLER
        episodes = descriptor["episodes"] if episodes is None else episodes
        seed = descriptor["seed"] if seed is None else seed
    else:
        bundle, _ = load_policy(path)
        config_json = path.parent.parent / "config.json"
        if env is None and config_json.is_file():
            env = load_json(config_json)["env"]
        if env is None:
            raise ConfigError(f"--env is required: no config.json next to {path.parent}")
        spec = get_spec(env)
        if bundle.state_dim != spec.state_dim or bundle.action_dim != spec.action_dim:
            raise ShapeError(f"policy dims ({bundle.state_dim}, {bundle.action_dim}) do not match {spec.name}")
        controller = lambda s: act(bundle, s, "deterministic")
        controller_id = "policy"
        episodes = 10 if episodes is None else episodes
        seed = 0 if seed is None else seed

    print(f"[eval] Checkpoint: {path}")
    print(f"[eval] Environment: {spec.name}, episodes {episodes}, seed {seed}")
    trajectories = collect_trajectories(spec, controller, episodes, seed, controller_id)
    value = mean_return([t.episode_return for t in trajectories])
    print(f"Mean return: {value!r}")
    return value


def _load_run(run):
    repo_root = find_repo_root()
    run_dir = resolve_run(repo_root, run)
    config = load_config_file(run_dir / "config.json").validate()
    demos_dir, _, _ = resolve_demos(repo_root, config.demos)
    spec, pairs, manifest = load_demo_set(demos_dir, config.n_expert)
    return run_dir, config, spec, pairs, manifest


def _csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else (str(v) if isinstance(v, (int, str)) else format_real(v)) for v in row))
    return "\n".join(lines) + "\n"


def _maybe_pcc(x, y):
    try:
        return compute_pcc(x, y)
    except (UndefinedStatisticError, ShapeError):
        return None


def run_metrics(run, pca_samples=10000, seed=0):
    """
    Recomputes analysis outputs of a run into <run>/analysis/.

    Writes summary.json, returns_smoothed.csv, pcc_scatter.csv and pca.csv.
    実行結果から PCC・FD・PCA を再計算し analysis/ に書き出す。

    Returns:
        dict: The summary.
    """
    if pca_samples < 1:
        raise ShapeError(f"--pca-samples must be >= 1, got {pca_samples}")
    run_dir, config, spec, pairs, manifest = _load_run(run)
    metrics_log, episodes_log, generation_log = run_logs(run_dir)
    rows = metrics_log.read()
    episodes = episodes_log.read()
    generations = generation_log.read()
    checkpoints = run_dir / "checkpoints"
    disc, _ = load_discriminator(checkpoints / "discriminator.npz")
    policy, _ = load_policy(checkpoints / "policy.npz")
    print(f"[metrics] Run: {run_dir}")
    print(f"[metrics] Evaluations: {len(rows)}, episodes: {len(episodes)}, generation events: {len(generations)}")

    rng = np.random.default_rng(seed)
    expert = np.concatenate(pairs)
    tau = dynamic_threshold(disc, expert, rng)
    candidates = generate_pseudo(disc, pca_samples, rng)
    accepted = filter_pseudo(disc, candidates, tau, rng)
    fd_expert = subsample_rows(expert, config.fd_sample, rng)
    fd_pseudo = fd_or_none(policy, fd_expert, subsample_rows(accepted, config.fd_sample, rng))
    fd_random = fd_or_none(policy, fd_expert, random_policy_pairs(spec, config.fd_sample, rng))

    random_returns = [t.episode_return for t in collect_trajectories(
        spec, random_controller(spec, rng), config.eval_episodes, seed, controller_id="random")]
    random_return = mean_return(random_returns)
    returns = [r["mean_true_return"] for r in rows]
    final = returns[-1] if returns else None
    span = manifest["mean_return"] - random_return
    true_eps = [e["true_return"] for e in episodes]
    surr_eps = [e["surrogate_return"] for e in episodes]
    taus = [g["tau"] for g in generations]

    analysis = run_dir / "analysis"
    analysis.mkdir(exist_ok=True)
    smoothed = moving_average(returns) if returns else []
    write_text_atomic(
        analysis / "returns_smoothed.csv",
        _csv(("step", "mean_true_return", "smoothed"), [(int(r["step"]), r["mean_true_return"], s) for r, s in zip(rows, smoothed)]),
    )
    if episodes:
        true_norm, surr_norm = min_max_normalize(true_eps), min_max_normalize(surr_eps)
    else:
        true_norm, surr_norm = [], []
    write_text_atomic(
        analysis / "pcc_scatter.csv",
        _csv(
            ("step", "episode", "true_return", "surrogate_return", "true_normalized", "surrogate_normalized"),
            [(int(e["step"]), int(e["episode"]), e["true_return"], e["surrogate_return"], tn, sn)
             for e, tn, sn in zip(episodes, true_norm, surr_norm)],
        ),
    )
    pca = export_pca(expert, 2, analysis / "pca.csv", extra={"generated": candidates, "pseudo_expert": accepted})

    summary = {
        "schema_version": 1,
        "record_type": "run_summary",
        "run_dir": str(run_dir),
        "env": config.env,
        "seed": config.seed,
        "n_expert": config.n_expert,
        "use_pseudo": config.use_pseudo,
        "use_pedr": config.use_pedr,
        "num_evaluations": len(rows),
        "final_step": int(rows[-1]["step"]) if rows else 0,
        "final_mean_true_return": final,
        "best_mean_true_return": max(returns) if returns else None,
        "expert_mean_return": manifest["mean_return"],
        "random_mean_return": random_return,
        "normalized_final_return": None if final is None or span == 0 else (final - random_return) / span,
        "pcc_all_episodes": _maybe_pcc(surr_eps, true_eps),
        "pcc_last_evaluation": rows[-1]["pcc"] if rows else None,
        "tau_min": min(taus) if taus else None,
        "tau_max": max(taus) if taus else None,
        "mean_acceptance_rate": sum(g["acceptance_rate"] for g in generations) / len(generations) if generations else None,
        "generated": int(candidates.shape[0]),
        "accepted": int(accepted.shape[0]),
        "tau_full_expert_set": tau,
        "fd_pseudo": fd_pseudo,
        "fd_random": fd_random,
        "pca_explained_variance": pca.explained_variance.tolist(),
    }
    write_json_atomic(analysis / "summary.json", summary)

    print(f"[metrics] Final mean return: {final!r} (expert {manifest['mean_return']!r}, random {random_return!r})")
    print(f"[metrics] PCC over all episodes: {summary['pcc_all_episodes']!r}")
    print(f"[metrics] FD pseudo/random: {fd_pseudo!r} / {fd_random!r}")
    print(f"[metrics] Written: {analysis}")
    return summary


def variant_name(config):
    if config.use_pseudo and config.use_pedr:
        return "full"
    if config.use_pedr:
        return "no_pseudo"
    if config.use_pseudo:
        return "no_pedr"
    return "no_pseudo_no_pedr"


def compare_runs(runs, out=None):
    """
    Writes ablation_summary.csv: final return per run and whether the full method is
    best-or-tied per (env, seed), using two combined standard errors as the noise margin.

    アブレーション比較表を書き出す。

    Returns:
        list of dict: One entry per run.
    """
    repo_root = find_repo_root()
    entries = []
    for run in runs:
        run_dir = resolve_run(repo_root, run)
        config = load_config_file(run_dir / "config.json")
        metrics_log, episodes_log, _ = run_logs(run_dir)
        rows = metrics_log.read()
        if not rows:
            raise UndefinedStatisticError(f"{run_dir}: no evaluations logged")
        final_step = rows[-1]["step"]
        finals = [e["true_return"] for e in episodes_log.read() if e["step"] == final_step]
        stderr = float(np.std(finals, ddof=1) / math.sqrt(len(finals))) if len(finals) > 1 else 0.0
        entries.append({
            "run": run_dir.name,
            "env": config.env,
            "seed": config.seed,
            "variant": variant_name(config),
            "final_step": int(final_step),
            "final_mean_true_return": rows[-1]["mean_true_return"],
            "final_stderr": stderr,
            "full_best_or_tied": None,
        })

    groups = {}
    for entry in entries:
        groups.setdefault((entry["env"], entry["seed"]), []).append(entry)
    wins, judged = 0, 0
    for group in groups.values():
        full = [e for e in group if e["variant"] == "full"]
        others = [e for e in group if e["variant"] != "full"]
        if len(full) != 1 or not others:
            continue
        f = full[0]
        ok = all(
            f["final_mean_true_return"] + 2.0 * math.hypot(f["final_stderr"], o["final_stderr"]) >= o["final_mean_true_return"]
            for o in others
        )
        f["full_best_or_tied"] = int(ok)
        wins += int(ok)
        judged += 1

    out_path = Path(out) if out else output_root(repo_root) / "ablation_summary.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    columns = ("run", "env", "seed", "variant", "final_step", "final_mean_true_return", "final_stderr", "full_best_or_tied")
    write_text_atomic(out_path, _csv(columns, [tuple(e[c] for c in columns) for e in entries]))
    print(f"[metrics] Compared runs: {len(entries)}")
    print(f"[metrics] Full method best-or-tied on {wins} of {judged} seed groups")
    print(f"[metrics] Written: {out_path}")
    return entries


def sample_pseudo(run, n=1000, seed=0, out=None):
    """
    Generates n candidates from a run's discriminator and writes those above tau
    (computed over the full expert set) as CSV columns s0.., a0...

    Returns:
        ndarray: Accepted pairs.
    """
    if n < 1:
        raise ShapeError(f"--n must be >= 1, got {n}")
    run_dir, _, spec, pairs, _ = _load_run(run)
    disc, _ = load_discriminator(run_dir / "checkpoints" / "discriminator.npz")
    rng = np.random.default_rng(seed)
    tau = dynamic_threshold(disc, np.concatenate(pairs), rng)
    candidates = generate_pseudo(disc, n, rng)
    accepted = filter_pseudo(disc, candidates, tau, rng)

    out_path = Path(out) if out else run_dir / "analysis" / "pseudo_samples.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"s{i}" for i in range(spec.state_dim)] + [f"a{i}" for i in range(spec.action_dim)]
    write_text_atomic(out_path, _csv(header, [tuple(float(v) for v in row) for row in accepted]))
    print(f"[sample-pseudo] tau: {tau!r}")
    print(f"[sample-pseudo] Accepted {accepted.shape[0]} of {n}")
    print(f"[sample-pseudo] Written: {out_path}")
    return accepted
