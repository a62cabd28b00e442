"""
Shared path resolution logic.

Provides find_repo_root(), resolve_demos() and resolve_run() used by all CLI modules.
全 CLI モジュール共通のリポジトリルート探索と --demos / --run 引数解決ロジック。
"""

import os
from pathlib import Path

OUTPUT_DIR_ENV = "DIFFIMIT_OUTPUT_DIR"


def find_repo_root():
    """
    Finds the repository root by searching upward for '.git' or 'requirements.txt'.

    .git または requirements.txt を上方向に探索してリポジトリルートを見つける。

    Returns:
        Path: Absolute path to the repository root.

    Raises:
        RuntimeError: If the repository root cannot be found.
    """
    current = Path(__file__).resolve().parent
    while current != current.parent:
        if (current / ".git").exists() or (current / "requirements.txt").is_file():
            return current
        current = current.parent

    raise RuntimeError("Could not find repository root (.git or requirements.txt)")


def _resolve_dir(repo_root, path_arg):
    path = Path(path_arg)
    # Resolve: try as-is (absolute or relative to cwd), then relative to repo_root
    if path.is_dir():
        return path.resolve()
    if (repo_root / path).is_dir():
        return (repo_root / path).resolve()
    return None


def output_root(repo_root, override=None):
    """
    Returns the root directory for run outputs.

    実行結果の出力ルート。優先順位: 引数 > 環境変数 DIFFIMIT_OUTPUT_DIR > output/runs。

    Args:
        repo_root (Path): Repository root path.
        override (str or None): Explicit output root (e.g. from --out).

    Returns:
        Path: Output root (not created here).
    """
    env_value = os.environ.get(OUTPUT_DIR_ENV)
    if override:
        return Path(override).resolve()
    if env_value:
        return Path(env_value).resolve()
    return repo_root / "output" / "runs"


def resolve_demos(repo_root, demos_id):
    """
    Resolve a --demos directory path to the demo directory and env/set names.

    --demos はデモ集合ディレクトリへのパスを直接受け取る。
    相対パスは cwd → repo_root の順に解決を試みる。

    Args:
        repo_root (Path): Repository root path.
        demos_id (str): Path to a demo set directory
                        (e.g. "data/demos/pointmass2d/n16_s0").

    Returns:
        tuple: (demos_dir, env_name, set_name)

    Raises:
        FileNotFoundError: If the directory or its manifest.json does not exist.
    """
    demos_dir = _resolve_dir(repo_root, demos_id)
    if demos_dir is None:
        raise FileNotFoundError(
            f"Demo directory not found: {demos_id}\n"
            f"Provide a valid path to a demo set directory "
            f"(e.g. data/demos/pointmass2d/n16_s0)\n"
            f"Create one with: python -m harness gen-demos --env pointmass2d --n 16 --seed 0"
        )
    if not (demos_dir / "manifest.json").is_file():
        raise FileNotFoundError(f"manifest.json not found in demo directory: {demos_dir}")

    return demos_dir, demos_dir.parent.name, demos_dir.name


def resolve_run(repo_root, run_id):
    """
    Resolve a --run directory path to an existing run directory.

    Args:
        repo_root (Path): Repository root path.
        run_id (str): Path to a run directory (e.g. "output/runs/pointmass2d/n16_s0_seed0").

    Returns:
        Path: Absolute run directory.

    Raises:
        FileNotFoundError: If the directory or its config.json does not exist.
    """
    run_dir = _resolve_dir(repo_root, run_id)
    if run_dir is None:
        raise FileNotFoundError(
            f"Run directory not found: {run_id}\n"
            f"Train first: python -m harness train --demos data/demos/<env>/<set>"
        )
    if not (run_dir / "config.json").is_file():
        raise FileNotFoundError(f"config.json not found in run directory: {run_dir}")
    return run_dir
