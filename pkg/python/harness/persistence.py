"""
Run-directory persistence: CSV logs, training-state snapshots and run.json.

実行ディレクトリの永続化（CSV ログ、学習状態スナップショット、run.json）。
"""

import os
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from record_io import format_real, write_json_atomic

METRICS_COLUMNS = (
    "step", "mean_true_return", "mean_surrogate_return", "tau", "pseudo_buffer_size",
    "acceptance_rate", "disc_loss", "pcc", "fd_pseudo", "fd_random",
)
EPISODE_COLUMNS = ("step", "episode", "true_return", "surrogate_return")
GENERATION_COLUMNS = ("step", "tau", "generated", "accepted", "acceptance_rate", "pseudo_buffer_size")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format_real(value)


class CsvLog:
    """
    Append-only CSV with a fixed header; undefined values are written as empty cells.

    Args:
        path (Path): Log file.
        columns (tuple of str): Column names; the first one must be "step".
    """

    def __init__(self, path, columns):
        self.path = Path(path)
        self.columns = tuple(columns)

    def create(self):
        with open(self.path, "w", encoding="utf-8", newline="\n") as f:
            f.write(",".join(self.columns) + "\n")

    def append(self, row):
        line = ",".join(_cell(row.get(c)) for c in self.columns)
        with open(self.path, "a", encoding="utf-8", newline="\n") as f:
            f.write(line + "\n")

    def read(self):
        """Returns the rows as dicts of floats (None for empty cells)."""
        if not self.path.is_file():
            raise FileNotFoundError(f"Log not found: {self.path}")
        with open(self.path, "r", encoding="utf-8") as f:
            header = f.readline().strip().split(",")
            rows = []
            for line in f:
                if line.strip():
                    cells = line.rstrip("\n").split(",")
                    rows.append({k: (float(v) if v != "" else None) for k, v in zip(header, cells)})
        return rows

    def truncate_after(self, step):
        """Drops rows whose step exceeds `step` (used when resuming)."""
        if not self.path.is_file():
            self.create()
            return
        with open(self.path, "r", encoding="utf-8") as f:
            lines = f.readlines()
        kept = [lines[0]] + [ln for ln in lines[1:] if ln.strip() and int(float(ln.split(",")[0])) <= step]
        tmp = self.path.with_name(self.path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(kept)
        os.replace(tmp, self.path)


def run_logs(run_dir):
    """Returns the metrics, episode and generation logs of a run directory."""
    run_dir = Path(run_dir)
    return (
        CsvLog(run_dir / "metrics.csv", METRICS_COLUMNS),
        CsvLog(run_dir / "episodes.csv", EPISODE_COLUMNS),
        CsvLog(run_dir / "generation.csv", GENERATION_COLUMNS),
    )


def rng_state(rng):
    return rng.bit_generator.state


def restore_rng(state):
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng


def generate_run_id():
    """
    Generates a run ID based on timestamp (for run.json metadata only).

    タイムスタンプに基づいて実行IDを生成（run.json メタデータ用のみ）。
    """
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H%M%SZ")


def utc_now():
    return datetime.now(timezone.utc).isoformat()


def count_rows(path):
    path = Path(path)
    if not path.is_file():
        return 0
    with open(path, "r", encoding="utf-8") as f:
        return max(sum(1 for line in f if line.strip()) - 1, 0)


def create_run_metadata(run_id, started_at, finished_at, exit_code, argv, cwd, demos_dir, manifest, config, run_dir):
    """
    Creates the run.json metadata structure.

    run.json メタデータ構造を作成する。

    Args:
        run_id (str): Run identifier.
        started_at, finished_at (str): ISO8601 UTC timestamps.
        exit_code (int): 0 on success.
        argv (list): Command-line arguments.
        cwd (str): Working directory at invocation.
        demos_dir (Path): Demo set used.
        manifest (dict): Demo set manifest.
        config (RunConfig): Resolved configuration.
        run_dir (Path): Run directory.

    Returns:
        dict: run.json content.
    """
    run_dir = Path(run_dir)
    return {
        "schema_version": 1,
        "record_type": "run_metadata",
        "run": {
            "run_id": run_id,
            "started_at_utc": started_at,
            "finished_at_utc": finished_at,
            "exit_code": exit_code,
        },
        "command": {"argv": argv, "cwd": cwd},
        "inputs": {
            "demos": {
                "path": str(Path(demos_dir).resolve()),
                "schema_version": manifest.get("schema_version", 1),
                "env": manifest.get("env"),
                "num_trajectories": manifest.get("num_trajectories"),
                "num_used": config.n_expert,
            }
        },
        "options": {
            "seed": config.seed,
            "total_steps": config.total_steps,
            "use_pseudo": config.use_pseudo,
            "use_pedr": config.use_pedr,
            "T": config.T,
        },
        "outputs": {
            "metrics_csv": {"path": str(run_dir / "metrics.csv"), "num_rows": count_rows(run_dir / "metrics.csv")},
            "episodes_csv": {"path": str(run_dir / "episodes.csv"), "num_rows": count_rows(run_dir / "episodes.csv")},
            "generation_csv": {"path": str(run_dir / "generation.csv"), "num_rows": count_rows(run_dir / "generation.csv")},
            "checkpoints": str(run_dir / "checkpoints"),
        },
    }


def write_run_metadata(run_dir, metadata):
    write_json_atomic(Path(run_dir) / "run.json", metadata)

