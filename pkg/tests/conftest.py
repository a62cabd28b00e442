import json

import pytest

from envs import collect_trajectories, get_spec, scripted_expert, write_demo_set
from harness.config import RunConfig, apply_overrides

# Small networks and batches so a whole run finishes in seconds.
TINY_RUN = {
    "env": "doubleintegrator1d",
    "total_steps": 60,
    "warmup_steps": 10,
    "eps_hidden": [8],
    "embed_dim": 4,
    "sac_hidden": [8],
    "k_expert": 4,
    "pseudo_ratio": 1,
    "disc_agent_batch": 8,
    "sac_batch": 8,
    "gen_every": 10,
    "gen_count": 16,
    "eval_every": 20,
    "eval_episodes": 2,
    "fd_sample": 16,
    "progress": False,
}


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv("DIFFIMIT_SEED", raising=False)
    monkeypatch.delenv("DIFFIMIT_OUTPUT_DIR", raising=False)


@pytest.fixture
def tiny_config():
    return apply_overrides(RunConfig(), TINY_RUN).validate()


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({k: v for k, v in TINY_RUN.items() if k != "env"}))
    return path


@pytest.fixture
def demo_set(tmp_path):
    spec = get_spec("doubleintegrator1d")
    trajectories = collect_trajectories(spec, lambda s: scripted_expert(spec, s), 3, 0)
    out = tmp_path / "demos" / spec.name / "n3_s0"
    write_demo_set(out, spec, trajectories, 0)
    return out
