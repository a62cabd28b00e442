"""
Run configuration.

実行設定。優先順位: 既定値 < --config の JSON < 環境変数 < CLI フラグ。
"""

import os
from dataclasses import asdict, dataclass, field, fields

from ail_errors import ConfigError
from envs import ENV_SPECS
from record_io import load_json, write_json_atomic

SEED_ENV = "DIFFIMIT_SEED"
CONFIG_SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    """
    Every tunable of a training run. Field ranges are checked by validate().
    """

    env: str = "pointmass2d"
    demos: str = ""
    n_expert: int = 1
    seed: int = 0
    output_dir: str = ""
    run_name: str = ""

    # Diffusion discriminator
    T: int = 10
    beta_start: float = 0.05
    beta_end: float = 0.45
    eps_hidden: list = field(default_factory=lambda: [64, 64])
    embed_dim: int = 8
    eps_activation: str = "tanh"
    disc_lr: float = 3e-4
    clamp_delta: float = 1e-6
    noise_draws: int = 1
    tau_full_dataset: bool = False

    # Replay
    pseudo_ratio: int = 7
    k_expert: int = 64
    disc_agent_batch: int = 128
    zeta: float = 0.6
    eta_start: float = 0.4
    pseudo_capacity: int = 50000
    agent_capacity: int = 200000
    use_pseudo: bool = True
    use_pedr: bool = True

    # SAC
    sac_hidden: list = field(default_factory=lambda: [64, 64])
    sac_activation: str = "relu"
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    alpha_lr: float = 3e-4
    gamma: float = 0.99
    target_update_rate: float = 0.005
    init_alpha: float = 0.2
    sac_batch: int = 256

    # Cadence
    total_steps: int = 150000
    warmup_steps: int = 1000
    disc_every: int = 1
    policy_every: int = 1
    gen_every: int = 1000
    gen_count: int = 256
    eval_every: int = 5000
    eval_episodes: int = 10
    fd_sample: int = 1000
    progress: bool = True

    def validate(self):
        """
        Checks every field against its documented range.

        Raises:
            ConfigError: On the first invalid field.
        """
        def need(cond, message):
            if not cond:
                raise ConfigError(f"invalid config: {message}")

        need(self.env in ENV_SPECS, f"env must be one of {sorted(ENV_SPECS)}, got '{self.env}'")
        need(self.n_expert >= 1, "n_expert must be >= 1")
        need(self.seed >= 0, "seed must be >= 0")
        need(self.T >= 1, "T must be >= 1")
        need(0.0 < self.beta_start <= self.beta_end < 1.0, "need 0 < beta_start <= beta_end < 1")
        need(len(self.eps_hidden) >= 1 and all(h >= 1 for h in self.eps_hidden), "eps_hidden needs positive widths")
        need(len(self.sac_hidden) >= 1 and all(h >= 1 for h in self.sac_hidden), "sac_hidden needs positive widths")
        need(self.embed_dim >= 1, "embed_dim must be >= 1")
        need(self.eps_activation in ("tanh", "relu") and self.sac_activation in ("tanh", "relu"),
             "activations must be 'tanh' or 'relu'")
        need(0.0 < self.clamp_delta < 0.5, "clamp_delta must lie in (0, 0.5)")
        need(self.noise_draws >= 1, "noise_draws must be >= 1")
        need(self.pseudo_ratio >= 0, "pseudo_ratio must be >= 0")
        need(self.k_expert >= self.n_expert, "k_expert must be >= n_expert (one draw per expert buffer)")
        need(self.disc_agent_batch >= 1 and self.sac_batch >= 1, "batch sizes must be >= 1")
        need(self.zeta >= 0.0, "zeta must be >= 0")
        need(0.0 < self.eta_start <= 1.0, "eta_start must lie in (0, 1]")
        need(self.pseudo_capacity >= 1 and self.agent_capacity >= 1, "capacities must be >= 1")
        for name in ("disc_lr", "actor_lr", "critic_lr", "alpha_lr", "init_alpha"):
            need(getattr(self, name) > 0.0, f"{name} must be > 0")
        need(0.0 <= self.gamma < 1.0, "gamma must lie in [0, 1)")
        need(0.0 < self.target_update_rate <= 1.0, "target_update_rate must lie in (0, 1]")
        need(self.total_steps >= 0 and self.warmup_steps >= 0, "step counts must be >= 0")
        for name in ("disc_every", "policy_every", "gen_every", "eval_every", "eval_episodes", "gen_count"):
            need(getattr(self, name) >= 1, f"{name} must be >= 1")
        need(self.fd_sample >= 2, "fd_sample must be >= 2")
        return self

    def to_dict(self):
        return {"schema_version": CONFIG_SCHEMA_VERSION, **asdict(self)}


def _coerce(name, value):
    known = {f.name: f for f in fields(RunConfig)}
    if name not in known:
        raise ConfigError(f"unknown config field '{name}'")
    default = getattr(RunConfig(), name)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"config field '{name}' must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or int(value) != value:
            raise ConfigError(f"config field '{name}' must be an integer")
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, list):
        return [int(v) for v in value]
    return str(value)


def apply_overrides(config, overrides):
    """Returns a new RunConfig with the non-None overrides applied."""
    values = asdict(config)
    for name, value in overrides.items():
        if value is not None:
            values[name] = _coerce(name, value)
    return RunConfig(**values)


def load_config_file(path):
    """
    Reads a JSON config holding any subset of RunConfig fields.

    Raises:
        FileNotFoundError: If the file is missing.
        ConfigError: On unknown fields or wrong types.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Config file not found: {path}")
    data = load_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    data.pop("schema_version", None)
    return apply_overrides(RunConfig(), data)


def resolve_config(config_path=None, cli_overrides=None, environ=None):
    """
    Builds the effective RunConfig.

    Precedence: defaults < config file < DIFFIMIT_OUTPUT_DIR / DIFFIMIT_SEED < CLI flags.

    Returns:
        RunConfig: Validated configuration.
    """
    environ = os.environ if environ is None else environ
    config = load_config_file(config_path) if config_path else RunConfig()
    env_overrides = {}
    if environ.get(SEED_ENV):
        try:
            env_overrides["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got '{environ[SEED_ENV]}'") from None
    if environ.get("DIFFIMIT_OUTPUT_DIR"):
        env_overrides["output_dir"] = environ["DIFFIMIT_OUTPUT_DIR"]
    config = apply_overrides(config, env_overrides)
    config = apply_overrides(config, cli_overrides or {})
    return config.validate()


def save_config(path, config):
    write_json_atomic(path, config.to_dict())
