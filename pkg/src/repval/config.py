"""Run configuration: one JSON document, strict keys, flat CLI overrides.

Two presets ship with the package: ``desk`` (20x20, 8 vs 8, 100-step
episodes -- everything here runs on a laptop) and ``paper`` (40x40,
64 vs 64, 400-step episodes, 2000 training rounds).  A preset only
changes defaults; explicit file values and CLI flags always win.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .env import ConfigError, GridConfig

SEED_ENV_VAR = "REPVAL_SEED"


@dataclass
class AlgoConfig:
    variant: str = "RFQ"
    beta: float = 1.0
    gamma: float = 0.95
    lr: float = 1e-3
    actor_lr: float = 0.01
    critic_lr: float = 0.005
    tau: float = 0.01
    buffer_capacity: int = 65536
    batch_size: int = 64
    update_every: int = 4
    embed_dim: int = 16
    leaky_slope: float = 0.2
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    advantage_baseline: bool = False
    paper_sign: bool = False
    backup: str = "boltzmann"


@dataclass
class TrainConfig:
    episodes: int = 500
    checkpoint_interval: int = 100
    seed: int = 0
    scenario: str = "battle"


@dataclass
class TournamentConfig:
    players: list[dict] = field(default_factory=list)
    scenario: str = "battle"
    n_games: int = 500
    seed: int = 0
    k_factor: float = 32.0
    initial_rating: float = 1200.0


@dataclass
class RunConfig:
    env: GridConfig = field(default_factory=GridConfig)
    algo: AlgoConfig = field(default_factory=AlgoConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    tournament: TournamentConfig = field(default_factory=TournamentConfig)
    out_dir: str = "out"
    workers: int = 1


def _merge_section(cls, defaults, data: dict, section: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    if cls is GridConfig:
        allowed.discard("seed")  # the env seed comes from train.seed
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key '{section}.{unknown[0]}'")
    return dataclasses.replace(defaults, **data)


def default_config(preset: str = "desk") -> RunConfig:
    if preset == "desk":
        return RunConfig()
    if preset == "paper":
        return RunConfig(
            env=GridConfig(width=40, height=40, agents_per_team=64, max_steps=400),
            train=TrainConfig(episodes=2000),
        )
    raise ConfigError(f"unknown preset '{preset}' (expected 'desk' or 'paper')")


def load_config(path: str | Path | None) -> RunConfig:
    """Load a JSON config, or the desk defaults when no path is given."""
    if path is None:
        cfg = default_config()
    else:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        known = {"preset", "env", "algo", "train", "tournament", "out_dir", "workers"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key '{unknown[0]}'")
        cfg = default_config(data.get("preset", "desk"))
        cfg.env = _merge_section(GridConfig, cfg.env, data.get("env", {}), "env")
        cfg.algo = _merge_section(AlgoConfig, cfg.algo, data.get("algo", {}), "algo")
        cfg.train = _merge_section(TrainConfig, cfg.train, data.get("train", {}), "train")
        cfg.tournament = _merge_section(
            TournamentConfig, cfg.tournament, data.get("tournament", {}), "tournament")
        cfg.out_dir = data.get("out_dir", cfg.out_dir)
        cfg.workers = data.get("workers", cfg.workers)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}")
        cfg.train.seed = seed
        cfg.tournament.seed = seed
    return cfg


#: (section, field) pairs exposed as flat --field CLI override flags.
OVERRIDE_SECTIONS = {
    "train": (("env", GridConfig, ("seed",)), ("algo", AlgoConfig, ()),
              ("train", TrainConfig, ())),
    "tournament": (("env", GridConfig, ("seed",)),
                   ("tournament", TournamentConfig, ("players",))),
}


def override_fields(command: str):
    """Yield (section, field) for every leaf the command can override."""
    for section, cls, skip in OVERRIDE_SECTIONS[command]:
        for f in dataclasses.fields(cls):
            if f.name not in skip:
                yield section, f


def apply_overrides(cfg: RunConfig, command: str, values: dict) -> RunConfig:
    """Apply parsed CLI values (None means "not given") onto the config."""
    for section, f in override_fields(command):
        val = values.get(f.name)
        if val is None:
            continue
        holder = getattr(cfg, section)
        if section == "env":
            cfg.env = dataclasses.replace(holder, **{f.name: val})
        else:
            setattr(holder, f.name, val)
    if values.get("out") is not None:
        cfg.out_dir = values["out"]
    if values.get("workers") is not None:
        cfg.workers = values["workers"]
    return cfg
