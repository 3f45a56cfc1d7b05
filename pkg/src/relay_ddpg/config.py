"""Experiment configuration and its JSON document form."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .env import SystemConfig

AGENT_KINDS = ("per_ddpg", "ddpg", "dqn", "random")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    agent: str = "per_ddpg"
    lr_critic: float = 0.005
    lr_actor: float = 0.001
    tau: float = 0.001
    gamma: float = 0.99
    buffer_size: int = 10000
    batch_size: int = 128
    alpha: float = 0.6
    kappa: float = 0.4
    priority_eps: float = 0.01
    power_levels: int = 10
    noise_initial: float = 0.3
    noise_decay: float = 0.995
    noise_floor: float = 0.01
    dqn_eps_start: float = 1.0
    dqn_eps_end: float = 0.05
    dqn_eps_episodes: int = 30
    hidden: tuple = (128, 128)
    rms_decay: float = 0.9
    rms_eps: float = 1e-8
    grad_clip: float = 1.0
    episodes: int = 100
    warmup_episodes: int = 10
    trials: int = 10
    base_seed: int = 0
    success_threshold: float = 0.90
    summary_window: int = 40
    eval_thresholds: tuple = (0.05, 0.1, 0.2, 0.3, 0.5)
    eval_episodes: int = 20
    # wall-clock column is zeroed unless enabled so metrics files stay reproducible
    record_wall_time: bool = False
    output: str = "runs"

    def __post_init__(self):
        if self.agent not in AGENT_KINDS:
            raise ConfigError(f"agent: unknown kind {self.agent!r}, expected one of {AGENT_KINDS}")
        if not 0 <= self.warmup_episodes < self.episodes:
            raise ConfigError("warmup_episodes: must satisfy 0 <= warmup_episodes < episodes")
        if not 1 <= self.batch_size <= self.buffer_size:
            raise ConfigError("batch_size: must satisfy 1 <= batch_size <= buffer_size")
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma: must lie in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau: must lie in [0, 1]")
        if self.power_levels < 1:
            raise ConfigError("power_levels: must be >= 1")
        if self.summary_window < 1:
            raise ConfigError("summary_window: must be >= 1")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "eval_thresholds", tuple(float(x) for x in self.eval_thresholds))

    @property
    def uses_priority(self) -> bool:
        return self.agent == "per_ddpg"

    def replace(self, **changes) -> "ExperimentConfig":
        system_changes = {k: changes.pop(k) for k in list(changes) if k in _SYSTEM_FIELDS}
        system = dataclasses.replace(self.system, **system_changes) if system_changes else self.system
        return dataclasses.replace(self, system=system, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        d["eval_thresholds"] = list(self.eval_thresholds)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config document must be a JSON object")
        unknown = set(d) - _TOP_FIELDS
        if unknown:
            raise ConfigError(f"unknown config key: {sorted(unknown)[0]}")
        missing = _TOP_FIELDS - set(d)
        if missing:
            raise ConfigError(f"missing config key: {sorted(missing)[0]}")
        sys_doc = d["system"]
        if not isinstance(sys_doc, dict):
            raise ConfigError("system: must be an object")
        unknown = set(sys_doc) - _SYSTEM_FIELDS
        if unknown:
            raise ConfigError(f"unknown config key: system.{sorted(unknown)[0]}")
        missing = _SYSTEM_FIELDS - set(sys_doc)
        if missing:
            raise ConfigError(f"missing config key: system.{sorted(missing)[0]}")
        try:
            system = SystemConfig(**sys_doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"system: {exc}") from exc
        rest = {k: v for k, v in d.items() if k != "system"}
        return cls(system=system, **rest)


_TOP_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_SYSTEM_FIELDS = {f.name for f in dataclasses.fields(SystemConfig)}


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    return ExperimentConfig.from_dict(doc)


def save_config(config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config.to_json())
