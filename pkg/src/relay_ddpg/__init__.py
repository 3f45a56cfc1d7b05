"""Relay selection and power allocation in two-hop AF networks with PER-DDPG."""
from .config import ExperimentConfig, load_config, save_config
from .env import ActionCommand, EnvState, RelayEnv, SystemConfig

__version__ = "0.1.0"

__all__ = ["ActionCommand", "EnvState", "ExperimentConfig", "RelayEnv", "SystemConfig",
           "load_config", "save_config"]
