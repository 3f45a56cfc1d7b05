import pytest

from relay_ddpg.config import ExperimentConfig
from relay_ddpg.env import SystemConfig


@pytest.fixture
def tiny_config():
    """Seconds-scale config exercising every code path."""
    return ExperimentConfig(
        system=SystemConfig(t_max=20),
        hidden=(16,),
        buffer_size=200,
        batch_size=16,
        episodes=6,
        warmup_episodes=2,
        trials=2,
        summary_window=4,
        eval_episodes=3,
    )
