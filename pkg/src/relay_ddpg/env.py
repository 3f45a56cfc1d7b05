"""Two-hop amplify-and-forward relay network with Gauss-Markov block fading.

Beamforming at source (MRT) and destination (MRC) reduces each hop to its
squared channel norm, so the simulator works at SNR level: no symbols or
per-sample noise are drawn.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SystemConfig:
    n_relays: int = 4
    source_antennas: int = 2
    dest_antennas: int = 2
    var_first_hop: float = 1.0
    var_second_hop: float = 1.0
    noise_var: float = 1.0
    rho: float = 0.95
    max_power: float = 1.0
    outage_threshold: float = 0.1
    t_max: int = 200
    # "gain": 2K squared norms; "raw": real/imag parts of every coefficient
    observation: str = "gain"

    def __post_init__(self):
        for name in ("n_relays", "source_antennas", "dest_antennas", "t_max"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("noise_var", "max_power", "outage_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        # zero hop variance is allowed as a degenerate limit
        for name in ("var_first_hop", "var_second_hop"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.observation not in ("gain", "raw"):
            raise ValueError(f"unknown observation mode {self.observation!r}")

    @property
    def feature_size(self) -> int:
        if self.observation == "gain":
            return 2 * self.n_relays
        return 2 * self.n_relays * (self.source_antennas + self.dest_antennas)


@dataclass
class EnvState:
    """Channel snapshot of the previous slot: ``first_hop`` is (K, N_S), ``second_hop`` (K, N_D)."""

    first_hop: np.ndarray
    second_hop: np.ndarray
    slot_index: int = 0


@dataclass(frozen=True)
class ActionCommand:
    relay: int  # 1-based
    source_power: float
    max_power: float = 1.0

    @property
    def relay_power(self) -> float:
        return self.max_power - self.source_power


@dataclass
class StepOutcome:
    reward: int
    next_state: EnvState
    mutual_information: float
    snr: float
    done: bool
    info: dict = field(default_factory=dict)


def complex_gaussian(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    """Circularly-symmetric CN(0, var): real and imaginary parts each carry var/2."""
    parts = rng.standard_normal(tuple(shape) + (2,))
    return np.sqrt(var / 2.0) * (parts[..., 0] + 1j * parts[..., 1])


def sample_initial_channels(config: SystemConfig, rng: np.random.Generator) -> EnvState:
    k = config.n_relays
    first = complex_gaussian(rng, (k, config.source_antennas), config.var_first_hop)
    second = complex_gaussian(rng, (k, config.dest_antennas), config.var_second_hop)
    return EnvState(first, second, 0)


def evolve_channels(state: EnvState, config: SystemConfig, rng: np.random.Generator) -> EnvState:
    """One AR(1) step, h <- rho*h + sqrt(1-rho^2)*e with e drawn at the hop's variance."""
    rho = config.rho
    scale = np.sqrt(1.0 - rho * rho)
    e1 = complex_gaussian(rng, state.first_hop.shape, config.var_first_hop)
    e2 = complex_gaussian(rng, state.second_hop.shape, config.var_second_hop)
    return EnvState(
        rho * state.first_hop + scale * e1,
        rho * state.second_hop + scale * e2,
        state.slot_index + 1,
    )


def channel_gain(v) -> float:
    v = np.asarray(v)
    return float(np.sum(v.real ** 2 + v.imag ** 2))


def channel_gains(h: np.ndarray) -> np.ndarray:
    """Row-wise squared norms of a (K, N) coefficient array."""
    return np.sum(h.real ** 2 + h.imag ** 2, axis=-1)


def end_to_end_snr(p_source, p_relay, g_sk, g_kd, noise_var):
    """AF end-to-end SNR phi_sk*phi_kd / (phi_sk + phi_kd + 1); broadcasts over arrays."""
    phi_sk = np.multiply(p_source, g_sk) / noise_var
    phi_kd = np.multiply(p_relay, g_kd) / noise_var
    return phi_sk * phi_kd / (phi_sk + phi_kd + 1.0)


def mutual_information(snr):
    return 0.5 * np.log2(1.0 + np.asarray(snr, dtype=float))


def outage_indicator(mi, threshold: float) -> int:
    return int(mi < threshold)


def observe(state: EnvState, mode: str = "gain") -> np.ndarray:
    if mode == "gain":
        return np.concatenate([channel_gains(state.first_hop), channel_gains(state.second_hop)])
    if mode == "raw":
        h = np.concatenate([state.first_hop.ravel(), state.second_hop.ravel()])
        return np.concatenate([h.real, h.imag])
    raise ValueError(f"unknown observation mode {mode!r}")


def validate_action(action: ActionCommand, config: SystemConfig) -> None:
    if not 1 <= action.relay <= config.n_relays:
        raise ValueError(f"relay index {action.relay} outside 1..{config.n_relays}")
    if not 0.0 <= action.source_power <= config.max_power:
        raise ValueError(f"source power {action.source_power} outside [0, {config.max_power}]")


def step(state: EnvState, action: ActionCommand, config: SystemConfig,
         rng: np.random.Generator) -> StepOutcome:
    """Advance one slot and score ``action`` on the new slot's channels.

    The agent decided from ``state`` (previous-slot CSI); the returned
    ``next_state`` holds the channels it was scored on.
    """
    validate_action(action, config)
    current = evolve_channels(state, config, rng)
    k = action.relay - 1
    p_s = action.source_power
    p_r = config.max_power - p_s
    snr = float(end_to_end_snr(p_s, p_r, channel_gain(current.first_hop[k]),
                               channel_gain(current.second_hop[k]), config.noise_var))
    mi = float(mutual_information(snr))
    reward = 1 - outage_indicator(mi, config.outage_threshold)
    return StepOutcome(reward, current, mi, snr, current.slot_index >= config.t_max)


class RelayEnv:
    """Episode wrapper around the functional step, owning its RNG stream."""

    def __init__(self, config: SystemConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.state: EnvState | None = None

    def reset(self) -> np.ndarray:
        self.state = sample_initial_channels(self.config, self.rng)
        return self.observe()

    def observe(self) -> np.ndarray:
        return observe(self.state, self.config.observation)

    def step(self, action: ActionCommand) -> StepOutcome:
        if self.state is None:
            raise RuntimeError("reset() must be called before step()")
        out = step(self.state, action, self.config, self.rng)
        self.state = out.next_state
        return out
