import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relay_ddpg.env import (ActionCommand, EnvState, RelayEnv, SystemConfig, channel_gain,
                            end_to_end_snr, evolve_channels, mutual_information, observe,
                            outage_indicator, sample_initial_channels, step)

nonneg = st.floats(min_value=0.0, max_value=1e3, allow_nan=False)


def test_initial_channel_shapes():
    cfg = SystemConfig(n_relays=4, source_antennas=2, dest_antennas=3)
    s = sample_initial_channels(cfg, np.random.default_rng(0))
    assert s.first_hop.shape == (4, 2)
    assert s.second_hop.shape == (4, 3)
    assert s.slot_index == 0


def test_zero_variance_gives_zero_channels():
    cfg = SystemConfig(var_first_hop=0.0)
    s = sample_initial_channels(cfg, np.random.default_rng(1))
    assert np.all(s.first_hop == 0)
    assert np.any(s.second_hop != 0)


def test_complex_variance_split_evenly():
    cfg = SystemConfig(n_relays=1, source_antennas=1, dest_antennas=1)
    rng = np.random.default_rng(2)
    draws = np.array([sample_initial_channels(cfg, rng).first_hop[0, 0] for _ in range(100_000)])
    assert np.var(draws.real) == pytest.approx(0.5, rel=0.02)
    assert np.var(draws.imag) == pytest.approx(0.5, rel=0.02)


def test_rho_one_is_identity():
    cfg = SystemConfig(rho=1.0)
    rng = np.random.default_rng(3)
    s = sample_initial_channels(cfg, rng)
    s2 = evolve_channels(s, cfg, rng)
    assert np.array_equal(s.first_hop, s2.first_hop)
    assert np.array_equal(s.second_hop, s2.second_hop)
    assert s2.slot_index == 1


def test_rho_zero_forgets_the_past():
    cfg = SystemConfig(rho=0.0, n_relays=1, source_antennas=1, dest_antennas=1)
    rng = np.random.default_rng(4)
    prev, nxt = [], []
    for _ in range(20_000):
        s = sample_initial_channels(cfg, rng)
        prev.append(s.first_hop[0, 0])
        nxt.append(evolve_channels(s, cfg, rng).first_hop[0, 0])
    prev, nxt = np.array(prev), np.array(nxt)
    corr = np.abs(np.mean(prev * np.conj(nxt)))
    assert corr < 0.03  # ~4 standard errors of 1/sqrt(2e4)


def test_lag_one_correlation_matches_rho():
    cfg = SystemConfig(rho=0.7, n_relays=1, source_antennas=1, dest_antennas=1)
    rng = np.random.default_rng(5)
    prev, nxt = [], []
    for _ in range(20_000):
        s = sample_initial_channels(cfg, rng)
        prev.append(s.first_hop[0, 0])
        nxt.append(evolve_channels(s, cfg, rng).first_hop[0, 0])
    corr = np.mean(np.array(nxt) * np.conj(prev)).real
    assert corr == pytest.approx(0.7, abs=0.03)


@pytest.mark.parametrize("coeffs, expected", [
    ([0, 0], 0.0),
    ([3 + 4j], 25.0),
    ([1, 1j], 2.0),
])
def test_channel_gain(coeffs, expected):
    assert channel_gain(np.array(coeffs, dtype=complex)) == expected


def test_snr_closed_form():
    assert end_to_end_snr(0.0, 1.0, 5.0, 5.0, 1.0) == 0.0
    assert end_to_end_snr(1.0, 1.0, 1.0, 1.0, 1.0) == pytest.approx(1 / 3, abs=1e-12)
    assert end_to_end_snr(2.0, 2.0, 1.0, 1.0, 1.0) == pytest.approx(0.8, abs=1e-12)


@given(nonneg, nonneg, nonneg, nonneg, st.floats(min_value=1e-3, max_value=10))
def test_snr_bounded_by_weaker_hop(ps, pr, gs, gd, n0):
    snr = end_to_end_snr(ps, pr, gs, gd, n0)
    assert 0.0 <= snr <= min(ps * gs / n0, pr * gd / n0) * (1 + 1e-12)


def test_mutual_information_values():
    assert mutual_information(0.0) == 0.0
    assert mutual_information(1.0) == pytest.approx(0.5, abs=1e-12)
    assert mutual_information(3.0) == pytest.approx(1.0, abs=1e-12)


@given(nonneg, nonneg)
def test_mutual_information_monotone(a, b):
    lo, hi = sorted((a, b))
    assert mutual_information(lo) <= mutual_information(hi)


def test_outage_indicator_strict():
    assert outage_indicator(0.5, 0.1) == 0
    assert outage_indicator(0.05, 0.1) == 1
    assert outage_indicator(0.1, 0.1) == 0


def _fixed_state(gs, gd):
    # one antenna per node, real coefficients with the requested gains
    first = np.sqrt(np.array(gs, dtype=float))[:, None].astype(complex)
    second = np.sqrt(np.array(gd, dtype=float))[:, None].astype(complex)
    return EnvState(first, second, 0)


def test_step_zero_source_power_is_outage():
    cfg = SystemConfig(n_relays=2, source_antennas=1, dest_antennas=1)
    out = step(_fixed_state([3, 3], [3, 3]), ActionCommand(1, 0.0), cfg, np.random.default_rng(0))
    assert out.mutual_information == 0.0
    assert out.reward == 0


def test_step_hand_evaluated_chain():
    # rho=1 freezes channels; P_s = P_r = 0.5 and gains 6 give phi_sk = phi_kd = 3
    cfg = SystemConfig(n_relays=2, source_antennas=1, dest_antennas=1, rho=1.0)
    out = step(_fixed_state([1, 6], [1, 6]), ActionCommand(2, 0.5), cfg, np.random.default_rng(0))
    assert out.snr == pytest.approx(9 / 7, abs=1e-12)
    assert out.mutual_information == pytest.approx(0.5963225389711979, abs=1e-12)
    assert out.reward == 1


def test_step_rejects_bad_relay_and_power():
    cfg = SystemConfig(n_relays=2)
    s = sample_initial_channels(cfg, np.random.default_rng(0))
    with pytest.raises(ValueError):
        step(s, ActionCommand(0, 0.5), cfg, np.random.default_rng(0))
    with pytest.raises(ValueError):
        step(s, ActionCommand(3, 0.5), cfg, np.random.default_rng(0))
    with pytest.raises(ValueError):
        step(s, ActionCommand(1, 1.5), cfg, np.random.default_rng(0))


def test_episode_length_and_done_flag():
    cfg = SystemConfig(t_max=17)
    env = RelayEnv(cfg, np.random.default_rng(0))
    env.reset()
    outs = [env.step(ActionCommand(1, 0.5)) for _ in range(cfg.t_max)]
    assert [o.done for o in outs] == [False] * 16 + [True]
    assert all(o.reward in (0, 1) for o in outs)


def test_reward_monotone_in_source_power_with_fixed_relay_hop():
    # with phi_kd fixed, SNR and hence success grow with P_s
    g = 1.0
    snrs = [end_to_end_snr(p, 0.5, g, g, 1.0) for p in np.linspace(0, 1, 21)]
    assert all(a <= b for a, b in zip(snrs, snrs[1:]))


def test_observe_gains():
    s = EnvState(np.array([[np.sqrt(2)], [np.sqrt(0.5)]], dtype=complex),
                 np.array([[1.0], [2.0j]]), 0)
    np.testing.assert_allclose(observe(s), [2, 0.5, 1, 4], rtol=1e-15)
    assert np.array_equal(observe(s), observe(s))
    zero = EnvState(np.zeros((3, 2), complex), np.zeros((3, 2), complex), 0)
    assert np.array_equal(observe(zero), np.zeros(6))


def test_observe_raw_mode_length():
    cfg = SystemConfig(observation="raw")
    s = sample_initial_channels(cfg, np.random.default_rng(0))
    assert observe(s, "raw").shape == (cfg.feature_size,) == (32,)


def test_trajectory_is_deterministic():
    def run(seed):
        env = RelayEnv(SystemConfig(t_max=50), np.random.default_rng(seed))
        env.reset()
        return [(o.reward, o.mutual_information) for o in
                (env.step(ActionCommand(1 + i % 4, 0.3)) for i in range(50))]
    assert run(7) == run(7)


def test_config_validation():
    with pytest.raises(ValueError):
        SystemConfig(n_relays=0)
    with pytest.raises(ValueError):
        SystemConfig(rho=1.5)
    with pytest.raises(ValueError):
        SystemConfig(outage_threshold=0.0)
    with pytest.raises(ValueError):
        SystemConfig(noise_var=0.0)
    assert math.isclose(ActionCommand(1, 0.25, 1.0).relay_power, 0.75)
