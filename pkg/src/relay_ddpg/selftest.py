"""Quick numerical self-checks exposed through ``relay-ddpg selftest``."""
from __future__ import annotations

import itertools

import numpy as np

from .env import SystemConfig, evolve_channels, sample_initial_channels
from .nn import ACTIVATIONS, LayerSpec, Mlp
from .replay import PrioritizedBuffer


def finite_difference_error(net: Mlp, x: np.ndarray, upstream: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between backprop and central differences of sum(out * upstream)."""
    out, cache = net.forward(x)
    grads = net.backward(cache, upstream)
    worst = 0.0

    def objective():
        return float(np.sum(net(x) * upstream))

    def compare(analytic, numeric):
        return abs(analytic - numeric) / max(1e-7, abs(analytic) + abs(numeric))

    for p, g in zip(net.parameters(), grads.arrays()):
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + h
            fp = objective()
            p[i] = old - h
            fm = objective()
            p[i] = old
            worst = max(worst, compare(g[i], (fp - fm) / (2 * h)))
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        fp = objective()
        x[i] = old - h
        fm = objective()
        x[i] = old
        worst = max(worst, compare(grads.inputs[i], (fp - fm) / (2 * h)))
    return worst


def gradient_check(n_configs: int = 24, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    combos = itertools.cycle(itertools.product((1, 2, 3), ACTIVATIONS))
    worst = 0.0
    for _ in range(n_configs):
        depth, act = next(combos)
        sizes = [int(rng.integers(1, 6)) for _ in range(depth + 1)]
        specs = [LayerSpec(sizes[i], sizes[i + 1], act) for i in range(depth)]
        net = Mlp.init(specs, rng)
        for b in net.biases:
            b += rng.normal(0, 0.5, b.shape)
        x = rng.normal(size=(3, sizes[0]))
        upstream = rng.normal(size=(3, sizes[-1]))
        worst = max(worst, finite_difference_error(net, x, upstream))
    return worst


def sum_tree_check(ops: int = 10_000, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    buf = PrioritizedBuffer(257, 2, 1, alpha=0.6)
    for _ in range(ops):
        if len(buf) < 8 or rng.random() < 0.5:
            buf.push(rng.random(2), [0.0], 1, rng.random(2))
        else:
            idx = rng.integers(0, len(buf), size=4)
            buf.update_priorities(idx, rng.normal(0, 3, size=4))
    return buf.tree.check() and np.isclose(buf.tree.total, buf.tree.leaves().sum(), rtol=1e-9)


def stationarity_check(rho: float = 0.95, steps: int = 20_000, seed: int = 0) -> float:
    """Relative deviation of the empirical per-coefficient variance from the hop variance."""
    cfg = SystemConfig(rho=rho)
    rng = np.random.default_rng(seed)
    state = sample_initial_channels(cfg, rng)
    acc = np.zeros_like(state.first_hop.real)
    for _ in range(steps):
        state = evolve_channels(state, cfg, rng)
        acc += np.abs(state.first_hop) ** 2
    return float(abs(acc.mean() / steps - cfg.var_first_hop) / cfg.var_first_hop)


def run_all(verbose: bool = False) -> bool:
    results = []
    err = gradient_check()
    results.append(("gradient check (max rel err <= 1e-4)", err <= 1e-4, f"{err:.2e}"))
    ok = sum_tree_check()
    results.append(("sum-tree invariant", ok, ""))
    dev = stationarity_check()
    results.append(("AR(1) stationarity (|dev| <= 2%)", dev <= 0.02, f"{dev:.3%}"))
    if verbose:
        for name, passed, detail in results:
            print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
    return all(p for _, p, _ in results)
