"""Small fully-connected networks in plain numpy.

Forward and reverse passes operate on batches (rows are samples); a 1-D input
is treated as a batch of one and the output squeezed back.  Weight matrices are
stored as ``(out, in)`` so a layer computes ``W x + b``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")


class NonFiniteError(FloatingPointError):
    """Raised when a gradient or loss contains NaN/inf."""


@dataclass(frozen=True)
class LayerSpec:
    input_size: int
    output_size: int
    activation: str = "relu"

    def __post_init__(self):
        if self.input_size < 1 or self.output_size < 1:
            raise ValueError(f"layer sizes must be >= 1, got {self.input_size}->{self.output_size}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def dense_specs(sizes: Sequence[int], hidden="relu", output="identity") -> list[LayerSpec]:
    """Chain ``sizes`` into layer specs, e.g. ``(8, 128, 128, 1)``."""
    n = len(sizes) - 1
    return [
        LayerSpec(sizes[i], sizes[i + 1], output if i == n - 1 else hidden)
        for i in range(n)
    ]


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return sigmoid(z)
    return z


def _activate_grad(name, z, a):
    # derivative wrt pre-activation, expressed through z or a
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


def sigmoid(z):
    # split by sign to avoid overflow in exp
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray | None = None

    def arrays(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.arrays())))

    def scale(self, factor: float) -> None:
        for g in self.arrays():
            g *= factor

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.arrays())


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    post: list[np.ndarray]
    squeeze: bool
    consumed: bool = False


class Mlp:
    def __init__(self, specs: Sequence[LayerSpec], weights, biases):
        self.specs = list(specs)
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            if w.shape != (spec.output_size, spec.input_size) or b.shape != (spec.output_size,):
                raise ValueError(f"parameter shapes {w.shape}/{b.shape} do not match {spec}")

    @classmethod
    def init(cls, specs: Sequence[LayerSpec], rng: np.random.Generator) -> "Mlp":
        """Uniform(+-1/sqrt(fan_in)) weights, zero biases."""
        specs = list(specs)
        if not specs:
            raise ValueError("need at least one layer")
        for a, b in zip(specs[:-1], specs[1:]):
            if a.output_size != b.input_size:
                raise ValueError(f"layer sizes do not chain: {a.output_size} -> {b.input_size}")
        weights, biases = [], []
        for s in specs:
            bound = 1.0 / np.sqrt(s.input_size)
            weights.append(rng.uniform(-bound, bound, size=(s.output_size, s.input_size)))
            biases.append(np.zeros(s.output_size))
        return cls(specs, weights, biases)

    @property
    def input_size(self) -> int:
        return self.specs[0].input_size

    @property
    def output_size(self) -> int:
        return self.specs[-1].output_size

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def copy(self) -> "Mlp":
        return Mlp(self.specs, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zero_gradients(self) -> Gradients:
        return Gradients([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def forward(self, x) -> tuple[np.ndarray, ForwardCache]:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        h = x[None, :] if squeeze else x
        if h.shape[1] != self.input_size:
            raise ValueError(f"expected input of length {self.input_size}, got {h.shape[1]}")
        cache = ForwardCache([], [], [], squeeze)
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            cache.inputs.append(h)
            z = h @ w.T + b
            h = _activate(spec.activation, z)
            cache.pre.append(z)
            cache.post.append(h)
        return (h[0] if squeeze else h), cache

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: ForwardCache, output_gradient) -> Gradients:
        """Reverse pass for the contraction ``sum(output * output_gradient)``.

        Parameter gradients are summed over the batch; ``inputs`` holds the
        per-sample input gradient.
        """
        if cache.consumed:
            raise RuntimeError("forward cache already used for a backward pass")
        cache.consumed = True
        g = np.asarray(output_gradient, dtype=float)
        if cache.squeeze:
            g = g[None, :]
        if g.shape != cache.post[-1].shape:
            raise ValueError(f"output gradient shape {g.shape} != output shape {cache.post[-1].shape}")
        n = len(self.specs)
        gw: list = [None] * n
        gb: list = [None] * n
        for i in reversed(range(n)):
            dz = g * _activate_grad(self.specs[i].activation, cache.pre[i], cache.post[i])
            gw[i] = dz.T @ cache.inputs[i]
            gb[i] = dz.sum(axis=0)
            g = dz @ self.weights[i]
        return Gradients(gw, gb, g[0] if cache.squeeze else g)


def clip_by_global_norm(grads: Gradients, max_norm: float) -> float:
    """Rescale in place so the global norm is at most ``max_norm``; returns the pre-clip norm."""
    norm = grads.global_norm()
    if max_norm > 0 and norm > max_norm:
        grads.scale(max_norm / norm)
    return norm


@dataclass
class RmsProp:
    learning_rate: float
    decay: float = 0.9
    eps: float = 1e-8
    slots: list[np.ndarray] = field(default_factory=list)

    def step(self, net: Mlp, grads: Gradients) -> None:
        if not grads.all_finite():
            raise NonFiniteError("non-finite gradient; RMSProp step rejected")
        params = list(net.parameters())
        gs = list(grads.arrays())
        if not self.slots:
            self.slots = [np.zeros_like(p) for p in params]
        if len(gs) != len(params) or any(g.shape != p.shape for g, p in zip(gs, params)):
            raise ValueError("gradient shapes do not match network")
        for p, g, v in zip(params, gs, self.slots):
            v *= self.decay
            v += (1.0 - self.decay) * g * g
            p -= self.learning_rate * g / (np.sqrt(v) + self.eps)


def soft_update(target: Mlp, source: Mlp, tau: float) -> None:
    """Polyak averaging: target <- tau * source + (1 - tau) * target."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if target.specs != source.specs:
        raise ValueError("target and source networks differ in shape")
    for t, s in zip(target.parameters(), source.parameters()):
        if tau == 1.0:
            t[...] = s
        else:
            t *= 1.0 - tau
            t += tau * s


# ---------------------------------------------------------------- checkpoints
# Floats are written with 17 significant digits, which round-trips IEEE doubles.

def _fmt_array(a: np.ndarray) -> str:
    return "[" + ", ".join(format(float(v), ".17g") for v in np.ravel(a)) + "]"


def network_to_text(net: Mlp, indent: str = "") -> str:
    layers = []
    for spec, w, b in zip(net.specs, net.weights, net.biases):
        layers.append(
            f'{indent}    {{"input_size": {spec.input_size}, "output_size": {spec.output_size}, '
            f'"activation": "{spec.activation}",\n'
            f'{indent}     "weight": {_fmt_array(w)},\n'
            f'{indent}     "bias": {_fmt_array(b)}}}'
        )
    return "[\n" + ",\n".join(layers) + f"\n{indent}]"


def network_from_obj(layers: list[dict]) -> Mlp:
    specs, weights, biases = [], [], []
    for layer in layers:
        spec = LayerSpec(int(layer["input_size"]), int(layer["output_size"]), layer["activation"])
        specs.append(spec)
        weights.append(np.array(layer["weight"], dtype=float).reshape(spec.output_size, spec.input_size))
        biases.append(np.array(layer["bias"], dtype=float))
    return Mlp(specs, weights, biases)


def optimizer_to_text(opt: RmsProp) -> str:
    slots = ", ".join(_fmt_array(v) for v in opt.slots)
    return (
        f'{{"learning_rate": {opt.learning_rate!r}, "decay": {opt.decay!r}, '
        f'"eps": {opt.eps!r}, "slots": [{slots}]}}'
    )


def optimizer_from_obj(obj: dict, net: Mlp) -> RmsProp:
    opt = RmsProp(float(obj["learning_rate"]), float(obj["decay"]), float(obj["eps"]))
    shapes = [p.shape for p in net.parameters()]
    if obj["slots"]:
        if len(obj["slots"]) != len(shapes):
            raise ValueError("optimizer slot count does not match network")
        opt.slots = [np.array(v, dtype=float).reshape(s) for v, s in zip(obj["slots"], shapes)]
    return opt


def save_networks(path, networks: dict[str, Mlp], optimizers: dict[str, RmsProp] | None = None,
                  meta: dict | None = None) -> None:
    """Write networks (and optional optimizer slots) as a JSON document."""
    parts = [f'  "meta": {json.dumps(meta or {}, sort_keys=True)}']
    nets = ",\n".join(f'    "{name}": {network_to_text(net, "    ")}' for name, net in networks.items())
    parts.append('  "networks": {\n' + nets + "\n  }")
    if optimizers:
        opts = ",\n".join(f'    "{name}": {optimizer_to_text(o)}' for name, o in optimizers.items())
        parts.append('  "optimizers": {\n' + opts + "\n  }")
    text = "{\n" + ",\n".join(parts) + "\n}\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_networks(path) -> tuple[dict[str, Mlp], dict[str, RmsProp], dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    nets = {name: network_from_obj(layers) for name, layers in doc["networks"].items()}
    opts = {name: optimizer_from_obj(o, nets[name]) for name, o in doc.get("optimizers", {}).items()}
    return nets, opts, doc.get("meta", {})
