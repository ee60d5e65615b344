"""Small dense networks with hand-derived reverse-mode gradients.

Arrays are float64 throughout and every gradient is written out by hand
(no autograd framework); `finite_diff_check` validates the backward pass
against central differences. Weights initialize uniformly in
+-1/sqrt(fan_in); an optional scale shrinks the output layer for policies
that should start near zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")

CHECKPOINT_MAGIC = "mlp-checkpoint-v1"


@dataclass(frozen=True)
class LayerSpec:
    fan_in: int
    fan_out: int
    activation: str

    def __post_init__(self) -> None:
        if self.fan_in < 1 or self.fan_out < 1:
            raise ValueError("layer widths must be at least 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activate_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


class Mlp:
    """Feed-forward network: affine layers with per-layer activations."""

    def __init__(self, specs: tuple[LayerSpec, ...], weights, biases):
        for a, b in zip(specs, specs[1:]):
            if a.fan_out != b.fan_in:
                raise ValueError("adjacent layer widths disagree")
        self.specs = tuple(specs)
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            if w.shape != (spec.fan_in, spec.fan_out) or b.shape != (spec.fan_out,):
                raise ValueError("parameter shapes do not match layer specs")

    @classmethod
    def initialize(
        cls,
        specs: tuple[LayerSpec, ...],
        rng: np.random.Generator,
        final_scale: float = 1.0,
    ) -> "Mlp":
        weights, biases = [], []
        for i, spec in enumerate(specs):
            bound = 1.0 / np.sqrt(spec.fan_in)
            w = rng.uniform(-bound, bound, size=(spec.fan_in, spec.fan_out))
            b = rng.uniform(-bound, bound, size=spec.fan_out)
            if i == len(specs) - 1:
                w *= final_scale
                b *= final_scale
            weights.append(w)
            biases.append(b)
        return cls(tuple(specs), weights, biases)

    @property
    def input_dim(self) -> int:
        return self.specs[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.specs[-1].fan_out

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "Mlp":
        return Mlp(
            self.specs,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def _as_batch(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return x[None, :], True
        if x.ndim == 2:
            return x, False
        raise ValueError(f"expected a vector or a batch, got ndim={x.ndim}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        batch, squeeze = self._as_batch(x)
        if batch.shape[1] != self.input_dim:
            raise ValueError(
                f"input width {batch.shape[1]} != expected {self.input_dim}"
            )
        a = batch
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            a = _activate(a @ w + b, spec.activation)
        return a[0] if squeeze else a

    def forward_cached(self, x: np.ndarray):
        """Forward pass keeping per-layer inputs and pre-activations."""
        batch, squeeze = self._as_batch(x)
        if batch.shape[1] != self.input_dim:
            raise ValueError(
                f"input width {batch.shape[1]} != expected {self.input_dim}"
            )
        a = batch
        cache = []
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            z = a @ w + b
            cache.append((a, z))
            a = _activate(z, spec.activation)
        return (a[0] if squeeze else a), (cache, squeeze)

    def backward(self, cache, grad_output: np.ndarray):
        """Exact gradients of sum(grad_output * output) w.r.t. params and input.

        Returns ([(dW, db) per layer], grad_input); batch gradients sum over
        the batch, so the caller owns any 1/B scaling.
        """
        layer_cache, squeeze = cache
        g = np.asarray(grad_output, dtype=np.float64)
        if squeeze:
            g = g[None, :]
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.specs)
        for i in range(len(self.specs) - 1, -1, -1):
            a_in, z = layer_cache[i]
            dz = g * _activate_grad(z, self.specs[i].activation)
            grads[i] = (a_in.T @ dz, dz.sum(axis=0))
            g = dz @ self.weights[i].T
        return grads, (g[0] if squeeze else g)


class Adam:
    """Bias-corrected Adam state for one network."""

    def __init__(self, net: Mlp, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def update(self, net: Mlp, grads, lr: float) -> None:
        """One Adam step in place; `grads` matches Mlp.backward's layout."""
        flat_grads = []
        for dw, db in grads:
            flat_grads.extend((dw, db))
        params = net.parameters()
        if len(flat_grads) != len(params):
            raise ValueError("gradient layout does not match parameters")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for p, g, m, v in zip(params, flat_grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def adam_update(net: Mlp, grads, state: Adam, lr: float) -> None:
    state.update(net, grads, lr)


def finite_diff_check(net: Mlp, x: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between backprop and central differences.

    Checks d/dtheta of sum(f(x)) per scalar parameter. Denominators are
    floored at 1e-6 so true-zero gradients compare cleanly.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    _, cache = net.forward_cached(x)
    ones = np.ones(net.output_dim if np.ndim(x) == 1 else (len(x), net.output_dim))
    grads, _ = net.backward(cache, ones)
    analytic = []
    for dw, db in grads:
        analytic.extend((dw, db))

    worst = 0.0
    for p, g in zip(net.parameters(), analytic):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            up = float(np.sum(net.forward(x)))
            flat[idx] = original - eps
            down = float(np.sum(net.forward(x)))
            flat[idx] = original
            numeric = (up - down) / (2.0 * eps)
            denom = max(abs(numeric), abs(gflat[idx]), 1e-6)
            worst = max(worst, abs(numeric - gflat[idx]) / denom)
    return worst


def save_mlp(
    net: Mlp, path, seed: int | None = None, step: int | None = None
) -> None:
    """Write a checkpoint: one JSON header line, then flat float64 params."""
    header = {
        "format": CHECKPOINT_MAGIC,
        "layers": [
            {"fan_in": s.fan_in, "fan_out": s.fan_out, "activation": s.activation}
            for s in net.specs
        ],
        "dtype": "<f8",
        "param_count": net.parameter_count,
        "seed": seed,
        "step": step,
    }
    blob = np.concatenate([p.reshape(-1) for p in net.parameters()])
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(blob.astype("<f8").tobytes())


def load_mlp(path) -> tuple[Mlp, dict]:
    """Read a checkpoint back; returns the network and its header."""
    with open(path, "rb") as fh:
        raw = fh.read()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline].decode("utf-8"))
    if header.get("format") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a recognized checkpoint")
    specs = tuple(
        LayerSpec(l["fan_in"], l["fan_out"], l["activation"])
        for l in header["layers"]
    )
    flat = np.frombuffer(raw[newline + 1 :], dtype="<f8").astype(np.float64)
    expected = sum(s.fan_in * s.fan_out + s.fan_out for s in specs)
    if flat.size != expected:
        raise ValueError(
            f"{path}: parameter blob holds {flat.size} values, expected {expected}"
        )
    weights, biases = [], []
    offset = 0
    for s in specs:
        w = flat[offset : offset + s.fan_in * s.fan_out].reshape(s.fan_in, s.fan_out)
        offset += s.fan_in * s.fan_out
        b = flat[offset : offset + s.fan_out]
        offset += s.fan_out
        weights.append(w.copy())
        biases.append(b.copy())
    return Mlp(specs, weights, biases), header


def mlp_from_widths(
    widths: tuple[int, ...],
    hidden_activation: str,
    output_activation: str,
    rng: np.random.Generator,
    final_scale: float = 1.0,
) -> Mlp:
    """Convenience builder: widths (in, h1, ..., out) to an initialized net."""
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    specs = []
    for i in range(len(widths) - 1):
        act = output_activation if i == len(widths) - 2 else hidden_activation
        specs.append(LayerSpec(widths[i], widths[i + 1], act))
    return Mlp.initialize(tuple(specs), rng, final_scale=final_scale)
