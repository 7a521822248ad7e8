"""Dense feed-forward networks with exact analytic gradients.

Float64 throughout. Forward/backward accept single vectors or batches;
parameter gradients are summed over the batch and the caller scales them.
Frozen layers pass gradients through but report zeros and are skipped by the
optimizer. Checkpoints are a small versioned binary container: magic,
version, JSON architecture descriptor, then row-major little-endian float64
tensors.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")

_MAGIC = b"ADN1"
_VERSION = 1


@dataclass
class DenseLayer:
    weights: np.ndarray  # (n_in, n_out)
    biases: np.ndarray  # (n_out,)
    activation: str
    frozen: bool = False

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.biases.copy(), self.activation, self.frozen)


@dataclass
class DenseNetwork:
    layers: list[DenseLayer]

    def copy(self) -> "DenseNetwork":
        return DenseNetwork([layer.copy() for layer in self.layers])

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[1]


@dataclass
class GradientBundle:
    layer_grads: list[tuple[np.ndarray, np.ndarray]]
    input_grad: np.ndarray


def build_network(
    sizes: list[int],
    activations: list[str],
    rng: np.random.Generator,
    final_init_scale: float | None = None,
) -> DenseNetwork:
    """Fan-in uniform init; optionally a small uniform range on the last layer."""
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for i, activation in enumerate(activations):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        n_in, n_out = sizes[i], sizes[i + 1]
        if final_init_scale is not None and i == len(activations) - 1:
            bound = final_init_scale
        else:
            bound = 1.0 / np.sqrt(n_in)
        weights = rng.uniform(-bound, bound, size=(n_in, n_out))
        biases = rng.uniform(-bound, bound, size=n_out)
        layers.append(DenseLayer(weights=weights, biases=biases, activation=activation))
    return DenseNetwork(layers)


def _apply(activation: str, z: np.ndarray) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return np.tanh(z)
    return z


def _derivative(activation: str, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    if activation == "relu":
        return (z > 0.0).astype(float)
    if activation == "tanh":
        return 1.0 - out * out
    return np.ones_like(z)


def forward(net: DenseNetwork, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != net.input_dim:
        raise ValueError(f"expected input dim {net.input_dim}, got {h.shape[1]}")
    for layer in net.layers:
        h = _apply(layer.activation, h @ layer.weights + layer.biases)
    return h[0] if single else h


def backward(net: DenseNetwork, x: np.ndarray, upstream: np.ndarray) -> GradientBundle:
    """Gradients of sum(output * upstream) w.r.t. every parameter and the input."""
    x = np.asarray(x, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    g = upstream[None, :] if single else upstream
    if h.shape[1] != net.input_dim:
        raise ValueError(f"expected input dim {net.input_dim}, got {h.shape[1]}")
    if g.shape != (h.shape[0], net.output_dim):
        raise ValueError("upstream gradient shape mismatch")

    inputs = []
    pre_acts = []
    outs = []
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.weights + layer.biases
        h = _apply(layer.activation, z)
        pre_acts.append(z)
        outs.append(h)

    layer_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    delta = g
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        delta = delta * _derivative(layer.activation, pre_acts[i], outs[i])
        if layer.frozen:
            layer_grads[i] = (np.zeros_like(layer.weights), np.zeros_like(layer.biases))
        else:
            layer_grads[i] = (inputs[i].T @ delta, delta.sum(axis=0))
        delta = delta @ layer.weights.T

    input_grad = delta[0] if single else delta
    return GradientBundle(layer_grads=layer_grads, input_grad=input_grad)


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    v: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)


def adam_init(net: DenseNetwork, lr: float) -> AdamState:
    state = AdamState(lr=lr)
    for layer in net.layers:
        state.m.append((np.zeros_like(layer.weights), np.zeros_like(layer.biases)))
        state.v.append((np.zeros_like(layer.weights), np.zeros_like(layer.biases)))
    return state


def adam_step(
    net: DenseNetwork, grads: GradientBundle, state: AdamState
) -> tuple[DenseNetwork, AdamState]:
    """Bias-corrected adaptive-moment descent step; frozen layers untouched."""
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for layer, (gw, gb), mom, var in zip(net.layers, grads.layer_grads, state.m, state.v):
        if layer.frozen:
            continue
        for param, grad, m, v in ((layer.weights, gw, mom[0], var[0]), (layer.biases, gb, mom[1], var[1])):
            m *= state.beta1
            m += (1.0 - state.beta1) * grad
            v *= state.beta2
            v += (1.0 - state.beta2) * grad * grad
            m_hat = m / correction1
            v_hat = v / correction2
            param -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return net, state


def soft_update(target: DenseNetwork, source: DenseNetwork, tau: float) -> DenseNetwork:
    """target <- tau * source + (1 - tau) * target, elementwise."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for t_layer, s_layer in zip(target.layers, source.layers):
        t_layer.weights *= 1.0 - tau
        t_layer.weights += tau * s_layer.weights
        t_layer.biases *= 1.0 - tau
        t_layer.biases += tau * s_layer.biases
    return target


def _descriptor(net: DenseNetwork) -> dict:
    return {
        "sizes": [net.input_dim] + [layer.weights.shape[1] for layer in net.layers],
        "activations": [layer.activation for layer in net.layers],
        "frozen": [layer.frozen for layer in net.layers],
    }


def save_checkpoint(path: str, networks: dict[str, DenseNetwork], metadata: dict | None = None) -> None:
    """Write named networks plus JSON metadata to a versioned binary file."""
    order = sorted(networks)
    header = {
        "order": order,
        "networks": {name: _descriptor(networks[name]) for name in order},
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    blob = bytearray()
    blob += _MAGIC
    blob += _VERSION.to_bytes(4, "little")
    blob += len(header_bytes).to_bytes(4, "little")
    blob += header_bytes
    for name in order:
        for layer in networks[name].layers:
            blob += np.ascontiguousarray(layer.weights, dtype="<f8").tobytes()
            blob += np.ascontiguousarray(layer.biases, dtype="<f8").tobytes()
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(bytes(blob))
    os.replace(tmp, path)


def load_checkpoint(path: str) -> tuple[dict[str, DenseNetwork], dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise ValueError("not a network checkpoint")
    version = int.from_bytes(blob[4:8], "little")
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    header_len = int.from_bytes(blob[8:12], "little")
    header = json.loads(blob[12 : 12 + header_len].decode())
    offset = 12 + header_len

    networks: dict[str, DenseNetwork] = {}
    for name in header["order"]:
        desc = header["networks"][name]
        layers = []
        sizes = desc["sizes"]
        for i, (activation, frozen) in enumerate(zip(desc["activations"], desc["frozen"])):
            n_in, n_out = sizes[i], sizes[i + 1]
            w_bytes = n_in * n_out * 8
            weights = np.frombuffer(blob, dtype="<f8", count=n_in * n_out, offset=offset)
            weights = weights.reshape(n_in, n_out).astype(float)
            offset += w_bytes
            biases = np.frombuffer(blob, dtype="<f8", count=n_out, offset=offset).astype(float)
            offset += n_out * 8
            layers.append(DenseLayer(weights=weights, biases=biases, activation=activation, frozen=frozen))
        networks[name] = DenseNetwork(layers)
    return networks, header["metadata"]
