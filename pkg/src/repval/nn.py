"""Minimal MLP with hand-written backprop.

Dense layers, ReLU hidden activations, identity output.  Inputs may be a
single vector or a (batch, dim) matrix; parameter gradients are summed
over the batch.  No autograd, no framework -- forward and backward are a
handful of matmuls, which keeps the whole learner stack dependency-free
and bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CKPT_MAGIC = "MLPCKPT v1"


@dataclass
class Gradients:
    """Parameter gradients, shape-congruent with the owning Mlp."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


class Mlp:
    def __init__(self, layer_dims: list[int], weights: list[np.ndarray],
                 biases: list[np.ndarray]):
        self.layer_dims = list(layer_dims)
        self.weights = weights
        self.biases = biases
        for i, (w, b) in enumerate(zip(weights, biases)):
            din, dout = layer_dims[i], layer_dims[i + 1]
            if w.shape != (din, dout) or b.shape != (dout,):
                raise ValueError(f"layer {i} shape mismatch: {w.shape}, {b.shape}")

    @classmethod
    def init(cls, layer_dims: list[int], rng: np.random.Generator | int = 0) -> "Mlp":
        """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, seeded."""
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        weights, biases = [], []
        for din, dout in zip(layer_dims, layer_dims[1:]):
            bound = 1.0 / np.sqrt(din)
            weights.append(rng.uniform(-bound, bound, size=(din, dout)))
            biases.append(rng.uniform(-bound, bound, size=dout))
        return cls(layer_dims, weights, biases)

    def copy(self) -> "Mlp":
        return Mlp(self.layer_dims, [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases])

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.layer_dims[0]:
            raise ValueError(
                f"input dim {x.shape[-1]} != expected {self.layer_dims[0]}")
        h = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                h = np.maximum(h, 0.0)
        return h

    def _forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        acts = [x]
        h = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, x: np.ndarray, upstream: np.ndarray) -> tuple[Gradients, np.ndarray]:
        """Gradients of sum(output * upstream) w.r.t. parameters and input.

        For batched x, upstream must have the matching batch shape and the
        parameter gradients are summed over the batch; the returned input
        gradient keeps the batch shape.
        """
        if upstream.shape[-1] != self.layer_dims[-1] or upstream.ndim != x.ndim:
            raise ValueError("upstream gradient shape mismatch")
        single = x.ndim == 1
        xb = x[None, :] if single else x
        ub = upstream[None, :] if single else upstream
        _, acts = self._forward_cached(xb)

        gw = [np.empty(0)] * self.n_layers
        gb = [np.empty(0)] * self.n_layers
        delta = ub
        for i in range(self.n_layers - 1, -1, -1):
            if i != self.n_layers - 1:
                delta = delta * (acts[i + 1] > 0)
            gw[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
        d_input = delta[0] if single else delta
        return Gradients(gw, gb), d_input


def sgd_step(net: Mlp, grads: Gradients, lr: float) -> Mlp:
    """In-place p <- p - lr * g; rejects non-finite gradients."""
    for i, (gw, gb) in enumerate(zip(grads.weights, grads.biases)):
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise ValueError(f"non-finite gradient in layer {i}")
        net.weights[i] -= lr * gw
        net.biases[i] -= lr * gb
    return net


def soft_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """In-place t <- (1 - tau) * t + tau * o."""
    if target.layer_dims != online.layer_dims:
        raise ValueError("target/online shape mismatch")
    for tw, ow in zip(target.weights, online.weights):
        tw *= 1.0 - tau
        tw += tau * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= 1.0 - tau
        tb += tau * ob
    return target


def save_mlp(net: Mlp, path) -> None:
    """Write the MLPCKPT v1 format.

    A text header line "MLPCKPT v1 <dims comma-separated>\\n" followed by
    all parameters as a flat little-endian float64 array, layer-major
    order, each layer's weight matrix (row-major, fan_in x fan_out) before
    its bias vector.
    """
    header = f"{CKPT_MAGIC} {','.join(str(d) for d in net.layer_dims)}\n"
    flat = np.concatenate(
        [np.concatenate([w.ravel(), b]) for w, b in zip(net.weights, net.biases)]
    ).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(header.encode())
        fh.write(flat.tobytes())


def load_mlp(path) -> Mlp:
    with open(path, "rb") as fh:
        header = fh.readline().decode().rstrip("\n")
        prefix = CKPT_MAGIC + " "
        if not header.startswith(prefix):
            raise ValueError(f"{path}: not an {CKPT_MAGIC} checkpoint")
        dims = [int(d) for d in header[len(prefix):].split(",")]
        flat = np.frombuffer(fh.read(), dtype="<f8")
    expected = sum(din * dout + dout for din, dout in zip(dims, dims[1:]))
    if flat.size != expected:
        raise ValueError(f"{path}: expected {expected} parameters, got {flat.size}")
    weights, biases, off = [], [], 0
    for din, dout in zip(dims, dims[1:]):
        weights.append(flat[off:off + din * dout].reshape(din, dout).copy())
        off += din * dout
        biases.append(flat[off:off + dout].copy())
        off += dout
    return Mlp(dims, weights, biases)
