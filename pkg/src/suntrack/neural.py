"""Minimal dense-network substrate shared by the tracker head and the Q-network.

Forward, exact reverse-mode gradients, SGD/Adam steps, and a finite-difference
gradient checker. Everything is float64 and deterministic per seed; networks
are treated as immutable snapshots (``step`` returns new ones).

Weight layout: ``weights[l]`` has shape (fan_in, fan_out); hidden layers are
ReLU, the output layer is identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import backend

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class Mlp:
    """A fully connected network snapshot.

    Attributes:
        layer_sizes: (n_in, hidden..., n_out), all >= 1.
        weights: per-layer (fan_in, fan_out) float64 matrices.
        biases: per-layer (fan_out,) float64 vectors.
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "Mlp":
        return Mlp(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass
class Gradients:
    """Parameter gradients, shape-matched to an Mlp."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class OptimState:
    """Optimizer state: plain SGD, or Adam when moment accumulators are present."""

    learning_rate: float
    m1: list[np.ndarray] | None = None
    m2: list[np.ndarray] | None = None
    t: int = 0

    @classmethod
    def sgd(cls, learning_rate: float) -> "OptimState":
        return cls(learning_rate=learning_rate)

    @classmethod
    def adam(cls, learning_rate: float, like: Mlp) -> "OptimState":
        """Adam state with zero moments shaped after ``like``."""
        m1 = [np.zeros_like(w) for w in like.weights] + [np.zeros_like(b) for b in like.biases]
        m2 = [np.zeros_like(w) for w in like.weights] + [np.zeros_like(b) for b in like.biases]
        return cls(learning_rate=learning_rate, m1=m1, m2=m2, t=0)


def mlp_new(layer_sizes, seed: int) -> Mlp:
    """Glorot-uniform weights, zero biases, deterministic per seed.

    Raises:
        ValueError: fewer than 2 layers or any size < 1.
    """
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ValueError(f"need at least 2 layer sizes, got {len(sizes)}")
    if any(s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be >= 1, got {sizes}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(sizes, weights, biases)


def _as_batch(m: Mlp, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != m.n_in:
        raise ValueError(f"input shape {x.shape} incompatible with first layer size {m.n_in}")
    return x


def forward(m: Mlp, x) -> np.ndarray:
    """Evaluate the network on a single input vector."""
    y, _ = backend.forward_chain(m.weights, m.biases, _as_batch(m, x))
    return y[0]


def forward_batch(m: Mlp, x) -> np.ndarray:
    """Evaluate the network on an (n, n_in) batch, row-wise."""
    y, _ = backend.forward_chain(m.weights, m.biases, _as_batch(m, x))
    return y


def backward(m: Mlp, x, d_out) -> Gradients:
    """Exact parameter gradients for the cotangent ``d_out`` at input ``x``.

    The ReLU subgradient at 0 is 0.

    Raises:
        ValueError: cotangent length does not match the output layer.
    """
    d_out = np.ascontiguousarray(d_out, dtype=np.float64)
    if d_out.shape != (m.n_out,):
        raise ValueError(f"cotangent shape {d_out.shape} != ({m.n_out},)")
    return backward_batch(m, _as_batch(m, x), d_out[None, :])


def backward_batch(m: Mlp, x, d_out) -> Gradients:
    """Batch gradients, summed over rows of ``d_out``."""
    x = _as_batch(m, x)
    d_out = np.ascontiguousarray(d_out, dtype=np.float64)
    if d_out.shape != (x.shape[0], m.n_out):
        raise ValueError(f"cotangent shape {d_out.shape} != ({x.shape[0]}, {m.n_out})")
    _, activations = backend.forward_chain(m.weights, m.biases, x)
    d_weights, d_biases = backend.backward_chain(m.weights, activations, d_out)
    return Gradients(d_weights, d_biases)


def step(m: Mlp, g: Gradients, o: OptimState) -> tuple[Mlp, OptimState]:
    """One optimizer update; returns new (Mlp, OptimState) snapshots.

    SGD when no moments are present, otherwise Adam with the standard
    bias-corrected update.
    """
    n_layers = len(m.weights)
    params = m.weights + m.biases
    grads = g.weights + g.biases
    for p, gr in zip(params, grads):
        if p.shape != gr.shape:
            raise ValueError(f"gradient shape {gr.shape} != parameter shape {p.shape}")
    lr = o.learning_rate
    if o.m1 is None:
        new_params = [p - lr * gr for p, gr in zip(params, grads)]
        new_opt = o
    else:
        t = o.t + 1
        new_m1 = [ADAM_BETA1 * m1 + (1 - ADAM_BETA1) * gr for m1, gr in zip(o.m1, grads)]
        new_m2 = [ADAM_BETA2 * m2 + (1 - ADAM_BETA2) * gr * gr for m2, gr in zip(o.m2, grads)]
        c1 = 1 - ADAM_BETA1**t
        c2 = 1 - ADAM_BETA2**t
        new_params = [
            p - lr * (m1 / c1) / (np.sqrt(m2 / c2) + ADAM_EPS)
            for p, m1, m2 in zip(params, new_m1, new_m2)
        ]
        new_opt = replace(o, m1=new_m1, m2=new_m2, t=t)
    new_mlp = Mlp(m.layer_sizes, new_params[:n_layers], new_params[n_layers:])
    return new_mlp, new_opt


def gradient_check(m: Mlp, x, loss_fn, *, fd_step: float = 1e-5,
                   sample_limit: int = 200, seed: int = 0) -> float:
    """Compare backprop gradients against central differences.

    Args:
        m: network to check.
        x: input vector.
        loss_fn: maps the network output y to (loss, dLoss_dy); must be
            scalar-valued and deterministic.
        fd_step: central-difference step.
        sample_limit: for nets with more parameters than this, check a
            seeded random subset of this size instead of every parameter.
        seed: seed for the parameter subset.

    Returns:
        max over checked parameters of |analytic - numeric| /
        max(1e-8, |analytic| + |numeric|).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = forward(m, x)
    _, d_y = loss_fn(y)
    analytic = backward(m, x, np.asarray(d_y, dtype=np.float64))

    flat_slots = []
    for l, w in enumerate(m.weights):
        flat_slots.extend(("w", l, i) for i in range(w.size))
    for l, b in enumerate(m.biases):
        flat_slots.extend(("b", l, i) for i in range(b.size))
    if len(flat_slots) > sample_limit:
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(flat_slots), size=sample_limit, replace=False)
        flat_slots = [flat_slots[i] for i in picked]

    probe = m.copy()

    def loss_at() -> float:
        y_p, _ = backend.forward_chain(probe.weights, probe.biases, x[None, :])
        return float(loss_fn(y_p[0])[0])

    max_rel = 0.0
    for kind, l, i in flat_slots:
        arr = probe.weights[l] if kind == "w" else probe.biases[l]
        flat = arr.reshape(-1)
        orig = flat[i]
        flat[i] = orig + fd_step
        loss_plus = loss_at()
        flat[i] = orig - fd_step
        loss_minus = loss_at()
        flat[i] = orig
        numeric = (loss_plus - loss_minus) / (2 * fd_step)
        g_arr = analytic.weights[l] if kind == "w" else analytic.biases[l]
        a = g_arr.reshape(-1)[i]
        rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        max_rel = max(max_rel, rel)
    return max_rel


def mlp_to_dict(m: Mlp) -> dict:
    """Checkpoint form: plain lists plus a format version."""
    return {
        "layer_sizes": list(m.layer_sizes),
        "weights": [w.tolist() for w in m.weights],
        "biases": [b.tolist() for b in m.biases],
        "format_version": 1,
    }


def mlp_from_dict(d: dict) -> Mlp:
    """Rebuild an Mlp from checkpoint form.

    Raises:
        ValueError: unsupported format_version or shape inconsistency.
    """
    version = d.get("format_version")
    if version != 1:
        raise ValueError(f"unsupported checkpoint format_version: {version!r}")
    sizes = tuple(int(s) for s in d["layer_sizes"])
    if len(sizes) < 2:
        raise ValueError("checkpoint needs at least 2 layer sizes")
    weights = [np.array(w, dtype=np.float64) for w in d["weights"]]
    biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
    if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
        raise ValueError("checkpoint layer count inconsistent with layer_sizes")
    for l, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if weights[l].shape != (fan_in, fan_out):
            raise ValueError(
                f"weight matrix {l} has shape {weights[l].shape}, expected {(fan_in, fan_out)}"
            )
        if biases[l].shape != (fan_out,):
            raise ValueError(
                f"bias vector {l} has shape {biases[l].shape}, expected {(fan_out,)}"
            )
        if not (np.isfinite(weights[l]).all() and np.isfinite(biases[l]).all()):
            raise ValueError(f"non-finite parameters in layer {l}")
    return Mlp(sizes, weights, biases)
