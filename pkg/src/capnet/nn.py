"""Small dense tanh networks in plain numpy: forward/backward, Adam, checkpoints.

Inputs may be a single vector or a batch of row vectors; gradients from a batch
are summed over rows.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TANH = "tanh"
IDENTITY = "identity"
_ACT_CODES = {TANH: 0, IDENTITY: 1}
_CODE_ACTS = {v: k for k, v in _ACT_CODES.items()}

CKPT_MAGIC = b"CAPM"
CKPT_VERSION = 1


class CheckpointFormatError(ValueError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Project-wide seeded generator (PCG64, platform independent)."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = TANH

    @property
    def n_in(self) -> int:
        return self.w.shape[1]

    @property
    def n_out(self) -> int:
        return self.w.shape[0]


@dataclass
class Mlp:
    layers: list[Layer]

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.n_out != nxt.n_in:
                raise ValueError(f"layer sizes do not chain: {prev.n_out} -> {nxt.n_in}")
        for layer in self.layers:
            if layer.activation not in _ACT_CODES:
                raise ValueError(f"unknown activation {layer.activation!r}")
            if layer.b.shape != (layer.n_out,):
                raise ValueError("bias length must equal layer output size")

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order (w0, b0, w1, b1, ...), shared by reference."""
        out = []
        for layer in self.layers:
            out += [layer.w, layer.b]
        return out

    def copy(self) -> "Mlp":
        return Mlp([Layer(l.w.copy(), l.b.copy(), l.activation) for l in self.layers])

    def __call__(self, x):
        return forward(self, x)[0]

    def __eq__(self, other):
        if not isinstance(other, Mlp) or len(self.layers) != len(other.layers):
            return False
        return all(
            p.activation == q.activation and np.array_equal(p.w, q.w) and np.array_equal(p.b, q.b)
            for p, q in zip(self.layers, other.layers)
        )


def init_xavier(sizes, activations, rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights, zero biases. ``sizes`` lists widths including input."""
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    if any(int(s) < 1 for s in sizes):
        raise ValueError(f"layer sizes must be positive, got {sizes}")
    layers = []
    for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
        s = np.sqrt(6.0 / (n_in + n_out))
        layers.append(Layer(rng.uniform(-s, s, size=(n_out, n_in)), np.zeros(n_out), act))
    return Mlp(layers)


def forward(net: Mlp, x):
    """Returns ``(output, tape)``; the tape holds every layer's input and output."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.n_in:
        raise ValueError(f"input has size {x.shape[-1]}, network expects {net.n_in}")
    tape = [x]
    h = x
    for layer in net.layers:
        h = h @ layer.w.T + layer.b
        if layer.activation == TANH:
            h = np.tanh(h)
        tape.append(h)
    return h, tape


def backward(net: Mlp, tape, output_grad, need_input_grad: bool = True):
    """Back-propagate ``dL/d(output)``.

    Returns ``(grads, input_grad)`` where ``grads`` matches ``net.params()``;
    ``input_grad`` is None when ``need_input_grad`` is false.
    """
    if len(tape) != len(net.layers) + 1:
        raise ValueError("tape does not belong to this network")
    g = np.asarray(output_grad, dtype=np.float64)
    if g.shape != tape[-1].shape:
        raise ValueError(f"output gradient shape {g.shape} != output shape {tape[-1].shape}")
    grads = [None] * (2 * len(net.layers))
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        if layer.activation == TANH:
            g = g * (1.0 - tape[idx + 1] ** 2)
        inp = tape[idx]
        if g.ndim == 1:
            grads[2 * idx] = np.outer(g, inp)
            grads[2 * idx + 1] = g.copy()
        else:
            grads[2 * idx] = g.T @ inp
            grads[2 * idx + 1] = g.sum(axis=0)
        if idx == 0 and not need_input_grad:
            return grads, None
        g = g @ layer.w
    return grads, g


def mse_loss(pred, target):
    """Sum of squared errors and its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.sum(diff * diff)), 2.0 * diff


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        """Update ``params`` in place."""
        if len(params) != len(self.m) or len(grads) != len(params):
            raise ValueError("parameter/gradient lists do not match optimizer state")
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.epsilon)


def finite_difference_check(loss_fn, params, grads, n_samples=100, rng=None, h=1e-5):
    """Compare analytic gradients with central differences on random parameter entries.

    ``loss_fn()`` must read the current values of ``params`` (which are perturbed
    in place and restored).  Returns the worst relative error
    ``|g - fd| / max(|g|, |fd|, 1e-8)`` over the sampled entries.
    """
    rng = rng or make_rng(0)
    sizes = np.array([p.size for p in params])
    flat_idx = rng.choice(sizes.sum(), size=min(n_samples, sizes.sum()), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for k in flat_idx:
        which = int(np.searchsorted(offsets, k, side="right") - 1)
        p = params[which].reshape(-1)
        pos = k - offsets[which]
        orig = p[pos]
        p[pos] = orig + h
        up = loss_fn()
        p[pos] = orig - h
        down = loss_fn()
        p[pos] = orig
        fd = (up - down) / (2 * h)
        an = grads[which].reshape(-1)[pos]
        worst = max(worst, abs(an - fd) / max(abs(an), abs(fd), 1e-8))
    return worst


def _write_mlp(net: Mlp) -> bytes:
    parts = [struct.pack("<4sII", CKPT_MAGIC, CKPT_VERSION, len(net.layers))]
    for layer in net.layers:
        parts.append(struct.pack("<IIB", layer.n_in, layer.n_out, _ACT_CODES[layer.activation]))
        parts.append(layer.w.astype("<f8").tobytes())
        parts.append(layer.b.astype("<f8").tobytes())
    return b"".join(parts)


def _read_mlp(buf: bytes) -> Mlp:
    if buf[:4] != CKPT_MAGIC:
        raise CheckpointFormatError(f"bad checkpoint magic {buf[:4]!r}")
    try:
        _, version, n_layers = struct.unpack_from("<4sII", buf, 0)
        if version != CKPT_VERSION:
            raise CheckpointFormatError(f"checkpoint version {version}, expected {CKPT_VERSION}")
        off = 12
        layers = []
        for _ in range(n_layers):
            n_in, n_out, code = struct.unpack_from("<IIB", buf, off)
            off += 9
            w = np.frombuffer(buf, "<f8", n_in * n_out, off).reshape(n_out, n_in).astype(np.float64)
            off += 8 * n_in * n_out
            b = np.frombuffer(buf, "<f8", n_out, off).astype(np.float64)
            off += 8 * n_out
            layers.append(Layer(w, b, _CODE_ACTS[code]))
    except (struct.error, ValueError, KeyError) as exc:
        if isinstance(exc, CheckpointFormatError):
            raise
        raise CheckpointFormatError(f"corrupt checkpoint: {exc}") from exc
    return Mlp(layers)


def save_mlp(net: Mlp, path) -> None:
    Path(path).write_bytes(_write_mlp(net))


def load_mlp(path) -> Mlp:
    return _read_mlp(Path(path).read_bytes())
