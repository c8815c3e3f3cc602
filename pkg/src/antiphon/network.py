"""Stacked LSTM with a mixture-density head.

Two execution paths share one set of weights: a stateful single-step
forward for live inference, and a teacher-forced batched unroll with
exact backpropagation through time for training.  All math is plain
numpy and dtype-generic; production code runs float32, the gradient
test oracle runs the same code in float64.

Gate layout along the ``4*units`` axis is (input, forget, candidate,
output).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .mixture import (
    SIGMA_FLOOR,
    MixtureParams,
    raw_output_size,
    sample as sample_mixture,
    split_params,
)

SIZE_PRESETS = {"s": 64, "m": 128, "l": 256, "xl": 512}


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    ``dimension`` counts the time delta plus the control values, so a
    model for two control variables has dimension 3.
    """

    dimension: int
    units: int = 64
    layers: int = 2
    mixtures: int = 5
    seq_len: int = 50

    def __post_init__(self) -> None:
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2 (dt plus at least one value)")
        if min(self.units, self.layers, self.mixtures, self.seq_len) < 1:
            raise ValueError("units, layers, mixtures and seq_len must be >= 1")

    @classmethod
    def from_preset(cls, size: str, dimension: int, **kwargs) -> "ModelConfig":
        if size not in SIZE_PRESETS:
            raise ValueError(f"unknown size preset {size!r}; choose from {sorted(SIZE_PRESETS)}")
        return cls(dimension=dimension, units=SIZE_PRESETS[size], **kwargs)

    @property
    def output_size(self) -> int:
        return raw_output_size(self.mixtures, self.dimension)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "units": self.units,
            "layers": self.layers,
            "mixtures": self.mixtures,
            "seq_len": self.seq_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{k: int(v) for k, v in d.items()})


@dataclass
class LayerWeights:
    kernel: np.ndarray      # (input_size, 4*units)
    recurrent: np.ndarray   # (units, 4*units)
    bias: np.ndarray        # (4*units,)


@dataclass
class Weights:
    """All trainable parameters.

    ``version`` increments whenever an optimizer updates the arrays in
    place; forward caches record it so a stale cache is detected at
    backward time.
    """

    layers: list[LayerWeights]
    head_kernel: np.ndarray  # (units, K*(2N+1))
    head_bias: np.ndarray    # (K*(2N+1),)
    version: int = 0

    def bump_version(self) -> None:
        self.version += 1

    def arrays(self) -> dict[str, np.ndarray]:
        """Named view of every parameter array, in canonical order."""
        out: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            out[f"lstm{i}.kernel"] = layer.kernel
            out[f"lstm{i}.recurrent"] = layer.recurrent
            out[f"lstm{i}.bias"] = layer.bias
        out["head.kernel"] = self.head_kernel
        out["head.bias"] = self.head_bias
        return out

    @classmethod
    def from_arrays(cls, cfg: ModelConfig, arrays: dict[str, np.ndarray]) -> "Weights":
        expected = expected_shapes(cfg)
        if set(arrays) != set(expected):
            raise ShapeMismatchError(
                f"weight names {sorted(arrays)} do not match config (want {sorted(expected)})"
            )
        for name, shape in expected.items():
            if tuple(arrays[name].shape) != shape:
                raise ShapeMismatchError(
                    f"array {name!r} has shape {arrays[name].shape}, config wants {shape}"
                )
        layers = [
            LayerWeights(
                kernel=arrays[f"lstm{i}.kernel"],
                recurrent=arrays[f"lstm{i}.recurrent"],
                bias=arrays[f"lstm{i}.bias"],
            )
            for i in range(cfg.layers)
        ]
        return cls(layers=layers, head_kernel=arrays["head.kernel"], head_bias=arrays["head.bias"])

    def scalar_count(self) -> int:
        return sum(a.size for a in self.arrays().values())

    def astype(self, dtype) -> "Weights":
        return Weights(
            layers=[
                LayerWeights(l.kernel.astype(dtype), l.recurrent.astype(dtype), l.bias.astype(dtype))
                for l in self.layers
            ],
            head_kernel=self.head_kernel.astype(dtype),
            head_bias=self.head_bias.astype(dtype),
        )

    def zeros_like(self) -> "Weights":
        return Weights(
            layers=[
                LayerWeights(
                    np.zeros_like(l.kernel), np.zeros_like(l.recurrent), np.zeros_like(l.bias)
                )
                for l in self.layers
            ],
            head_kernel=np.zeros_like(self.head_kernel),
            head_bias=np.zeros_like(self.head_bias),
        )


def expected_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    shapes: dict[str, tuple] = {}
    in_size = cfg.dimension
    for i in range(cfg.layers):
        shapes[f"lstm{i}.kernel"] = (in_size, 4 * cfg.units)
        shapes[f"lstm{i}.recurrent"] = (cfg.units, 4 * cfg.units)
        shapes[f"lstm{i}.bias"] = (4 * cfg.units,)
        in_size = cfg.units
    shapes["head.kernel"] = (cfg.units, cfg.output_size)
    shapes["head.bias"] = (cfg.output_size,)
    return shapes


def param_count(cfg: ModelConfig) -> int:
    """Exact number of trainable scalars for a config.

    Per LSTM layer: 4*((input + units)*units + units), where the first
    layer sees the data dimension and deeper layers see ``units``.  The
    head adds units*K*(2N+1) weights plus K*(2N+1) biases.
    """
    total = 0
    in_size = cfg.dimension
    for _ in range(cfg.layers):
        total += 4 * ((in_size + cfg.units) * cfg.units + cfg.units)
        in_size = cfg.units
    total += cfg.units * cfg.output_size + cfg.output_size
    return total


def init_weights(cfg: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> Weights:
    """Fresh weights: Glorot-uniform kernels, orthogonal recurrent
    blocks (one per gate), zero biases with the forget gate biased to 1."""

    def glorot(shape):
        limit = np.sqrt(6.0 / (shape[0] + shape[1]))
        return rng.uniform(-limit, limit, size=shape).astype(dtype)

    def orthogonal_gates(units):
        blocks = []
        for _ in range(4):
            a = rng.standard_normal((units, units))
            q, r = np.linalg.qr(a)
            q *= np.sign(np.diag(r))  # make the factorization unique
            blocks.append(q)
        return np.concatenate(blocks, axis=1).astype(dtype)

    layers = []
    in_size = cfg.dimension
    for _ in range(cfg.layers):
        bias = np.zeros(4 * cfg.units, dtype=dtype)
        bias[cfg.units : 2 * cfg.units] = 1.0  # forget gate
        layers.append(
            LayerWeights(
                kernel=glorot((in_size, 4 * cfg.units)),
                recurrent=orthogonal_gates(cfg.units),
                bias=bias,
            )
        )
        in_size = cfg.units
    return Weights(
        layers=layers,
        head_kernel=glorot((cfg.units, cfg.output_size)),
        head_bias=np.zeros(cfg.output_size, dtype=dtype),
    )


class RecurrentState:
    """Per-layer hidden and cell vectors for stateful inference.

    Single-owner: one inference worker reads and writes it; it is never
    shared across threads.
    """

    def __init__(self, cfg: ModelConfig, dtype=np.float32):
        self.h = [np.zeros(cfg.units, dtype=dtype) for _ in range(cfg.layers)]
        self.c = [np.zeros(cfg.units, dtype=dtype) for _ in range(cfg.layers)]

    def reset(self) -> None:
        for arr in self.h + self.c:
            arr[:] = 0.0


def reset_state(state: RecurrentState) -> RecurrentState:
    state.reset()
    return state


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split on sign to avoid exp overflow in float32.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _gates(x, h, layer: LayerWeights):
    """Pre-activations -> (i, f, g, o). Works on 1-D or batched rows."""
    z = x @ layer.kernel + h @ layer.recurrent + layer.bias
    u = layer.recurrent.shape[0]
    i = _sigmoid(z[..., :u])
    f = _sigmoid(z[..., u : 2 * u])
    g = np.tanh(z[..., 2 * u : 3 * u])
    o = _sigmoid(z[..., 3 * u :])
    return i, f, g, o


def lstm_step(x: np.ndarray, h: np.ndarray, c: np.ndarray, layer: LayerWeights):
    """One LSTM cell step; returns (h', c') without touching the inputs."""
    if x.shape[-1] != layer.kernel.shape[0]:
        raise ShapeMismatchError(
            f"input size {x.shape[-1]} does not match kernel input {layer.kernel.shape[0]}"
        )
    i, f, g, o = _gates(x, h, layer)
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def forward_step(
    x: np.ndarray, state: RecurrentState, weights: Weights, cfg: ModelConfig
) -> MixtureParams:
    """Run one stateful inference step and split the head output.

    Mutates ``state`` in place: this is the "sequence length 1" path
    where the recurrent state is carried between calls.
    """
    x = np.asarray(x, dtype=state.h[0].dtype)
    if x.shape != (cfg.dimension,):
        raise ShapeMismatchError(f"input must have shape ({cfg.dimension},); got {x.shape}")
    inp = x
    for li, layer in enumerate(weights.layers):
        h_new, c_new = lstm_step(inp, state.h[li], state.c[li], layer)
        state.h[li] = h_new
        state.c[li] = c_new
        inp = h_new
    raw = inp @ weights.head_kernel + weights.head_bias
    return split_params(raw, cfg.mixtures, cfg.dimension)


def rollout(
    weights: Weights,
    cfg: ModelConfig,
    steps: int,
    sampling,
    rng: np.random.Generator,
    prime: np.ndarray | None = None,
) -> np.ndarray:
    """Self-conditioned generation: feed each sample back as input.

    Optionally conditions the state on ``prime`` (a (P, N) array of
    model vectors) first.  Returns the generated steps as an
    (steps, N) array with dt in column 0.
    """
    state = RecurrentState(cfg, dtype=weights.head_kernel.dtype)
    last = np.full(cfg.dimension, 0.5, dtype=weights.head_kernel.dtype)
    last[0] = 0.05  # neutral start when nothing primes the state
    if prime is not None:
        for vec in prime:
            forward_step(vec, state, weights, cfg)
            last = np.asarray(vec)
    out = np.empty((steps, cfg.dimension), dtype=np.float64)
    for i in range(steps):
        params = forward_step(last, state, weights, cfg)
        drawn = sample_mixture(params, sampling, rng)
        last = drawn.as_array(dtype=weights.head_kernel.dtype)
        out[i] = last
    return out


@dataclass
class ForwardCache:
    """Activations saved by forward_sequence for the backward pass."""

    cfg: ModelConfig
    weights: Weights
    weights_version: int
    inputs: np.ndarray                 # (B, T, N)
    layer_inputs: list[np.ndarray]     # per layer, (B, T, in)
    gates: list[tuple]                 # per layer, (I, F, G, O) each (B, T, U)
    cells: list[np.ndarray]            # per layer, (B, T, U)
    hidden: list[np.ndarray]           # per layer, (B, T, U)
    head_grad: np.ndarray              # (B*T, K*(2N+1)), dLoss/draw
    loss: float


def forward_sequence(
    inputs: np.ndarray,
    targets: np.ndarray,
    weights: Weights,
    cfg: ModelConfig,
) -> tuple[float, ForwardCache]:
    """Teacher-forced unroll from zero state.

    Args:
        inputs: (B, T, N) model inputs.
        targets: (B, T, N) next-step targets.

    Returns the mean mixture NLL over all B*T steps and a cache for
    :func:`backward`.  The gradient of the loss with respect to the raw
    head output is computed here, where the mixture intermediates are
    on hand, and stored in the cache.
    """
    inputs = np.asarray(inputs)
    targets = np.asarray(targets)
    if inputs.ndim != 3 or inputs.shape[2] != cfg.dimension:
        raise ShapeMismatchError(f"inputs must be (B, T, {cfg.dimension}); got {inputs.shape}")
    if targets.shape != inputs.shape:
        raise ShapeMismatchError(
            f"targets shape {targets.shape} must match inputs {inputs.shape}"
        )
    batch, steps, _ = inputs.shape
    dtype = weights.head_kernel.dtype
    units = cfg.units

    layer_inputs: list[np.ndarray] = []
    gates: list[tuple] = []
    cells: list[np.ndarray] = []
    hidden: list[np.ndarray] = []

    seq = inputs.astype(dtype)
    for layer in weights.layers:
        layer_inputs.append(seq)
        in_size = seq.shape[2]
        # One big GEMM for the input contribution of every timestep.
        xz = (seq.reshape(batch * steps, in_size) @ layer.kernel).reshape(
            batch, steps, 4 * units
        )
        I = np.empty((batch, steps, units), dtype=dtype)
        F = np.empty_like(I)
        G = np.empty_like(I)
        O = np.empty_like(I)
        C = np.empty_like(I)
        H = np.empty_like(I)
        h = np.zeros((batch, units), dtype=dtype)
        c = np.zeros((batch, units), dtype=dtype)
        for t in range(steps):
            z = xz[:, t] + h @ layer.recurrent + layer.bias
            i = _sigmoid(z[:, :units])
            f = _sigmoid(z[:, units : 2 * units])
            g = np.tanh(z[:, 2 * units : 3 * units])
            o = _sigmoid(z[:, 3 * units :])
            c = f * c + i * g
            h = o * np.tanh(c)
            I[:, t], F[:, t], G[:, t], O[:, t], C[:, t], H[:, t] = i, f, g, o, c, h
        gates.append((I, F, G, O))
        cells.append(C)
        hidden.append(H)
        seq = H

    flat_h = seq.reshape(batch * steps, units)
    raw = flat_h @ weights.head_kernel + weights.head_bias
    loss, head_grad = _mixture_loss_and_raw_grad(
        raw, targets.reshape(batch * steps, cfg.dimension).astype(dtype), cfg
    )

    cache = ForwardCache(
        cfg=cfg,
        weights=weights,
        weights_version=weights.version,
        inputs=inputs,
        layer_inputs=layer_inputs,
        gates=gates,
        cells=cells,
        hidden=hidden,
        head_grad=head_grad,
        loss=loss,
    )
    return loss, cache


def _mixture_loss_and_raw_grad(raw: np.ndarray, targets: np.ndarray, cfg: ModelConfig):
    """Mean mixture NLL over rows of ``raw`` plus its gradient.

    Vectorized restatement of :func:`antiphon.mixture.mixture_nll` with
    the analytic gradient through the softmax/identity/exp split:

        d/dlogits = pi - r
        d/dmu     = -r * (y - mu) / sigma^2
        d/dlogsig = r * (1 - ((y - mu)/sigma)^2)   (0 where the floor binds)

    where r are the posterior component responsibilities.
    """
    m = raw.shape[0]
    k, n = cfg.mixtures, cfg.dimension
    logits = raw[:, :k]
    mu = raw[:, k : k + k * n].reshape(m, k, n)
    sig_raw = np.exp(raw[:, k + k * n :].reshape(m, k, n))
    floored = sig_raw < SIGMA_FLOOR
    sigma = np.maximum(sig_raw, SIGMA_FLOOR)

    log_pi = logits - logits.max(axis=1, keepdims=True)
    log_pi = log_pi - np.log(np.exp(log_pi).sum(axis=1, keepdims=True))
    pi = np.exp(log_pi)

    z = (targets[:, None, :] - mu) / sigma  # (M, K, N)
    log_comp = (
        -np.log(sigma).sum(axis=2)
        - 0.5 * (z * z).sum(axis=2)
        - 0.5 * n * np.log(np.asarray(2 * np.pi, dtype=raw.dtype))
    )
    a = log_pi + log_comp
    a_max = a.max(axis=1, keepdims=True)
    lse = a_max[:, 0] + np.log(np.exp(a - a_max).sum(axis=1))
    loss = float(-lse.mean())

    r = np.exp(a - lse[:, None])  # responsibilities, rows sum to 1
    scale = 1.0 / m
    d_logits = (pi - r) * scale
    d_mu = (-r[:, :, None] * z / sigma) * scale
    d_logsig = np.where(floored, 0.0, r[:, :, None] * (1.0 - z * z) * scale)

    grad = np.empty_like(raw)
    grad[:, :k] = d_logits
    grad[:, k : k + k * n] = d_mu.reshape(m, k * n)
    grad[:, k + k * n :] = d_logsig.reshape(m, k * n)
    return loss, grad


def backward(cache: ForwardCache, weights: Weights, cfg: ModelConfig) -> Weights:
    """Exact BPTT gradients of the mean NLL, congruent to ``weights``.

    Raises if the cache was produced by different weights or the arrays
    have been updated since the forward pass.
    """
    if cache.weights is not weights or cache.weights_version != weights.version:
        raise ValueError("cache is stale: it was not produced by these weights")
    if cache.cfg is not cfg and cache.cfg.to_dict() != cfg.to_dict():
        raise ValueError("cache was produced under a different config")

    batch, steps, _ = cache.inputs.shape
    units = cfg.units
    grads = weights.zeros_like()

    flat_h = cache.hidden[-1].reshape(batch * steps, units)
    grads.head_kernel[:] = flat_h.T @ cache.head_grad
    grads.head_bias[:] = cache.head_grad.sum(axis=0)
    d_hidden = (cache.head_grad @ weights.head_kernel.T).reshape(batch, steps, units)

    for li in reversed(range(cfg.layers)):
        layer = weights.layers[li]
        I, F, G, O = cache.gates[li]
        C = cache.cells[li]
        H = cache.hidden[li]
        X = cache.layer_inputs[li]
        dtype = H.dtype

        dZ = np.empty((batch, steps, 4 * units), dtype=dtype)
        dh_rec = np.zeros((batch, units), dtype=dtype)
        dc = np.zeros((batch, units), dtype=dtype)
        for t in reversed(range(steps)):
            i, f, g, o, c = I[:, t], F[:, t], G[:, t], O[:, t], C[:, t]
            tc = np.tanh(c)
            dh = d_hidden[:, t] + dh_rec
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            c_prev = C[:, t - 1] if t > 0 else np.zeros_like(c)
            df = dc * c_prev
            dz = dZ[:, t]
            dz[:, :units] = di * i * (1.0 - i)
            dz[:, units : 2 * units] = df * f * (1.0 - f)
            dz[:, 2 * units : 3 * units] = dg * (1.0 - g * g)
            dz[:, 3 * units :] = do * o * (1.0 - o)
            dh_rec = dz @ layer.recurrent.T
            h_prev = H[:, t - 1] if t > 0 else np.zeros_like(dh_rec)
            grads.layers[li].recurrent += h_prev.T @ dz
            dc = dc * f

        flat_x = X.reshape(batch * steps, X.shape[2])
        flat_dz = dZ.reshape(batch * steps, 4 * units)
        grads.layers[li].kernel[:] = flat_x.T @ flat_dz
        grads.layers[li].bias[:] = flat_dz.sum(axis=0)
        if li > 0:
            d_hidden = (flat_dz @ layer.kernel.T).reshape(batch, steps, X.shape[2])

    return grads
