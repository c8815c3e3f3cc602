"""Gaussian-mixture density head.

Turns a raw network output vector into the parameters of a
diagonal-covariance Gaussian mixture, evaluates the mixture's negative
log-likelihood, and draws samples with separate temperature controls on
the mixture weights and on the component scales.

All functions here are pure and operate on plain numpy arrays; callers
that share an RNG across threads must serialize access themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeMismatchError

# Scale floor applied after the exp activation; keeps densities bounded.
SIGMA_FLOOR = 1e-4

# Post-sampling clamps. The first model dimension is a time delta in
# seconds and must stay positive; all other dimensions live in [0, 1].
DT_CLAMP_MIN = 0.001
DT_CLAMP_MAX = 10.0


@dataclass
class MixtureParams:
    """GMM parameters for one prediction step.

    Attributes:
        pi: Mixing weights, shape ``(K,)``. Non-negative, sums to 1.
        mu: Component means, shape ``(K, N)``.
        sigma: Per-dimension scales, shape ``(K, N)``, strictly positive.
    """

    pi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    @property
    def n_components(self) -> int:
        return self.mu.shape[0]

    @property
    def dimension(self) -> int:
        return self.mu.shape[1]

    def validate(self) -> None:
        if self.mu.shape != self.sigma.shape:
            raise ShapeMismatchError(
                f"mu shape {self.mu.shape} != sigma shape {self.sigma.shape}"
            )
        if self.pi.shape != (self.mu.shape[0],):
            raise ShapeMismatchError(
                f"pi shape {self.pi.shape} does not match {self.mu.shape[0]} components"
            )
        if np.any(self.pi < 0) or abs(float(self.pi.sum()) - 1.0) > 1e-9:
            raise NumericError("pi must be a probability vector summing to 1")
        if np.any(self.sigma <= 0):
            raise NumericError("all sigma entries must be positive")


@dataclass
class SamplingConfig:
    """Temperature knobs for drawing predictions.

    ``pi_temperature`` divides the mixture-weight logits before the
    softmax; 0 degenerates to the argmax component.  ``sigma_temperature``
    multiplies the component standard deviations; 0 returns the selected
    component mean exactly.
    """

    pi_temperature: float = 1.0
    sigma_temperature: float = 1.0
    rng_seed: int | None = None

    def __post_init__(self) -> None:
        if self.pi_temperature < 0 or self.sigma_temperature < 0:
            raise ValueError("temperatures must be non-negative")

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


@dataclass
class SampleVector:
    """One model step: a time delta in seconds plus N-1 control values."""

    dt: float
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def as_array(self, dtype=np.float32) -> np.ndarray:
        return np.concatenate(([self.dt], self.values)).astype(dtype)

    @classmethod
    def from_array(cls, vec: np.ndarray) -> "SampleVector":
        return cls(dt=float(vec[0]), values=np.asarray(vec[1:], dtype=np.float64))


def raw_output_size(k: int, n: int) -> int:
    """Length of the raw head vector for K components over N dimensions."""
    return k * (2 * n + 1)


def split_params(raw: np.ndarray, k: int, n: int) -> MixtureParams:
    """Split a raw output vector into mixture parameters.

    Layout: the first K entries are weight logits (softmaxed), the next
    K*N are means (identity), the last K*N are log-scales (exp, floored
    at ``SIGMA_FLOOR``).

    Args:
        raw: Raw head output, shape ``(K*(2N+1),)``.
        k: Component count, >= 1.
        n: Data dimension, >= 1.
    """
    raw = np.asarray(raw)
    expected = raw_output_size(k, n)
    if raw.shape != (expected,):
        raise ShapeMismatchError(
            f"raw output must have length {expected} for K={k}, N={n}; got shape {raw.shape}"
        )
    logits = raw[:k].astype(np.float64)
    mu = raw[k : k + k * n].astype(np.float64).reshape(k, n)
    sigma = np.exp(raw[k + k * n :].astype(np.float64)).reshape(k, n)
    np.maximum(sigma, SIGMA_FLOOR, out=sigma)
    pi = _softmax(logits)
    return MixtureParams(pi=pi, mu=mu, sigma=sigma)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def mixture_nll(params: MixtureParams, target: np.ndarray) -> float:
    """Negative log-likelihood of ``target`` under the mixture.

    Evaluated in log space via log-sum-exp so that distant components
    cannot underflow the total density.
    """
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (params.dimension,):
        raise ShapeMismatchError(
            f"target must have length {params.dimension}; got shape {target.shape}"
        )
    if not (
        np.all(np.isfinite(target))
        and np.all(np.isfinite(params.mu))
        and np.all(np.isfinite(params.sigma))
        and np.all(np.isfinite(params.pi))
    ):
        raise NumericError("mixture_nll requires finite inputs")

    z = (target[None, :] - params.mu) / params.sigma  # (K, N)
    log_norm = -np.log(params.sigma).sum(axis=1) - 0.5 * params.dimension * np.log(2 * np.pi)
    log_comp = log_norm - 0.5 * np.sum(z * z, axis=1)  # (K,)
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.pi)
    return float(-_logsumexp(log_pi + log_comp))


def _logsumexp(a: np.ndarray) -> float:
    m = a.max()
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.exp(a - m).sum()))


def apply_pi_temperature(logits: np.ndarray, t: float) -> np.ndarray:
    """Temper mixture-weight logits.

    ``t > 0`` returns ``softmax(logits / t)``; ``t == 0`` returns a
    one-hot at the argmax (lowest index on ties).
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NumericError("logits must be finite")
    if t < 0:
        raise ValueError("pi temperature must be non-negative")
    if t == 0:
        out = np.zeros_like(logits)
        out[int(np.argmax(logits))] = 1.0
        return out
    return _softmax(logits / t)


def sample(
    params: MixtureParams,
    cfg: SamplingConfig,
    rng: np.random.Generator,
) -> SampleVector:
    """Draw one prediction from the mixture.

    Picks a component from the pi-tempered categorical, then draws each
    dimension from a normal with the component's mean and a standard
    deviation scaled by ``sigma_temperature``.  The first dimension (dt)
    is clamped to ``[DT_CLAMP_MIN, DT_CLAMP_MAX]`` and every other
    dimension to [0, 1], so any draw is a valid model step.
    """
    with np.errstate(divide="ignore"):
        logits = np.log(np.maximum(params.pi, 1e-300))
    probs = apply_pi_temperature(logits, cfg.pi_temperature)
    k = int(rng.choice(params.n_components, p=probs))
    noise = rng.standard_normal(params.dimension)
    vec = params.mu[k] + params.sigma[k] * cfg.sigma_temperature * noise
    dt = float(np.clip(vec[0], DT_CLAMP_MIN, DT_CLAMP_MAX))
    values = np.clip(vec[1:], 0.0, 1.0)
    return SampleVector(dt=dt, values=values)
