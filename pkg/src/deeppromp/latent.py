"""Diagonal-Gaussian algebra over the latent motion variable z.

Fusion works in natural parameters: precisions add and precision-weighted
means add. The helpers ``fuse`` and ``blend_params`` accept numpy arrays or
autodiff Tensors, so the training code uses the exact same formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

VAR_FLOOR = 1e-6


@dataclass(frozen=True)
class DiagGaussian:
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        var = np.atleast_1d(np.asarray(self.var, dtype=np.float64))
        if mean.shape != var.shape or mean.ndim != 1:
            raise ValueError(f"mean {mean.shape} and variance {var.shape} must be equal-length vectors")
        if not np.all(var > 0):
            raise ValueError("variance entries must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @property
    def dim(self):
        return self.mean.size

    @property
    def std(self):
        return np.sqrt(self.var)

    @property
    def precision(self):
        return 1.0 / self.var


@dataclass(frozen=True)
class LatentObservation:
    """One Gaussian message about z, from a via-point or a context channel."""

    mean: np.ndarray
    var: np.ndarray
    source: str = "via_point"

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        var = np.asarray(self.var, dtype=np.float64)
        if mean.shape != var.shape or mean.ndim != 1:
            raise ValueError("observation mean and variance must be equal-length vectors")
        if not np.all(var > 0):
            raise ValueError("observation variance must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)


def standard_prior(dim):
    if dim < 1:
        raise ValueError("latent dimension must be >= 1")
    return DiagGaussian(np.zeros(dim), np.ones(dim))


def fuse(prior_mean, prior_var, means, variances, weights=None, axis=-2, floor=VAR_FLOOR):
    """Weighted product of a prior with stacked Gaussian messages.

    ``means``/``variances`` stack the messages along ``axis``; ``weights``
    (broadcastable, e.g. shape (..., n, 1)) scales each message's natural
    parameters. Returns ``(mean, var)`` with the variance floored.
    """
    prec_terms = 1.0 / variances
    info_terms = means * prec_terms
    if weights is not None:
        prec_terms = prec_terms * weights
        info_terms = info_terms * weights
    precision = 1.0 / prior_var + ad.tsum(prec_terms, axis=axis)
    info = prior_mean / prior_var + ad.tsum(info_terms, axis=axis)
    var = ad.maximum(1.0 / precision, floor)
    return info * var, var


def _stack(prior, obs):
    for o in obs:
        if o.mean.shape != prior.mean.shape:
            raise ValueError(f"observation of dim {o.mean.size} vs prior dim {prior.dim}")
    means = np.stack([o.mean for o in obs]) if obs else np.zeros((0, prior.dim))
    variances = np.stack([o.var for o in obs]) if obs else np.ones((0, prior.dim))
    return means, variances


def aggregate(prior, obs):
    """Bayesian aggregation: posterior proportional to prior times every message."""
    return aggregate_weighted(prior, obs, np.ones(len(obs)))


def aggregate_weighted(prior, obs, weights):
    """Aggregation with per-message importance exponents; the prior keeps weight 1."""
    obs = list(obs)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if weights.size != len(obs):
        raise ValueError(f"{weights.size} weights for {len(obs)} observations")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("importance weights must be finite and non-negative")
    if not obs:
        return prior
    means, variances = _stack(prior, obs)
    mean, var = fuse(prior.mean, prior.var, means, variances, weights[:, None], axis=0)
    return DiagGaussian(mean, var)


def blend_params(mean1, var1, mean2, var2, w, floor=VAR_FLOOR):
    """Normalised product ``q1**w * q2**(1-w)``; ``w`` may be an array of weights."""
    precision = w / var1 + (1.0 - w) / var2
    var = ad.maximum(1.0 / precision, floor)
    return (w * mean1 / var1 + (1.0 - w) * mean2 / var2) * var, var


def blend(q1, q2, w):
    if q1.mean.shape != q2.mean.shape:
        raise ValueError("cannot blend Gaussians of different dimension")
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"blend weight {w} outside [0, 1]")
    # exact endpoints; the closed form reproduces them only up to rounding
    if w == 1.0:
        return q1
    if w == 0.0:
        return q2
    mean, var = blend_params(q1.mean, q1.var, q2.mean, q2.var, w)
    return DiagGaussian(mean, var)


def sample(q, noise):
    """Reparameterised draw ``mean + noise * std``; ``noise`` may be (k, dim)."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape[-1] != q.dim:
        raise ValueError(f"noise width {noise.shape[-1]} != latent dim {q.dim}")
    return q.mean + noise * q.std


def kl_to_prior(q):
    """KL(q || N(0, I)) in closed form."""
    return float(np.sum(kl_terms(q.mean, q.var)))


def kl_terms(mean, var):
    return 0.5 * (var + mean * mean - 1.0 - ad.log(var))
