"""Deep probabilistic movement primitives.

A bank of encoders turns every via-point (phase, configuration) and every
context vector into a Gaussian message about the latent motion variable z.
Messages are fused with the standard-normal prior in closed form, and a
decoder network maps (z, phase) to the mean configuration. Training
maximises the ELBO with a single reparameterised sample per example and a
linearly annealed KL weight.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .data import SubsamplePolicy, subsample_conditioning
from .latent import (VAR_FLOOR, DiagGaussian, LatentObservation, blend_params, fuse, kl_terms,
                     standard_prior)
from .nn import AdamState, MlpParams, ShapeError, adam_step, init_mlp, mlp_forward
from .phase import LINEAR, phase, phase_width

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "deeppromp.checkpoint"
CHECKPOINT_VERSION = 1
LOG_2PI = np.log(2.0 * np.pi)


class ChannelError(KeyError):
    pass


@dataclass(frozen=True)
class MotionPosterior(DiagGaussian):
    phase_mode: str = LINEAR


@dataclass
class TrainingConfig:
    latent_dim: int = 16
    hidden: int = 128
    hidden_layers: int = 2
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 2000
    beta_max: float = 1.0
    anneal_fraction: float = 0.2
    sigma_y: float = 0.05
    kl_mode: str = "aggregate"
    min_points: int = 1
    max_points: int = 10
    channel_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("latent_dim", "hidden", "hidden_layers", "batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0 or self.sigma_y <= 0 or self.beta_max < 0:
            raise ValueError("lr and sigma_y must be positive, beta_max non-negative")
        if not 0.0 <= self.anneal_fraction <= 1.0:
            raise ValueError("anneal_fraction must be in [0, 1]")
        if self.kl_mode not in ("aggregate", "per_observation"):
            raise ValueError(f"unknown kl_mode {self.kl_mode!r}")
        self.policy()

    def policy(self):
        return SubsamplePolicy(self.min_points, self.max_points, self.channel_prob)

    def digest(self):
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


def beta_schedule(epoch, config):
    """KL weight for a 0-based epoch: linear ramp from 0 to ``beta_max``."""
    ramp = config.anneal_fraction * config.epochs
    if ramp <= 0:
        return config.beta_max
    return config.beta_max * min(1.0, epoch / ramp)


class DeepProMP:
    """Encoder bank, shared affine head and Gaussian decoder."""

    def __init__(self, dim, channels, latent_dim=16, phase_mode=LINEAR, hidden=128,
                 hidden_layers=2, sigma_y=0.05, rng=None, params=None):
        if sigma_y <= 0:
            raise ValueError("sigma_y must be positive")
        self.dim = int(dim)
        self.channels = {k: int(v) for k, v in sorted(dict(channels).items())}
        self.latent_dim = int(latent_dim)
        self.phase_mode = phase_mode
        self.x_dim = phase_width(phase_mode)
        self.hidden = int(hidden)
        self.hidden_layers = int(hidden_layers)
        self.sigma_y = float(sigma_y)
        self.config = None
        self.loss_trace = []
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            params = self._init_params(rng)
        self.params = params

    def _init_params(self, rng):
        h, nh, L = self.hidden, self.hidden_layers, self.latent_dim
        trunk = [h] * nh
        params = {"enc/via": init_mlp([self.x_dim + self.dim] + trunk, rng)}
        for name, width in self.channels.items():
            params[f"enc/ctx/{name}"] = init_mlp([width] + trunk, rng)
        params["head/mean"] = init_mlp([h, L], rng)
        params["head/var"] = init_mlp([h, L], rng)
        params["decoder"] = init_mlp([L + self.x_dim] + trunk + [self.dim], rng)
        return params

    # parameter plumbing -------------------------------------------------

    def param_names(self):
        return sorted(self.params)

    def param_arrays(self):
        return [a for k in self.param_names() for a in self.params[k].arrays()]

    def unflatten(self, arrays):
        out, i = {}, 0
        for k in self.param_names():
            n = 2 * len(self.params[k].weights)
            out[k] = MlpParams.from_arrays(arrays[i:i + n])
            i += n
        return out

    def set_param_arrays(self, arrays):
        self.params = self.unflatten(arrays)

    def n_params(self):
        return sum(a.size for a in self.param_arrays())

    # encoders -----------------------------------------------------------

    def phase(self, t, T):
        return phase(t, T, self.phase_mode)

    def _check_x(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None] if self.x_dim == 1 else x[None, :]
        if x.shape[-1] != self.x_dim:
            raise ShapeError(f"phase width {x.shape[-1]} != {self.x_dim} for {self.phase_mode} mode")
        return x

    def _check_y(self, y, n):
        y = np.asarray(y, dtype=np.float64).reshape(n, -1)
        if y.shape[1] != self.dim:
            raise ShapeError(f"configuration dimension {y.shape[1]} != {self.dim}")
        return y

    def encode_viapoints(self, x, y):
        """Messages for a batch of via-points; returns (mean, var) of shape (n, L)."""
        x = self._check_x(x)
        y = self._check_y(y, x.shape[0])
        return encode(self.params, "enc/via", np.concatenate([x, y], axis=1))

    def encode_viapoint(self, x, y):
        mean, var = self.encode_viapoints(np.reshape(x, (1, -1)), np.reshape(y, (1, -1)))
        return LatentObservation(mean[0], var[0], "via_point")

    def encode_context(self, channel, c):
        if channel not in self.channels:
            raise ChannelError(f"unknown context channel {channel!r}; model has {sorted(self.channels)}")
        c = np.asarray(c, dtype=np.float64).reshape(1, -1)
        if c.shape[1] != self.channels[channel]:
            raise ShapeError(f"channel {channel!r} expects width {self.channels[channel]}, got {c.shape[1]}")
        mean, var = encode(self.params, f"enc/ctx/{channel}", c)
        return LatentObservation(mean[0], var[0], channel)

    def posterior(self, via_x=None, via_y=None, contexts=None, via_weights=None, context_weights=None):
        """Aggregated posterior over z from optional via-points and context channels."""
        means, variances, weights = [], [], []
        if via_x is not None and len(via_x):
            m, v = self.encode_viapoints(via_x, via_y)
            means.append(m)
            variances.append(v)
            w = np.ones(len(m)) if via_weights is None else np.asarray(via_weights, float).reshape(-1)
            if w.size != len(m):
                raise ValueError(f"{w.size} via-point weights for {len(m)} via-points")
            weights.append(w)
        for name, c in sorted((contexts or {}).items()):
            obs = self.encode_context(name, c)
            means.append(obs.mean[None])
            variances.append(obs.var[None])
            weights.append(np.array([1.0 if context_weights is None else context_weights.get(name, 1.0)]))
        prior = standard_prior(self.latent_dim)
        if not means:
            return MotionPosterior(prior.mean, prior.var, self.phase_mode)
        w = np.concatenate(weights)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("importance weights must be finite and non-negative")
        mean, var = fuse(prior.mean, prior.var, np.concatenate(means), np.concatenate(variances),
                         w[:, None], axis=0)
        return MotionPosterior(mean, var, self.phase_mode)

    # decoder ------------------------------------------------------------

    def decode_rows(self, z, x):
        """Decode paired rows ``z[i], x[i]``. Identical rows give bit-identical outputs."""
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        x = self._check_x(x)
        if z.shape[1] != self.latent_dim or z.shape[0] != x.shape[0]:
            raise ShapeError(f"z {z.shape} does not pair with phases {x.shape}")
        inputs = np.concatenate([z, x], axis=1)
        uniq, inverse = np.unique(inputs, axis=0, return_inverse=True)
        return mlp_forward(self.params["decoder"], uniq)[inverse.reshape(-1)]

    def decode(self, z, x):
        """Mean configuration; z of shape (L,) gives (n, d), (k, L) gives (k, n, d)."""
        x = self._check_x(x)
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.latent_dim:
            raise ShapeError(f"latent width {z.shape[-1]} != {self.latent_dim}")
        if z.ndim == 1:
            return self.decode_rows(np.broadcast_to(z, (x.shape[0], z.size)), x)
        k, n = z.shape[0], x.shape[0]
        rows = self.decode_rows(np.repeat(z, n, axis=0), np.tile(x, (k, 1)))
        return rows.reshape(k, n, self.dim)

    # persistence --------------------------------------------------------

    def to_dict(self):
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "kind": "deeppromp",
            "phase_mode": self.phase_mode,
            "dim": self.dim,
            "latent_dim": self.latent_dim,
            "hidden": self.hidden,
            "hidden_layers": self.hidden_layers,
            "sigma_y": self.sigma_y,
            "channels": self.channels,
            "config": asdict(self.config) if self.config else None,
            "config_hash": self.config.digest() if self.config else None,
            "loss_trace": list(self.loss_trace),
            "params": {k: v.to_dict() for k, v in sorted(self.params.items())},
        }

    @classmethod
    def from_dict(cls, d):
        params = {k: MlpParams.from_dict(v) for k, v in d["params"].items()}
        model = cls(d["dim"], d["channels"], d["latent_dim"], d["phase_mode"], d["hidden"],
                    d["hidden_layers"], d["sigma_y"], params=params)
        model.config = TrainingConfig(**d["config"]) if d.get("config") else None
        model.loss_trace = list(d.get("loss_trace", []))
        return model


def encode(params, trunk, inputs):
    """Trunk network, ReLU, then the shared mean / variance heads.

    Works on arrays or Tensors; ``inputs`` is (rows, width).
    """
    h = ad.relu(mlp_forward(params[trunk], inputs))
    mean = mlp_forward(params["head/mean"], h)
    var = ad.softplus(mlp_forward(params["head/var"], h)) + VAR_FLOOR
    return mean, var


# batched ELBO ------------------------------------------------------------

@dataclass
class Batch:
    """Padded training arrays for B demonstrations.

    ``x``/``y``/``mask``: targets (B, P, ·); ``via_in``/``via_w``: gathered
    via-point inputs (B, n_max, x+d) and 0/1 weights (B, n_max);
    ``contexts``: name -> (values (B, w), weights (B,)); ``noise``: (B, L).
    """

    x: np.ndarray
    y: np.ndarray
    mask: np.ndarray
    via_in: np.ndarray
    via_w: np.ndarray
    contexts: dict
    noise: np.ndarray = field(default=None)


def make_batch(demos, selections, phase_mode, latent_dim, noise):
    """Assemble a Batch from demos and per-demo ``(via_indices, channels)``."""
    B = len(demos)
    P = max(d.t.size for d in demos)
    xw = phase_width(phase_mode)
    d = demos[0].dim
    x = np.zeros((B, P, xw))
    y = np.zeros((B, P, d))
    mask = np.zeros((B, P))
    n_max = max(1, max(len(s[0]) for s in selections))
    via_in = np.zeros((B, n_max, xw + d))
    via_w = np.zeros((B, n_max))
    names = sorted(demos[0].contexts)
    contexts = {k: (np.zeros((B, demos[0].contexts[k].size)), np.zeros(B)) for k in names}
    for b, (demo, (via, chans)) in enumerate(zip(demos, selections)):
        n = demo.t.size
        xb = demo.phases(phase_mode)
        x[b, :n], y[b, :n], mask[b, :n] = xb, demo.y, 1.0
        via = np.asarray(via, dtype=int)
        via_in[b, :via.size] = np.concatenate([xb[via], demo.y[via]], axis=1)
        via_w[b, :via.size] = 1.0
        for k in names:
            contexts[k][0][b] = demo.contexts[k]
            if k in chans:
                contexts[k][1][b] = 1.0
    return Batch(x, y, mask, via_in, via_w, contexts, noise)


def batch_posterior(params, batch, latent_dim):
    """Per-example messages and fused posterior; arrays or Tensors."""
    B, n_max, width = batch.via_in.shape
    L = latent_dim
    m, v = encode(params, "enc/via", batch.via_in.reshape(B * n_max, width))
    means = [ad.reshape(m, (B, n_max, L))]
    variances = [ad.reshape(v, (B, n_max, L))]
    weights = [batch.via_w]
    for name, (values, w) in sorted(batch.contexts.items()):
        m, v = encode(params, f"enc/ctx/{name}", values)
        means.append(ad.reshape(m, (B, 1, L)))
        variances.append(ad.reshape(v, (B, 1, L)))
        weights.append(w[:, None])
    means = ad.concat(means, axis=1)
    variances = ad.concat(variances, axis=1)
    weights = np.concatenate(weights, axis=1)[:, :, None]
    mean, var = fuse(np.zeros(L), np.ones(L), means, variances, weights, axis=1)
    return mean, var, (means, variances, weights)


def reconstruction_nll(decoder, z, x, y, mask, sigma_y):
    """Gaussian negative log-likelihood of targets, summed per example.

    z: (B, L); x: (B, P, xw); y: (B, P, d); mask: (B, P). Returns (B,).
    """
    B, P, xw = x.shape
    d = y.shape[2]
    L = ad.value_of(z).shape[1]
    z_rows = ad.reshape(z, (B, 1, L)) * np.ones((1, P, 1))
    inputs = ad.reshape(ad.concat([z_rows, x], axis=2), (B * P, L + xw))
    out = ad.reshape(mlp_forward(decoder, inputs), (B, P, d))
    sq = ad.tsum(ad.square(y - out), axis=2) * mask
    n = mask.sum(axis=1)
    const = n * d * (np.log(sigma_y) + 0.5 * LOG_2PI)
    return ad.tsum(sq, axis=1) / (2.0 * sigma_y ** 2) + const


def per_observation_kl(mean, var, means, variances, weights):
    """Sum over messages of E_q[log q_i(z) - log p0(z)], weighted; shape (B,)."""
    B, N, L = ad.value_of(means).shape
    mq = ad.reshape(mean, (B, 1, L))
    vq = ad.reshape(var, (B, 1, L))
    diff = mq - means
    log_qi = -0.5 * (ad.log(variances) + (ad.square(diff) + vq) / variances)
    log_p0 = -0.5 * (ad.square(mq) + vq)
    terms = ad.tsum((log_qi - log_p0) * weights, axis=2)
    return ad.tsum(terms, axis=1)


def batch_loss(params, batch, latent_dim, sigma_y, beta, kl_mode="aggregate"):
    """Mean negative ELBO over the batch (array or Tensor)."""
    mean, var, messages = batch_posterior(params, batch, latent_dim)
    z = mean + batch.noise * ad.sqrt(var)
    rec = reconstruction_nll(params["decoder"], z, batch.x, batch.y, batch.mask, sigma_y)
    if kl_mode == "aggregate":
        kl = ad.tsum(kl_terms(mean, var), axis=1)
    else:
        kl = per_observation_kl(mean, var, *messages)
    B = batch.x.shape[0]
    return ad.tsum(rec + beta * kl) / float(B)


def elbo_loss(model, demo, via_indices, channels, beta, noise=None, rng=None, kl_mode="aggregate"):
    """Negative ELBO of one demonstration and its gradients w.r.t. all parameters.

    The reparameterisation noise is drawn from ``rng`` unless given.
    Returns ``(loss, grads)`` with grads ordered like ``model.param_arrays()``.
    """
    for c in channels:
        if c not in model.channels:
            raise ChannelError(f"unknown context channel {c!r}")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if noise is None:
        rng = rng if rng is not None else np.random.default_rng()
        noise = rng.standard_normal(model.latent_dim)
    batch = make_batch([demo], [(via_indices, set(channels))], model.phase_mode,
                       model.latent_dim, np.reshape(noise, (1, -1)))
    return ad.grad(lambda ps: batch_loss(model.unflatten(ps), batch, model.latent_dim,
                                         model.sigma_y, beta, kl_mode),
                   model.param_arrays())


def train(dataset, config=None, callback=None):
    """Fit a DeepProMP by minimising the mean negative ELBO with Adam.

    Each example draws its own conditioning set (see
    :class:`~deeppromp.data.SubsamplePolicy`) and its own latent noise;
    the reconstruction targets are always the full demonstration.
    The per-epoch mean loss is stored in ``model.loss_trace``.
    """
    config = config or TrainingConfig()
    dataset.validate()
    widths = dataset.channel_widths()
    rng = np.random.default_rng(config.seed)
    model = DeepProMP(dataset.dim, widths, config.latent_dim, dataset.phase_mode, config.hidden,
                      config.hidden_layers, config.sigma_y, rng=rng)
    model.config = config
    policy = config.policy()
    arrays = model.param_arrays()
    opt = AdamState.for_params(arrays, lr=config.lr)
    demos = dataset.demos
    for epoch in range(config.epochs):
        beta = beta_schedule(epoch, config)
        order = rng.permutation(len(demos))
        total, count = 0.0, 0
        for start in range(0, len(demos), config.batch_size):
            idx = order[start:start + config.batch_size]
            chunk = [demos[i] for i in idx]
            sel = [subsample_conditioning(d, policy, rng)[:2] for d in chunk]
            noise = rng.standard_normal((len(chunk), config.latent_dim))
            batch = make_batch(chunk, sel, model.phase_mode, config.latent_dim, noise)

            def loss_fn(ps):
                return batch_loss(model.unflatten(ps), batch, config.latent_dim,
                                  config.sigma_y, beta, config.kl_mode)

            loss, grads = ad.grad(loss_fn, arrays)
            arrays, opt = adam_step(opt, arrays, grads)
            total += loss * len(chunk)
            count += len(chunk)
        model.loss_trace.append(total / count)
        if callback is not None:
            model.set_param_arrays(arrays)
            callback(epoch, model)
        if epoch % max(1, config.epochs // 10) == 0:
            log.info("epoch %d beta %.3f loss %.4f", epoch, beta, model.loss_trace[-1])
    model.set_param_arrays(arrays)
    return model


# operations ---------------------------------------------------------------

@dataclass
class TrajectoryDistribution:
    mean: np.ndarray
    var: np.ndarray
    samples: np.ndarray
    posterior: MotionPosterior


def generate(model, q, x, noise):
    """One trajectory from a single latent draw ``z = mean + noise * std``, held fixed."""
    z = q.mean + np.asarray(noise, dtype=np.float64) * q.std
    x = model._check_x(x)
    return model.decode_rows(np.broadcast_to(z, (x.shape[0], z.size)), x)


def condition(model, via_x=None, via_y=None, contexts=None, x=None, k=32, rng=None,
              via_weights=None, context_weights=None):
    """Monte-Carlo predictive mean and variance of y(x) given via-points and/or contexts."""
    if (via_x is None or not len(via_x)) and not contexts:
        raise ValueError("nothing to condition on; use generate() with the prior instead")
    q = model.posterior(via_x, via_y, contexts, via_weights, context_weights)
    rng = rng if rng is not None else np.random.default_rng(0)
    noise = rng.standard_normal((k, model.latent_dim))
    samples = np.stack([generate(model, q, x, e) for e in noise])
    return TrajectoryDistribution(samples.mean(axis=0), samples.var(axis=0), samples, q)


@dataclass
class RefineResult:
    posterior: MotionPosterior
    objective: list
    error: list


def _mc_decode(decoder, mu, std, eps, x):
    """Average of decoder outputs over z_j = mu + eps_j * std; (n, d)."""
    k, L = eps.shape
    n = x.shape[0]
    z = mu + eps * std
    z_rows = ad.reshape(z, (k, 1, L)) * np.ones((1, n, 1))
    inputs = ad.reshape(ad.concat([z_rows, np.broadcast_to(x, (k, n, x.shape[1]))], axis=2),
                        (k * n, L + x.shape[1]))
    out = mlp_forward(decoder, inputs)
    return ad.tsum(ad.reshape(out, (k, n, -1)), axis=0) / float(k)


def refine_objective(model, via_x, via_y, eps, sigma_star):
    """Loss on ``[mu, std]``: squared via-point misfit of the MC mean plus a std anchor."""
    decoder = model.params["decoder"]

    def objective(ps):
        mu, std = ps
        pred = _mc_decode(decoder, mu, std, eps, via_x)
        return ad.tsum(ad.square(via_y - pred)) + ad.tsum(ad.square(sigma_star - std))

    return objective


def refine_viapoints(model, init, via_x, via_y, k=32, steps=200, sigma_star=None, lr=3e-2,
                     beta2=0.9, rng=None, max_halvings=30):
    """Gradient refinement of the posterior's mean and standard deviation.

    Uses Adam directions with backtracking: a proposal that raises the
    objective is retried at half the step, so the objective trace never
    increases. Stds are projected onto the variance floor. The k noise
    draws are fixed up front.
    """
    if k < 1 or steps < 0:
        raise ValueError("need k >= 1 and steps >= 0")
    via_x = model._check_x(via_x)
    via_y = model._check_y(via_y, via_x.shape[0])
    rng = rng if rng is not None else np.random.default_rng(0)
    eps = rng.standard_normal((k, model.latent_dim))
    sigma_star = init.std.copy() if sigma_star is None else np.asarray(sigma_star, dtype=np.float64)
    if sigma_star.shape != init.std.shape or np.any(sigma_star <= 0):
        raise ValueError("sigma_star must be a positive vector of latent width")
    objective = refine_objective(model, via_x, via_y, eps, sigma_star)
    min_std = np.sqrt(VAR_FLOOR)
    params = [init.mean.copy(), init.std.copy()]

    def misfit(ps):
        pred = _mc_decode(model.params["decoder"], ps[0], ps[1], eps, via_x)
        return float(np.max(np.abs(via_y - pred)))

    f, g = ad.grad(objective, params)
    trace, errors = [f], [misfit(params)]
    opt = AdamState.for_params(params, lr=lr, beta2=beta2)
    for _ in range(steps):
        opt.step += 1
        c1 = 1.0 - opt.beta1 ** opt.step
        c2 = 1.0 - opt.beta2 ** opt.step
        direction = []
        for i in range(2):
            opt.m[i] = opt.beta1 * opt.m[i] + (1 - opt.beta1) * g[i]
            opt.v[i] = opt.beta2 * opt.v[i] + (1 - opt.beta2) * g[i] ** 2
            direction.append((opt.m[i] / c1) / (np.sqrt(opt.v[i] / c2) + opt.eps))
        scale = lr
        for _ in range(max_halvings):
            trial = [params[0] - scale * direction[0],
                     np.maximum(params[1] - scale * direction[1], min_std)]
            f_trial = float(ad.value_of(objective(trial)))
            if np.isfinite(f_trial) and f_trial <= f:
                params = trial
                f, g = ad.grad(objective, params)
                break
            scale *= 0.5
        trace.append(f)
        errors.append(misfit(params))
    q = MotionPosterior(params[0], params[1] ** 2, init.phase_mode)
    return RefineResult(q, trace, errors)


def blend_trajectories(model, q1, q2, omega, x, noise):
    """Trajectory under the time-varying product ``q1**w(t) * q2**(1 - w(t))``.

    A single noise vector is used for every time step, so z(t) moves
    continuously with the weight schedule.
    """
    x = model._check_x(x)
    w = np.asarray(omega, dtype=np.float64).reshape(-1)
    if w.size != x.shape[0]:
        raise ValueError(f"{w.size} blend weights for {x.shape[0]} time steps")
    if np.any(w < 0) or np.any(w > 1) or not np.all(np.isfinite(w)):
        raise ValueError("blend weights must lie in [0, 1]")
    z = blended_latents(q1, q2, w, noise)
    return model.decode_rows(z, x)


def blended_latents(q1, q2, w, noise):
    """z(t) for each weight in ``w``; endpoints reproduce q1 / q2 exactly."""
    w = np.asarray(w, dtype=np.float64)[:, None]
    noise = np.asarray(noise, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean, var = blend_params(q1.mean, q1.var, q2.mean, q2.var, w)
    std = np.sqrt(var)
    mean = np.where(w == 1.0, q1.mean, np.where(w == 0.0, q2.mean, mean))
    std = np.where(w == 1.0, q1.std, np.where(w == 0.0, q2.std, std))
    return mean + noise * std


