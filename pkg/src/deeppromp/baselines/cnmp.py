"""CNMP-family baselines with a mean-aggregation encoder.

Every observation is one via-point concatenated with all context channels.
The ``joint`` padding needs every channel present; the ``indep`` padding
writes zeros into missing slots and appends one presence bit per slot
(via-point slot and each channel), so a context-only query is a single
observation with an all-zero via-point slot.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..data import SubsamplePolicy, subsample_conditioning
from ..latent import VAR_FLOOR, kl_terms
from ..model import LOG_2PI, TrainingConfig, beta_schedule, make_batch
from ..nn import AdamState, MlpParams, ShapeError, adam_step, init_mlp, mlp_forward
from ..phase import LINEAR, phase_width

log = logging.getLogger(__name__)

LOG_SIGMA_MIN = np.log(1e-3)
LOG_SIGMA_MAX = np.log(10.0)
VARIANTS = ("cnmp", "vae_cnmp")
PADDINGS = ("joint", "indep")


class CNMP:
    def __init__(self, dim, channels, variant="cnmp", padding="indep", latent_dim=16,
                 phase_mode=LINEAR, hidden=128, hidden_layers=2, rng=None, params=None):
        if variant not in VARIANTS or padding not in PADDINGS:
            raise ValueError(f"variant must be in {VARIANTS} and padding in {PADDINGS}")
        self.dim = int(dim)
        self.channels = {k: int(v) for k, v in sorted(dict(channels).items())}
        self.variant = variant
        self.padding = padding
        self.latent_dim = int(latent_dim)
        self.phase_mode = phase_mode
        self.x_dim = phase_width(phase_mode)
        self.hidden = int(hidden)
        self.hidden_layers = int(hidden_layers)
        self.config = None
        self.loss_trace = []
        if params is None:
            params = self._init_params(rng if rng is not None else np.random.default_rng(0))
        self.params = params

    @property
    def name(self):
        base = "CNMP" if self.variant == "cnmp" else "VAE-CNMP"
        return base + (" (Indep)" if self.padding == "indep" else "")

    @property
    def obs_width(self):
        bits = self.padding == "indep"
        return (self.x_dim + self.dim + bits) + sum(w + bits for w in self.channels.values())

    def _init_params(self, rng):
        h, L = self.hidden, self.latent_dim
        trunk = [h] * self.hidden_layers
        if self.variant == "cnmp":
            params = {"encoder": init_mlp([self.obs_width] + trunk + [L], rng)}
        else:
            params = {"encoder": init_mlp([self.obs_width] + trunk, rng),
                      "head/mean": init_mlp([h, L], rng),
                      "head/var": init_mlp([h, L], rng)}
        params["decoder"] = init_mlp([L + self.x_dim] + trunk + [2 * self.dim], rng)
        return params

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

    def to_dict(self):
        return {
            "kind": "cnmp", "variant": self.variant, "padding": self.padding, "dim": self.dim,
            "channels": self.channels, "latent_dim": self.latent_dim, "phase_mode": self.phase_mode,
            "hidden": self.hidden, "hidden_layers": self.hidden_layers,
            "config": asdict(self.config) if self.config else None,
            "config_hash": self.config.digest() if self.config else None,
            "loss_trace": list(self.loss_trace),
            "params": {k: v.to_dict() for k, v in sorted(self.params.items())},
        }

    @classmethod
    def from_dict(cls, d):
        params = {k: MlpParams.from_dict(v) for k, v in d["params"].items()}
        model = cls(d["dim"], d["channels"], d["variant"], d["padding"], d["latent_dim"],
                    d["phase_mode"], d["hidden"], d["hidden_layers"], params=params)
        model.config = TrainingConfig(**d["config"]) if d.get("config") else None
        model.loss_trace = list(d.get("loss_trace", []))
        return model


def observation_inputs(model, batch):
    """Encoder inputs (B, n_slots, width) and aggregation mask (B, n_slots)."""
    B, n_max, _ = batch.via_in.shape
    has_via = batch.via_w.sum(axis=1) > 0
    agg = batch.via_w.copy()
    agg[~has_via, 0] = 1.0
    parts = [batch.via_in * batch.via_w[:, :, None]]
    if model.padding == "indep":
        parts.append(batch.via_w[:, :, None])
    for name in sorted(model.channels):
        values, present = batch.contexts[name]
        slot = np.broadcast_to((values * present[:, None])[:, None, :], (B, n_max, values.shape[1]))
        parts.append(slot)
        if model.padding == "indep":
            parts.append(np.broadcast_to(present[:, None, None], (B, n_max, 1)))
    return np.concatenate(parts, axis=2), agg


def latent(model, params, batch):
    """Mean-aggregated representation; returns (mean, var) with var None for CNMP."""
    inputs, agg = observation_inputs(model, batch)
    B, n, w = inputs.shape
    feats = mlp_forward(params["encoder"], inputs.reshape(B * n, w))
    if model.variant == "vae_cnmp":
        feats = ad.relu(feats)
    width = ad.value_of(feats).shape[1]
    feats = ad.reshape(feats, (B, n, width))
    r = ad.tsum(feats * agg[:, :, None], axis=1) / agg.sum(axis=1, keepdims=True)
    if model.variant == "cnmp":
        return r, None
    mean = mlp_forward(params["head/mean"], r)
    var = ad.softplus(mlp_forward(params["head/var"], r)) + VAR_FLOOR
    return mean, var


def decode(model, params, z, x):
    """Predicted (mean, log_sigma), each (B, P, d); z (B, L), x (B, P, xw)."""
    B, P, xw = x.shape
    L = model.latent_dim
    z_rows = ad.reshape(z, (B, 1, L)) * np.ones((1, P, 1))
    inputs = ad.reshape(ad.concat([z_rows, x], axis=2), (B * P, L + xw))
    out = mlp_forward(params["decoder"], inputs)
    d = model.dim
    mean = ad.reshape(out[:, :d], (B, P, d))
    log_sigma = ad.clip(ad.reshape(out[:, d:], (B, P, d)), LOG_SIGMA_MIN, LOG_SIGMA_MAX)
    return mean, log_sigma


def batch_loss(model, params, batch, beta):
    mean, var = latent(model, params, batch)
    z = mean if var is None else mean + batch.noise * ad.sqrt(var)
    mu, log_sigma = decode(model, params, z, batch.x)
    nll = (0.5 * ad.square(batch.y - mu) * ad.exp(-2.0 * log_sigma) + log_sigma + 0.5 * LOG_2PI)
    per = ad.tsum(ad.tsum(nll, axis=2) * batch.mask, axis=1)
    if var is not None:
        per = per + beta * ad.tsum(kl_terms(mean, var), axis=1)
    return ad.tsum(per) / float(batch.x.shape[0])


def _selection(model, demo, policy, rng):
    if model.padding == "joint":
        n = demo.t.size
        k = int(rng.integers(max(1, policy.min_points), policy.max_points + 1))
        return np.sort(rng.choice(n, size=min(k, n), replace=False)), set(model.channels)
    via, chans, _ = subsample_conditioning(demo, policy, rng, channels=sorted(model.channels))
    return via, set(chans)


def cnmp_train(dataset, variant="cnmp", padding="indep", config=None, callback=None):
    """Fit a CNMP-family model on the Gaussian NLL (plus annealed KL for VAE-CNMP)."""
    config = config or TrainingConfig()
    dataset.validate()
    rng = np.random.default_rng(config.seed)
    model = CNMP(dataset.dim, dataset.channel_widths(), variant, padding, config.latent_dim,
                 dataset.phase_mode, config.hidden, config.hidden_layers, rng=rng)
    model.config = config
    policy = SubsamplePolicy(config.min_points, config.max_points, config.channel_prob)
    arrays = model.param_arrays()
    opt = AdamState.for_params(arrays, lr=config.lr)
    demos = dataset.demos
    for epoch in range(config.epochs):
        beta = beta_schedule(epoch, config)
        order = rng.permutation(len(demos))
        total = 0.0
        for start in range(0, len(demos), config.batch_size):
            chunk = [demos[i] for i in order[start:start + config.batch_size]]
            sel = [_selection(model, d, policy, rng) for d in chunk]
            noise = rng.standard_normal((len(chunk), config.latent_dim))
            batch = make_batch(chunk, sel, model.phase_mode, config.latent_dim, noise)
            loss, grads = ad.grad(lambda ps: batch_loss(model, model.unflatten(ps), batch, beta), arrays)
            arrays, opt = adam_step(opt, arrays, grads)
            total += loss * len(chunk)
        model.loss_trace.append(total / len(demos))
        if callback is not None:
            model.set_param_arrays(arrays)
            callback(epoch, model)
        if epoch % max(1, config.epochs // 10) == 0:
            log.info("%s epoch %d loss %.4f", model.name, epoch, model.loss_trace[-1])
    model.set_param_arrays(arrays)
    return model


class _Query:
    """Single-example batch for inference."""

    def __init__(self, model, via_x, via_y, contexts, x):
        n = 0 if via_x is None else len(via_x)
        via_in = np.zeros((1, max(1, n), model.x_dim + model.dim))
        via_w = np.zeros((1, max(1, n)))
        if n:
            via_in[0, :n] = np.concatenate([np.asarray(via_x, float).reshape(n, -1),
                                            np.asarray(via_y, float).reshape(n, -1)], axis=1)
            via_w[0, :n] = 1.0
        self.via_in, self.via_w = via_in, via_w
        self.contexts = {}
        for name, width in model.channels.items():
            if name in contexts:
                c = np.asarray(contexts[name], dtype=np.float64).reshape(1, -1)
                if c.shape[1] != width:
                    raise ShapeError(f"channel {name!r} expects width {width}")
                self.contexts[name] = (c, np.ones(1))
            else:
                self.contexts[name] = (np.zeros((1, width)), np.zeros(1))
        self.x = np.asarray(x, dtype=np.float64).reshape(1, -1, model.x_dim)


def cnmp_forward(model, via_x=None, via_y=None, contexts=None, x=None):
    """Predictive (mean, sigma) at phases ``x``; each (P, d).

    VAE-CNMP predictions use the latent mean.
    """
    contexts = dict(contexts or {})
    unknown = set(contexts) - set(model.channels)
    if unknown:
        raise ValueError(f"unknown context channels {sorted(unknown)}")
    n = 0 if via_x is None else len(via_x)
    if model.padding == "joint":
        missing = set(model.channels) - set(contexts)
        if missing or n == 0:
            raise ValueError(f"joint {model.name} needs via-points and every context channel; "
                             f"missing {sorted(missing) or 'via-points'}")
    if n == 0 and not contexts:
        raise ValueError("nothing to condition on")
    q = _Query(model, via_x, via_y, contexts, x)
    z, _ = latent(model, model.params, q)
    mean, log_sigma = decode(model, model.params, z, q.x)
    return mean[0], np.exp(log_sigma[0])


def cnmp_latent(model, via_x=None, via_y=None, contexts=None):
    """Aggregated latent (mean) for the given observations, shape (L,)."""
    q = _Query(model, via_x, via_y, dict(contexts or {}), np.zeros((1, model.x_dim)))
    z, _ = latent(model, model.params, q)
    return z[0]
