"""Multilayer perceptrons, Adam, and a finite-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad


class ShapeError(ValueError):
    pass


@dataclass
class MlpParams:
    """Weights ``W[i]`` of shape (in, out) and biases ``b[i]`` of shape (out,).

    Hidden layers use ReLU, the last layer is affine.
    """

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if np.ndim(w) != 2 or np.shape(b) != (np.shape(w)[1],):
                raise ShapeError(f"layer {i}: weight {np.shape(w)} / bias {np.shape(b)}")
            if i and np.shape(self.weights[i - 1])[1] != np.shape(w)[0]:
                raise ShapeError(f"layer {i} in-dim {np.shape(w)[0]} != previous out-dim")

    @property
    def in_dim(self):
        return np.shape(self.weights[0])[0]

    @property
    def out_dim(self):
        return np.shape(self.weights[-1])[1]

    @property
    def sizes(self):
        return [self.in_dim] + [np.shape(w)[1] for w in self.weights]

    def arrays(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_arrays(cls, arrays):
        return cls(list(arrays[0::2]), list(arrays[1::2]))

    def to_dict(self):
        return {
            "sizes": [int(s) for s in self.sizes],
            "weights": [np.asarray(w).ravel().tolist() for w in self.weights],
            "biases": [np.asarray(b).tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d):
        sizes = d["sizes"]
        weights = [np.array(w, dtype=np.float64).reshape(sizes[i], sizes[i + 1])
                   for i, w in enumerate(d["weights"])]
        biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
        return cls(weights, biases)


def init_mlp(sizes, rng, zero_last=False):
    """He-initialised MLP with zero biases. ``sizes`` = [in, hidden..., out]."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    if zero_last:
        weights[-1] = np.zeros_like(weights[-1])
    return MlpParams(weights, biases)


def mlp_forward(params, x):
    """Apply the network to ``x`` (a vector or a batch of row vectors).

    Works on plain arrays and on :class:`~deeppromp.autodiff.Tensor` values,
    so the same code serves inference and training.
    """
    squeeze = False
    if not isinstance(x, ad.Tensor):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x, squeeze = x[None, :], True
    if x.shape[-1] != params.in_dim:
        raise ShapeError(f"input width {x.shape[-1]} != network in-dim {params.in_dim}")
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = ad.relu(h)
    return h[0] if squeeze else h


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr=1e-3, **kw):
        return cls(lr=lr, m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], **kw)


def adam_step(state, params, grads):
    """One bias-corrected Adam update. Returns new params; ``state`` is updated in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state disagree in length")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"param {i}: shape {p.shape} vs grad {g.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        out.append(p - state.lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + state.eps))
    return out, state


def finite_diff_check(loss, params, step=1e-5, n_samples=None, rng=None, eps=None):
    """Largest relative gap between reverse-mode and central-difference gradients.

    ``loss`` maps a list of Tensors to a scalar Tensor (it must also accept
    plain arrays). With ``n_samples`` set, that many entries are drawn
    uniformly over all parameters; otherwise every entry is checked.
    The denominator floor ``eps`` defaults to ``1e5`` times the round-off
    bound ``machine_eps * max(1, |loss|) / step`` of the central difference.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    params = [np.array(p, dtype=np.float64) for p in params]
    f0, analytic = ad.grad(loss, params)
    if eps is None:
        eps = 1e5 * np.finfo(float).eps * max(1.0, abs(f0)) / step
    index = [(i, j) for i, p in enumerate(params) for j in range(p.size)]
    if n_samples is not None and n_samples < len(index):
        rng = rng if rng is not None else np.random.default_rng(0)
        picks = rng.choice(len(index), size=n_samples, replace=False)
        index = [index[k] for k in picks]

    def f(ps):
        return float(ad.value_of(loss(ps)))

    worst = 0.0
    for i, j in index:
        flat = params[i].reshape(-1)
        orig = flat[j]
        flat[j] = orig + step
        fp = f(params)
        flat[j] = orig - step
        fm = f(params)
        flat[j] = orig
        numeric = (fp - fm) / (2.0 * step)
        a = analytic[i].reshape(-1)[j]
        worst = max(worst, abs(a - numeric) / (abs(a) + abs(numeric) + eps))
    return worst
