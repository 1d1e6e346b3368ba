"""Classic linear-Gaussian ProMP with radial-basis features over linear phase."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def rbf_features(x, n_basis, width=None):
    """Normalised Gaussian bases, centres uniform on [0, 1]; returns (n, K)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    centers = np.linspace(0.0, 1.0, n_basis)
    width = 1.0 / n_basis if width is None else width
    phi = np.exp(-0.5 * (x - centers) ** 2 / width ** 2)
    return phi / phi.sum(axis=1, keepdims=True)


@dataclass
class ProMP:
    """Weight distribution for ``y_j(x) = phi(x) @ w_j``, dims stacked as [w_1, ..., w_d].

    When fitted with context channels, ``ctx_mean``/``ctx_cov``/``cross_cov``
    hold the joint Gaussian moments of the contexts with the weights.
    """

    n_basis: int
    dim: int
    mean: np.ndarray
    cov: np.ndarray
    sigma_obs: float = 1e-3
    width: float = None
    ctx_names: tuple = ()
    ctx_mean: np.ndarray = None
    ctx_cov: np.ndarray = None
    cross_cov: np.ndarray = None

    def __post_init__(self):
        if self.n_basis < 2:
            raise ValueError("need at least two basis functions")
        if self.width is None:
            self.width = 1.0 / self.n_basis

    def design(self, x):
        """Block design matrix H with ``vec(y) = H @ w``; rows are dim-major."""
        phi = rbf_features(x, self.n_basis, self.width)
        return np.kron(np.eye(self.dim), phi)

    def mean_trajectory(self, x):
        phi = rbf_features(x, self.n_basis, self.width)
        return phi @ self.mean.reshape(self.dim, self.n_basis).T

    def trajectory_var(self, x):
        H = self.design(x)
        var = np.einsum("ij,jk,ik->i", H, self.cov, H) + self.sigma_obs ** 2
        return var.reshape(self.dim, -1).T

    def to_dict(self):
        return {
            "kind": "promp", "n_basis": self.n_basis, "dim": self.dim, "width": self.width,
            "sigma_obs": self.sigma_obs, "mean": self.mean.tolist(), "cov": self.cov.tolist(),
            "ctx_names": list(self.ctx_names),
            "ctx_mean": None if self.ctx_mean is None else self.ctx_mean.tolist(),
            "ctx_cov": None if self.ctx_cov is None else self.ctx_cov.tolist(),
            "cross_cov": None if self.cross_cov is None else self.cross_cov.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        arr = lambda v: None if v is None else np.array(v, dtype=np.float64)  # noqa: E731
        return cls(d["n_basis"], d["dim"], arr(d["mean"]), arr(d["cov"]), d["sigma_obs"], d["width"],
                   tuple(d["ctx_names"]), arr(d["ctx_mean"]), arr(d["ctx_cov"]), arr(d["cross_cov"]))


def fit_weights(x, y, n_basis, ridge=1e-6, width=None):
    """Ridge-regression weights for one demonstration; y is (n, d), returns (d*K,)."""
    phi = rbf_features(x, n_basis, width)
    A = phi.T @ phi + ridge * np.eye(n_basis)
    try:
        w = np.linalg.solve(A, phi.T @ np.asarray(y).reshape(len(phi), -1))
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"singular ProMP design: {exc}") from None
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("non-finite ProMP weights")
    return w.T.reshape(-1)


def promp_fit(dataset, n_basis=20, sigma_obs=1e-3, ridge=1e-6, context_channels=(), cov_jitter=1e-9):
    """Empirical weight moments over demonstrations, optionally jointly with contexts.

    ``cov_jitter * I`` is added to the weight covariance so that via-points
    outside the span of the demonstrations remain reachable.
    """
    if len(dataset) < 2:
        raise ValueError("ProMP estimation needs at least two demonstrations")
    if dataset.phase_mode != "linear":
        raise ValueError("the ProMP baseline supports linear phase only")
    W = np.stack([fit_weights(d.phases("linear")[:, 0], d.y, n_basis, ridge) for d in dataset])
    mean = W.mean(axis=0)
    cov = np.cov(W, rowvar=False).reshape(W.shape[1], W.shape[1])
    cov = 0.5 * (cov + cov.T) + cov_jitter * np.eye(cov.shape[0])
    model = ProMP(n_basis, dataset.dim, mean, cov, sigma_obs)
    names = tuple(sorted(context_channels))
    if names:
        C = np.stack([np.concatenate([d.contexts[k] for k in names]) for d in dataset])
        joint = np.cov(np.hstack([W, C]), rowvar=False)
        nw = W.shape[1]
        model.ctx_names = names
        model.ctx_mean = C.mean(axis=0)
        model.ctx_cov = joint[nw:, nw:]
        model.cross_cov = joint[:nw, nw:]
    return model


def _psd_sqrt(cov):
    lam, vec = np.linalg.eigh(cov)
    return vec * np.sqrt(np.clip(lam, 0.0, None))


def promp_condition(model, via_x, via_y, sigma_cond=1e-6):
    """Posterior ProMP after observing ``y(via_x) = via_y`` with noise ``sigma_cond``.

    Works in square-root form: with ``cov = L L^T`` and ``A = H L`` the update
    follows from the SVD of ``A``, which keeps the noiseless limit
    (``sigma_cond = 0`` is allowed) accurate and the covariance PSD.
    """
    if sigma_cond < 0:
        raise ValueError("sigma_cond must be non-negative")
    via_x = np.asarray(via_x, dtype=np.float64).reshape(-1)
    if np.any(via_x < 0) or np.any(via_x > 1):
        raise ValueError("via-point phases must lie in [0, 1]")
    via_y = np.asarray(via_y, dtype=np.float64).reshape(via_x.size, model.dim)
    H = model.design(via_x)
    residual = via_y.T.reshape(-1) - H @ model.mean
    L = _psd_sqrt(model.cov)
    U, s, Vt = np.linalg.svd(H @ L, full_matrices=True)
    r = s.size
    if sigma_cond > 0:
        gain = s / (s ** 2 + sigma_cond ** 2)
        kept = sigma_cond ** 2 / (s ** 2 + sigma_cond ** 2)
    else:
        live = s > s.max(initial=0.0) * max(H.shape) * np.finfo(float).eps
        gain = np.where(live, 1.0 / np.where(live, s, 1.0), 0.0)
        kept = np.where(live, 0.0, 1.0)
    LV = L @ Vt.T
    mean = model.mean + LV[:, :r] @ (gain * (U[:, :r].T @ residual))
    shrink = np.ones(LV.shape[1])
    shrink[:r] = kept
    cov = (LV * shrink) @ LV.T
    return ProMP(model.n_basis, model.dim, mean, 0.5 * (cov + cov.T), model.sigma_obs, model.width)


def promp_condition_context(model, contexts, sigma_cond=1e-6):
    """Condition the weight distribution on observed context channels."""
    if not model.ctx_names:
        raise ValueError("this ProMP was fitted without context channels")
    missing = [k for k in model.ctx_names if k not in contexts]
    if missing:
        raise ValueError(f"missing context channels {missing}")
    c = np.concatenate([np.asarray(contexts[k], dtype=np.float64).reshape(-1) for k in model.ctx_names])
    S = model.ctx_cov + sigma_cond ** 2 * np.eye(c.size)
    gain = np.linalg.lstsq(S, model.cross_cov.T, rcond=None)[0].T
    mean = model.mean + gain @ (c - model.ctx_mean)
    cov = model.cov - gain @ model.cross_cov.T
    return ProMP(model.n_basis, model.dim, mean, 0.5 * (cov + cov.T), model.sigma_obs, model.width)
