"""
Generating and conditioning sine trajectories
=============================================

Train a small DeepProMP on the synthetic sine family, then draw from the
prior, condition on a couple of via-points, and condition on the
low-dimensional context alone.
"""

import numpy as np

from deeppromp import DatasetSpec, TrainingConfig, condition, generate, train
from deeppromp.data import generate as make_dataset

# 1000 epochs take about two minutes on one core; the acceptance suite
# trains for 2000.
data = make_dataset(DatasetSpec(n_demos=200, seed=0))
model = train(data, TrainingConfig(epochs=1000, seed=0))
print("final training loss:", round(model.loss_trace[-1], 3))

x = model.phase(np.linspace(0.0, 1.0, 101), 1.0)

# prior samples: one latent draw each, held fixed along the trajectory
rng = np.random.default_rng(0)
prior = model.posterior()
for i in range(3):
    y = generate(model, prior, x, rng.standard_normal(model.latent_dim))
    print(f"prior sample {i}: y(0)={y[0, 0]:+.3f}  y(0.5)={y[50, 0]:+.3f}  y(1)={y[-1, 0]:+.3f}")

# two via-points taken from a held-out demonstration
demo = make_dataset(DatasetSpec(n_demos=1, seed=123)).demos[0]
idx = [10, 35]
px = demo.phases("linear")
pred = condition(model, px[idx], demo.y[idx], x=px)
print("via-point targets:   ", demo.y[idx, 0].round(3))
print("conditioned mean:    ", pred.mean[idx, 0].round(3))
print("predictive std there:", np.sqrt(pred.var[idx, 0]).round(4))
print("whole-demo MSE:      ", float(np.mean((pred.mean - demo.y) ** 2)))

# contexts only: amplitude, phase and offset, plus the start point
ctx = {"params": demo.contexts["params"]}
pred = condition(model, px[:1], demo.y[:1], ctx, x=px)
print("context-conditioned MSE:", float(np.mean((pred.mean - demo.y) ** 2)))

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    fig, ax = plt.subplots()
    ax.plot(px[:, 0], demo.y[:, 0], "k--", label="demonstration")
    ax.plot(px[:, 0], pred.mean[:, 0], label="context-conditioned mean")
    ax.fill_between(px[:, 0], pred.mean[:, 0] - 2 * np.sqrt(pred.var[:, 0]),
                    pred.mean[:, 0] + 2 * np.sqrt(pred.var[:, 0]), alpha=0.3)
    ax.legend()
    fig.savefig("conditioning.svg")
