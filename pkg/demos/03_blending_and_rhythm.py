"""
Blending two motions, and rhythmic movement
===========================================

Two conditioned posteriors are blended with a weight that moves from the
first to the second over time. A second model is trained on periodic
phases and rolled out over several periods.
"""

import numpy as np

from deeppromp import DatasetSpec, TrainingConfig, blend_trajectories, generate, train
from deeppromp.data import generate as make_dataset

model = train(make_dataset(DatasetSpec(n_demos=200, seed=0)),
              TrainingConfig(epochs=1000, seed=0))
a, b = make_dataset(DatasetSpec(n_demos=2, seed=42)).demos
x = model.phase(np.linspace(0.0, 1.0, 101), 1.0)
qa = model.posterior(contexts={"params": a.contexts["params"]})
qb = model.posterior(contexts={"params": b.contexts["params"]})

noise = np.random.default_rng(3).standard_normal(model.latent_dim)
ones = np.ones(len(x))
print("omega = 1 is motion A:", np.array_equal(blend_trajectories(model, qa, qb, ones, x, noise),
                                              generate(model, qa, x, noise)))
print("omega = 0 is motion B:", np.array_equal(blend_trajectories(model, qa, qb, 0 * ones, x, noise),
                                              generate(model, qb, x, noise)))

# a linear ramp hands over from A to B
y = blend_trajectories(model, qa, qb, np.linspace(1.0, 0.0, len(x)), x, noise)
ya, yb = generate(model, qa, x, noise), generate(model, qb, x, noise)
print("start gap to A:", float(abs(y[0, 0] - ya[0, 0])), " end gap to B:", float(abs(y[-1, 0] - yb[-1, 0])))
print("largest step:  ", float(np.abs(np.diff(y[:, 0])).max()))

# rhythmic phase: (sin, cos) of the cycle fraction, so t and t + T coincide
rhythm = train(make_dataset(DatasetSpec(n_demos=200, seed=0, phase_mode="rhythmic")),
               TrainingConfig(epochs=1000, seed=0))
q = rhythm.posterior(contexts={"params": [1.0, 0.3, -0.1]})
t = np.linspace(0.0, 3.0, 601)
y = generate(rhythm, q, rhythm.phase(t, 1.0), noise)
print("periodic closure y(0) == y(T) == y(3T):", y[0, 0] == y[200, 0] == y[600, 0])
