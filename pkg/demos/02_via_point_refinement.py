"""
Refining a posterior until it hits the via-points
=================================================

Encoder aggregation gets close to a set of via-points but does not pass
through them exactly. Gradient refinement adjusts the posterior's mean and
standard deviation against the Monte-Carlo mean of the decoder.
"""

import numpy as np

from deeppromp import DatasetSpec, TrainingConfig, refine_viapoints, train
from deeppromp.data import generate as make_dataset

model = train(make_dataset(DatasetSpec(n_demos=200, seed=0)),
              TrainingConfig(epochs=1000, seed=0))

demo = make_dataset(DatasetSpec(n_demos=1, seed=7)).demos[0]
idx = np.sort(np.random.default_rng(1).choice(len(demo.y), 5, replace=False))
vx, vy = demo.phases("linear")[idx], demo.y[idx]

# the prior start is further away and usually needs more than 200 steps
for label, init in [("posterior", model.posterior(vx, vy)), ("prior", model.posterior())]:
    res = refine_viapoints(model, init, vx, vy, steps=200)
    print(f"from the {label}: max via-point error {res.error[0]:.2e} -> {res.error[-1]:.2e}")
    # the objective never goes up
    assert all(b <= a for a, b in zip(res.objective, res.objective[1:]))
