"""
Comparing against ProMP and CNMP baselines
==========================================

Every model is scored on the same held-out demonstrations under the four
conditioning modes. Modes a model cannot serve are reported as n/a.
"""

from deeppromp import DatasetSpec, TrainingConfig, train
from deeppromp.baselines import cnmp_train, promp_fit
from deeppromp.data import generate as make_dataset
from deeppromp.evaluate import evaluate

cfg = TrainingConfig(epochs=500, seed=0)
train_set = make_dataset(DatasetSpec(n_demos=200, seed=0))
test_set = make_dataset(DatasetSpec(n_demos=30, seed=1000))

models = [
    train(train_set, cfg),
    promp_fit(train_set, context_channels=("params",)),
    cnmp_train(train_set, "cnmp", "indep", cfg),
    cnmp_train(train_set, "vae_cnmp", "indep", cfg),
    cnmp_train(train_set, "cnmp", "joint", cfg),
]
report = evaluate(models, test_set, seed=0)
print(report.to_csv())
