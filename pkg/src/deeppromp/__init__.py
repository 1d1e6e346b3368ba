"""Deep probabilistic movement primitives.

Bayesian latent aggregation over via-points and context channels, a
variationally trained Gaussian decoder, and the classic movement-primitive
operations (generation, conditioning, refinement, blending, temporal and
rhythmic modulation), with ProMP and CNMP-family baselines.
"""

from .data import Dataset, DatasetSpec, Demonstration, SubsamplePolicy, load_dataset, save_dataset
from .latent import DiagGaussian, LatentObservation, aggregate, aggregate_weighted, blend, kl_to_prior, sample, standard_prior
from .model import (DeepProMP, MotionPosterior, TrainingConfig, blend_trajectories, condition, elbo_loss,
                    generate, refine_viapoints, train)
from .phase import PhaseSpec, linear_phase, rhythmic_phase

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DatasetSpec", "DeepProMP", "Demonstration", "DiagGaussian", "LatentObservation",
    "MotionPosterior", "PhaseSpec", "SubsamplePolicy", "TrainingConfig", "aggregate",
    "aggregate_weighted", "blend", "blend_trajectories", "condition", "elbo_loss", "generate",
    "kl_to_prior", "linear_phase", "load_dataset", "refine_viapoints", "rhythmic_phase", "sample",
    "save_dataset", "standard_prior", "train",
]
