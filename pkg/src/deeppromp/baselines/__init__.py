from .cnmp import CNMP, cnmp_forward, cnmp_latent, cnmp_train
from .promp import ProMP, promp_condition, promp_condition_context, promp_fit, rbf_features

__all__ = ["CNMP", "ProMP", "cnmp_forward", "cnmp_latent", "cnmp_train", "promp_condition",
           "promp_condition_context", "promp_fit", "rbf_features"]
