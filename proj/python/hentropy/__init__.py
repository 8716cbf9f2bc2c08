"""Decision-aware Bayesian optimization: H-entropy search.

Thin Python layer over the C++ core. The main operations are exposed
directly from the compiled module.
"""

from ._core import (
    ConfigError,
    GpPosterior,
    LossSpec,
    __version__,
    alpine,
    bayes_action,
    ei_analytic,
    gradcheck,
    h_entropy,
    k_guesses_loss_spec,
    mlse_loss_spec,
    multihills,
    neg_value_loss_spec,
    optimize_ehig,
    pi_analytic,
    pom_score,
    raster_eval,
    run_experiment,
    sequence_loss_spec,
    smooth_max,
    topk_diversity_loss_spec,
    us_score,
)

__all__ = [
    "ConfigError",
    "GpPosterior",
    "LossSpec",
    "__version__",
    "alpine",
    "bayes_action",
    "ei_analytic",
    "gradcheck",
    "h_entropy",
    "k_guesses_loss_spec",
    "mlse_loss_spec",
    "multihills",
    "neg_value_loss_spec",
    "optimize_ehig",
    "pi_analytic",
    "pom_score",
    "raster_eval",
    "run_experiment",
    "sequence_loss_spec",
    "smooth_max",
    "topk_diversity_loss_spec",
    "us_score",
]
