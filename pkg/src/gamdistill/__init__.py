"""Distill feature interactions from black-box tabular predictors into
interpretable boosted GAMs."""

from .data import (
    BaselineVector,
    BinningSpec,
    Dataset,
    baseline_vector,
    build_bins,
    from_arrays,
    load_csv,
    split,
)
from .distill import DistillConfig, InteractionRanking, distill
from .fourier import FourierSurrogate, brute_force_wht, eval_surrogate, fit_surrogate, parity
from .gam import GamModel, GamTrainConfig, fast_select_pairs, fit_gam, predict_gam, term_contribution
from .indices import IndexScores, SetFunction, fbii_from_fourier, restrict_surrogate
from .learners import (
    connect_external,
    train_cart,
    train_forest,
    train_gbt,
    train_knn,
    train_ridge_cv,
)

__version__ = "0.1.0"
