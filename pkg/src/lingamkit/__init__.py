"""DirectLiNGAM causal discovery with bootstrap reliability, SEM fit indices,
and the nonparametric condition-comparison battery for trial data."""

from .bootstrap import BootstrapSummary, bootstrap_fit, prune, resample, total_effects
from .dataset import DataMatrix, TrialRecord, describe, load_trials, spearman_matrix, standardize, to_matrix, vif
from .errors import ConfigError, ConstraintError, DataValidationError, LingamkitError, NumericError
from .lingam import (CausalModel, EntropyConstants, PriorKnowledge, entropy_approx, estimate_adjacency, fit,
                     independence_score, residual, residual_normality_audit, search_causal_order)
from .sem import FitIndices, baseline_chi_square, chi_square, fit_indices, implied_covariance
from .stats import bh_fdr, cles, compare_conditions, friedman, participant_condition_means, wilcoxon_signed_rank
from .synth import GroundTruthModel, generate, paper_shaped_fixture

__version__ = "0.1.0"
