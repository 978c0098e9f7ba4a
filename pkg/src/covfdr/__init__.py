"""Covariate-aware false discovery rate procedures, PCA covariate selection and simulations."""

from .core import (ConfusionCounts, CovariateMatrix, DimensionError, DiscoveryResult,
                   DomainError, HypothesisSet, NumericError, ValidationError, confusion)
from .pca import PcaModel, pc_score, pca_fit
from .pipeline import EvalReport, SweepResult, covariate_sweep, evaluate, monte_carlo, pc_select
from .procedures import (BocaLeekConfig, IhwConfig, bh, boca_leek, bonferroni, ihw_naive,
                         storey_pi0, storey_qvalues, weighted_bh)
from .simgen import SimDataset, pi0_fn, scenario1, scenario2, simulate

__version__ = "0.1.0"
