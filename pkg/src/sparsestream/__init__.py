"""Online feature selection over sparse streaming features.

Buffered blocks of incoming columns are completed by latent factor analysis,
then screened with conditional-independence tests whose significance
threshold tracks the block's missing rate.
"""

__version__ = "0.1.0"

from .citests import CiResult, fisher_z_test, g2_test, partial_correlation
from .data import Dataset, GroundTruth, MaskSpec, generate_synthetic, load_csv, sparsify, split_folds, stream_columns
from .errors import DegenerateInputWarning, DivergenceError, ParseError, ValidationError
from .evaluation import EvalReport, WilcoxonResult, cross_validate, knn_predict, wilcoxon_signed_ranks
from .fuzzy import AlphaBand, TrapezoidParams, fuzzy_alpha, gaussian_mf, trapezoidal_mf, triangular_mf
from .lfa import FeatureBlock, LatentFactorPair, LfaConfig, complete, entry_loss, sgd_epoch, train
from .nrs import NeighborhoodSpace
from .selector import SelectionState, SelectorConfig, Verdict, classify_relevance, run

__all__ = [
    "AlphaBand", "CiResult", "Dataset", "DegenerateInputWarning", "DivergenceError", "EvalReport",
    "FeatureBlock", "GroundTruth", "LatentFactorPair", "LfaConfig", "MaskSpec", "NeighborhoodSpace",
    "ParseError", "SelectionState", "SelectorConfig", "TrapezoidParams", "ValidationError", "Verdict",
    "WilcoxonResult", "classify_relevance", "complete", "cross_validate", "entry_loss", "fisher_z_test",
    "fuzzy_alpha", "g2_test", "gaussian_mf", "generate_synthetic", "knn_predict", "load_csv",
    "partial_correlation", "run", "sgd_epoch", "sparsify", "split_folds", "stream_columns", "train",
    "trapezoidal_mf", "triangular_mf", "wilcoxon_signed_ranks",
]
