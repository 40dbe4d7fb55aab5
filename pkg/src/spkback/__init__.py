"""Speaker-embedding back-ends: two-covariance PLDA and cosine scoring,
CORAL/CORAL+ adaptation, distribution diagnostics, and detection metrics."""
from .core import (
    DataError,
    Embedding,
    EmbeddingSet,
    InvalidEmbeddingSet,
    NumericError,
    ScoreSet,
    SpkbackError,
    Trial,
    TrialList,
    validate_embedding_set,
)
from .plda import PldaFitConfig, PldaModel, fit_plda, llr_score, preprocess
from .scoring import Backend, cosine_score, score_trials
from .adaptation import AdaptConfig, coral_adapt_embeddings, coral_adapt_model, coral_plus_adapt_model
from .metrics import LabeledScores, det_points, eer, min_cprimary, min_dcf
from .diagnostics import diagnose
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
