"""Regularized NMF by multiplicative updates and by an unrolled, trainable network."""

from .data import (
    MutationCatalog, SplitPlan, generate_synthetic, load_catalog, make_split_plan, mutation_categories,
    save_catalog,
)
from .errors import (
    ConfigurationError, DataError, DegenerateDictionaryError, DimensionError, DnmfError, IterationLimitError,
    NumericError, StateError,
)
from .evaluation import (
    EvalReport, EvalSettings, benchmark_inference, compare, depth_sweep, evaluate_supervised,
    evaluate_unsupervised,
)
from .matrix import EPS_DIV, RegParams, column_cost, matrix_cost, mse_columns
from .mu import FactorizationResult, MuConfig, factorize, infer_h, update_h, update_w
from .network import LayerParams, UnrolledModel, backward, forward, load_model, save_model
from .nnls import NnlsConfig, estimate_w, lawson_hanson, nnls_vector
from .training import (
    AdamState, TrainConfig, TrainTrace, adam_step, infer, train_supervised, train_unsupervised,
)

__version__ = "0.1.0"
