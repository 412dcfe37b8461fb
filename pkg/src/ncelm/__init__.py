"""Negative correlation extreme learning machine ensembles with convergence diagnostics."""

from .config import NcelmConfig
from .dataio import (
    Dataset,
    StandardizationParams,
    apply_standardization,
    load_csv,
    save_csv,
    split,
    standardize,
    synthetic_dataset,
)
from .elm import BaseLearner, HiddenLayer, elm_solve, hidden_map, learner_output, make_hidden_layer
from .ensemble import (
    EnsembleState,
    TrainedEnsemble,
    accuracy,
    ensemble_output,
    make_map,
    ncelm_step,
    train,
)
from .exceptions import ConfigError, DataError, NcelmError, NumericalDegeneracyError

__version__ = "0.1.0"
