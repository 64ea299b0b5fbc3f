"""Solar power forecasting from weather features.

Preprocessing learned on the training split, seven from-scratch regressors,
a 4-fold out-of-fold stacking ensemble, and regression/classification
evaluation.
"""

from ._kernels import BACKEND
from .data import (
    DEFAULT_SCHEMA,
    FeatureSchema,
    LabeledDataset,
    SplitIndices,
    SynthConfig,
    generate_synthetic,
    kfold_partition,
    load_csv,
    split,
    write_csv,
)
from .ensemble import StackConfig, StackedEnsemble, fit_stack, out_of_fold_predictions, predict_stack
from .learners import LearnerSpec, fit_learner, predict
from .metrics import EvaluationReport, classification_at_threshold, error_table, evaluate, mae, rmse, roc_auc
from .persist import load_model, save_model
from .preprocess import FittedPipeline, PreprocessOptions, apply_pipeline, fit_pipeline, pearson_r, quantile

__version__ = "0.1.0"
