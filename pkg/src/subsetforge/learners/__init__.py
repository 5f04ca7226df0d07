"""Six classifiers behind one fit/score contract."""
from . import boosting, forest, logistic, neural, svm  # noqa: F401  (registration)
from .base import (
    ALL_KINDS,
    BASE_KINDS,
    FitError,
    KindLike,
    Learner,
    LearnerKind,
    ParamSpec,
    TrainedModel,
    fit,
    get_learner,
    kind_name,
    predict_labels,
    predict_scores,
    validate_params,
)
from .serialize import model_from_json, model_to_json
from .stacking import fit_stacked, leakage_audit

__all__ = [
    "ALL_KINDS",
    "BASE_KINDS",
    "FitError",
    "KindLike",
    "Learner",
    "LearnerKind",
    "ParamSpec",
    "TrainedModel",
    "fit",
    "fit_stacked",
    "get_learner",
    "kind_name",
    "leakage_audit",
    "model_from_json",
    "model_to_json",
    "predict_labels",
    "predict_scores",
    "validate_params",
]
