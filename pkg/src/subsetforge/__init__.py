"""Feature-subset selection and classifier benchmarking for lending-platform survival data."""
from .folds import FoldAssignment, derive_seed, stratified_kfold
from .metrics import ConfusionMatrix, MetricsBundle, auc_score, classification_metrics, confusion_matrix, spearman
from .schema import DataError, Dataset, canonical_schema, load_csv, stratified_split, write_csv
from .synthgen import GeneratorConfig, generate

__version__ = "0.1.0"

__all__ = [
    "ConfusionMatrix",
    "DataError",
    "Dataset",
    "FoldAssignment",
    "GeneratorConfig",
    "MetricsBundle",
    "auc_score",
    "canonical_schema",
    "classification_metrics",
    "confusion_matrix",
    "derive_seed",
    "generate",
    "load_csv",
    "spearman",
    "stratified_kfold",
    "stratified_split",
    "write_csv",
]
