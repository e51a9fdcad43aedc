from .core import (
    DISCRIMINANT,
    ENSEMBLE,
    KERNEL_NB,
    KNN,
    SVM,
    TREE,
    ClassifierConfig,
    TrainedClassifier,
    all_configs,
    decide,
    fit_classifier,
    predict_class,
)
from .schemes import (
    DEFAULT_SCHEMES,
    ClassScheme,
    CostMatrix,
    assign_class,
    expected_cost_decision,
    off_diagonal_cells,
)

__all__ = [
    "DISCRIMINANT", "ENSEMBLE", "KERNEL_NB", "KNN", "SVM", "TREE",
    "ClassifierConfig", "TrainedClassifier", "all_configs", "decide", "fit_classifier",
    "predict_class", "DEFAULT_SCHEMES", "ClassScheme", "CostMatrix", "assign_class",
    "expected_cost_decision", "off_diagonal_cells",
]
