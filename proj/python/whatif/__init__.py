"""Python bindings for the what-if analysis engine.

Models, specs and results are plain dicts with the same JSON shapes the
HTTP API and the CLI use. Datasets are passed as CSV text.
"""

from ._whatif import (
    Service,
    WhatifError,
    dataset_summary,
    generate_synthetic,
    goal,
    importance,
    kpi_value,
    pearson,
    predict,
    row_sensitivity,
    sensitivity,
    spearman,
    sweep,
    train,
)

__all__ = [
    "Service",
    "WhatifError",
    "dataset_summary",
    "generate_synthetic",
    "goal",
    "importance",
    "kpi_value",
    "pearson",
    "predict",
    "row_sensitivity",
    "sensitivity",
    "spearman",
    "sweep",
    "train",
]
