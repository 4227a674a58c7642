from ._core import (
    Error,
    Network,
    build,
    generate_synthetic,
    load_weights,
    metrics,
    model_names,
    paired_ttest,
    pfi,
    prediction_ttest,
    prepare,
    shaptime,
    student_t_cdf,
    student_t_two_sided_p,
    theils_u,
    train,
)

__all__ = [
    "Error",
    "Network",
    "build",
    "generate_synthetic",
    "load_weights",
    "metrics",
    "model_names",
    "paired_ttest",
    "pfi",
    "prediction_ttest",
    "prepare",
    "shaptime",
    "student_t_cdf",
    "student_t_two_sided_p",
    "theils_u",
    "train",
]
