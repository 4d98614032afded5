"""Inexact SARAH, SARAH, SVRG and SGD with schedule derivation and bound checks."""

import json as _json

from ._core import (
    ConfigError,
    DivergenceError,
    Error,
    InvalidArgument,
    Logistic,
    MissingConstant,
    ModifiedLogistic,
    NoisyQuadratic,
    NonConvergence,
    Problem,
    Quadratic,
    ScheduleInvalid,
    SigmoidSquared,
    grad_fd_check,
    isarah,
    load_libsvm,
    make_quadratic,
    minibatch_variance_identity,
    sarah,
    schedule,
    sgd,
    svrg,
    theorem1_bound_check,
    theorem2_bound_check,
    theorem3_alpha,
    theorem4_alpha_c,
    verify,
)
from ._core import run_experiment as _run_experiment

__version__ = "0.1.0"


def run_experiment(config, base_dir="."):
    """Run an experiment from a config dict (or JSON string) and return its summary."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _run_experiment(config, base_dir)
