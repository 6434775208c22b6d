"""Learner registry and the default hyperparameter search spaces.

The search bounds are broad, log-scaled where a parameter spans orders of
magnitude, and can be overridden per model in the run configuration.
"""

from __future__ import annotations

from typing import Any

from .base import Learner
from .factor import DFM, PCR, PLSR
from .linear import AutoRegressive, ElasticNet, Lasso, RandomWalk, Ridge
from .neural import GRU, MLP
from .tpe import CategoricalParam, FloatParam, IntParam, SearchSpace
from .trees import GradientBoosting, RandomForest

REGISTRY: dict[str, type[Learner]] = {
    "RW": RandomWalk,
    "AR": AutoRegressive,
    "DFM": DFM,
    "LASSO": Lasso,
    "Ridge": Ridge,
    "EN": ElasticNet,
    "PCR": PCR,
    "PLSR": PLSR,
    "RF": RandomForest,
    "XGB": GradientBoosting,
    "MLP": MLP,
    "GRU": GRU,
}

# learners trained epoch by epoch with a validation monitor
NEURAL = frozenset({"MLP", "GRU"})
# learners whose constructors take a seed
SEEDED = frozenset({"RF", "XGB", "MLP", "GRU"})

_NEURAL_SPACE = {
    "num_layers": IntParam(1, 2),
    "dropout_rate": FloatParam(0.0, 0.5),
    "l2_reg": FloatParam(1e-6, 1e-2, log=True),
    "lr": FloatParam(1e-4, 1e-2, log=True),
    "batch_size": CategoricalParam([8, 16, 32]),
}


def default_space(model: str) -> SearchSpace:
    spaces: dict[str, SearchSpace] = {
        "RW": {},
        "AR": {},
        "DFM": {"r": IntParam(1, 8), "p_ar": IntParam(0, 4)},
        "LASSO": {"lam": FloatParam(1e-4, 10.0, log=True)},
        "Ridge": {"alpha": FloatParam(1e-4, 100.0, log=True)},
        "EN": {"alpha": FloatParam(1e-4, 10.0, log=True), "l1_ratio": FloatParam(0.01, 0.99)},
        "PCR": {"k": IntParam(1, 15), "lam": FloatParam(1e-4, 10.0, log=True)},
        "PLSR": {"n_components": IntParam(1, 10)},
        "RF": {
            "n_estimators": IntParam(50, 300),
            "max_depth": IntParam(2, 10),
            "min_samples_leaf": IntParam(1, 10),
            "max_features": FloatParam(0.1, 1.0),
            "criterion": CategoricalParam(["squared_error", "absolute_error"]),
        },
        "XGB": {
            "n_estimators": IntParam(20, 300),
            "learning_rate": FloatParam(0.01, 0.3, log=True),
            "max_depth": IntParam(1, 6),
            "reg_lambda": FloatParam(1e-3, 10.0, log=True),
            "gamma": FloatParam(1e-4, 1.0, log=True),
            "min_child_weight": FloatParam(1.0, 10.0),
            "subsample": FloatParam(0.5, 1.0),
            "colsample_bytree": FloatParam(0.3, 1.0),
        },
        "MLP": {"hidden_dim": IntParam(8, 128, log=True), **_NEURAL_SPACE},
        "GRU": {"hidden_dim": IntParam(4, 64, log=True), **_NEURAL_SPACE},
    }
    if model not in spaces:
        raise KeyError(f"unknown model {model!r}; known: {sorted(REGISTRY)}")
    return dict(spaces[model])


def build_learner(model: str, params: dict[str, Any], feature_names, dummy_mask,
                  seed: int = 42, **extra) -> Learner:
    """Instantiate a registered learner with hyperparameters and feature metadata."""
    try:
        cls = REGISTRY[model]
    except KeyError:
        raise KeyError(f"unknown model {model!r}; known: {sorted(REGISTRY)}") from None
    kw = dict(params)
    kw.update(extra)
    if model in SEEDED:
        kw.setdefault("seed", seed)
    return cls(feature_names=feature_names, dummy_mask=dummy_mask, **kw)
