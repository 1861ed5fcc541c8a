"""Simulation toolkit: generative models, the two study settings and the risk-curve runner."""

from .generate import (
    ExcessRiskEvaluator,
    MeanModel,
    ProbitModel,
    SourcePool,
    excess_risk,
    generate_mean_dataset,
    generate_probit_dataset,
    make_target,
    substream,
)
from .runner import (
    CSV_HEADER,
    METHODS,
    TASKS,
    THEORY,
    ExperimentConfig,
    RiskCurve,
    RiskPoint,
    default_budgets,
    draw_truth,
    run_experiment,
    write_csv,
)
from .settings import Setting, get_setting, setting_one, setting_two

__all__ = [
    "CSV_HEADER", "METHODS", "TASKS", "THEORY",
    "ExcessRiskEvaluator", "ExperimentConfig", "MeanModel", "ProbitModel", "RiskCurve",
    "RiskPoint", "Setting", "SourcePool",
    "default_budgets", "draw_truth", "excess_risk", "generate_mean_dataset",
    "generate_probit_dataset", "get_setting", "make_target", "run_experiment",
    "setting_one", "setting_two", "substream", "write_csv",
]
