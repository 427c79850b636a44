from .acquisition import XI, ei_closed_form, expected_improvement
from .gp import GpFitError, GpModel, gp_fit, gp_select_hypers, log_marginal_likelihood, matern32
from .search import (
    ALL_AT_ONCE,
    ONE_AT_A_TIME,
    Optimizer,
    Strategy,
    bo_propose,
    bo_suggest,
    rs_suggest,
    strategy_next,
)

__all__ = [
    "XI",
    "ei_closed_form",
    "expected_improvement",
    "GpFitError",
    "GpModel",
    "gp_fit",
    "gp_select_hypers",
    "log_marginal_likelihood",
    "matern32",
    "ALL_AT_ONCE",
    "ONE_AT_A_TIME",
    "Optimizer",
    "Strategy",
    "bo_propose",
    "bo_suggest",
    "rs_suggest",
    "strategy_next",
]
