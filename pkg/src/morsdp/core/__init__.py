"""Model and utility types, validation and model documents."""
from .expr import parse_utility_expr, to_source
from .io import dump_model, load_model, model_from_dict, model_to_dict, parse_model
from .model import FiniteMDP, ObservationPolicy, POMDPModel, TransitionTable
from .utility import (
    UNDISCOUNTED,
    DiscountSpec,
    Expression,
    SumOfExponentials,
    UtilitySpec,
    check_monotone,
    eval_utility,
)

__all__ = [
    "DiscountSpec", "Expression", "FiniteMDP", "ObservationPolicy", "POMDPModel", "SumOfExponentials",
    "TransitionTable", "UNDISCOUNTED", "UtilitySpec", "check_monotone", "dump_model",
    "eval_utility", "load_model", "model_from_dict", "model_to_dict", "parse_model",
    "parse_utility_expr", "to_source",
]
