from sldkit.model.dual import Dual
from sldkit.model.evaluate import (
    DomainEdge,
    ParameterPoint,
    RankChangeWarning,
    UnknownParameter,
    eval_derivative,
    eval_dual,
    eval_model,
    make_env,
)
from sldkit.model.expression import (
    Expression,
    ExpressionSyntaxError,
    evaluate,
    free_parameters,
    parse_expression,
    pretty,
)
from sldkit.model.registry import ModelRegistry
from sldkit.model.spec import (
    EvalError,
    InvalidState,
    ModelDocument,
    ModelLoadError,
    ModelSpec,
    UnitaryModel,
    load_model,
    parse_model,
)

__all__ = [
    "DomainEdge",
    "Dual",
    "EvalError",
    "Expression",
    "ExpressionSyntaxError",
    "InvalidState",
    "ModelDocument",
    "ModelLoadError",
    "ModelRegistry",
    "ModelSpec",
    "ParameterPoint",
    "RankChangeWarning",
    "UnitaryModel",
    "UnknownParameter",
    "eval_derivative",
    "eval_dual",
    "eval_model",
    "evaluate",
    "free_parameters",
    "load_model",
    "make_env",
    "parse_expression",
    "parse_model",
    "pretty",
]
