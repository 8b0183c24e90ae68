from .evaluator import DEFAULT_DEPTH_LIMIT, EvalStats, eval_node, execute, wrap64
from .naive import NaiveStats, naive_eval
from .warehouse import Warehouse

__all__ = [
    "DEFAULT_DEPTH_LIMIT", "EvalStats", "NaiveStats", "Warehouse",
    "eval_node", "execute", "naive_eval", "wrap64",
]
