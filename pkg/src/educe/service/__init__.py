from .app import app, create_app
from .handlers import (
    CATEGORY_EXIT_CODES,
    error_category,
    handle_eval,
    handle_simulate,
)
from .models import (
    ErrorEnvelope,
    EvalRequest,
    EvalResponse,
    SimulateRequest,
    SimulateResponse,
)

__all__ = [
    "app",
    "create_app",
    "CATEGORY_EXIT_CODES",
    "error_category",
    "handle_eval",
    "handle_simulate",
    "ErrorEnvelope",
    "EvalRequest",
    "EvalResponse",
    "SimulateRequest",
    "SimulateResponse",
]
