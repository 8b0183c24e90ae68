"""FastAPI layer: three endpoints over the handlers, one error envelope."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import EduceError
from .handlers import error_category, handle_eval, handle_simulate
from .models import (
    ErrorEnvelope,
    EvalRequest,
    EvalResponse,
    SimulateRequest,
    SimulateResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="educe", version=__version__)

    @app.exception_handler(EduceError)
    async def educe_error(request: Request, err: EduceError) -> JSONResponse:
        envelope = ErrorEnvelope(error=str(err), category=error_category(err))
        return JSONResponse(status_code=400, content=envelope.model_dump())

    @app.post("/eval", response_model=EvalResponse,
              responses={400: {"model": ErrorEnvelope}})
    def eval_program(request: EvalRequest) -> EvalResponse:
        return handle_eval(request)

    @app.post("/simulate", response_model=SimulateResponse,
              responses={400: {"model": ErrorEnvelope}})
    def simulate(request: SimulateRequest) -> SimulateResponse:
        return handle_simulate(request)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    return app


app = create_app()
