"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class EvalRequest(BaseModel):
    program: str
    context: str = ""
    naive: bool = False


class EvalResponse(BaseModel):
    value: int
    stats: dict[str, int]


class SimulateRequest(BaseModel):
    cluster: dict | None = None  # omitted: single node carrying every tier
    program: str | None = None
    pipeline_dir: str | None = None
    context: str = ""
    replication: bool = False
    transport: str = "auto"
    seed: int = 0
    crash_stage: str | None = None
    crash_after: int | None = Field(default=None, ge=1)
    slow_transport: str | None = None
    slow_latency_us: int | None = Field(default=None, ge=1)


class SimulateResponse(BaseModel):
    lines: list[dict]


class ErrorEnvelope(BaseModel):
    error: str
    category: str
