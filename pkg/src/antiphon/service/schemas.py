"""Request/response models for the HTTP control surface."""

from __future__ import annotations

from pydantic import BaseModel, Field, field_validator

from ..engine import InteractionMode


class Counters(BaseModel):
    events_received: int = 0
    events_processed: int = 0
    events_dropped: int = 0
    predictions_emitted: int = 0
    osc_sent: int = 0
    osc_send_errors: int = 0
    ws_clients: int = 0


class StatusResponse(BaseModel):
    dimension: int
    model_loaded: bool
    units: int | None = None
    layers: int | None = None
    mixtures: int | None = None
    mode: str
    pi_temperature: float
    sigma_temperature: float
    response_timeout: float
    uptime_seconds: float
    counters: Counters


class ConfigUpdate(BaseModel):
    """Partial update; omitted fields keep their current value."""

    mode: str | None = None
    pi_temperature: float | None = Field(default=None, ge=0)
    sigma_temperature: float | None = Field(default=None, ge=0)
    response_timeout: float | None = Field(default=None, gt=0)

    @field_validator("mode")
    @classmethod
    def _known_mode(cls, v: str | None) -> str | None:
        if v is None:
            return v
        return InteractionMode.parse(v).value


class ConfigState(BaseModel):
    mode: str
    pi_temperature: float
    sigma_temperature: float
    response_timeout: float


class ResetResponse(BaseModel):
    ok: bool = True
