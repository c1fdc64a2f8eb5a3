"""Request and response models of the HTTP API."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class _Request(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LatticeRequest(_Request):
    extents: list[int] = Field(..., min_length=1, max_length=2)
    boundary: Literal["periodic", "open"] = "periodic"
    alpha: float = Field(..., ge=0)
    K: float = Field(1.0, gt=0)


class ModelRequest(LatticeRequest):
    include_couplings: bool = False


class EDRequest(LatticeRequest):
    tau: float = Field(..., gt=0)
    n_periods: int = Field(..., ge=1)
    form: Literal["segment", "pulsed"] = "segment"
    every: int = Field(1, ge=1)
    with_opt: bool = True


class DTWARequest(LatticeRequest):
    tau: float = Field(..., gt=0)
    n_periods: int = Field(..., ge=1)
    n_traj: int = Field(1000, ge=2)
    seed: int = 0
    every: int = Field(1, ge=1)
    stop_after_peak: Optional[float] = Field(None, gt=0, lt=1)
    same_site: Literal["classical", "exact"] = "classical"


class ZMRequest(_Request):
    N: Optional[int] = Field(None, ge=3)
    lam: Optional[float] = Field(None, gt=0)
    lattice: Optional[LatticeRequest] = None
    K: float = Field(1.0, gt=0)
    tau: float = Field(..., gt=0)
    t_end: Optional[float] = Field(None, gt=0)
    n_points: int = Field(401, ge=2)


class SpinWaveRequest(LatticeRequest):
    tau: float = Field(0.0, ge=0)
    t: list[float] = Field(default_factory=list)


class ScalingRequest(_Request):
    dimension: Literal[1, 2] = 1
    alpha: float = Field(..., ge=0)
    Ls: list[int] = Field(..., min_length=3)
    K: float = Field(1.0, gt=0)


class LindbladRequest(_Request):
    N: int = Field(10, ge=2)
    alpha: float = Field(1.0, ge=0)
    boundary: Literal["periodic", "open"] = "periodic"
    K_hz: float = Field(560.0, gt=0)
    tau_s: float = Field(0.18e-3, gt=0)
    rates_hz: list[float] = Field(default_factory=lambda: [0.0, 1.0, 3.0, 10.0, 30.0])
    kinds: list[Literal["local_dephasing", "global_dephasing"]] = Field(
        default_factory=lambda: ["local_dephasing", "global_dephasing"]
    )
    n_periods: int = Field(60, ge=1)
    noise_frame: Literal["lab", "toggled"] = "lab"
    parity_rate_hz: Optional[float] = None
    n_theta: int = Field(64, ge=2)

    @field_validator("rates_hz")
    @classmethod
    def _nonnegative(cls, v):
        if any(r < 0 for r in v):
            raise ValueError("rates must be >= 0")
        return v


class SweepRequest(_Request):
    config: dict[str, Any]
    mode: Literal["grid", "tau_s"] = "grid"
    thresholds: Optional[list[float]] = None
    fit: bool = False


class FitRequest(_Request):
    L: list[float] = Field(..., min_length=3)
    y: list[float] = Field(..., min_length=3)
    sigma: Optional[list[float]] = None
    model: Literal["power-law", "power-law-log"] = "power-law"


class FigureRequest(_Request):
    name: Literal["fig2a", "fig2b", "fig3a", "fig3b", "fig4", "fig5"]
    config: dict[str, Any] = Field(default_factory=dict)


class Table(BaseModel):
    columns: list[str]
    rows: list[list[Any]]


class Result(BaseModel):
    """Generic response: named tables plus scalar results and provenance."""

    tables: dict[str, Table] = Field(default_factory=dict)
    values: dict[str, Any] = Field(default_factory=dict)
    provenance: dict[str, Any] = Field(default_factory=dict)


class ErrorBody(BaseModel):
    error: str
    kind: str
    payload: Optional[Any] = None
