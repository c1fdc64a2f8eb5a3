"""Weighted log-log fits for the tau_s and t_tot scaling laws."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError

MODELS = ("power-law", "power-law-log")


@dataclass(frozen=True)
class FitResult:
    """``log y = intercept + slope log L`` (after dividing by ``ln L`` for the log model)."""

    slope: float
    intercept: float
    covariance: tuple
    residual_norm: float
    model: str
    window: tuple
    n_points: int

    @property
    def slope_err(self) -> float:
        return float(np.sqrt(self.covariance[0][0]))

    def to_dict(self):
        return asdict(self)


def fit_power_law(L, y, model="power-law", sigma=None) -> FitResult:
    """Weighted least squares on log-transformed data.

    ``sigma`` are absolute errors on ``y``; they propagate to ``sigma / y``
    in log space.  Unweighted fits estimate the covariance from the residuals.
    """
    if model not in MODELS:
        raise ConfigError(f"unknown fit model {model!r}")
    L = np.asarray(L, dtype=float)
    y = np.asarray(y, dtype=float)
    if L.shape != y.shape or len(L) < 3:
        raise ConfigError("need at least 3 matching points")
    if np.any(L <= 1) and model == "power-law-log":
        raise ConfigError("log model needs L > 1")
    if np.any(y <= 0) or np.any(L <= 0):
        raise ConfigError("log fit needs positive data")
    target = np.log(y / np.log(L)) if model == "power-law-log" else np.log(y)
    X = np.column_stack([np.log(L), np.ones_like(L)])
    if np.linalg.matrix_rank(X) < 2:
        raise ConfigError("degenerate design matrix (all L equal)")
    if sigma is not None:
        s = np.asarray(sigma, dtype=float) / y
        w = 1.0 / np.where(s > 0, s, np.min(s[s > 0]) if np.any(s > 0) else 1.0) ** 2
    else:
        w = np.ones_like(L)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], target * sw, rcond=None)
    resid = target - X @ coef
    XtWX_inv = np.linalg.inv(X.T @ (X * w[:, None]))
    dof = len(L) - 2
    if sigma is None:
        scale = float(resid @ resid / dof) if dof > 0 else 0.0
        cov = XtWX_inv * scale
    else:
        cov = XtWX_inv
    return FitResult(
        slope=float(coef[0]),
        intercept=float(coef[1]),
        covariance=tuple(map(tuple, cov.tolist())),
        residual_norm=float(np.sqrt(resid @ resid)),
        model=model,
        window=(float(L.min()), float(L.max())),
        n_points=len(L),
    )
