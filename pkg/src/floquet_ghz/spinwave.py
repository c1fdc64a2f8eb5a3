"""Linear spin-wave analytics of the effective Hamiltonian.

Per momentum ``q != 0`` the quadratic Hamiltonian has diagonal strength
``A_q = (K_0 - K_q)/3`` and pairing strength ``tau B_q`` with
``B_q = (K_q^2 - T_0^2)/6``.  Modes with ``tau |B_q| > A_q`` are dynamically
unstable; their excitation numbers follow the ``cosh`` continuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .lattice import (
    LatticeSpec,
    ModelParams,
    momentum_grid,
    structure_factor_grid,
    t0_squared,
    _require_periodic,
)


@dataclass(frozen=True)
class SpinWaveMode:
    q: np.ndarray
    Kq: float
    A: float
    B: float
    tau: float
    eps: float
    unstable: bool
    u: float
    v: float

    @property
    def pairing(self) -> float:
        return self.tau * self.B


@dataclass
class SpinWaveSpectrum:
    """Bogoliubov data over the ``q != 0`` grid, as parallel arrays."""

    spec: LatticeSpec
    params: ModelParams
    tau: float
    q: np.ndarray
    Kq: np.ndarray
    A: np.ndarray
    B: np.ndarray
    eps: np.ndarray = field(repr=False)
    unstable: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return len(self.A)

    def mode(self, i: int) -> SpinWaveMode:
        return SpinWaveMode(
            q=self.q[i], Kq=float(self.Kq[i]), A=float(self.A[i]), B=float(self.B[i]), tau=self.tau,
            eps=float(self.eps[i]), unstable=bool(self.unstable[i]), u=float(self.u[i]), v=float(self.v[i]),
        )

    def modes(self):
        return [self.mode(i) for i in range(len(self))]

    def write_csv(self, path, provenance=None) -> Path:
        from .io import write_table

        qy = self.q[:, 1] if self.q.shape[1] > 1 else np.zeros(len(self))
        rows = np.column_stack([self.q[:, 0], qy, self.Kq, self.A, self.B, self.eps, self.unstable.astype(int)])
        return write_table(path, ("qx", "qy", "Kq", "Aq", "Bq", "eps_q", "unstable"), rows, provenance)


def bogoliubov(A, B, tau):
    """``(eps, unstable, u, v)`` for arrays of ``A``, ``B``.

    ``eps`` holds the imaginary magnitude for unstable modes, where ``u`` and
    ``v`` are undefined and set to NaN.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    disc = A**2 - (tau * B) ** 2
    unstable = disc < 0
    eps = np.sqrt(np.abs(disc))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(unstable | (eps == 0), np.nan, A / eps)
        u = np.sqrt((ratio + 1) / 2)
        v = np.sign(B) * np.sqrt(np.clip(ratio - 1, 0, None) / 2)
    return eps, unstable, u, v


def build_spectrum(spec: LatticeSpec, params: ModelParams, tau: float) -> SpinWaveSpectrum:
    _require_periodic(spec, "spin-wave spectrum")
    if tau < 0:
        raise ConfigError("tau must be non-negative")
    grid = momentum_grid(spec)
    Kq = structure_factor_grid(spec, params)
    T0 = t0_squared(spec, params)
    nz = grid.nonzero
    K0 = Kq[grid.zero_index]
    A = (K0 - Kq[nz]) / 3
    B = (Kq[nz] ** 2 - T0) / 6
    if np.any(A < -1e-9 * max(1.0, abs(K0))):
        raise ConfigError("negative A_q: K_0 is not the maximum of K_q")
    A = np.clip(A, 0, None)
    eps, unstable, u, v = bogoliubov(A, B, tau)
    return SpinWaveSpectrum(spec, params, float(tau), grid.q[nz], Kq[nz], A, B, eps, unstable, u, v, grid.indices[nz])


def excitation_series(A, B, tau, t) -> np.ndarray:
    """``<b_q^dag b_q>(t)`` from the vacuum, stable or unstable.

    Broadcasts over mode arrays ``A, B`` and times ``t`` (result shape
    ``broadcast(A, B) + t.shape``).
    """
    A = np.asarray(A, dtype=float)[..., None]
    B = np.asarray(B, dtype=float)[..., None]
    t = np.atleast_1d(np.asarray(t, dtype=float))
    g2 = (tau * B) ** 2
    disc = A**2 - g2
    eps = np.sqrt(np.abs(disc))
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = g2 / (2 * disc) * (1 - np.cos(2 * eps * t))
        growing = g2 / (2 * -disc) * (np.cosh(2 * eps * t) - 1)
        # exactly degenerate A = tau|B|: secular growth g^2 t^2
        critical = g2 * t**2
    out = np.where(disc > 0, stable, np.where(disc < 0, growing, critical))
    return np.where(g2 == 0, 0.0, out)


def mode_excitation(mode: SpinWaveMode, t) -> np.ndarray:
    return excitation_series(mode.A, mode.B, mode.tau, t)


def total_nfm(spectrum: SpinWaveSpectrum, t) -> np.ndarray:
    """``N_FM(t)`` summed over all ``q != 0`` modes."""
    return excitation_series(spectrum.A, spectrum.B, spectrum.tau, t).sum(axis=0)


@dataclass(frozen=True)
class TauBound:
    bound: float
    q: np.ndarray
    index: tuple


def tau_bound(spec: LatticeSpec, params: ModelParams) -> TauBound:
    """``min_{q != 0} A_q / |B_q|`` (units of 1/K) and its minimizing momentum.

    Ties between ``q`` and ``-q`` resolve to the smaller grid index.
    """
    sw = build_spectrum(spec, params, 0.0)
    with np.errstate(divide="ignore"):
        ratio = np.where(sw.B == 0, np.inf, sw.A / np.abs(sw.B))
    i = int(np.argmin(ratio))
    return TauBound(float(ratio[i]), sw.q[i], tuple(int(v) for v in sw.indices[i]))


LOG_SCALING = "log"


def mu_exponent(alpha: float, d: int):
    """Exponent in ``tau_s ~ L^-mu``; returns ``LOG_SCALING`` at ``alpha == d``.

    At ``alpha = d`` the power law degenerates into ``(ln L)^-2``.
    """
    if d not in (1, 2) or alpha < 0:
        raise ConfigError("need d in {1, 2} and alpha >= 0")
    if math.isclose(alpha, d):
        return LOG_SCALING
    if alpha < d:
        return d - alpha
    if alpha < d + 2:
        return alpha - d
    return 2.0


def nu_exponent(alpha: float, d: int) -> float:
    """Exponent in ``t_tot ~ L^-nu ln L``."""
    if d not in (1, 2) or alpha < 0:
        raise ConfigError("need d in {1, 2} and alpha >= 0")
    return d - alpha if alpha < d + 2 else -2.0


def tc_estimate(N: int, lam: float, K: float, tau: float) -> float:
    """GHZ generation time ``6 ln N / (lam K^2 tau N^2)`` of the collective model."""
    if N < 3 or lam <= 0 or tau <= 0:
        raise ConfigError("need N >= 3, lam > 0, tau > 0")
    return 6 * math.log(N) / (lam * K**2 * tau * N**2)


def chi_eff(N: int, lam: float, K: float, tau: float) -> float:
    """Time-rescaling factor ``lam N K^2 tau / 6``."""
    return lam * N * K**2 * tau / 6


def scaling_study(d: int, alpha: float, Ls, K: float = 1.0, window=None):
    """``tau_bound`` over ``Ls`` plus a log-log slope over ``window`` (default: all)."""
    from .fitting import fit_power_law

    Ls = [int(L) for L in Ls]
    bounds = []
    for L in Ls:
        spec = LatticeSpec.chain(L) if d == 1 else LatticeSpec.square(L)
        bounds.append(tau_bound(spec, ModelParams(alpha, K)).bound)
    Ls_arr = np.asarray(Ls, dtype=float)
    bounds = np.asarray(bounds)
    sel = np.ones(len(Ls), dtype=bool) if window is None else (Ls_arr >= window[0]) & (Ls_arr <= window[1])
    fit = fit_power_law(Ls_arr[sel], bounds[sel])
    return Ls_arr, bounds, fit
