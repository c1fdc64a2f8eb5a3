"""Density-matrix dynamics of the pulsed sequence under dephasing.

Pulses are instantaneous, noiseless global rotations.  Between pulses the
lab-frame Hamiltonian is ``H_zz`` and the dephasing operators are ``s_j^z``
(local) or ``S_z`` (global); everything is diagonal in the computational
basis, so a free segment multiplies ``rho_ab`` by

    exp(-i tau (E_a - E_b) - tau D_ab),

with ``D_ab = gamma/2 * hamming(a, b)`` for local and
``Gamma/2 * (S_a - S_b)^2`` for global dephasing.  This is the exact
Liouvillian flow, so trace and Hermiticity are preserved to rounding.

The ``noise_frame="toggled"`` variant keeps the dephasing axis fixed while
the Ising axis cycles through y, x, z.  The two no longer commute and each
segment is integrated with an adaptive Runge-Kutta scheme on the dense
``rho`` (Liouvillian applied as index permutations, never materialized).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh

from .errors import CapacityError, ConfigError, FloquetGHZError
from .exact import (
    AXES,
    HADAMARD,
    TO_Z,
    FloquetSchedule,
    ising_energies,
    parity_from_weights,
    popcounts,
    rotation,
    sz_values,
)

MAX_OPEN_SPINS = 12
EIG_CUTOFF = 1e-12
NEG_EIG_ABORT = -1e-8
NOISE_KINDS = ("local_dephasing", "global_dephasing")
NOISE_FRAMES = ("lab", "toggled")


class NonPhysicalStateError(FloquetGHZError):
    """``rho`` failed a physicality check; ``diagnostics`` holds the numbers."""

    def __init__(self, message, diagnostics):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "local_dephasing"
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if not self.rate >= 0:
            raise ConfigError("noise rate must be >= 0")

    def scaled(self, factor: float) -> "NoiseSpec":
        return NoiseSpec(self.kind, self.rate * factor)


@dataclass(frozen=True)
class PhysicalUnits:
    """Laboratory units: ``K`` in Hz (taken as a rate in 1/s), ``tau`` in seconds."""

    K_hz: float
    tau_s: float

    def __post_init__(self):
        if not (self.K_hz > 0 and self.tau_s > 0):
            raise ConfigError("K and tau must be positive")

    @property
    def K_tau(self) -> float:
        return self.K_hz * self.tau_s

    def rate_to_core(self, rate_hz: float) -> float:
        """Noise rate in units of ``K``."""
        return rate_hz / self.K_hz

    def time_to_seconds(self, t):
        return np.asarray(t) / self.K_hz


def _n_from_dim(dim: int) -> int:
    N = dim.bit_length() - 1
    if dim != 1 << N:
        raise ConfigError(f"dimension {dim} is not a power of two")
    if N > MAX_OPEN_SPINS:
        raise CapacityError(f"N={N} exceeds the density-matrix cap of {MAX_OPEN_SPINS} spins")
    return N


def check_density_matrix(rho: np.ndarray, herm_tol=1e-10, trace_tol=1e-8, eig_tol=NEG_EIG_ABORT, eigenvalues=True):
    """Raise :class:`NonPhysicalStateError` unless ``rho`` is a valid state."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ConfigError("rho must be a square matrix")
    _n_from_dim(rho.shape[0])
    diag = {
        "hermiticity": float(np.max(np.abs(rho - rho.conj().T))),
        "trace": complex(np.trace(rho)),
    }
    if eigenvalues:
        diag["min_eigenvalue"] = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0])
    if diag["hermiticity"] > herm_tol or abs(diag["trace"] - 1) > trace_tol:
        raise NonPhysicalStateError("rho is not a normalized Hermitian matrix", diag)
    if eigenvalues and diag["min_eigenvalue"] < eig_tol:
        raise NonPhysicalStateError("rho has a negative eigenvalue", diag)
    return diag


def pure_density(psi: np.ndarray) -> np.ndarray:
    _n_from_dim(psi.shape[0])
    return np.outer(psi, psi.conj())


ROW_BLOCK = 5


def _apply_rows(M: np.ndarray, U: np.ndarray, N: int) -> np.ndarray:
    """``(U^{(x) N}) M`` acting on the row index, ``ROW_BLOCK`` qubits per matmul."""
    cols = M.shape[1]
    for j in range(0, N, ROW_BLOCK):
        k = min(ROW_BLOCK, N - j)
        Uk = U
        for _ in range(k - 1):
            Uk = np.kron(U, Uk)
        view = M.reshape(1 << (N - j - k), 1 << k, (1 << j) * cols)
        M = np.matmul(Uk, view).reshape(-1, cols)
    return M


def conjugate_product(rho: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``V rho V^dag`` for ``V = U^{(x) N}``."""
    N = _n_from_dim(rho.shape[0])
    out = _apply_rows(rho, U, N)
    return _apply_rows(out.conj().T, U, N).conj().T


def global_rotation_rho(rho: np.ndarray, axis: str, angle: float) -> np.ndarray:
    return conjugate_product(rho, rotation(axis, angle))


def dephasing_rates(N: int, noise: NoiseSpec) -> np.ndarray:
    """``D_ab`` such that the dissipator acts as ``-D_ab rho_ab`` in the dephasing basis."""
    if noise.rate == 0:
        return np.zeros((1 << N, 1 << N))
    if noise.kind == "local_dephasing":
        b = np.arange(1 << N)
        pc = popcounts(N)
        return noise.rate / 2 * pc[b[:, None] ^ b[None, :]]
    s = sz_values(N)
    return noise.rate / 2 * (s[:, None] - s[None, :]) ** 2


class DiagonalSegment:
    """Exact segment map for a diagonal Hamiltonian and diagonal dephasing."""

    def __init__(self, energies: np.ndarray, noise: NoiseSpec, tau: float):
        N = _n_from_dim(len(energies))
        E = np.asarray(energies, dtype=float)
        self.factor = np.exp(-1j * tau * (E[:, None] - E[None, :]) - tau * dephasing_rates(N, noise))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return self.factor * rho


def lindblad_segment(rho, energies, noise: NoiseSpec, tau: float, noise_axis: str = "z", rtol=1e-10, atol=1e-12):
    """Evolve ``rho`` for ``tau`` under a diagonal ``H`` plus dephasing along ``noise_axis``.

    ``energies`` is the diagonal of ``H`` in the computational basis and
    ``noise_axis`` is the Pauli axis of the jump operators in that same
    basis.  For ``"z"`` the flow is applied exactly; otherwise the dense
    master equation is integrated with RK45 and re-symmetrized afterwards.
    """
    rho = np.asarray(rho, dtype=complex)
    N = _n_from_dim(rho.shape[0])
    if noise_axis == "z" or noise.rate == 0:
        return DiagonalSegment(energies, noise, tau)(rho)
    if noise_axis not in ("x", "y"):
        raise ConfigError(f"unknown noise axis {noise_axis!r}")
    rhs = _liouvillian(N, np.asarray(energies, dtype=float), noise, noise_axis)
    dim = rho.shape[0]

    def f(_, y):
        return rhs(y.view(complex).reshape(dim, dim)).reshape(-1).view(float)

    sol = solve_ivp(f, (0.0, tau), rho.reshape(-1).view(float).copy(), method="RK45", rtol=rtol, atol=atol)
    if not sol.success:  # pragma: no cover - solver failure is not expected for bounded generators
        raise FloquetGHZError(f"integration failed: {sol.message}")
    out = sol.y[:, -1].copy().view(complex).reshape(dim, dim)
    out = (out + out.conj().T) / 2
    drift = abs(np.trace(out) - np.trace(rho))
    if drift > 1e-8:
        raise NonPhysicalStateError("trace drift above tolerance", {"trace_drift": float(drift)})
    return out


def _pauli_action(N: int, axis: str):
    """Per-site ``(perm, phase)`` with ``(sigma_j v)[a] = phase[a] v[perm[a]]``."""
    idx = np.arange(1 << N)
    ops = []
    for j in range(N):
        perm = idx ^ (1 << j)
        bit = (idx >> j) & 1
        if axis == "x":
            phase = np.ones(1 << N, dtype=complex)
        else:
            # sigma_y|0> = i|1>, sigma_y|1> = -i|0>; phase is set by the output bit
            phase = np.where(bit == 1, 1j, -1j)
        ops.append((perm, phase))
    return ops


def _liouvillian(N, E, noise: NoiseSpec, axis: str):
    ops = _pauli_action(N, axis)
    dE = E[:, None] - E[None, :]
    local = noise.kind == "local_dephasing"
    r = noise.rate

    def left(M, perm, phase):
        return phase[:, None] * M[perm, :]

    def right(M, perm, phase):
        # sigma[c, b] is nonzero only for c = perm[b], with value phase[c]
        return M[:, perm] * phase[perm][None, :]

    def rhs(rho):
        out = -1j * dE * rho
        if local:
            # (gamma/4) sum_j (sigma_j rho sigma_j - rho)
            acc = np.zeros_like(rho)
            for perm, phase in ops:
                acc += right(left(rho, perm, phase), perm, phase)
            out += r / 4 * (acc - N * rho)
        else:
            S_rho = sum(left(rho, p, ph) for p, ph in ops) / 2
            rho_S = sum(right(rho, p, ph) for p, ph in ops) / 2
            SS_rho = sum(left(S_rho, p, ph) for p, ph in ops) / 2
            rho_SS = sum(right(rho_S, p, ph) for p, ph in ops) / 2
            S_rho_S = sum(right(S_rho, p, ph) for p, ph in ops) / 2
            out += r * (S_rho_S - (SS_rho + rho_SS) / 2)
        return out

    return rhs


class OpenPropagator:
    """One period of the pulsed sequence with dephasing, for fixed ``C``, ``tau``, noise."""

    def __init__(self, C: np.ndarray, tau: float, noise: NoiseSpec, noise_frame: str = "lab"):
        self.C = np.asarray(C, dtype=float)
        self.N = self.C.shape[0]
        if self.N > MAX_OPEN_SPINS:
            raise CapacityError(f"N={self.N} exceeds the density-matrix cap of {MAX_OPEN_SPINS} spins")
        if noise_frame not in NOISE_FRAMES:
            raise ConfigError(f"unknown noise frame {noise_frame!r}")
        self.tau = float(tau)
        self.noise = noise
        self.noise_frame = noise_frame
        self.energies = ising_energies(self.C)
        if noise_frame == "lab":
            self._segment = DiagonalSegment(self.energies, noise, self.tau)
            # the two adjacent pulses between the first and second segment
            self._middle = rotation("y", -np.pi / 2) @ rotation("x", np.pi / 2)

    def period(self, rho: np.ndarray) -> np.ndarray:
        if rho.shape[0] != 1 << self.N:
            raise ConfigError("rho does not match coupling matrix")
        if self.noise_frame == "lab":
            half = np.pi / 2
            rho = global_rotation_rho(rho, "x", -half)
            rho = self._segment(rho)
            rho = conjugate_product(rho, self._middle)
            rho = self._segment(rho)
            rho = global_rotation_rho(rho, "y", half)
            return self._segment(rho)
        # toggled frame: Ising axis a with dephasing fixed along z; rotate so H_aa is diagonal
        for axis in ("y", "x", "z"):
            V = TO_Z[axis]
            if V is None:
                rho = DiagonalSegment(self.energies, self.noise, self.tau)(rho)
                continue
            r = conjugate_product(rho, V)
            # V sigma_z V^dag = sigma_x for both the x and y maps
            r = lindblad_segment(r, self.energies, self.noise, self.tau, noise_axis="x")
            rho = conjugate_product(r, V.conj().T)
        return rho


def pulsed_period_open(rho, schedule: FloquetSchedule, C, noise: NoiseSpec, noise_frame="lab") -> np.ndarray:
    """Apply ``max(schedule.n_periods, 1)`` periods to ``rho``."""
    check_density_matrix(rho, eigenvalues=False)
    prop = OpenPropagator(C, schedule.tau, noise, noise_frame)
    for _ in range(max(schedule.n_periods, 1)):
        rho = prop.period(rho)
    return rho


def collective_on_rows(M: np.ndarray, direction) -> np.ndarray:
    """``S_n M`` with ``S_n = n . S`` acting on the row index.

    ``S_a = V_a^dag S_z V_a`` with ``V_a`` the product map taking axis ``a``
    to z, so each component costs two product-unitary applications.
    """
    N = _n_from_dim(M.shape[0])
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    sz = sz_values(N)[:, None]
    out = np.zeros_like(M, dtype=complex)
    for a, axis in enumerate(AXES):
        if not n[a]:
            continue
        V = TO_Z[axis]
        if V is None:
            out += n[a] * sz * M
        else:
            out += n[a] * _apply_rows(sz * _apply_rows(M, V, N), V.conj().T, N)
    return out


def qfi_mixed(rho: np.ndarray, direction=(1.0, 0.0, 0.0), cutoff=EIG_CUTOFF) -> float:
    """``2 sum (q_k - q_l)^2 / (q_k + q_l) |<l|S_n|k>|^2`` over pairs above ``cutoff``."""
    rho = np.asarray(rho, dtype=complex)
    _n_from_dim(rho.shape[0])
    q, V = _eigh_parity((rho + rho.conj().T) / 2)
    if q[0] < NEG_EIG_ABORT:
        raise NonPhysicalStateError(
            "rho has a negative eigenvalue",
            {"min_eigenvalue": float(q[0]), "trace": float(q.sum())},
        )
    q = np.clip(q, 0, None)
    # any pair with q_k + q_l > cutoff has at least one member above cutoff/2
    keep = q > cutoff / 2
    idx = np.flatnonzero(keep)
    Sv = collective_on_rows(V, direction)
    G = np.abs(V.conj().T @ Sv[:, idx]) ** 2  # (all k, kept l)
    qs = q[:, None] + q[idx][None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(qs > cutoff, (q[:, None] - q[idx][None, :]) ** 2 / qs, 0.0)
    # the summand is symmetric: pairs with k outside the kept set stand for (k, l) and (l, k)
    mult = np.where(keep, 1.0, 2.0)[:, None]
    return float(2 * np.sum(mult * w * G))


def _eigh_parity(rho: np.ndarray):
    """``eigh`` that splits into the two ``prod sigma^z`` sectors when ``rho`` allows it."""
    N = _n_from_dim(rho.shape[0])
    odd = (popcounts(N) & 1).astype(bool)
    ev, od = np.flatnonzero(~odd), np.flatnonzero(odd)
    if N < 2 or np.max(np.abs(rho[np.ix_(ev, od)])) > 1e-14:
        return eigh(rho, driver="evr")
    q = np.empty(rho.shape[0])
    V = np.zeros_like(rho)
    for block, cols in ((ev, slice(0, len(ev))), (od, slice(len(ev), None))):
        w, v = eigh(rho[np.ix_(block, block)], driver="evr")
        q[cols] = w
        V[block, cols] = v
    order = np.argsort(q, kind="stable")
    return q[order], V[:, order]


def parity_mixed(rho: np.ndarray, theta) -> np.ndarray:
    """Parity signal of ``rho`` after a collective ``S_x`` rotation by ``theta``."""
    rho = np.asarray(rho, dtype=complex)
    N = _n_from_dim(rho.shape[0])
    rx = conjugate_product(rho, HADAMARD)
    b = np.arange(1 << N)
    vals = rx[b[::-1], b]
    w = popcounts(N)
    c = np.bincount(w, weights=vals.real, minlength=N + 1) + 1j * np.bincount(w, weights=vals.imag, minlength=N + 1)
    return parity_from_weights(c, N, theta)


def parity_contrast(values: np.ndarray) -> float:
    return float((np.max(values) - np.min(values)) / 2)


def ghz_coherence(rho: np.ndarray) -> complex:
    """``<up...up| rho |down...down>``."""
    return complex(rho[0, -1])


@dataclass
class OpenRun:
    t: np.ndarray
    fq: np.ndarray
    rho_at_max: np.ndarray

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.fq))

    @property
    def max_fq(self) -> float:
        return float(self.fq[self.peak_index])

    @property
    def t_peak(self) -> float:
        return float(self.t[self.peak_index])


def run_open(C, tau, noise: NoiseSpec, n_periods: int, noise_frame="lab", rho0=None, stop_after_peak=None) -> OpenRun:
    """Stroboscopic ``F_Q^{S_x}`` from the all-up state, keeping ``rho`` at the maximum.

    Times are in units of ``1/K``; ``noise.rate`` must already be in units of ``K``.
    """
    N = np.asarray(C).shape[0]
    if N > MAX_OPEN_SPINS:
        raise CapacityError(f"N={N} exceeds the density-matrix cap of {MAX_OPEN_SPINS} spins")
    if rho0 is None:
        rho = np.zeros((1 << N, 1 << N), dtype=complex)
        rho[0, 0] = 1.0
    else:
        check_density_matrix(rho0)
        rho = np.asarray(rho0, dtype=complex)
    prop = OpenPropagator(C, tau, noise, noise_frame)
    ts, fs = [0.0], [qfi_mixed(rho)]
    best = rho.copy()
    for n in range(1, n_periods + 1):
        rho = prop.period(rho)
        f = qfi_mixed(rho)
        ts.append(3 * tau * n)
        fs.append(f)
        if f >= max(fs[:-1]):
            best = rho.copy()
        if stop_after_peak is not None and f < stop_after_peak * max(fs):
            break
    return OpenRun(np.asarray(ts), np.asarray(fs), best)


DECOHERENCE_COLUMNS = ("rate_hz", "kind", "max_FQ", "t_at_max_s")
PARITY_COLUMNS = ("theta", "parity")


def decoherence_scan(C, units: PhysicalUnits, rates_hz, kinds=NOISE_KINDS, n_periods=60, noise_frame="lab", stop_after_peak=0.8):
    """Rows ``(rate_hz, kind, max_FQ, t_at_max_s)`` and the runs keyed by ``(kind, rate)``."""
    rows, runs = [], {}
    for kind in kinds:
        for rate in rates_hz:
            noise = NoiseSpec(kind, units.rate_to_core(rate))
            run = run_open(C, units.K_tau, noise, n_periods, noise_frame, stop_after_peak=stop_after_peak)
            runs[(kind, float(rate))] = run
            rows.append((float(rate), kind, run.max_fq, float(units.time_to_seconds(run.t_peak))))
    return rows, runs
