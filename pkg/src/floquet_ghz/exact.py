"""Exact state-vector dynamics of the Floquet sequence and pure-state observables.

Basis convention: qubit ``j`` is bit ``j`` of the basis index and bit value 0
is spin up (``s^z = +1/2``).  The Ising segments use the two-sided sum
``H_mm = sum_{j != k} K_jk s_j^m s_k^m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ConfigError

MAX_SPINS = 22
PHASE_CACHE_MAX = 16
DENSE_MAX_SPINS = 10

_SQ2 = 1 / np.sqrt(2)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2
_S_DAG = np.diag([1, -1j])
# single-qubit maps taking the segment axis onto z: V sigma_axis V^dag = sigma_z
TO_Z = {"x": HADAMARD, "y": HADAMARD @ _S_DAG, "z": None}

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
AXES = ("x", "y", "z")


def n_spins(psi: np.ndarray) -> int:
    n = int(psi.shape[0]).bit_length() - 1
    if psi.shape[0] != 1 << n:
        raise ConfigError(f"state length {psi.shape[0]} is not a power of two")
    return n


def _check_cap(N, cap=MAX_SPINS):
    if N > cap:
        raise CapacityError(f"N={N} exceeds the state-vector cap of {cap} spins")


def initial_css(N: int) -> np.ndarray:
    """All spins up along z."""
    if N < 1:
        raise ConfigError("N must be positive")
    _check_cap(N)
    psi = np.zeros(1 << N, dtype=complex)
    psi[0] = 1.0
    return psi


def product_state(spinors) -> np.ndarray:
    """Tensor product of single-qubit spinors, first spinor is qubit 0."""
    psi = np.array([1.0 + 0j])
    for v in spinors:
        psi = np.kron(np.asarray(v, dtype=complex), psi)
    return psi


def ghz_x(N: int) -> np.ndarray:
    """``(|->...->> + |<-...<-|) / sqrt(2)``, the GHZ state along x."""
    plus = np.array([1, 1]) * _SQ2
    minus = np.array([1, -1]) * _SQ2
    return (product_state([plus] * N) + product_state([minus] * N)) * _SQ2


def apply_single_qubit(psi: np.ndarray, U: np.ndarray, sites=None) -> np.ndarray:
    """Apply the 2x2 unitary ``U`` to each qubit in ``sites`` (default: all)."""
    N = n_spins(psi)
    out = psi
    for j in range(N) if sites is None else sites:
        view = out.reshape(1 << (N - 1 - j), 2, 1 << j)
        out = np.einsum("ab,ibk->iak", U, view).reshape(-1)
    return out


def popcounts(N: int) -> np.ndarray:
    b = np.arange(1 << N, dtype=np.int64)
    count = np.zeros(1 << N, dtype=np.int64)
    for j in range(N):
        count += (b >> j) & 1
    return count


def sz_values(N: int) -> np.ndarray:
    """Eigenvalue of ``S_z`` for every basis index."""
    return N / 2 - popcounts(N)


def ising_energies(C: np.ndarray, chunk=1 << 16) -> np.ndarray:
    """Diagonal of ``H_zz`` in the computational basis, computed in chunks."""
    N = C.shape[0]
    out = np.empty(1 << N)
    bits = np.arange(N)
    for start in range(0, 1 << N, chunk):
        b = np.arange(start, min(start + chunk, 1 << N), dtype=np.int64)
        sigma = 1.0 - 2.0 * ((b[:, None] >> bits) & 1)
        out[start : start + len(b)] = 0.25 * np.einsum("bj,bj->b", sigma @ C, sigma)
    return out


def _check_couplings(psi, C):
    N = n_spins(psi)
    if C.shape != (N, N):
        raise ConfigError(f"coupling matrix {C.shape} does not match {N} spins")
    return N


def segment_evolve(psi: np.ndarray, axis: str, tau: float, C: np.ndarray, energies=None) -> np.ndarray:
    """Apply ``exp(-i H_aa tau)`` exactly via rotation to the z basis."""
    _check_couplings(psi, C)
    E = ising_energies(C) if energies is None else energies
    V = TO_Z[axis]
    if V is not None:
        psi = apply_single_qubit(psi, V)
    psi = np.exp(-1j * tau * E) * psi
    if V is not None:
        psi = apply_single_qubit(psi, V.conj().T)
    return psi


def rotation(axis: str, angle: float) -> np.ndarray:
    """Single-qubit ``exp(-i angle sigma_axis / 2)``."""
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * PAULI[axis]


def global_rotation(psi: np.ndarray, axis: str, angle: float) -> np.ndarray:
    """``exp(-i angle S_axis) psi``."""
    return apply_single_qubit(psi, rotation(axis, angle))


@dataclass(frozen=True)
class FloquetSchedule:
    tau: float
    n_periods: int = 1
    form: str = "segment"

    def __post_init__(self):
        if not self.tau >= 0:
            raise ConfigError(f"tau must be non-negative, got {self.tau}")
        if self.n_periods < 0:
            raise ConfigError("n_periods must be non-negative")
        if self.form not in ("segment", "pulsed"):
            raise ConfigError(f"unknown schedule form {self.form!r}")

    @property
    def period(self) -> float:
        return 3 * self.tau

    def times(self) -> np.ndarray:
        return self.period * np.arange(self.n_periods + 1)


class FloquetPropagator:
    """Cached one-period propagator ``U(3 tau)`` for a fixed coupling matrix.

    Above ``PHASE_CACHE_MAX`` spins the diagonal phases are recomputed on each
    segment instead of being stored.
    """

    def __init__(self, C: np.ndarray, tau: float, form: str = "segment", cache_max: int = PHASE_CACHE_MAX):
        self.C = np.asarray(C, dtype=float)
        self.N = self.C.shape[0]
        _check_cap(self.N)
        self.tau = float(tau)
        self.form = form
        self._phases = None
        if self.N <= cache_max:
            self._phases = np.exp(-1j * self.tau * ising_energies(self.C))

    def _z_phase(self):
        if self._phases is not None:
            return self._phases
        return np.exp(-1j * self.tau * ising_energies(self.C))

    def segment(self, psi, axis):
        V = TO_Z[axis]
        if V is not None:
            psi = apply_single_qubit(psi, V)
        psi = self._z_phase() * psi
        if V is not None:
            psi = apply_single_qubit(psi, V.conj().T)
        return psi

    def period(self, psi):
        if psi.shape[0] != 1 << self.N:
            raise ConfigError("state does not match coupling matrix")
        if self.form == "segment":
            for axis in ("y", "x", "z"):
                psi = self.segment(psi, axis)
            return psi
        # rightmost factor first: e^{i pi/2 S_x}, H, e^{-i pi/2 S_x}, e^{i pi/2 S_y}, H, e^{-i pi/2 S_y}, H
        half = np.pi / 2
        psi = global_rotation(psi, "x", -half)
        psi = self._z_phase() * psi
        psi = global_rotation(psi, "x", half)
        psi = global_rotation(psi, "y", -half)
        psi = self._z_phase() * psi
        psi = global_rotation(psi, "y", half)
        return self._z_phase() * psi


def floquet_period(psi: np.ndarray, schedule: FloquetSchedule, C: np.ndarray) -> np.ndarray:
    """Apply ``schedule.n_periods`` Floquet periods (one if ``n_periods`` is 0 or 1)."""
    _check_couplings(psi, C)
    prop = FloquetPropagator(C, schedule.tau, schedule.form)
    for _ in range(max(schedule.n_periods, 1)):
        psi = prop.period(psi)
    return psi


# --- dense operators (small N verification) ---------------------------------


def spin_operators(N: int, cap=DENSE_MAX_SPINS) -> dict:
    """Sparse single-site ``s_j^a`` for every site, keyed by axis."""
    if N > cap:
        raise CapacityError(f"dense operators capped at N={cap}")
    ops = {a: [] for a in AXES}
    eye = sp.identity(2, format="csr")
    for j in range(N):
        for a in AXES:
            factors = [eye] * N
            factors[j] = sp.csr_matrix(PAULI[a] / 2)
            op = factors[N - 1]
            for f in reversed(factors[: N - 1]):
                op = sp.kron(op, f, format="csr")
            ops[a].append(op)
    return ops


def ising_matrix(C: np.ndarray, axis: str, ops=None) -> sp.csr_matrix:
    N = C.shape[0]
    ops = spin_operators(N) if ops is None else ops
    H = sp.csr_matrix((1 << N, 1 << N), dtype=complex)
    for j in range(N):
        for k in range(N):
            if j != k and C[j, k] != 0:
                H = H + C[j, k] * (ops[axis][j] @ ops[axis][k])
    return H


def three_body_strength(C: np.ndarray) -> np.ndarray:
    """``K[j,k,l] = K_jl K_kl + K_jk K_lk - K_kj K_lj``, zero unless all distinct."""
    T = (
        np.einsum("jl,kl->jkl", C, C)
        + np.einsum("jk,lk->jkl", C, C)
        - np.einsum("kj,lj->jkl", C, C)
    )
    N = C.shape[0]
    idx = np.arange(N)
    T[idx, idx, :] = 0
    T[idx, :, idx] = 0
    T[:, idx, idx] = 0
    return T


def three_body_operator(W: np.ndarray, ops) -> sp.csr_matrix:
    """``sum_{j,k,l} W_jkl (s_j^x s_k^y s_l^z + s_l^z s_k^y s_j^x)``."""
    N = W.shape[0]
    H = sp.csr_matrix((1 << N, 1 << N), dtype=complex)
    for j, k, l in zip(*np.nonzero(W)):
        xyz = ops["x"][j] @ ops["y"][k] @ ops["z"][l]
        H = H + W[j, k, l] * (xyz + xyz.conj().T)
    return H


def effective_hamiltonian_dense(C: np.ndarray, tau: float) -> np.ndarray:
    """First-order BCH Hamiltonian: Heisenberg part plus the tau-linear three-body term."""
    N = C.shape[0]
    ops = spin_operators(N)
    heis = sum(ising_matrix(C, a, ops) for a in AXES)
    H = heis / 3
    if tau != 0:
        H = H + (tau / 3) * three_body_operator(three_body_strength(C), ops)
    return H.toarray()


# --- observables -------------------------------------------------------------


def _flip(psi, N, j):
    view = psi.reshape(1 << (N - 1 - j), 2, 1 << j)
    return view[:, ::-1, :].reshape(-1)


def apply_collective(psi: np.ndarray, axis: str) -> np.ndarray:
    """``S_axis psi`` without building matrices."""
    N = n_spins(psi)
    if axis == "z":
        return sz_values(N) * psi
    out = np.zeros_like(psi)
    for j in range(N):
        flipped = _flip(psi, N, j)
        if axis == "x":
            out += flipped
        else:
            # sigma_y |0> = i|1>, sigma_y |1> = -i|0>
            bit = (np.arange(psi.shape[0]) >> j) & 1
            out += np.where(bit == 1, 1j, -1j) * flipped
    return out / 2


def expectation_vector(psi: np.ndarray):
    """``<S_a>`` and the vectors ``S_a psi`` for a = x, y, z."""
    vecs = [apply_collective(psi, a) for a in AXES]
    mean = np.array([np.vdot(psi, v).real for v in vecs])
    return mean, vecs


def qfi_pure(psi: np.ndarray, direction=(1.0, 0.0, 0.0)) -> float:
    """``4 Var(n.S)`` for a normalized pure state."""
    n = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0:
        raise ConfigError("generator direction has zero length")
    n = n / norm
    v = sum(c * apply_collective(psi, a) for c, a in zip(n, AXES) if c != 0)
    mean = np.vdot(psi, v).real
    return float(4 * (np.vdot(v, v).real - mean**2))


def qfi_matrix(psi: np.ndarray) -> np.ndarray:
    mean, vecs = expectation_vector(psi)
    G = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
    F = 4 * G.real - 4 * np.outer(mean, mean)
    return (F + F.T) / 2


def optimal_direction(F: np.ndarray, rtol=1e-9):
    """Largest eigenpair of a symmetric 3x3 QFI matrix.

    Degenerate top eigenvalues resolve to the eigenvector with the largest
    ``|n_x|``; the sign is fixed so that ``n_x >= 0``.
    """
    w, V = np.linalg.eigh(F)
    top = w[-1]
    scale = max(abs(top), 1.0)
    deg = np.nonzero(np.abs(w - top) <= rtol * scale)[0]
    if len(deg) > 1:
        sub = V[:, deg]
        # direction in the degenerate subspace closest to x
        n = sub @ sub[0].conj()
        if np.linalg.norm(n) < 1e-12:
            n = V[:, -1]
        n = n / np.linalg.norm(n)
    else:
        n = V[:, -1]
    if n[0] < 0 or (n[0] == 0 and n[np.argmax(np.abs(n))] < 0):
        n = -n
    return float(top), n.real


def qfi_matrix_optimal(psi: np.ndarray):
    """``(F_opt, n_opt)`` from the QFI matrix of a pure state."""
    return optimal_direction(qfi_matrix(psi))


def total_spin_squared(psi: np.ndarray) -> float:
    return float(sum(np.vdot(v, v).real for v in (apply_collective(psi, a) for a in AXES)))


def nfm_estimate(psi: np.ndarray) -> float:
    """Finite-momentum excitation number inferred from the total-spin deficit."""
    N = n_spins(psi)
    return ((N / 2) * (N / 2 + 1) - total_spin_squared(psi)) / (N + 1)


def to_x_basis(psi: np.ndarray) -> np.ndarray:
    """Rotate so that ``S_x`` eigenstates become computational basis states."""
    return apply_single_qubit(psi, HADAMARD)


def sx_distribution(psi: np.ndarray) -> np.ndarray:
    """``P(m)`` for ``S_x = m``, ordered ``m = -N/2 ... N/2``."""
    N = n_spins(psi)
    prob = np.abs(to_x_basis(psi)) ** 2
    # m = N/2 - weight, so ascending m is descending weight
    by_weight = np.bincount(popcounts(N), weights=prob, minlength=N + 1)
    return by_weight[::-1]


def write_distribution_csv(P: np.ndarray, path, provenance=None) -> Path:
    """Write a ``P(m)`` snapshot with columns ``m, P``."""
    from .io import write_table

    N = len(P) - 1
    m = np.arange(N + 1) - N / 2
    return write_table(path, ("m", "P"), np.column_stack([m, P]), provenance)


def parity_expectation(psi: np.ndarray, theta) -> np.ndarray:
    """``<exp(-i S_x theta) prod_j sigma_j^z exp(i S_x theta)>``.

    In the x basis the parity flips every bit and the rotation is diagonal, so
    all angles come from one set of coefficients ``c_m``.
    """
    N = n_spins(psi)
    phi = to_x_basis(psi)
    # index of the bitwise complement ~b is 2^N - 1 - b
    c = _weight_sums(phi.conj() * phi[::-1], N)
    return parity_from_weights(c, N, theta)


def _weight_sums(values: np.ndarray, N: int) -> np.ndarray:
    w = popcounts(N)
    return np.bincount(w, weights=values.real, minlength=N + 1) + 1j * np.bincount(
        w, weights=values.imag, minlength=N + 1
    )


def parity_from_weights(c: np.ndarray, N: int, theta) -> np.ndarray:
    """``Re sum_w c_w exp(-2 i theta m_w)`` with ``m_w = N/2 - w``."""
    m = N / 2 - np.arange(N + 1)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return (np.exp(-2j * np.outer(theta, m)) @ c).real


def dicke_amplitudes(psi: np.ndarray) -> np.ndarray:
    """Overlaps with the symmetric Dicke states, ordered ``M = -N/2 ... N/2``."""
    from math import comb

    N = n_spins(psi)
    norms = np.sqrt([comb(N, k) for k in range(N + 1)])
    return (_weight_sums(psi, N) / norms)[::-1]


def dicke_deficit(psi: np.ndarray) -> float:
    """``1 - ||P_Dicke psi||^2``."""
    return float(1.0 - np.sum(np.abs(dicke_amplitudes(psi)) ** 2))


# --- time series -------------------------------------------------------------

SERIES_COLUMNS = ("t", "FQ_Sx", "FQ_opt", "Sx", "Sz", "S2", "NFM")


@dataclass
class ObservableSeries:
    """Stroboscopic observables, one row per recorded period."""

    N: int
    t: list = field(default_factory=list)
    FQ_Sx: list = field(default_factory=list)
    FQ_opt: list = field(default_factory=list)
    Sx: list = field(default_factory=list)
    Sz: list = field(default_factory=list)
    S2: list = field(default_factory=list)
    NFM: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)

    def record(self, t, psi, with_opt=True):
        if self.t and t <= self.t[-1]:
            raise ConfigError("time grid must be strictly increasing")
        mean, vecs = expectation_vector(psi)
        G = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
        F = 4 * G.real - 4 * np.outer(mean, mean)
        s2 = float(np.trace(G).real)
        self.t.append(float(t))
        self.FQ_Sx.append(float(F[0, 0]))
        self.FQ_opt.append(optimal_direction((F + F.T) / 2)[0] if with_opt else float("nan"))
        self.Sx.append(float(mean[0]))
        self.Sz.append(float(mean[2]))
        self.S2.append(s2)
        self.NFM.append(((self.N / 2) * (self.N / 2 + 1) - s2) / (self.N + 1))

    def as_array(self) -> np.ndarray:
        return np.column_stack([getattr(self, c) for c in SERIES_COLUMNS])

    def peak(self, column="FQ_Sx"):
        """Index of the maximum of ``column``."""
        return int(np.argmax(getattr(self, column)))

    def write_csv(self, path, provenance=None) -> Path:
        from .io import write_table

        return write_table(path, SERIES_COLUMNS, self.as_array(), provenance)


def run_floquet(
    C: np.ndarray,
    schedule: FloquetSchedule,
    psi0=None,
    every: int = 1,
    snapshot_at=None,
    with_opt: bool = True,
) -> tuple[ObservableSeries, np.ndarray]:
    """Evolve from ``psi0`` (default: CSS along z), recording every ``every`` periods.

    ``snapshot_at`` is a collection of period indices at which the full state
    is kept in ``series.snapshots``.
    """
    N = C.shape[0]
    psi = initial_css(N) if psi0 is None else np.asarray(psi0, dtype=complex)
    prop = FloquetPropagator(C, schedule.tau, schedule.form)
    series = ObservableSeries(N)
    series.record(0.0, psi, with_opt)
    keep = set(snapshot_at or ())
    if 0 in keep:
        series.snapshots[0] = psi.copy()
    for n in range(1, schedule.n_periods + 1):
        psi = prop.period(psi)
        if n % every == 0 or n == schedule.n_periods:
            series.record(n * schedule.period, psi, with_opt)
        if n in keep:
            series.snapshots[n] = psi.copy()
    return series, psi
