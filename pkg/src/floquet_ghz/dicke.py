"""Collective-spin (zero-momentum) dynamics in the Dicke manifold.

States are length ``N + 1`` vectors over ``|M>``, ``M = -N/2 ... N/2`` in
ascending order, so the all-up coherent state is the last basis vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .exact import optimal_direction


def collective_operators(N: int):
    """Dense ``(J_x, J_y, J_z)`` for spin length ``N/2``."""
    J = N / 2
    M = np.arange(N + 1) - J
    # <M+1| J_+ |M>
    up = np.sqrt(J * (J + 1) - M[:-1] * (M[:-1] + 1))
    Jp = np.diag(up, -1).astype(complex)
    Jm = Jp.conj().T
    Jx = (Jp + Jm) / 2
    Jy = (Jp - Jm) / 2j
    Jz = np.diag(M).astype(complex)
    return Jx, Jy, Jz


def css_up(N: int) -> np.ndarray:
    phi = np.zeros(N + 1, dtype=complex)
    phi[-1] = 1.0
    return phi


def zm_hamiltonian(N: int, lam: float, K: float, tau: float) -> np.ndarray:
    """Cubic XYZ collective Hamiltonian ``(lam K^2 tau / 3)(JxJyJz + JzJyJx)``."""
    if N < 2:
        raise ConfigError("N must be at least 2")
    Jx, Jy, Jz = collective_operators(N)
    xyz = Jx @ Jy @ Jz
    return (lam * K**2 * tau / 3) * (xyz + xyz.conj().T)


@dataclass
class SpectralPropagator:
    """``exp(-i H t)`` for a Hermitian ``H`` via one eigendecomposition."""

    energies: np.ndarray
    vectors: np.ndarray

    @classmethod
    def from_hamiltonian(cls, H):
        w, V = np.linalg.eigh(H)
        return cls(w, V)

    def evolve(self, phi: np.ndarray, t) -> np.ndarray:
        """State at time ``t``; a 1D array of times returns shape ``(len(t), dim)``."""
        coeff = self.vectors.conj().T @ phi
        t = np.asarray(t, dtype=float)
        phases = np.exp(-1j * np.multiply.outer(t, self.energies))
        return (phases * coeff) @ self.vectors.T


def zm_evolve(phi: np.ndarray, H: np.ndarray, t) -> np.ndarray:
    return SpectralPropagator.from_hamiltonian(H).evolve(phi, t)


def collective_moments(states: np.ndarray, N: int):
    """First moments and the 3x3 Gram matrix ``<J_a J_b>`` for one or more states."""
    ops = collective_operators(N)
    states = np.atleast_2d(states)
    vecs = [states @ op.T for op in ops]  # rows are J_a |phi>
    mean = np.stack([np.einsum("ti,ti->t", states.conj(), v).real for v in vecs], axis=-1)
    gram = np.empty((states.shape[0], 3, 3), dtype=complex)
    for a in range(3):
        for b in range(3):
            gram[:, a, b] = np.einsum("ti,ti->t", vecs[a].conj(), vecs[b])
    return mean, gram


def qfi_dicke(states: np.ndarray, N: int, direction=(1.0, 0.0, 0.0)) -> np.ndarray:
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    mean, gram = collective_moments(states, N)
    second = np.einsum("a,tab,b->t", n, gram.real, n)
    return 4 * (second - (mean @ n) ** 2)


def qfi_matrix_dicke(phi: np.ndarray, N: int) -> np.ndarray:
    mean, gram = collective_moments(phi, N)
    F = 4 * gram[0].real - 4 * np.outer(mean[0], mean[0])
    return (F + F.T) / 2


def qfi_optimal_dicke(phi: np.ndarray, N: int):
    return optimal_direction(qfi_matrix_dicke(phi, N))


@dataclass
class ZMResult:
    t: np.ndarray
    fq: np.ndarray

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.fq))

    @property
    def max_fq(self) -> float:
        return float(self.fq[self.peak_index])

    @property
    def t_peak(self) -> float:
        return float(self.t[self.peak_index])


def zm_qfi_curve(N: int, lam: float, K: float, tau: float, t) -> ZMResult:
    """``F_Q^{S_x}(t)`` of the collective model starting from the all-up state."""
    prop = SpectralPropagator.from_hamiltonian(zm_hamiltonian(N, lam, K, tau))
    t = np.asarray(t, dtype=float)
    return ZMResult(t, qfi_dicke(prop.evolve(css_up(N), t), N))


def zm_reference(N: int, lam: float, K: float = 1.0, tau: float = 1.0, n_grid: int = 400, refine: bool = True) -> ZMResult:
    """Locate the first ``F_Q^{S_x}`` maximum of the collective model.

    The scan runs to three times the ``t_c`` estimate, which comfortably
    contains the first peak; the peak is then refined on a finer local grid.
    ``tau`` only sets the time scale, the peak height does not depend on it.
    """
    from .spinwave import tc_estimate

    if N < 3:
        t_end = 10.0 / (lam * K**2 * tau)
    else:
        t_end = 3 * tc_estimate(N, lam, K, tau)
    t = np.linspace(0.0, t_end, n_grid + 1)
    res = zm_qfi_curve(N, lam, K, tau, t)
    i = first_maximum(res.fq)
    if refine and 0 < i < len(t) - 1:
        fine = np.linspace(t[i - 1], t[i + 1], 201)
        sub = zm_qfi_curve(N, lam, K, tau, fine)
        j = sub.peak_index
        return ZMResult(fine[j : j + 1], sub.fq[j : j + 1])
    return ZMResult(t[i : i + 1], res.fq[i : i + 1])


def first_maximum(y: np.ndarray, drop: float = 0.1) -> int:
    """Index of the first prominent maximum.

    A local maximum counts once the curve has fallen ``drop`` (relative)
    below it; otherwise the global maximum is returned.
    """
    y = np.asarray(y)
    best = 0
    for i in range(1, len(y)):
        if y[i] > y[best]:
            best = i
        elif y[i] < (1 - drop) * y[best]:
            return best
    return int(np.argmax(y))
