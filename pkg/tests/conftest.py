"""Shared dense-matrix oracles built independently of the package kernels."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def site_op(N, j, op):
    """Dense operator acting as ``op`` on qubit ``j`` (bit ``j`` of the index)."""
    return np.kron(np.kron(np.eye(1 << (N - 1 - j)), op), np.eye(1 << j))


def spin(N, j, axis):
    return site_op(N, j, PAULI[axis] / 2)


def collective(N, axis):
    return sum(spin(N, j, axis) for j in range(N))


def dense_ising(C, axis):
    """Two-sided sum over j != k of ``C_jk s_j s_k`` as a dense matrix."""
    N = C.shape[0]
    s = [spin(N, j, axis) for j in range(N)]
    return sum(C[j, k] * s[j] @ s[k] for j in range(N) for k in range(N) if j != k)


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng, dim, rank=None):
    A = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)



def pair_excitation_ode(A, g, t):
    """``<b_q^dag b_q>(t)`` from vacuum by integrating the Heisenberg equations.

    Two-mode pair ``H = A (n_q + n_-q) + g (b_q b_-q + h.c.)``:
    ``b_q(t) = a(t) b_q + c(t) b_-q^dag`` with ``da/dt = -i(A a + g conj(c))``
    and ``dc/dt = -i(A c + g conj(a))``; the population is ``|c|^2``.
    """

    def rhs(_, y):
        a, c = y[0] + 1j * y[1], y[2] + 1j * y[3]
        da = -1j * (A * a + g * np.conj(c))
        dc = -1j * (A * c + g * np.conj(a))
        return [da.real, da.imag, dc.real, dc.imag]

    sol = solve_ivp(rhs, (0, t[-1]), [1, 0, 0, 0], t_eval=t, method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[2] ** 2 + sol.y[3] ** 2


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one ``<criterion> PASS|FAIL: <detail>`` line for the terminal summary."""

    def emit(label, ok, detail):
        line = f"{label} {'PASS' if ok else 'FAIL'}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda l: (int(l.split()[0].split("-")[1].rstrip("abcdefghi")), l)):
            terminalreporter.write_line(line)
