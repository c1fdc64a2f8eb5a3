import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm, solve_sylvester

from conftest import collective, dense_ising, random_density, random_state, spin
from floquet_ghz import exact
from floquet_ghz import open_system as op
from floquet_ghz.errors import CapacityError, ConfigError
from floquet_ghz.io import read_table
from floquet_ghz.lattice import LatticeSpec, ModelParams, build_coupling_matrix


def chain(N, alpha=1.0):
    return build_coupling_matrix(LatticeSpec.chain(N), ModelParams(alpha))


def jump_operators(N, noise):
    if noise.kind == "local_dephasing":
        return [np.sqrt(noise.rate) * spin(N, j, "z") for j in range(N)]
    return [np.sqrt(noise.rate) * collective(N, "z")]


def liouvillian(H, jumps):
    """Dense superoperator acting on row-major ``vec(rho)``: vec(A X B) = kron(A, B.T) vec(X)."""
    d = H.shape[0]
    eye = np.eye(d)
    Lv = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for L in jumps:
        LdL = L.conj().T @ L
        Lv += np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T)
    return Lv


def evolve_dense(rho, H, jumps, t):
    d = rho.shape[0]
    return (expm(t * liouvillian(H, jumps)) @ rho.reshape(-1)).reshape(d, d)


def toggled_period_oracle(rho, C, tau, noise):
    jumps = jump_operators(C.shape[0], noise)
    for axis in "yxz":
        rho = evolve_dense(rho, dense_ising(C, axis), jumps, tau)
    return rho


def lab_period_oracle(rho, C, tau, noise):
    N = C.shape[0]
    jumps = jump_operators(N, noise)
    Hz = dense_ising(C, "z")
    Rx = lambda a: expm(-1j * a * collective(N, "x"))
    Ry = lambda a: expm(-1j * a * collective(N, "y"))
    conj = lambda U, r: U @ r @ U.conj().T
    rho = conj(Rx(-np.pi / 2), rho)
    rho = evolve_dense(rho, Hz, jumps, tau)
    rho = conj(Ry(-np.pi / 2) @ Rx(np.pi / 2), rho)
    rho = evolve_dense(rho, Hz, jumps, tau)
    rho = conj(Ry(np.pi / 2), rho)
    return evolve_dense(rho, Hz, jumps, tau)


def sld_qfi(rho, A):
    """``Tr(rho L^2)`` with the SLD from ``(rho L + L rho)/2 = -i[A, rho]``."""
    drho = -1j * (A @ rho - rho @ A)
    L = solve_sylvester(rho, rho, 2 * drho)
    return float(np.trace(rho @ L @ L).real)


NOISES = [op.NoiseSpec("local_dephasing", 0.3), op.NoiseSpec("global_dephasing", 0.2)]


class TestTypes:
    @pytest.mark.parametrize("kind,rate", [("amplitude", 1.0), ("local_dephasing", -1.0)])
    def test_noise_validation(self, kind, rate):
        with pytest.raises(ConfigError):
            op.NoiseSpec(kind, rate)

    def test_units(self):
        u = op.PhysicalUnits(560.0, 0.18e-3)
        assert u.K_tau == pytest.approx(0.1008)
        assert u.rate_to_core(56.0) == pytest.approx(0.1)
        assert u.time_to_seconds(560.0) == pytest.approx(1.0)
        with pytest.raises(ConfigError):
            op.PhysicalUnits(0.0, 1e-3)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            op.pure_density(np.zeros(1 << (op.MAX_OPEN_SPINS + 1)))

    def test_nonphysical(self):
        rho = np.diag([1.2, -0.2]).astype(complex)
        with pytest.raises(op.NonPhysicalStateError) as info:
            op.check_density_matrix(rho)
        assert info.value.diagnostics["min_eigenvalue"] == pytest.approx(-0.2)
        with pytest.raises(op.NonPhysicalStateError):
            op.check_density_matrix(np.array([[0.5, 1.0], [0.0, 0.5]]))
        with pytest.raises(op.NonPhysicalStateError):
            op.run_open(np.zeros((1, 1)), 0.1, NOISES[0], 1, rho0=rho)


class TestSegments:
    @pytest.mark.parametrize("noise", NOISES)
    def test_diagonal_segment_matches_dense(self, noise, rng):
        C = chain(3)
        rho = random_density(rng, 8)
        out = op.lindblad_segment(rho, exact.ising_energies(C), noise, 0.7)
        ref = evolve_dense(rho, dense_ising(C, "z"), jump_operators(3, noise), 0.7)
        assert np.abs(out - ref).max() < 1e-12

    @pytest.mark.parametrize("noise", NOISES)
    @pytest.mark.parametrize("axis", ["x", "y"])
    def test_integrated_segment_matches_dense(self, noise, axis, rng):
        C = chain(3)
        rho = random_density(rng, 8)
        jumps = [np.sqrt(noise.rate) * spin(3, j, axis) for j in range(3)]
        if noise.kind == "global_dephasing":
            jumps = [np.sqrt(noise.rate) * collective(3, axis)]
        out = op.lindblad_segment(rho, exact.ising_energies(C), noise, 0.7, noise_axis=axis)
        ref = evolve_dense(rho, dense_ising(C, "z"), jumps, 0.7)
        assert np.abs(out - ref).max() < 1e-8
        assert np.abs(out - out.conj().T).max() < 1e-14
        assert abs(np.trace(out) - 1) < 1e-8

    def test_unknown_axis(self, rng):
        with pytest.raises(ConfigError):
            op.lindblad_segment(random_density(rng, 4), np.zeros(4), NOISES[0], 0.1, noise_axis="w")

    @pytest.mark.parametrize("kind", op.NOISE_KINDS)
    @pytest.mark.parametrize("axis", ["z", "x"])
    def test_ghz_decay_law(self, kind, axis):
        N, rate = 4, 0.2
        noise = op.NoiseSpec(kind, rate)
        # GHZ along the dephasing axis, so its coherence is the decaying element
        psi = exact.ghz_x(N) if axis == "x" else (exact.initial_css(N) + exact.initial_css(N)[::-1]) / np.sqrt(2)
        V = exact.HADAMARD if axis == "x" else np.eye(2)
        expo = N if kind == "local_dephasing" else N**2
        dt = 5 / (rate * N) / 10
        rho = op.pure_density(psi)
        for k in range(1, 11):
            rho = op.lindblad_segment(rho, np.zeros(1 << N), noise, dt, noise_axis=axis)
            coh = op.ghz_coherence(op.conjugate_product(rho, V.conj().T) if axis == "x" else rho)
            expected = 0.5 * np.exp(-rate * expo * k * dt / 2)
            assert abs(coh.real / expected - 1) < 1e-6


class TestPeriods:
    @pytest.mark.parametrize("noise", NOISES)
    def test_lab_period_matches_dense(self, noise, rng):
        C = chain(3, 1.3)
        rho = random_density(rng, 8)
        out = op.OpenPropagator(C, 0.3, noise).period(rho)
        assert np.abs(out - lab_period_oracle(rho, C, 0.3, noise)).max() < 1e-12

    @pytest.mark.parametrize("noise", NOISES)
    def test_toggled_period_matches_dense(self, noise, rng):
        C = chain(3, 1.3)
        rho = random_density(rng, 8)
        out = op.OpenPropagator(C, 0.3, noise, "toggled").period(rho)
        assert np.abs(out - toggled_period_oracle(rho, C, 0.3, noise)).max() < 1e-8

    @pytest.mark.parametrize("frame", op.NOISE_FRAMES)
    def test_closed_limit(self, frame):
        C = chain(6)
        psi = exact.initial_css(6)
        rho = op.pure_density(psi)
        prop = op.OpenPropagator(C, 0.1, op.NoiseSpec("local_dephasing", 0.0), frame)
        ed = exact.FloquetPropagator(C, 0.1, "pulsed")
        for _ in range(10):
            rho = prop.period(rho)
            psi = ed.period(psi)
        assert 1 - np.vdot(psi, rho @ psi).real < 1e-8

    def test_pulsed_period_open(self, rng):
        C = chain(3)
        rho = random_density(rng, 8)
        a = op.pulsed_period_open(rho, exact.FloquetSchedule(0.2, 3), C, NOISES[0])
        prop = op.OpenPropagator(C, 0.2, NOISES[0])
        b = prop.period(prop.period(prop.period(rho)))
        assert np.allclose(a, b)

    def test_unknown_frame(self):
        with pytest.raises(ConfigError):
            op.OpenPropagator(chain(3), 0.1, NOISES[0], "rotating")

    @pytest.mark.parametrize("noise", NOISES)
    def test_physicality_over_long_run(self, noise):
        C = chain(5)
        prop = op.OpenPropagator(C, 0.1, noise)
        rho = op.pure_density(exact.initial_css(5))
        for _ in range(300):
            rho = prop.period(rho)
        diag = op.check_density_matrix(rho)
        assert diag["min_eigenvalue"] > -1e-10


class TestQFI:
    def test_ghz(self):
        assert op.qfi_mixed(op.pure_density(exact.ghz_x(10))) == pytest.approx(100, abs=1e-8)

    def test_maximally_mixed(self):
        assert op.qfi_mixed(np.eye(16) / 16) == pytest.approx(0, abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 5))
    def test_pure_reduction(self, seed, N):
        r = np.random.default_rng(seed)
        psi = random_state(r, 1 << N)
        n = r.normal(size=3)
        assert op.qfi_mixed(op.pure_density(psi), n) == pytest.approx(exact.qfi_pure(psi, n), abs=1e-8)

    @pytest.mark.parametrize("direction", [(1, 0, 0), (0, 1, 0), (0.3, -0.2, 0.9)])
    def test_sld_oracle(self, direction, rng):
        rho = random_density(rng, 8)
        n = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
        A = sum(c * collective(3, a) for c, a in zip(n, "xyz"))
        assert op.qfi_mixed(rho, direction) == pytest.approx(sld_qfi(rho, A), abs=1e-8)

    def test_sld_oracle_on_dephased_state(self):
        # low-rank parity-symmetric state from the dynamics, padded to full rank
        C = chain(3)
        rho = op.OpenPropagator(C, 0.3, NOISES[0]).period(op.pure_density(exact.initial_css(3)))
        rho = 0.999 * rho + 0.001 * np.eye(8) / 8
        assert op.qfi_mixed(rho) == pytest.approx(sld_qfi(rho, collective(3, "x")), abs=1e-8)

    def test_collective_on_rows(self, rng):
        M = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        n = np.array([0.2, 0.5, -0.3])
        n = n / np.linalg.norm(n)
        A = sum(c * collective(4, a) for c, a in zip(n, "xyz"))
        assert np.allclose(op.collective_on_rows(M, n), A @ M)


class TestParity:
    def test_pure_agrees(self, rng):
        psi = random_state(rng, 32)
        theta = np.linspace(0, np.pi, 9)
        assert np.allclose(op.parity_mixed(op.pure_density(psi), theta), exact.parity_expectation(psi, theta), atol=1e-12)

    def test_contrast(self):
        theta = np.linspace(0, 2 * np.pi / 6, 64)
        values = op.parity_mixed(op.pure_density(exact.ghz_x(6)), theta)
        assert op.parity_contrast(values) == pytest.approx(1.0, abs=1e-3)


class TestRuns:
    def test_monotone_in_rate(self):
        C = chain(6)
        peaks = {}
        for kind in op.NOISE_KINDS:
            peaks[kind] = [op.run_open(C, 0.1, op.NoiseSpec(kind, r), 40, stop_after_peak=0.8).max_fq for r in (0.0, 0.002, 0.01, 0.05)]
            assert np.all(np.diff(peaks[kind]) <= 1e-9)
        assert peaks["local_dephasing"][0] == pytest.approx(peaks["global_dephasing"][0])

    def test_noiseless_run_matches_ed(self):
        C = chain(6)
        run = op.run_open(C, 0.1, op.NoiseSpec(), 30)
        series, _ = exact.run_floquet(C, exact.FloquetSchedule(0.1, 30), with_opt=False)
        assert np.allclose(run.fq, series.FQ_Sx, atol=1e-8)
        assert np.allclose(run.t, series.t)

    def test_scan_rows_and_csv(self, tmp_path):
        from floquet_ghz.io import write_table

        rows, runs = op.decoherence_scan(chain(4), op.PhysicalUnits(560.0, 0.18e-3), [0.0, 30.0], n_periods=20)
        assert [r[:2] for r in rows] == [(0.0, "local_dephasing"), (30.0, "local_dephasing"), (0.0, "global_dephasing"), (30.0, "global_dephasing")]
        assert set(runs) == {(k, r) for k in op.NOISE_KINDS for r in (0.0, 30.0)}
        path = write_table(tmp_path / "d.csv", op.DECOHERENCE_COLUMNS, rows)
        _, cols, table = read_table(path)
        assert cols == list(op.DECOHERENCE_COLUMNS)
        assert table[1][1] == "local_dephasing"
