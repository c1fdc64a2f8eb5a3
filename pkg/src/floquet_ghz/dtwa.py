"""Discrete truncated Wigner (DTWA) dynamics of the Floquet sequence.

Each trajectory is a set of classical spins whose components start at
``+-1/2``.  An Ising segment ``H_mm`` conserves every ``s_k^m``, so the local
fields are frozen during the segment and each spin precesses rigidly about
the ``m`` axis: the segment is integrated exactly.

Spins are stored component-major, ``spins[a, j, i]`` = component ``a`` of spin
``j`` in trajectory ``i``, which keeps the field evaluation a single matrix
product per segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .exact import FloquetSchedule, optimal_direction

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}
CHECKPOINT_VERSION = 1
DEFAULT_TRAJECTORIES = 1000


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for trajectory ``index`` of master ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass
class TrajectoryEnsemble:
    spins: np.ndarray = field(repr=False)
    seed: int
    period_index: int = 0
    first_index: int = 0

    @property
    def n_spins(self) -> int:
        return self.spins.shape[1]

    @property
    def n_traj(self) -> int:
        return self.spins.shape[2]

    def as_array(self) -> np.ndarray:
        """View with shape ``(n_traj, N, 3)``."""
        return self.spins.transpose(2, 1, 0)

    def copy(self):
        return TrajectoryEnsemble(self.spins.copy(), self.seed, self.period_index, self.first_index)

    def save(self, path) -> Path:
        path = Path(path)
        with path.open("wb") as fh:
            np.savez(
                fh,
                version=CHECKPOINT_VERSION,
                N=self.n_spins,
                n_traj=self.n_traj,
                seed=self.seed,
                period_index=self.period_index,
                first_index=self.first_index,
                spins=self.spins,
            )
        return path

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            if int(data["version"]) != CHECKPOINT_VERSION:
                raise ConfigError(f"unsupported checkpoint version {int(data['version'])}")
            spins = data["spins"]
            if spins.shape != (3, int(data["N"]), int(data["n_traj"])):
                raise ConfigError("checkpoint header does not match payload")
            return cls(spins, int(data["seed"]), int(data["period_index"]), int(data["first_index"]))


def sample_initial(N: int, n_traj: int, seed: int, first_index: int = 0) -> TrajectoryEnsemble:
    """Discrete Wigner sample of the all-up coherent state.

    ``s^z = +1/2`` for every spin; ``s^x`` and ``s^y`` are independent fair
    ``+-1/2`` draws.  Trajectory ``i`` depends only on ``(seed, i)``.
    """
    if n_traj < 1:
        raise ConfigError("n_traj must be >= 1")
    spins = np.empty((3, N, n_traj))
    spins[2] = 0.5
    for i in range(n_traj):
        bits = trajectory_rng(seed, first_index + i).integers(0, 2, size=(2, N))
        spins[:2, :, i] = bits - 0.5
    return TrajectoryEnsemble(spins, int(seed), 0, first_index)


def _rotate(spins: np.ndarray, axis: int, angle: np.ndarray) -> None:
    b, c = (axis + 1) % 3, (axis + 2) % 3
    cos, sin = np.cos(angle), np.sin(angle)
    sb, sc = spins[b].copy(), spins[c]
    spins[b] = sb * cos - sc * sin
    spins[c] = sb * sin + sc * cos


def local_fields(spins: np.ndarray, axis: int, C: np.ndarray) -> np.ndarray:
    """``Omega_j = dH/ds_j^a = 2 sum_k K_jk s_k^a`` for the two-sided Ising sum."""
    return 2.0 * (C @ spins[axis])


def segment_step(E: TrajectoryEnsemble, axis: str, tau: float, C: np.ndarray, inplace=False) -> TrajectoryEnsemble:
    """Exact classical evolution under ``H_aa`` for a time ``tau``."""
    if C.shape != (E.n_spins, E.n_spins):
        raise ConfigError("coupling matrix does not match the ensemble")
    out = E if inplace else E.copy()
    a = AXIS_INDEX[axis]
    _rotate(out.spins, a, tau * local_fields(out.spins, a, C))
    return out


def period_step(E: TrajectoryEnsemble, schedule: FloquetSchedule, C: np.ndarray, inplace=False) -> TrajectoryEnsemble:
    """One period ``U(3 tau)``: yy, then xx, then zz."""
    out = E if inplace else E.copy()
    for axis in ("y", "x", "z"):
        segment_step(out, axis, schedule.tau, C, inplace=True)
    out.period_index += 1
    return out


def _ordered_sum(x: np.ndarray, axis=-1) -> np.ndarray:
    # sorting first makes the reduction independent of trajectory order
    return np.sum(np.sort(x, axis=axis), axis=axis)


@dataclass(frozen=True)
class EnsembleEstimate:
    n_traj: int
    mean: np.ndarray
    second: np.ndarray
    S2: float
    FQ_Sx: float
    FQ_Sx_err: float
    FQ_opt: float
    FQ_opt_err: float
    NFM: float
    NFM_err: float

    @property
    def Sx(self):
        return float(self.mean[0])

    @property
    def Sz(self):
        return float(self.mean[2])


def trajectory_moments(E: TrajectoryEnsemble, same_site: str = "classical"):
    """Per-trajectory collective spin and symmetrized pair products.

    With ``same_site="exact"`` the same-site products ``s_j^a s_j^b`` are
    replaced by their quantum Weyl symbol ``delta_ab / 4``; ``"classical"``
    keeps the raw products.
    """
    s = E.spins
    S = s.sum(axis=1)  # (3, n_traj)
    P = np.einsum("ai,bi->abi", S, S)
    if same_site == "exact":
        P -= np.einsum("aji,bji->abi", s, s)
        P += (E.n_spins / 4) * np.eye(3)[:, :, None]
    elif same_site != "classical":
        raise ConfigError(f"unknown same_site mode {same_site!r}")
    return S, P


def _qfi_from(mean, second):
    F = 4 * (second - np.einsum("...a,...b->...ab", mean, mean))
    return (F + np.swapaxes(F, -1, -2)) / 2


def estimate_observables(E: TrajectoryEnsemble, same_site: str = "classical", jackknife: bool = True) -> EnsembleEstimate:
    """Collective moments, QFI estimates and N_FM with jackknife errors."""
    n = E.n_traj
    if n < 2:
        raise ConfigError("need at least 2 trajectories")
    N = E.n_spins
    S, P = trajectory_moments(E, same_site)
    S_tot = _ordered_sum(S)
    P_tot = _ordered_sum(P)
    mean = S_tot / n
    second = P_tot / n
    second = (second + second.T) / 2
    F = _qfi_from(mean, second)
    s2 = float(np.trace(second))
    fq_opt = optimal_direction(F)[0]
    nfm = ((N / 2) * (N / 2 + 1) - s2) / (N + 1)
    errs = (float("nan"),) * 3
    if jackknife:
        loo_mean = (S_tot[:, None] - S) / (n - 1)  # (3, n)
        loo_second = (P_tot[:, :, None] - P) / (n - 1)  # (3, 3, n)
        loo_F = _qfi_from(loo_mean.T, loo_second.transpose(2, 0, 1))
        loo_fx = loo_F[:, 0, 0]
        loo_opt = np.linalg.eigvalsh(loo_F)[:, -1]
        loo_nfm = ((N / 2) * (N / 2 + 1) - np.trace(loo_second, axis1=0, axis2=1)) / (N + 1)
        errs = tuple(_jackknife_error(v) for v in (loo_fx, loo_opt, loo_nfm))
    return EnsembleEstimate(
        n_traj=n, mean=mean, second=second, S2=s2,
        FQ_Sx=float(F[0, 0]), FQ_Sx_err=errs[0],
        FQ_opt=float(fq_opt), FQ_opt_err=errs[1],
        NFM=float(nfm), NFM_err=errs[2],
    )


def _jackknife_error(loo: np.ndarray) -> float:
    n = len(loo)
    centered = np.sort(loo - loo.mean())
    return float(np.sqrt((n - 1) / n * np.sum(centered**2)))


DTWA_COLUMNS = ("t", "FQ_Sx", "FQ_Sx_err", "FQ_opt", "NFM", "Sx", "Sz")


@dataclass
class DTWASeries:
    N: int
    n_traj: int
    seed: int
    rows: list = field(default_factory=list)

    def append(self, t, est: EnsembleEstimate):
        if self.rows and t <= self.rows[-1][0]:
            raise ConfigError("time grid must be strictly increasing")
        self.rows.append((float(t), est.FQ_Sx, est.FQ_Sx_err, est.FQ_opt, est.NFM, est.Sx, est.Sz))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float).reshape(-1, len(DTWA_COLUMNS))

    def column(self, name) -> np.ndarray:
        return self.as_array()[:, DTWA_COLUMNS.index(name)]

    @property
    def t(self):
        return self.column("t")

    @property
    def fq(self):
        return self.column("FQ_Sx")

    def write_csv(self, path, provenance=None) -> Path:
        from .io import write_table

        return write_table(path, DTWA_COLUMNS, self.as_array(), provenance)


def run_dtwa(
    C: np.ndarray,
    schedule: FloquetSchedule,
    n_traj: int = DEFAULT_TRAJECTORIES,
    seed: int = 0,
    every: int = 1,
    ensemble: TrajectoryEnsemble | None = None,
    same_site: str = "classical",
    stop_after_peak: float | None = None,
    jackknife: bool = True,
) -> tuple[DTWASeries, TrajectoryEnsemble]:
    """Evolve an ensemble for ``schedule.n_periods`` periods, recording every ``every``.

    Passing ``ensemble`` resumes from a checkpoint.  ``stop_after_peak``
    ends the run early once ``F_Q^{S_x}`` has dropped below that fraction of
    its running maximum.
    """
    N = C.shape[0]
    E = sample_initial(N, n_traj, seed) if ensemble is None else ensemble.copy()
    series = DTWASeries(N, E.n_traj, E.seed)
    start = E.period_index
    series.append(start * schedule.period, estimate_observables(E, same_site, jackknife))
    best = series.rows[-1][1]
    for n in range(start + 1, start + schedule.n_periods + 1):
        period_step(E, schedule, C, inplace=True)
        if n % every == 0 or n == start + schedule.n_periods:
            est = estimate_observables(E, same_site, jackknife)
            series.append(n * schedule.period, est)
            best = max(best, est.FQ_Sx)
            if stop_after_peak is not None and est.FQ_Sx < stop_after_peak * best:
                break
    return series, E
