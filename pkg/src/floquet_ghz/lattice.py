"""Lattice geometry, power-law couplings and static model scalars.

Sites are enumerated row-major over the extents, so for a ``(L1, L2)``
lattice site ``(a, b)`` has index ``a * L2 + b``.  The lattice constant is 1
and all energies are in units of the nearest-neighbour coupling ``K``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, UnsupportedGeometryError

BOUNDARIES = ("periodic", "open")


@dataclass(frozen=True)
class LatticeSpec:
    """Square lattice in one or two dimensions."""

    extents: tuple[int, ...]
    boundary: str = "periodic"

    def __post_init__(self):
        extents = tuple(int(L) for L in np.atleast_1d(self.extents))
        object.__setattr__(self, "extents", extents)
        if len(extents) not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {len(extents)}")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if len(extents) == 2 and min(extents) < 2:
            raise ConfigError(f"2D extents must both be >= 2, got {extents}")
        if int(np.prod(extents)) < 2:
            raise ConfigError("lattice needs at least two sites")

    @classmethod
    def chain(cls, L, boundary="periodic"):
        return cls((L,), boundary)

    @classmethod
    def square(cls, L, L2=None, boundary="periodic"):
        return cls((L, L if L2 is None else L2), boundary)

    @property
    def dimension(self) -> int:
        return len(self.extents)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def label(self) -> str:
        return "x".join(str(L) for L in self.extents) + f"-{self.boundary}"


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    K: float = 1.0

    def __post_init__(self):
        if not self.K > 0:
            raise ConfigError(f"K must be positive, got {self.K}")
        if not self.alpha >= 0:
            raise ConfigError(f"alpha must be non-negative, got {self.alpha}")


@dataclass(frozen=True)
class MomentumGrid:
    """All lattice momenta ``q = 2 pi (q_1, ..., q_d) / L``."""

    q: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    zero_index: int = 0

    def __len__(self):
        return len(self.q)

    @property
    def nonzero(self) -> np.ndarray:
        mask = np.ones(len(self.q), dtype=bool)
        mask[self.zero_index] = False
        return mask


def coordinates(spec: LatticeSpec) -> np.ndarray:
    """Integer site coordinates, shape ``(N, d)``, row-major order."""
    grids = np.meshgrid(*[np.arange(L) for L in spec.extents], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def distance_matrix(spec: LatticeSpec) -> np.ndarray:
    coords = coordinates(spec)
    delta = np.abs(coords[:, None, :] - coords[None, :, :]).astype(float)
    if spec.periodic:
        L = np.asarray(spec.extents, dtype=float)
        delta = np.minimum(delta, L - delta)
    return np.sqrt((delta**2).sum(axis=-1))


def build_coupling_matrix(spec: LatticeSpec, params: ModelParams) -> np.ndarray:
    """Pairwise couplings ``K / r_jk**alpha`` with a zero diagonal."""
    if spec.n_sites < 2:
        raise ConfigError("coupling matrix needs N >= 2")
    r = distance_matrix(spec)
    C = np.zeros_like(r)
    off = ~np.eye(spec.n_sites, dtype=bool)
    C[off] = params.K / r[off] ** params.alpha
    return C


def _require_periodic(spec: LatticeSpec, what: str):
    if not spec.periodic:
        raise UnsupportedGeometryError(f"{what} requires periodic boundaries")


def displacement_profile(spec: LatticeSpec, power: float) -> np.ndarray:
    """``r**(-power)`` on the periodic displacement grid, zero at ``r = 0``.

    Array shape equals ``spec.extents``; entry ``n`` is the displacement with
    components ``n_m`` (minimum-image distance), each counted once.
    """
    _require_periodic(spec, "displacement sums")
    comps = []
    for L in spec.extents:
        n = np.arange(L, dtype=float)
        comps.append(np.minimum(n, L - n))
    grids = np.meshgrid(*comps, indexing="ij")
    r = np.sqrt(sum(g**2 for g in grids))
    out = np.zeros_like(r)
    nz = r > 0
    out[nz] = r[nz] ** (-power)
    return out


def momentum_grid(spec: LatticeSpec) -> MomentumGrid:
    idx = np.array(list(itertools.product(*[range(L) for L in spec.extents])), dtype=int)
    q = 2 * np.pi * idx / np.asarray(spec.extents, dtype=float)
    return MomentumGrid(q=q, indices=idx, zero_index=0)


def structure_factor(spec: LatticeSpec, params: ModelParams, q, return_imag=False):
    """``K_q = K sum_{r != 0} exp(-i q.r) / r**alpha`` by direct summation.

    Returns the real part; with ``return_imag=True`` also the magnitude of the
    imaginary part, which vanishes by inversion symmetry.
    """
    f = displacement_profile(spec, params.alpha)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.shape != (spec.dimension,):
        raise ConfigError(f"q must have {spec.dimension} components")
    grids = np.meshgrid(*[np.arange(L) for L in spec.extents], indexing="ij")
    phase = sum(qm * g for qm, g in zip(q, grids))
    value = params.K * np.sum(f * np.exp(-1j * phase))
    if return_imag:
        return float(value.real), float(abs(value.imag))
    return float(value.real)


def structure_factor_grid(spec: LatticeSpec, params: ModelParams, power=None) -> np.ndarray:
    """``K_q`` for every grid momentum (FFT of the displacement profile).

    Ordered like :func:`momentum_grid`.  ``power`` overrides the decay
    exponent, which is how ``T_0**2`` reuses this path.
    """
    f = displacement_profile(spec, params.alpha if power is None else power)
    return params.K * np.fft.fftn(f).real.ravel()


def t0_squared(spec: LatticeSpec, params: ModelParams) -> float:
    """``T_0**2 = K**2 sum_{r != 0} r**(-2 alpha)``."""
    f = displacement_profile(spec, 2 * params.alpha)
    return float(params.K**2 * f.sum())


def lambda_coefficient(spec: LatticeSpec, params: ModelParams) -> float:
    """Average three-body strength (dimensionless).

    Uses ``sum_l [(sum_j R_jl)**2 - sum_j R_jl**2]`` with ``R = r**-alpha``,
    which equals the ordered triple sum over distinct ``(j, k, l)``.
    """
    N = spec.n_sites
    if N < 3:
        raise ConfigError("lambda needs N >= 3")
    R = build_coupling_matrix(spec, ModelParams(params.alpha, 1.0))
    col = R.sum(axis=0)
    total = np.sum(col**2) - np.sum(R**2)
    return float(total / (N * (N - 1) * (N - 2)))


def chi_collective(spec: LatticeSpec, params: ModelParams) -> float:
    N = spec.n_sites
    C = build_coupling_matrix(spec, params)
    return float(C.sum() / (N * (N - 1)))


def tau_crit_estimate(spec: LatticeSpec, params: ModelParams) -> float:
    """Pulse separation saturating ``chi_coll * tau * N / 2 = 1``.

    An order-of-magnitude ceiling for the validity of the effective
    Hamiltonian, not a sharp threshold.
    """
    return 2.0 / (chi_collective(spec, params) * spec.n_sites)


def model_summary(spec: LatticeSpec, params: ModelParams) -> dict:
    out = {
        "N": spec.n_sites,
        "extents": list(spec.extents),
        "boundary": spec.boundary,
        "alpha": params.alpha,
        "K": params.K,
        "chi_coll": chi_collective(spec, params),
        "tau_crit": tau_crit_estimate(spec, params),
    }
    if spec.n_sites >= 3:
        out["lambda"] = lambda_coefficient(spec, params)
    if spec.periodic:
        out["K0"] = float(structure_factor_grid(spec, params)[0])
        out["T0_squared"] = t0_squared(spec, params)
    return out


def write_coupling_csv(C: np.ndarray, spec: LatticeSpec, params: ModelParams, path) -> Path:
    path = Path(path)
    header = f"N={spec.n_sites} alpha={params.alpha} K={params.K} boundary={spec.boundary}"
    np.savetxt(path, C, delimiter=",", header=header, comments="# ", fmt="%.17g")
    return path


def read_coupling_csv(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().lstrip("#").strip()
    meta = dict(item.split("=", 1) for item in first.split())
    return np.loadtxt(path, delimiter=",", ndmin=2), meta
