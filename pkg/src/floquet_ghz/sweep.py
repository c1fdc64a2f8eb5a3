"""Parameter sweeps over ``(L, alpha, tau)``, the tau_s threshold search and scaling fits.

Every evaluated point becomes a :class:`SweepRecord` appended to a JSON-lines
store keyed by ``(L, alpha, tau, engine, seed)``; re-running a sweep against
the same store only computes missing points.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dicke import zm_reference
from .dtwa import run_dtwa
from .errors import CapacityError, ConfigError, NotFoundError
from .exact import MAX_SPINS, FloquetPropagator, FloquetSchedule, ObservableSeries, initial_css
from .fitting import fit_power_law
from .io import code_version, write_table
from .lattice import LatticeSpec, ModelParams, build_coupling_matrix, lambda_coefficient

ENGINES = ("ed", "dtwa", "zm", "auto")
ED_AUTO_MAX = 14
PEAK_DROP = 0.7


def tau_grid(top: float, bottom: float, per_decade: int = 8) -> list[float]:
    """Log-spaced, strictly decreasing grid from ``top`` down to ``bottom``."""
    if not (top > bottom > 0):
        raise ConfigError("need top > bottom > 0")
    n = max(2, int(round(per_decade * math.log10(top / bottom))) + 1)
    return [float(t) for t in np.geomspace(top, bottom, n)]


@dataclass(frozen=True)
class SweepConfig:
    dimension: int = 1
    Ls: tuple = (8, 12, 16, 20)
    alphas: tuple = (1.5,)
    taus: tuple = tuple(tau_grid(0.2, 0.01))
    engine: str = "auto"
    threshold: float = 0.8
    n_traj: int = 1000
    seed: int = 0
    output: str | None = None
    boundary: str = "periodic"
    K: float = 1.0
    period_factor: float = 3.0
    max_periods: int = 4000
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "Ls", tuple(int(L) for L in self.Ls))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        if self.dimension not in (1, 2):
            raise ConfigError("dimension must be 1 or 2")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}")
        if not 0 < self.threshold < 1:
            raise ConfigError("threshold must lie in (0, 1)")
        if not self.taus or any(t <= 0 for t in self.taus):
            raise ConfigError("tau grid must be non-empty and positive")
        if any(b >= a for a, b in zip(self.taus, self.taus[1:])):
            raise ConfigError("tau grid must be strictly decreasing")
        if not self.Ls or min(self.Ls) < 2:
            raise ConfigError("need at least one L >= 2")
        if self.n_traj < 2 or self.workers < 1:
            raise ConfigError("n_traj must be >= 2 and workers >= 1")

    def spec(self, L: int) -> LatticeSpec:
        return LatticeSpec.chain(L, self.boundary) if self.dimension == 1 else LatticeSpec.square(L, boundary=self.boundary)

    def engine_for(self, L: int) -> str:
        if self.engine != "auto":
            return self.engine
        return "dtwa" if self.spec(L).n_sites > ED_AUTO_MAX else "ed"

    @classmethod
    def from_json(cls, path_or_text):
        text = Path(path_or_text).read_text() if Path(str(path_or_text)).exists() else str(path_or_text)
        data = json.loads(text)
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SweepRecord:
    L: int
    alpha: float
    tau: float
    engine: str
    seed: int
    max_FQ: float
    t_at_max: float
    FQ_eff: float
    ratio: float
    NFM_at_peak: float
    FQ_err: float = float("nan")
    n_traj: int = 0
    dimension: int = 1
    boundary: str = "periodic"
    code_version: str = field(default_factory=code_version)

    def __post_init__(self):
        if not math.isclose(self.ratio, self.max_FQ / self.FQ_eff, rel_tol=1e-12):
            raise ConfigError("ratio is inconsistent with max_FQ / FQ_eff")

    @property
    def key(self):
        return record_key(self.L, self.alpha, self.tau, self.engine, self.seed)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, allow_nan=True)


def record_key(L, alpha, tau, engine, seed):
    # tau keys are rounded so that recomputed grids hit the same records
    return (int(L), round(float(alpha), 12), float(f"{tau:.12g}"), str(engine), int(seed))


class SweepStore:
    """Append-only JSON-lines store of :class:`SweepRecord`."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self._records: dict = {}
        if self.path and self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    rec = SweepRecord(**json.loads(line))
                    self._records.setdefault(rec.key, rec)

    def __contains__(self, key):
        return key in self._records

    def __len__(self):
        return len(self._records)

    def get(self, key):
        return self._records.get(key)

    def append(self, rec: SweepRecord):
        if rec.key in self._records:
            return self._records[rec.key]
        self._records[rec.key] = rec
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a") as fh:
                fh.write(rec.to_json() + "\n")
        return rec

    def records(self):
        return [self._records[k] for k in sorted(self._records)]


def refine_peak(t, y):
    """Vertex of the parabola through the maximum and its two neighbours."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    if i == 0 or i == len(y) - 1:
        return float(t[i]), float(y[i])
    (t0, t1, t2), (y0, y1, y2) = t[i - 1 : i + 2], y[i - 1 : i + 2]
    denom = (t0 - t1) * (t0 - t2) * (t1 - t2)
    a = (t2 * (y1 - y0) + t1 * (y0 - y2) + t0 * (y2 - y1)) / denom
    b = (t2**2 * (y0 - y1) + t1**2 * (y2 - y0) + t0**2 * (y1 - y2)) / denom
    if a >= 0:
        return float(t[i]), float(y[i])
    tv = -b / (2 * a)
    c = y1 - a * t1**2 - b * t1
    yv = a * tv**2 + b * tv + c
    return float(tv), float(max(yv, y1))


def zm_peak(spec: LatticeSpec, params: ModelParams, tau: float):
    return zm_reference(spec.n_sites, lambda_coefficient(spec, params), params.K, tau)


def evaluate_point(config: SweepConfig, L: int, alpha: float, tau: float) -> SweepRecord:
    """Run one engine at ``(L, alpha, tau)`` and compare to the collective reference."""
    spec = config.spec(L)
    params = ModelParams(alpha, config.K)
    engine = config.engine_for(L)
    ref = zm_peak(spec, params, tau)
    F_eff = ref.max_fq
    n_periods = int(min(config.max_periods, math.ceil(config.period_factor * ref.t_peak / (3 * tau))))
    n_periods = max(n_periods, 2)
    common = dict(L=L, alpha=alpha, tau=tau, engine=engine, seed=config.seed, FQ_eff=F_eff,
                  dimension=config.dimension, boundary=config.boundary)
    if engine == "zm":
        return SweepRecord(max_FQ=F_eff, t_at_max=ref.t_peak, ratio=1.0, NFM_at_peak=0.0, **common)
    C = build_coupling_matrix(spec, params)
    schedule = FloquetSchedule(tau, n_periods)
    if engine == "ed":
        if spec.n_sites > MAX_SPINS:
            raise CapacityError(f"ED engine is capped at {MAX_SPINS} spins")
        series, _ = _run_ed_until_drop(C, schedule)
        t, fq, nfm, err = np.asarray(series.t), np.asarray(series.FQ_Sx), np.asarray(series.NFM), None
    else:
        series, _ = run_dtwa(C, schedule, n_traj=config.n_traj, seed=config.seed, stop_after_peak=PEAK_DROP)
        arr = series.as_array()
        t, fq, nfm, err = arr[:, 0], arr[:, 1], arr[:, 4], arr[:, 2]
    t_max, f_max = refine_peak(t, fq)
    i = int(np.argmax(fq))
    return SweepRecord(
        max_FQ=f_max, t_at_max=t_max, ratio=f_max / F_eff, NFM_at_peak=float(nfm[i]),
        FQ_err=float(err[i]) if err is not None else float("nan"),
        n_traj=config.n_traj if engine == "dtwa" else 0, **common,
    )


def _run_ed_until_drop(C, schedule):
    # stop once the curve has dropped well below its running maximum
    N = C.shape[0]
    prop = FloquetPropagator(C, schedule.tau, schedule.form)
    psi = initial_css(N)
    series = ObservableSeries(N)
    series.record(0.0, psi, with_opt=False)
    for n in range(1, schedule.n_periods + 1):
        psi = prop.period(psi)
        series.record(n * schedule.period, psi, with_opt=False)
        if series.FQ_Sx[-1] < PEAK_DROP * max(series.FQ_Sx):
            break
    return series, psi


def _evaluate_job(args):
    config, L, alpha, tau = args
    return evaluate_point(config, L, alpha, tau)


def run_sweep(config: SweepConfig, store: SweepStore | None = None) -> SweepStore:
    """Evaluate every missing grid point; results merge in grid order."""
    store = store if store is not None else SweepStore(config.output)
    jobs = []
    for L in config.Ls:
        for alpha in config.alphas:
            for tau in config.taus:
                if record_key(L, alpha, tau, config.engine_for(L), config.seed) not in store:
                    jobs.append((config, L, alpha, tau))
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_evaluate_job, jobs))
    else:
        results = [_evaluate_job(j) for j in jobs]
    for rec in results:
        store.append(rec)
    return store


RECORD_COLUMNS = ("L", "alpha", "tau", "engine", "seed", "max_FQ", "t_at_max", "FQ_eff", "ratio", "NFM_at_peak", "FQ_err")


def write_records_csv(records, path, provenance=None):
    rows = [[getattr(r, c) for c in RECORD_COLUMNS] for r in sorted(records, key=lambda r: r.key)]
    return write_table(path, RECORD_COLUMNS, rows, provenance)


@dataclass
class TauSResult:
    L: int
    alpha: float
    threshold: float
    tau_s: float
    t_tot: float
    curve: list
    monotone: bool
    pinned: bool
    bracket: tuple

    def to_dict(self):
        return asdict(self)


def find_tau_s(config: SweepConfig, L: int, alpha: float, threshold: float | None = None,
               store: SweepStore | None = None, rel_tol: float = 0.05) -> TauSResult:
    """Largest ``tau`` whose QFI ratio reaches ``threshold``, bisected in ``log tau``.

    The returned ``tau_s`` is the lower (passing) end of the final bracket.
    Non-monotone ratio curves are flagged; the crossing at the largest
    ``tau`` is the one refined.  Raises :class:`NotFoundError` with the
    curve attached when no grid point passes.
    """
    threshold = config.threshold if threshold is None else threshold
    if not 0 < threshold < 1:
        raise ConfigError("threshold must lie in (0, 1)")
    store = store if store is not None else SweepStore(config.output)
    engine = config.engine_for(L)

    def ratio_at(tau):
        key = record_key(L, alpha, tau, engine, config.seed)
        rec = store.get(key)
        if rec is None:
            rec = store.append(evaluate_point(config, L, alpha, tau))
        return rec

    recs = [ratio_at(t) for t in config.taus]
    ratios = np.array([r.ratio for r in recs])
    monotone = bool(np.all(np.diff(ratios) >= -1e-9))
    passing = np.flatnonzero(ratios >= threshold)
    curve = [(r.tau, r.ratio) for r in recs]
    if len(passing) == 0:
        raise NotFoundError(
            f"ratio never reaches {threshold} on the tau grid (L={L}, alpha={alpha})",
            {"L": L, "alpha": alpha, "threshold": threshold, "curve": curve, "monotone": monotone},
        )
    i = int(passing[0])
    if i == 0:
        rec = recs[0]
        return TauSResult(L, alpha, threshold, rec.tau, rec.t_at_max, curve, monotone, True, (rec.tau, rec.tau))
    lo, hi = recs[i], recs[i - 1]
    while hi.tau / lo.tau > 1 + rel_tol:
        mid = ratio_at(math.sqrt(hi.tau * lo.tau))
        curve.append((mid.tau, mid.ratio))
        if mid.ratio >= threshold:
            lo = mid
        else:
            hi = mid
    curve.sort(key=lambda p: -p[0])
    return TauSResult(L, alpha, threshold, lo.tau, lo.t_at_max, curve, monotone, False, (lo.tau, hi.tau))


def fit_tau_s(results, model="power-law", exclude_smallest=True):
    """Power-law fit of ``tau_s`` (or ``t_tot`` with ``model="power-law-log"``) over L."""
    results = sorted(results, key=lambda r: r.L)
    if exclude_smallest and len(results) > 3:
        results = results[1:]
    L = [r.L for r in results]
    y = [r.tau_s for r in results] if model == "power-law" else [r.t_tot for r in results]
    return fit_power_law(L, y, model=model)


def with_engine(config: SweepConfig, engine: str) -> SweepConfig:
    return replace(config, engine=engine)
