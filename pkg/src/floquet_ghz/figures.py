"""Plot-ready data bundles for the reference figures.

Each bundle is a set of named panels, each a table of columns and rows,
written as one CSV per panel plus a JSON manifest.  Default configurations
are desk-scale; every size is overridable through the config mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dicke import zm_reference
from .dtwa import run_dtwa
from .errors import CapacityError, ConfigError
from .exact import MAX_SPINS, FloquetPropagator, FloquetSchedule, ObservableSeries, initial_css, parity_expectation, sx_distribution
from .io import write_json, write_table
from .lattice import LatticeSpec, ModelParams, build_coupling_matrix, lambda_coefficient
from .open_system import MAX_OPEN_SPINS, NOISE_KINDS, PhysicalUnits, decoherence_scan, parity_mixed
from .spinwave import LOG_SCALING, build_spectrum, chi_eff, mu_exponent, nu_exponent, scaling_study, tc_estimate, total_nfm
from .fitting import fit_power_law

FIGURES = ("fig2a", "fig2b", "fig3a", "fig3b", "fig4", "fig5")

DEFAULTS = {
    # a 12-site chain keeps ED in seconds; pass extents=(20,) for the full-size panels
    "fig2a": dict(extents=(12,), alpha=1.0, tau=0.1, boundary="periodic", n_traj=1000, seed=0, n_theta=64, span=2.0),
    "fig2b": dict(extents=(4, 4), alpha=3.0, tau=0.06, boundary="periodic", n_traj=1000, seed=0, n_theta=64, span=2.0),
    "fig3a": dict(extents=(20, 20), alpha=2.0, taus=(0.08, 0.04, 0.02, 0.01), n_traj=1000, seed=0, span=1.5, every=1),
    "fig3b": dict(extents=(20, 20), alpha=2.0, taus=(0.08, 0.04, 0.02, 0.01), n_traj=1000, seed=0, span=1.5, every=1),
    "fig4": dict(
        alphas_1d=(0.25, 0.5, 0.75, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0),
        alphas_2d=(0.5, 1.0, 1.5, 3.0, 5.0),
        Ls_1d=(64, 128, 256, 512),
        Ls_2d=(16, 24, 32, 48, 64),
    ),
    "fig5": dict(N=10, alpha=1.0, K_hz=560.0, tau_s=0.18e-3, rates_hz=(1.0, 3.0, 10.0, 30.0), boundary="periodic",
                 n_periods=60, inset_rate_hz=10.0, n_theta=64),
}


@dataclass
class FigureBundle:
    name: str
    panels: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def add(self, panel, columns, rows):
        self.panels[panel] = (tuple(columns), [tuple(r) for r in rows])

    def write(self, outdir) -> list[Path]:
        outdir = Path(outdir)
        paths = []
        for panel, (columns, rows) in self.panels.items():
            paths.append(write_table(outdir / f"{self.name}_{panel}.csv", columns, rows, {"figure": self.name, "panel": panel, **self.provenance}))
        manifest = {"figure": self.name, "panels": {p: {"columns": list(c), "rows": len(r)} for p, (c, r) in self.panels.items()}}
        paths.append(write_json(outdir / f"{self.name}_manifest.json", manifest, self.provenance))
        return paths

    def column(self, panel, name) -> np.ndarray:
        columns, rows = self.panels[panel]
        return np.array([r[columns.index(name)] for r in rows])


def _config(name, config):
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {name!r}; expected one of {FIGURES}")
    cfg = dict(DEFAULTS[name])
    unknown = set(config or {}) - set(cfg)
    if unknown:
        raise ConfigError(f"unknown {name} options: {sorted(unknown)}")
    cfg.update(config or {})
    return cfg


def reproduce_figure(name: str, config: dict | None = None) -> FigureBundle:
    cfg = _config(name, config)
    builder = {"fig2a": _fig2, "fig2b": _fig2, "fig3a": _fig3a, "fig3b": _fig3b, "fig4": _fig4, "fig5": _fig5}[name]
    bundle = FigureBundle(name, provenance={k: _plain(v) for k, v in cfg.items()})
    builder(bundle, cfg)
    return bundle


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


def _spec(cfg):
    return LatticeSpec(tuple(cfg["extents"]), cfg.get("boundary", "periodic"))


def _n_periods(spec, params, tau, span):
    ref = zm_reference(spec.n_sites, lambda_coefficient(spec, params), params.K, tau)
    return ref, max(2, int(math.ceil(span * ref.t_peak / (3 * tau))))


def _fig2(bundle, cfg):
    spec = _spec(cfg)
    N = spec.n_sites
    if N > MAX_SPINS:
        raise CapacityError(f"ED is capped at {MAX_SPINS} spins")
    params = ModelParams(cfg["alpha"])
    C = build_coupling_matrix(spec, params)
    tau = cfg["tau"]
    _, n = _n_periods(spec, params, tau, cfg["span"])
    prop = FloquetPropagator(C, tau)
    psi = initial_css(N)
    series = ObservableSeries(N)
    series.record(0.0, psi, with_opt=False)
    best, best_psi = 0.0, psi
    for k in range(1, n + 1):
        psi = prop.period(psi)
        series.record(k * 3 * tau, psi, with_opt=False)
        if series.FQ_Sx[-1] > best:
            best, best_psi = series.FQ_Sx[-1], psi
    m = np.arange(N + 1) - N / 2
    bundle.add("a1", ("m", "P_m"), zip(m, sx_distribution(best_psi)))
    theta = np.linspace(0, 2 * np.pi / N, cfg["n_theta"])
    bundle.add("a2", ("theta", "parity", "cos_N_theta"), zip(theta, parity_expectation(best_psi, theta), np.cos(N * theta)))
    dtwa, _ = run_dtwa(C, FloquetSchedule(tau, n), n_traj=cfg["n_traj"], seed=cfg["seed"])
    bundle.add("a3", ("t", "FQ_ED", "FQ_DTWA", "FQ_DTWA_err"),
               zip(series.t, series.FQ_Sx, dtwa.fq, dtwa.column("FQ_Sx_err")))


def _fig3_runs(cfg):
    spec = _spec(cfg)
    params = ModelParams(cfg["alpha"])
    C = build_coupling_matrix(spec, params)
    lam = lambda_coefficient(spec, params)
    N = spec.n_sites
    out = []
    for tau in cfg["taus"]:
        ref, n = _n_periods(spec, params, tau, cfg["span"])
        series, _ = run_dtwa(C, FloquetSchedule(tau, n), n_traj=cfg["n_traj"], seed=cfg["seed"], every=cfg["every"])
        out.append((tau, ref, series))
    return spec, params, lam, N, out


def _fig3a(bundle, cfg):
    spec, params, lam, N, runs = _fig3_runs(cfg)
    rows, nfm_rows = [], []
    for tau, _, s in runs:
        chi = chi_eff(N, lam, params.K, tau)
        sw = total_nfm(build_spectrum(spec, params, tau), s.t) if spec.periodic else np.full(len(s.t), np.nan)
        for t, f, e, nfm, nsw in zip(s.t, s.fq, s.column("FQ_Sx_err"), s.column("NFM"), sw):
            rows.append((tau, t, chi * t, f / N**2, e / N**2))
            nfm_rows.append((tau, t, chi * t, nfm, nsw))
    bundle.add("qfi", ("tau", "t", "chi_eff_t", "FQ_over_N2", "FQ_err_over_N2"), rows)
    bundle.add("nfm", ("tau", "t", "chi_eff_t", "NFM_dtwa", "NFM_spinwave"), nfm_rows)


def _fig3b(bundle, cfg):
    from .sweep import refine_peak

    spec, params, lam, N, runs = _fig3_runs(cfg)
    rows = []
    for tau, ref, s in runs:
        t_max, f_max = refine_peak(s.t, s.fq)
        rows.append((tau, f_max, ref.max_fq, f_max / ref.max_fq, t_max, ref.t_peak, tc_estimate(N, lam, params.K, tau)))
    bundle.add("peak", ("tau", "max_FQ", "FQ_eff", "ratio", "t_tot", "t_peak_zm", "t_c"), rows)


def _fig4(bundle, cfg):
    for d, alphas, Ls in ((1, cfg["alphas_1d"], cfg["Ls_1d"]), (2, cfg["alphas_2d"], cfg["Ls_2d"])):
        rows = []
        for alpha in alphas:
            Ls_arr, bounds, fit = scaling_study(d, alpha, Ls)
            # t_tot estimate at tau = tau_bound, from the collective generation time
            t_tot = []
            for L, b in zip(Ls_arr, bounds):
                spec = LatticeSpec.chain(int(L)) if d == 1 else LatticeSpec.square(int(L))
                t_tot.append(tc_estimate(spec.n_sites, lambda_coefficient(spec, ModelParams(alpha)), 1.0, b))
            nu_fit = fit_power_law(Ls_arr, t_tot, model="power-law-log")
            mu = mu_exponent(alpha, d)
            rows.append((alpha, -fit.slope, fit.slope_err, float("nan") if mu == LOG_SCALING else mu,
                         -nu_fit.slope, nu_fit.slope_err, nu_exponent(alpha, d)))
        bundle.add(f"d{d}", ("alpha", "mu_fit", "mu_fit_err", "mu_theory", "nu_fit", "nu_fit_err", "nu_theory"), rows)


def _fig5(bundle, cfg):
    N = int(cfg["N"])
    if N > MAX_OPEN_SPINS:
        raise CapacityError(f"density-matrix engine is capped at {MAX_OPEN_SPINS} spins")
    spec = LatticeSpec.chain(N, cfg["boundary"])
    C = build_coupling_matrix(spec, ModelParams(cfg["alpha"]))
    units = PhysicalUnits(cfg["K_hz"], cfg["tau_s"])
    rates = sorted({0.0, *map(float, cfg["rates_hz"]), float(cfg["inset_rate_hz"])})
    rows, runs = decoherence_scan(C, units, rates, n_periods=cfg["n_periods"])
    bundle.add("decay", ("rate_hz", "kind", "max_FQ", "t_at_max_s"), rows)
    theta = np.linspace(0, 2 * np.pi / N, cfg["n_theta"])
    for kind in NOISE_KINDS:
        rho = runs[(kind, float(cfg["inset_rate_hz"]))].rho_at_max
        bundle.add(f"parity_{kind}", ("theta", "parity"), zip(theta, parity_mixed(rho, theta)))
