"""FastAPI application exposing the engines.

Run with ``uvicorn floquet_ghz.service.app:app``.  The CLI talks to this app
either in-process or over HTTP.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import dicke, dtwa, exact, lattice, open_system, spinwave, sweep
from ..errors import CapacityError, ConfigError, NotFoundError
from ..figures import reproduce_figure
from ..fitting import fit_power_law
from ..io import code_version
from .schemas import (
    DTWARequest,
    EDRequest,
    FigureRequest,
    FitRequest,
    LatticeRequest,
    LindbladRequest,
    ModelRequest,
    Result,
    ScalingRequest,
    SpinWaveRequest,
    SweepRequest,
    Table,
    ZMRequest,
)

app = FastAPI(title="floquet-ghz", version=code_version())

STATUS = {ConfigError: 400, CapacityError: 413, NotFoundError: 404}


def _error(kind, exc, status, payload=None):
    return JSONResponse(status_code=status, content={"error": str(exc), "kind": kind, "payload": _clean(payload)})


@app.exception_handler(NotFoundError)
async def _not_found(request: Request, exc: NotFoundError):
    return _error("not_found", exc, 404, exc.payload)


@app.exception_handler(CapacityError)
async def _capacity(request: Request, exc: CapacityError):
    return _error("capacity", exc, 413)


@app.exception_handler(ConfigError)
async def _config(request: Request, exc: ConfigError):
    return _error("config", exc, 400)


@app.exception_handler(RequestValidationError)
async def _validation(request: Request, exc: RequestValidationError):
    return _error("config", "invalid request: " + "; ".join(e["msg"] for e in exc.errors()), 422)


def _clean(v):
    """JSON-safe copy: arrays to lists, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _table(columns, rows) -> Table:
    return Table(columns=list(columns), rows=_clean([list(r) for r in rows]))


def _spec(req: LatticeRequest):
    return lattice.LatticeSpec(tuple(req.extents), req.boundary), lattice.ModelParams(req.alpha, req.K)


def _lattice_prov(req: LatticeRequest, **extra):
    return {"extents": list(req.extents), "boundary": req.boundary, "alpha": req.alpha, "K": req.K,
            "code_version": code_version(), **extra}


@app.get("/health")
def health():
    return {"status": "ok", "version": code_version()}


@app.post("/model", response_model=Result)
def model(req: ModelRequest):
    spec, params = _spec(req)
    out = Result(values=_clean(lattice.model_summary(spec, params)), provenance=_lattice_prov(req))
    if req.include_couplings:
        C = lattice.build_coupling_matrix(spec, params)
        out.tables["couplings"] = _table([f"k{j}" for j in range(spec.n_sites)], C)
    return out


@app.post("/ed", response_model=Result)
def ed(req: EDRequest):
    spec, params = _spec(req)
    if spec.n_sites > exact.MAX_SPINS:
        raise CapacityError(f"N={spec.n_sites} exceeds the state-vector cap of {exact.MAX_SPINS} spins")
    C = lattice.build_coupling_matrix(spec, params)
    schedule = exact.FloquetSchedule(req.tau, req.n_periods, req.form)
    series, psi = exact.run_floquet(C, schedule, every=req.every, with_opt=req.with_opt)
    i = series.peak()
    return Result(
        tables={"series": _table(exact.SERIES_COLUMNS, series.as_array())},
        values=_clean({"max_FQ": series.FQ_Sx[i], "t_at_max": series.t[i], "dicke_deficit_final": exact.dicke_deficit(psi)}),
        provenance=_lattice_prov(req, engine="ed", tau=req.tau, n_periods=req.n_periods, form=req.form),
    )


@app.post("/dtwa", response_model=Result)
def dtwa_endpoint(req: DTWARequest):
    spec, params = _spec(req)
    C = lattice.build_coupling_matrix(spec, params)
    schedule = exact.FloquetSchedule(req.tau, req.n_periods)
    series, _ = dtwa.run_dtwa(C, schedule, n_traj=req.n_traj, seed=req.seed, every=req.every,
                              same_site=req.same_site, stop_after_peak=req.stop_after_peak)
    fq = series.fq
    i = int(np.argmax(fq))
    return Result(
        tables={"series": _table(dtwa.DTWA_COLUMNS, series.as_array())},
        values=_clean({"max_FQ": fq[i], "t_at_max": series.t[i]}),
        provenance=_lattice_prov(req, engine="dtwa", tau=req.tau, n_traj=req.n_traj, seed=req.seed),
    )


@app.post("/zm", response_model=Result)
def zm(req: ZMRequest):
    if req.lattice is not None:
        spec, params = _spec(req.lattice)
        N, lam = spec.n_sites, lattice.lambda_coefficient(spec, params)
    elif req.N is not None:
        N, lam = req.N, 1.0 if req.lam is None else req.lam
    else:
        raise ConfigError("give either N (and optionally lam) or a lattice")
    if req.lam is not None:
        lam = req.lam
    ref = dicke.zm_reference(N, lam, req.K, req.tau)
    t_end = req.t_end if req.t_end is not None else 2 * ref.t_peak
    t = np.linspace(0.0, t_end, req.n_points)
    curve = dicke.zm_qfi_curve(N, lam, req.K, req.tau, t)
    return Result(
        tables={"curve": _table(("t", "FQ_Sx"), zip(curve.t, curve.fq))},
        values=_clean({"N": N, "lambda": lam, "max_FQ": ref.max_fq, "t_peak": ref.t_peak,
                       "t_c": spinwave.tc_estimate(N, lam, req.K, req.tau), "chi_eff": spinwave.chi_eff(N, lam, req.K, req.tau)}),
        provenance={"engine": "zm", "K": req.K, "tau": req.tau, "code_version": code_version()},
    )


@app.post("/spinwave", response_model=Result)
def spinwave_endpoint(req: SpinWaveRequest):
    spec, params = _spec(req)
    sw = spinwave.build_spectrum(spec, params, req.tau)
    qy = sw.q[:, 1] if sw.q.shape[1] > 1 else np.zeros(len(sw))
    rows = np.column_stack([sw.q[:, 0], qy, sw.Kq, sw.A, sw.B, sw.eps, sw.unstable.astype(int)])
    bound = spinwave.tau_bound(spec, params)
    out = Result(
        tables={"spectrum": _table(("qx", "qy", "Kq", "Aq", "Bq", "eps_q", "unstable"), rows)},
        values=_clean({"tau_bound": bound.bound, "tau_bound_q": bound.q, "n_unstable": int(sw.unstable.sum())}),
        provenance=_lattice_prov(req, tau=req.tau),
    )
    if req.t:
        t = np.asarray(req.t)
        out.tables["nfm"] = _table(("t", "NFM"), zip(t, spinwave.total_nfm(sw, t)))
    return out


@app.post("/spinwave/scaling", response_model=Result)
def spinwave_scaling(req: ScalingRequest):
    Ls, bounds, fit = spinwave.scaling_study(req.dimension, req.alpha, req.Ls, req.K)
    rows = [(L, req.alpha, b, fit.slope) for L, b in zip(Ls, bounds)]
    mu = spinwave.mu_exponent(req.alpha, req.dimension)
    return Result(
        tables={"scaling": _table(("L", "alpha", "bound", "fitted_slope"), rows)},
        values=_clean({"fit": fit.to_dict(), "mu_theory": mu}),
        provenance={"dimension": req.dimension, "alpha": req.alpha, "code_version": code_version()},
    )


@app.post("/lindblad", response_model=Result)
def lindblad(req: LindbladRequest):
    if req.N > open_system.MAX_OPEN_SPINS:
        raise CapacityError(f"N={req.N} exceeds the density-matrix cap of {open_system.MAX_OPEN_SPINS} spins")
    spec = lattice.LatticeSpec.chain(req.N, req.boundary)
    C = lattice.build_coupling_matrix(spec, lattice.ModelParams(req.alpha))
    units = open_system.PhysicalUnits(req.K_hz, req.tau_s)
    rates = list(req.rates_hz)
    if req.parity_rate_hz is not None and req.parity_rate_hz not in rates:
        rates.append(req.parity_rate_hz)
    rows, runs = open_system.decoherence_scan(C, units, rates, req.kinds, req.n_periods, req.noise_frame)
    out = Result(
        tables={"decay": _table(open_system.DECOHERENCE_COLUMNS, rows)},
        provenance={"N": req.N, "alpha": req.alpha, "K_hz": req.K_hz, "tau_s": req.tau_s,
                    "noise_frame": req.noise_frame, "code_version": code_version()},
    )
    if req.parity_rate_hz is not None:
        theta = np.linspace(0, 2 * np.pi / req.N, req.n_theta)
        for kind in req.kinds:
            p = open_system.parity_mixed(runs[(kind, float(req.parity_rate_hz))].rho_at_max, theta)
            out.tables[f"parity_{kind}"] = _table(open_system.PARITY_COLUMNS, zip(theta, p))
            out.values[f"parity_contrast_{kind}"] = _clean(open_system.parity_contrast(p))
    return out


def _sweep_config(raw: dict) -> sweep.SweepConfig:
    try:
        return sweep.SweepConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@app.post("/sweep", response_model=Result)
def sweep_endpoint(req: SweepRequest):
    config = _sweep_config(req.config)
    store = sweep.SweepStore(config.output)
    prov = {**config.to_dict(), "code_version": code_version()}
    if req.mode == "grid":
        sweep.run_sweep(config, store)
        recs = store.records()
        rows = [[getattr(r, c) for c in sweep.RECORD_COLUMNS] for r in recs]
        return Result(tables={"records": _table(sweep.RECORD_COLUMNS, rows)}, provenance=prov)
    out = Result(provenance=prov)
    rows = []
    for threshold in req.thresholds or [config.threshold]:
        found = []
        for alpha in config.alphas:
            for L in config.Ls:
                res = sweep.find_tau_s(config, L, alpha, threshold, store)
                found.append(res)
                rows.append((L, alpha, threshold, res.tau_s, res.t_tot, int(res.monotone), int(res.pinned)))
                out.tables[f"curve_L{L}_a{alpha:g}_th{threshold:g}"] = _table(("tau", "ratio"), res.curve)
        if req.fit:
            for alpha in config.alphas:
                sel = [r for r in found if r.alpha == alpha]
                if len(sel) >= 3:
                    out.values[f"mu_fit_a{alpha:g}_th{threshold:g}"] = _clean(sweep.fit_tau_s(sel).to_dict())
    out.tables["tau_s"] = _table(("L", "alpha", "threshold", "tau_s", "t_tot", "monotone", "pinned"), rows)
    return out


@app.post("/fit", response_model=Result)
def fit(req: FitRequest):
    res = fit_power_law(req.L, req.y, model=req.model, sigma=req.sigma)
    return Result(values=_clean(res.to_dict()), provenance={"code_version": code_version()})


@app.post("/figure", response_model=Result)
def figure(req: FigureRequest):
    bundle = reproduce_figure(req.name, req.config)
    return Result(
        tables={p: _table(c, r) for p, (c, r) in bundle.panels.items()},
        provenance=_clean({"figure": req.name, **bundle.provenance, "code_version": code_version()}),
    )
