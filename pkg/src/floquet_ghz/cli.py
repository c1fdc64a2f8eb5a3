"""Command-line client for the floquet-ghz API.

By default requests are served in-process; ``--url`` sends them to a running
server instead.  Exit codes: 0 success, 2 configuration error, 3 capacity
error, 4 threshold not found.
"""

from __future__ import annotations

import json
import sys
import warnings
from pathlib import Path

import click
import httpx

from .io import write_json, write_table

EXIT_CODES = {400: 2, 422: 2, 413: 3, 404: 4}


class ApiError(Exception):
    def __init__(self, status, body):
        super().__init__(body.get("error", str(body)) if isinstance(body, dict) else str(body))
        self.status = status
        self.body = body


class Client:
    """Minimal JSON client; in-process when ``url`` is None."""

    def __init__(self, url=None):
        if url:
            self._http = httpx.Client(base_url=url, timeout=None)
        else:
            # starlette warns about its httpx backend on import; not actionable for CLI users
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DeprecationWarning)
                from fastapi.testclient import TestClient

            from .service.app import app

            self._http = TestClient(app, raise_server_exceptions=True)

    def post(self, path, body):
        r = self._http.post(path, json=body)
        data = r.json()
        if r.status_code >= 400:
            raise ApiError(r.status_code, data)
        return data


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()] if text else []


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()] if text else []


def _emit(result, out):
    """Write tables as CSV (with provenance) and scalars as JSON, or print JSON."""
    if out is None:
        click.echo(json.dumps(result, indent=2, sort_keys=True))
        return
    out = Path(out)
    prov = result.get("provenance", {})
    tables = result.get("tables", {})
    if len(tables) == 1 and out.suffix == ".csv":
        (name, t), = tables.items()
        write_table(out, t["columns"], t["rows"], prov)
        written = [out]
    else:
        base = out.with_suffix("") if out.suffix else out
        written = [write_table(base.parent / f"{base.name}_{name}.csv", t["columns"], t["rows"], prov) for name, t in tables.items()]
    if result.get("values"):
        written.append(write_json((out.with_suffix("") if out.suffix else out).with_suffix(".json"), result["values"], prov))
    for p in written:
        click.echo(str(p))


def _run(ctx, path, body, out):
    try:
        result = ctx.obj["client"].post(path, body)
    except ApiError as exc:
        click.echo(f"error ({exc.body.get('kind', 'unknown') if isinstance(exc.body, dict) else exc.status}): {exc}", err=True)
        payload = exc.body.get("payload") if isinstance(exc.body, dict) else None
        if payload and out:
            write_json(Path(out).with_suffix(".notfound.json"), {"payload": payload})
        ctx.exit(EXIT_CODES.get(exc.status, 1))
    _emit(result, out)


def lattice_options(f):
    f = click.option("--K", "K", type=float, default=1.0, show_default=True, help="Coupling scale.")(f)
    f = click.option("--boundary", type=click.Choice(["periodic", "open"]), default="periodic", show_default=True)(f)
    f = click.option("--alpha", type=float, required=True, help="Power-law decay exponent.")(f)
    f = click.option("--extents", required=True, help="Lattice extents, e.g. 12 or 4,4.")(f)
    return f


def _lattice(extents, alpha, boundary, K):
    return {"extents": _ints(extents), "alpha": alpha, "boundary": boundary, "K": K}


out_option = click.option("--out", type=click.Path(dir_okay=True), default=None, help="Output CSV path or stem; JSON to stdout if omitted.")


@click.group()
@click.option("--url", default=None, help="Base URL of a running server (default: in-process).")
@click.pass_context
def main(ctx, url):
    """Floquet GHZ-state simulations: engines, sweeps and figure data."""
    ctx.ensure_object(dict)
    ctx.obj["client"] = Client(url)


@main.command()
@lattice_options
@click.option("--couplings/--no-couplings", default=False, help="Also dump the coupling matrix.")
@out_option
@click.pass_context
def model(ctx, extents, alpha, boundary, K, couplings, out):
    """Couplings, lambda, chi_coll and tau_crit."""
    _run(ctx, "/model", {**_lattice(extents, alpha, boundary, K), "include_couplings": couplings}, out)


@main.command()
@lattice_options
@click.option("--tau", type=float, required=True)
@click.option("--periods", type=int, required=True)
@click.option("--form", type=click.Choice(["segment", "pulsed"]), default="segment", show_default=True)
@click.option("--every", type=int, default=1, show_default=True)
@out_option
@click.pass_context
def ed(ctx, extents, alpha, boundary, K, tau, periods, form, every, out):
    """Exact state-vector evolution."""
    body = {**_lattice(extents, alpha, boundary, K), "tau": tau, "n_periods": periods, "form": form, "every": every}
    _run(ctx, "/ed", body, out)


@main.command()
@lattice_options
@click.option("--tau", type=float, required=True)
@click.option("--periods", type=int, required=True)
@click.option("--n-traj", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--every", type=int, default=1, show_default=True)
@click.option("--stop-after-peak", type=float, default=None)
@out_option
@click.pass_context
def dtwa(ctx, extents, alpha, boundary, K, tau, periods, n_traj, seed, every, stop_after_peak, out):
    """Discrete truncated Wigner evolution."""
    body = {**_lattice(extents, alpha, boundary, K), "tau": tau, "n_periods": periods, "n_traj": n_traj,
            "seed": seed, "every": every, "stop_after_peak": stop_after_peak}
    _run(ctx, "/dtwa", body, out)


@main.command()
@click.option("--N", "N", type=int, default=None, help="Spin number (with --lam).")
@click.option("--lam", type=float, default=None)
@click.option("--extents", default=None, help="Take N and lambda from a lattice instead.")
@click.option("--alpha", type=float, default=None)
@click.option("--boundary", type=click.Choice(["periodic", "open"]), default="periodic")
@click.option("--K", "K", type=float, default=1.0)
@click.option("--tau", type=float, required=True)
@click.option("--t-end", type=float, default=None)
@click.option("--points", type=int, default=401, show_default=True)
@out_option
@click.pass_context
def zm(ctx, N, lam, extents, alpha, boundary, K, tau, t_end, points, out):
    """Collective-spin (Dicke) reference dynamics."""
    body = {"N": N, "lam": lam, "K": K, "tau": tau, "t_end": t_end, "n_points": points}
    if extents:
        if alpha is None:
            raise click.UsageError("--extents needs --alpha")
        body["lattice"] = _lattice(extents, alpha, boundary, K)
    _run(ctx, "/zm", body, out)


@main.command()
@lattice_options
@click.option("--tau", type=float, default=0.0, show_default=True)
@click.option("--t-max", type=float, default=None, help="Also tabulate N_FM on [0, t_max].")
@click.option("--t-points", type=int, default=101, show_default=True)
@click.option("--scaling", "scaling_Ls", default=None, help="Comma-separated L list: run the tau_bound scaling study instead.")
@out_option
@click.pass_context
def spinwave(ctx, extents, alpha, boundary, K, tau, t_max, t_points, scaling_Ls, out):
    """Spin-wave spectrum, N_FM(t) and tau_bound scaling."""
    if scaling_Ls:
        dims = len(_ints(extents))
        _run(ctx, "/spinwave/scaling", {"dimension": dims, "alpha": alpha, "Ls": _ints(scaling_Ls), "K": K}, out)
        return
    body = {**_lattice(extents, alpha, boundary, K), "tau": tau}
    if t_max is not None:
        body["t"] = [t_max * i / (t_points - 1) for i in range(t_points)]
    _run(ctx, "/spinwave", body, out)


@main.command()
@click.option("--N", "N", type=int, default=10, show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--boundary", type=click.Choice(["periodic", "open"]), default="periodic")
@click.option("--K-hz", "K_hz", type=float, default=560.0, show_default=True)
@click.option("--tau-s", "tau_s", type=float, default=0.18e-3, show_default=True)
@click.option("--rates", default="0,1,3,10,30", show_default=True, help="Dephasing rates in Hz.")
@click.option("--kinds", default="local_dephasing,global_dephasing", show_default=True)
@click.option("--periods", type=int, default=60, show_default=True)
@click.option("--noise-frame", type=click.Choice(["lab", "toggled"]), default="lab", show_default=True)
@click.option("--parity-rate", type=float, default=None, help="Also scan parity at this rate (Hz).")
@out_option
@click.pass_context
def lindblad(ctx, N, alpha, boundary, K_hz, tau_s, rates, kinds, periods, noise_frame, parity_rate, out):
    """Decoherence scan of the pulsed sequence."""
    body = {"N": N, "alpha": alpha, "boundary": boundary, "K_hz": K_hz, "tau_s": tau_s, "rates_hz": _floats(rates),
            "kinds": [k for k in kinds.split(",") if k], "n_periods": periods, "noise_frame": noise_frame,
            "parity_rate_hz": parity_rate}
    _run(ctx, "/lindblad", body, out)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True, help="SweepConfig JSON file.")
@click.option("--tau-s", "tau_s", is_flag=True, help="Run the tau_s threshold search instead of the plain grid.")
@click.option("--thresholds", default=None, help="Comma-separated thresholds for the tau_s search.")
@click.option("--fit/--no-fit", default=False, help="Fit mu from the tau_s results.")
@out_option
@click.pass_context
def sweep(ctx, config_path, tau_s, thresholds, fit, out):
    """Parameter sweep with a persistent, resumable record store."""
    try:
        config = json.loads(Path(config_path).read_text())
    except json.JSONDecodeError as exc:
        click.echo(f"error (config): {exc}", err=True)
        ctx.exit(2)
    body = {"config": config, "mode": "tau_s" if tau_s else "grid", "thresholds": _floats(thresholds) or None, "fit": fit}
    _run(ctx, "/sweep", body, out)


@main.command()
@click.option("--csv", "csv_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--x", "x_col", default="L", show_default=True)
@click.option("--y", "y_col", default="tau_s", show_default=True)
@click.option("--L", "L_values", default=None, help="Comma-separated L values (instead of --csv).")
@click.option("--values", "y_values", default=None, help="Comma-separated y values (instead of --csv).")
@click.option("--model", type=click.Choice(["power-law", "power-law-log"]), default="power-law", show_default=True)
@out_option
@click.pass_context
def fit(ctx, csv_path, x_col, y_col, L_values, y_values, model, out):
    """Weighted log-log power-law fit."""
    if csv_path:
        from .io import read_table

        _, columns, rows = read_table(csv_path)
        try:
            L = [float(r[columns.index(x_col)]) for r in rows]
            y = [float(r[columns.index(y_col)]) for r in rows]
        except ValueError:
            click.echo(f"error (config): columns {x_col!r}/{y_col!r} not in {columns}", err=True)
            ctx.exit(2)
    else:
        L, y = _floats(L_values), _floats(y_values)
    _run(ctx, "/fit", {"L": L, "y": y, "model": model}, out)


@main.command()
@click.argument("name", type=click.Choice(["fig2a", "fig2b", "fig3a", "fig3b", "fig4", "fig5"]))
@click.option("--config", "config_json", default=None, help="JSON object or path overriding the figure defaults.")
@out_option
@click.pass_context
def figure(ctx, name, config_json, out):
    """Plot-ready CSV bundle for one figure."""
    config = {}
    if config_json:
        p = Path(config_json)
        try:
            config = json.loads(p.read_text() if p.exists() else config_json)
        except json.JSONDecodeError as exc:
            click.echo(f"error (config): {exc}", err=True)
            ctx.exit(2)
    _run(ctx, "/figure", {"name": name, "config": config}, out or name)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
