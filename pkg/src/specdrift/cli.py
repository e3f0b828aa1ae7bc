"""Batch command-line surface.

Subcommands: simulate | filter | fit-mle | fit-mcmc | forecast | score |
covariance.  Shared flags: --config PATH, --seed U64, --out DIR,
--threads N.  Every run echoes its configuration into the output directory;
all artifacts are deterministic given (config, seed) — wall-clock
diagnostics go to a separate run_info.txt that is excluded from the
manifest.

Exit codes: 0 ok, 2 usage/config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys
import time

import numpy as np

from . import dataio, mcmc
from .errors import ConfigError, DataError, NumericalError
from .grid import (
    build_incidence,
    build_wavenumber_grid,
    dense_basis_matrix,
    forward_transform,
    inverse_transform,
    select_frequencies,
)
from .kalman import fit_mle, forecast as moment_forecast, spectral_kalman_filter
from .model import (
    PARAM_NAMES,
    SpdeParams,
    approximation_bound,
    build_spectral_system,
    covariance_function,
)
from .scoring import aggregate
from .simulate import observe, simulate
from .tobit import build_design, fit_lambda_tilde, latent_to_rain

_STOCHASTIC = {"simulate", "fit-mcmc", "forecast"}


# --------------------------------------------------------------------------
# plumbing
# --------------------------------------------------------------------------

def _prepare_out(args) -> str:
    if not args.out:
        raise ConfigError("--out DIR is required")
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _echo_config(out_dir: str, args, extra: dict | None = None) -> None:
    lines = []
    if args.config:
        with open(args.config) as fh:
            lines.append(fh.read().rstrip("\n"))
    run = {"subcommand": args.command}
    if args.seed is not None:
        run["seed"] = args.seed
    run["threads"] = args.threads
    run.update(extra or {})
    lines.append("\n".join(f"{k}={v}" for k, v in run.items()))
    with open(os.path.join(out_dir, "config_echo.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_manifest(out_dir: str, entries: dict) -> None:
    dataio.write_config(os.path.join(out_dir, "manifest.txt"), entries)


def _write_run_info(out_dir: str, wall_time: float) -> None:
    dataio.write_config(
        os.path.join(out_dir, "run_info.txt"), {"wall_time_s": f"{wall_time:.3f}"}
    )


def _load_config(args) -> dict:
    if not args.config:
        raise ConfigError("--config PATH is required for this subcommand")
    return dataio.read_config(args.config)


def _grid_from_config(cfg: dict):
    n = dataio.get_int(cfg, "n")
    return build_wavenumber_grid(n)


def _slots_for_wavenumbers(k_wave: int) -> int:
    if k_wave < 4:
        raise ConfigError(f"k_wave must be >= 4, got {k_wave}")
    return 4 + 2 * (k_wave - 4)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    out = _prepare_out(args)
    params = dataio.spde_params_from_config(cfg)
    grid = _grid_from_config(cfg)
    delta = dataio.get_float(cfg, "delta")
    steps = dataio.get_int(cfg, "steps")
    init = dataio.get_str(cfg, "init", "innovation")
    system = build_spectral_system(grid, params, delta)

    seeds = np.random.SeedSequence(args.seed).generate_state(2, dtype=np.uint64)
    traj = simulate(system, steps, seed=int(seeds[0]), init=init)
    obs = observe(traj, tau2=params.tau2, seed=int(seeds[1]), workers=args.threads)

    n = grid.n
    dataio.write_fields(
        os.path.join(out, "fields.spte"),
        traj.fields(workers=args.threads).reshape(-1, n, n),
    )
    dataio.write_fields(os.path.join(out, "observations.spte"), obs.w.reshape(-1, n, n))
    _echo_config(out, args)
    _write_manifest(out, {"fields": "fields.spte", "observations": "observations.spte"})
    _write_run_info(out, time.perf_counter() - t0)
    return 0


def cmd_filter(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    out = _prepare_out(args)
    params = dataio.spde_params_from_config(cfg)
    grid = _grid_from_config(cfg)
    delta = dataio.get_float(cfg, "delta")
    fields = dataio.read_fields(args.data)
    if fields.shape[1] != grid.n:
        raise DataError(
            f"data grid is {fields.shape[1]}x{fields.shape[2]}, config says n={grid.n}"
        )
    system = build_spectral_system(grid, params, delta)
    w_spec = forward_transform(grid, fields.reshape(fields.shape[0], -1), workers=args.threads)
    filt = spectral_kalman_filter(system, w_spec, params.tau2)

    n = grid.n
    dataio.write_fields(
        os.path.join(out, "filter_mean_coeff.spte"), filt.m_filt.reshape(-1, n, n)
    )
    dataio.write_fields(
        os.path.join(out, "filter_var_coeff.spte"), filt.r_filt.reshape(-1, n, n)
    )
    field_mean = inverse_transform(grid, filt.m_filt, workers=args.threads)
    dataio.write_fields(
        os.path.join(out, "filter_mean_field.spte"), field_mean.reshape(-1, n, n)
    )
    dataio.write_config(
        os.path.join(out, "report.txt"),
        {"loglik": filt.loglik, "steps": fields.shape[0], "n": n},
    )
    _echo_config(out, args)
    _write_manifest(
        out,
        {
            "filter_mean_coeff": "filter_mean_coeff.spte",
            "filter_var_coeff": "filter_var_coeff.spte",
            "filter_mean_field": "filter_mean_field.spte",
            "report": "report.txt",
        },
    )
    _write_run_info(out, time.perf_counter() - t0)
    return 0


def cmd_fit_mle(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    out = _prepare_out(args)
    init = dataio.spde_params_from_config(cfg)
    grid = _grid_from_config(cfg)
    delta = dataio.get_float(cfg, "delta")
    fields = dataio.read_fields(args.data)
    if fields.shape[1] != grid.n:
        raise DataError(
            f"data grid is {fields.shape[1]}x{fields.shape[2]}, config says n={grid.n}"
        )
    fixed = {}
    if args.fixed:
        for name in args.fixed.split(","):
            name = name.strip()
            if name not in PARAM_NAMES:
                raise ConfigError(f"unknown parameter in --fixed: {name!r}")
            fixed[name] = getattr(init, name)
    result = fit_mle(
        fields.reshape(fields.shape[0], -1), grid, delta, init,
        fixed=fixed or None, workers=args.threads,
    )
    estimate = dataio.config_from_spde_params(result.params)
    estimate.update(
        {
            "n": grid.n,
            "delta": delta,
            "loglik": result.loglik,
            "converged": result.converged,
            "n_evals": result.n_evals,
        }
    )
    dataio.write_config(os.path.join(out, "estimate.txt"), estimate)
    _echo_config(out, args)
    _write_manifest(out, {"estimate": "estimate.txt"})
    _write_run_info(out, time.perf_counter() - t0)
    return 0


def cmd_fit_mcmc(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    out = _prepare_out(args)
    grid = _grid_from_config(cfg)
    delta = dataio.get_float(cfg, "delta")
    k_wave = dataio.get_int(cfg, "k_wave")
    iters = dataio.get_int(cfg, "iters")
    burn_in = dataio.get_int(cfg, "burn_in")
    thin = dataio.get_int(cfg, "thin", 1)
    lam_cfg = dataio.get_str(cfg, "lam", "fit")
    init = dataio.spde_params_from_config(cfg)
    checkpoint_every = dataio.get_int(cfg, "checkpoint_every", max(iters // 4, 1))

    station = dataio.read_station_csv(args.data)
    rain = station.rain
    lam_tilde = fit_lambda_tilde(rain[np.isfinite(rain)])
    design, center = build_design(station.nwp, lam_tilde)
    incidence = build_incidence(station.locations, grid)
    selection = select_frequencies(grid, _slots_for_wavenumbers(k_wave))
    data = mcmc.ChainData(
        grid=grid, delta=delta, y=rain, tobit=True,
        design=design, incidence=incidence, selection=selection,
        lam_fixed=None if lam_cfg == "fit" else float(lam_cfg),
    )
    config = mcmc.ChainConfig(
        n_iter=iters, burn_in=burn_in, seed=args.seed, thin=thin,
        init=init, lam_init=lam_tilde,
        checkpoint_path=os.path.join(out, "checkpoint.spmc"),
        checkpoint_every=checkpoint_every,
    )
    if args.resume:
        sample = mcmc.resume_chain(data, config, args.resume)
    else:
        sample = mcmc.run_chain(data, config)
    if sample.n_draws == 0:
        raise ConfigError("chain retained zero draws; increase iters or lower burn_in")

    dataio.write_chain_csv(os.path.join(out, "chain.csv"), sample)
    dataio.write_checkpoint(
        os.path.join(out, "forecast_state.spmc"),
        arrays={
            "theta": sample.theta,
            "b": sample.b,
            "lam": sample.lam,
            "alpha_last": sample.alpha_last,
            "locations": station.locations,
        },
        meta={
            "n": grid.n,
            "delta": delta,
            "k_slots": int(selection.kept_size),
            "lam_tilde": float(lam_tilde),
            "center": float(center),
            "station_ids": list(station.station_ids),
            "n_fit_steps": int(rain.shape[0]),
        },
    )
    report = {
        "accept_rate": f"{sample.accept_rate:.6f}",
        "lam_accept_rate": f"{sample.lam_accept_rate:.6f}",
        "lam_tilde": lam_tilde,
        "center": center,
        "n_draws": sample.n_draws,
        "loglik_mean": float(sample.loglik.mean()),
        "loglik_last": float(sample.loglik[-1]),
    }
    for name in PARAM_NAMES:
        report[f"{name}_mean"] = float(sample.column(name).mean())
    report["lam_mean"] = float(sample.lam.mean())
    for j in range(sample.b.shape[1]):
        report[f"b{j + 1}_mean"] = float(sample.b[:, j].mean())
    dataio.write_config(os.path.join(out, "report.txt"), report)
    _echo_config(out, args)
    _write_manifest(
        out,
        {
            "chain": "chain.csv",
            "forecast_state": "forecast_state.spmc",
            "checkpoint": "checkpoint.spmc",
            "report": "report.txt",
        },
    )
    _write_run_info(out, time.perf_counter() - t0)
    return 0


def _forecast_from_state(args, out: str) -> dict:
    """Posterior-predictive rainfall forecasts from a fitted chain state."""
    arrays, meta = dataio.read_checkpoint(args.state)
    horizon = args.horizon
    nwp = dataio.read_fields(args.nwp_grid)
    if nwp.shape[0] < horizon:
        raise DataError(
            f"forecast grids cover {nwp.shape[0]} steps, horizon is {horizon}"
        )
    n = meta["n"]
    if nwp.shape[1] != n:
        raise DataError(f"forecast grids are {nwp.shape[1]}^2, fit used n={n}")
    theta, b_draws, lam_draws = arrays["theta"], arrays["b"], arrays["lam"]
    alpha_last = arrays["alpha_last"]
    n_posterior = theta.shape[0]
    if n_posterior == 0:
        raise ConfigError("the chain state contains zero posterior draws")
    n_samples = args.samples
    if n_samples > n_posterior:
        raise ConfigError(
            f"--samples {n_samples} exceeds the {n_posterior} retained draws"
        )
    take = np.arange(n_posterior)[:: max(1, n_posterior // n_samples)][:n_samples]

    grid = build_wavenumber_grid(n)
    k_slots = meta["k_slots"]
    selection = select_frequencies(grid, k_slots)
    incidence = build_incidence(arrays["locations"], grid)
    basis_grid = dense_basis_matrix(grid, slots=selection.slots)
    cells = incidence.cell_indices

    lam_tilde, center = meta["lam_tilde"], meta["center"]
    nwp_flat = nwp[:horizon].reshape(horizon, -1)
    design_grid = np.stack(
        [nwp_flat ** (1.0 / lam_tilde) - center, (nwp_flat == 0.0).astype(float)],
        axis=-1,
    )

    rng = np.random.default_rng(args.seed)
    n_cells = n * n
    m = incidence.n_locations
    station_rain = np.empty((horizon, m, take.size))
    grid_rain = np.empty((horizon, n_cells, take.size))
    full = np.zeros(grid.n_slots)
    for col, s in enumerate(take):
        params = SpdeParams.from_array(theta[s])
        system = build_spectral_system(grid, params, meta["delta"])
        sd = np.sqrt(system.q[selection.slots])
        tau = np.sqrt(params.tau2)
        alpha = alpha_last[s].copy()
        for lead in range(horizon):
            full[selection.slots] = alpha
            alpha = system.apply_propagator(full)[selection.slots]
            alpha += sd * rng.standard_normal(k_slots)
            w_grid = basis_grid @ alpha + design_grid[lead] @ b_draws[s]
            w_station = w_grid[cells]
            if args.include_nugget:
                # independent measurement noise for the grid export and the
                # station predictive (stations are new observations)
                w_grid = w_grid + tau * rng.standard_normal(n_cells)
                w_station = w_station + tau * rng.standard_normal(m)
            grid_rain[lead, :, col] = latent_to_rain(w_grid, lam_draws[s])
            station_rain[lead, :, col] = latent_to_rain(w_station, lam_draws[s])

    manifest = {}
    for lead in range(1, horizon + 1):
        name = f"samples_lead{lead:02d}.csv"
        dataio.write_field_csv(os.path.join(out, name), station_rain[lead - 1])
        manifest[f"samples_lead{lead:02d}"] = name
        med = np.median(grid_rain[lead - 1], axis=1).reshape(n, n)
        q3 = np.quantile(grid_rain[lead - 1], 0.75, axis=1).reshape(n, n)
        mname = f"median_field_lead{lead:02d}.csv"
        sname = f"q3spread_field_lead{lead:02d}.csv"
        dataio.write_field_csv(os.path.join(out, mname), med)
        dataio.write_field_csv(os.path.join(out, sname), q3 - med)
        manifest[f"median_field_lead{lead:02d}"] = mname
        manifest[f"q3spread_field_lead{lead:02d}"] = sname
    return manifest


def _forecast_from_params(args, out: str) -> dict:
    """Gaussian-field forecasts from a plug-in parameter estimate."""
    cfg = dataio.read_config(args.params)
    params = dataio.spde_params_from_config(cfg)
    n = dataio.get_int(cfg, "n")
    delta = dataio.get_float(cfg, "delta")
    fields = dataio.read_fields(args.data)
    if fields.shape[1] != n:
        raise DataError(f"data grid is {fields.shape[1]}^2, estimate says n={n}")
    grid = build_wavenumber_grid(n)
    system = build_spectral_system(grid, params, delta)
    w_spec = forward_transform(grid, fields.reshape(fields.shape[0], -1), workers=args.threads)
    filt = spectral_kalman_filter(system, w_spec, params.tau2)
    result = moment_forecast(
        filt, system, args.horizon, args.samples, args.seed,
        include_nugget=args.include_nugget, workers=args.threads,
    )
    manifest = {}
    for idx, lead in enumerate(result.leads):
        draws = result.field_samples[idx]  # (n_samples, n^2)
        med = np.median(draws, axis=0)
        q3 = np.quantile(draws, 0.75, axis=0)
        entries = {
            f"mean_field_lead{lead:02d}": result.field_mean[idx].reshape(n, n),
            f"median_field_lead{lead:02d}": med.reshape(n, n),
            f"q3spread_field_lead{lead:02d}": (q3 - med).reshape(n, n),
        }
        for key, field in entries.items():
            name = f"{key}.csv"
            dataio.write_field_csv(os.path.join(out, name), field)
            manifest[key] = name
    return manifest


def cmd_forecast(args) -> int:
    t0 = time.perf_counter()
    out = _prepare_out(args)
    if args.horizon < 1:
        raise ConfigError(f"--horizon must be >= 1, got {args.horizon}")
    if args.samples < 1:
        raise ConfigError(f"--samples must be >= 1, got {args.samples}")
    if bool(args.state) == bool(args.params):
        raise ConfigError("exactly one of --state or --params is required")
    if args.state:
        if not args.nwp_grid:
            raise ConfigError("--nwp-grid is required with --state")
        manifest = _forecast_from_state(args, out)
    else:
        if not args.data:
            raise ConfigError("--data is required with --params")
        manifest = _forecast_from_params(args, out)
    _echo_config(out, args, extra={"horizon": args.horizon, "samples": args.samples})
    _write_manifest(out, manifest)
    _write_run_info(out, time.perf_counter() - t0)
    return 0


def cmd_score(args) -> int:
    t0 = time.perf_counter()
    out = _prepare_out(args)
    pattern = os.path.join(args.samples_dir, "samples_lead*.csv")
    files = sorted(glob.glob(pattern))
    if not files:
        raise DataError(f"no sample files match {pattern}")
    samples = np.stack([dataio.read_field_csv(path) for path in files])  # (L, m, S)
    station = dataio.read_station_csv(args.obs)
    obs = station.rain
    if obs.shape[0] != samples.shape[0]:
        raise DataError(
            f"{obs.shape[0]} observation steps vs {samples.shape[0]} sample files"
        )
    if obs.shape[1] != samples.shape[1]:
        raise DataError(
            f"{obs.shape[1]} stations in observations vs {samples.shape[1]} in samples"
        )
    report = aggregate(samples[None], obs[None])
    report.write_csv(os.path.join(out, "scores.csv"))
    _echo_config(out, args)
    _write_manifest(out, {"scores": "scores.csv"})
    _write_run_info(out, time.perf_counter() - t0)
    return 0


def cmd_covariance(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    out = _prepare_out(args)
    params = dataio.spde_params_from_config(cfg)
    delta = dataio.get_float(cfg, "delta", 1.0)
    n_trunc = args.n_trunc

    t_lags = np.arange(args.t_max + 1) * delta
    axis = np.linspace(0.0, 0.5, args.s_count)
    sx, sy = np.meshgrid(axis, axis, indexing="ij")
    s_lags = np.column_stack([sx.ravel(), sy.ravel()])
    values = covariance_function(t_lags, s_lags, params, n_trunc)

    rows = []
    for i, t in enumerate(t_lags):
        for j, (x, y) in enumerate(s_lags):
            rows.append((t, x, y, values[i, j]))
    with open(os.path.join(out, "cov_table.csv"), "w") as fh:
        fh.write("t,sx,sy,value\n")
        for t, x, y, v in rows:
            fh.write(f"{t:.17g},{x:.17g},{y:.17g},{v:.17g}\n")

    sizes = [int(s) for s in args.sizes.split(",")]
    with open(os.path.join(out, "bound_table.csv"), "w") as fh:
        fh.write("n,bound\n")
        for size in sizes:
            fh.write(f"{size},{approximation_bound(params, size, args.n_ref):.17g}\n")

    _echo_config(out, args)
    _write_manifest(out, {"cov_table": "cov_table.csv", "bound_table": "bound_table.csv"})
    _write_run_info(out, time.perf_counter() - t0)
    return 0


# --------------------------------------------------------------------------
# parser / entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value model/run config file")
    common.add_argument("--seed", type=int, help="RNG seed (required for stochastic runs)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="FFT worker bound")

    parser = argparse.ArgumentParser(
        prog="specdrift",
        description="Spectral space-time field modelling: simulation, filtering, "
        "fitting, forecasting and verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="draw a field trajectory and observations")

    p = sub.add_parser("filter", parents=[common], help="Kalman filter gridded observations")
    p.add_argument("--data", required=True, help="observations (.spte)")

    p = sub.add_parser("fit-mle", parents=[common], help="maximum-likelihood parameter fit")
    p.add_argument("--data", required=True, help="observations (.spte)")
    p.add_argument("--fixed", help="comma-separated parameter names to freeze at config values")

    p = sub.add_parser("fit-mcmc", parents=[common], help="posterior sampling on station data")
    p.add_argument("--data", required=True, help="station records (.csv)")
    p.add_argument("--resume", help="resume from a checkpoint file")

    p = sub.add_parser("forecast", parents=[common], help="predictive fields and samples")
    p.add_argument("--state", help="forecast_state.spmc from fit-mcmc")
    p.add_argument("--params", help="estimate.txt from fit-mle (Gaussian route)")
    p.add_argument("--data", help="observations (.spte), Gaussian route")
    p.add_argument("--nwp-grid", help="future covariate grids (.spte), station route")
    p.add_argument("--horizon", type=int, default=8)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--include-nugget", action="store_true")

    p = sub.add_parser("score", parents=[common], help="CRPS / MAE verification")
    p.add_argument("--samples-dir", required=True, help="directory with samples_lead*.csv")
    p.add_argument("--obs", required=True, help="held-out station records (.csv)")

    p = sub.add_parser("covariance", parents=[common], help="covariance and bound tables")
    p.add_argument("--t-max", type=int, default=3)
    p.add_argument("--s-count", type=int, default=5)
    p.add_argument("--n-trunc", type=int, default=64)
    p.add_argument("--sizes", default="8,16,32")
    p.add_argument("--n-ref", type=int, default=128)

    return parser


_DISPATCH = {
    "simulate": cmd_simulate,
    "filter": cmd_filter,
    "fit-mle": cmd_fit_mle,
    "fit-mcmc": cmd_fit_mcmc,
    "forecast": cmd_forecast,
    "score": cmd_score,
    "covariance": cmd_covariance,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in _STOCHASTIC and args.seed is None:
            raise ConfigError(f"--seed is required for '{args.command}'")
        return _DISPATCH[args.command](args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
