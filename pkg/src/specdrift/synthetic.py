"""Seeded synthetic rainfall datasets for demos, smoke runs and benchmarks.

The generator follows the observation model used by the sampler: a latent
advected field plus a regression on a forecast covariate, Gaussian nugget,
then the censored power link.  The covariate plays the role of an external
numerical forecast: it is an independent latent field pushed through the
same link, so it is informative about rain occurrence and amount without
being the truth.

Amplitudes are set by `sigma2_for_variance`, which rescales the spectral
amplitude so the stationary field has a requested marginal variance; raw
amplitudes under the spectral normalization are otherwise tiny.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import StationData
from .grid import build_incidence, build_wavenumber_grid
from .model import SpdeParams, build_spectral_system, truncated_variance
from .simulate import simulate
from .tobit import latent_to_rain

__all__ = [
    "SyntheticRainfall",
    "sigma2_for_variance",
    "make_rainfall_dataset",
    "default_rainfall_params",
]


def sigma2_for_variance(params: SpdeParams, n: int, target_variance: float) -> float:
    """Spectral amplitude giving the requested stationary marginal variance.

    `truncated_variance` is the plain spectral sum; per cell the simulated
    field carries 1/n^2 of it (orthonormal basis), hence the n^2 factor.
    """
    if target_variance <= 0.0:
        raise ValueError("target_variance must be > 0")
    unit = truncated_variance(params.replace(sigma2=1.0), n) / n**2
    return float(target_variance / unit)


def default_rainfall_params(n: int, field_variance: float = 0.8) -> SpdeParams:
    """Moderately advected, mildly anisotropic parameters for the bundled data."""
    base = SpdeParams(
        rho0=0.12, sigma2=1.0, zeta=0.12, rho1=0.08, gamma=2.0,
        psi=np.pi / 4.0, mu_x=0.08, mu_y=0.05, tau2=0.04,
    )
    return base.replace(sigma2=sigma2_for_variance(base, n, field_variance))


@dataclass(frozen=True)
class SyntheticRainfall:
    """Bundled dataset: training rows, held-out rows, grid truth, generator settings.

    `train` covers time steps 0..n_fit-1; `holdout` covers the following
    `horizon` steps with its time_index rebased to 0..horizon-1 (lead order).
    `nwp_fields`/`latent_fields` span the full period on the grid.
    """

    train: StationData
    holdout: StationData
    latent_fields: np.ndarray  # (n_fit + horizon, n, n)
    nwp_fields: np.ndarray  # (n_fit + horizon, n, n), rain scale
    params: SpdeParams
    b: np.ndarray
    lam: float
    n_fit: int
    horizon: int


def make_rainfall_dataset(
    n: int = 32,
    n_fit: int = 200,
    horizon: int = 8,
    n_stations: int = 40,
    seed: int = 0,
    params: SpdeParams | None = None,
    b=(0.8, -0.6),
    lam: float = 1.4,
    nwp_shift: float = 0.3,
    missing_rate: float = 0.02,
) -> SyntheticRainfall:
    """Generate a complete station dataset plus grid-level truth.

    The covariate grid is an independent draw of the same field model shifted
    by `nwp_shift` and pushed through the power link; the rain observations
    follow latent = field + design @ b + nugget with design columns
    (nwp^(1/lam) - center, dry indicator), censored and powered by `lam`.
    """
    if params is None:
        params = default_rainfall_params(n)
    b = np.asarray(b, dtype=float)
    if b.shape != (2,):
        raise ValueError("b must have two components (amount, dry indicator)")
    root = np.random.SeedSequence(seed)
    seeds = root.generate_state(4, dtype=np.uint64)
    total = n_fit + horizon

    grid = build_wavenumber_grid(n)
    system = build_spectral_system(grid, params, 1.0)
    truth = simulate(system, total, seed=int(seeds[0]), init="stationary")
    nwp_latent = simulate(system, total, seed=int(seeds[1]), init="stationary")
    latent_fields = truth.fields().reshape(total, n, n)
    nwp_fields = latent_to_rain(nwp_latent.fields() + nwp_shift, lam).reshape(total, n, n)

    rng = np.random.default_rng(seeds[2])
    locations = rng.uniform(0.0, 1.0, size=(n_stations, 2))
    incidence = build_incidence(locations, grid)
    xi = incidence.apply(latent_fields.reshape(total, -1))
    nwp_st = incidence.apply(nwp_fields.reshape(total, -1))

    # design built exactly as the fitting code does, centered on the training rows
    transformed = nwp_st ** (1.0 / lam)
    center = float(transformed[:n_fit].mean())
    design = np.stack([transformed - center, (nwp_st == 0.0).astype(float)], axis=-1)

    w = xi + design @ b + np.sqrt(params.tau2) * rng.standard_normal(xi.shape)
    rain = latent_to_rain(w, lam)
    if missing_rate > 0.0:
        rain[rng.uniform(size=rain.shape) < missing_rate] = np.nan

    ids = tuple(f"s{j:03d}" for j in range(n_stations))
    train = StationData(
        station_ids=ids, locations=locations,
        rain=rain[:n_fit], nwp=nwp_st[:n_fit],
    )
    holdout = StationData(
        station_ids=ids, locations=locations,
        rain=rain[n_fit:], nwp=nwp_st[n_fit:],
    )
    return SyntheticRainfall(
        train=train,
        holdout=holdout,
        latent_fields=latent_fields,
        nwp_fields=nwp_fields,
        params=params,
        b=b,
        lam=lam,
        n_fit=n_fit,
        horizon=horizon,
    )
