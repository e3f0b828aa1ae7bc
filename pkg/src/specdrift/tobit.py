"""Censored power-transform observation model for nonnegative data.

Rainfall-type observations y >= 0 are linked to a latent Gaussian variable w
by

    y = 0        if w <= 0          (censoring: dry)
    y = w^lam    if w > 0,

so w = y^(1/lam) on the wet entries.  The latent w follows the regression +
field + nugget model; the power lam is either sampled in the chain or frozen.
A separate, simpler marginal fit (iid Tobit, :func:`fit_lambda_tilde`)
provides the fixed exponent used to transform the covariate forecasts in the
regression design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.special

__all__ = [
    "TobitDataset",
    "rain_to_latent",
    "latent_to_rain",
    "build_design",
    "fit_lambda_tilde",
]


def rain_to_latent(y, lam: float) -> np.ndarray:
    """w = y^(1/lam) for positive observations (the wet branch of the link)."""
    if not lam > 0.0:
        raise ValueError(f"lam must be > 0, got {lam!r}")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise ValueError("rain_to_latent applies to strictly positive values only")
    return y ** (1.0 / lam)


def latent_to_rain(w, lam: float) -> np.ndarray:
    """y = 0 where w <= 0, else w^lam."""
    if not lam > 0.0:
        raise ValueError(f"lam must be > 0, got {lam!r}")
    w = np.asarray(w, dtype=float)
    return np.where(w > 0.0, np.maximum(w, 0.0) ** lam, 0.0)


@dataclass(frozen=True)
class TobitDataset:
    """Station observations with forecast covariates.

    y : (T, m) nonnegative observations, NaN = missing.
    y_forecast : (T, m) covariate forecasts, complete and nonnegative.
    locations : (m, 2) station coordinates on the model torus [0, 1]^2.
    delta : time step between consecutive rows.
    """

    y: np.ndarray
    y_forecast: np.ndarray
    locations: np.ndarray
    delta: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        yf = np.asarray(self.y_forecast, dtype=float)
        loc = np.asarray(self.locations, dtype=float)
        if y.ndim != 2 or yf.shape != y.shape:
            raise ValueError(f"y and y_forecast must share a (T, m) shape, got {y.shape}, {yf.shape}")
        if loc.shape != (y.shape[1], 2):
            raise ValueError(f"locations must be ({y.shape[1]}, 2), got {loc.shape}")
        if np.any(y[np.isfinite(y)] < 0.0):
            raise ValueError("observations must be >= 0 where present")
        if not np.all(np.isfinite(yf)) or np.any(yf < 0.0):
            raise ValueError("covariate forecasts must be complete and >= 0")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y_forecast", yf)
        object.__setattr__(self, "locations", loc)

    @property
    def n_steps(self) -> int:
        return self.y.shape[0]

    @property
    def n_stations(self) -> int:
        return self.y.shape[1]

    @property
    def missing_mask(self) -> np.ndarray:
        return ~np.isfinite(self.y)

    @property
    def censored_mask(self) -> np.ndarray:
        return np.isfinite(self.y) & (self.y == 0.0)

    @property
    def positive_mask(self) -> np.ndarray:
        return np.isfinite(self.y) & (self.y > 0.0)


def build_design(y_forecast, lam_tilde: float, center: float | None = None):
    """Two-column regression design from covariate forecasts.

    Column 1 is the power-transformed forecast, centered (the centering
    constant is estimated from the data unless given and is returned for
    reuse on future forecasts); column 2 indicates a dry forecast.  There is
    no intercept.

    Returns (X, center) with X of shape y_forecast.shape + (2,).
    """
    if not lam_tilde > 0.0:
        raise ValueError(f"lam_tilde must be > 0, got {lam_tilde!r}")
    yf = np.asarray(y_forecast, dtype=float)
    if not np.all(np.isfinite(yf)) or np.any(yf < 0.0):
        raise ValueError("covariate forecasts must be complete and >= 0")
    transformed = yf ** (1.0 / lam_tilde)
    if center is None:
        center = float(transformed.mean())
    x = np.empty(yf.shape + (2,))
    x[..., 0] = transformed - center
    x[..., 1] = yf == 0.0
    return x, center


def _marginal_negloglik(mu: float, log_s: float, lam: float, stats) -> float:
    n_dry, n_wet, sum_z, sum_z2, sum_log_y = stats
    s = np.exp(log_s)
    ll = 0.0
    if n_dry:
        ll += n_dry * scipy.special.log_ndtr(-mu / s)
    if n_wet:
        ll += -n_wet * (0.5 * np.log(2.0 * np.pi) + log_s)
        ll += -(sum_z2 - 2.0 * mu * sum_z + n_wet * mu * mu) / (2.0 * s * s)
        ll += -n_wet * np.log(lam) + (1.0 / lam - 1.0) * sum_log_y
    return -ll


def fit_lambda_tilde(y, lam_bounds=(0.2, 5.0)) -> float:
    """Exponent of the best-fitting iid censored power model.

    Profiles the marginal Tobit likelihood over (mean, variance) numerically
    for each candidate lam and optimizes lam on `lam_bounds` with a bounded
    scalar search.  Deterministic; used once, up front, for the design.
    """
    y = np.asarray(y, dtype=float).ravel()
    y = y[np.isfinite(y)]
    if y.size == 0 or np.any(y < 0.0):
        raise ValueError("need nonnegative observations with at least one value present")
    wet = y[y > 0.0]
    n_dry = int(y.size - wet.size)
    if wet.size < 2:
        raise ValueError("need at least two positive observations to identify lam")
    sum_log_y = float(np.sum(np.log(wet)))

    def profiled(lam: float) -> float:
        z = wet ** (1.0 / lam)
        stats = (n_dry, wet.size, float(z.sum()), float((z * z).sum()), sum_log_y)
        start = np.array([z.mean(), np.log(z.std() + 1e-12)])
        res = scipy.optimize.minimize(
            lambda v: _marginal_negloglik(v[0], v[1], lam, stats),
            start,
            method="Nelder-Mead",
            options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": 400},
        )
        return res.fun

    res = scipy.optimize.minimize_scalar(
        profiled, bounds=tuple(lam_bounds), method="bounded",
        options={"xatol": 1e-4},
    )
    return float(res.x)
