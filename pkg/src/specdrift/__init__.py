"""Spectral state-space modelling of advected space-time Gaussian fields.

The package decomposes a field on the unit torus into a real Fourier basis
whose coefficients follow independent (scalar or 2x2-rotational) AR(1)
dynamics, giving O(T n^2) filtering, smoothing-by-sampling, likelihood
evaluation and forecasting.  On top of the Gaussian machinery sit adaptive
MCMC for Bayesian inference, a censored power transform for rainfall, and
sample-based forecast verification.

Modules
-------
grid      : real Fourier layout, transforms, frequency selection, incidence.
model     : parameters, spectra, discrete-time system, covariance + bounds.
simulate  : trajectory and observation generation.
kalman    : spectral/dense filters, FFBS, forecasting, maximum likelihood.
mcmc      : adaptive Metropolis-within-Gibbs posterior sampling.
tobit     : censored power link and marginal pre-fits.
scoring   : CRPS / MAE verification.
dataio    : file formats (fields, configs, chains, checkpoints, stations).
synthetic : seeded bundled datasets.
cli       : command-line workflows (see `specdrift --help`).
"""

from .errors import ConfigError, DataError, NumericalError
from .grid import (
    FrequencySelection,
    IncidenceMap,
    WavenumberGrid,
    build_incidence,
    build_wavenumber_grid,
    cell_coords,
    dense_basis_matrix,
    embed_padded,
    forward_transform,
    inverse_transform,
    select_frequencies,
)
from .kalman import (
    DenseFilterOutput,
    FilterOutput,
    ForecastResult,
    MleResult,
    backward_sample,
    dense_backward_sample,
    dense_filter_ffbs,
    dense_kalman_filter,
    fit_mle,
    forecast,
    log_likelihood,
    observation_matrix,
    spectral_kalman_filter,
)
from .mcmc import (
    AdaptiveProposal,
    ChainConfig,
    ChainData,
    ChainState,
    PosteriorSample,
    ess,
    reference_log_prior,
    resume_chain,
    run_chain,
)
from .model import (
    PARAM_NAMES,
    SpdeParams,
    SpectralSystem,
    approximation_bound,
    build_spectral_system,
    covariance_function,
    diffusion_matrix,
    spde_spectrum,
    truncated_variance,
    whittle_covariance,
    whittle_spectrum,
)
from .scoring import ScoreReport, ScoreRow, aggregate, crps_sample, mae, median_point_forecast
from .simulate import ObservationSet, Trajectory, observe, propagate_deterministic, simulate
from .tobit import (
    TobitDataset,
    build_design,
    fit_lambda_tilde,
    latent_to_rain,
    rain_to_latent,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "WavenumberGrid",
    "FrequencySelection",
    "IncidenceMap",
    "build_wavenumber_grid",
    "build_incidence",
    "cell_coords",
    "dense_basis_matrix",
    "embed_padded",
    "forward_transform",
    "inverse_transform",
    "select_frequencies",
    "PARAM_NAMES",
    "SpdeParams",
    "SpectralSystem",
    "build_spectral_system",
    "diffusion_matrix",
    "spde_spectrum",
    "whittle_spectrum",
    "whittle_covariance",
    "covariance_function",
    "truncated_variance",
    "approximation_bound",
    "Trajectory",
    "ObservationSet",
    "simulate",
    "observe",
    "propagate_deterministic",
    "FilterOutput",
    "DenseFilterOutput",
    "ForecastResult",
    "MleResult",
    "spectral_kalman_filter",
    "dense_kalman_filter",
    "backward_sample",
    "dense_backward_sample",
    "dense_filter_ffbs",
    "observation_matrix",
    "log_likelihood",
    "forecast",
    "fit_mle",
    "AdaptiveProposal",
    "ChainData",
    "ChainConfig",
    "ChainState",
    "PosteriorSample",
    "reference_log_prior",
    "run_chain",
    "resume_chain",
    "ess",
    "TobitDataset",
    "rain_to_latent",
    "latent_to_rain",
    "build_design",
    "fit_lambda_tilde",
    "ScoreRow",
    "ScoreReport",
    "crps_sample",
    "mae",
    "median_point_forecast",
    "aggregate",
    "__version__",
]
