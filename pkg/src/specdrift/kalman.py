"""Filtering, smoothing-by-sampling, forecasting and likelihood maximization.

Two routes are provided.

* Spectral route (complete gridded data): the observation operator is the
  orthonormal basis itself, so after a forward transform the Kalman filter
  decouples into n^2 scalar recursions with diagonal covariances -- O(T n^2)
  per sweep -- and the backward sampler draws exact joint trajectories in the
  same cost.  All covariance arrays stay diagonal by construction.
* Dense route (station data through an incidence map, reduced frequency
  selection): a conventional Kalman filter / backward sampler on the kept
  coefficients with an explicit observation matrix, O(T K^3).

Both routes share the model matrices from :class:`~specdrift.model.SpectralSystem`
and agree exactly when the incidence is the full grid and no frequency is
dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.special

from .errors import NumericalError
from .grid import (
    FrequencySelection,
    IncidenceMap,
    WavenumberGrid,
    dense_basis_matrix,
    forward_transform,
    inverse_transform,
)
from .model import PARAM_NAMES, SpdeParams, SpectralSystem, build_spectral_system

__all__ = [
    "FilterOutput",
    "DenseFilterOutput",
    "ForecastResult",
    "MleResult",
    "spectral_kalman_filter",
    "log_likelihood",
    "backward_sample",
    "dense_kalman_filter",
    "dense_backward_sample",
    "dense_filter_ffbs",
    "forecast",
    "fit_mle",
]

LOG_TWO_PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class FilterOutput:
    """Diagonal filtering moments of the spectral route.

    Rows are observation steps 1..T; `m_pred[i]`/`r_pred[i]` are the one-step
    forecast moments for step i+1 given steps up to i.  `r_filt <= r_pred`
    elementwise, and both stay equal across the two slots of each pair.
    """

    m_pred: np.ndarray
    m_filt: np.ndarray
    r_pred: np.ndarray
    r_filt: np.ndarray
    loglik: float
    tau2: float

    @property
    def n_steps(self) -> int:
        return self.m_filt.shape[0]


def spectral_kalman_filter(system: SpectralSystem, w_spectral, tau2: float) -> FilterOutput:
    """Run the diagonal filter on transformed observations (T, n^2).

    The state at step 0 is N(0, q) (initial distribution = innovation
    distribution); observations cover steps 1..T.  Returns moments and the
    exact Gaussian log-likelihood of the data.
    """
    if tau2 < 0.0:
        raise ValueError(f"tau2 must be >= 0, got {tau2!r}")
    w = np.asarray(w_spectral, dtype=float)
    if w.ndim != 2 or w.shape[1] != system.n_slots:
        raise ValueError(f"w_spectral must be (T, {system.n_slots}), got {w.shape}")
    n_steps = w.shape[0]
    q, f = system.q, system.f

    m_pred = np.empty_like(w)
    m_filt = np.empty_like(w)
    r_pred = np.empty((n_steps, system.n_slots))
    r_filt = np.empty_like(r_pred)

    m = np.zeros(system.n_slots)
    r = q.copy()
    loglik = 0.0
    for t in range(n_steps):
        mp = system.apply_propagator(m)
        rp = q + r * f
        s = rp + tau2
        if not s.min() > 0.0:
            raise NumericalError("degenerate predictive variance (tau2=0 with a zero mode)")
        resid = w[t] - mp
        gain = rp / s
        m = mp + gain * resid
        r = tau2 * gain
        loglik -= 0.5 * (np.sum(np.log(s)) + np.sum(resid * resid / s))
        m_pred[t], m_filt[t], r_pred[t], r_filt[t] = mp, m, rp, r
    loglik -= 0.5 * n_steps * system.n_slots * LOG_TWO_PI
    if not np.isfinite(loglik):
        raise NumericalError("non-finite log-likelihood")
    return FilterOutput(
        m_pred=m_pred, m_filt=m_filt, r_pred=r_pred, r_filt=r_filt,
        loglik=float(loglik), tau2=float(tau2),
    )


def log_likelihood(system: SpectralSystem, w_spectral, tau2: float) -> float:
    """Gaussian log-density of the transformed observations under the model."""
    return spectral_kalman_filter(system, w_spectral, tau2).loglik


def backward_sample(filt: FilterOutput, system: SpectralSystem, seed, size: int | None = None):
    """Joint posterior draw(s) of the coefficient path given all observations.

    Runs the backward recursion on the stored diagonal moments: the terminal
    state is N(m_T|T, r_T|T); earlier states use the standard conditioning
    m = m_t|t + r_t|t / r_t+1|t * G'(a_t+1 - m_t+1|t) with variance
    r_t|t * q / r_t+1|t.  Returns (T, n^2), or (size, T, n^2) when `size` is
    given.
    """
    rng = np.random.default_rng(seed)
    n_steps, n_slots = filt.m_filt.shape
    batch = (size,) if size is not None else ()
    out = np.empty(batch + (n_steps, n_slots))

    alpha = filt.m_filt[-1] + np.sqrt(filt.r_filt[-1]) * rng.standard_normal(batch + (n_slots,))
    out[..., -1, :] = alpha
    for t in range(n_steps - 2, -1, -1):
        ratio = filt.r_filt[t] / filt.r_pred[t + 1]
        mean = filt.m_filt[t] + ratio * system.apply_propagator_transpose(
            alpha - filt.m_pred[t + 1]
        )
        var = filt.r_filt[t] * system.q / filt.r_pred[t + 1]
        alpha = mean + np.sqrt(var) * rng.standard_normal(batch + (n_slots,))
        out[..., t, :] = alpha
    return out


# ---------------------------------------------------------------------------
# dense route (incidence observations, reduced frequency selection)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DenseFilterOutput:
    """Moments of the dense filter on the kept coefficient slots."""

    slots: np.ndarray
    m_pred: np.ndarray  # (T, K)
    m_filt: np.ndarray
    p_pred: np.ndarray  # (T, K, K)
    p_filt: np.ndarray
    loglik: float
    tau2: float
    draws: np.ndarray | None = None  # (size, T, K) when requested

    @property
    def n_steps(self) -> int:
        return self.m_filt.shape[0]


def reduced_matrices(system: SpectralSystem, selection: FrequencySelection | None):
    """Propagator and innovation diagonal restricted to a pair-complete selection."""
    if selection is None:
        slots = np.arange(system.n_slots)
    else:
        if selection.n != system.grid.n:
            raise ValueError(
                f"selection was built for n={selection.n}, system has n={system.grid.n}"
            )
        slots = selection.slots
    return slots, system.propagator_matrix(slots), system.q[slots]


def observation_matrix(
    system: SpectralSystem,
    selection: FrequencySelection | None,
    incidence: IncidenceMap | None,
) -> np.ndarray:
    """Rows of the (scaled) basis at the observed cells, shape (m, K)."""
    slots = None if selection is None else selection.slots
    cells = None if incidence is None else incidence.cell_indices
    if incidence is not None and incidence.n != system.grid.n:
        raise ValueError(f"incidence was built for n={incidence.n}, system has n={system.grid.n}")
    return dense_basis_matrix(system.grid, slots=slots, cells=cells)


def dense_kalman_filter(
    system: SpectralSystem,
    w,
    tau2: float,
    selection: FrequencySelection | None = None,
    incidence: IncidenceMap | None = None,
    observed=None,
) -> DenseFilterOutput:
    """Conventional Kalman filter for w = C alpha + noise, C from basis x incidence.

    `observed` is an optional (T, m) boolean mask; unobserved entries are
    skipped in the update (an all-missing step is pure prediction).
    """
    if tau2 < 0.0:
        raise ValueError(f"tau2 must be >= 0, got {tau2!r}")
    w = np.asarray(w, dtype=float)
    slots, g, q = reduced_matrices(system, selection)
    c_full = observation_matrix(system, selection, incidence)
    if w.ndim != 2 or w.shape[1] != c_full.shape[0]:
        raise ValueError(f"w must be (T, {c_full.shape[0]}), got {w.shape}")
    if observed is not None:
        observed = np.asarray(observed, dtype=bool)
        if observed.shape != w.shape:
            raise ValueError("observed mask must match w's shape")
    n_steps, n_kept = w.shape[0], slots.size

    m_pred = np.empty((n_steps, n_kept))
    m_filt = np.empty_like(m_pred)
    p_pred = np.empty((n_steps, n_kept, n_kept))
    p_filt = np.empty_like(p_pred)

    m = np.zeros(n_kept)
    p = np.diag(q)
    loglik = 0.0
    for t in range(n_steps):
        mp = g @ m
        pp = g @ p @ g.T + np.diag(q)
        mask = observed[t] if observed is not None else slice(None)
        c = c_full[mask]
        wt = w[t, mask]
        if wt.size:
            cp = c @ pp  # (m_t, K)
            s = cp @ c.T + tau2 * np.eye(wt.size)
            try:
                cho = scipy.linalg.cho_factor(s, lower=True)
            except scipy.linalg.LinAlgError as exc:
                raise NumericalError(f"innovation covariance not SPD at step {t}") from exc
            resid = wt - c @ mp
            gain = scipy.linalg.cho_solve(cho, cp).T  # (K, m_t)
            m = mp + gain @ resid
            p = pp - gain @ cp
            p = 0.5 * (p + p.T)
            loglik -= 0.5 * (
                wt.size * LOG_TWO_PI
                + 2.0 * np.sum(np.log(np.diag(cho[0])))
                + resid @ scipy.linalg.cho_solve(cho, resid)
            )
        else:
            m, p = mp, pp
        if not np.all(np.isfinite(p)):
            raise NumericalError(f"non-finite covariance update at step {t}")
        m_pred[t], m_filt[t], p_pred[t], p_filt[t] = mp, m, pp, p
    return DenseFilterOutput(
        slots=slots, m_pred=m_pred, m_filt=m_filt, p_pred=p_pred, p_filt=p_filt,
        loglik=float(loglik), tau2=float(tau2),
    )


def _chol_psd(mat: np.ndarray) -> np.ndarray:
    """Cholesky with escalating jitter; raises NumericalError when hopeless."""
    jitter = 0.0
    scale = max(np.trace(mat) / mat.shape[0], 1e-300)
    for _ in range(7):
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError:
            jitter = max(2.0 * jitter, 1e-12 * scale)
    raise NumericalError("covariance not positive definite even with jitter")


def dense_backward_sample(
    filt: DenseFilterOutput, system: SpectralSystem, seed, size: int | None = None
):
    """Backward trajectory draw(s) for the dense route, (T, K) or (size, T, K)."""
    rng = np.random.default_rng(seed)
    g = system.propagator_matrix(filt.slots)
    n_steps, n_kept = filt.m_filt.shape
    batch = size if size is not None else 1
    out = np.empty((batch, n_steps, n_kept))

    chol = _chol_psd(filt.p_filt[-1])
    alpha = filt.m_filt[-1] + rng.standard_normal((batch, n_kept)) @ chol.T
    out[:, -1] = alpha
    for t in range(n_steps - 2, -1, -1):
        pp_next = filt.p_pred[t + 1]
        j = np.linalg.solve(pp_next, g @ filt.p_filt[t]).T  # (K, K)
        mean = filt.m_filt[t] + (alpha - filt.m_pred[t + 1]) @ j.T
        cov = filt.p_filt[t] - j @ pp_next @ j.T
        chol = _chol_psd(0.5 * (cov + cov.T))
        alpha = mean + rng.standard_normal((batch, n_kept)) @ chol.T
        out[:, t] = alpha
    return out if size is not None else out[0]


def dense_filter_ffbs(
    system: SpectralSystem,
    w,
    tau2: float,
    seed,
    selection: FrequencySelection | None = None,
    incidence: IncidenceMap | None = None,
    observed=None,
    size: int | None = None,
) -> DenseFilterOutput:
    """Filter then draw posterior trajectories; the draws ride on the output."""
    filt = dense_kalman_filter(
        system, w, tau2, selection=selection, incidence=incidence, observed=observed
    )
    draws = dense_backward_sample(filt, system, seed, size=size)
    if size is None:
        draws = draws[None]
    return DenseFilterOutput(
        slots=filt.slots, m_pred=filt.m_pred, m_filt=filt.m_filt,
        p_pred=filt.p_pred, p_filt=filt.p_filt, loglik=filt.loglik, tau2=filt.tau2,
        draws=draws,
    )


# ---------------------------------------------------------------------------
# forecasting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForecastResult:
    """Predictive distribution k steps past the last observation.

    `coeff_var` is the diagonal predictive variance (spectral route) or the
    covariance diagonal (dense route); `field_samples` are draws of the
    latent field on the grid, with the nugget added only when requested.
    """

    leads: np.ndarray  # (k,) step offsets 1..k
    coeff_mean: np.ndarray  # (k, dim)
    coeff_var: np.ndarray  # (k, dim)
    field_mean: np.ndarray  # (k, n^2)
    field_samples: np.ndarray  # (k, n_samples, n^2)
    station_samples: np.ndarray | None = None  # (k, n_samples, m)


def forecast(
    filt,
    system: SpectralSystem,
    k_steps: int,
    n_samples: int,
    seed,
    include_nugget: bool = False,
    incidence: IncidenceMap | None = None,
    workers: int = 1,
) -> ForecastResult:
    """Propagate the final filtering distribution k steps and sample fields.

    As k grows the predictive coefficient variance converges to the
    stationary one.  `include_nugget` adds observation noise (variance
    filt.tau2) to the sampled values.
    """
    if k_steps < 1 or n_samples < 1:
        raise ValueError("k_steps and n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    grid = system.grid
    leads = np.arange(1, k_steps + 1)

    if isinstance(filt, FilterOutput):
        dim = system.n_slots
        mean = np.empty((k_steps, dim))
        var = np.empty((k_steps, dim))
        m, r = filt.m_filt[-1], filt.r_filt[-1]
        for i in range(k_steps):
            m = system.apply_propagator(m)
            r = system.q + r * system.f
            mean[i], var[i] = m, r
        coeff_draws = mean[:, None, :] + np.sqrt(var)[:, None, :] * rng.standard_normal(
            (k_steps, n_samples, dim)
        )
        field_mean = inverse_transform(grid, mean, workers=workers)
        field_samples = inverse_transform(grid, coeff_draws, workers=workers)
    elif isinstance(filt, DenseFilterOutput):
        slots = filt.slots
        g = system.propagator_matrix(slots)
        q = np.diag(system.q[slots])
        dim = slots.size
        mean = np.empty((k_steps, dim))
        var = np.empty((k_steps, dim))
        coeff_draws = np.empty((k_steps, n_samples, dim))
        m, p = filt.m_filt[-1], filt.p_filt[-1]
        for i in range(k_steps):
            m = g @ m
            p = g @ p @ g.T + q
            mean[i], var[i] = m, np.diag(p)
            chol = _chol_psd(0.5 * (p + p.T))
            coeff_draws[i] = m + rng.standard_normal((n_samples, dim)) @ chol.T
        basis = dense_basis_matrix(grid, slots=slots)  # (n^2, K)
        field_mean = mean @ basis.T
        field_samples = coeff_draws @ basis.T
    else:
        raise TypeError(f"unsupported filter output type {type(filt).__name__}")

    station_samples = None
    if incidence is not None:
        station_samples = incidence.apply(field_samples)
        if include_nugget:
            station_samples = station_samples + np.sqrt(filt.tau2) * rng.standard_normal(
                station_samples.shape
            )
    if include_nugget:
        field_samples = field_samples + np.sqrt(filt.tau2) * rng.standard_normal(
            field_samples.shape
        )
    return ForecastResult(
        leads=leads, coeff_mean=mean, coeff_var=var, field_mean=field_mean,
        field_samples=field_samples, station_samples=station_samples,
    )


# ---------------------------------------------------------------------------
# maximum likelihood
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MleResult:
    params: SpdeParams
    loglik: float
    converged: bool
    n_evals: int
    message: str


_LOG_NAMES = ("rho0", "sigma2", "zeta", "rho1", "tau2")


def _to_unconstrained(name: str, value: float) -> float:
    from .model import GAMMA_BOX, PSI_BOX

    if name in _LOG_NAMES:
        return np.log(max(value, 1e-12))
    if name == "gamma":
        lo, hi = np.log(GAMMA_BOX[0]), np.log(GAMMA_BOX[1])
        frac = np.clip((np.log(value) - lo) / (hi - lo), 1e-6, 1.0 - 1e-6)
        return float(scipy.special.logit(frac))
    if name == "psi":
        frac = np.clip(value / PSI_BOX[1], 1e-6, 1.0 - 1e-6)
        return float(scipy.special.logit(frac))
    return float(value)  # mu_x, mu_y


def _from_unconstrained(name: str, u: float) -> float:
    from .model import GAMMA_BOX, PSI_BOX

    if name in _LOG_NAMES:
        return float(np.exp(u))
    if name == "gamma":
        lo, hi = np.log(GAMMA_BOX[0]), np.log(GAMMA_BOX[1])
        return float(np.exp(lo + (hi - lo) * scipy.special.expit(u)))
    if name == "psi":
        return float(PSI_BOX[1] * scipy.special.expit(u))
    return float(u)


def fit_mle(
    w_fields,
    grid: WavenumberGrid,
    delta: float,
    init: SpdeParams,
    fixed: dict | None = None,
    workers: int = 1,
    options: dict | None = None,
) -> MleResult:
    """Maximize the filter likelihood over the (optionally restricted) parameters.

    Observations are complete gridded fields (T, n^2).  `fixed` maps
    parameter names to frozen values; the rest are optimized on log / logit /
    box coordinates with L-BFGS-B and finite-difference gradients.
    """
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(PARAM_NAMES)
    if unknown:
        raise ValueError(f"unknown fixed parameters: {sorted(unknown)}")
    free = [name for name in PARAM_NAMES if name not in fixed]
    if not free:
        raise ValueError("at least one parameter must be free")

    w_spec = forward_transform(grid, np.asarray(w_fields, dtype=float), workers=workers)
    base = {name: fixed.get(name, getattr(init, name)) for name in PARAM_NAMES}

    def assemble(u_vec) -> SpdeParams:
        vals = dict(base)
        for name, u in zip(free, u_vec):
            vals[name] = _from_unconstrained(name, u)
        return SpdeParams(**vals)

    def negloglik(u_vec) -> float:
        try:
            params = assemble(u_vec).validate()
            system = build_spectral_system(grid, params, delta)
            return -spectral_kalman_filter(system, w_spec, params.tau2).loglik
        except (NumericalError, ValueError, FloatingPointError):
            return 1e12

    x0 = np.array([_to_unconstrained(name, base[name]) for name in free])
    bounds = [(-0.5, 0.5) if name in ("mu_x", "mu_y") else (None, None) for name in free]
    result = scipy.optimize.minimize(
        negloglik, x0, method="L-BFGS-B", bounds=bounds, options=options or {}
    )
    params = assemble(result.x).validate()
    return MleResult(
        params=params,
        loglik=float(-result.fun),
        converged=bool(result.success),
        n_evals=int(result.nfev),
        message=str(result.message),
    )
