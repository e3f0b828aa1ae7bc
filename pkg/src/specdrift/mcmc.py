"""Posterior sampling for the latent-field regression model.

The chain is Metropolis-within-Gibbs over (w_censored, w_missing, lam,
(theta, b, alpha)):

* censored entries of the latent observation w are redrawn from their
  truncated normal conditional, missing entries from the untruncated one;
* the power exponent lam gets a random-walk step on log scale whose target
  includes the transformation Jacobian of the positive observations;
* (theta, b) are proposed jointly from an adapted Gaussian on transformed
  coordinates (log scale for the positive parameters, identity for psi, mu
  and b, with psi reflected at its box).  The acceptance ratio multiplies in
  the log-scale proposal Jacobian rho0 sigma2 zeta rho1 gamma tau2 (proposed
  over current); on acceptance the coefficient path alpha is refreshed by an
  exact backward-sampling draw under the accepted parameters.  Rejection
  keeps alpha.

Proposal adaptation follows the empirical-covariance rule (2.38^2/d times
the running covariance plus a small ridge), every `adapt_interval`
iterations during burn-in only, plus a Robbins-Monro global scale steering
the acceptance rate toward `target_accept` (default 0.3); both freeze at
the end of burn-in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.special

from .errors import NumericalError
from .grid import FrequencySelection, IncidenceMap, WavenumberGrid, forward_transform, inverse_transform
from .kalman import (
    DenseFilterOutput,
    FilterOutput,
    backward_sample,
    dense_backward_sample,
    dense_kalman_filter,
    observation_matrix,
    spectral_kalman_filter,
)
from .model import PARAM_NAMES, SpdeParams, build_spectral_system

__all__ = [
    "ChainData",
    "ChainConfig",
    "ChainState",
    "PosteriorSample",
    "AdaptiveProposal",
    "reference_log_prior",
    "truncnorm_upper",
    "gibbs_censored",
    "gibbs_missing",
    "mh_lambda_step",
    "joint_mh_step",
    "run_chain",
    "resume_chain",
    "ess",
]

# indices of the log-scale (positive) coordinates in PARAM_NAMES order
_POS_IDX = np.array([0, 1, 2, 3, 4, 8])
_PSI_IDX = 5
_MU_IDX = (6, 7)
_PSI_HI = np.pi / 2.0


def reference_log_prior(theta, b=None, lam: float | None = None) -> float:
    """Log of the reference prior density (up to a constant).

    1/sqrt(sigma2) * 1/sqrt(tau2) * 1/gamma on their positive half-lines,
    uniform boxes for mu in [-0.5, 0.5]^2, psi in [0, pi/2], gamma in
    [0.1, 10], positivity for the ranges and lam, flat on b.
    """
    vec = theta.as_array() if isinstance(theta, SpdeParams) else np.asarray(theta, dtype=float)
    rho0, sigma2, zeta, rho1, gamma, psi, mu_x, mu_y, tau2 = vec
    if min(rho0, sigma2, zeta, rho1, tau2) <= 0.0:
        return -np.inf
    if not (0.1 <= gamma <= 10.0 and 0.0 <= psi <= _PSI_HI):
        return -np.inf
    if not (-0.5 <= mu_x <= 0.5 and -0.5 <= mu_y <= 0.5):
        return -np.inf
    if lam is not None and not lam > 0.0:
        return -np.inf
    return float(-0.5 * np.log(sigma2) - 0.5 * np.log(tau2) - np.log(gamma))


def _to_sampling(theta_vec: np.ndarray) -> np.ndarray:
    u = np.array(theta_vec, dtype=float)
    u[_POS_IDX] = np.log(u[_POS_IDX])
    return u


def _from_sampling(u: np.ndarray) -> np.ndarray:
    vec = np.array(u, dtype=float)
    vec[_POS_IDX] = np.exp(vec[_POS_IDX])
    return vec


def _reflect(x: float, lo: float, hi: float) -> float:
    period = 2.0 * (hi - lo)
    y = (x - lo) % period
    return lo + min(y, period - y)


def truncnorm_upper(rng: np.random.Generator, mean, sd, upper) -> np.ndarray:
    """Draws of N(mean, sd^2) conditioned on X <= upper, vectorized.

    Inverse CDF in the bulk; beyond six standard deviations an
    exponential-proposal rejection sampler on the standardized tail keeps the
    draws accurate.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    sd = np.broadcast_to(np.asarray(sd, dtype=float), mean.shape)
    if np.any(sd <= 0.0):
        raise ValueError("sd must be > 0")
    beta = (np.broadcast_to(upper, mean.shape) - mean) / sd
    out = np.empty_like(mean)

    bulk = beta > -6.0
    if bulk.any():
        u = rng.uniform(size=int(bulk.sum()))
        out[bulk] = mean[bulk] + sd[bulk] * scipy.special.ndtri(
            u * scipy.special.ndtr(beta[bulk])
        )
    tail = ~bulk
    if tail.any():
        a = -beta[tail]
        z = np.empty(a.shape)
        todo = np.ones(a.shape, dtype=bool)
        while todo.any():
            aa = a[todo]
            cand = aa - np.log(rng.uniform(size=aa.size)) / aa
            ok = rng.uniform(size=aa.size) <= np.exp(-0.5 * (cand - aa) ** 2)
            idx = np.flatnonzero(todo)[ok]
            z[idx] = cand[ok]
            todo[idx] = False
        out[tail] = mean[tail] - sd[tail] * z
    return out


class AdaptiveProposal:
    """Random-walk Gaussian proposal with empirical-covariance adaptation.

    Tracks a running mean/covariance of the chain in the sampling
    coordinates; the proposal covariance is scale * (2.38^2/d) *
    (empirical covariance + epsilon I).  An optional Robbins-Monro update
    steers the scalar factor toward `target_accept`.  `freeze()` stops all
    adaptation (call it at the end of burn-in).
    """

    def __init__(
        self,
        initial_scales,
        adapt_scale: bool = True,
        target_accept: float = 0.3,
        epsilon: float = 1e-9,
    ):
        self.initial_scales = np.asarray(initial_scales, dtype=float)
        self.dim = self.initial_scales.size
        self.adapt_scale = adapt_scale
        self.target_accept = target_accept
        self.epsilon = epsilon
        self.count = 0
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros((self.dim, self.dim))
        self.log_scale = 0.0
        self.n_scale_updates = 0
        self.frozen = False
        self._chol = np.diag(self.initial_scales) * np.sqrt(5.6644 / self.dim)

    def update(self, vec) -> None:
        if self.frozen:
            return
        vec = np.asarray(vec, dtype=float)
        self.count += 1
        delta = vec - self.mean
        self.mean += delta / self.count
        self.m2 += np.outer(delta, vec - self.mean)

    def covariance(self) -> np.ndarray:
        factor = 5.6644 / self.dim  # 2.38^2 / d
        if self.count < max(2 * self.dim, 10):
            base = np.diag(self.initial_scales**2)
        else:
            base = self.m2 / (self.count - 1)
        return factor * base + self.epsilon * np.eye(self.dim)

    def refresh(self) -> None:
        if self.frozen:
            return
        self._chol = np.linalg.cholesky(self.covariance())

    def record_acceptance(self, acc_prob: float) -> None:
        if self.frozen or not self.adapt_scale:
            return
        self.n_scale_updates += 1
        self.log_scale += (acc_prob - self.target_accept) / self.n_scale_updates**0.6

    def freeze(self) -> None:
        self.frozen = True

    def propose(self, rng: np.random.Generator, center) -> np.ndarray:
        step = self._chol @ rng.standard_normal(self.dim)
        return np.asarray(center, dtype=float) + np.exp(0.5 * self.log_scale) * step


@dataclass
class ChainData:
    """Observations plus the model structure they are tied to.

    y : (T, m) data matrix; NaN marks missing entries.  For a censored power
        model (`tobit=True`) y holds the nonnegative observations; otherwise
        y is the latent-scale observation itself.
    design : optional (T, m, p) regression design.
    incidence/selection : None for complete gridded data (spectral route);
        any of them set switches to the dense route.
    lam_fixed : freeze the power exponent (tobit only); None samples it.
    """

    grid: WavenumberGrid
    delta: float
    y: np.ndarray
    tobit: bool = False
    design: np.ndarray | None = None
    incidence: IncidenceMap | None = None
    selection: FrequencySelection | None = None
    lam_fixed: float | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 2:
            raise ValueError(f"y must be (T, m), got {self.y.shape}")
        n_stations = self.y.shape[1]
        if self.incidence is not None and self.incidence.n_locations != n_stations:
            raise ValueError("incidence and y disagree on the number of stations")
        self.route = "dense" if (self.incidence is not None or self.selection is not None) else "spectral"
        if self.route == "spectral" and n_stations != self.grid.n_slots:
            raise ValueError(
                "complete gridded data must have n^2 columns; "
                "pass an incidence map for station data"
            )
        if self.design is not None:
            self.design = np.asarray(self.design, dtype=float)
            if self.design.shape[:2] != self.y.shape:
                raise ValueError(f"design must be (T, m, p), got {self.design.shape}")
        self.missing_mask = ~np.isfinite(self.y)
        if self.tobit:
            with np.errstate(invalid="ignore"):
                if np.any(self.y[~self.missing_mask] < 0.0):
                    raise ValueError("tobit observations must be >= 0 where present")
            self.censored_mask = np.isfinite(self.y) & (self.y == 0.0)
            self.positive_mask = np.isfinite(self.y) & (self.y > 0.0)
            self.y_pos = self.y[self.positive_mask]
            self.log_y_pos_sum = float(np.sum(np.log(self.y_pos)))
        else:
            self.censored_mask = np.zeros_like(self.missing_mask)
            self.positive_mask = ~self.missing_mask
        self.n_p = 0 if self.design is None else self.design.shape[2]
        # caches shared across iterations
        self._obs_matrix = None
        self._design_spec = None

    @property
    def has_augmentation(self) -> bool:
        return bool(self.tobit or self.missing_mask.any())

    def obs_matrix(self, system) -> np.ndarray:
        if self._obs_matrix is None:
            self._obs_matrix = observation_matrix(system, self.selection, self.incidence)
        return self._obs_matrix

    def design_spectral(self) -> np.ndarray:
        """Forward-transformed design columns (spectral route only)."""
        if self._design_spec is None:
            cols = [forward_transform(self.grid, self.design[:, :, j]) for j in range(self.n_p)]
            self._design_spec = np.stack(cols, axis=-1)
        return self._design_spec


@dataclass
class ChainState:
    """Mutable chain position; produced and advanced by the step functions."""

    theta_vec: np.ndarray
    b: np.ndarray
    lam: float
    w: np.ndarray  # (T, m) augmented latent observations
    alpha: np.ndarray  # (T, dim) current coefficient path
    xi: np.ndarray  # (T, m) field values at the observation points
    reg_mean: np.ndarray  # (T, m) design @ b
    loglik: float = -np.inf
    log_prior: float = -np.inf
    loglik_stale: bool = True
    w_spec: np.ndarray | None = None  # cached transform of w (spectral route)
    w_spec_stale: bool = True
    iteration: int = 0
    n_joint: int = 0
    n_joint_accepted: int = 0
    n_lam: int = 0
    n_lam_accepted: int = 0
    # same tallies restricted to the post-burn-in (frozen-proposal) phase
    n_joint_post: int = 0
    n_joint_accepted_post: int = 0
    n_lam_post: int = 0
    n_lam_accepted_post: int = 0

    @property
    def params(self) -> SpdeParams:
        return SpdeParams.from_array(self.theta_vec)


def _spectral_residual(data: ChainData, state: ChainState, b: np.ndarray) -> np.ndarray:
    if state.w_spec_stale or state.w_spec is None:
        state.w_spec = forward_transform(data.grid, state.w)
        state.w_spec_stale = False
    if data.n_p:
        return state.w_spec - data.design_spectral() @ b
    return state.w_spec


def _loglik_filter(data: ChainData, state: ChainState, params: SpdeParams, b: np.ndarray):
    """Marginal log-likelihood of the current augmented data under (params, b)."""
    system = build_spectral_system(data.grid, params, data.delta)
    if data.route == "spectral":
        resid = _spectral_residual(data, state, b)
        filt = spectral_kalman_filter(system, resid, params.tau2)
    else:
        resid = state.w - (data.design @ b if data.n_p else 0.0)
        filt = dense_kalman_filter(
            system, resid, params.tau2, selection=data.selection, incidence=data.incidence
        )
    return filt.loglik, filt, system


def _refresh_alpha(data: ChainData, state: ChainState, filt, system, rng) -> None:
    if isinstance(filt, FilterOutput):
        state.alpha = backward_sample(filt, system, rng)
        state.xi = inverse_transform(data.grid, state.alpha)
    else:
        state.alpha = dense_backward_sample(filt, system, rng)
        state.xi = state.alpha @ data.obs_matrix(system).T


def gibbs_censored(state: ChainState, data: ChainData, rng: np.random.Generator) -> None:
    """Redraw latent w at censored entries from N(mean, tau2) truncated to (-inf, 0]."""
    mask = data.censored_mask
    if not mask.any():
        return
    mean = state.xi[mask] + state.reg_mean[mask]
    tau = np.sqrt(state.theta_vec[8])
    state.w[mask] = truncnorm_upper(rng, mean, tau, 0.0)
    state.loglik_stale = True
    state.w_spec_stale = True


def gibbs_missing(state: ChainState, data: ChainData, rng: np.random.Generator) -> None:
    """Redraw latent w at missing entries from the untruncated conditional."""
    mask = data.missing_mask
    if not mask.any():
        return
    mean = state.xi[mask] + state.reg_mean[mask]
    tau = np.sqrt(state.theta_vec[8])
    state.w[mask] = mean + tau * rng.standard_normal(int(mask.sum()))
    state.loglik_stale = True
    state.w_spec_stale = True


def mh_lambda_step(
    state: ChainState, data: ChainData, rng: np.random.Generator, step_sd: float = 0.1
) -> float:
    """Random-walk update of the power exponent on log scale.

    The target is the conditional of lam given everything else: Gaussian
    residual terms of the positive observations plus their transformation
    Jacobian; censored and missing entries contribute nothing.
    """
    if not data.tobit:
        raise ValueError("lambda step only applies to censored power models")
    pos = data.positive_mask
    y_pos = data.y_pos
    mean = state.xi[pos] + state.reg_mean[pos]
    tau2 = state.theta_vec[8]

    def log_target(lam: float) -> float:
        w_pos = y_pos ** (1.0 / lam)
        quad = np.sum((w_pos - mean) ** 2) / (2.0 * tau2)
        return -quad - y_pos.size * np.log(lam) + data.log_y_pos_sum / lam

    lam_new = state.lam * np.exp(step_sd * rng.standard_normal())
    log_r = log_target(lam_new) - log_target(state.lam) + np.log(lam_new) - np.log(state.lam)
    acc = min(1.0, np.exp(min(log_r, 0.0)))
    state.n_lam += 1
    if np.log(rng.uniform()) < log_r:
        state.lam = float(lam_new)
        state.w[pos] = y_pos ** (1.0 / lam_new)
        state.loglik_stale = True
        state.w_spec_stale = True
        state.n_lam_accepted += 1
    return acc


def _ensure_current_loglik(data: ChainData, state: ChainState, prior_fn) -> None:
    if state.loglik_stale:
        params = state.params
        state.loglik, _, _ = _loglik_filter(data, state, params, state.b)
        state.log_prior = prior_fn(state.theta_vec)
        state.loglik_stale = False


def joint_mh_step(
    state: ChainState,
    data: ChainData,
    rng: np.random.Generator,
    proposal: AdaptiveProposal,
    prior_fn=reference_log_prior,
    draw_alpha: bool = True,
) -> float:
    """One joint (theta, b, alpha) move; returns the acceptance probability.

    alpha is refreshed by backward sampling only when the move is accepted
    (the ratio does not involve the proposed path, so drawing it lazily
    leaves the chain law unchanged).
    """
    _ensure_current_loglik(data, state, prior_fn)
    u = _to_sampling(state.theta_vec)
    v = np.concatenate([u, state.b])
    v_new = proposal.propose(rng, v)
    v_new[_PSI_IDX] = _reflect(v_new[_PSI_IDX], 0.0, _PSI_HI)

    theta_new = _from_sampling(v_new[: len(PARAM_NAMES)])
    b_new = v_new[len(PARAM_NAMES):]
    lp_new = prior_fn(theta_new)
    state.n_joint += 1

    acc = 0.0
    if np.isfinite(lp_new):
        try:
            params_new = SpdeParams.from_array(theta_new).validate()
            ll_new, filt, system = _loglik_filter(data, state, params_new, b_new)
            jac = float(np.sum(v_new[_POS_IDX]) - np.sum(v[_POS_IDX]))
            log_r = (ll_new + lp_new) - (state.loglik + state.log_prior) + jac
            acc = min(1.0, np.exp(min(log_r, 0.0)))
            if np.log(rng.uniform()) < log_r:
                state.theta_vec = theta_new
                state.b = b_new
                state.loglik = ll_new
                state.log_prior = lp_new
                state.reg_mean = (
                    data.design @ b_new if data.n_p else np.zeros_like(state.w)
                )
                if draw_alpha:
                    _refresh_alpha(data, state, filt, system, rng)
                state.n_joint_accepted += 1
        except (NumericalError, ValueError):
            acc = 0.0
    proposal.record_acceptance(acc)
    return acc


@dataclass
class ChainConfig:
    """Run-length, seeding, initialization and adaptation settings."""

    n_iter: int
    burn_in: int
    seed: int
    thin: int = 1
    init: SpdeParams | None = None
    b_init: np.ndarray | None = None
    lam_init: float | None = None
    prior_fn: object = None  # callable(theta_vec) -> float; default reference prior
    keep_alpha: bool = False
    adapt_interval: int = 50
    adapt_scale: bool = True
    target_accept: float = 0.3
    step_scales: np.ndarray | None = None
    lam_step: float = 0.1
    checkpoint_path: str | None = None
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.n_iter < 1 or not (0 <= self.burn_in < self.n_iter):
            raise ValueError("need n_iter >= 1 and 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")


_DEFAULT_INIT = SpdeParams(
    rho0=0.1, sigma2=1.0, zeta=0.1, rho1=0.1, gamma=1.0,
    psi=np.pi / 4.0, mu_x=0.0, mu_y=0.0, tau2=0.25,
)


@dataclass(frozen=True)
class PosteriorSample:
    """Retained draws plus acceptance diagnostics.

    `accept_rate` / `lam_accept_rate` are measured after burn-in, i.e. under
    the frozen (adapted) proposal.
    """

    param_names: tuple
    theta: np.ndarray  # (S, 9)
    b: np.ndarray  # (S, p)
    lam: np.ndarray  # (S,)
    loglik: np.ndarray  # (S,)
    alpha: np.ndarray | None
    alpha_last: np.ndarray | None  # (S, dim) coefficient state at the final step
    accept_rate: float
    lam_accept_rate: float
    n_iter: int
    burn_in: int
    thin: int

    @property
    def n_draws(self) -> int:
        return self.theta.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name == "lam":
            return self.lam
        if name.startswith("b") and name[1:].isdigit():
            return self.b[:, int(name[1:]) - 1]
        return self.theta[:, self.param_names.index(name)]

    def credible_interval(self, name: str, level: float = 0.95):
        col = self.column(name)
        half = (1.0 - level) / 2.0
        return float(np.quantile(col, half)), float(np.quantile(col, 1.0 - half))


def ess(series) -> float:
    """Effective sample size via the initial-positive-sequence estimator."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    x = x - x.mean()
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f))[:n].real / n
    if acov[0] <= 0.0:
        return float(n)
    rho = acov / acov[0]
    tau = 1.0
    for k in range(1, n // 2):
        pair = rho[2 * k - 1] + rho[2 * k]
        if pair < 0.0:
            break
        tau += 2.0 * pair
    return float(min(n, n / tau))


def _init_state(data: ChainData, config: ChainConfig, rng, prior_fn, draw_alpha) -> ChainState:
    init = (config.init or _DEFAULT_INIT).validate()
    n_steps, n_stations = data.y.shape
    b0 = np.zeros(data.n_p) if config.b_init is None else np.asarray(config.b_init, dtype=float)
    if b0.shape != (data.n_p,):
        raise ValueError(f"b_init must have shape ({data.n_p},)")
    lam0 = data.lam_fixed if data.lam_fixed is not None else (config.lam_init or 1.5)
    if data.tobit and not lam0 > 0.0:
        raise ValueError("initial lam must be > 0")

    w0 = np.zeros_like(data.y)
    if data.tobit:
        w0[data.positive_mask] = data.y_pos ** (1.0 / lam0)
    else:
        w0[data.positive_mask] = data.y[data.positive_mask]

    dim = data.selection.kept_size if data.selection is not None else data.grid.n_slots
    state = ChainState(
        theta_vec=init.as_array(),
        b=b0,
        lam=float(lam0),
        w=w0,
        alpha=np.zeros((n_steps, dim)),
        xi=np.zeros((n_steps, n_stations)),
        reg_mean=(data.design @ b0 if data.n_p else np.zeros_like(w0)),
    )
    # one augmentation sweep from the zero field, then moments + a path draw
    gibbs_censored(state, data, rng)
    gibbs_missing(state, data, rng)
    state.loglik, filt, system = _loglik_filter(data, state, init, b0)
    state.log_prior = prior_fn(state.theta_vec)
    state.loglik_stale = False
    if draw_alpha:
        _refresh_alpha(data, state, filt, system, rng)
    return state


def _default_step_scales(data: ChainData) -> np.ndarray:
    scales = np.full(len(PARAM_NAMES) + data.n_p, 0.05)
    scales[_POS_IDX] = 0.1
    return scales


def run_chain(data: ChainData, config: ChainConfig) -> PosteriorSample:
    """Run the full Metropolis-within-Gibbs chain; see the module docstring."""
    return _run(data, config, resume=None)


def resume_chain(data: ChainData, config: ChainConfig, checkpoint_path) -> PosteriorSample:
    """Continue an interrupted run; produces the same draws the full run would."""
    from . import dataio

    payload = dataio.read_checkpoint(checkpoint_path)
    return _run(data, config, resume=payload)


def _run(data: ChainData, config: ChainConfig, resume) -> PosteriorSample:
    from . import dataio

    prior_fn = config.prior_fn or reference_log_prior
    sample_lam = data.tobit and data.lam_fixed is None
    draw_alpha = data.has_augmentation or config.keep_alpha

    n_kept_total = (config.n_iter - config.burn_in) // config.thin
    kept_theta = np.empty((n_kept_total, len(PARAM_NAMES)))
    kept_b = np.empty((n_kept_total, data.n_p))
    kept_lam = np.empty(n_kept_total)
    kept_ll = np.empty(n_kept_total)
    dim = data.selection.kept_size if data.selection is not None else data.grid.n_slots
    kept_alpha = (
        np.empty((n_kept_total, data.y.shape[0], dim)) if config.keep_alpha else None
    )
    kept_alpha_last = np.empty((n_kept_total, dim)) if draw_alpha else None

    rng = np.random.default_rng(config.seed)
    proposal = AdaptiveProposal(
        initial_scales=(
            config.step_scales if config.step_scales is not None else _default_step_scales(data)
        ),
        adapt_scale=config.adapt_scale,
        target_accept=config.target_accept,
    )
    lam_step = config.lam_step
    n_kept = 0
    start = 0

    if resume is None:
        state = _init_state(data, config, rng, prior_fn, draw_alpha)
    else:
        state, proposal, lam_step, n_kept, start, kept = dataio.unpack_chain_checkpoint(
            resume, data, config
        )
        kept_theta[:n_kept] = kept["theta"]
        kept_b[:n_kept] = kept["b"]
        kept_lam[:n_kept] = kept["lam"]
        kept_ll[:n_kept] = kept["loglik"]
        if kept_alpha is not None and "alpha" in kept:
            kept_alpha[:n_kept] = kept["alpha"]
        if kept_alpha_last is not None and "alpha_last" in kept:
            kept_alpha_last[:n_kept] = kept["alpha_last"]
        rng.bit_generator.state = json.loads(kept["rng_state"])

    for i in range(start + 1, config.n_iter + 1):
        state.iteration = i
        post = i > config.burn_in
        if data.tobit:
            gibbs_censored(state, data, rng)
            gibbs_missing(state, data, rng)
            if sample_lam:
                before = state.n_lam_accepted
                acc_lam = mh_lambda_step(state, data, rng, step_sd=lam_step)
                if post:
                    state.n_lam_post += 1
                    state.n_lam_accepted_post += state.n_lam_accepted - before
                elif config.adapt_scale:
                    lam_step = float(
                        np.exp(np.log(lam_step) + (acc_lam - 0.44) / max(i, 10) ** 0.6)
                    )
        elif data.missing_mask.any():
            gibbs_missing(state, data, rng)

        before = state.n_joint_accepted
        joint_mh_step(state, data, rng, proposal, prior_fn=prior_fn, draw_alpha=draw_alpha)
        if post:
            state.n_joint_post += 1
            state.n_joint_accepted_post += state.n_joint_accepted - before

        if i <= config.burn_in:
            proposal.update(np.concatenate([_to_sampling(state.theta_vec), state.b]))
            if i % config.adapt_interval == 0:
                proposal.refresh()
            if i == config.burn_in:
                proposal.freeze()
        if i > config.burn_in and (i - config.burn_in) % config.thin == 0:
            kept_theta[n_kept] = state.theta_vec
            kept_b[n_kept] = state.b
            kept_lam[n_kept] = state.lam
            kept_ll[n_kept] = state.loglik
            if kept_alpha is not None:
                kept_alpha[n_kept] = state.alpha
            if kept_alpha_last is not None:
                kept_alpha_last[n_kept] = state.alpha[-1]
            n_kept += 1
        if (
            config.checkpoint_path
            and config.checkpoint_every
            and i % config.checkpoint_every == 0
        ):
            dataio.write_chain_checkpoint(
                config.checkpoint_path, state, proposal, lam_step, n_kept, i,
                {
                    "theta": kept_theta[:n_kept],
                    "b": kept_b[:n_kept],
                    "lam": kept_lam[:n_kept],
                    "loglik": kept_ll[:n_kept],
                    **({"alpha": kept_alpha[:n_kept]} if kept_alpha is not None else {}),
                    **(
                        {"alpha_last": kept_alpha_last[:n_kept]}
                        if kept_alpha_last is not None
                        else {}
                    ),
                    "rng_state": json.dumps(rng.bit_generator.state),
                },
            )

    return PosteriorSample(
        param_names=PARAM_NAMES,
        theta=kept_theta[:n_kept],
        b=kept_b[:n_kept],
        lam=kept_lam[:n_kept],
        loglik=kept_ll[:n_kept],
        alpha=kept_alpha[:n_kept] if kept_alpha is not None else None,
        alpha_last=kept_alpha_last[:n_kept] if kept_alpha_last is not None else None,
        accept_rate=state.n_joint_accepted_post / max(state.n_joint_post, 1),
        lam_accept_rate=state.n_lam_accepted_post / max(state.n_lam_post, 1),
        n_iter=config.n_iter,
        burn_in=config.burn_in,
        thin=config.thin,
    )
