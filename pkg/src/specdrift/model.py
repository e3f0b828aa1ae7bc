"""Advection-diffusion-damping model for space-time random fields.

The latent field obeys a linear stochastic transport equation on the periodic
unit square: drift with velocity mu, anisotropic diffusion Sigma, damping
zeta, driven by noise that is white in time and spatially colored with a
Whittle (Matern, smoothness 1) spectrum.  In the Fourier domain every
wavenumber k evolves independently with complex rate

    h(k) = -i mu'k - (k'Sigma k + zeta),

which makes the discrete-time coefficient process a diagonal/2x2-block
Gaussian state space model: per step delta, each cosine/sine pair is damped
by exp(-delta (k'Sigma k + zeta)) and rotated by the advection phase
delta mu'k, with innovation variance

    q(k) = f(k) (1 - exp(-2 delta (k'Sigma k + zeta))) / (2 (k'Sigma k + zeta)),

where f is the Whittle spectral density.  :class:`SpectralSystem` holds these
arrays; :func:`covariance_function` and :func:`approximation_bound` evaluate
the implied space-time covariance and the truncation error guarantee.
"""

from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass

import numpy as np
import scipy.special

from .grid import WavenumberGrid, build_wavenumber_grid

__all__ = [
    "PARAM_NAMES",
    "SpdeParams",
    "SpectralSystem",
    "diffusion_matrix",
    "whittle_spectrum",
    "whittle_covariance",
    "spde_spectrum",
    "build_spectral_system",
    "covariance_function",
    "approximation_bound",
]

TWO_PI = 2.0 * np.pi

#: Canonical parameter order used by vectorized interfaces (MLE, MCMC, files).
PARAM_NAMES = (
    "rho0",
    "sigma2",
    "zeta",
    "rho1",
    "gamma",
    "psi",
    "mu_x",
    "mu_y",
    "tau2",
)

GAMMA_BOX = (0.1, 10.0)
MU_BOX = (-0.5, 0.5)
PSI_BOX = (0.0, np.pi / 2.0)


@dataclass(frozen=True)
class SpdeParams:
    """Model parameters on the unit-square / unit-step scale.

    rho0, sigma2 : innovation range and marginal variance (Whittle noise)
    zeta : temporal damping (> 0; e^-zeta is the lag-one correlation at k=0)
    rho1, gamma, psi : diffusion range, anisotropy ratio, anisotropy angle
    mu_x, mu_y : drift velocity components
    tau2 : observation nugget variance (never enters the latent dynamics)

    Construction does not raise; :meth:`validate` enforces the box
    constraints and is called by every model builder.
    """

    rho0: float
    sigma2: float
    zeta: float
    rho1: float
    gamma: float
    psi: float
    mu_x: float
    mu_y: float
    tau2: float

    def validate(self) -> "SpdeParams":
        for name in ("rho0", "sigma2", "zeta", "rho1"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not GAMMA_BOX[0] <= self.gamma <= GAMMA_BOX[1]:
            raise ValueError(f"gamma must lie in {GAMMA_BOX}, got {self.gamma!r}")
        if not PSI_BOX[0] <= self.psi <= PSI_BOX[1]:
            raise ValueError(f"psi must lie in [0, pi/2], got {self.psi!r}")
        for name in ("mu_x", "mu_y"):
            if not MU_BOX[0] <= getattr(self, name) <= MU_BOX[1]:
                raise ValueError(f"{name} must lie in {MU_BOX}, got {getattr(self, name)!r}")
        if not self.tau2 >= 0.0:
            raise ValueError(f"tau2 must be >= 0, got {self.tau2!r}")
        if not all(np.isfinite(self.as_array())):
            raise ValueError("parameters must be finite")
        return self

    @property
    def mu(self) -> np.ndarray:
        return np.array([self.mu_x, self.mu_y])

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, vec) -> "SpdeParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (len(PARAM_NAMES),):
            raise ValueError(f"expected {len(PARAM_NAMES)} parameters, got shape {vec.shape}")
        return cls(**dict(zip(PARAM_NAMES, vec.tolist())))

    def replace(self, **changes) -> "SpdeParams":
        return dataclasses.replace(self, **changes)


def diffusion_matrix(rho1: float, gamma: float, psi: float) -> np.ndarray:
    """Diffusion matrix with principal axis at angle psi.

    Eigenvalues are rho1^2 and (rho1/gamma)^2, so gamma^2 is the anisotropy
    ratio and gamma=1 gives the isotropic rho1^2 * I.
    """
    if not rho1 > 0.0:
        raise ValueError(f"rho1 must be > 0, got {rho1!r}")
    if not gamma > 0.0:
        raise ValueError(f"gamma must be > 0, got {gamma!r}")
    c, s = np.cos(psi), np.sin(psi)
    rot = np.array([[c, s], [-s, c]])
    return rho1**2 * (rot.T @ np.diag([1.0, gamma**-2]) @ rot)


def whittle_spectrum(k, rho0: float, sigma2: float) -> np.ndarray:
    """Spectral density sigma^2/(2 pi)^2 (k'k + 1/rho0^2)^-2 of the innovation field."""
    if not (rho0 > 0.0 and sigma2 > 0.0):
        raise ValueError("rho0 and sigma2 must be > 0")
    k = np.asarray(k, dtype=float)
    k2 = np.sum(np.atleast_2d(k) ** 2, axis=-1) if k.ndim == 1 else np.sum(k**2, axis=-1)
    out = sigma2 / TWO_PI**2 * (k2 + rho0**-2.0) ** -2.0
    return out[0] if k.ndim == 1 else out


def whittle_covariance(d, rho0: float, sigma2: float) -> np.ndarray:
    """Isotropic covariance sigma^2 (d/rho0) K_1(d/rho0) at distance d >= 0."""
    if not (rho0 > 0.0 and sigma2 > 0.0):
        raise ValueError("rho0 and sigma2 must be > 0")
    d = np.asarray(d, dtype=float)
    if np.any(d < 0.0):
        raise ValueError("distances must be >= 0")
    x = d / rho0
    with np.errstate(invalid="ignore", over="ignore"):
        val = np.where(x > 0.0, x * scipy.special.k1(np.where(x > 0.0, x, 1.0)), 1.0)
    return sigma2 * val


def spde_spectrum(omega, k, params: SpdeParams) -> np.ndarray:
    """Space-time spectral density at temporal frequency omega, wavenumber k."""
    params.validate()
    omega = np.asarray(omega, dtype=float)
    k = np.atleast_2d(np.asarray(k, dtype=float))
    sigma = diffusion_matrix(params.rho1, params.gamma, params.psi)
    rate = np.einsum("...i,ij,...j->...", k, sigma, k) + params.zeta
    fsd = whittle_spectrum(k, params.rho0, params.sigma2)
    phase = omega + k @ params.mu
    return fsd / TWO_PI / (rate**2 + phase**2)


@dataclass(frozen=True)
class SpectralSystem:
    """Discrete-time Gaussian state space system in the coefficient layout.

    The propagator G is block diagonal: a scalar decay on the four
    cosine-only slots and a scaled rotation on each (cos, sin) pair, so G G'
    is the diagonal `f` and all second-moment recursions stay diagonal.
    """

    grid: WavenumberGrid
    params: SpdeParams
    delta: float
    rate: np.ndarray  # (K,) damping k'Sigma k + zeta per wavenumber
    fsd: np.ndarray  # (K,) innovation spectral density per wavenumber
    decay_fixed: np.ndarray  # (4,) propagator entries on cosine-only slots
    g_cos: np.ndarray  # (K-4,) pair block: decay * cos(advection angle)
    g_sin: np.ndarray  # (K-4,) pair block: decay * sin(advection angle)
    q: np.ndarray  # (n^2,) innovation variance per slot
    f: np.ndarray  # (n^2,) diagonal of G G' per slot
    q0: np.ndarray  # (n^2,) stationary variance per slot

    @property
    def n_slots(self) -> int:
        return self.grid.n_slots

    @property
    def spectral_radius(self) -> float:
        """Largest propagator eigenvalue modulus, exp(-delta * zeta)."""
        return float(np.exp(-self.delta * self.params.zeta))

    def apply_propagator(self, x) -> np.ndarray:
        """G x for x of shape (..., n^2)."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., :4] = self.decay_fixed * x[..., :4]
        xc, xs = x[..., 4::2], x[..., 5::2]
        out[..., 4::2] = self.g_cos * xc - self.g_sin * xs
        out[..., 5::2] = self.g_sin * xc + self.g_cos * xs
        return out

    def apply_propagator_transpose(self, x) -> np.ndarray:
        """G' x (the pair rotation runs backwards)."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., :4] = self.decay_fixed * x[..., :4]
        xc, xs = x[..., 4::2], x[..., 5::2]
        out[..., 4::2] = self.g_cos * xc + self.g_sin * xs
        out[..., 5::2] = -self.g_sin * xc + self.g_cos * xs
        return out

    def propagator_matrix(self, slots=None) -> np.ndarray:
        """Dense G (for reduced bases and oracles; O(n^4) memory if full)."""
        n_slots = self.n_slots
        g = np.zeros((n_slots, n_slots))
        g[:4, :4] = np.diag(self.decay_fixed)
        ic = np.arange(4, n_slots, 2)
        g[ic, ic] = self.g_cos
        g[ic + 1, ic + 1] = self.g_cos
        g[ic, ic + 1] = -self.g_sin
        g[ic + 1, ic] = self.g_sin
        if slots is None:
            return g
        slots = np.asarray(slots, dtype=np.int64)
        return g[np.ix_(slots, slots)]


def _innovation_variance(fsd: np.ndarray, rate: np.ndarray, delta: float) -> np.ndarray:
    """f(k) (1 - e^(-2 delta r)) / (2 r), with the exact delta * f(k) limit at r = 0."""
    out = np.empty_like(fsd)
    pos = rate > 0.0
    out[pos] = fsd[pos] * (-np.expm1(-2.0 * delta * rate[pos])) / (2.0 * rate[pos])
    out[~pos] = fsd[~pos] * delta
    return out


def build_spectral_system(
    grid: WavenumberGrid, params: SpdeParams, delta: float = 1.0
) -> SpectralSystem:
    """Assemble propagator, innovation and stationary variances for step `delta`."""
    params.validate()
    if not delta > 0.0:
        raise ValueError(f"delta must be > 0, got {delta!r}")

    sigma = diffusion_matrix(params.rho1, params.gamma, params.psi)
    k = grid.k
    rate = np.einsum("ki,ij,kj->k", k, sigma, k) + params.zeta
    fsd = whittle_spectrum(k, params.rho0, params.sigma2)

    decay = np.exp(-delta * rate)
    angle = delta * (k[4:] @ params.mu)

    q_wave = _innovation_variance(fsd, rate, delta)
    q0_wave = fsd / (2.0 * rate)

    def per_slot(vals: np.ndarray) -> np.ndarray:
        out = np.empty(grid.n_slots)
        out[:4] = vals[:4]
        out[4::2] = vals[4:]
        out[5::2] = vals[4:]
        return out

    return SpectralSystem(
        grid=grid,
        params=params,
        delta=float(delta),
        rate=rate,
        fsd=fsd,
        decay_fixed=decay[:4],
        g_cos=decay[4:] * np.cos(angle),
        g_sin=decay[4:] * np.sin(angle),
        q=per_slot(q_wave),
        f=per_slot(decay**2),
        q0=per_slot(q0_wave),
    )


@functools.lru_cache(maxsize=8)
def _cached_grid(n: int) -> WavenumberGrid:
    return build_wavenumber_grid(n)


def _spectral_terms(params: SpdeParams, n_trunc: int):
    """Per-wavenumber (k, weight, rate, density) for truncated covariance sums.

    Conjugate pairs carry weight 2, the four self-conjugate wavenumbers
    weight 1, so sums over the representatives equal sums over the full
    (symmetrized) wavenumber set and are exactly real.
    """
    grid = _cached_grid(int(n_trunc))
    k = grid.k
    sigma = diffusion_matrix(params.rho1, params.gamma, params.psi)
    rate = np.einsum("ki,ij,kj->k", k, sigma, k) + params.zeta
    fsd = whittle_spectrum(k, params.rho0, params.sigma2)
    weight = np.full(k.shape[0], 2.0)
    weight[:4] = 1.0
    return k, weight, rate, fsd


def covariance_function(t_lag, s_lag, params: SpdeParams, n_trunc: int) -> np.ndarray:
    """Space-time covariance of the truncated model.

    Parameters
    ----------
    t_lag : scalar or (nt,) array of time lags (any sign).
    s_lag : (2,) or (ns, 2) array of spatial lags.
    params, n_trunc : model parameters and truncation side (even, >= 4).

    Returns
    -------
    Covariance table of shape (nt, ns), squeezed to the input ranks.
    Stationarity gives C(t, s) = C(-t, -s); the evaluation is exactly real.
    """
    params.validate()
    t = np.atleast_1d(np.asarray(t_lag, dtype=float))
    s = np.atleast_2d(np.asarray(s_lag, dtype=float))
    if s.ndim != 2 or s.shape[1] != 2:
        raise ValueError(f"s_lag must be (2,) or (ns, 2), got {np.shape(s_lag)}")

    k, weight, rate, fsd = _spectral_terms(params, n_trunc)
    amp = weight * fsd / (2.0 * rate)  # (K,)
    damp = np.exp(-rate[:, None] * np.abs(t)[None, :])  # (K, nt)
    phase = k @ s.T  # (K, ns)
    adv_freq = k @ params.mu
    # the four self-conjugate wavenumbers have real coefficients and hence a
    # purely decaying (rotation-free) temporal dynamic
    adv_freq[:4] = 0.0
    adv = adv_freq[:, None] * t[None, :]  # (K, nt)
    # cos(k's - mu'k t) = cos(k's)cos(mu'k t) + sin(k's)sin(mu'k t)
    table = np.einsum("kt,ks->ts", amp[:, None] * damp * np.cos(adv), np.cos(phase))
    table += np.einsum("kt,ks->ts", amp[:, None] * damp * np.sin(adv), np.sin(phase))

    if np.isscalar(t_lag) or np.ndim(t_lag) == 0:
        table = table[0]
        return table[0] if np.ndim(s_lag) == 1 else table
    return table[:, 0] if np.ndim(s_lag) == 1 else table


def truncated_variance(params: SpdeParams, n_trunc: int) -> float:
    """Marginal variance of the truncated model, C(0, 0) at truncation n_trunc."""
    params.validate()
    _, weight, rate, fsd = _spectral_terms(params, n_trunc)
    return float(np.sum(weight * fsd / (2.0 * rate)))


def approximation_bound(params: SpdeParams, n: int, n_ref: int | None = None) -> float:
    """Uniform bound on |C_ref - C_n|: the marginal-variance difference.

    Every discarded wavenumber contributes at most its weight at lag zero, so
    the variance gap dominates the covariance error at every lag.  `n_ref`
    stands in for the infinite sum and must be at least 4 n (default 8 n).
    """
    if n_ref is None:
        n_ref = 8 * n
    if n_ref < 4 * n:
        raise ValueError(f"n_ref must be >= 4 n = {4 * n}, got {n_ref}")
    return truncated_variance(params, n_ref) - truncated_variance(params, n)
