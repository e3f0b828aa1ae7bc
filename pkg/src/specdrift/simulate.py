"""Exact simulation of the spectral state space model.

The coefficient process is advanced step by step with the discrete-time
propagator and innovation variances from :class:`~specdrift.model.SpectralSystem`;
no time-discretization error is introduced.  Integer seeds use one
counter-based stream per time step (Philox with the step index in the
counter), so chunked or parallel simulation of disjoint step ranges
reproduces the sequential result bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import IncidenceMap, WavenumberGrid, inverse_transform
from .model import SpectralSystem

__all__ = ["Trajectory", "ObservationSet", "simulate", "propagate_deterministic", "observe"]


@dataclass(frozen=True)
class Trajectory:
    """Simulated coefficient path: `alphas[i]` is the state at step i+1."""

    grid: WavenumberGrid
    delta: float
    alpha0: np.ndarray  # initial state (n^2,), not part of the observed window
    alphas: np.ndarray  # (n_steps, n^2)

    @property
    def n_steps(self) -> int:
        return self.alphas.shape[0]

    def fields(self, workers: int = 1) -> np.ndarray:
        """Grid values of every step, shape (n_steps, n^2)."""
        return inverse_transform(self.grid, self.alphas, workers=workers)


@dataclass(frozen=True)
class ObservationSet:
    """Noisy observations of a trajectory, gridded or through an incidence map."""

    w: np.ndarray  # (n_steps, m)
    tau2: float
    incidence: IncidenceMap | None = None

    @property
    def n_steps(self) -> int:
        return self.w.shape[0]


def _step_rng(seed: int, step: int) -> np.random.Generator:
    # 2^128 counter values per step keeps the per-step blocks disjoint.
    return np.random.Generator(np.random.Philox(key=seed, counter=step << 128))


def _draw_initial(system: SpectralSystem, init, rng: np.random.Generator) -> np.ndarray:
    if isinstance(init, str):
        if init == "innovation":
            scale = np.sqrt(system.q)
        elif init == "stationary":
            scale = np.sqrt(system.q0)
        else:
            raise ValueError(f"init must be 'innovation', 'stationary' or an array, got {init!r}")
        return scale * rng.standard_normal(system.n_slots)
    alpha0 = np.asarray(init, dtype=float)
    if alpha0.shape != (system.n_slots,) or not np.all(np.isfinite(alpha0)):
        raise ValueError(f"fixed init must be a finite array of shape ({system.n_slots},)")
    return alpha0.copy()


def simulate(system: SpectralSystem, n_steps: int, seed, init="innovation") -> Trajectory:
    """Draw a coefficient trajectory of `n_steps` states after the initial one.

    Parameters
    ----------
    seed : int or numpy Generator.  Integer seeds give per-step Philox
        streams (reproducible under chunking); a Generator is consumed
        sequentially.
    init : "innovation" (default), "stationary", or a fixed coefficient array
        for the state at step 0.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    n_slots = system.n_slots
    sd = np.sqrt(system.q)

    sequential = isinstance(seed, np.random.Generator)
    rng0 = seed if sequential else _step_rng(int(seed), 0)
    alpha = _draw_initial(system, init, rng0)

    alpha0 = alpha.copy()
    out = np.empty((n_steps, n_slots))
    for i in range(1, n_steps + 1):
        rng = seed if sequential else _step_rng(int(seed), i)
        alpha = system.apply_propagator(alpha)
        alpha += sd * rng.standard_normal(n_slots)
        out[i - 1] = alpha
    return Trajectory(grid=system.grid, delta=system.delta, alpha0=alpha0, alphas=out)


def propagate_deterministic(alpha, system: SpectralSystem, n_steps: int) -> np.ndarray:
    """Apply the noise-free propagator `n_steps` times (0 steps: input unchanged).

    Damping makes the coefficient norm (= field energy, by orthonormality)
    non-increasing in every step.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape[-1] != system.n_slots:
        raise ValueError(f"alpha last axis must be {system.n_slots}, got {alpha.shape}")
    out = alpha.copy()
    for _ in range(n_steps):
        out = system.apply_propagator(out)
    return out


def observe(
    trajectory: Trajectory,
    tau2: float,
    seed,
    incidence: IncidenceMap | None = None,
    workers: int = 1,
) -> ObservationSet:
    """Add nugget noise to the trajectory's fields, optionally at station cells only."""
    if tau2 < 0.0:
        raise ValueError(f"tau2 must be >= 0, got {tau2!r}")
    fields = trajectory.fields(workers=workers)
    if incidence is not None:
        if incidence.n != trajectory.grid.n:
            raise ValueError(
                f"incidence was built for n={incidence.n}, trajectory has n={trajectory.grid.n}"
            )
        fields = incidence.apply(fields)
    rng = np.random.default_rng(seed)
    w = fields + np.sqrt(tau2) * rng.standard_normal(fields.shape)
    return ObservationSet(w=w, tau2=float(tau2), incidence=incidence)
