"""Tests for exact trajectory simulation and noisy observation.

Covers seeding semantics (per-step streams make prefixes reproducible),
initial-state options, stationary second moments against the model's
closed forms, deterministic propagation, and the observation helper.
"""

import numpy as np
import pytest

from specdrift.grid import build_incidence, cell_coords, dense_basis_matrix
from specdrift.model import SpdeParams
from specdrift.simulate import observe, propagate_deterministic, simulate

from _oracles import make_system

# =============================================================================
# Helpers
# =============================================================================

PARAMS = SpdeParams(
    rho0=0.15, sigma2=1.2, zeta=0.8, rho1=0.12, gamma=1.8,
    psi=0.4, mu_x=0.2, mu_y=-0.1, tau2=0.05,
)


def batch_se(series, n_batches=100):
    """Monte-Carlo standard error of the series mean via batch means."""
    keep = len(series) - len(series) % n_batches
    means = np.reshape(series[:keep], (n_batches, -1)).mean(axis=1)
    return means.std(ddof=1) / np.sqrt(n_batches)


# =============================================================================
# Seeding and shapes
# =============================================================================


def test_integer_seed_prefix_property():
    # per-step streams: a shorter run is a prefix of a longer one
    system = make_system(PARAMS, n=4)
    long = simulate(system, 12, seed=7)
    short = simulate(system, 5, seed=7)
    assert np.array_equal(long.alphas[:5], short.alphas)
    assert np.array_equal(long.alpha0, short.alpha0)


def test_integer_seed_reproducible_and_seed_sensitive():
    system = make_system(PARAMS, n=4)
    a = simulate(system, 6, seed=3).alphas
    assert np.array_equal(a, simulate(system, 6, seed=3).alphas)
    assert not np.array_equal(a, simulate(system, 6, seed=4).alphas)


def test_generator_seed_is_sequential():
    system = make_system(PARAMS, n=4)
    rng = np.random.default_rng(0)
    first = simulate(system, 3, seed=rng)
    second = simulate(system, 3, seed=rng)
    assert not np.array_equal(first.alphas, second.alphas)


def test_shapes_and_fields():
    system = make_system(PARAMS, n=6)
    traj = simulate(system, 4, seed=1)
    assert traj.alphas.shape == (4, 36)
    assert traj.n_steps == 4
    basis = dense_basis_matrix(system.grid)
    assert np.allclose(traj.fields(), traj.alphas @ basis.T, atol=1e-12)


def test_bad_arguments():
    system = make_system(PARAMS, n=4)
    with pytest.raises(ValueError):
        simulate(system, 0, seed=1)
    with pytest.raises(ValueError, match="init"):
        simulate(system, 2, seed=1, init="typo")
    with pytest.raises(ValueError):
        simulate(system, 2, seed=1, init=np.zeros(7))


def test_fixed_init_is_used_verbatim():
    system = make_system(PARAMS, n=4)
    start = np.linspace(-1.0, 1.0, 16)
    traj = simulate(system, 1, seed=9, init=start)
    assert np.array_equal(traj.alpha0, start)
    # the first step is G alpha0 plus innovation noise with variance q
    resid = traj.alphas[0] - system.apply_propagator(start)
    assert np.all(np.abs(resid) < 6.0 * np.sqrt(system.q))


# =============================================================================
# Moments
# =============================================================================


def test_stationary_per_coefficient_variance():
    # sample variance of each coefficient tracks q0 within 3 batch-means SE
    system = make_system(PARAMS, n=4)
    alphas = simulate(system, 20_000, seed=123, init="stationary").alphas
    for slot in range(system.n_slots):
        series = alphas[:, slot] ** 2
        se = batch_se(series)
        assert abs(series.mean() - system.q0[slot]) < 3.0 * se, slot


def test_innovation_init_variance_is_q():
    # under the innovation convention the first state is N(0, q)
    system = make_system(PARAMS, n=4)
    draws = np.array([
        simulate(system, 1, seed=s, init="innovation").alpha0 for s in range(4000)
    ])
    ratio = draws.var(axis=0, ddof=1) / system.q
    assert np.all(np.abs(ratio - 1.0) < 0.15)


def test_lag_one_autocovariance_is_g_q0():
    system = make_system(PARAMS, n=4)
    alphas = simulate(system, 40_000, seed=5, init="stationary").alphas
    target = system.propagator_matrix() @ np.diag(system.q0)
    # a diagonal entry and a pair cross entry, batch-means tolerance
    for i, j in [(0, 0), (4, 4), (4, 5), (5, 4)]:
        series = alphas[1:, i] * alphas[:-1, j]
        se = batch_se(series)
        assert abs(series.mean() - target[i, j]) < 3.0 * se, (i, j)


def test_propagate_deterministic_matches_matrix_powers():
    rng = np.random.default_rng(2)
    system = make_system(PARAMS, n=4)
    alpha = rng.standard_normal(16)
    g = system.propagator_matrix()
    assert np.array_equal(propagate_deterministic(alpha, system, 0), alpha)
    for steps in (1, 3):
        expected = np.linalg.matrix_power(g, steps) @ alpha
        assert np.allclose(propagate_deterministic(alpha, system, steps), expected, atol=1e-12)


def test_propagation_never_gains_energy():
    rng = np.random.default_rng(8)
    system = make_system(PARAMS, n=6)
    alpha = rng.standard_normal((10, 36))
    norms = [np.linalg.norm(alpha, axis=-1)]
    for _ in range(5):
        alpha = propagate_deterministic(alpha, system, 1)
        norms.append(np.linalg.norm(alpha, axis=-1))
    assert np.all(np.diff(np.array(norms), axis=0) <= 1e-12)


# =============================================================================
# Observation
# =============================================================================


def test_observe_zero_nugget_returns_fields():
    system = make_system(PARAMS, n=4)
    traj = simulate(system, 3, seed=6)
    obs = observe(traj, tau2=0.0, seed=0)
    assert np.array_equal(obs.w, traj.fields())


def test_observe_with_incidence_subsets_cells():
    system = make_system(PARAMS, n=4)
    traj = simulate(system, 3, seed=6)
    locs = cell_coords(4)[[2, 9, 11]]
    inc = build_incidence(locs, system.grid)
    obs = observe(traj, tau2=0.0, seed=0, incidence=inc)
    assert obs.w.shape == (3, 3)
    assert np.array_equal(obs.w, traj.fields()[:, [2, 9, 11]])


def test_observe_nugget_statistics():
    system = make_system(PARAMS, n=4)
    traj = simulate(system, 2000, seed=10)
    obs = observe(traj, tau2=0.25, seed=1)
    noise = obs.w - traj.fields()
    assert abs(noise.var() - 0.25) < 0.01
    assert abs(noise.mean()) < 0.01


def test_observe_validates_inputs():
    system = make_system(PARAMS, n=4)
    traj = simulate(system, 2, seed=0)
    with pytest.raises(ValueError):
        observe(traj, tau2=-0.1, seed=0)
    other = build_incidence(np.array([[0.5, 0.5]]), make_system(PARAMS, n=6).grid)
    with pytest.raises(ValueError, match="n="):
        observe(traj, tau2=0.1, seed=0, incidence=other)
