"""Tests for the bundled synthetic rainfall generator."""

import numpy as np
import pytest

from specdrift.model import truncated_variance
from specdrift.simulate import simulate
from specdrift.synthetic import (
    default_rainfall_params,
    make_rainfall_dataset,
    sigma2_for_variance,
)
from specdrift.tobit import build_design, rain_to_latent

from _oracles import make_system


def small_dataset(**kwargs):
    defaults = dict(n=8, n_fit=60, horizon=4, n_stations=12, seed=3)
    defaults.update(kwargs)
    return make_rainfall_dataset(**defaults)


def test_shapes_and_split():
    ds = small_dataset()
    assert ds.train.rain.shape == (60, 12)
    assert ds.holdout.rain.shape == (4, 12)
    assert ds.latent_fields.shape == (64, 8, 8)
    assert ds.nwp_fields.shape == (64, 8, 8)
    assert ds.train.station_ids == ds.holdout.station_ids
    assert np.array_equal(ds.train.locations, ds.holdout.locations)


def test_seed_reproducibility_and_sensitivity():
    a = small_dataset()
    b = small_dataset()
    c = small_dataset(seed=4)
    assert np.array_equal(a.train.rain, b.train.rain, equal_nan=True)
    assert np.array_equal(a.latent_fields, b.latent_fields)
    assert not np.array_equal(a.train.rain, c.train.rain, equal_nan=True)


def test_rain_marginals_are_plausible():
    ds = make_rainfall_dataset(n=16, n_fit=300, horizon=4, n_stations=30, seed=0,
                               missing_rate=0.02)
    rain = ds.train.rain
    finite = rain[np.isfinite(rain)]
    zero_frac = np.mean(finite == 0.0)
    assert 0.2 < zero_frac < 0.8  # mixed wet/dry climate
    assert np.all(finite >= 0.0)
    missing = np.mean(~np.isfinite(rain))
    assert 0.005 < missing < 0.05
    assert np.all(ds.nwp_fields >= 0.0)
    assert not np.any(np.isnan(ds.train.nwp))


def test_latent_regression_consistency():
    # on non-missing wet entries, y^(1/lam) - xi - X b is the nugget draw
    ds = small_dataset(missing_rate=0.0)
    full_rain = np.vstack([ds.train.rain, ds.holdout.rain])
    full_nwp = np.vstack([ds.train.nwp, ds.holdout.nwp])

    from specdrift.grid import build_incidence, build_wavenumber_grid

    grid = build_wavenumber_grid(8)
    incidence = build_incidence(ds.train.locations, grid)
    xi = incidence.apply(ds.latent_fields.reshape(64, -1))

    design, center = build_design(full_nwp, ds.lam)
    wet = full_rain > 0.0
    resid = rain_to_latent(full_rain[wet], ds.lam) - xi[wet] - (design @ ds.b)[wet]
    sd = np.sqrt(ds.params.tau2)
    assert abs(resid.mean()) < 4 * sd / np.sqrt(wet.sum()) + 0.05 * sd
    assert resid.std() == pytest.approx(sd, rel=0.2)


def test_design_centering_matches_fitting_code():
    # the generator centers the transformed covariate on the training rows
    ds = small_dataset(missing_rate=0.0)
    _, center_train = build_design(ds.train.nwp, ds.lam)
    design_full, _ = build_design(np.vstack([ds.train.nwp, ds.holdout.nwp]),
                                  ds.lam, center=center_train)
    xi_dry = design_full[..., 1]
    assert np.array_equal(xi_dry, (np.vstack([ds.train.nwp, ds.holdout.nwp]) == 0.0))


def test_sigma2_for_variance_hits_target():
    params = default_rainfall_params(16, field_variance=0.8)
    assert truncated_variance(params, 16) / 16**2 == pytest.approx(0.8, rel=1e-12)

    # long stationary simulation agrees in distributional terms
    system = make_system(params, n=16)
    traj = simulate(system, 4000, seed=0, init="stationary")
    var = traj.fields().var()
    assert var == pytest.approx(0.8, rel=0.15)


def test_sigma2_for_variance_validation():
    params = default_rainfall_params(8)
    with pytest.raises(ValueError, match="> 0"):
        sigma2_for_variance(params, 8, 0.0)


def test_bad_regression_shape_rejected():
    with pytest.raises(ValueError, match="two components"):
        make_rainfall_dataset(n=8, n_fit=10, horizon=2, n_stations=3, seed=0, b=(1.0,))
