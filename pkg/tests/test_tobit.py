"""Tests for the censored power-transform observation model."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdrift.tobit import (
    TobitDataset,
    build_design,
    fit_lambda_tilde,
    latent_to_rain,
    rain_to_latent,
)

# =============================================================================
# Link functions
# =============================================================================


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=1e-3, max_value=1e3),
    st.floats(min_value=0.3, max_value=4.0),
)
def test_link_round_trip(y, lam):
    w = rain_to_latent(y, lam)
    assert latent_to_rain(w, lam) == pytest.approx(y, rel=1e-12)


def test_latent_to_rain_censors_nonpositive():
    w = np.array([-2.0, -1e-9, 0.0, 1e-9, 2.0])
    y = latent_to_rain(w, 1.5)
    assert np.all(y[:3] == 0.0)
    assert np.all(y[3:] > 0.0)
    assert y[4] == pytest.approx(2.0**1.5)


def test_rain_to_latent_rejects_nonpositive_values():
    with pytest.raises(ValueError, match="positive"):
        rain_to_latent(np.array([1.0, 0.0]), 1.5)


@pytest.mark.parametrize("lam", [0.0, -1.0, np.nan])
def test_links_reject_bad_exponent(lam):
    with pytest.raises(ValueError, match="lam"):
        rain_to_latent(np.ones(3), lam)
    with pytest.raises(ValueError, match="lam"):
        latent_to_rain(np.ones(3), lam)


# =============================================================================
# Dataset container
# =============================================================================


def small_dataset():
    y = np.array([[0.0, 1.2, np.nan], [3.0, 0.0, 0.5]])
    yf = np.array([[0.1, 1.0, 0.0], [2.0, 0.0, 0.4]])
    loc = np.array([[0.1, 0.2], [0.5, 0.5], [0.9, 0.3]])
    return TobitDataset(y=y, y_forecast=yf, locations=loc)


def test_dataset_masks_partition_cells():
    ds = small_dataset()
    total = ds.missing_mask | ds.censored_mask | ds.positive_mask
    assert np.all(total)
    assert not np.any(ds.missing_mask & ds.censored_mask)
    assert not np.any(ds.censored_mask & ds.positive_mask)
    assert ds.n_steps == 2 and ds.n_stations == 3
    assert ds.censored_mask.sum() == 2 and ds.missing_mask.sum() == 1


@pytest.mark.parametrize(
    "kwargs, msg",
    [
        (dict(y=np.zeros((2, 3)), y_forecast=np.zeros((2, 2)),
              locations=np.zeros((3, 2))), "shape"),
        (dict(y=np.zeros((2, 3)), y_forecast=np.zeros((2, 3)),
              locations=np.zeros((2, 2))), "locations"),
        (dict(y=np.array([[1.0, -0.1, 0.0]]), y_forecast=np.zeros((1, 3)),
              locations=np.zeros((3, 2))), ">= 0"),
        (dict(y=np.zeros((1, 3)), y_forecast=np.array([[1.0, np.nan, 0.0]]),
              locations=np.zeros((3, 2))), "complete"),
    ],
)
def test_dataset_validation(kwargs, msg):
    with pytest.raises(ValueError, match=msg):
        TobitDataset(**kwargs)


# =============================================================================
# Regression design
# =============================================================================


def test_design_columns():
    yf = np.array([[0.0, 1.0], [8.0, 0.0]])
    x, center = build_design(yf, lam_tilde=3.0)
    transformed = yf ** (1.0 / 3.0)
    assert center == pytest.approx(transformed.mean())
    assert np.allclose(x[..., 0], transformed - center)
    assert np.array_equal(x[..., 1], (yf == 0.0).astype(float))
    assert x.shape == yf.shape + (2,)


def test_design_reuses_given_center():
    yf_train = np.array([[1.0, 4.0, 9.0]])
    _, center = build_design(yf_train, lam_tilde=2.0)
    x_hold, center_again = build_design(np.array([[16.0]]), 2.0, center=center)
    assert center_again == center
    assert x_hold[0, 0, 0] == pytest.approx(4.0 - center)


def test_design_all_dry_forecast():
    x, center = build_design(np.zeros((3, 2)), lam_tilde=1.5)
    assert center == 0.0
    assert np.all(x[..., 0] == 0.0)
    assert np.all(x[..., 1] == 1.0)


def test_design_rejects_bad_inputs():
    with pytest.raises(ValueError, match="lam_tilde"):
        build_design(np.ones((2, 2)), lam_tilde=0.0)
    with pytest.raises(ValueError, match="complete"):
        build_design(np.array([[1.0, np.nan]]), lam_tilde=1.0)
    with pytest.raises(ValueError, match=">= 0"):
        build_design(np.array([[1.0, -2.0]]), lam_tilde=1.0)


# =============================================================================
# Marginal exponent fit
# =============================================================================


@pytest.mark.parametrize("lam_true", [1.0, 1.4, 2.2])
def test_lambda_tilde_recovery(lam_true):
    rng = np.random.default_rng(int(lam_true * 10))
    w = rng.normal(0.6, 1.0, size=100_000)
    y = latent_to_rain(w, lam_true)
    assert fit_lambda_tilde(y) == pytest.approx(lam_true, abs=0.05)


def test_lambda_tilde_ignores_missing_and_clamps_to_bounds():
    rng = np.random.default_rng(3)
    y = latent_to_rain(rng.normal(0.6, 1.0, 50_000), 3.0)
    y_with_gaps = y.copy()
    y_with_gaps[::7] = np.nan
    est = fit_lambda_tilde(y_with_gaps)
    assert est == pytest.approx(3.0, abs=0.05)
    assert fit_lambda_tilde(y, lam_bounds=(0.2, 2.0)) <= 2.0 + 1e-6


def test_lambda_tilde_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        fit_lambda_tilde(np.array([np.nan, np.nan]))
    with pytest.raises(ValueError):
        fit_lambda_tilde(np.array([-1.0, 2.0, 3.0]))
    with pytest.raises(ValueError, match="two positive"):
        fit_lambda_tilde(np.array([0.0, 0.0, 5.0]))
