"""Tests for forecast verification: CRPS, MAE, and the score report."""

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdrift.scoring import (
    ScoreRow,
    aggregate,
    crps_sample,
    mae,
    median_point_forecast,
)

from _oracles import crps_quadratic

# =============================================================================
# CRPS estimator
# =============================================================================


def test_crps_two_point_hand_value():
    # mean |x - 1| = 1; pair term = (0+2+2+0)/(2*4) = 0.5
    assert crps_sample(np.array([0.0, 2.0]), np.array(1.0)) == pytest.approx(0.5)


def test_crps_single_sample_is_absolute_error():
    assert crps_sample(np.array([3.0]), np.array(1.25)) == pytest.approx(1.75)
    assert crps_sample(np.array([[3.0], [0.5]]), np.array([1.0, 1.0])) == pytest.approx([2.0, 0.5])


def test_crps_matches_quadratic_reference():
    rng = np.random.default_rng(0)
    for m in (2, 3, 17, 101):
        x = rng.normal(size=m) * 3.0
        y = rng.normal()
        assert crps_sample(x, np.array(y)) == pytest.approx(crps_quadratic(x, y), abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=25),
    st.floats(-50, 50, allow_nan=False),
)
def test_crps_sorting_trick_is_exact(samples, y):
    x = np.array(samples)
    assert crps_sample(x, np.array(y)) == pytest.approx(crps_quadratic(x, y), abs=1e-9)


def test_crps_shift_and_scale_equivariance():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=20), 0.4
    base = crps_sample(x, np.array(y))
    assert crps_sample(x + 5.0, np.array(y + 5.0)) == pytest.approx(base)
    assert crps_sample(3.0 * x, np.array(3.0 * y)) == pytest.approx(3.0 * base)


def test_crps_nan_observation_propagates():
    out = crps_sample(np.ones((2, 4)), np.array([1.0, np.nan]))
    assert out[0] == 0.0 and np.isnan(out[1])


def test_crps_input_validation():
    with pytest.raises(ValueError, match="finite"):
        crps_sample(np.array([1.0, np.inf]), np.array(0.0))
    with pytest.raises(ValueError, match="at least one sample"):
        crps_sample(np.empty((3, 0)), np.zeros(3))


# =============================================================================
# Point forecasts and MAE
# =============================================================================


def test_median_lower_middle_convention():
    assert median_point_forecast(np.array([4.0, 1.0, 3.0, 2.0])) == 2.0
    assert median_point_forecast(np.array([3.0, 1.0, 2.0])) == 2.0
    batched = median_point_forecast(np.array([[1.0, 9.0], [2.0, 0.0]]))
    assert np.array_equal(batched, [1.0, 0.0])


def test_mae_skips_missing():
    f = np.array([1.0, 2.0, 3.0])
    y = np.array([2.0, np.nan, 1.0])
    assert mae(f, y) == pytest.approx(1.5)
    assert mae(0.0, y) == pytest.approx(1.5)  # broadcast scalar forecast


def test_mae_all_missing_raises():
    with pytest.raises(ValueError, match="no observations"):
        mae(np.ones(3), np.full(3, np.nan))


# =============================================================================
# Aggregated report
# =============================================================================


def example_forecasts():
    rng = np.random.default_rng(42)
    samples = rng.normal(size=(2, 3, 4, 50))  # cases, leads, stations, draws
    obs = rng.normal(size=(2, 3, 4))
    obs[0, 1, 2] = np.nan
    obs[1, 2, :] = np.nan  # a fully missing (case, lead)
    return samples, obs


def test_aggregate_row_inventory():
    samples, obs = example_forecasts()
    report = aggregate(samples, obs)
    for scope in ("stationwise", "areal"):
        for lead in (1, 2, 3, None):
            assert isinstance(report.get(scope, lead), ScoreRow)
    with pytest.raises(KeyError):
        report.get("stationwise", 4)
    # lead 3 lost one case entirely; stationwise n counts station-cases
    assert report.get("stationwise", 1).n == 8
    assert report.get("stationwise", 2).n == 7
    assert report.get("stationwise", 3).n == 4
    assert report.get("areal", 3).n == 1
    assert report.get("stationwise", None).n == 8 + 7 + 4


def test_aggregate_matches_direct_computation():
    samples, obs = example_forecasts()
    report = aggregate(samples, obs)

    sw = report.get("stationwise", 1)
    direct = crps_sample(samples[:, 0].reshape(-1, 50), obs[:, 0].reshape(-1))
    assert sw.crps == pytest.approx(np.nanmean(direct))

    ar = report.get("areal", 2)
    vals = []
    for case in range(2):
        present = np.isfinite(obs[case, 1])
        vals.append(crps_sample(samples[case, 1, present].mean(axis=0),
                                obs[case, 1, present].mean()))
    assert ar.crps == pytest.approx(np.mean(vals))

    med = median_point_forecast(samples[0, 0])
    ae = np.abs(med - obs[0, 0])
    pooled = report.get("stationwise", 1)
    assert pooled.mae == pytest.approx(
        np.mean(np.concatenate([ae, np.abs(median_point_forecast(samples[1, 0]) - obs[1, 0])]))
    )


def test_aggregate_single_case_equivalence():
    samples, obs = example_forecasts()
    single = aggregate(samples[0], obs[0])
    batched = aggregate(samples[0][None], obs[0][None])
    assert single.rows == batched.rows


def test_aggregate_shape_and_empty_errors():
    with pytest.raises(ValueError, match="expected samples"):
        aggregate(np.zeros((2, 3, 4)), np.zeros((2, 4)))
    with pytest.raises(ValueError, match="all observations missing"):
        aggregate(np.zeros((1, 2, 3, 5)), np.full((1, 2, 3), np.nan))


def test_report_csv_round_trip(tmp_path):
    samples, obs = example_forecasts()
    report = aggregate(samples, obs)
    path = tmp_path / "scores.csv"
    report.write_csv(path)

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(report.rows)
    for parsed, row in zip(rows, report.rows):
        assert parsed["scope"] == row.scope
        assert parsed["lead"] == ("" if row.lead is None else str(row.lead))
        assert float(parsed["crps"]) == pytest.approx(row.crps, rel=1e-9)
        assert int(parsed["n"]) == row.n
