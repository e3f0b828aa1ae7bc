"""Probabilistic and point forecast verification.

CRPS uses the standard sample estimator

    crps = mean_i |x_i - y| - (1 / (2 m^2)) sum_ij |x_i - x_j|

computed in O(m log m) via sorting.  Point forecasts are sample medians
(lower-middle for even sizes).  :func:`aggregate` produces the two report
views: stationwise (scores per station, then averaged) and areal (samples
averaged across stations first, preserving the joint draw, then scored
against the station-average observation).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = ["ScoreRow", "ScoreReport", "crps_sample", "mae", "median_point_forecast", "aggregate"]


def crps_sample(samples, obs) -> np.ndarray:
    """CRPS of sample-based forecasts; samples on the last axis, broadcast obs.

    NaN observations yield NaN scores; samples must be finite.
    """
    x = np.asarray(samples, dtype=float)
    y = np.asarray(obs, dtype=float)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise ValueError("need at least one sample on the last axis")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    m = x.shape[-1]
    term1 = np.mean(np.abs(x - y[..., None]), axis=-1)
    xs = np.sort(x, axis=-1)
    coeff = 2.0 * np.arange(m) - m + 1.0
    term2 = np.sum(coeff * xs, axis=-1) / (m * m)
    return term1 - term2


def mae(point_forecasts, obs) -> float:
    """Mean absolute error over entries where the observation is present."""
    f = np.asarray(point_forecasts, dtype=float)
    y = np.asarray(obs, dtype=float)
    f, y = np.broadcast_arrays(f, y)
    ok = np.isfinite(y)
    if not ok.any():
        raise ValueError("no observations present")
    return float(np.mean(np.abs(f[ok] - y[ok])))


def median_point_forecast(samples) -> np.ndarray:
    """Sample median along the last axis; even sizes take the lower middle."""
    x = np.sort(np.asarray(samples, dtype=float), axis=-1)
    return x[..., (x.shape[-1] - 1) // 2]


@dataclass(frozen=True)
class ScoreRow:
    scope: str  # "stationwise" | "areal"
    lead: int | None  # None = pooled over leads
    crps: float
    mae: float
    n: int


@dataclass(frozen=True)
class ScoreReport:
    rows: tuple[ScoreRow, ...]

    def get(self, scope: str, lead: int | None = None) -> ScoreRow:
        for row in self.rows:
            if row.scope == scope and row.lead == lead:
                return row
        raise KeyError(f"no row for scope={scope!r}, lead={lead!r}")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["scope", "lead", "crps", "mae", "n"])
            for row in self.rows:
                writer.writerow(
                    [row.scope, "" if row.lead is None else row.lead,
                     f"{row.crps:.10g}", f"{row.mae:.10g}", row.n]
                )


def _normalize(samples, obs):
    x = np.asarray(samples, dtype=float)
    y = np.asarray(obs, dtype=float)
    if x.ndim == 3:
        x, y = x[None], y[None]
    if x.ndim != 4 or y.shape != x.shape[:-1]:
        raise ValueError(
            "expected samples (cases, leads, stations, draws) with matching obs; "
            f"got {np.shape(samples)} and {np.shape(obs)}"
        )
    return x, y


def aggregate(samples, obs) -> ScoreReport:
    """Score predictive samples stationwise and areally, per lead and pooled.

    `samples`: (leads, stations, draws) or (cases, leads, stations, draws);
    `obs` the matching shape without the draw axis, NaN = missing.  Missing
    stations are dropped pairwise; the areal view averages draws and
    observations over the same station subset per (case, lead).
    """
    x, y = _normalize(samples, obs)
    n_cases, n_leads, n_stations, _ = x.shape

    rows: list[ScoreRow] = []
    station_cell: dict[int, list] = {lead: [] for lead in range(n_leads)}
    areal_cell: dict[int, list] = {lead: [] for lead in range(n_leads)}

    medians = median_point_forecast(x)
    for case in range(n_cases):
        for lead in range(n_leads):
            present = np.isfinite(y[case, lead])
            if not present.any():
                continue
            sc = crps_sample(x[case, lead, present], y[case, lead, present])
            ae = np.abs(medians[case, lead, present] - y[case, lead, present])
            station_cell[lead].append((sc, ae))
            area_samples = x[case, lead, present].mean(axis=0)
            area_obs = y[case, lead, present].mean()
            areal_cell[lead].append(
                (crps_sample(area_samples, area_obs),
                 abs(median_point_forecast(area_samples) - area_obs))
            )

    def emit(scope: str, cells: dict[int, list]):
        pooled_crps, pooled_ae = [], []
        for lead in range(n_leads):
            if not cells[lead]:
                continue
            if scope == "stationwise":
                crps_vals = np.concatenate([c for c, _ in cells[lead]])
                ae_vals = np.concatenate([a for _, a in cells[lead]])
            else:
                crps_vals = np.array([c for c, _ in cells[lead]], dtype=float)
                ae_vals = np.array([a for _, a in cells[lead]], dtype=float)
            rows.append(ScoreRow(scope, lead + 1, float(crps_vals.mean()),
                                 float(ae_vals.mean()), crps_vals.size))
            pooled_crps.append(crps_vals)
            pooled_ae.append(ae_vals)
        if pooled_crps:
            allc = np.concatenate(pooled_crps)
            alla = np.concatenate(pooled_ae)
            rows.append(ScoreRow(scope, None, float(allc.mean()), float(alla.mean()), allc.size))

    emit("stationwise", station_cell)
    emit("areal", areal_cell)
    if not rows:
        raise ValueError("no scoreable (lead, station) pairs: all observations missing")
    return ScoreReport(rows=tuple(rows))
