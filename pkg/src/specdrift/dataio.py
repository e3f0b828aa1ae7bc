"""On-disk formats: field stacks, configs, chain output, checkpoints, stations.

Everything here is deliberately plain: little-endian binary with a 4-byte
magic for field stacks ("SPTE"), row-major CSV matrices for single fields,
flat ``key=value`` text for parameter configs and run reports, one CSV row
per retained draw for chains, and an "SPMC1"-tagged snapshot for chain
checkpoints.  Station records live in a long-format CSV with columns
time_index, station_id, x, y, rain_mm, nwp_mm; an empty rain field marks a
missing observation.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .model import PARAM_NAMES, SpdeParams

__all__ = [
    "FIELD_MAGIC",
    "CHECKPOINT_MAGIC",
    "write_fields",
    "read_fields",
    "write_field_csv",
    "read_field_csv",
    "write_config",
    "read_config",
    "get_float",
    "get_int",
    "get_str",
    "spde_params_from_config",
    "config_from_spde_params",
    "write_chain_csv",
    "read_chain_csv",
    "write_checkpoint",
    "read_checkpoint",
    "StationData",
    "write_station_csv",
    "read_station_csv",
]

FIELD_MAGIC = b"SPTE"
CHECKPOINT_MAGIC = b"SPMC1"

_REQUIRED = object()


# --------------------------------------------------------------------------
# field stacks
# --------------------------------------------------------------------------

def write_fields(path, fields) -> None:
    """Write a (T, n, n) stack (or a single (n, n) field) in the binary layout."""
    fields = np.asarray(fields, dtype=float)
    if fields.ndim == 2:
        fields = fields[None]
    if fields.ndim != 3 or fields.shape[1] != fields.shape[2]:
        raise ValueError(f"expected (T, n, n), got {fields.shape}")
    n_steps, n = fields.shape[0], fields.shape[1]
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(np.array([n, n_steps], dtype="<u4").tobytes())
        fh.write(np.ascontiguousarray(fields, dtype="<f8").tobytes())


def read_fields(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FIELD_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {FIELD_MAGIC!r}")
        raw_header = fh.read(8)
        if len(raw_header) != 8:
            raise DataError(f"{path}: truncated header")
        header = np.frombuffer(raw_header, dtype="<u4")
        n, n_steps = int(header[0]), int(header[1])
        raw = fh.read()
    if len(raw) % 8:
        raise DataError(f"{path}: payload is not a whole number of float64 values")
    payload = np.frombuffer(raw, dtype="<f8")
    if payload.size != n_steps * n * n:
        raise DataError(
            f"{path}: payload has {payload.size} values, expected {n_steps * n * n}"
        )
    return payload.reshape(n_steps, n, n).copy()


def write_field_csv(path, field) -> None:
    field = np.asarray(field, dtype=float)
    if field.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {field.shape}")
    np.savetxt(path, field, delimiter=",", fmt="%.17g")


def read_field_csv(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: not a numeric CSV matrix ({exc})") from exc


# --------------------------------------------------------------------------
# key=value configs and reports
# --------------------------------------------------------------------------

def write_config(path, mapping: dict) -> None:
    with open(path, "w") as fh:
        for key, value in mapping.items():
            if isinstance(value, float):
                fh.write(f"{key}={value!r}\n")
            else:
                fh.write(f"{key}={value}\n")


def read_config(path) -> dict:
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _get(cfg: dict, key: str, default):
    if key in cfg:
        return cfg[key]
    if default is _REQUIRED:
        raise ConfigError(f"missing config key '{key}'")
    return default


def get_float(cfg: dict, key: str, default=_REQUIRED) -> float:
    raw = _get(cfg, key, default)
    if not isinstance(raw, str):
        return raw
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key '{key}' is not a number: {raw!r}") from None


def get_int(cfg: dict, key: str, default=_REQUIRED) -> int:
    raw = _get(cfg, key, default)
    if not isinstance(raw, str):
        return raw
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"config key '{key}' is not an integer: {raw!r}") from None


def get_str(cfg: dict, key: str, default=_REQUIRED) -> str:
    return _get(cfg, key, default)


def spde_params_from_config(cfg: dict) -> SpdeParams:
    values = {name: get_float(cfg, name) for name in PARAM_NAMES}
    try:
        return SpdeParams(**values).validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_spde_params(params: SpdeParams) -> dict:
    return {name: float(value) for name, value in zip(PARAM_NAMES, params.as_array())}


# --------------------------------------------------------------------------
# chain output
# --------------------------------------------------------------------------

def write_chain_csv(path, sample) -> None:
    """One row per retained draw: named parameters, b coefficients, lam, loglik."""
    header = list(sample.param_names)
    header += [f"b{j + 1}" for j in range(sample.b.shape[1])]
    header += ["lam", "loglik"]
    block = np.column_stack(
        [sample.theta, sample.b, sample.lam[:, None], sample.loglik[:, None]]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in block:
            writer.writerow([f"{v:.17g}" for v in row])


def read_chain_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty chain file") from None
        rows = [[float(v) for v in row] for row in reader if row]
    return header, np.asarray(rows, dtype=float)


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

def write_checkpoint(path, arrays: dict, meta: dict) -> None:
    buf = io.BytesIO()
    payload = dict(arrays)
    payload["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(buf, **payload)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(buf.getvalue())


def read_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        blob = fh.read()
    with np.load(io.BytesIO(blob), allow_pickle=False) as npz:
        arrays = {key: npz[key] for key in npz.files}
    meta = json.loads(arrays.pop("__meta__").tobytes().decode("utf-8"))
    return arrays, meta


def write_chain_checkpoint(path, state, proposal, lam_step, n_kept, iteration, kept) -> None:
    """Snapshot everything `resume_chain` needs to continue bit-for-bit."""
    kept = dict(kept)
    rng_state = kept.pop("rng_state")
    arrays = {
        "theta": state.theta_vec,
        "b": state.b,
        "w": state.w,
        "alpha": state.alpha,
        "xi": state.xi,
        "reg_mean": state.reg_mean,
        "prop_mean": proposal.mean,
        "prop_m2": proposal.m2,
        "prop_chol": proposal._chol,
        "prop_scales": proposal.initial_scales,
    }
    for key, value in kept.items():
        arrays[f"kept_{key}"] = value
    meta = {
        "iteration": int(iteration),
        "n_kept": int(n_kept),
        "lam": float(state.lam),
        "loglik": float(state.loglik),
        "log_prior": float(state.log_prior),
        "lam_step": float(lam_step),
        "n_joint": state.n_joint,
        "n_joint_accepted": state.n_joint_accepted,
        "n_lam": state.n_lam,
        "n_lam_accepted": state.n_lam_accepted,
        "n_joint_post": state.n_joint_post,
        "n_joint_accepted_post": state.n_joint_accepted_post,
        "n_lam_post": state.n_lam_post,
        "n_lam_accepted_post": state.n_lam_accepted_post,
        "prop_count": proposal.count,
        "prop_log_scale": proposal.log_scale,
        "prop_n_scale_updates": proposal.n_scale_updates,
        "prop_frozen": proposal.frozen,
        "prop_adapt_scale": proposal.adapt_scale,
        "prop_target": proposal.target_accept,
        "rng_state": rng_state,
    }
    write_checkpoint(path, arrays, meta)


def unpack_chain_checkpoint(payload, data, config):
    """Rebuild (state, proposal, lam_step, n_kept, start, kept) from a snapshot."""
    from .mcmc import AdaptiveProposal, ChainState

    arrays, meta = payload
    state = ChainState(
        theta_vec=arrays["theta"].copy(),
        b=arrays["b"].copy(),
        lam=meta["lam"],
        w=arrays["w"].copy(),
        alpha=arrays["alpha"].copy(),
        xi=arrays["xi"].copy(),
        reg_mean=arrays["reg_mean"].copy(),
        loglik=meta["loglik"],
        log_prior=meta["log_prior"],
        loglik_stale=False,
        iteration=meta["iteration"],
        n_joint=meta["n_joint"],
        n_joint_accepted=meta["n_joint_accepted"],
        n_lam=meta["n_lam"],
        n_lam_accepted=meta["n_lam_accepted"],
        n_joint_post=meta["n_joint_post"],
        n_joint_accepted_post=meta["n_joint_accepted_post"],
        n_lam_post=meta["n_lam_post"],
        n_lam_accepted_post=meta["n_lam_accepted_post"],
    )
    proposal = AdaptiveProposal(
        initial_scales=arrays["prop_scales"],
        adapt_scale=meta["prop_adapt_scale"],
        target_accept=meta["prop_target"],
    )
    proposal.count = meta["prop_count"]
    proposal.mean = arrays["prop_mean"].copy()
    proposal.m2 = arrays["prop_m2"].copy()
    proposal.log_scale = meta["prop_log_scale"]
    proposal.n_scale_updates = meta["prop_n_scale_updates"]
    proposal.frozen = meta["prop_frozen"]
    proposal._chol = arrays["prop_chol"].copy()
    kept = {
        key[len("kept_"):]: arrays[key] for key in arrays if key.startswith("kept_")
    }
    kept["rng_state"] = meta["rng_state"]
    return state, proposal, meta["lam_step"], meta["n_kept"], meta["iteration"], kept


# --------------------------------------------------------------------------
# station data
# --------------------------------------------------------------------------

_STATION_COLUMNS = ("time_index", "station_id", "x", "y", "rain_mm", "nwp_mm")


@dataclass(frozen=True)
class StationData:
    """Long-format station records pivoted to (T, m) matrices.

    Locations are in grid units ([0, 1)^2); rain is NaN where the record was
    missing.
    """

    station_ids: tuple
    locations: np.ndarray  # (m, 2)
    rain: np.ndarray  # (T, m), NaN = missing
    nwp: np.ndarray  # (T, m)

    @property
    def n_steps(self) -> int:
        return self.rain.shape[0]

    @property
    def n_stations(self) -> int:
        return self.rain.shape[1]


def write_station_csv(path, station: StationData) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_STATION_COLUMNS)
        for t in range(station.n_steps):
            for j, sid in enumerate(station.station_ids):
                rain = station.rain[t, j]
                writer.writerow(
                    [
                        t,
                        sid,
                        f"{station.locations[j, 0]:.17g}",
                        f"{station.locations[j, 1]:.17g}",
                        "" if np.isnan(rain) else f"{rain:.17g}",
                        f"{station.nwp[t, j]:.17g}",
                    ]
                )


def read_station_csv(path) -> StationData:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(_STATION_COLUMNS) <= set(reader.fieldnames):
            raise DataError(
                f"{path}: expected columns {', '.join(_STATION_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no station records")

    ids: list[str] = []
    loc: dict[str, tuple] = {}
    records = []
    for row in rows:
        try:
            t = int(row["time_index"])
            sid = row["station_id"]
            xy = (float(row["x"]), float(row["y"]))
            rain = np.nan if row["rain_mm"] == "" else float(row["rain_mm"])
            nwp = float(row["nwp_mm"])
        except (ValueError, TypeError) as exc:
            raise DataError(f"{path}: bad station record {row!r} ({exc})") from exc
        if t < 0:
            raise DataError(f"{path}: negative time_index {t}")
        if sid not in loc:
            loc[sid] = xy
            ids.append(sid)
        elif loc[sid] != xy:
            raise DataError(f"{path}: station {sid!r} has inconsistent coordinates")
        records.append((t, sid, rain, nwp))

    n_steps = max(r[0] for r in records) + 1
    col = {sid: j for j, sid in enumerate(ids)}
    rain = np.full((n_steps, len(ids)), np.nan)
    nwp = np.zeros((n_steps, len(ids)))
    for t, sid, r, v in records:
        rain[t, col[sid]] = r
        nwp[t, col[sid]] = v
    return StationData(
        station_ids=tuple(ids),
        locations=np.array([loc[sid] for sid in ids], dtype=float),
        rain=rain,
        nwp=nwp,
    )
