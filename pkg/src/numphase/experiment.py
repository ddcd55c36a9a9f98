"""Configuration-driven comparison runs of the oracle and the stochastic methods."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import fock, sde

log = logging.getLogger(__name__)

ALL_METHODS = ("oracle", "numphase", "tw", "gaugep")
CSV_COLUMNS = ("t", "x_mean", "x_stderr", "n_mean", "n_stderr", "mean_weight")
REQUIRED = ("chi", "gamma", "alpha0")
KNOWN_KEYS = {
    "chi", "gamma", "alpha0", "alpha0_re", "alpha0_im", "dim", "dt", "t_final", "n_traj",
    "seed", "phi_points", "methods", "out_dir", "sample_dt", "workers", "tw_scheme", "gauge_weight",
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    model: fock.ModelParams
    integration: sde.IntegrationParams
    methods: tuple = ALL_METHODS
    out_dir: str = "out"
    phi_points: int = 0
    workers: int = 1
    tw_scheme: str = "rotation"
    gauge_weight: str = "printed"

    @property
    def two_n_max(self) -> int:
        return 2 * (self.model.D - 1)


def _number(data, key, kind=float):
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse a flat ``key = value`` (TOML) document and apply defaults.

    ``alpha0`` is accepted as shorthand for ``alpha0_re``.  Keyword
    overrides (e.g. from the command line) replace file values.
    """
    try:
        data = dict(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<document>", f"not a valid key = value document ({exc})") from None
    data.update({k: v for k, v in overrides.items() if v is not None})
    for key in data:
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown key")
    if "alpha0" in data and "alpha0_re" in data:
        raise ConfigError("alpha0", "give either alpha0 or alpha0_re, not both")
    if "alpha0_re" in data:
        data["alpha0"] = data.pop("alpha0_re")
    for key in REQUIRED:
        if key not in data:
            raise ConfigError(key, "missing required key")

    chi = _number(data, "chi")
    gamma = _number(data, "gamma")
    if gamma < 0:
        raise ConfigError("gamma", f"must be >= 0, got {gamma}")
    alpha0 = complex(_number(data, "alpha0"), _number(data, "alpha0_im") if "alpha0_im" in data else 0.0)
    dim = _number(data, "dim", int) if "dim" in data else fock.safe_dim(alpha0)
    try:
        model = fock.ModelParams(chi, gamma, alpha0, dim)
    except ValueError as exc:
        raise ConfigError("dim", str(exc)) from None

    try:
        integ = sde.IntegrationParams(
            dt=_number(data, "dt") if "dt" in data else 1e-3,
            t_final=_number(data, "t_final") if "t_final" in data else 7.0,
            n_traj=_number(data, "n_traj", int) if "n_traj" in data else 100_000,
            seed=_number(data, "seed", int) if "seed" in data else 42,
            sample_dt=_number(data, "sample_dt") if "sample_dt" in data else 0.1,
        )
        integ.step_indices()
    except ValueError as exc:
        key = next((k for k in ("dt", "t_final", "n_traj", "sample_dt") if k in str(exc)), "dt")
        raise ConfigError(key, str(exc)) from None
    if integ.seed < 0 or integ.seed >= 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")

    methods = data.get("methods", ",".join(ALL_METHODS))
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    methods = tuple(dict.fromkeys(methods))
    if not methods:
        raise ConfigError("methods", "select at least one method")
    for m in methods:
        if m not in ALL_METHODS:
            raise ConfigError("methods", f"unknown method {m!r}")

    two_n_max = 2 * (dim - 1)
    phi_points = _number(data, "phi_points", int) if "phi_points" in data else 4 * two_n_max + 4
    if phi_points < 2 * two_n_max + 2:
        raise ConfigError("phi_points", f"need at least {2 * two_n_max + 2} for dim={dim}")
    if "numphase" in methods:
        try:
            integ.check_rates(model, two_n_max / 2)
        except ValueError as exc:
            raise ConfigError("dt", str(exc)) from None

    workers = _number(data, "workers", int) if "workers" in data else 1
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")
    tw_scheme = data.get("tw_scheme", "rotation")
    if tw_scheme not in sde.TW_SCHEMES:
        raise ConfigError("tw_scheme", f"expected one of {sde.TW_SCHEMES}")
    gauge_weight = data.get("gauge_weight", "printed")
    if gauge_weight not in sde.GAUGE_WEIGHTS:
        raise ConfigError("gauge_weight", f"expected one of {sde.GAUGE_WEIGHTS}")
    return ExperimentConfig(
        model, integ, methods, str(data.get("out_dir", "out")), phi_points, workers, tw_scheme, gauge_weight
    )


def oracle_series(config: ExperimentConfig) -> sde.EnsembleTimeSeries:
    model = config.model
    dim = model.D
    times = config.integration.times
    dt = min(config.integration.dt, 0.9 * fock.max_stable_dt(model, dim))
    rhos = fock.evolve_master(fock.coherent_density(model.alpha0, dim), model, times, dt)
    x = np.array([fock.expect_position(r) for r in rhos])
    n = np.array([fock.expect_number(r) for r in rhos])
    zeros = np.zeros_like(times)
    return sde.EnsembleTimeSeries("oracle", times, x, zeros, n, zeros.copy(), np.ones_like(times),
                                  info={"dt": dt, "dim": dim})


def _initial_ensemble(method, config):
    model, integ = config.model, config.integration
    if method == "numphase":
        return sde.init_numphase_ensemble(model.alpha0, config.two_n_max, config.phi_points, n_traj=integ.n_traj)
    if method == "tw":
        return sde.init_tw_ensemble(model.alpha0, integ.n_traj, integ.seed)
    return sde.init_gaugep_ensemble(model.alpha0, integ.n_traj)


def run_experiment(config: ExperimentConfig) -> dict:
    """Run every selected method; a failing method leaves a status-only entry."""
    results = {}
    for method in config.methods:
        log.info("running %s", method)
        try:
            if method == "oracle":
                results[method] = oracle_series(config)
            else:
                results[method] = sde.run_ensemble(
                    method,
                    _initial_ensemble(method, config),
                    config.model,
                    config.integration,
                    workers=config.workers,
                    tw_scheme=config.tw_scheme,
                    gauge_weight=config.gauge_weight,
                )
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            log.error("%s failed: %s", method, exc)
            results[method] = f"failed: {exc}"
    return results


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_series_csv(series: sde.EnsembleTimeSeries, path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(CSV_COLUMNS)
            for row in zip(series.times, series.x_mean, series.x_stderr, series.n_mean, series.n_stderr,
                           series.mean_weight):
                out.writerow([_fmt(float(v)) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_csv(results: dict, out_dir) -> list:
    """One ``<method>.csv`` per successful method in ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc.strerror or exc}") from exc
    return [
        write_series_csv(series, out_dir / f"{method}.csv")
        for method, series in results.items()
        if isinstance(series, sde.EnsembleTimeSeries)
    ]


def read_csv(path, method: str | None = None) -> sde.EnsembleTimeSeries:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: header must be {','.join(CSV_COLUMNS)}")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(CSV_COLUMNS))
    return sde.EnsembleTimeSeries(method or path.stem, *data.T)


def divergence_time(series: sde.EnsembleTimeSeries, oracle: sde.EnsembleTimeSeries, abs_floor: float | None = None):
    """First sample time where ``|x - x_oracle| > 3 stderr + abs_floor``; ``None`` if never.

    ``abs_floor`` defaults to ``0.02 max|x_oracle|``.  Missing (NaN) samples
    count as outside the band.
    """
    if len(series.times) != len(oracle.times) or not np.allclose(series.times, oracle.times, rtol=0, atol=1e-12):
        raise ValueError("series and oracle are sampled on different time grids")
    if abs_floor is None:
        abs_floor = 0.02 * float(np.max(np.abs(oracle.x_mean))) if len(oracle.x_mean) else 0.0
    with np.errstate(invalid="ignore"):
        out = ~(np.abs(series.x_mean - oracle.x_mean) <= 3.0 * series.x_stderr + abs_floor)
    hits = np.flatnonzero(out)
    return float(series.times[hits[0]]) if hits.size else None


def divergence_report(results: dict, abs_floor: float | None = None) -> dict:
    oracle = results.get("oracle")
    if not isinstance(oracle, sde.EnsembleTimeSeries):
        return {}
    return {
        m: divergence_time(s, oracle, abs_floor)
        for m, s in results.items()
        if m != "oracle" and isinstance(s, sde.EnsembleTimeSeries)
    }


def write_report(results: dict, path, abs_floor: float | None = None) -> Path:
    path = Path(path)
    report = divergence_report(results, abs_floor)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["method", "divergence_time", "status"])
        for method, value in results.items():
            if method == "oracle":
                continue
            status = value.status if isinstance(value, sde.EnsembleTimeSeries) else value
            t = report.get(method)
            out.writerow([method, "none" if t is None else _fmt(t), status])
    return path
