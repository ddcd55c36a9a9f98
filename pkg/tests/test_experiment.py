import math

import numpy as np
import pytest

from numphase import experiment as ex
from numphase.sde import EnsembleTimeSeries

SMALL = """
chi = 1.0
gamma = 0.01
alpha0 = 1.0
t_final = 0.2
n_traj = 3000
"""


def series(x, se=None, t=None):
    x = np.asarray(x, dtype=float)
    t = np.arange(x.size) * 0.1 if t is None else np.asarray(t)
    se = np.zeros_like(x) if se is None else np.asarray(se, dtype=float)
    return EnsembleTimeSeries("m", t, x, se, np.zeros_like(x), np.zeros_like(x), np.ones_like(x))


def test_minimal_config_defaults():
    cfg = ex.parse_config("chi = 1\ngamma = 0.001\nalpha0 = 3.1623\n")
    assert cfg.model.chi == 1.0 and cfg.model.gamma == 0.001
    assert cfg.integration.dt == 1e-3 and cfg.integration.t_final == 7.0
    assert cfg.integration.n_traj == 100_000 and cfg.integration.seed == 42
    assert cfg.model.D == 39
    assert cfg.phi_points == 4 * cfg.two_n_max + 4
    assert cfg.methods == ex.ALL_METHODS


@pytest.mark.parametrize("missing", ["chi", "gamma", "alpha0"])
def test_missing_required_key(missing):
    lines = {"chi": "chi = 1", "gamma": "gamma = 0.001", "alpha0": "alpha0 = 3.1623"}
    del lines[missing]
    with pytest.raises(ex.ConfigError) as info:
        ex.parse_config("\n".join(lines.values()))
    assert info.value.key == missing
    assert missing in str(info.value)


@pytest.mark.parametrize(
    "extra,key",
    [
        ("", "gamma"),
        ("unknown = 3", "unknown"),
        ("methods = 'numphase,bogus'", "methods"),
        ("methods = ''", "methods"),
        ("phi_points = 10", "phi_points"),
        ("dim = 5", "dim"),
        ("seed = -1", "seed"),
        ("dt = 0.05", "dt"),
        ("n_traj = 0", "n_traj"),
    ],
)
def test_invalid_config_names_key(extra, key):
    gamma = "-1" if key == "gamma" else "0.001"
    with pytest.raises(ex.ConfigError) as info:
        ex.parse_config(f"chi = 1\ngamma = {gamma}\nalpha0 = 3.1623\n{extra}\n")
    assert info.value.key == key


def test_config_alpha_components_and_methods_list():
    cfg = ex.parse_config("chi = 1\ngamma = 0\nalpha0_re = 1.0\nalpha0_im = -0.5\nmethods = ['tw', 'oracle']\n")
    assert cfg.model.alpha0 == 1.0 - 0.5j
    assert cfg.methods == ("tw", "oracle")


def test_config_overrides():
    cfg = ex.parse_config(SMALL, seed=7, methods="oracle", out_dir="elsewhere")
    assert cfg.integration.seed == 7 and cfg.methods == ("oracle",) and cfg.out_dir == "elsewhere"


def test_malformed_document():
    with pytest.raises(ex.ConfigError):
        ex.parse_config("chi = = 1")


def test_oracle_initial_position():
    cfg = ex.parse_config("chi = 1\ngamma = 0.001\nalpha0 = 3.1622776601683795\nt_final = 0\nmethods = 'oracle'\n")
    res = ex.run_experiment(cfg)
    assert abs(res["oracle"].x_mean[0] - math.sqrt(20)) < 1e-9


def test_numphase_undamped_revival_via_experiment():
    cfg = ex.parse_config(
        "chi = 1\ngamma = 0\nalpha0 = 3.1622776601683795\nmethods = 'numphase'\n"
        "dt = 0.000314159265358979\nsample_dt = 3.14159265358979\nt_final = 6.28318530717958\n"
    )
    res = ex.run_experiment(cfg)["numphase"]
    assert abs(res.x_mean[-1] + math.sqrt(20)) < 1e-3


def test_partial_results_preserved(monkeypatch):
    cfg = ex.parse_config(SMALL + "methods = 'oracle,tw'\n")

    def boom(*args, **kwargs):
        raise ValueError("engine exploded")

    monkeypatch.setattr(ex.sde, "run_ensemble", boom)
    res = ex.run_experiment(cfg)
    assert isinstance(res["oracle"], EnsembleTimeSeries)
    assert res["tw"].startswith("failed") and "exploded" in res["tw"]


def test_csv_round_trip_and_format(tmp_path):
    cfg = ex.parse_config(SMALL + "methods = 'oracle,numphase'\n")
    res = ex.run_experiment(cfg)
    paths = ex.write_csv(res, tmp_path)
    assert sorted(p.name for p in paths) == ["numphase.csv", "oracle.csv"]
    text = (tmp_path / "oracle.csv").read_text().splitlines()
    assert text[0] == "t,x_mean,x_stderr,n_mean,n_stderr,mean_weight"
    back = ex.read_csv(tmp_path / "oracle.csv")
    assert np.all(back.x_stderr == 0) and np.all(back.n_stderr == 0)
    for name in ("oracle", "numphase"):
        orig, back = res[name], ex.read_csv(tmp_path / f"{name}.csv")
        for col in ("times", "x_mean", "x_stderr", "n_mean", "n_stderr", "mean_weight"):
            np.testing.assert_array_equal(getattr(back, col), getattr(orig, col))


def test_csv_header_only_for_empty_series(tmp_path):
    empty = series([])
    path = ex.write_series_csv(empty, tmp_path / "e.csv")
    assert path.read_text() == "t,x_mean,x_stderr,n_mean,n_stderr,mean_weight\n"
    assert ex.read_csv(path).times.size == 0


def test_csv_write_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        ex.write_csv({"oracle": series([1.0])}, blocker / "sub")


def test_read_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        ex.read_csv(p)


def test_divergence_identical_is_none():
    s = series([1.0, 2.0, 3.0])
    assert ex.divergence_time(s, s) is None


def test_divergence_constant_offset():
    oracle = series([0.0, 0.5, 1.0], t=[0.3, 0.4, 0.5])
    method = series([1.0, 1.5, 2.0], se=[0.01] * 3, t=[0.3, 0.4, 0.5])
    assert ex.divergence_time(method, oracle, abs_floor=0.09) == 0.3


def test_divergence_nan_counts_as_exit():
    oracle = series([1.0, 1.0, 1.0])
    method = series([1.0, np.nan, 1.0], se=[0.1] * 3)
    assert ex.divergence_time(method, oracle) == pytest.approx(0.1)


def test_divergence_default_floor():
    oracle = series([10.0, -5.0])
    assert ex.divergence_time(series([10.19, -5.19]), oracle) is None
    assert ex.divergence_time(series([10.0, -5.21]), oracle) == pytest.approx(0.1)


def test_divergence_grid_mismatch():
    with pytest.raises(ValueError, match="grid"):
        ex.divergence_time(series([1.0, 2.0]), series([1.0, 2.0], t=[0.0, 0.2]))


def test_report_file(tmp_path):
    res = {"oracle": series([1.0, 1.0]), "tw": series([1.0, 3.0]), "gaugep": "failed: boom"}
    text = ex.write_report(res, tmp_path / "r.csv").read_text().splitlines()
    assert text[0] == "method,divergence_time,status"
    assert text[1].startswith("tw,0.1")
    assert text[2] == "gaugep,none,failed: boom"
