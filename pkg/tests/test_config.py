"""Defaults, environment overrides, scenario parsing and file formats."""
import math

import numpy as np
import pytest

from quasipot.config import DEFAULTS, get_cfg, load_defaults, load_scenario, scenario_from_dict
from quasipot.errors import ConfigError, InputError
from quasipot.formats import load_kernel_csv, load_space_csv, radial_plot_csv, save_kernel_csv
from quasipot.kernels import Provenance, riesz_kernel
from quasipot.potentials import KappaCache

TWO_POINT_INI = """\
[space]
sigma = 1, 1   # unit masses
mu = 1, 0

[kernel]
type = matrix
matrix = 2 1; 1 2

[problem]
q = 0.5

[kappa]
sets = 0; 0 1

[run]
tol = 1e-11
"""


# ── Defaults ─────────────────────────────────────────────────────

def test_defaults_table():
    assert DEFAULTS["tol"] == 1e-12
    assert DEFAULTS["subset_limit"] == 16
    assert DEFAULTS["line_search_steps"] == 30


def test_env_overrides_with_minimums():
    out = load_defaults({"QUASIPOT_TOL": "1e-6", "QUASIPOT_WORKERS": "0", "QUASIPOT_MAX_ITER": "abc"})
    assert out["tol"] == 1e-6
    assert out["workers"] == 1
    assert out["max_iter"] == DEFAULTS["max_iter"]


def test_get_cfg_reads_prefixed_env(monkeypatch):
    monkeypatch.setenv("QUASIPOT_LOG_LEVEL", "DEBUG")
    assert get_cfg("log_level", "WARNING") == "DEBUG"
    monkeypatch.setenv("QUASIPOT_LOG_LEVEL", "  ")
    assert get_cfg("log_level", "WARNING") == "WARNING"


# ── Scenarios ────────────────────────────────────────────────────

def test_load_ini_scenario(tmp_path):
    path = tmp_path / "two.ini"
    path.write_text(TWO_POINT_INI)
    sc = load_scenario(path)
    assert sc.get_floats("space", "sigma") == [1.0, 1.0]
    assert sc.get_sets("kappa", "sets") == [(0,), (0, 1)]
    assert sc.run_value("tol") == 1e-11
    assert sc.run_value("max_iter") == DEFAULTS["max_iter"]
    problem = sc.build_problem()
    assert problem.mode == "mu"
    assert problem.kernel.matrix.tolist() == [[2.0, 1.0], [1.0, 2.0]]
    assert problem.mu.tolist() == [1.0, 0.0]


def test_resolved_merges_defaults(tmp_path):
    path = tmp_path / "two.ini"
    path.write_text(TWO_POINT_INI)
    resolved = load_scenario(path).resolved()
    assert resolved["run"]["tol"] == "1e-11"
    assert resolved["run"]["subset_limit"] == "16"
    assert resolved["run"]["inject_u_scale"] == "1.0"
    assert list(resolved["run"]) == sorted(resolved["run"])


def test_unknown_section_rejected():
    with pytest.raises(ConfigError):
        scenario_from_dict({"spaces": {"sigma": "1"}})


def test_run_value_below_minimum():
    sc = scenario_from_dict({"run": {"workers": "0"}})
    with pytest.raises(ConfigError):
        sc.run_value("workers")


def test_bad_values_raise_config_error():
    sc = scenario_from_dict({"problem": {"q": "half"}, "space": {"sigma": "1, x"}})
    with pytest.raises(ConfigError):
        sc.get_float("problem", "q")
    with pytest.raises(ConfigError):
        sc.build_space()


def test_mu_and_f_together_rejected():
    sc = scenario_from_dict({
        "space": {"sigma": "1", "mu": "1", "f": "1"},
        "kernel": {"matrix": "2"},
        "problem": {"q": "0.5"},
    })
    with pytest.raises(ConfigError):
        sc.build_problem()


def test_missing_q():
    sc = scenario_from_dict({"space": {"sigma": "1"}, "kernel": {"matrix": "2"}})
    with pytest.raises(ConfigError):
        sc.build_problem()


def test_riesz_scenario():
    sc = scenario_from_dict({
        "space": {"coords": "0 0; 2 0", "sigma": "1, 1"},
        "kernel": {"type": "riesz", "alpha": "1"},
        "problem": {"q": "0.5"},
    })
    kernel = sc.build_kernel()
    assert kernel.provenance == Provenance.RIESZ
    assert math.isclose(kernel.matrix[0, 1], 0.5)


def test_pole_and_modifier_exclusive():
    sc = scenario_from_dict({
        "space": {"sigma": "1, 1"},
        "kernel": {"matrix": "2 1; 1 2", "pole": "0", "modifier": "1, 1"},
    })
    with pytest.raises(ConfigError):
        sc.build_modifier()


def test_json_scenario_needs_block(tmp_path):
    path = tmp_path / "report.json"
    path.write_text('{"result": {}}')
    with pytest.raises(ConfigError):
        load_scenario(path)


def test_missing_scenario_file(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "nope.ini")


# ── File formats ─────────────────────────────────────────────────

def test_space_csv(tmp_path):
    path = tmp_path / "space.csv"
    path.write_text("x1,x2,sigma,mu,label\n0,0,1,0.5,a\n1,0,2,0,b\n")
    space = load_space_csv(path)
    assert space.coords.tolist() == [[0.0, 0.0], [1.0, 0.0]]
    assert space.sigma.weights.tolist() == [1.0, 2.0]
    assert space.mu.weights.tolist() == [0.5, 0.0]
    assert space.labels == ("a", "b")


def test_space_csv_errors(tmp_path):
    no_sigma = tmp_path / "a.csv"
    no_sigma.write_text("x1,mu\n0,1\n")
    with pytest.raises(ConfigError):
        load_space_csv(no_sigma)
    junk = tmp_path / "b.csv"
    junk.write_text("sigma\nheavy\n")
    with pytest.raises(ConfigError):
        load_space_csv(junk)


def test_kernel_csv_with_meta(tmp_path):
    kernel = riesz_kernel([[0.0], [2.0], [3.0]], alpha=1.0, n=2)
    path = tmp_path / "g.csv"
    save_kernel_csv(kernel, path)
    assert (tmp_path / "g.meta").exists()
    loaded = load_kernel_csv(path)
    assert loaded.provenance == Provenance.RIESZ
    assert np.array_equal(loaded.matrix, kernel.matrix)
    assert loaded.meta["diagonal_rule"] == "half_nearest"


def test_kernel_csv_rejects_bad_provenance(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("1,2\n2,1\n")
    (tmp_path / "g.meta").write_text("provenance=mystery\n")
    with pytest.raises(ConfigError):
        load_kernel_csv(path)


def test_radial_plot_rows(two_point):
    cache = KappaCache(two_point, [1.0, 1.0], 0.5)
    lines = radial_plot_csv(two_point, cache, 0).strip().splitlines()
    assert lines[0] == "r,sigma_ball,kappa_ball"
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    assert rows[0] == [0.0, 0.0, 0.0]
    assert rows[1][:2] == [0.5, 1.0] and math.isclose(rows[1][2], 2.0, rel_tol=1e-9)
    assert rows[2][:2] == [1.0, 2.0] and math.isclose(rows[2][2], 6.0, rel_tol=1e-9)
    with pytest.raises(InputError):
        radial_plot_csv(two_point, cache, 5)
