import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from conformal_cable import __version__
from conformal_cable.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VERIFY, ConfigError, main, parse_config
from conformal_cable.pde import read_field_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

CYLINDER = {
    "geometry": {"d0": 1.0, "a": 0.0, "nu": 0.0, "x_min": 0.0, "x_max": 3.0},
    "params": {"c_M": 1.0, "r_M": 2.0, "r_L": 0.7},
    "grid": {"n": 41, "dt": 0.01, "t_end": 0.1},
    "scenario": "cosine_mode",
    "options": {"k": 1.0},
}
CONE = {
    "geometry": {"d0": 1.0, "a": 0.8, "nu": 1.0, "x_min": 0.2, "x_max": 2.0},
    "params": {"c_M": 1.0, "r_M": 2.0, "r_L": 0.7},
    "grid": {"n": 41, "dt": 0.01, "t_end": 0.1},
    "scenario": "bessel_mode",
    "options": {"E": 1.3},
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _with(base, **sections):
    cfg = json.loads(json.dumps(base))
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    return cfg


def _run(tmp_path, command, cfg, *extra):
    out = tmp_path / f"{command}.csv"
    code = main([command, "--config", _write(tmp_path, cfg), "--out", str(out), *extra])
    return code, out


def test_simulate_writes_field(tmp_path):
    code, out = _run(tmp_path, "simulate", CYLINDER)
    assert code == EXIT_OK
    text = out.read_text()
    assert text.startswith(f"# conformal-cable {__version__}\n# command: simulate")
    assert "# config-sha256: " in text and "# seed: 0" in text
    field = read_field_csv(str(out))
    assert field.values.shape == (11, 41)
    np.testing.assert_allclose(field.values[0], np.cos(field.grid.x), atol=1e-15)


def test_zero_initial_data_stays_zero(tmp_path):
    code, out = _run(tmp_path, "simulate", _with(CONE, scenario="zero", options={}))
    assert code == EXIT_OK
    assert np.all(read_field_csv(str(out)).values == 0.0)


def test_runs_are_byte_identical(tmp_path):
    for command, cfg in (("simulate", CYLINDER), ("compare", CYLINDER)):
        _, first = _run(tmp_path, command, cfg)
        data = first.read_bytes()
        _, second = _run(tmp_path, command, cfg)
        assert second.read_bytes() == data


def test_symmetry_output_is_seeded(tmp_path):
    cfg = _with(CONE, options={"E": 1.3, "maps": 2, "seed": 4, "levels": [51, 101, 201]})
    _, out = _run(tmp_path, "symmetry", cfg)
    a = out.read_text()
    _, out = _run(tmp_path, "symmetry", cfg)
    assert out.read_text() == a
    cfg["options"]["seed"] = 5
    _, out = _run(tmp_path, "symmetry", cfg)
    assert out.read_text() != a


def test_compare_reports_second_order(tmp_path):
    code, out = _run(tmp_path, "compare", _with(CYLINDER, options={"k": 1.0, "boundary": "analytic", "tolerance": 1e-2}))
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    orders = [float(l.split()[-1]) for l in lines if l.startswith("# order")]
    assert orders and min(orders) > 1.8
    assert "n,h,dt,t,l2_error,rel_l2_error,linf_error" in lines


def test_compare_tolerance_failure(tmp_path):
    code, _ = _run(tmp_path, "compare", _with(CYLINDER, options={"k": 1.0, "tolerance": 1e-12}))
    assert code == EXIT_VERIFY


@pytest.mark.parametrize("cfg", [CYLINDER, CONE])
def test_symmetry_and_negative_control(tmp_path, cfg):
    opts = dict(cfg["options"], maps=2, seed=1, levels=[51, 101, 201])
    cfg = _with(cfg, options=opts)
    code, out = _run(tmp_path, "symmetry", cfg)
    assert code == EXIT_OK
    assert out.read_text().count(",PASS") == 2
    code, out = _run(tmp_path, "symmetry", cfg, "--self-test-negative")
    assert code == EXIT_VERIFY
    assert ",FAIL" in out.read_text()


def test_symmetry_explicit_map(tmp_path):
    cfg = _with(CYLINDER, options={"k": 1.0, "map": {"v": 0.5, "c": 0.1}, "levels": [51, 101, 201]})
    assert _run(tmp_path, "symmetry", cfg)[0] == EXIT_OK
    cone = _with(CONE, options={"E": 1.3, "map": {"v": 0.5}})
    assert _run(tmp_path, "symmetry", cone)[0] == EXIT_CONFIG
    singular = _with(CYLINDER, options={"k": 1.0, "map": {"gamma": 4.0, "l": 1.0}})
    # primed time 0.25 inside the default window comes from t = infinity
    assert _run(tmp_path, "symmetry", singular)[0] == EXIT_CONFIG


@pytest.mark.parametrize("cfg", [CYLINDER, CONE])
def test_algebra_and_negative_control(tmp_path, cfg):
    cfg = _with(cfg, options={"levels": [101, 201, 401]})
    code, out = _run(tmp_path, "algebra", cfg)
    assert code == EXIT_OK
    assert ",FAIL" not in out.read_text()
    code, out = _run(tmp_path, "algebra", cfg, "--self-test-negative")
    assert code == EXIT_VERIFY
    assert "corrupted" in out.read_text()


def test_negative_flag_rejected_elsewhere(tmp_path):
    assert _run(tmp_path, "simulate", CYLINDER, "--self-test-negative")[0] == EXIT_CONFIG
    assert _run(tmp_path, "compare", CYLINDER, "--self-test-negative")[0] == EXIT_CONFIG


@pytest.mark.parametrize(
    "change",
    [
        {"geometry": {"a": -1.0}},  # diameter vanishes inside the domain
        {"geometry": {"d0": -1.0}},
        {"geometry": {"x_max": -1.0}},
        {"grid": {"n": 2}},
        {"grid": {"dt": -0.1}},
        {"grid": {"colour": 1}},
        {"params": {"r_L": "big"}},
        {"scenario": "soliton"},
        {"options": {"k": 1.0, "boundary": "leaky"}},
        {"options": {"k": 1.0, "unknown": 3}},
        {"extra": 1},
    ],
)
def test_config_errors_exit_2(tmp_path, change):
    assert _run(tmp_path, "simulate", _with(CYLINDER, **change))[0] == EXIT_CONFIG


def test_regime_mismatch_exits_2(tmp_path):
    # a constant-diameter cosine mode on a tapering cable
    assert _run(tmp_path, "simulate", _with(CONE, scenario="cosine_mode", options={"k": 1.0}))[0] == EXIT_CONFIG


def test_missing_config_exits_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG


def test_overflow_exits_3(tmp_path):
    cfg = _with(CONE, options={"E": 1.3, "A": 1e308, "B": 1e308})
    with np.errstate(all="ignore"):
        assert _run(tmp_path, "simulate", cfg)[0] == EXIT_NUMERIC


def test_parse_config_digest_and_defaults():
    text = json.dumps(_with(CYLINDER, grid={"n": 41}))
    cfg = parse_config(text)
    assert cfg.seed == 0 and cfg.output is None
    assert len(cfg.digest) == 64
    assert parse_config(text).digest == cfg.digest
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")
    with pytest.raises(ConfigError):
        parse_config("{not json")


@pytest.mark.parametrize("name", ["cylinder_mode.json", "cone_algebra.json", "bad_domain.json"])
def test_shipped_configs(tmp_path, name):
    expected = EXIT_CONFIG if name.startswith("bad") else EXIT_OK
    assert main(["simulate" if "mode" in name or "bad" in name else "algebra", "--config", str(CONFIGS / name), "--out", str(tmp_path / "o.csv")]) == expected


def test_module_entry_point(tmp_path):
    out = tmp_path / "o.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "conformal_cable", "simulate", "--config", _write(tmp_path, CYLINDER), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == EXIT_OK, proc.stderr
    assert out.exists()
    ver = subprocess.run([sys.executable, "-m", "conformal_cable", "--version"], capture_output=True, text=True)
    assert __version__ in ver.stdout
