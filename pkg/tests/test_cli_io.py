import numpy as np
import pytest

import vfax
from vfax import Field3, GridSpec, SimParams
from vfax.core import ConfigError
from vfax.timestepper import RunConfig, SimState, run
from vfax import cli_io
from vfax.cli_io import (cli_main, echo_config, load_initial_condition,
                         load_snapshot, parse_config, read_diagnostics_csv,
                         render_diagnostics_csv, validate_config,
                         write_diagnostics_csv, write_snapshot)


BASE_CONFIG = """
[grid]
length = 40.0
npoints = 128

[params]
alpha = -1.0
delta = 1e-3

[run]
t_final = 0.004
diagnostics_every = 5

[ic]
family = compatible-bump
"""


def test_parse_and_echo_roundtrip():
    cfg = parse_config(BASE_CONFIG)
    text = echo_config(cfg)
    cfg2 = parse_config(text)
    assert cfg == cfg2


def test_unknown_key_rejected():
    bad = BASE_CONFIG.replace("diagnostics_every = 5", "diagnostics_every = 5\nwarp = 9")
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    assert "warp" in str(exc.value)
    with pytest.raises(ConfigError):
        parse_config("[mystery]\nx = 1\n")


def test_validation_specific_messages():
    cfg = parse_config(BASE_CONFIG)
    cfg["params"]["alpha"] = 0.0
    with pytest.raises(ConfigError) as exc:
        validate_config(cfg)
    assert "alpha" in str(exc.value)
    cfg = parse_config(BASE_CONFIG)
    cfg["params"]["delta"] = -1.0
    with pytest.raises(ConfigError) as exc:
        validate_config(cfg)
    assert "delta" in str(exc.value)
    cfg = parse_config(BASE_CONFIG)
    cfg["grid"]["npoints"] = 8
    with pytest.raises(ConfigError) as exc:
        validate_config(cfg)
    assert "npoints" in str(exc.value)


def test_initial_condition_families():
    g = GridSpec(40.0, 256)
    for alpha in (-1.0, 1.0):
        params = SimParams(alpha=alpha, delta=1e-3)
        for name in ("e3", "compatible-bump", "helix-cap",
                     "boundary-cubic", "boundary-curved"):
            v = load_initial_condition(name, g, params)
            assert vfax.sup_norm_unit_drift(v) <= 1e-12
            tail = v.values[-12:]
            assert np.max(np.abs(tail - tail[-1])) <= 1e-12   # far-field flat
    with pytest.raises(ConfigError):
        load_initial_condition("no-such-family", g, SimParams(alpha=-1.0))


def test_family_options_parse():
    g = GridSpec(40.0, 256)
    params = SimParams(alpha=-1.0)
    v = load_initial_condition("compatible-bump:amp=0.05,width=6.0", g, params)
    assert np.max(np.abs(v.values[:, 0])) <= 0.06
    with pytest.raises(ConfigError):
        load_initial_condition("compatible-bump:oops", g, params)


def test_compatible_bump_passes_checker():
    g = GridSpec(40.0, 256)
    for alpha in (-1.0, 1.0):
        params = SimParams(alpha=alpha, delta=1e-3)
        v = load_initial_condition("compatible-bump", g, params)
        rep = vfax.check_compatibility(v, params, 0, 1e-9, g)
        assert rep.passed


def test_snapshot_roundtrip_bit_exact(tmp_path, rng):
    g = GridSpec(17.0, 64)
    params = SimParams(alpha=-0.37, delta=2.5e-4)
    v = Field3(rng.standard_normal((64, 3)))
    x = Field3(rng.standard_normal((64, 3)))
    state = SimState(t=0.1234567890123456, v=v, x=x, step_count=42)
    path = tmp_path / "state.snap"
    write_snapshot(path, state, g, params)
    state2, g2, params2 = load_snapshot(path)
    assert np.array_equal(state2.v.values, v.values)
    assert np.array_equal(state2.x.values, x.values)
    assert state2.t == state.t and state2.step_count == 42
    assert g2 == g and params2 == params


def test_load_initial_condition_from_snapshot(tmp_path):
    g = GridSpec(40.0, 128)
    params = SimParams(alpha=-1.0, delta=1e-3)
    v = load_initial_condition("compatible-bump", g, params)
    path = tmp_path / "ic.snap"
    write_snapshot(path, SimState(t=0.0, v=v), g, params)
    v2 = load_initial_condition(str(path), g, params)
    assert np.array_equal(v2.values, v.values)
    with pytest.raises(ConfigError):
        load_initial_condition(str(path), GridSpec(40.0, 256), params)


def test_diagnostics_csv_roundtrip(tmp_path):
    g = GridSpec(40.0, 128)
    params = SimParams(alpha=-1.0, delta=1e-3)
    cfg = RunConfig(params=params, grid=g, t_final=0.004, ic="compatible-bump",
                    diagnostics_every=5)
    result = run(cfg)
    path = tmp_path / "diag.csv"
    write_diagnostics_csv(result.records, path)
    back = read_diagnostics_csv(path)
    assert len(back) == len(result.records)
    for a, b in zip(result.records, back):
        assert a == b


def test_diagnostics_csv_single_zero_record(tmp_path):
    g = GridSpec(20.0, 128)
    params = SimParams(alpha=-1.0, delta=1e-3)
    rec = vfax.record(SimState(t=0.0, v=Field3.constant([0, 0, 1.0], g)), params, g)
    path = tmp_path / "one.csv"
    write_diagnostics_csv([rec], path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    cells = lines[1].split(",")
    assert cells[0] == "0" and cells[1] == "0"


def test_csv_deterministic_across_runs():
    g = GridSpec(40.0, 128)
    params = SimParams(alpha=-1.0, delta=1e-3)

    def one():
        cfg = RunConfig(params=params, grid=g, t_final=0.004, ic="compatible-bump",
                        diagnostics_every=5)
        return render_diagnostics_csv(run(cfg).records)

    assert one() == one()


def test_cli_run_and_exit_codes(tmp_path, capsys):
    cfgfile = tmp_path / "run.ini"
    cfgfile.write_text(BASE_CONFIG + f"\n[output]\ndiagnostics = {tmp_path}/d.csv\n")
    assert cli_main(["run", "--config", str(cfgfile)]) == 0
    assert (tmp_path / "d.csv").exists()
    # validation failure -> 2
    assert cli_main(["run", "--config", str(cfgfile), "--alpha", "0"]) == 2
    # numerical failure (instability from an oversized dt) -> 3
    assert cli_main(["run", "--config", str(cfgfile), "--dt", "1.0",
                     "--t-final", "30"]) == 3


def test_cli_check_compat_reports_failure_as_success(tmp_path, capsys):
    # reporting a failing datum is still exit 0
    cfgfile = tmp_path / "run.ini"
    cfgfile.write_text(BASE_CONFIG.replace("alpha = -1.0", "alpha = 1.0")
                       .replace("family = compatible-bump", "family = boundary-cubic"))
    code = cli_main(["check-compat", "--config", str(cfgfile), "--order", "1"])
    out = capsys.readouterr().out
    assert code == 0
    assert "FAIL" in out


def test_cli_byte_identical_diagnostics(tmp_path):
    cfgfile = tmp_path / "run.ini"
    cfgfile.write_text(BASE_CONFIG)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli_main(["run", "--config", str(cfgfile), "--out", str(a)]) == 0
    assert cli_main(["run", "--config", str(cfgfile), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_continuation_table(tmp_path, capsys):
    cfgfile = tmp_path / "run.ini"
    cfgfile.write_text(BASE_CONFIG)
    code = cli_main(["continuation", "--config", str(cfgfile),
                     "--deltas", "1e-2,1e-3", "--order", "0"])
    out = capsys.readouterr().out
    assert code == 0
    assert "rate" in out
