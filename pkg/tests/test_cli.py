import json

import pytest
import yaml

from freemembrane import cli
from freemembrane.config import load_config, resolve
from freemembrane.errors import ConfigError, IoFailure
from freemembrane.tables import read_csv


def write_cfg(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def test_defaults_resolve():
    cfg = load_config(None)
    assert cfg.device.gap == 1e-6
    assert cfg.solver.n_elements == 200
    assert cfg.block("fit_rf")["isolation_db"] == -30.0
    assert len(cfg.digest) == 64


def test_stiction_preset_and_overrides():
    cfg = resolve({"device": {"preset": "stiction", "eps_r": 6.5}, "solver": {"v_step": 0.02}}, n_elements=120)
    assert cfg.device.gap == pytest.approx(0.7e-6)
    assert cfg.device.electrodes[0].dielectric_rel_permittivity == 6.5
    assert cfg.solver.v_step == 0.02 and cfg.solver.n_elements == 120
    assert cfg.resolved["device"]["eps_r"] == 6.5


def test_exponent_floats_without_dot_or_sign(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("device:\n  preset: stiction\n  gap: 7e-7\nrf:\n  f_max: 5e9\n")
    cfg = load_config(p)
    assert cfg.device.gap == pytest.approx(0.7e-6)
    assert cfg.block("rf")["f_max"] == 5e9


@pytest.mark.parametrize("name", ["default.yaml", "stiction.yaml"])
def test_shipped_configs_load(name):
    from pathlib import Path
    cfg = load_config(Path(__file__).parent.parent / "configs" / name)
    assert cfg.solver.n_elements == 200


def test_explicit_device_tree():
    tree = {
        "material": {"youngs_modulus": 70e9, "poisson_ratio": 0.4},
        "geometry": {"length": 360e-6, "thickness": 1e-6, "width_segments": [[0.0, 360e-6, 250e-6]],
                     "pillar_positions": [36e-6, 324e-6]},
        "electrodes": [{"x_start": 100e-6, "x_end": 140e-6, "kind": "internal"}],
        "gap": 1e-6,
        "contacts": {"positions": [180e-6], "stop_height": 0.8e-6},
    }
    cfg = resolve({"device": tree})
    assert cfg.device.material.youngs_modulus == 70e9
    assert cfg.device.contacts.positions == (180e-6,)


@pytest.mark.parametrize("raw", [
    {"bogus": {}},
    {"solver": {"nope": 1}},
    {"pullin": {"v_maxx": 3}},
    {"device": {"preset": "weird"}},
    {"device": {"unknown_knob": 1}},
    {"device": {"gap": -1.0}},
    {"solver": {"v_step": -1}},
    {"pullin": 3},
])
def test_config_errors(raw):
    with pytest.raises(ConfigError):
        resolve(raw)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(IoFailure):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("device: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_digest_tracks_resolved_config():
    a = resolve({"solver": {"v_step": 0.05}})
    b = resolve({})
    c = resolve({"solver": {"v_step": 0.02}})
    assert a.digest == b.digest != c.digest


def test_fit_rf_cli(tmp_path):
    cfg = write_cfg(tmp_path, {"fit_rf": {"isolation_db": -30.0, "insertion_db": -0.45}})
    out = tmp_path / "out"
    assert cli.main(["fit-rf", "--config", str(cfg), "--out", str(out)]) == 0
    t = read_csv(out / "fit_rf.csv")
    assert t.column("r_down_ohm")[0] == pytest.approx(0.816, rel=5e-3)
    assert t.column("c_up_F")[0] == pytest.approx(0.210e-12, rel=5e-3)
    manifest = json.loads((out / "fit_rf_manifest.json").read_text())
    assert manifest["config_sha256"] == load_config(cfg).digest
    assert manifest["solver"]["n_elements"] == 200
    assert set(manifest["outputs"]) == {"fit_rf.csv"}
    assert len(list(out.glob("*manifest.json"))) == 1


def test_rf_cli_writes_touchstone_and_plot(tmp_path):
    out = tmp_path / "rf"
    assert cli.main(["rf", "--out", str(out), "--plot"]) == 0
    for name in ("rf.csv", "rf_up.s2p", "rf_down.s2p", "rf.png", "rf_manifest.json"):
        assert (out / name).is_file()
    t = read_csv(out / "rf.csv")
    assert t.columns == ("freq_Hz", "s21_up_dB", "s11_up_dB", "s21_down_dB", "s11_down_dB")
    assert t.column("s21_down_dB")[0] == pytest.approx(-30.0, abs=0.01)


def test_rf_explicit_circuit(tmp_path):
    cfg = write_cfg(tmp_path, {"rf": {"circuit": {"r_down": 0.5, "c_up": 1e-13}, "n_points": 3}})
    assert cli.main(["rf", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert len(read_csv(tmp_path / "o" / "rf.csv")) == 3


def test_missing_config_exit_and_record(tmp_path, capsys):
    out = tmp_path / "o"
    missing = tmp_path / "nope.yaml"
    assert cli.main(["pullin", "--config", str(missing), "--out", str(out)]) == cli.EXIT_IO
    rec = json.loads((out / "error.json").read_text())
    assert rec["error"] == "IoFailure"
    assert rec["path"] == str(missing)
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["path"] == str(missing)


def test_config_error_exit(tmp_path):
    cfg = write_cfg(tmp_path, {"nonsense": 1})
    assert cli.main(["fit-rf", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_USAGE
    assert json.loads((tmp_path / "o" / "error.json").read_text())["error"] == "ConfigError"


def test_unreachable_target_is_solver_error(tmp_path):
    cfg = write_cfg(tmp_path, {"fit_rf": {"insertion_db": 1.0}})
    assert cli.main(["fit-rf", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_SOLVER


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["fit-rf", "--out", str(blocker / "sub")]) == cli.EXIT_IO


def test_usage_errors_exit_one():
    with pytest.raises(SystemExit) as e:
        cli.main(["nonsense", "--out", "x"])
    assert e.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        cli.main(["fit-rf"])
    assert e.value.code == cli.EXIT_USAGE
    assert cli.main(["fit-rf", "--out", "x", "--elements", "0"]) == cli.EXIT_USAGE


def test_solver_error_exit(tmp_path):
    # pull-in cannot be reached below 0.1 V
    cfg = write_cfg(tmp_path, {"pullin": {"v_max": 0.1}, "solver": {"n_elements": 60}})
    assert cli.main(["pullin", "--config", str(cfg), "--out", str(tmp_path / "o")]) == cli.EXIT_SOLVER
    assert json.loads((tmp_path / "o" / "error.json").read_text())["error"] == "NoPullInBelowVmax"


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, {"rf": {"n_points": 7}})
    for d in ("a", "b"):
        assert cli.main(["rf", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    for name in ("rf.csv", "rf_up.s2p", "rf_down.s2p", "rf_manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
