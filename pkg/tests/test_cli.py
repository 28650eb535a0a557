import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dualring_sfwm import cli
from dualring_sfwm.config import ExperimentConfig, default_config_text, load_config
from dualring_sfwm.exceptions import ConfigurationError
from dualring_sfwm.timetags import TimeTagStream, read_timetag_header, write_timetag_file

SHORT = """
[simulation]
duration_s = 2
g2_duration_s = 4
chunk_s = 2
[analysis]
power_integration_s = 20
"""


@pytest.fixture
def short_cfg(tmp_path):
    path = tmp_path / "short.ini"
    path.write_text(SHORT)
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- config -----------------------------------------------------------------------------

def test_defaults_round_trip():
    text = default_config_text()
    cfg = load_config(text=text)
    assert cfg == ExperimentConfig()
    assert cfg.to_text() == text
    assert cfg.digest() == ExperimentConfig().digest()


def test_default_values_are_reference_calibration():
    cfg = ExperimentConfig()
    assert (cfg.device.q_one, cfg.device.q_two) == (4.1e5, 3.7e5)
    assert (cfg.detectors.signal_loss_db, cfg.detectors.idler_loss_db) == (9.0, 5.7)
    assert cfg.analysis.bin_width_ps == 32 and cfg.analysis.window_ps == 448.0
    assert cfg.analysis.heater_integration_s == 180.0
    assert cfg.analysis.power_integration_s == 20.0
    assert cfg.simulation.g2_duration_s == 600.0
    assert cfg.simulation.g2_paper_scale_s == 36_000.0


@pytest.mark.parametrize("text", [
    "[device]\nbogus = 1\n",
    "[nowhere]\nx = 1\n",
    "[device]\nq_one = fast\n",
    "[pump]\npower_mw = none\n",
    "not an ini file",
])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigurationError):
        load_config(text=text)


def test_partial_ring_override_rejected():
    cfg = load_config(text="[device]\nring_one_coupling = 0.1\n")
    with pytest.raises(ConfigurationError):
        cfg.build_device()


def test_auto_background_hits_target_car():
    cfg = ExperimentConfig()
    assert cfg.background() > 0
    fixed = load_config(text="[simulation]\nbackground_hz = 1234.5\n")
    assert fixed.background() == 1234.5


def test_splitter_config_divides_background():
    cfg = load_config(text="[simulation]\nsplitter_ratio = 0.5\n")
    sim = cfg.sim_config()
    assert sim.splitter is not None and sim.splitter.channels == (2, 3)
    assert sim.signal_chain.dark_rate == pytest.approx(
        cfg.detectors.signal_dark_hz + cfg.background() / 2)


# -- commands ------------------------------------------------------------------------------

def test_default_config_command(capsys):
    assert run("default-config") == 0
    assert capsys.readouterr().out == default_config_text()


def test_bad_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[device]\nbogus = 1\n")
    assert run("spectrum", "--config", bad, "--out", tmp_path) == 2
    assert "bogus" in capsys.readouterr().err
    assert run("spectrum", "--config", tmp_path / "missing.ini", "--out", tmp_path) == 2


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 2


def test_spectrum_default(tmp_path):
    assert run("spectrum", "--out", tmp_path) == 0
    data = np.loadtxt(tmp_path / "spectrum.csv", delimiter=",", skiprows=1)
    assert data[:, 1].min() < -20
    assert -17.0 <= data[:, 2].max() <= -15.0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["outputs"] == ["spectrum.csv", "config.ini"]
    assert man["command"] == "spectrum" and man["schema_version"] == 1


def test_spectrum_zero_width_band(tmp_path):
    assert run("spectrum", "--band", 1550, 1550, "--out", tmp_path) == 0
    assert rows(tmp_path / "spectrum.csv") == [["wavelength_nm", "through_db", "drop_db"]]


def test_spectrum_uncoupled_lossless_is_flat(tmp_path):
    cfg = tmp_path / "flat.ini"
    cfg.write_text("[device]\nring_one_coupling = 1e-12\nring_one_loss_db_cm = 0\n"
                   "ring_two_coupling = 1e-12\nring_two_loss_db_cm = 0\n")
    assert run("spectrum", "--config", cfg, "--band", 1549, 1551, "--out", tmp_path) == 0
    data = np.loadtxt(tmp_path / "spectrum.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 1])) < 1e-9


def test_ng_curve(tmp_path):
    assert run("ng-curve", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "ng_curve.json").read_text())
    assert summary["recovered_D_ps_nm_km"] == pytest.approx(-32_000, rel=0.05)
    assert rows(tmp_path / "ng_curve.csv")[0] == ["wavelength_nm", "group_index"]


def test_heater_and_power_scans(tmp_path):
    assert run("heater-scan", "--out", tmp_path) == 0
    heater = json.loads((tmp_path / "heater_scan.json").read_text())
    assert heater["fwhm_ghz"] > 0
    r = np.loadtxt(tmp_path / "heater_scan.csv", delimiter=",", skiprows=1)
    assert r[np.argmax(r[:, 1]), 0] == pytest.approx(0.0, abs=0.2)
    assert run("power-scan", "--noiseless", "--out", tmp_path) == 0
    power = json.loads((tmp_path / "power_scan.json").read_text())
    assert power["exponent"] == pytest.approx(2.0, abs=1e-9)
    assert run("power-scan", "--out", tmp_path) == 0
    power = json.loads((tmp_path / "power_scan.json").read_text())
    assert power["exponent"] == pytest.approx(2.0, abs=0.1)


def test_simulate_deterministic_and_header(tmp_path, short_cfg):
    for d in ("a", "b"):
        assert run("simulate", "--config", short_cfg, "--seed", 5, "--out", tmp_path / d) == 0
    a, b = tmp_path / "a" / "timetags.ttag", tmp_path / "b" / "timetags.ttag"
    assert a.read_bytes() == b.read_bytes()
    count, duration = read_timetag_header(a)
    assert a.stat().st_size == 24 + 16 * count and duration == 2 * 10 ** 12
    assert run("simulate", "--config", short_cfg, "--seed", 6, "--out", tmp_path / "c") == 0
    assert (tmp_path / "c" / "timetags.ttag").read_bytes() != a.read_bytes()


def test_simulate_zero_rates_is_empty(tmp_path):
    cfg = tmp_path / "zero.ini"
    cfg.write_text("[simulation]\npair_rate_hz = 0\nbackground_hz = 0\nduration_s = 1\n"
                   "[detectors]\nsignal_dark_hz = 0\nidler_dark_hz = 0\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path) == 0
    assert read_timetag_header(tmp_path / "timetags.ttag") == (0, 10 ** 12)


def test_correlate_pipeline(tmp_path, short_cfg):
    assert run("simulate", "--config", short_cfg, "--out", tmp_path) == 0
    assert run("correlate", tmp_path / "timetags.ttag", "--config", short_cfg, "--out", tmp_path) == 0
    s = json.loads((tmp_path / "correlate.json").read_text())
    # only a few dozen accidentals in 2 s: compare within the Poisson spread
    assert abs(s["car"] - 237) < 3 * 237 / s["accidentals"] ** 0.5
    assert s["net_coincidences"] == s["raw_coincidences"] - s["accidentals"]
    assert rows(tmp_path / "histogram.csv")[0] == ["delay_ps", "counts"]


def test_correlate_uncorrelated_input(tmp_path):
    rng = np.random.default_rng(0)
    dur = 10 ** 11
    streams = [TimeTagStream(c, np.sort(rng.integers(0, dur, 300_000)), dur) for c in (1, 2)]
    write_timetag_file(tmp_path / "u.ttag", streams, dur)
    assert run("correlate", tmp_path / "u.ttag", "--out", tmp_path) == 0
    s = json.loads((tmp_path / "correlate.json").read_text())
    assert s["car"] == pytest.approx(1.0, abs=0.3)


def test_correlate_errors(tmp_path):
    assert run("correlate", tmp_path / "nope.ttag", "--out", tmp_path) == 2
    write_timetag_file(tmp_path / "one.ttag", [TimeTagStream(1, [5], 10)], 10)
    assert run("correlate", tmp_path / "one.ttag", "--out", tmp_path) == 3
    (tmp_path / "junk.ttag").write_bytes(b"0123456789abcdefghijklmnopqrstuvwxyz")
    assert run("correlate", tmp_path / "junk.ttag", "--out", tmp_path) == 3


def test_g2_command(tmp_path, short_cfg):
    assert run("simulate", "--config", short_cfg, "--splitter", 0.5, "--out", tmp_path) == 0
    assert run("g2", tmp_path / "timetags.ttag", "--config", short_cfg, "--out", tmp_path) == 0
    s = json.loads((tmp_path / "g2.json").read_text())
    assert s["n1"] > 0 and s["n12"] > 0
    assert rows(tmp_path / "g2.csv")[0] == ["t3_ps", "g2", "sigma", "n123"]
    assert rows(tmp_path / "triple_histogram.csv")[0] == ["delay_ps", "counts"]
    assert run("g2", tmp_path / "missing.ttag", "--out", tmp_path) == 2


def test_reproduce_outputs_and_determinism(tmp_path, short_cfg):
    for d in ("a", "b"):
        assert run("reproduce", "--config", short_cfg, "--out", tmp_path / d) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    datasets = sorted(p.name for p in a.glob("fig*.csv"))
    assert datasets == ["fig1b_spectrum.csv", "fig1c_ng_curve.csv", "fig2_heater_scan.csv",
                        "fig3_power_scan.csv", "fig4a_triple_histogram.csv", "fig4b_g2.csv"]
    for name in datasets + ["summary.json", "config.ini"]:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    summary = json.loads((a / "summary.json").read_text())
    for key in ("gvd_magnitude_ps2_per_m", "recovered_D_ps_nm_km", "phase_mismatch_rad_per_m",
                "phase_matching_efficiency", "te_tm_detuning_ratio", "reduction_factor",
                "single_ring_rate_hz", "heater_fwhm_ghz", "power_law_exponent"):
        assert isinstance(summary[key], float), key
    assert {"car", "coincidence_rate_hz", "peak_fwhm_ps"} <= set(summary["coincidences"])
    assert {"g2_zero", "g2_zero_sigma", "g2_far_pooled"} <= set(summary["g2"])


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "dualring_sfwm", "default-config"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.startswith("[device]")
