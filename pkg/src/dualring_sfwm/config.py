"""Experiment configuration files and run manifests.

Configs are INI files with one section per stage.  Every key has a default
matching the reference chip; unknown sections or keys are rejected.  The
full default file is produced by ``default_config_text()``::

    [device]      dispersion, ring lengths and loaded Qs, coupler, drop peak
    [pump]        in-waveguide power and laser linewidth
    [sfwm]        signal/idler line indices and the calibration rate
    [detectors]   arm losses, jitter, dark rates, dead time
    [simulation]  seed, durations, pair rate, background, chunking
    [analysis]    binning, windows, scan ranges, integration times

``background_hz = auto`` solves for the per-channel background that gives
``target_car`` at the simulated pair rate.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import json
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

from .device import DispersionModel, DualRingDevice, RingResonator, align_resonator_two
from .exceptions import ConfigurationError
from .sfwm import PumpConfig, calibrate_kappa
from .timetags import (
    DEFAULT_DARK_RATE,
    DEFAULT_JITTER_PS,
    DetectorChain,
    SimConfig,
    Splitter,
    background_for_car,
)
from .units import nm_to_thz

SCHEMA_VERSION = 1


@dataclass
class DeviceSection:
    lambda_ref_nm: float = 1550.0
    ng_ref: float = 4.3
    d_ps_nm_km: float = -32_000.0
    dd_dlambda: float = 0.0
    band_min_nm: float = 1400.0
    band_max_nm: float = 1700.0
    ring_one_length_um: float = 138.0
    ring_two_length_um: float = 130.0
    q_one: float = 4.1e5
    q_two: float = 3.7e5
    # set both to override q_one / q_two
    ring_one_coupling: float | None = None
    ring_one_loss_db_cm: float | None = None
    ring_two_coupling: float | None = None
    ring_two_loss_db_cm: float | None = None
    dc_length_um: float = 18.0
    crosstalk: float = 0.0
    drop_peak_db: float = -16.0
    align_order: int = 3


@dataclass
class PumpSection:
    power_mw: float = 2.1
    linewidth_ghz: float = 0.0


@dataclass
class SfwmSection:
    signal_line: int = 3
    idler_line: int = -3
    calibration_rate_hz: float = 1.3e5
    calibration_power_mw: float = 2.1


@dataclass
class DetectorsSection:
    signal_loss_db: float = 9.0
    idler_loss_db: float = 5.7
    jitter_ps: float = DEFAULT_JITTER_PS
    signal_dark_hz: float = DEFAULT_DARK_RATE
    idler_dark_hz: float = DEFAULT_DARK_RATE
    dead_time_ps: float = 0.0


@dataclass
class SimulationSection:
    seed: int = 1
    pair_rate_hz: float = 8.4e4
    duration_s: float = 60.0
    background_hz: str = "auto"
    target_car: float = 237.0
    splitter_ratio: float | None = None
    g2_duration_s: float = 600.0
    g2_paper_scale_s: float = 36_000.0
    chunk_s: float = 20.0


@dataclass
class AnalysisSection:
    band_min_nm: float = 1500.0
    band_max_nm: float = 1600.0
    grid_step_pm: float = 1.0
    smoothing_window: int = 3
    bin_width_ps: int = 32
    histogram_range_ps: int = 1024
    window_ps: float = 448.0
    accidental_offset_ps: float = 10_000.0
    heater_span_ghz: float = 10.0
    heater_step_ghz: float = 0.2
    heater_integration_s: float = 180.0
    power_min_mw: float = 0.05
    power_max_mw: float = 0.5
    power_points: int = 10
    power_integration_s: float = 20.0
    g2_t3_span_ps: int = 20_000
    g2_t3_step_ps: int = 400
    triple_bin_ps: int = 50
    triple_range_ps: int = 2_000
    herald_channel: int = 1
    arm2_channel: int = 2
    arm3_channel: int = 3


@dataclass
class ExperimentConfig:
    device: DeviceSection = field(default_factory=DeviceSection)
    pump: PumpSection = field(default_factory=PumpSection)
    sfwm: SfwmSection = field(default_factory=SfwmSection)
    detectors: DetectorsSection = field(default_factory=DetectorsSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)

    # -- construction of module objects --------------------------------------------

    def dispersion(self):
        d = self.device
        return DispersionModel(d.lambda_ref_nm, d.ng_ref, d.d_ps_nm_km, d.dd_dlambda,
                               (d.band_min_nm, d.band_max_nm))

    def _ring(self, length, q, coupling, loss, disp):
        if coupling is not None or loss is not None:
            if coupling is None or loss is None:
                raise ConfigurationError("set both coupling and loss, or neither")
            return RingResonator(length, loss, coupling)
        return RingResonator.from_loaded_q(length, q, disp)

    def build_device(self):
        d = self.device
        disp = self.dispersion()
        one = self._ring(d.ring_one_length_um, d.q_one, d.ring_one_coupling,
                         d.ring_one_loss_db_cm, disp)
        two = self._ring(d.ring_two_length_um, d.q_two, d.ring_two_coupling,
                         d.ring_two_loss_db_cm, disp)
        dev = DualRingDevice(one, two, d.dc_length_um, d.crosstalk, disp, d.drop_peak_db)
        if d.align_order:
            dev = align_resonator_two(dev, float(nm_to_thz(d.lambda_ref_nm)), d.align_order)
        return dev

    def build_pump(self, device=None, power=None):
        from .device import pump_wavelength
        device = device or self.build_device()
        return PumpConfig(pump_wavelength(device),
                          self.pump.power_mw if power is None else power,
                          self.pump.linewidth_ghz)

    def kappa(self, device=None):
        device = device or self.build_device()
        pump = self.build_pump(device, self.sfwm.calibration_power_mw)
        return calibrate_kappa(device, pump, self.sfwm.signal_line, self.sfwm.idler_line,
                               self.sfwm.calibration_rate_hz)

    def chains(self, background=None):
        det = self.detectors
        sig = DetectorChain(det.signal_loss_db, det.jitter_ps, det.signal_dark_hz,
                            det.dead_time_ps)
        idl = DetectorChain(det.idler_loss_db, det.jitter_ps, det.idler_dark_hz,
                            det.dead_time_ps)
        if background:
            sig = dataclasses.replace(sig, dark_rate=sig.dark_rate + background)
            idl = dataclasses.replace(idl, dark_rate=idl.dark_rate + background)
        return sig, idl

    def background(self):
        """Extra per-channel background rate (Hz) added on top of the darks."""
        sim = self.simulation
        if str(sim.background_hz).strip().lower() != "auto":
            return float(sim.background_hz)
        sig, idl = self.chains()
        total = background_for_car(sim.pair_rate_hz, sig, idl, self.analysis.window_ps,
                                   sim.target_car)
        darks = 0.5 * (sig.dark_rate + idl.dark_rate)
        return max(total - darks, 0.0)

    def sim_config(self, duration=None, splitter_ratio="config", seed=None):
        sim = self.simulation
        ratio = sim.splitter_ratio if splitter_ratio == "config" else splitter_ratio
        sig, idl = self.chains(self.background())
        splitter = None
        if ratio is not None:
            a = self.analysis
            splitter = Splitter(ratio, (a.arm2_channel, a.arm3_channel))
            # the arm background is split between the two detectors
            bg = self.background()
            sig = dataclasses.replace(sig, dark_rate=self.detectors.signal_dark_hz + bg / 2.0)
        return SimConfig(sim.pair_rate_hz, sim.duration_s if duration is None else duration,
                         sim.seed if seed is None else seed, sig, idl, splitter)

    # -- serialisation ----------------------------------------------------------------

    def to_text(self):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for f in fields(self):
            section = getattr(self, f.name)
            cp[f.name] = {k.name: _fmt(getattr(section, k.name)) for k in fields(section)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def _fmt(v):
    return "none" if v is None else repr(v) if isinstance(v, float) else str(v)


def _coerce(raw, template_field, current):
    text = raw.strip()
    ftype = str(template_field.type)
    if text.lower() == "none":
        if "None" not in ftype:
            raise ConfigurationError(f"{template_field.name} cannot be none")
        return None
    try:
        if ftype.startswith("int"):
            return int(text)
        if ftype.startswith("float"):
            return float(text)
        if ftype.startswith("str"):
            return text
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {template_field.name}: {raw!r}") from exc
    raise ConfigurationError(f"unsupported field type {ftype}")


def load_config(path=None, text=None):
    """Parse a config file (or text); missing keys take their defaults."""
    cfg = ExperimentConfig()
    if path is None and text is None:
        return cfg
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        if text is not None:
            cp.read_string(text)
        else:
            with open(path) as fh:
                cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigurationError(str(exc)) from exc
    known = {f.name: f for f in fields(cfg)}
    for name in cp.sections():
        if name not in known:
            raise ConfigurationError(f"unknown section [{name}]")
        section = getattr(cfg, name)
        sfields = {f.name: f for f in fields(section)}
        for key, raw in cp[name].items():
            if key not in sfields:
                raise ConfigurationError(f"unknown key {key!r} in [{name}]")
            setattr(section, key, _coerce(raw, sfields[key], getattr(section, key)))
    return cfg


def default_config_text():
    return ExperimentConfig().to_text()


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    version: str
    command: str
    started: float
    finished: float | None = None
    outputs: list = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def start(cls, cfg, command):
        from . import __version__
        return cls(cfg.digest(), cfg.simulation.seed, __version__, command, time.time())

    def write(self, out_dir):
        self.finished = time.time()
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")
        return path
