"""Pair generation by spontaneous four-wave mixing in the dual-ring source.

The rate model is the usual resonant-SFWM product: pump power squared, the
intracavity buildup of pump (squared), signal and idler, a sinc^2 phase
matching factor over the nonlinear interaction length, a Lorentzian penalty
for energy mismatch and the geometric reduction L / (4 L1) of the coupled
geometry.  A single calibration constant absorbs the nonlinear parameter and
mode-overlap normalisation.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, replace

import numpy as np

from .device import (
    apply_heater,
    comb_line,
    lorentzian_response,
    nearest_resonance,
    reference_device,
    pump_wavelength,
)
from .exceptions import ConfigurationError, DomainError
from .units import C, db_to_linear, dispersion_to_si, nm_to_thz

REFERENCE_PAIR_RATE = 1.3e5  # Hz, on-chip, at the reference operating point
REFERENCE_PUMP_POWER = 2.1  # mW in the input waveguide
REFERENCE_SIGNAL_LOSS_DB = 9.0
REFERENCE_IDLER_LOSS_DB = 5.7
REFERENCE_LINE_ORDER = 3

HEATER_SCAN_HEADER = ("shift_ghz", "rate_hz")
POWER_SCAN_HEADER = ("power_mw", "coincidences_hz")


@dataclass(frozen=True)
class PumpConfig:
    wavelength: float  # nm
    power: float  # mW in the input waveguide
    linewidth: float = 0.0  # GHz

    def __post_init__(self):
        if self.power < 0:
            raise DomainError("pump power must be >= 0")
        if self.linewidth < 0:
            raise DomainError("pump linewidth must be >= 0")

    @property
    def frequency(self):
        return float(nm_to_thz(self.wavelength))


@dataclass(frozen=True)
class PhaseMatchResult:
    detuning_omega: float  # rad/s
    delta: float  # rad/m
    efficiency: float


@dataclass(frozen=True)
class PairRatePrediction:
    generation_rate: float  # Hz
    signal_frequency: float  # THz
    idler_frequency: float  # THz
    enhancement_pump: float
    enhancement_signal: float
    enhancement_idler: float
    phase_factor: float
    reduction_factor: float
    energy_mismatch: float = 0.0  # GHz
    energy_penalty: float = 1.0


@dataclass(frozen=True)
class DetectedRates:
    singles_signal: float
    singles_idler: float
    coincidences: float

    @property
    def klyshko(self):
        """Heralding efficiency with the signal arm as herald."""
        return self.coincidences / self.singles_signal if self.singles_signal else math.nan


def phase_mismatch(D, wavelength_nm, omega):
    """-D lambda^2 Omega^2 / (2 pi c) in rad/m, D in ps/(nm km), Omega in rad/s."""
    if not wavelength_nm > 0:
        raise DomainError("wavelength must be positive")
    lam = wavelength_nm * 1e-9
    return -dispersion_to_si(D) * lam * lam * omega * omega / (2.0 * math.pi * C)


def phase_matching_efficiency(delta, interaction_length_um):
    """sinc^2(delta L / 2) with sinc(x) = sin(x) / x."""
    if not interaction_length_um > 0:
        raise DomainError("interaction length must be positive")
    x = np.asarray(delta, dtype=float) * interaction_length_um * 1e-6 / 2.0
    eff = np.sinc(x / math.pi) ** 2
    return float(eff) if np.ndim(eff) == 0 else eff


def phase_match(D, wavelength_nm, omega, interaction_length_um):
    delta = phase_mismatch(D, wavelength_nm, omega)
    return PhaseMatchResult(omega, delta,
                            phase_matching_efficiency(delta, interaction_length_um))


def te_tm_detuning_ratio(D_tm, D_te):
    """Ratio of phase-matchable detuning ranges, sqrt(|D_tm| / |D_te|)."""
    if D_tm == 0 or D_te == 0:
        raise DomainError("dispersion parameters must be nonzero")
    return math.sqrt(abs(D_tm) / abs(D_te))


def energy_mismatch(f_signal, f_idler, f_pump):
    """f_s + f_i - 2 f_p, THz in, GHz out."""
    if min(f_signal, f_idler, f_pump) <= 0:
        raise DomainError("frequencies must be positive")
    return (f_signal + f_idler - 2.0 * f_pump) * 1e3


def resonant_enhancement(resonator, dispersion, f_thz):
    """Intracavity power buildup at ``f_thz``: Lorentzian around the nearest line."""
    line = nearest_resonance(resonator, dispersion, f_thz)
    fwhm = resonator.linewidth(dispersion, line)
    out = resonator.peak_buildup * lorentzian_response((np.asarray(f_thz) - line) * 1e3, fwhm)
    return float(out) if np.ndim(out) == 0 else out


def energy_tolerance(device, pump, f_signal, f_idler):
    """Width (GHz) of the energy-conservation penalty.

    Sum of the linewidths taking part: pump line twice, signal and idler
    once each, plus twice the laser linewidth.
    """
    disp = device.dispersion
    fp = pump.frequency
    lw_p = device.resonator_one.linewidth(disp, nearest_resonance(device.resonator_one, disp, fp))
    lw_s = device.resonator_two.linewidth(disp, f_signal)
    lw_i = device.resonator_two.linewidth(disp, f_idler)
    return float(2.0 * (lw_p + pump.linewidth) + lw_s + lw_i)


def energy_penalty(mismatch_ghz, tolerance_ghz):
    # Expressed per unit of common resonator-two detuning (mismatch / 2), so a
    # heater scan of resonator two has FWHM equal to the tolerance.
    return float(lorentzian_response(mismatch_ghz / 2.0, tolerance_ghz))


def _raw_rate(device, pump, signal_line, idler_line, geometry, strict):
    disp = device.dispersion
    disp.check_band(pump.wavelength)
    fp = pump.frequency
    two = device.resonator_two
    f_s, f_i = (float(f) for f in comb_line(two, disp, fp, [signal_line, idler_line]))

    e_p = resonant_enhancement(device.resonator_one, disp, fp)
    e_s = resonant_enhancement(two, disp, f_s)
    e_i = resonant_enhancement(two, disp, f_i)

    if geometry == "dual_ring":
        length = device.dc_length
        reduction = device.dc_length / (4.0 * device.resonator_one.round_trip_length)
    elif geometry == "single_ring":
        length = device.resonator_one.round_trip_length
        reduction = 1.0
    else:
        raise ValueError(f"unknown geometry {geometry!r}")

    omega = 2.0 * math.pi * 0.5 * (f_s - f_i) * 1e12
    pm = phase_matching_efficiency(phase_mismatch(disp.D, pump.wavelength, omega), length)

    mismatch = energy_mismatch(f_s, f_i, fp)
    tol = energy_tolerance(device, pump, f_s, f_i)
    if strict and (signal_line != -idler_line or abs(mismatch) > tol / 2.0):
        raise ConfigurationError(
            f"signal/idler lines {signal_line}/{idler_line} are not energy-matched "
            f"to the pump (mismatch {mismatch:.3f} GHz)")
    penalty = energy_penalty(mismatch, tol)

    rate = pump.power ** 2 * e_p ** 2 * e_s * e_i * pm * penalty * reduction
    return PairRatePrediction(rate, f_s, f_i, e_p, e_s, e_i, pm, reduction, mismatch, penalty)


def pair_generation_rate(device, pump, signal_line=REFERENCE_LINE_ORDER,
                         idler_line=-REFERENCE_LINE_ORDER, kappa=None, strict=False,
                         geometry="dual_ring"):
    """Predicted on-chip pair rate (Hz) for one signal/idler line pair.

    ``signal_line`` and ``idler_line`` count resonator-two lines from the one
    nearest the pump.  With ``strict`` an energy-mismatched choice raises
    ``ConfigurationError``; otherwise the mismatch only suppresses the rate.
    ``geometry="single_ring"`` gives the counterfactual of one ring of length
    L1 doing everything (no L/4L1 reduction, sinc^2 over L1).  ``kappa``
    defaults to the constant calibrated at the reference operating point.
    """
    if kappa is None:
        kappa = reference_kappa()
    raw = _raw_rate(device, pump, signal_line, idler_line, geometry, strict)
    return replace(raw, generation_rate=kappa * raw.generation_rate)


def calibrate_kappa(device, pump, signal_line=REFERENCE_LINE_ORDER,
                    idler_line=-REFERENCE_LINE_ORDER, target_rate=REFERENCE_PAIR_RATE):
    raw = _raw_rate(device, pump, signal_line, idler_line, "dual_ring", False)
    if raw.generation_rate <= 0:
        raise ConfigurationError("cannot calibrate at a zero-rate operating point")
    return target_rate / raw.generation_rate


def reference_pump(device=None, power=REFERENCE_PUMP_POWER):
    """Pump on the resonator-one line nearest lambda_ref."""
    device = device or reference_device()
    return PumpConfig(pump_wavelength(device), power)


@functools.lru_cache(maxsize=1)
def reference_kappa():
    """Calibration constant (Hz/mW^2) reproducing 1.3e5 Hz at 2.1 mW, +/-3 lines."""
    dev = reference_device()
    return calibrate_kappa(dev, reference_pump(dev))


def detected_rates(prediction, signal_loss, idler_loss, dark_rates=(0.0, 0.0)):
    """Singles and coincidence rates after loss, plus dark counts on the singles.

    ``prediction`` may be a ``PairRatePrediction`` or a bare rate in Hz.
    """
    if signal_loss < 0 or idler_loss < 0:
        raise DomainError("losses must be >= 0 dB")
    rate = getattr(prediction, "generation_rate", prediction)
    eta_s, eta_i = db_to_linear(signal_loss), db_to_linear(idler_loss)
    dark_s, dark_i = dark_rates
    return DetectedRates(float(rate * eta_s + dark_s), float(rate * eta_i + dark_i),
                         float(rate * eta_s * eta_i))


def heater_scan(device, pump, shifts, signal_line=REFERENCE_LINE_ORDER,
                idler_line=-REFERENCE_LINE_ORDER, kappa=None,
                signal_loss=REFERENCE_SIGNAL_LOSS_DB, idler_loss=REFERENCE_IDLER_LOSS_DB):
    """Detected coincidence rate while resonator two is tuned by ``shifts`` (GHz).

    Returns ``(shifts, rates)`` arrays.
    """
    shifts = np.asarray(shifts, dtype=float)
    if shifts.size > 1 and np.any(np.diff(shifts) < 0):
        raise ValueError("shifts must be sorted")
    rates = np.empty_like(shifts)
    for n, s in enumerate(shifts):
        tuned = apply_heater(device, 2, float(s))
        pred = pair_generation_rate(tuned, pump, signal_line, idler_line, kappa)
        rates[n] = detected_rates(pred, signal_loss, idler_loss).coincidences
    return shifts, rates


def power_scan(device, pump_powers, pump=None, signal_line=REFERENCE_LINE_ORDER,
               idler_line=-REFERENCE_LINE_ORDER, kappa=None,
               signal_loss=REFERENCE_SIGNAL_LOSS_DB, idler_loss=REFERENCE_IDLER_LOSS_DB,
               integration_s=None, rng=None):
    """Detected coincidences (Hz) versus pump power (mW).

    With ``integration_s`` set, each point is replaced by a Poisson draw of
    the expected counts in that time, divided back to a rate.
    """
    powers = np.asarray(pump_powers, dtype=float)
    if np.any(powers < 0):
        raise DomainError("pump powers must be >= 0")
    pump = pump or reference_pump(device)
    unit = pair_generation_rate(device, replace(pump, power=1.0),
                                signal_line, idler_line, kappa)
    coinc = detected_rates(unit, signal_loss, idler_loss).coincidences * powers ** 2
    if integration_s is not None:
        rng = rng if rng is not None else np.random.default_rng()
        coinc = rng.poisson(coinc * integration_s) / integration_s
    return powers, coinc


def write_scan_csv(path, header, x, y):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in zip(x, y):
            w.writerow([f"{a:.12g}", f"{b:.12g}"])
