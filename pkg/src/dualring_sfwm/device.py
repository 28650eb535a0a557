"""Linear optics of the dual-racetrack photonic circuit.

Two racetracks share a directional coupler that is designed for zero linear
power transfer.  Resonator one sits on the pump bus (input/through ports),
resonator two on the add/drop bus.  Everything here is linear: resonance
combs with a dispersive group index, Lorentzian transmission lines, heater
tuning as rigid frequency shifts, and recovery of the group index from a
measured (or synthetic) transmission scan.

Frequencies are THz, linewidths and shifts GHz, wavelengths nm and lengths
um unless a name says otherwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from .exceptions import DomainError, InsufficientDataError, ModelRangeError
from .units import C, dispersion_to_si, nm_to_thz, thz_to_nm

_NEWTON_TOL_HZ = 1e-3
_FLOOR_LINEAR = 1e-12
SPECTRUM_HEADER = ("wavelength_nm", "through_db", "drop_db")


@dataclass(frozen=True)
class DispersionModel:
    """Group index of the shared TM mode as a Taylor series in wavelength.

    ``D`` is the dispersion parameter in ps/(nm km) and ``dD_dlambda`` its
    slope in ps/(nm^2 km).  Since D is the wavelength derivative of group
    delay per unit length, ``dn_g/dlambda = c * D``.
    """

    lambda_ref: float = 1550.0
    ng_ref: float = 4.3
    D: float = -32_000.0
    dD_dlambda: float = 0.0
    band: tuple[float, float] = (1400.0, 1700.0)

    def __post_init__(self):
        if not self.lambda_ref > 0:
            raise DomainError("lambda_ref must be positive")
        if not self.ng_ref > 1:
            raise DomainError("ng_ref must exceed 1 for a guided mode")
        lo, hi = self.band
        if not 0 < lo < hi:
            raise DomainError("band must be an increasing pair of positive wavelengths")
        if not lo <= self.lambda_ref <= hi:
            raise DomainError("lambda_ref must lie inside the model band")
        probe = np.linspace(lo, hi, 257)
        if np.any(self.ng(probe, check=False) <= 1.0):
            raise DomainError("group index drops below 1 inside the model band")

    @property
    def _coeffs(self):
        # n_g = alpha + beta*u + gamma*u^2, u = lambda - lambda_ref in metres
        beta = C * dispersion_to_si(self.D)
        gamma = 0.5 * C * self.dD_dlambda * 1e3
        return self.ng_ref, beta, gamma

    def check_band(self, wavelength_nm):
        wl = np.asarray(wavelength_nm, dtype=float)
        lo, hi = self.band
        if wl.size and (np.nanmin(wl) < lo or np.nanmax(wl) > hi):
            raise ModelRangeError(
                f"wavelength outside dispersion model band [{lo}, {hi}] nm"
            )

    def ng(self, wavelength_nm, check=True):
        """Group index at ``wavelength_nm`` (scalar or array)."""
        if check:
            self.check_band(wavelength_nm)
        alpha, beta, gamma = self._coeffs
        u = (np.asarray(wavelength_nm, dtype=float) - self.lambda_ref) * 1e-9
        return alpha + beta * u + gamma * u * u

    def ng_at_frequency(self, freq_hz):
        return self.ng(C / np.asarray(freq_hz, dtype=float) * 1e9, check=False)

    def phase_integral(self, f_hz, f0_hz):
        """Integral of n_g over frequency from ``f0_hz`` to ``f_hz`` (Hz)."""
        alpha, beta, gamma = self._coeffs
        lr = self.lambda_ref * 1e-9
        a0 = alpha - beta * lr + gamma * lr * lr
        a1 = beta - 2.0 * gamma * lr
        f = np.asarray(f_hz, dtype=float)
        return (
            a0 * (f - f0_hz)
            + a1 * C * np.log1p((f - f0_hz) / f0_hz)
            + gamma * C * C * (f - f0_hz) / (f * f0_hz)
        )


@dataclass(frozen=True)
class RingResonator:
    """One racetrack resonator coupled to a single bus waveguide.

    ``intrinsic_loss`` is propagation loss in dB/cm, ``bus_power_coupling``
    the power cross-coupling to the bus.  ``resonance_anchor`` places one
    comb line at the dispersion reference frequency plus that offset (GHz);
    ``heater_shift`` moves the whole comb rigidly (GHz).
    """

    round_trip_length: float
    intrinsic_loss: float
    bus_power_coupling: float
    resonance_anchor: float = 0.0
    heater_shift: float = 0.0

    def __post_init__(self):
        if not self.round_trip_length > 0:
            raise DomainError("round_trip_length must be positive")
        if not 0 < self.bus_power_coupling < 1:
            raise DomainError("bus_power_coupling must lie in (0, 1)")
        if not self.intrinsic_loss >= 0:
            raise DomainError("intrinsic_loss must be non-negative")

    @classmethod
    def from_loaded_q(cls, round_trip_length, q_loaded, dispersion,
                      resonance_anchor=0.0):
        """Critically coupled resonator with the given loaded Q at lambda_ref."""
        if not q_loaded > 0:
            raise DomainError("q_loaded must be positive")
        f = C / (dispersion.lambda_ref * 1e-9)
        fsr = C / (dispersion.ng_ref * round_trip_length * 1e-6)
        q = (f / q_loaded) / fsr
        # critical coupling r = a, FWHM/FSR = (1 - a^2) / (pi a)
        a = (-math.pi * q + math.sqrt((math.pi * q) ** 2 + 4.0)) / 2.0
        loss_db_cm = -20.0 * math.log10(a) / (round_trip_length * 1e-4)
        return cls(round_trip_length, loss_db_cm, 1.0 - a * a, resonance_anchor)

    @property
    def round_trip_amplitude(self):
        return 10.0 ** (-self.intrinsic_loss * self.round_trip_length * 1e-4 / 20.0)

    @property
    def self_coupling(self):
        return math.sqrt(1.0 - self.bus_power_coupling)

    @property
    def extinction(self):
        """Fractional power removed from the bus exactly on resonance."""
        r, a = self.self_coupling, self.round_trip_amplitude
        return 1.0 - ((r - a) / (1.0 - r * a)) ** 2

    @property
    def peak_buildup(self):
        """Intracavity power enhancement on resonance, kappa^2 / (1 - r a)^2."""
        r, a = self.self_coupling, self.round_trip_amplitude
        return self.bus_power_coupling / (1.0 - r * a) ** 2

    def fsr(self, dispersion, freq_thz):
        """Local free spectral range (GHz) at ``freq_thz``.

        The heater moves the comb rigidly, so the spacing is that of the
        unshifted comb at ``freq_thz - heater_shift``.
        """
        f = (np.asarray(freq_thz, dtype=float) - self.heater_shift * 1e-3) * 1e12
        return C / (dispersion.ng_at_frequency(f) * self.round_trip_length * 1e-6) / 1e9

    def linewidth(self, dispersion, freq_thz):
        """Loaded FWHM (GHz) of the resonance near ``freq_thz``."""
        ra = self.self_coupling * self.round_trip_amplitude
        return self.fsr(dispersion, freq_thz) * (1.0 - ra) / (math.pi * math.sqrt(ra))

    def loaded_q(self, dispersion, freq_thz=None):
        if freq_thz is None:
            freq_thz = nm_to_thz(dispersion.lambda_ref)
        return np.asarray(freq_thz) * 1e3 / self.linewidth(dispersion, freq_thz)


@dataclass(frozen=True)
class DualRingDevice:
    """Two linearly uncoupled racetracks joined by a nonlinear coupler.

    ``crosstalk`` is the fraction of one heater's shift that leaks onto the
    other resonator.  ``drop_peak_db`` is the add-to-drop transmission on a
    resonator-two line.
    """

    resonator_one: RingResonator
    resonator_two: RingResonator
    dc_length: float = 18.0
    crosstalk: float = 0.0
    dispersion: DispersionModel = field(default_factory=DispersionModel)
    drop_peak_db: float = -16.0

    def __post_init__(self):
        shortest = min(self.resonator_one.round_trip_length,
                       self.resonator_two.round_trip_length)
        if not 0 < self.dc_length < shortest:
            raise DomainError("dc_length must be positive and shorter than both rings")
        if self.drop_peak_db > 0:
            raise DomainError("drop_peak_db must be <= 0 dB for a passive device")

    def resonator(self, resonator_id):
        if resonator_id == 1:
            return self.resonator_one
        if resonator_id == 2:
            return self.resonator_two
        raise ValueError(f"resonator_id must be 1 or 2, got {resonator_id!r}")


@dataclass(frozen=True)
class TransmissionSpectrum:
    wavelengths: np.ndarray
    through_db: np.ndarray
    drop_db: np.ndarray

    def __post_init__(self):
        for name in ("wavelengths", "through_db", "drop_db"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.wavelengths.size
        if self.through_db.size != n or self.drop_db.size != n:
            raise ValueError("spectrum arrays must have equal length")
        if n > 1 and np.any(np.diff(self.wavelengths) <= 0):
            raise ValueError("wavelength grid must be strictly increasing")


# -- formulas ---------------------------------------------------------------

def group_index(wavelength_nm, fsr_nm, length_um):
    """Group index from a measured FSR: lambda^2 / (FSR * L)."""
    if not (wavelength_nm > 0 and fsr_nm > 0 and length_um > 0):
        raise DomainError("wavelength, FSR and length must all be positive")
    return wavelength_nm ** 2 / (fsr_nm * length_um * 1e3)


def gvd_magnitude(D, wavelength_nm):
    """|beta_2| in ps^2/m for a dispersion parameter D in ps/(nm km)."""
    if not wavelength_nm > 0:
        raise DomainError("wavelength must be positive")
    lam = wavelength_nm * 1e-9
    beta2 = abs(dispersion_to_si(D)) * lam * lam / (2.0 * math.pi * C)
    return beta2 * 1e24


def gvd_signed(D, wavelength_nm, convention="textbook"):
    """beta_2 with an explicit sign convention.

    ``"textbook"`` uses beta_2 = -D lambda^2 / (2 pi c), so normal dispersion
    (D < 0) gives beta_2 > 0.  ``"same_sign_as_D"`` reports the magnitude with
    the sign of D, which is how some measurements quote the pair of values.
    """
    mag = gvd_magnitude(D, wavelength_nm)
    if convention == "textbook":
        return -math.copysign(mag, D) if D else 0.0
    if convention == "same_sign_as_D":
        return math.copysign(mag, D) if D else 0.0
    raise ValueError(f"unknown convention {convention!r}")


# -- resonance combs ----------------------------------------------------------

def _anchor_hz(resonator, dispersion):
    return C / (dispersion.lambda_ref * 1e-9) + resonator.resonance_anchor * 1e9


def _mode_phase(resonator, dispersion, f_hz):
    """Round-trip phase / 2 pi, measured from the anchor line (unshifted comb)."""
    f0 = _anchor_hz(resonator, dispersion)
    length = resonator.round_trip_length * 1e-6
    return length / C * dispersion.phase_integral(f_hz, f0)


def _solve_lines(resonator, dispersion, k):
    """Unshifted comb frequencies (Hz) for integer mode offsets ``k``."""
    k = np.asarray(k, dtype=float)
    f0 = _anchor_hz(resonator, dispersion)
    length = resonator.round_trip_length * 1e-6
    f = f0 + k * C / (dispersion.ng_at_frequency(f0) * length)
    for _ in range(60):
        step = (_mode_phase(resonator, dispersion, f) - k) / (
            length / C * dispersion.ng_at_frequency(f))
        f = f - step
        if np.all(np.abs(step) < _NEWTON_TOL_HZ):
            break
    return f


def resonance_frequencies(resonator, dispersion, band):
    """Comb lines (THz, increasing) whose wavelengths fall inside ``band`` (nm)."""
    lo_nm, hi_nm = band
    if hi_nm <= lo_nm:
        return np.empty(0)
    dispersion.check_band([lo_nm, hi_nm])
    shift = resonator.heater_shift * 1e9
    f_lo = C / (hi_nm * 1e-9) - shift
    f_hi = C / (lo_nm * 1e-9) - shift
    k_lo = math.ceil(_mode_phase(resonator, dispersion, f_lo))
    k_hi = math.floor(_mode_phase(resonator, dispersion, f_hi))
    if k_hi < k_lo:
        return np.empty(0)
    f = _solve_lines(resonator, dispersion, np.arange(k_lo, k_hi + 1)) + shift
    f = f[(f >= f_lo + shift) & (f <= f_hi + shift)]
    return f / 1e12


def nearest_resonance(resonator, dispersion, freq_thz):
    """Frequency (THz) of the comb line closest in mode number to ``freq_thz``."""
    f = np.asarray(freq_thz, dtype=float) * 1e12
    shift = resonator.heater_shift * 1e9
    k = np.rint(_mode_phase(resonator, dispersion, f - shift))
    uniq, inv = np.unique(k, return_inverse=True)
    lines = _solve_lines(resonator, dispersion, uniq) + shift
    return (lines[inv].reshape(f.shape)) / 1e12


def comb_line(resonator, dispersion, center_thz, index):
    """Line ``index`` counted from the unshifted line nearest ``center_thz``.

    Indexing ignores the heater so that a line keeps its label while it is
    tuned; the returned frequency (THz) does include the heater shift.
    """
    k0 = np.rint(_mode_phase(resonator, dispersion, center_thz * 1e12))
    f = _solve_lines(resonator, dispersion, k0 + np.asarray(index))
    return (f + resonator.heater_shift * 1e9) / 1e12


def lorentzian_response(detuning_ghz, fwhm_ghz):
    """Unit-peak Lorentzian."""
    x = 2.0 * np.asarray(detuning_ghz, dtype=float) / fwhm_ghz
    return 1.0 / (1.0 + x * x)


# -- transmission ---------------------------------------------------------------

def _line_response(resonator, dispersion, wavelength_nm):
    dispersion.check_band(wavelength_nm)
    f = nm_to_thz(wavelength_nm)
    f_line = nearest_resonance(resonator, dispersion, f)
    fwhm = resonator.linewidth(dispersion, f_line)
    return lorentzian_response((f - f_line) * 1e3, fwhm)


def through_transmission(device, wavelength_nm):
    """Input-to-through power transmission in dB (resonator-one dips)."""
    ring = device.resonator_one
    resp = _line_response(ring, device.dispersion, wavelength_nm)
    t = np.clip(1.0 - ring.extinction * resp, _FLOOR_LINEAR, 1.0)
    return 10.0 * np.log10(t)


def drop_transmission(device, wavelength_nm):
    """Add-to-drop power transmission in dB (resonator-two peaks).

    Depends only on resonator two and the shared dispersion, which is what
    linear uncoupling means for this port.
    """
    resp = _line_response(device.resonator_two, device.dispersion, wavelength_nm)
    t = np.clip(10.0 ** (device.drop_peak_db / 10.0) * resp, _FLOOR_LINEAR, 1.0)
    return 10.0 * np.log10(t)


def transmission_spectrum(device, wavelengths_nm):
    wl = np.asarray(wavelengths_nm, dtype=float)
    if wl.size == 0:
        return TransmissionSpectrum(wl, wl.copy(), wl.copy())
    return TransmissionSpectrum(
        wl, through_transmission(device, wl), drop_transmission(device, wl))


# -- tuning -----------------------------------------------------------------------

def apply_heater(device, resonator_id, shift_ghz):
    """Shift one resonator's comb by ``shift_ghz``; the other gets crosstalk*shift."""
    if resonator_id not in (1, 2):
        raise ValueError(f"resonator_id must be 1 or 2, got {resonator_id!r}")
    leak = device.crosstalk * shift_ghz
    one, two = device.resonator_one, device.resonator_two
    d1, d2 = (shift_ghz, leak) if resonator_id == 1 else (leak, shift_ghz)
    return replace(
        device,
        resonator_one=replace(one, heater_shift=one.heater_shift + d1),
        resonator_two=replace(two, heater_shift=two.heater_shift + d2),
    )


def align_resonator_two(device, pump_thz, order=3, tol_ghz=1e-9):
    """Move resonator two's anchor so lines +order and -order straddle the pump.

    Afterwards ``f(+order) + f(-order) = 2 f_pump`` with the heater at its
    current setting, i.e. the combs are energy-matched for that pair.
    """
    disp = device.dispersion
    ring = device.resonator_two
    for _ in range(50):
        f_hi, f_lo = comb_line(ring, disp, pump_thz, [order, -order])
        mismatch = (f_hi + f_lo - 2.0 * pump_thz) * 1e3
        if abs(mismatch) < tol_ghz:
            break
        ring = replace(ring, resonance_anchor=float(ring.resonance_anchor - mismatch / 2.0))
    return replace(device, resonator_two=ring)


# -- group index extraction ---------------------------------------------------------

def find_dips(wavelengths_nm, transmission_db, prominence_db=1.0):
    """Sub-grid dip centres: local minima refined by a 3-point parabola."""
    wl = np.asarray(wavelengths_nm, dtype=float)
    y_db = np.asarray(transmission_db, dtype=float)
    idx, _ = find_peaks(-y_db, prominence=prominence_db)
    idx = idx[(idx > 0) & (idx < wl.size - 1)]
    if idx.size == 0:
        return np.empty(0)
    y = 10.0 ** (y_db / 10.0)
    x0, x1, x2 = wl[idx - 1], wl[idx], wl[idx + 1]
    y0, y1, y2 = y[idx - 1], y[idx], y[idx + 1]
    num = (x1 - x0) ** 2 * (y1 - y2) - (x1 - x2) ** 2 * (y1 - y0)
    den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = x1 - 0.5 * num / den
    ok = np.isfinite(vertex) & (vertex > x0) & (vertex < x2)
    return np.where(ok, vertex, x1)


def extract_group_index_curve(spectrum, length_um, smoothing_window=3):
    """Group index vs wavelength from the through-port resonance spacing.

    Adjacent dips give one FSR each, evaluated at the pair midpoint; a centred
    moving average of ``smoothing_window`` points is applied afterwards (only
    fully covered points are kept).  Returns ``(wavelengths_nm, n_g)``.
    """
    if smoothing_window < 1:
        raise ValueError("smoothing_window must be >= 1")
    centers = find_dips(spectrum.wavelengths, spectrum.through_db)
    if centers.size < 3:
        raise InsufficientDataError(f"need >= 3 resonance dips, found {centers.size}")
    fsr = np.diff(centers)
    mid = 0.5 * (centers[:-1] + centers[1:])
    ng = mid ** 2 / (fsr * length_um * 1e3)
    if smoothing_window > ng.size:
        raise InsufficientDataError("smoothing window longer than the FSR series")
    kernel = np.full(smoothing_window, 1.0 / smoothing_window)
    if smoothing_window == 1:
        return mid, ng
    return np.convolve(mid, kernel, "valid"), np.convolve(ng, kernel, "valid")


def dispersion_from_curve(wavelengths_nm, ng):
    """D in ps/(nm km) from the linear slope of an n_g(lambda) curve."""
    slope_per_nm = np.polyfit(wavelengths_nm, ng, 1)[0]
    return slope_per_nm * 1e9 / C / 1e-6


# -- CSV ------------------------------------------------------------------------------

def write_spectrum_csv(path, spectrum):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPECTRUM_HEADER)
        for row in zip(spectrum.wavelengths, spectrum.through_db, spectrum.drop_db):
            w.writerow([f"{v:.12g}" for v in row])


def read_spectrum_csv(path):
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != SPECTRUM_HEADER:
            raise ValueError(f"unexpected spectrum header {header}")
        rows = np.array([[float(v) for v in r] for r in reader if r], dtype=float)
    if rows.size == 0:
        empty = np.empty(0)
        return TransmissionSpectrum(empty, empty.copy(), empty.copy())
    return TransmissionSpectrum(rows[:, 0], rows[:, 1], rows[:, 2])


# -- reference configuration ----------------------------------------------------------

REFERENCE_Q_ONE = 4.1e5
REFERENCE_Q_TWO = 3.7e5


def reference_device(dispersion=None, align_order=3):
    """Device calibrated to the measured chip: 138/130 um rings, 18 um coupler,
    loaded Q 4.1e5 / 3.7e5, critical coupling, -16 dB drop peaks, TM dispersion.

    Resonator one has a line exactly at lambda_ref (the pump); resonator two is
    anchored so its +/- ``align_order`` lines are energy-matched to it.
    """
    disp = dispersion or DispersionModel()
    one = RingResonator.from_loaded_q(138.0, REFERENCE_Q_ONE, disp)
    two = RingResonator.from_loaded_q(130.0, REFERENCE_Q_TWO, disp)
    dev = DualRingDevice(one, two, dc_length=18.0, dispersion=disp)
    return align_resonator_two(dev, float(nm_to_thz(disp.lambda_ref)), align_order)


def pump_wavelength(device):
    """Wavelength (nm) of the resonator-one line nearest lambda_ref."""
    f = nearest_resonance(device.resonator_one, device.dispersion,
                          nm_to_thz(device.dispersion.lambda_ref))
    return float(thz_to_nm(f))
