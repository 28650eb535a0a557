from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualring_sfwm import device as dv
from dualring_sfwm.exceptions import DomainError, InsufficientDataError, ModelRangeError
from dualring_sfwm.fitting import fit_lorentzian
from dualring_sfwm.units import C, nm_to_thz, thz_to_nm

# Independent oracle values, evaluated by hand with explicit SI conversions.
NG_138_405 = 4.298622293791376  # 1550**2 / (4.05 * 138e3)
GVD_32000 = 40.814342383839794  # 0.032 s/m^2 * (1550e-9)^2 / (2 pi c) in ps^2/m
GVD_1064 = 1.3570768842626735
FSR_FLAT_GHZ = 505.21142231209984  # c / (4.3 * 138e-6)


@pytest.fixture(scope="module")
def ref():
    return dv.reference_device()


@pytest.fixture(scope="module")
def flat():
    return dv.DispersionModel(D=0.0)


# -- closed-form helpers ----------------------------------------------------------

def test_group_index_oracle():
    ng = dv.group_index(1550.0, 4.05, 138.0)
    assert ng == pytest.approx(NG_138_405, rel=1e-12)
    assert abs(ng - 4.30) <= 0.01


@given(st.floats(1000, 2000), st.floats(10, 1000))
def test_group_index_algebraic_inverse(wl, length):
    fsr = wl ** 2 / (2.0 * length * 1e3)
    assert dv.group_index(wl, fsr, length) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("args", [(0, 4, 138), (1550, -1, 138), (1550, 4, 0)])
def test_group_index_domain(args):
    with pytest.raises(DomainError):
        dv.group_index(*args)


def test_gvd_magnitude_values():
    assert dv.gvd_magnitude(-32_000, 1550) == pytest.approx(GVD_32000, rel=1e-12)
    assert dv.gvd_magnitude(-32_000, 1550) == pytest.approx(40.4, rel=0.02)
    assert dv.gvd_magnitude(0, 1550) == 0.0
    assert dv.gvd_magnitude(-1064, 1550) == pytest.approx(GVD_1064, rel=1e-12)
    assert dv.gvd_magnitude(-1064, 1550) == pytest.approx(1.33, rel=0.05)
    with pytest.raises(DomainError):
        dv.gvd_magnitude(-32_000, 0)


def test_gvd_sign_conventions():
    assert dv.gvd_signed(-32_000, 1550) > 0
    assert dv.gvd_signed(-32_000, 1550, "same_sign_as_D") < 0
    assert dv.gvd_signed(0, 1550) == 0.0
    with pytest.raises(ValueError):
        dv.gvd_signed(1, 1550, "other")


# -- dispersion model ------------------------------------------------------------

def test_dispersion_slope_matches_D():
    disp = dv.DispersionModel()
    wl = np.array([1540.0, 1560.0])
    slope_per_m = np.diff(disp.ng(wl))[0] / 20e-9
    # dn_g/dlambda = c D with D = -0.032 s/m^2
    assert slope_per_m == pytest.approx(C * -0.032, rel=1e-12)


def test_dispersion_band_and_validation():
    disp = dv.DispersionModel()
    with pytest.raises(ModelRangeError):
        disp.ng(1300.0)
    with pytest.raises(DomainError):
        dv.DispersionModel(ng_ref=0.9)
    with pytest.raises(DomainError):
        dv.DispersionModel(lambda_ref=1800.0)
    with pytest.raises(DomainError):
        dv.DispersionModel(D=-1e6)  # n_g crosses 1 inside the band


def test_phase_integral_matches_quadrature():
    disp = dv.DispersionModel(dD_dlambda=50.0)
    f0 = C / 1550e-9
    f1 = C / 1520e-9
    grid = np.linspace(f0, f1, 20001)
    vals = disp.ng_at_frequency(grid)
    numeric = np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid))
    assert disp.phase_integral(f1, f0) == pytest.approx(numeric, rel=1e-9)


# -- resonator --------------------------------------------------------------------

def test_from_loaded_q_round_trip(flat):
    ring = dv.RingResonator.from_loaded_q(138.0, 4.1e5, flat)
    assert ring.self_coupling == pytest.approx(ring.round_trip_amplitude, rel=1e-12)
    assert ring.loaded_q(flat) == pytest.approx(4.1e5, rel=1e-9)
    assert ring.extinction == pytest.approx(1.0, abs=1e-12)


def test_resonator_validation():
    with pytest.raises(DomainError):
        dv.RingResonator(0, 1, 0.1)
    with pytest.raises(DomainError):
        dv.RingResonator(100, 1, 1.0)
    with pytest.raises(DomainError):
        dv.RingResonator(100, -1, 0.1)


def test_linewidth_at_q_370k():
    disp = dv.DispersionModel()
    ring = dv.RingResonator.from_loaded_q(130.0, 3.7e5, disp)
    f = float(nm_to_thz(1550.0))
    assert ring.linewidth(disp, f) == pytest.approx(f * 1e3 / 3.7e5, rel=1e-9)
    assert ring.linewidth(disp, 193.4) == pytest.approx(0.5227, rel=2e-3)


def test_lorentzian_response_half_width():
    assert dv.lorentzian_response(0.0, 0.5) == 1.0
    assert dv.lorentzian_response(0.25, 0.5) == pytest.approx(0.5)


# -- comb ---------------------------------------------------------------------------

def test_flat_comb_uniform_fsr(flat):
    ring = dv.RingResonator(138.0, 1.0, 0.05)
    f = dv.resonance_frequencies(ring, flat, (1500, 1600))
    spacing = np.diff(f) * 1e3
    assert np.all(np.diff(f) > 0)
    assert np.allclose(spacing, FSR_FLAT_GHZ, rtol=1e-9)
    assert spacing.mean() == pytest.approx(505.6, rel=2e-3)


def test_dispersive_comb_spacing_is_local_fsr():
    disp = dv.DispersionModel()
    ring = dv.RingResonator(138.0, 1.0, 0.05)
    f = dv.resonance_frequencies(ring, disp, (1500, 1600))
    spacing = np.diff(f)
    assert np.all(np.diff(spacing) != 0)
    # D < 0: n_g falls with wavelength, so FSR rises with wavelength, i.e. falls with f
    assert np.all(np.diff(spacing) < 0)
    mid = 0.5 * (f[1:] + f[:-1])
    assert np.allclose(spacing * 1e3, ring.fsr(disp, mid), rtol=1e-4)


def test_comb_periodic_in_anchor():
    disp = dv.DispersionModel()
    ring = dv.RingResonator(138.0, 1.0, 0.05)
    f = dv.resonance_frequencies(ring, disp, (1500, 1600))
    i0 = int(np.argmin(np.abs(f - nm_to_thz(1550))))
    one_fsr = (f[i0 + 1] - f[i0]) * 1e3
    moved = dv.resonance_frequencies(replace(ring, resonance_anchor=one_fsr), disp, (1500, 1600))
    assert moved.size == f.size
    assert np.allclose(moved, f, atol=1e-9)


def test_empty_band(flat):
    ring = dv.RingResonator(138.0, 1.0, 0.05)
    assert dv.resonance_frequencies(ring, flat, (1550, 1550)).size == 0
    assert dv.resonance_frequencies(ring, flat, (1552.0, 1552.001)).size == 0


def test_comb_band_check(flat):
    ring = dv.RingResonator(138.0, 1.0, 0.05)
    with pytest.raises(ModelRangeError):
        dv.resonance_frequencies(ring, flat, (1300, 1500))


# -- transmission ------------------------------------------------------------------

def test_critical_coupling_dip_depth(ref):
    pump = dv.pump_wavelength(ref)
    assert dv.through_transmission(ref, pump) <= -20.0


def test_off_resonance_passthrough(ref):
    disp = ref.dispersion
    one = ref.resonator_one
    f = dv.nearest_resonance(one, disp, nm_to_thz(1550))
    lw = one.linewidth(disp, f)
    wl = thz_to_nm(f + 10 * lw / 1e3)
    assert dv.through_transmission(ref, wl) >= -0.1


def test_loaded_q_from_dip_width(ref):
    pump = dv.pump_wavelength(ref)
    wl = np.linspace(pump - 0.02, pump + 0.02, 801)
    dip = 1.0 - 10 ** (dv.through_transmission(ref, wl) / 10.0)
    fit = fit_lorentzian(wl, dip)
    assert pump / fit.fwhm == pytest.approx(4.1e5, rel=0.10)


def test_drop_peak_and_isolation(ref):
    disp = ref.dispersion
    two = ref.resonator_two
    f = dv.nearest_resonance(two, disp, nm_to_thz(1550))
    assert dv.drop_transmission(ref, thz_to_nm(f)) == pytest.approx(-16.0, abs=1.0)
    fsr = two.fsr(disp, f) / 1e3
    assert dv.drop_transmission(ref, thz_to_nm(f + fsr / 2)) <= -40.0


def test_drop_peak_tracks_heater(ref):
    disp = ref.dispersion
    before = dv.nearest_resonance(ref.resonator_two, disp, 193.4)
    after = dv.nearest_resonance(dv.apply_heater(ref, 2, 3.7).resonator_two, disp, 193.4)
    assert (after - before) * 1e3 == pytest.approx(3.7, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(1400.0, 1700.0))
def test_transmission_bounded_by_zero_db(wl):
    dev = dv.reference_device()
    assert dv.through_transmission(dev, wl) <= 0.0
    assert dv.drop_transmission(dev, wl) <= 0.0


def test_drop_independent_of_resonator_one(ref):
    wl = np.linspace(1545, 1555, 20001)
    other = replace(ref, resonator_one=replace(ref.resonator_one, bus_power_coupling=0.3))
    assert np.max(np.abs(dv.drop_transmission(other, wl) - dv.drop_transmission(ref, wl))) == 0.0


def test_transmission_range_error(ref):
    with pytest.raises(ModelRangeError):
        dv.through_transmission(ref, 1200.0)


# -- heater ------------------------------------------------------------------------------

def test_apply_heater_identity_and_additivity(ref):
    assert dv.apply_heater(ref, 2, 0.0) == ref
    back = dv.apply_heater(dv.apply_heater(ref, 2, 2.5), 2, -2.5)
    assert back.resonator_two.heater_shift == 0.0
    assert back == ref


def test_apply_heater_crosstalk(ref):
    moved = dv.apply_heater(ref, 2, 3.0)
    assert moved.resonator_one == ref.resonator_one
    leaky = replace(ref, crosstalk=0.1)
    moved = dv.apply_heater(leaky, 2, 3.0)
    assert moved.resonator_one.heater_shift == pytest.approx(0.3)
    with pytest.raises(ValueError):
        dv.apply_heater(ref, 3, 1.0)


def test_heater_leaves_linewidth_and_depth(ref):
    moved = dv.apply_heater(ref, 1, 4.0)
    disp = ref.dispersion
    f0 = dv.nearest_resonance(ref.resonator_one, disp, 193.4)
    f1 = dv.nearest_resonance(moved.resonator_one, disp, 193.4)
    assert (f1 - f0) * 1e3 == pytest.approx(4.0, abs=1e-6)
    assert moved.resonator_one.linewidth(disp, f1) == pytest.approx(
        ref.resonator_one.linewidth(disp, f0), rel=1e-6)
    assert dv.through_transmission(moved, thz_to_nm(f1)) == pytest.approx(
        dv.through_transmission(ref, thz_to_nm(f0)), abs=1e-6)


def test_alignment_is_energy_matched(ref):
    disp = ref.dispersion
    fp = nm_to_thz(dv.pump_wavelength(ref))
    hi, lo = dv.comb_line(ref.resonator_two, disp, fp, [3, -3])
    assert (hi + lo - 2 * fp) * 1e3 == pytest.approx(0.0, abs=1e-6)


# -- group index extraction ---------------------------------------------------------------

def _spectrum(dev, lo=1500.0, hi=1600.0, step_pm=1.0):
    n = int(round((hi - lo) / (step_pm * 1e-3))) + 1
    return dv.transmission_spectrum(dev, np.linspace(lo, hi, n))


def test_round_trip_recovers_D(ref):
    wl, ng = dv.extract_group_index_curve(_spectrum(ref), 138.0)
    assert dv.dispersion_from_curve(wl, ng) == pytest.approx(-32_000, rel=0.05)
    # pointwise agreement with the generating model
    assert np.allclose(ng, ref.dispersion.ng(wl), rtol=0.01)


def test_flat_dispersion_gives_constant_ng():
    dev = dv.reference_device(dv.DispersionModel(D=0.0))
    wl, ng = dv.extract_group_index_curve(_spectrum(dev), 138.0)
    assert np.ptp(ng) / ng.mean() < 1e-3
    assert 4.0 < ng.mean() < 4.5


def test_window_one_is_unsmoothed(ref):
    spec = _spectrum(ref, 1540, 1560)
    wl1, ng1 = dv.extract_group_index_curve(spec, 138.0, 1)
    c = dv.find_dips(spec.wavelengths, spec.through_db)
    mid = 0.5 * (c[1:] + c[:-1])
    assert np.array_equal(wl1, mid)
    assert np.allclose(ng1, mid ** 2 / (np.diff(c) * 138e3), rtol=1e-15)
    wl3, ng3 = dv.extract_group_index_curve(spec, 138.0, 3)
    assert ng3.size == ng1.size - 2
    assert ng3[0] == pytest.approx(ng1[:3].mean())


def test_too_few_dips(ref):
    with pytest.raises(InsufficientDataError):
        dv.extract_group_index_curve(_spectrum(ref, 1549, 1551), 138.0)


def test_spectrum_csv_round_trip(tmp_path, ref):
    spec = _spectrum(ref, 1549, 1551, 5.0)
    path = tmp_path / "s.csv"
    dv.write_spectrum_csv(path, spec)
    assert path.read_text().splitlines()[0] == "wavelength_nm,through_db,drop_db"
    back = dv.read_spectrum_csv(path)
    assert np.allclose(back.wavelengths, spec.wavelengths, rtol=1e-11)
    assert np.allclose(back.through_db, spec.through_db, rtol=1e-11)
