"""Physical constants and unit conversions used across the package."""

import numpy as np

C = 299_792_458.0  # m/s

PS_PER_S = 1e12


def nm_to_thz(wavelength_nm):
    return C / (np.asarray(wavelength_nm, dtype=float) * 1e-9) / 1e12


def thz_to_nm(freq_thz):
    return C / (np.asarray(freq_thz, dtype=float) * 1e12) * 1e9


def dispersion_to_si(d_ps_nm_km):
    """ps/(nm km) -> s/m^2."""
    return d_ps_nm_km * 1e-12 / (1e-9 * 1e3)


def db_to_linear(loss_db):
    """Power transmission for a loss given in positive dB."""
    return 10.0 ** (-np.asarray(loss_db, dtype=float) / 10.0)
