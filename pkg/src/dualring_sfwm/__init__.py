"""Dual-racetrack SFWM photon-pair source: device model, pair-rate model,
time-tag simulation and coincidence / heralded-g2 analysis."""

__version__ = "0.1.0"

from .device import (
    DispersionModel,
    DualRingDevice,
    RingResonator,
    TransmissionSpectrum,
    apply_heater,
    drop_transmission,
    extract_group_index_curve,
    group_index,
    gvd_magnitude,
    reference_device,
    resonance_frequencies,
    through_transmission,
)
from .sfwm import (
    PairRatePrediction,
    PumpConfig,
    detected_rates,
    heater_scan,
    pair_generation_rate,
    phase_matching_efficiency,
    phase_mismatch,
    power_scan,
    reference_pump,
)
from .timetags import DetectorChain, SimConfig, Splitter, TimeTagStream, simulate_pair_streams
from .correlator import (
    CoincidenceResult,
    CorrelationHistogram,
    GTwoResult,
    coincidences,
    cross_correlation_histogram,
    heralded_g2,
    klyshko_efficiency,
    triple_coincidence_histogram,
)
from .fitting import Curve, FitResult, fit_gaussian, fit_lorentzian, fit_power_law
