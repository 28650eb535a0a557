"""End-to-end pipelines: one function per measured dataset.

These glue the device, rate, simulation, correlation and fitting modules
together the way the bench measurement does.  All randomness is drawn from
the config seed, so every function is deterministic for a given config.
"""

from __future__ import annotations

import math

import numpy as np

from . import correlator, device, fitting, sfwm
from .timetags import IDLER_CHANNEL, SIGNAL_CHANNEL, iter_pair_stream_chunks, simulate_pair_streams


def _rng(cfg, tag):
    return np.random.default_rng(np.random.SeedSequence(cfg.simulation.seed, spawn_key=(tag,)))


def spectrum(cfg, band=None):
    dev = cfg.build_device()
    a = cfg.analysis
    lo, hi = band or (a.band_min_nm, a.band_max_nm)
    n = int(round((hi - lo) / (a.grid_step_pm * 1e-3))) + 1 if hi > lo else 0
    return device.transmission_spectrum(dev, np.linspace(lo, hi, n))


def ng_curve(cfg, spec=None):
    spec = spec if spec is not None else spectrum(cfg)
    return device.extract_group_index_curve(spec, cfg.device.ring_one_length_um,
                                            cfg.analysis.smoothing_window)


def heater_curve(cfg, noisy=True):
    """Coincidence rate vs resonator-two shift, plus a Lorentzian fit."""
    dev = cfg.build_device()
    a = cfg.analysis
    n = int(round(2 * a.heater_span_ghz / a.heater_step_ghz)) + 1
    shifts = np.linspace(-a.heater_span_ghz, a.heater_span_ghz, n)
    shifts, rates = sfwm.heater_scan(dev, cfg.build_pump(dev), shifts, cfg.sfwm.signal_line,
                                     cfg.sfwm.idler_line, cfg.kappa(dev),
                                     cfg.detectors.signal_loss_db, cfg.detectors.idler_loss_db)
    if noisy:
        t = a.heater_integration_s
        rates = _rng(cfg, 2).poisson(rates * t) / t
    return shifts, rates, fitting.fit_lorentzian(shifts, rates)


def power_curve(cfg, noisy=True, rng=None):
    dev = cfg.build_device()
    a = cfg.analysis
    powers = np.linspace(a.power_min_mw, a.power_max_mw, a.power_points)
    powers, coinc = sfwm.power_scan(
        dev, powers, cfg.build_pump(dev), cfg.sfwm.signal_line, cfg.sfwm.idler_line,
        cfg.kappa(dev), cfg.detectors.signal_loss_db, cfg.detectors.idler_loss_db,
        a.power_integration_s if noisy else None, rng if rng is not None else _rng(cfg, 3))
    return powers, coinc, fitting.fit_power_law(powers, coinc)


def coincidence_summary(streams, cfg, a_channel=IDLER_CHANNEL, b_channel=SIGNAL_CHANNEL):
    """Histogram, windowed coincidences, CAR, Klyshko and peak width."""
    a = cfg.analysis
    sa, sb = streams[a_channel], streams[b_channel]
    r = a.histogram_range_ps
    hist = correlator.cross_correlation_histogram(sa, sb, a.bin_width_ps, (-r, r))
    res = correlator.coincidences(sa, sb, a.window_ps, a.accidental_offset_ps)
    fit = fitting.fit_gaussian(hist.centers, hist.counts)
    n_b = len(sb)
    n_a = len(sa)
    summary = {
        "raw_coincidences": res.raw_coincidences,
        "accidentals": res.accidentals,
        "net_coincidences": res.net,
        "coincidence_rate_hz": res.rate("net"),
        "car": res.car,
        "singles": {str(a_channel): n_a, str(b_channel): n_b},
        "klyshko_herald_b": correlator.klyshko_efficiency(res.net, n_b) if n_b else math.nan,
        "klyshko_herald_a": correlator.klyshko_efficiency(res.net, n_a) if n_a else math.nan,
        "peak_fwhm_ps": fit.fwhm,
        "integration_s": res.integration,
    }
    return hist, res, summary


def coincidence_run(cfg):
    streams = simulate_pair_streams(cfg.sim_config(splitter_ratio=None))
    return coincidence_summary(streams, cfg)


def g2_grid(cfg):
    a = cfg.analysis
    return np.arange(-a.g2_t3_span_ps, a.g2_t3_span_ps + 1, a.g2_t3_step_ps)


def g2_analysis(streams_iter, cfg):
    """Accumulate heralded g2 and the triple histogram over stream blocks."""
    a = cfg.analysis
    grid = g2_grid(cfg)
    g2 = triples = None
    for block in streams_iter:
        h, s2, s3 = block[a.herald_channel], block[a.arm2_channel], block[a.arm3_channel]
        g = correlator.heralded_g2(h, s2, s3, a.window_ps, grid)
        t = correlator.triple_coincidence_histogram(
            h, s2, s3, a.triple_bin_ps, (-a.triple_range_ps, a.triple_range_ps), a.window_ps)
        g2 = g if g2 is None else g2 + g
        triples = t if triples is None else triples + t
    return g2, triples


def g2_run(cfg, paper_scale=False):
    sim = cfg.simulation
    duration = sim.g2_paper_scale_s if paper_scale else sim.g2_duration_s
    conf = cfg.sim_config(duration=duration, splitter_ratio=sim.splitter_ratio or 0.5)
    return g2_analysis(iter_pair_stream_chunks(conf, min(sim.chunk_s, duration)), cfg)


def g2_summary(g2, far_ps=5_000):
    zero, zero_sigma = g2.at(0)
    far = np.abs(g2.t3_delays) >= far_ps
    n123 = int(g2.n123[far].sum())
    pooled = correlator.g2_from_counts(g2.n1, g2.n12, g2.n13[far].sum(), n123)
    return {
        "g2_zero": zero,
        "g2_zero_sigma": zero_sigma,
        "g2_far_pooled": pooled,
        "g2_far_pooled_sigma": pooled / math.sqrt(n123) if n123 else math.nan,
        "n1": g2.n1,
        "n12": g2.n12,
        "n123_zero": int(g2.n123[np.argmin(np.abs(g2.t3_delays))]),
    }
