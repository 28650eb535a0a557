"""
Coincidences, accidentals and CAR from simulated time tags
==========================================================

Simulate a minute of detector clicks at the reference operating point:
lossy arms, Gaussian timing jitter, dark counts and a background level
chosen so the coincidence-to-accidental ratio lands near 237.  The
correlator then histograms the delays, counts a 448 ps window and an
equal window 10 ns away, and the histogram peak gets a Gaussian fit.
"""

import argparse

from dualring_sfwm import correlator, fitting
from dualring_sfwm.config import ExperimentConfig
from dualring_sfwm.timetags import simulate_pair_streams

parser = argparse.ArgumentParser()
parser.add_argument("--seconds", type=float, default=60.0)
args = parser.parse_args()

cfg = ExperimentConfig()

sim = cfg.sim_config(duration=args.seconds, splitter_ratio=None)
print(f"pair rate {sim.pair_rate:.3g} Hz, extra background {cfg.background():.0f} Hz per arm")
streams = simulate_pair_streams(sim)
idler, signal = streams[1], streams[2]
print(f"singles: idler {idler.rate():.0f} Hz, signal {signal.rate():.0f} Hz")

res = correlator.coincidences(idler, signal)
print(f"raw {res.raw_coincidences}, accidentals {res.accidentals}, net {res.net}")
print(f"net coincidence rate {res.rate():.0f} Hz, CAR {res.car:.0f}")

hist = correlator.cross_correlation_histogram(idler, signal, 32, (-1024, 1024))
fit = fitting.fit_gaussian(hist.centers, hist.counts)
print(f"coincidence peak FWHM {fit.fwhm:.0f} ps")

# Klyshko efficiency with each arm as the herald
print(f"eta_K (signal heralds) {correlator.klyshko_efficiency(res.net, len(signal)):.3%}")
print(f"eta_K (idler heralds)  {correlator.klyshko_efficiency(res.net, len(idler)):.3%}")
