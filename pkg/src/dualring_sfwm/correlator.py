"""Correlation of sorted time-tag streams.

Every routine counts *all* qualifying pairs (or triples) rather than doing
nearest-neighbour matching, the way histogramming time taggers do.  Delays
are ``t_b - t_a`` and windows are half-open, ``[low, high)``.

The core is a windowed merge-join: for each tag in ``a`` the matching range
of ``b`` is located with ``searchsorted`` and the pairs are expanded with
index arithmetic, so the cost is O(n log m + pairs in range).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .units import PS_PER_S

DEFAULT_BIN_WIDTH = 32
DEFAULT_WINDOW = 448
DEFAULT_ACCIDENTAL_OFFSET = 10_000

HISTOGRAM_HEADER = ("delay_ps", "counts")
G2_HEADER = ("t3_ps", "g2", "sigma", "n123")


def _tags(stream):
    return stream.tags if hasattr(stream, "tags") else np.asarray(stream, dtype=np.int64)


def _duration(*streams):
    d = [getattr(s, "duration", None) for s in streams]
    d = [x for x in d if x is not None]
    return max(d) if d else None


def _check_sorted(x):
    if x.size > 1 and np.any(x[1:] < x[:-1]):
        raise ValueError("time tags must be sorted ascending")


def _window_bounds(a, b, lo, hi):
    """Index ranges [start, stop) of ``b`` with lo <= b - a_i < hi (integer lo/hi)."""
    start = np.searchsorted(b, a + lo, side="left")
    stop = np.searchsorted(b, a + hi, side="left")
    return start, stop


def pair_delays(a, b, lo, hi):
    """All pairs with ``lo <= t_b - t_a < hi``: returns (a_index, delay)."""
    a, b = _tags(a), _tags(b)
    start, stop = _window_bounds(a, b, lo, hi)
    counts = stop - start
    total = int(counts.sum())
    a_idx = np.repeat(np.arange(a.size), counts)
    first = np.repeat(start - (np.cumsum(counts) - counts), counts)
    b_idx = first + np.arange(total)
    return a_idx, b[b_idx] - a[a_idx]


def count_pairs(a, b, lo, hi):
    a, b = _tags(a), _tags(b)
    start, stop = _window_bounds(a, b, lo, hi)
    return int((stop - start).sum())


def _int_edges(low, high):
    # integer delays d satisfy low <= d < high  <=>  ceil(low) <= d < ceil(high)
    return math.ceil(low), math.ceil(high)


@dataclass(frozen=True, eq=False)
class CorrelationHistogram:
    bin_width: int
    delay_min: int
    delay_max: int
    counts: np.ndarray

    @property
    def edges(self):
        return np.arange(self.delay_min, self.delay_max + 1, self.bin_width)

    @property
    def centers(self):
        return self.edges[:-1] + self.bin_width / 2.0

    def __add__(self, other):
        if (self.bin_width, self.delay_min, self.delay_max) != (
                other.bin_width, other.delay_min, other.delay_max):
            raise ValueError("histograms have different binning")
        return CorrelationHistogram(self.bin_width, self.delay_min, self.delay_max,
                                    self.counts + other.counts)

    def __eq__(self, other):
        return (isinstance(other, CorrelationHistogram)
                and (self.bin_width, self.delay_min, self.delay_max)
                == (other.bin_width, other.delay_min, other.delay_max)
                and np.array_equal(self.counts, other.counts))


def _validate_binning(bin_width, delay_range):
    lo, hi = (int(v) for v in delay_range)
    bin_width = int(bin_width)
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if hi <= lo or (hi - lo) % bin_width:
        raise ValueError("delay range must be a positive multiple of bin_width")
    return bin_width, lo, hi


def cross_correlation_histogram(a, b, bin_width=DEFAULT_BIN_WIDTH,
                                delay_range=(-512, 512), check=True):
    """Histogram of ``t_b - t_a`` over ``delay_range`` (ps, half-open)."""
    bin_width, lo, hi = _validate_binning(bin_width, delay_range)
    ta, tb = _tags(a), _tags(b)
    if check:
        _check_sorted(ta)
        _check_sorted(tb)
    _, d = pair_delays(ta, tb, lo, hi)
    counts = np.bincount((d - lo) // bin_width, minlength=(hi - lo) // bin_width)
    return CorrelationHistogram(bin_width, lo, hi, counts.astype(np.int64))


def sharded_cross_correlation_histogram(a, b, bin_width=DEFAULT_BIN_WIDTH,
                                        delay_range=(-512, 512), n_shards=4,
                                        max_workers=None):
    """Same as ``cross_correlation_histogram`` computed on time shards of ``a``.

    Each shard sees the slice of ``b`` it can reach (its span widened by the
    delay range), so the summed result equals the single pass exactly.
    """
    bin_width, lo, hi = _validate_binning(bin_width, delay_range)
    ta, tb = _tags(a), _tags(b)
    _check_sorted(ta)
    _check_sorted(tb)
    cuts = np.linspace(0, ta.size, n_shards + 1).astype(int)

    def work(k):
        part = ta[cuts[k]:cuts[k + 1]]
        if part.size == 0:
            return np.zeros((hi - lo) // bin_width, dtype=np.int64)
        j0 = np.searchsorted(tb, part[0] + lo, side="left")
        j1 = np.searchsorted(tb, part[-1] + hi, side="left")
        return cross_correlation_histogram(part, tb[j0:j1], bin_width, (lo, hi),
                                           check=False).counts

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        parts = list(pool.map(work, range(n_shards)))
    return CorrelationHistogram(bin_width, lo, hi, np.sum(parts, axis=0))


@dataclass(frozen=True)
class CoincidenceResult:
    raw_coincidences: int
    accidentals: int
    net: int
    car: float
    window: float
    integration: float  # s
    singles: tuple[int, int]

    def rate(self, which="net"):
        return getattr(self, {"net": "net", "raw": "raw_coincidences",
                              "accidentals": "accidentals"}[which]) / self.integration


def coincidences(a, b, window=DEFAULT_WINDOW, accidental_offset=DEFAULT_ACCIDENTAL_OFFSET,
                 delay=0, integration=None):
    """Windowed coincidences with accidentals from an equal window far away.

    ``delay`` centres the signal window (cable/path skew); the accidental
    window sits at ``delay + accidental_offset``.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    if abs(accidental_offset) <= window:
        raise ValueError("accidental window overlaps the coincidence window")
    ta, tb = _tags(a), _tags(b)
    raw = count_pairs(ta, tb, *_int_edges(delay - window / 2, delay + window / 2))
    acc_c = delay + accidental_offset
    acc = count_pairs(ta, tb, *_int_edges(acc_c - window / 2, acc_c + window / 2))
    if integration is None:
        dur = _duration(a, b)
        integration = dur / PS_PER_S if dur else math.nan
    car = raw / acc if acc > 0 else math.nan
    return CoincidenceResult(raw, acc, raw - acc, car, float(window), float(integration),
                             (int(ta.size), int(tb.size)))


def klyshko_efficiency(n_coincidences, n_heralds):
    """N_si / N_s."""
    if n_heralds <= 0:
        raise ZeroDivisionError("Klyshko efficiency undefined without heralds")
    return n_coincidences / n_heralds


@dataclass(frozen=True, eq=False)
class GTwoResult:
    """Heralded g2(t3) with the counts behind it.

    Points whose denominator vanishes are NaN; ``sigma`` is NaN where no
    triple was seen.
    """

    t3_delays: np.ndarray
    n1: int
    n12: int
    n13: np.ndarray
    n123: np.ndarray

    @property
    def g2_values(self):
        return g2_from_counts(self.n1, self.n12, self.n13, self.n123)

    @property
    def sigma(self):
        g2 = self.g2_values
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.n123 > 0, g2 / np.sqrt(self.n123), np.nan)

    def __add__(self, other):
        if not np.array_equal(self.t3_delays, other.t3_delays):
            raise ValueError("t3 grids differ")
        return GTwoResult(self.t3_delays, self.n1 + other.n1, self.n12 + other.n12,
                          self.n13 + other.n13, self.n123 + other.n123)

    def at(self, t3):
        i = int(np.argmin(np.abs(self.t3_delays - t3)))
        return float(self.g2_values[i]), float(self.sigma[i])


def g2_from_counts(n1, n12, n13, n123):
    """N123 N1 / (N12 N13), NaN where the denominator is zero."""
    n13 = np.asarray(n13, dtype=float)
    n123 = np.asarray(n123, dtype=float)
    den = float(n12) * n13
    with np.errstate(divide="ignore", invalid="ignore"):
        g2 = np.where(den > 0, n123 * float(n1) / den, np.nan)
    return float(g2) if g2.ndim == 0 else g2


def heralded_g2(herald, arm2, arm3, pair_window=DEFAULT_WINDOW, t3_grid=(0,), check=True):
    """Conditional g2 of arms 2 and 3 given a herald, with t1 = t2 = 0.

    Arm 2 is counted in ``pair_window`` centred on the herald; arm 3 in the
    same-width window centred at ``t3`` after the herald.
    """
    h, t2, t3s = _tags(herald), _tags(arm2), _tags(arm3)
    if check:
        for x in (h, t2, t3s):
            _check_sorted(x)
    grid = np.asarray(t3_grid, dtype=np.int64)
    lo, hi = _int_edges(-pair_window / 2, pair_window / 2)

    s2, e2 = _window_bounds(h, t2, lo, hi)
    n2 = e2 - s2
    n12 = int(n2.sum())

    # herald-arm3 delays over the span of the grid, sorted once
    _, d13 = pair_delays(h, t3s, int(grid.min()) + lo, int(grid.max()) + hi)
    d13.sort()
    n13 = (np.searchsorted(d13, grid + hi, side="left")
           - np.searchsorted(d13, grid + lo, side="left")).astype(np.int64)

    hit = n2 > 0
    hh, w = h[hit], n2[hit]
    n123 = np.empty(grid.size, dtype=np.int64)
    for k, t in enumerate(grid):
        s3, e3 = _window_bounds(hh, t3s, t + lo, t + hi)
        n123[k] = int((w * (e3 - s3)).sum())
    return GTwoResult(grid, int(h.size), n12, n13, n123)


def triple_coincidence_histogram(herald, arm2, arm3, bin_width=DEFAULT_BIN_WIDTH,
                                 delay_range=(-2048, 2048), pair_window=DEFAULT_WINDOW):
    """Triples binned by ``t3 - t2``.

    A triple is a herald, an arm-2 tag inside ``pair_window`` around it and
    any arm-3 tag whose delay from that arm-2 tag lies in ``delay_range``.
    """
    bin_width, lo, hi = _validate_binning(bin_width, delay_range)
    h, t2, t3s = _tags(herald), _tags(arm2), _tags(arm3)
    p_lo, p_hi = _int_edges(-pair_window / 2, pair_window / 2)
    h_idx, d12 = pair_delays(h, t2, p_lo, p_hi)
    arm2_times = h[h_idx] + d12
    _, d23 = pair_delays(arm2_times, t3s, lo, hi)
    counts = np.bincount((d23 - lo) // bin_width, minlength=(hi - lo) // bin_width)
    return CorrelationHistogram(bin_width, lo, hi, counts.astype(np.int64))


# -- CSV ------------------------------------------------------------------------------

def write_histogram_csv(path, hist):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTOGRAM_HEADER)
        for e, c in zip(hist.edges[:-1], hist.counts):
            w.writerow([int(e), int(c)])


def write_g2_csv(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(G2_HEADER)
        for t, g, s, n in zip(result.t3_delays, result.g2_values, result.sigma, result.n123):
            w.writerow([int(t), _fmt_missing(g), _fmt_missing(s), int(n)])


def _fmt_missing(v):
    # undefined points stay blank rather than becoming 0 or 1
    return f"{v:.12g}" if math.isfinite(v) else ""
