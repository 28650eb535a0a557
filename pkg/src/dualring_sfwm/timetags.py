"""Monte-Carlo time-tag streams for the pair source and their file formats.

Pairs are emitted as a Poisson process.  Each photon of a pair survives its
arm independently, picks up Gaussian timing jitter from its detector and is
rounded to an integer picosecond.  Dark counts are an independent Poisson
process per detector.  Dead-time pruning is applied last.

Random numbers come from numpy's Philox (counter-based) bit generator, with
one substream per (seed, chunk, role) so every channel is reproducible on
its own.

Channel numbering follows the correlation setup: 1 is the idler (herald in
the g2 measurement), 2 the signal, and 2/3 the two outputs of the signal
beam splitter when one is configured.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .units import PS_PER_S, db_to_linear

IDLER_CHANNEL = 1
SIGNAL_CHANNEL = 2
SPLIT_CHANNEL = 3

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
# two detectors at 68.2 ps each give a 227 ps FWHM coincidence peak
DEFAULT_JITTER_PS = 227.0 / FWHM_PER_SIGMA / math.sqrt(2.0)
# placeholder, not a measured value
DEFAULT_DARK_RATE = 200.0

MAGIC = b"TTAGV001"
_HEADER = struct.Struct("<8sQQ")
RECORD_DTYPE = np.dtype([("timestamp", "<u8"), ("channel", "<u4"), ("reserved", "<u4")])

_ROLE_EMISSION = 0
_ROLE_SURVIVAL = 1
_ROLE_SPLIT = 2
_ROLE_JITTER = 3
_ROLE_DARK = 4


@dataclass(frozen=True, eq=False)
class TimeTagStream:
    """Sorted integer-picosecond detection times of one channel in [0, duration)."""

    channel: int
    tags: np.ndarray
    duration: int

    def __post_init__(self):
        tags = np.array(self.tags, dtype=np.int64, copy=True).ravel()
        tags.setflags(write=False)
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "duration", int(self.duration))
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if tags.size:
            if np.any(np.diff(tags) < 0):
                raise ValueError("tags must be sorted ascending")
            if tags[0] < 0 or tags[-1] >= self.duration:
                raise ValueError("tags must lie in [0, duration)")

    def __len__(self):
        return self.tags.size

    def __eq__(self, other):
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return (self.channel == other.channel and self.duration == other.duration
                and np.array_equal(self.tags, other.tags))

    def shifted(self, offset_ps):
        """Same stream delayed by ``offset_ps`` (duration grows accordingly)."""
        offset_ps = int(offset_ps)
        return TimeTagStream(self.channel, self.tags + offset_ps, self.duration + offset_ps)

    def rate(self):
        return self.tags.size / (self.duration / PS_PER_S) if self.duration else math.nan


@dataclass(frozen=True)
class DetectorChain:
    """Everything between the chip and one time-tagger channel."""

    efficiency_db: float = 0.0
    jitter_sigma: float = DEFAULT_JITTER_PS
    dark_rate: float = DEFAULT_DARK_RATE
    dead_time: float = 0.0

    def __post_init__(self):
        if self.efficiency_db < 0 or self.jitter_sigma < 0 or self.dark_rate < 0:
            raise ValueError("efficiency_db, jitter_sigma and dark_rate must be >= 0")
        if self.dead_time < 0:
            raise ValueError("dead_time must be >= 0")

    @property
    def transmission(self):
        return float(db_to_linear(self.efficiency_db))


@dataclass(frozen=True)
class Splitter:
    ratio: float = 0.5
    channels: tuple[int, int] = (SIGNAL_CHANNEL, SPLIT_CHANNEL)

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError("splitter ratio must lie in [0, 1]")


@dataclass(frozen=True)
class SimConfig:
    """Pair source plus detection.  ``duration`` is seconds.

    When ``splitter`` is set the signal arm feeds two detectors, both with
    ``signal_chain``'s jitter, dark rate and dead time; the arm loss is
    applied before the split.
    """

    pair_rate: float
    duration: float
    seed: int = 0
    signal_chain: DetectorChain = field(default_factory=lambda: DetectorChain(9.0))
    idler_chain: DetectorChain = field(default_factory=lambda: DetectorChain(5.7))
    splitter: Splitter | None = None

    def __post_init__(self):
        if self.pair_rate < 0:
            raise ValueError("pair_rate must be >= 0")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")

    @property
    def duration_ps(self):
        return int(round(self.duration * PS_PER_S))


def _rng(seed, chunk, role, sub=0):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chunk), role, int(sub)))
    return np.random.Generator(np.random.Philox(ss))


def apply_dead_time(tags, dead_time_ps):
    """Drop every tag closer than ``dead_time_ps`` to the previous kept tag."""
    tags = np.asarray(tags, dtype=np.int64)
    if dead_time_ps <= 0 or tags.size < 2:
        return tags
    close = np.flatnonzero(np.diff(tags) < dead_time_ps)
    if close.size == 0:
        return tags
    keep = np.ones(tags.size, dtype=bool)
    last = tags[0]
    start = int(close[0])
    last = tags[start]
    for i in range(start + 1, tags.size):
        if tags[i] - last < dead_time_ps:
            keep[i] = False
        else:
            last = tags[i]
    return tags[keep]


def _detect(photon_times, chain, channel, duration_ps, seed, chunk):
    jitter = _rng(seed, chunk, _ROLE_JITTER, channel)
    t = photon_times
    if chain.jitter_sigma > 0 and t.size:
        t = t + jitter.normal(0.0, chain.jitter_sigma, t.size)
    t = np.rint(t).astype(np.int64)
    t = t[(t >= 0) & (t < duration_ps)]
    dark = _rng(seed, chunk, _ROLE_DARK, channel)
    n_dark = dark.poisson(chain.dark_rate * duration_ps / PS_PER_S)
    darks = dark.integers(0, duration_ps, n_dark, dtype=np.int64) if n_dark else np.empty(0, np.int64)
    tags = np.sort(np.concatenate([t, darks]), kind="stable")
    return TimeTagStream(channel, apply_dead_time(tags, chain.dead_time), duration_ps)


def _simulate(config, chunk=0):
    T = config.duration_ps
    seed = config.seed
    emission = _rng(seed, chunk, _ROLE_EMISSION)
    n_pairs = emission.poisson(config.pair_rate * config.duration)
    times = np.sort(emission.uniform(0.0, T, n_pairs))

    survival = _rng(seed, chunk, _ROLE_SURVIVAL)
    u = survival.random((2, n_pairs))
    signal = times[u[0] < config.signal_chain.transmission]
    idler = times[u[1] < config.idler_chain.transmission]

    out = {IDLER_CHANNEL: _detect(idler, config.idler_chain, IDLER_CHANNEL, T, seed, chunk)}
    if config.splitter is None:
        out[SIGNAL_CHANNEL] = _detect(signal, config.signal_chain, SIGNAL_CHANNEL, T, seed, chunk)
    else:
        route = _rng(seed, chunk, _ROLE_SPLIT).random(signal.size) < config.splitter.ratio
        ch_a, ch_b = config.splitter.channels
        out[ch_a] = _detect(signal[route], config.signal_chain, ch_a, T, seed, chunk)
        out[ch_b] = _detect(signal[~route], config.signal_chain, ch_b, T, seed, chunk)
    return out


def simulate_pair_streams(config):
    """Channel -> ``TimeTagStream`` for one run; bit-identical for a fixed seed."""
    return _simulate(config)


def iter_pair_stream_chunks(config, chunk_duration):
    """Yield independent ``chunk_duration``-second blocks covering ``config.duration``.

    Each block has its own local time base and RNG substream, so results
    summed over blocks are reproducible and memory stays bounded.  Photons
    jittered across a block edge are dropped (a fraction of order
    jitter / chunk_duration).
    """
    if not chunk_duration > 0:
        raise ValueError("chunk_duration must be > 0")
    n_full = int(config.duration // chunk_duration)
    remainder = config.duration - n_full * chunk_duration
    lengths = [chunk_duration] * n_full
    if remainder > 1e-12 * config.duration:
        lengths.append(remainder)
    for i, length in enumerate(lengths):
        yield _simulate(replace(config, duration=length), chunk=i)


def split_stream(stream, ratio, seed, channels=None):
    """Route each tag to output A with probability ``ratio``, otherwise to B."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must lie in [0, 1]")
    ch_a, ch_b = channels or (stream.channel, stream.channel)
    route = _rng(seed, 0, _ROLE_SPLIT, stream.channel).random(stream.tags.size) < ratio
    return (TimeTagStream(ch_a, stream.tags[route], stream.duration),
            TimeTagStream(ch_b, stream.tags[~route], stream.duration))


def merge_streams(streams, channel=None):
    """Sorted union of already-sorted streams with a common duration.

    A stable sort of the concatenation is a run-aware merge (timsort), so
    the cost is that of a k-way merge.
    """
    streams = list(streams)
    if not streams:
        raise ValueError("need at least one stream")
    durations = {s.duration for s in streams}
    if len(durations) != 1:
        raise ValueError(f"streams have different durations: {sorted(durations)}")
    tags = np.sort(np.concatenate([s.tags for s in streams]), kind="stable")
    return TimeTagStream(streams[0].channel if channel is None else channel,
                         tags, durations.pop())


# -- calibration helpers ---------------------------------------------------------

def coincidence_capture(window_ps, sigma_a, sigma_b):
    """Fraction of a Gaussian coincidence peak inside a centred window."""
    sigma = math.hypot(sigma_a, sigma_b)
    if sigma == 0:
        return 1.0
    return math.erf(window_ps / 2.0 / (math.sqrt(2.0) * sigma))


def background_for_car(pair_rate, signal_chain, idler_chain, window_ps, target_car):
    """Equal per-channel background rate (Hz) giving ``target_car``.

    Closed form from raw = R eta_s eta_i capture + S_s S_i w and
    accidentals = S_s S_i w, solved for a common additive rate.
    """
    if target_car <= 1:
        raise ValueError("target_car must exceed 1")
    w = window_ps / PS_PER_S
    eta_s, eta_i = signal_chain.transmission, idler_chain.transmission
    cap = coincidence_capture(window_ps, signal_chain.jitter_sigma, idler_chain.jitter_sigma)
    product = pair_rate * eta_s * eta_i * cap / (w * (target_car - 1.0))
    a, b = pair_rate * eta_s, pair_rate * eta_i
    # (a + d)(b + d) = product
    disc = (a + b) ** 2 - 4.0 * (a * b - product)
    d = (-(a + b) + math.sqrt(disc)) / 2.0
    return max(d, 0.0)


# -- file formats ------------------------------------------------------------------

def write_timetag_file(path, streams, duration_ps=None):
    """Binary records (u64 ps, u32 channel, u32 zero) after a 24-byte header."""
    streams = list(streams.values()) if isinstance(streams, dict) else list(streams)
    if duration_ps is None:
        duration_ps = max((s.duration for s in streams), default=0)
    if streams:
        ts = np.concatenate([s.tags for s in streams])
        ch = np.concatenate([np.full(len(s), s.channel, dtype=np.uint32) for s in streams])
    else:
        ts = np.empty(0, np.int64)
        ch = np.empty(0, np.uint32)
    order = np.lexsort((ch, ts))
    rec = np.zeros(ts.size, dtype=RECORD_DTYPE)
    rec["timestamp"] = ts[order]
    rec["channel"] = ch[order]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rec.size, int(duration_ps)))
        fh.write(rec.tobytes())


def read_timetag_file(path, channels=None):
    """Channel -> ``TimeTagStream`` from the binary format."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("file too short for a time-tag header")
    magic, count, duration = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    body = len(data) - _HEADER.size
    if body != count * RECORD_DTYPE.itemsize:
        raise ValueError(f"header says {count} records, file holds {body / RECORD_DTYPE.itemsize}")
    rec = np.frombuffer(data, dtype=RECORD_DTYPE, count=count, offset=_HEADER.size)
    return _group(rec["timestamp"].astype(np.int64), rec["channel"].astype(np.int64),
                  duration, channels)


def read_timetag_header(path):
    with open(path, "rb") as fh:
        magic, count, duration = _HEADER.unpack(fh.read(_HEADER.size))
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    return count, duration


def read_timetag_csv(path, duration_ps=None, channels=None):
    """Channel -> stream from CSV with header ``channel,timestamp_ps``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["channel", "timestamp_ps"]:
            raise ValueError(f"unexpected CSV header {header}")
        rows = np.array([[int(a), int(b)] for a, b in reader], dtype=np.int64).reshape(-1, 2)
    ts, ch = rows[:, 1], rows[:, 0]
    if duration_ps is None:
        duration_ps = int(ts.max()) + 1 if ts.size else 0
    return _group(ts, ch, duration_ps, channels)


def write_timetag_csv(path, streams):
    streams = list(streams.values()) if isinstance(streams, dict) else list(streams)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "timestamp_ps"])
        for s in streams:
            for t in s.tags:
                w.writerow([s.channel, int(t)])


def _group(ts, ch, duration, channels):
    wanted = np.unique(ch) if channels is None else channels
    out = {}
    for c in wanted:
        sel = np.sort(ts[ch == c], kind="stable")
        out[int(c)] = TimeTagStream(int(c), sel, duration)
    return out
