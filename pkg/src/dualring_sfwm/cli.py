"""Command-line front end.

    python -m dualring_sfwm <command> [--config PATH] [--seed N] [--out DIR]

Commands: spectrum, ng-curve, heater-scan, power-scan, simulate, correlate,
g2, reproduce, default-config.  Exit codes: 0 success, 2 usage or config
error, 3 runtime or data error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import correlator, device, experiment, sfwm
from .config import RunManifest, default_config_text, load_config
from .timetags import read_timetag_file, simulate_pair_streams, write_timetag_file

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o))


def _write_json(path, data):
    clean = _nan_to_none(json.loads(json.dumps(data, default=_json_default)))
    path.write_text(json.dumps(clean, indent=2, sort_keys=True) + "\n")


def _nan_to_none(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _nan_to_none(v) for k, v in o.items()}
    if isinstance(o, list):
        return [_nan_to_none(v) for v in o]
    return o


def _write_pairs(path, header, x, y):
    sfwm.write_scan_csv(path, header, x, y)


# -- commands ---------------------------------------------------------------------

def cmd_spectrum(cfg, args, out):
    band = tuple(args.band) if args.band else None
    spec = experiment.spectrum(cfg, band)
    path = out / "spectrum.csv"
    device.write_spectrum_csv(path, spec)
    return [path]


def cmd_ng_curve(cfg, args, out):
    wl, ng = experiment.ng_curve(cfg)
    path = out / "ng_curve.csv"
    _write_pairs(path, ("wavelength_nm", "group_index"), wl, ng)
    summary = out / "ng_curve.json"
    _write_json(summary, {"recovered_D_ps_nm_km": device.dispersion_from_curve(wl, ng)})
    return [path, summary]


def cmd_heater_scan(cfg, args, out):
    shifts, rates, fit = experiment.heater_curve(cfg, noisy=not args.noiseless)
    path = out / "heater_scan.csv"
    _write_pairs(path, sfwm.HEATER_SCAN_HEADER, shifts, rates)
    summary = out / "heater_scan.json"
    _write_json(summary, {"fwhm_ghz": fit.fwhm, "center_ghz": fit.params["center"],
                          "converged": fit.converged})
    return [path, summary]


def cmd_power_scan(cfg, args, out):
    powers, coinc, fit = experiment.power_curve(cfg, noisy=not args.noiseless)
    path = out / "power_scan.csv"
    _write_pairs(path, sfwm.POWER_SCAN_HEADER, powers, coinc)
    summary = out / "power_scan.json"
    _write_json(summary, {"exponent": fit.params["p"], "prefactor": fit.params["k"],
                          "points_used": fit.n_used})
    return [path, summary]


def cmd_simulate(cfg, args, out):
    ratio = args.splitter if args.splitter is not None else cfg.simulation.splitter_ratio
    sim = cfg.sim_config(duration=args.duration, splitter_ratio=ratio)
    streams = simulate_pair_streams(sim)
    path = out / "timetags.ttag"
    write_timetag_file(path, streams, sim.duration_ps)
    return [path]


def _load_tags(args):
    path = Path(args.tag_file)
    if not path.is_file():
        raise UsageError(f"time-tag file not found: {path}")
    return read_timetag_file(path)


def cmd_correlate(cfg, args, out):
    streams = _load_tags(args)
    missing = {args.a, args.b} - set(streams)
    if missing:
        raise RuntimeError(f"channels {sorted(missing)} absent from tag file")
    hist, _, summary = experiment.coincidence_summary(streams, cfg, args.a, args.b)
    path = out / "histogram.csv"
    correlator.write_histogram_csv(path, hist)
    js = out / "correlate.json"
    _write_json(js, summary)
    return [path, js]


def cmd_g2(cfg, args, out):
    streams = _load_tags(args)
    a = cfg.analysis
    need = {a.herald_channel, a.arm2_channel, a.arm3_channel}
    if need - set(streams):
        raise RuntimeError(f"channels {sorted(need - set(streams))} absent from tag file")
    g2, triples = experiment.g2_analysis([streams], cfg)
    path = out / "g2.csv"
    correlator.write_g2_csv(path, g2)
    hpath = out / "triple_histogram.csv"
    correlator.write_histogram_csv(hpath, triples)
    js = out / "g2.json"
    _write_json(js, experiment.g2_summary(g2))
    return [path, hpath, js]


def cmd_reproduce(cfg, args, out):
    """All six figure datasets plus a summary of the headline numbers."""
    outputs = []
    spec = experiment.spectrum(cfg)
    p = out / "fig1b_spectrum.csv"
    device.write_spectrum_csv(p, spec)
    outputs.append(p)

    wl, ng = experiment.ng_curve(cfg, spec)
    p = out / "fig1c_ng_curve.csv"
    _write_pairs(p, ("wavelength_nm", "group_index"), wl, ng)
    outputs.append(p)

    shifts, rates, hfit = experiment.heater_curve(cfg)
    p = out / "fig2_heater_scan.csv"
    _write_pairs(p, sfwm.HEATER_SCAN_HEADER, shifts, rates)
    outputs.append(p)

    powers, coinc, pfit = experiment.power_curve(cfg)
    p = out / "fig3_power_scan.csv"
    _write_pairs(p, sfwm.POWER_SCAN_HEADER, powers, coinc)
    outputs.append(p)

    g2, triples = experiment.g2_run(cfg, paper_scale=args.paper_scale)
    p = out / "fig4a_triple_histogram.csv"
    correlator.write_histogram_csv(p, triples)
    outputs.append(p)
    p = out / "fig4b_g2.csv"
    correlator.write_g2_csv(p, g2)
    outputs.append(p)

    _, _, coinc_summary = experiment.coincidence_run(cfg)
    dev = cfg.build_device()
    pump = cfg.build_pump(dev)
    kappa = cfg.kappa(dev)
    pred = sfwm.pair_generation_rate(dev, pump, cfg.sfwm.signal_line, cfg.sfwm.idler_line, kappa)
    single = sfwm.pair_generation_rate(dev, pump, cfg.sfwm.signal_line, cfg.sfwm.idler_line,
                                       kappa, geometry="single_ring")
    disp = dev.dispersion
    omega = 2 * math.pi * 0.5 * (pred.signal_frequency - pred.idler_frequency) * 1e12
    delta = sfwm.phase_mismatch(disp.D, pump.wavelength, omega)
    summary = {
        "gvd_magnitude_ps2_per_m": device.gvd_magnitude(disp.D, disp.lambda_ref),
        "recovered_D_ps_nm_km": device.dispersion_from_curve(wl, ng),
        "phase_mismatch_rad_per_m": delta,
        "phase_matching_efficiency": sfwm.phase_matching_efficiency(delta, dev.dc_length),
        "te_tm_detuning_ratio": sfwm.te_tm_detuning_ratio(disp.D, -1064.0),
        "reduction_factor": pred.reduction_factor,
        "pair_rate_hz": pred.generation_rate,
        "single_ring_rate_hz": single.generation_rate,
        "heater_fwhm_ghz": hfit.fwhm,
        "power_law_exponent": pfit.params["p"],
        "coincidences": coinc_summary,
        "g2": experiment.g2_summary(g2),
    }
    p = out / "summary.json"
    _write_json(p, summary)
    outputs.append(p)
    return outputs


COMMANDS = {
    "spectrum": cmd_spectrum,
    "ng-curve": cmd_ng_curve,
    "heater-scan": cmd_heater_scan,
    "power-scan": cmd_power_scan,
    "simulate": cmd_simulate,
    "correlate": cmd_correlate,
    "g2": cmd_g2,
    "reproduce": cmd_reproduce,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI experiment config")
    common.add_argument("--seed", type=int, help="override simulation seed")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--paper-scale", action="store_true",
                        help="use full-length (10 h) g2 integration")

    parser = argparse.ArgumentParser(prog="dualring_sfwm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("spectrum", parents=[common])
    p.add_argument("--band", type=float, nargs=2, metavar=("MIN_NM", "MAX_NM"))
    sub.add_parser("ng-curve", parents=[common])
    for name in ("heater-scan", "power-scan"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--noiseless", action="store_true")
    p = sub.add_parser("simulate", parents=[common])
    p.add_argument("--duration", type=float, help="seconds (default from config)")
    p.add_argument("--splitter", type=float, help="signal beam-splitter ratio")
    p = sub.add_parser("correlate", parents=[common])
    p.add_argument("tag_file")
    p.add_argument("--a", type=int, default=1, help="start channel")
    p.add_argument("--b", type=int, default=2, help="stop channel")
    p = sub.add_parser("g2", parents=[common])
    p.add_argument("tag_file")
    sub.add_parser("reproduce", parents=[common])
    sub.add_parser("default-config")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "default-config":
        sys.stdout.write(default_config_text())
        return EXIT_OK
    try:
        cfg = load_config(args.config) if args.config else load_config()
        if args.seed is not None:
            cfg.simulation.seed = args.seed
        cfg.build_device()
        args.out.mkdir(parents=True, exist_ok=True)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest = RunManifest.start(cfg, args.command)
    try:
        outputs = COMMANDS[args.command](cfg, args, args.out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    cfg_path = args.out / "config.ini"
    cfg_path.write_text(cfg.to_text())
    manifest.outputs = [p.name for p in outputs] + [cfg_path.name]
    manifest.write(args.out)
    return EXIT_OK
