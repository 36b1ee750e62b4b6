"""Command-line driver: ``squintsense {beampattern,sense,sweep}``.

Exit codes: 0 success, 1 runtime or I/O error, 2 usage or parse error,
3 user not in the sensed range.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from .errors import ConfigError, NotInRangeError, SensingError
from .experiments import emit_results, run_scenario, snr_to_noise
from .frontend import FrontendDesign, design_frontend
from .scenario import ScenarioFileError, dump_scenario, parse_frequency, read_scenario
from .sensing import (
    NoiseModel,
    SubcarrierGrid,
    choose_split_range,
    run_split_session,
    run_squint_session,
)
from .wideband import SystemConfig, UserTruth, array_factor

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_NOT_IN_RANGE = 0, 1, 2, 3


def _frequency(text):
    try:
        return parse_frequency(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _add_geometry(p, n_default):
    p.add_argument("--m", type=int, default=128, help="antenna count M")
    p.add_argument("--p", type=float, default=1.0, help="spacing ratio P, d = P * lambda_c / 2")
    p.add_argument("--fc", type=_frequency, default=30e9, help="carrier frequency (e.g. 30GHz)")
    p.add_argument("--bw", type=_frequency, default=6e9, help="bandwidth F (e.g. 6GHz)")
    p.add_argument("--n", type=int, default=n_default, help="subcarrier count N")
    p.add_argument("--theta0", type=float, default=None, help="initial sweep angle (deg)")
    p.add_argument("--thetac", type=float, default=None, help="termination sweep angle (deg)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squintsense", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    bp = sub.add_parser("beampattern", help="tabulate array gain over subcarriers x angles")
    _add_geometry(bp, n_default=7)
    bp.add_argument("--angle-grid", type=int, default=1801, help="number of angles spanning [-90, 90] deg")
    bp.add_argument("--out", default="-", help="CSV destination ('-' for stdout)")

    se = sub.add_parser("sense", help="run one sensing session")
    _add_geometry(se, n_default=1024)
    se.add_argument("--method", choices=("squint", "split"), required=True)
    se.add_argument("--user-angle", type=float, required=True, help="true user AoD (deg)")
    se.add_argument("--snr", type=float, default=math.inf, help="SNR in dB ('inf' for noiseless)")
    se.add_argument("--seed", type=int, default=0)

    sw = sub.add_parser("sweep", help="run a Monte-Carlo scenario file")
    sw.add_argument("scenario", help="YAML scenario file")
    sw.add_argument("--dry-run", action="store_true", help="validate and print the resolved scenario")
    sw.add_argument("--workers", type=int, default=1, help="worker processes for trials")
    return parser


def _config(args, parser) -> SystemConfig:
    try:
        return SystemConfig(args.m, args.p, args.fc, args.bw, args.n)
    except ValueError as exc:
        parser.error(str(exc))


def _design(args, config, parser) -> FrontendDesign:
    theta0 = -80.0 if args.theta0 is None else args.theta0
    try:
        if args.thetac is None:
            # fixed phase shifters, no delay lines
            s0 = math.sin(math.radians(theta0))
            return FrontendDesign(config, config.spacing_over_wavelength * s0, 0.0, theta0,
                                  math.degrees(math.asin(s0 / (1 + config.fractional_bandwidth))))
        return design_frontend(config, theta0, args.thetac)
    except ValueError as exc:
        parser.error(str(exc))


def cmd_beampattern(args, parser) -> int:
    config = _config(args, parser)
    if args.angle_grid < 2:
        parser.error("--angle-grid must be >= 2")
    design = _design(args, config, parser)
    freqs = SubcarrierGrid.for_config(config).frequencies
    angles = np.linspace(-90.0, 90.0, args.angle_grid)
    psi = config.spacing_over_wavelength * np.sin(np.radians(angles))
    cycles = (design.phi - freqs[:, None] * design.ttd_slope
              - psi[None, :] * (1 + freqs[:, None] / config.carrier_hz))
    gain = np.abs(array_factor(cycles, config.antenna_count))
    try:
        fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    except OSError as exc:
        print(f"error: cannot open {args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("freq_hz", "angle_deg", "gain"))
        for i, f in enumerate(freqs):
            for j, a in enumerate(angles):
                writer.writerow((repr(float(f)), repr(float(a)), repr(float(gain[i, j]))))
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_sense(args, parser) -> int:
    config = _config(args, parser)
    if args.method == "split" and config.spacing_ratio <= 1:
        parser.error("--method split needs --p > 1")
    if args.method == "squint" and config.spacing_ratio != 1:
        parser.error("--method squint needs --p 1")
    try:
        user = UserTruth(args.user_angle)
    except ValueError as exc:
        parser.error(str(exc))
    variance = 0.0 if math.isinf(args.snr) and args.snr > 0 else snr_to_noise(config, args.snr)
    noise = NoiseModel(variance, args.seed)
    grid = SubcarrierGrid.for_config(config)
    print(f"truth_deg: {user.aod_deg:.6f}")
    try:
        if args.method == "squint":
            theta0 = -80.0 if args.theta0 is None else args.theta0
            thetac = 80.0 if args.thetac is None else args.thetac
            session = run_squint_session(config, theta0, thetac, user, grid, noise)
            print(f"sensing_range_deg: [{theta0:g}, {thetac:g}]")
            print(f"feedback_index: {session.report.subcarrier_index}")
            print(f"candidates_deg: [{session.estimate_deg:.6f}]")
        else:
            if (args.theta0 is None) != (args.thetac is None):
                parser.error("give both --theta0 and --thetac, or neither")
            theta0, thetac = args.theta0, args.thetac
            if theta0 is None:
                theta0, thetac = choose_split_range(config)
            print(f"sensing_range_deg: [{theta0:g}, {thetac:g}]")
            session = run_split_session(config, theta0, thetac, user, grid, noise)
            print(f"validation_range_deg: [{session.validation_design.theta0_deg:.6f}, "
                  f"{session.validation_design.thetac_deg:.6f}]")
            print("feedback_index: " + ", ".join(str(r.subcarrier_index) for r in session.reports))
            for i, c in enumerate(session.candidates):
                print(f"candidates_deg[{i}]: [" + ", ".join(f"{a:.6f}" for a in c.angles_deg) + "]")
    except NotInRangeError as exc:
        print(f"not in range: {exc}", file=sys.stderr)
        return EXIT_NOT_IN_RANGE
    except (SensingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"estimate_deg: {session.estimate_deg:.6f}")
    print(f"blocks_used: {session.blocks_used}")
    return EXIT_OK


def cmd_sweep(args, parser) -> int:
    try:
        sf = read_scenario(args.scenario)
    except ScenarioFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot read {args.scenario}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    if args.dry_run:
        sys.stdout.write(dump_scenario(sf))
        return EXIT_OK
    progress = lambda msg: print(msg, file=sys.stderr, flush=True)  # noqa: E731
    try:
        table = run_scenario(sf.scenario, workers=args.workers, progress=progress)
        parent = os.path.dirname(sf.output)
        if parent:
            os.makedirs(parent, exist_ok=True)
        emit_results(table, sf.output)
    except (OSError, ConfigError, SensingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


COMMANDS = {"beampattern": cmd_beampattern, "sense": cmd_sense, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return COMMANDS[args.command](args, parser)


if __name__ == "__main__":
    sys.exit(main())
