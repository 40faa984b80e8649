"""Command-line surface: simulate, track, evaluate.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures.  Set MSGLMB_LOG to a level name to control logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateDensityError, ModelError, NumericalError
from .io import (
    load_scenario,
    read_measurements_json,
    read_tracks_csv,
    save_scenario,
    write_density_json,
    write_diagnostics_csv,
    write_evaluation_csv,
    write_measurements_json,
    write_tracks_csv,
    write_tracks_json,
)
from .labels import to_trajectories
from .metrics import ospa, ospa2
from .models import Scenario
from .simulate import generate_measurements, generate_truth, preset_scenario
from .trackers import TRACKER_MODES, GlmbFilter, MultiScanGlmbSmoother

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msglmb",
        description="Multi-object trajectory tracking: simulate, track, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate ground truth and measurements")
    _scenario_args(sim)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out-dir", default=".", help="directory for the emitted files")

    trk = sub.add_parser("track", help="run a tracker over measurements")
    _scenario_args(trk)
    trk.add_argument("--measurements", help="measurement JSON (omit with --runs)")
    trk.add_argument("--mode", choices=TRACKER_MODES, default="smooth-batch")
    trk.add_argument("--components", type=int, default=1000)
    trk.add_argument("--gibbs-iters", type=int, default=100)
    trk.add_argument("--seed", type=int, default=0)
    trk.add_argument("--estimate", default="best-component", help="estimate extraction mode")
    trk.add_argument("--out-dir", default=".")
    trk.add_argument("--runs", type=int, default=0, help="Monte-Carlo repetitions (simulate+track+evaluate)")
    trk.add_argument("--jobs", type=int, default=1, help="parallel workers for --runs")
    _ospa_args(trk)

    ev = sub.add_parser("evaluate", help="score estimated tracks against truth")
    ev.add_argument("--truth", required=True, help="truth track CSV")
    ev.add_argument("--estimate", required=True, help="estimated track CSV")
    ev.add_argument("--scenario", help="scenario JSON; its H projects states before scoring")
    ev.add_argument("--out", default="evaluation.csv")
    _ospa_args(ev)
    return parser


def _scenario_args(cmd):
    group = cmd.add_mutually_exclusive_group(required=True)
    group.add_argument("--scenario", help="scenario JSON path")
    group.add_argument("--preset", choices=("desk", "v-v-2018"), help="built-in scenario")


def _ospa_args(cmd):
    cmd.add_argument("--ospa-c", type=float, default=100.0)
    cmd.add_argument("--ospa-p", type=float, default=1.0)
    cmd.add_argument("--window", type=int, default=10)


def _resolve_scenario(args) -> Scenario:
    if getattr(args, "preset", None):
        return preset_scenario(args.preset)
    return load_scenario(args.scenario)


def cmd_simulate(args) -> int:
    scenario = _resolve_scenario(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    truth = generate_truth(scenario, rng)
    measurements = generate_measurements(truth, scenario, rng)
    save_scenario(scenario, out / "scenario.json")
    d = scenario.d if truth.d is None else truth.d
    write_tracks_csv(to_trajectories(truth), out / "truth.csv", d)
    write_measurements_json(measurements, out / "measurements.json")
    logger.info("wrote scenario.json, truth.csv, measurements.json to %s", out)
    return 0


def _make_tracker(scenario: Scenario, args, seed: int):
    common = dict(
        scenario=scenario,
        n_components=args.components,
        gibbs_sweeps=args.gibbs_iters,
        estimate_mode=args.estimate,
        random_state=seed,
    )
    if args.mode == "filter":
        return GlmbFilter(**common)
    return MultiScanGlmbSmoother(
        mode="batch" if args.mode == "smooth-batch" else "recursive", **common
    )


def _track_once(scenario: Scenario, measurements, args, seed: int, out: Path):
    tracker = _make_tracker(scenario, args, seed)
    tracker.fit(measurements)
    write_tracks_csv(tracker.tracks_, out / "tracks.csv", scenario.d)
    write_tracks_json(tracker.tracks_, out / "tracks.json", scenario.d)
    write_density_json(tracker.posterior_, out / "density.json")
    write_diagnostics_csv(tracker.diagnostics_, out / "diagnostics.csv")
    return tracker


def cmd_track(args) -> int:
    scenario = _resolve_scenario(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.runs and args.runs > 0:
        return _track_monte_carlo(scenario, args, out)
    if not args.measurements:
        raise ConfigError("track needs --measurements (or --runs for Monte-Carlo mode)")
    measurements = read_measurements_json(args.measurements)
    for j, Z in enumerate(measurements, start=1):
        if Z.size and Z.shape[1] != scenario.z_dim:
            raise ConfigError(
                f"scan {j}: measurement dimension {Z.shape[1]} does not match "
                f"scenario z_dim {scenario.z_dim}"
            )
    _track_once(scenario, measurements, args, args.seed, out)
    logger.info("wrote tracks.csv, density.json, diagnostics.csv to %s", out)
    return 0


def _positions(tracks: dict, H: np.ndarray) -> dict:
    return {
        lab: {scan: H @ state for scan, state in per_scan.items()}
        for lab, per_scan in tracks.items()
    }


def _evaluate_tracks(est: dict, tru: dict, scans, args):
    per_scan_ospa = {}
    for k in scans:
        X = np.array([trk[k] for trk in est.values() if k in trk])
        Y = np.array([trk[k] for trk in tru.values() if k in trk])
        per_scan_ospa[k] = ospa(X, Y, args.ospa_c, args.ospa_p)
    rows2 = ospa2(est, tru, args.ospa_c, args.ospa_p, args.window, scans)
    rows = []
    for (k, o2, o2l, o2c) in rows2:
        o, ol, oc = per_scan_ospa[k]
        rows.append((k, o, ol, oc, o2, o2l, o2c))
    return rows


def _run_one_mc(payload):
    from .models import scenario_from_dict

    scenario_dict, args_dict, run_index, seed, out_dir = payload
    scenario = scenario_from_dict(scenario_dict)
    args = argparse.Namespace(**args_dict)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    truth = generate_truth(scenario, rng)
    measurements = generate_measurements(truth, scenario, rng)
    d = scenario.d if truth.d is None else truth.d
    write_tracks_csv(to_trajectories(truth), out / "truth.csv", d)
    write_measurements_json(measurements, out / "measurements.json")
    tracker = _track_once(scenario, measurements, args, seed, out)
    H = scenario.model.measurement.observation
    est = _positions(_segments_to_tracks(tracker.tracks_), H)
    tru = _positions(_segments_to_tracks(to_trajectories(truth)), H)
    rows = _evaluate_tracks(est, tru, range(1, scenario.scans + 1), args)
    write_evaluation_csv(rows, out / "evaluation.csv")
    return rows


def _segments_to_tracks(segments) -> dict:
    """Label-keyed {scan: state} tables; fragments of one label merge with
    their gaps preserved, matching what the track CSV round-trips to."""
    tracks: dict = {}
    for seg in segments:
        per_scan = tracks.setdefault(seg.label, {})
        for scan in range(seg.start, seg.end + 1):
            per_scan[scan] = seg.state_at(scan)
    return tracks


def _track_monte_carlo(scenario: Scenario, args, out: Path) -> int:
    from .models import scenario_to_dict

    seeds = np.random.SeedSequence(args.seed).spawn(args.runs)
    args_dict = vars(args).copy()
    payloads = [
        (
            scenario_to_dict(scenario),
            args_dict,
            i,
            int(seeds[i].generate_state(1)[0]),
            str(out / f"run_{i:03d}"),
        )
        for i in range(args.runs)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            all_rows = list(pool.map(_run_one_mc, payloads))
    else:
        all_rows = [_run_one_mc(p) for p in payloads]
    stacked = np.array([[row[1:] for row in rows] for rows in all_rows])
    mean = stacked.mean(axis=0)
    agg = [(k,) + tuple(mean[k - 1]) for k in range(1, scenario.scans + 1)]
    write_evaluation_csv(agg, out / "evaluation_mean.csv")
    logger.info("wrote %d run directories and evaluation_mean.csv to %s", args.runs, out)
    return 0


def cmd_evaluate(args) -> int:
    tru_raw = read_tracks_csv(args.truth)
    est_raw = read_tracks_csv(args.estimate)
    if args.scenario:
        scenario = load_scenario(args.scenario)
        H = scenario.model.measurement.observation
        tru = _positions(tru_raw, H)
        est = _positions(est_raw, H)
    else:
        tru, est = tru_raw, est_raw
    scans = sorted({s for trk in tru.values() for s in trk})
    if not scans:
        raise ConfigError(f"{args.truth}: no truth rows to evaluate against")
    rows = _evaluate_tracks(est, tru, range(min(scans), max(scans) + 1), args)
    write_evaluation_csv(rows, args.out)
    logger.info("wrote %s", args.out)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MSGLMB_LOG", "WARNING").upper())
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "track":
            return cmd_track(args)
        return cmd_evaluate(args)
    except (ConfigError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, DegenerateDensityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
