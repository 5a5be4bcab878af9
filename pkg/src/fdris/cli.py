"""Command-line interface.

Subcommands::

    fdris validate --scenario run.yaml
    fdris solve    --preset paper-sec5 --scheme fdris --out out/
    fdris pattern  --preset paper-sec5 --out out/
    fdris baselines --preset paper-sec5 --out out/
    fdris sweep    --scenario sweep.yaml --replicates 10 --workers 2 --out out/

Exit codes: 0 success, 2 invalid input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .channel import realize_channels
from .experiments import export_results, run_sweep, write_trace_csv
from .pattern import GridSpec, compute_pattern
from .rates import Problem
from .scenario import ScenarioError, load_scenario, preset_scenario
from .solver import SCHEMES, SolverError, solve_scheme

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3

log = logging.getLogger("fdris")


def _add_common(p, scheme=True):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", type=Path, help="YAML or JSON scenario file")
    src.add_argument("--preset", default=None, help="named preset (default paper-sec5)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    if scheme:
        p.add_argument("--scheme", choices=SCHEMES, default="fdris")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdris", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file and print the resolved values")
    _add_common(p, scheme=False)

    p = sub.add_parser("solve", help="run one solve and write the solution and trace")
    _add_common(p)
    p.add_argument("--replicate", type=int, default=0, help="channel replicate index")

    p = sub.add_parser("pattern", help="solve, then export the distance-angle energy pattern")
    _add_common(p)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--d-min", type=float, default=20.0)
    p.add_argument("--d-max", type=float, default=100.0)
    p.add_argument("--n-dist", type=int, default=200)
    p.add_argument("--n-angle", type=int, default=180)
    p.add_argument("--azimuth", type=float, default=90.0, help="degrees")

    p = sub.add_parser("baselines", help="compare all schemes on one channel realization")
    _add_common(p, scheme=False)
    p.add_argument("--replicate", type=int, default=0)

    p = sub.add_parser("sweep", help="paired Monte-Carlo sweep from the experiment block")
    _add_common(p, scheme=False)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--schemes", nargs="+", choices=SCHEMES, default=None)
    return parser


def _scenario(args):
    if args.scenario is not None:
        scn = load_scenario(args.scenario)
    else:
        scn = preset_scenario(args.preset or "paper-sec5")
    if args.seed is not None:
        scn = replace(scn, config=replace(scn.config, seed=args.seed))
    return scn


def _out_dir(args, scn) -> Path:
    out = args.out or Path(scn.experiment.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _pairs(a):
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _solution_dict(state, problem_rates, scheme, trace) -> dict:
    return {
        "scheme": scheme,
        "wsr": state.objective,
        "rates": list(map(float, problem_rates)),
        "iterations": len(trace),
        "power_w": state.power,
        "beamformers": _pairs(state.w),
        "phases": _pairs(state.phases),
        "frequencies_hz": state.f.tolist(),
        "delays_s": state.delays.tolist(),
    }


def _solve_one(scn, scheme, replicate):
    cfg = scn.config
    channels = realize_channels(cfg, cfg.layout(), replicate=replicate)
    state, trace = solve_scheme(scheme, cfg, channels, scn.solver)
    problem = Problem(cfg, channels, harmonic=0 if scheme == "ris" else None)
    return channels, state, trace, problem.rates(state)


def cmd_validate(args) -> int:
    scn = _scenario(args)
    cfg = scn.config
    print(f"scenario {scn.name or '-'}: valid")
    print(f"  L={cfg.L} ({cfg.shape.R}x{cfg.shape.S} of {cfg.shape.M}x{cfg.shape.N}), "
          f"I={cfg.shape.I}, N_t={cfg.n_tx}, K={cfg.K}, seed={cfg.seed}")
    print(f"  P_max={10 * math.log10(cfg.p_max) + 30 if cfg.p_max > 0 else float('-inf'):.1f} dBm, "
          f"noise={10 * math.log10(cfg.noise_power) + 30:.1f} dBm, "
          f"f in [{cfg.f_min:g}, {cfg.f_max:g}] Hz, weights={list(cfg.weights)}")
    exp = scn.experiment
    if exp.axis:
        print(f"  sweep {exp.axis} over {list(exp.values)} x {exp.replicates} replicates, "
              f"schemes {list(exp.schemes)}")
    return EXIT_OK


def cmd_solve(args) -> int:
    scn = _scenario(args)
    out = _out_dir(args, scn)
    _, state, trace, rates = _solve_one(scn, args.scheme, args.replicate)
    (out / f"solution_{args.scheme}.json").write_text(
        json.dumps(_solution_dict(state, rates, args.scheme, trace), indent=2))
    write_trace_csv(trace, out / f"trace_{args.scheme}.csv")
    print(f"{args.scheme}: WSR {state.objective:.6f} bits/s/Hz after {len(trace)} iterations")
    print("  rates " + " ".join(f"{r:.4f}" for r in rates))
    return EXIT_OK


def cmd_pattern(args) -> int:
    scn = _scenario(args)
    out = _out_dir(args, scn)
    _, state, trace, _ = _solve_one(scn, args.scheme, args.replicate)
    harmonic = 0 if args.scheme == "ris" else None
    grid = GridSpec.uniform(args.d_min, args.d_max, args.n_dist, args.n_angle, args.azimuth)
    pg = compute_pattern(state, scn.config, grid, harmonic=harmonic)
    pg.to_csv(out / f"pattern_{args.scheme}.csv")
    pg.to_json(out / f"pattern_{args.scheme}.json")
    print(f"pattern {args.n_dist}x{args.n_angle} written to {out}")
    for k, u in enumerate(scn.config.users):
        i, j = pg.cell_of(u)
        print(f"  user {k + 1}: {pg.normalized_db[i, j]:.2f} dB (normalized)")
    return EXIT_OK


def cmd_baselines(args) -> int:
    scn = _scenario(args)
    out = _out_dir(args, scn)
    lines = ["scheme,wsr,iterations," + ",".join(f"rate_{k + 1}" for k in range(scn.config.K))]
    for scheme in SCHEMES:
        _, state, trace, rates = _solve_one(scn, scheme, args.replicate)
        lines.append(f"{scheme},{state.objective!r},{len(trace)},"
                     + ",".join(repr(float(r)) for r in rates))
        print(f"{scheme:6s} WSR {state.objective:.6f}  rates "
              + " ".join(f"{r:.4f}" for r in rates))
    (out / "baselines.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scn = _scenario(args)
    out = _out_dir(args, scn)

    def progress(batch):
        for r in batch:
            msg = f"point {r.point} rep {r.replicate} {r.scheme}: "
            msg += r.error if r.error else f"WSR {r.wsr:.4f} ({r.iterations} it)"
            log.info(msg)

    run = run_sweep(scn, schemes=args.schemes, replicates=args.replicates,
                    workers=args.workers, progress=progress)
    export_results(run, out)
    for p in run.summary["points"]:
        parts = [f"{s} {v['wsr_mean']:.4f}+-{v['wsr_stderr']:.4f}" for s, v in p["schemes"].items()
                 if v["wsr_mean"] is not None]
        print(f"{scn.experiment.axis or 'point'}={p['value']}: " + ", ".join(parts))
    failures = [r for r in run.records if r.error]
    if failures:
        print(f"{len(failures)} solve(s) failed; see results.csv", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "pattern": cmd_pattern,
            "baselines": cmd_baselines, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
