"""Paired Monte-Carlo sweeps and result export.

Every scheme at a given sweep point and replicate is solved on the same
channel realization, drawn from ``SeedSequence([seed, replicate])``.  Results
are sorted by ``(point, replicate, scheme)`` before aggregation so the output
does not depend on worker scheduling.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channel import realize_channels
from .scenario import Scenario, apply_axis, scenario_to_dict
from .solver import SCHEMES, SolveTrace, solve_scheme

RESULT_COLUMNS = ("axis", "value", "point", "replicate", "scheme", "wsr", "iterations",
                  "final_delta", "wall_time", "error")


@dataclass
class SolveRecord:
    point: int
    value: object
    replicate: int
    scheme: str
    wsr: float
    rates: list
    iterations: int
    final_delta: float
    wall_time: float
    error: str = ""
    trace: SolveTrace | None = field(default=None, repr=False)


@dataclass
class SweepRun:
    scenario: Scenario
    records: list
    summary: dict


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (tuple, list)):
        return ";".join(repr(float(v)) for v in value)
    return repr(value)


def _solve_task(args):
    scn, point, value, replicate, schemes, keep_trace = args
    cfg = apply_axis(scn.config, scn.experiment.axis, value)
    channels = realize_channels(cfg, cfg.layout(), seed=cfg.seed, replicate=replicate)
    out = []
    for scheme in schemes:
        t0 = time.perf_counter()
        try:
            state, trace = solve_scheme(scheme, cfg, channels, scn.solver)
            wsr = trace.rows[-1].wsr if trace.rows else trace.initial_wsr
            prev = trace.rows[-2].wsr if len(trace.rows) > 1 else trace.initial_wsr
            rates = trace.rows[-1].rates.tolist() if trace.rows else []
            rec = SolveRecord(point, value, replicate, scheme, float(state.objective),
                              rates, len(trace), float(abs(wsr - prev)),
                              time.perf_counter() - t0,
                              trace=trace if keep_trace else None)
        except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
            rec = SolveRecord(point, value, replicate, scheme, math.nan, [], 0, math.nan,
                              time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}")
        out.append(rec)
    return out


def run_sweep(scn: Scenario, schemes=None, replicates: int | None = None,
              workers: int | None = None, progress=None) -> SweepRun:
    """Solve every sweep point x replicate for ``schemes`` on paired channels.

    Traces are kept for the first replicate only.
    """
    exp = scn.experiment
    schemes = tuple(schemes or exp.schemes)
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    reps = replicates or exp.replicates
    workers = workers or exp.workers
    tasks = [(scn, i, v, r, schemes, r == 0)
             for i, v in enumerate(exp.points()) for r in range(reps)]
    records = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for batch in pool.map(_solve_task, tasks):
                records.extend(batch)
                if progress:
                    progress(batch)
    else:
        for task in tasks:
            batch = _solve_task(task)
            records.extend(batch)
            if progress:
                progress(batch)
    order = {s: i for i, s in enumerate(schemes)}
    records.sort(key=lambda r: (r.point, r.replicate, order[r.scheme]))
    return SweepRun(scn, records, summarize(scn, records, schemes))


def _stats(values):
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def summarize(scn: Scenario, records, schemes) -> dict:
    """Mean and standard error of the WSR and per-user rates at every point."""
    exp = scn.experiment
    points = []
    for i, value in enumerate(exp.points()):
        entry = {"point": i, "value": list(value) if isinstance(value, tuple) else value,
                 "schemes": {}}
        for s in schemes:
            rs = [r for r in records if r.point == i and r.scheme == s]
            ok = [r for r in rs if not r.error]
            mean, se = _stats([r.wsr for r in ok])
            rates = np.array([r.rates for r in ok]) if ok else np.empty((0, 0))
            entry["schemes"][s] = {
                "n": len(ok),
                "failures": len(rs) - len(ok),
                "wsr_mean": mean,
                "wsr_stderr": se,
                "rates_mean": rates.mean(axis=0).tolist() if rates.size else [],
                "iterations_mean": _stats([r.iterations for r in ok])[0],
            }
        # paired differences against the first scheme
        base = schemes[0]
        for s in schemes[1:]:
            diffs = []
            for r in range(max((x.replicate for x in records), default=-1) + 1):
                a = [x for x in records if x.point == i and x.replicate == r and x.scheme == base]
                b = [x for x in records if x.point == i and x.replicate == r and x.scheme == s]
                if a and b and not a[0].error and not b[0].error:
                    diffs.append(a[0].wsr - b[0].wsr)
            m, se = _stats(diffs)
            entry["schemes"][s]["paired_gap_mean"] = m
            entry["schemes"][s]["paired_gap_stderr"] = se
        points.append(entry)
    return _json_safe({
        "format": "fdris-summary/1",
        "scenario": scenario_to_dict(scn),
        "versions": {"fdris": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "seed": scn.seed,
        "axis": exp.axis,
        "schemes": list(schemes),
        "points": points,
    })


def write_results_csv(records, path, axis=None) -> None:
    K = max((len(r.rates) for r in records), default=0)
    cols = list(RESULT_COLUMNS) + [f"rate_{k + 1}" for k in range(K)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in records:
            row = [axis or "", _format_value(r.value), r.point, r.replicate, r.scheme,
                   repr(r.wsr), r.iterations, repr(r.final_delta), f"{r.wall_time:.3f}", r.error]
            row += [repr(float(x)) for x in r.rates] + [""] * (K - len(r.rates))
            w.writerow(row)


def write_trace_csv(trace: SolveTrace, path) -> None:
    """Columns ``iteration, wsr, surrogate, rate_1..rate_K, mu``; one row per outer iteration."""
    K = len(trace.rows[0].rates) if trace.rows else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "wsr", "surrogate"] + [f"rate_{k + 1}" for k in range(K)] + ["mu"])
        for row in trace.rows:
            w.writerow([row.iteration, repr(row.wsr), repr(row.surrogate)]
                       + [repr(float(x)) for x in row.rates] + [repr(float(row.mu))])


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def export_results(run: SweepRun, out_dir) -> dict:
    """Write ``results.csv``, ``summary.json`` and first-replicate traces.

    Returns the written paths keyed by kind.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"results": out / "results.csv", "summary": out / "summary.json", "traces": []}
        write_results_csv(run.records, paths["results"], run.scenario.experiment.axis)
        paths["summary"].write_text(json.dumps(run.summary, indent=2, sort_keys=True))
        for r in run.records:
            if r.trace is not None:
                p = out / f"trace_p{r.point}_{r.scheme}.csv"
                write_trace_csv(r.trace, p)
                paths["traces"].append(p)
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return paths


def load_summary(path) -> dict:
    return json.loads(Path(path).read_text())


def record_dict(r: SolveRecord) -> dict:
    d = asdict(r)
    d.pop("trace")
    return d
