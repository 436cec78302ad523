"""Command-line front end.

    granflow run SCENARIO.json [--out DIR]
    granflow --batch DIR [--out DIR] [--jobs N]
    granflow exact {haff,steady,automodel,singular} [--param k=v ...] [--out DIR]
    granflow verify DIR

Exit status: 0 success, 2 invalid scenario or parameters, 3 blow-up in a
scenario that does not expect one, 4 verification failure.  The output
directory defaults to ``runs/<scenario name>``; the environment variable
``GRANFLOW_OUTPUT_DIR`` replaces the ``runs`` base.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import (RunManifest, list_outputs, read_diagnostics, read_json, read_snapshot,
                        read_support, write_diagnostics, write_json, write_snapshot,
                        write_support)
from .core import BlowupReport, GasParams
from .diagnostics import evaluate_run, k_plus, momentum_hypothesis
from .exact import (SingularState, SteadyParams, automodel_eval, export_profile_csv,
                    haff_temperature, integrate_singular, steady_state_eval)
from .scenario import ScenarioError, SteadyPerturbed, parse_scenario, scenario_hash
from .solver import initial_field, max_wave_speed, run, unperturbed

log = logging.getLogger("granflow")

EXIT_OK, EXIT_INVALID, EXIT_BLOWUP, EXIT_VERIFY = 0, 2, 3, 4
INITIAL_SNAPSHOT = "snapshot_initial.csv"
FINAL_SNAPSHOT = "snapshot_final.csv"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _out_dir(out, name) -> Path:
    if out:
        return Path(out)
    return Path(os.environ.get("GRANFLOW_OUTPUT_DIR", "runs")) / name


def evaluate(sc, records, support, pf0, blowup: BlowupReport):
    """Every identity and inequality check for a run of ``sc``."""
    g = sc.gas
    kp = k_plus(pf0, g)
    kwargs = {}
    if isinstance(sc.initial, SteadyPerturbed):
        sp, b = sc.initial.steady, sc.initial.bump
        bg = initial_field(unperturbed(sc))
        kwargs = dict(support=support, sigma=sp.c2 / sp.c1,
                      sigma_characteristic=max_wave_speed(bg, g),
                      momentum_hypothesis=momentum_hypothesis(
                          pf0, sc.grid, g, sp.c1, sp.c2, abs(b.center) + b.radius))
    return evaluate_run(records, g, K_plus=kp, boundary=sc.boundary,
                        identity_tolerance=sc.checks.identity_tolerance,
                        rtol=sc.checks.inequality_rtol, dx=sc.grid.dx,
                        entropy_floor=sc.checks.entropy_floor,
                        blowup_time=blowup.t_detect if blowup.detected else None, **kwargs)


def _report(ev, blowup, extra) -> dict:
    rep = ev.to_json()
    rep["blowup"] = blowup.to_json()
    rep.update(extra)
    return rep


def cmd_run(scenario_path, out=None) -> int:
    start = _now()
    try:
        sc = parse_scenario(scenario_path)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    d = _out_dir(out or sc.output.directory, sc.name)
    d.mkdir(parents=True, exist_ok=True)
    try:
        res = run(sc)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    shutil.copyfile(scenario_path, d / "scenario.json")
    x = sc.grid.centers
    write_snapshot(d / INITIAL_SNAPSHOT, x, res.initial, sc.gas.gamma)
    write_snapshot(d / FINAL_SNAPSHOT, x, res.final, sc.gas.gamma)
    for t, pf in res.snapshots:
        write_snapshot(d / f"snapshot_t{t:.6f}.csv", x, pf, sc.gas.gamma)
    write_diagnostics(d / "diagnostics.csv", res.records)
    if res.support:
        write_support(d / "support.csv", res.support)
        write_diagnostics(d / "diagnostics_tilde.csv", res.tilde_records)
    write_json(d / "blowup.json", res.blowup.to_json())
    ev = evaluate(sc, res.records, res.support, res.initial, res.blowup)
    write_json(d / "report.json", _report(ev, res.blowup, {
        "floor_events": res.floor_events, "steps": res.steps,
        "K_plus": k_plus(res.initial, sc.gas)}))
    status = EXIT_OK
    if res.blowup.detected:
        msg = (f"blow-up ({res.blowup.trigger}) detected at t={res.blowup.t_detect:.6g}, "
               f"interval [{res.blowup.t_lo:.6g}, {res.blowup.t_hi:.6g}]")
        if sc.blowup.expected:
            log.info(msg)
        else:
            print(f"warning: unexpected {msg}", file=sys.stderr)
            status = EXIT_BLOWUP
    for r in ev.failures:
        log.warning("check %s failed: lhs=%.6g rhs=%.6g", r.name, r.lhs, r.rhs)
    RunManifest(scenario_hash(scenario_path), __version__, "run", start, _now(),
                list_outputs(d), status).write(d)
    print(f"{sc.name}: {len(res.records)} records, {res.steps} steps -> {d}")
    return status


def _run_one(args):
    path, out = args
    return cmd_run(path, out)


def cmd_batch(directory, out=None, jobs=None) -> int:
    """Run every ``*.json`` scenario of ``directory`` in its own output directory."""
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        print(f"error: no scenario files in {directory}", file=sys.stderr)
        return EXIT_INVALID
    base = Path(out) if out else None
    tasks = [(str(p), str(base / p.stem) if base else None) for p in paths]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        codes = list(pool.map(_run_one, tasks))
    for (p, _), c in zip(tasks, codes):
        log.info("%s -> exit %d", p, c)
    return max(codes)


def cmd_verify(directory) -> int:
    d = Path(directory)
    try:
        manifest = RunManifest.from_json(read_json(d / "manifest.json"))
        missing = [f for f in manifest.files if not (d / f).is_file()]
        if missing:
            print(f"error: files named in the manifest are missing: {missing}", file=sys.stderr)
            return EXIT_VERIFY
        sc = parse_scenario(d / "scenario.json")
        records = read_diagnostics(d / "diagnostics.csv")
        support = read_support(d / "support.csv") if (d / "support.csv").is_file() else []
        _, pf0 = read_snapshot(d / INITIAL_SNAPSHOT)
        blowup = BlowupReport.from_json(read_json(d / "blowup.json"))
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    ev = evaluate(sc, records, support, pf0, blowup)
    for r in ev.failures:
        print(f"FAIL {r.name}: lhs={r.lhs:.6g} rhs={r.rhs:.6g} margin={r.margin:.3g}")
    if ev.failures:
        return EXIT_VERIFY
    print(f"{d}: all checks passed ({len(ev.identities)} identities, "
          f"{len(ev.inequalities)} inequality reports, {len(ev.extra)} run checks)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# exact solutions

EXACT_DEFAULTS = {
    "haff": {"rho0": 1.0, "T0": 1.0, "lambda": 1.0, "t_end": 10.0, "num": 101},
    "steady": {"gamma": 5 / 3, "lambda": 1.0, "k": 1.0, "c2": 1.0, "x_plus": 1.0,
               "z_plus": 0.3, "x_max": 100.0, "num": 1000},
    "automodel": {"gamma": 5 / 3, "lambda": 1.0, "c1": 1.0, "c2": 1.0, "a": 0.5, "xi0": -0.6,
                  "z0": 0.3, "t": 1.0, "x_min": 0.0, "x_max": 2.0, "num": 200},
    "singular": {"gamma": 5 / 3, "lambda": 1.0, "dim": 1, "alpha0": 1.0, "s0": 0.0,
                 "beta0": 1.0, "t_end": 5.0, "threshold": 1e6},
}


def _params(family, pairs):
    vals = dict(EXACT_DEFAULTS[family])
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep or key not in vals:
            raise ValueError(f"unknown parameter {item!r} for {family}; "
                             f"known: {', '.join(sorted(vals))}")
        vals[key] = float(value)
    return vals


def cmd_exact(family, pairs=None, out=None) -> int:
    start = _now()
    try:
        p = _params(family, pairs)
        d = _out_dir(out, f"exact_{family}")
        d.mkdir(parents=True, exist_ok=True)
        status = _write_exact(family, p, d)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    write_json(d / "params.json", p)
    RunManifest("", __version__, f"exact {family}", start, _now(), list_outputs(d),
                status).write(d)
    print(f"exact {family} -> {d}")
    return status


def _write_exact(family, p, d: Path) -> int:
    if family == "haff":
        t = np.linspace(0.0, p["t_end"], int(p["num"]))
        T = haff_temperature(t, p["rho0"], p["T0"], p["lambda"])
        np.savetxt(d / "haff.csv", np.column_stack([t, T]), delimiter=",", header="t,T",
                   comments="", fmt="%.17g")
        return EXIT_OK
    g = GasParams(p["gamma"], p["lambda"], int(p.get("dim", 1)))
    if family == "steady":
        sp = SteadyParams.through(p["k"], p["c2"], g, p["x_plus"], p["z_plus"])
        x = np.linspace(p["x_plus"], p["x_max"], int(p["num"]))
        export_profile_csv(d / "steady.csv", x, *steady_state_eval(x, sp, g))
        return EXIT_OK
    if family == "automodel":
        sp = SteadyParams.through(p["c1"], p["c2"], g, p["xi0"], p["z0"], a=p["a"])
        x = np.linspace(p["x_min"], p["x_max"], int(p["num"]))
        export_profile_csv(d / "automodel.csv", x, *automodel_eval(x, p["t"], sp, g))
        return EXIT_OK
    traj = integrate_singular(SingularState(p["alpha0"], p["s0"], p["beta0"]), g, p["t_end"],
                              blowup_threshold=p["threshold"])
    traj.write_csv(d / "singular.csv")
    write_json(d / "blowup.json", traj.report.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="granflow", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--batch", metavar="DIR", help="run every scenario in DIR concurrently")
    ap.add_argument("--jobs", type=int, default=None, help="worker processes for --batch")
    ap.add_argument("--out", metavar="DIR", help="output base directory for --batch")
    sub = ap.add_subparsers(dest="command")
    r = sub.add_parser("run", help="simulate a scenario and write its artifacts")
    r.add_argument("scenario", nargs="?")
    r.add_argument("--batch", metavar="DIR", help="run every scenario in DIR")
    r.add_argument("--jobs", type=int, default=None)
    r.add_argument("--out", metavar="DIR")
    e = sub.add_parser("exact", help="export an exact solution")
    e.add_argument("family", choices=sorted(EXACT_DEFAULTS))
    e.add_argument("--param", action="append", metavar="K=V", default=[])
    e.add_argument("--out", metavar="DIR")
    v = sub.add_parser("verify", help="re-check a finished run directory")
    v.add_argument("directory")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        if not args.batch:
            ap.error("a command or --batch DIR is required")
        return cmd_batch(args.batch, args.out, args.jobs)
    if args.command == "run":
        if args.batch:
            return cmd_batch(args.batch, args.out, args.jobs)
        if not args.scenario:
            ap.error("run needs a scenario file or --batch DIR")
        return cmd_run(args.scenario, args.out)
    if args.command == "exact":
        return cmd_exact(args.family, args.param, args.out)
    return cmd_verify(args.directory)


if __name__ == "__main__":
    sys.exit(main())
