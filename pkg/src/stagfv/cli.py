"""Command line: ``stagfv {run,audit,study,riemann} --config PATH``.

Exit codes: 0 success, 1 audit identity above tolerance, 2 configuration
error, 3 solver positivity or non-finite error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .diagnostics import Auditor
from .errors import ConfigError, NonFiniteError, PositivityError, StagError, VacuumError
from .riemann import profile, solve_star_state, wave_speeds
from .scheme import run
from .state import write_fields_csv
from .studies import STUDY_COLUMNS, rates_table, run_study, study_kind

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

# tolerances the audit subcommand enforces
AUDIT_TOLERANCES = {
    "dual_mass_max": 1e-12,
    "kinetic_max": 1e-12,
    "energy_max": 1e-11,
    "G_antisym_max": 0.0,
    "mass_drift": 1e-12,
    "energy_drift_bc": 1e-12,
}


def _fields_name(t):
    return f"fields_t{t:g}.csv"


def cmd_run(cfg, audit=None, out=None):
    out = out or sys.stdout
    audit = cfg.audit if audit is None else audit
    mesh = cfg.build_mesh()
    state0 = cfg.initial_state(mesh)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    auditor = Auditor() if audit else None
    res = run(mesh, state0, cfg.step_config(), output_times=cfg.output_times, observer=auditor)
    for t, snap in zip(sorted(cfg.output_times), res.snapshots[1:]):
        write_fields_csv(outdir / _fields_name(t), mesh, snap)
    print(f"{res.steps} steps to t = {res.final_state.t:.6g} ({res.restarts} restarts); output in {outdir}", file=out)
    status = EXIT_OK
    if auditor is not None:
        report = auditor.report
        report.to_csv(outdir / "audit.csv")
        text = report.summary()
        failed = [k for k, tol in AUDIT_TOLERANCES.items() if report.worst(k) > tol]
        if report.rows and report.lowest("min_R") < -1e-14:
            failed.append("min_R")
        text += "\n" + ("  identities within tolerance" if not failed else f"  ABOVE TOLERANCE: {', '.join(failed)}")
        (outdir / "audit_summary.txt").write_text(text + "\n")
        print(text, file=out)
        if failed:
            status = EXIT_AUDIT
    if res.error is not None:
        raise res.error
    return status


def cmd_study(cfg, levels, out=None):
    out = out or sys.stdout
    rows = run_study(cfg, levels)
    kind = study_kind(cfg)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "study.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["cells", "h", "steps"] + [c for c in asdict(rows[0]) if c not in ("counts", "h", "steps")]
        w.writerow(cols)
        for r in rows:
            d = asdict(r)
            w.writerow(["x".join(map(str, r.counts)), repr(r.h), r.steps] + [repr(float(d[c])) for c in cols[3:]])
    print(f"{kind} study, {levels} levels ({', '.join(STUDY_COLUMNS[kind])})", file=out)
    print(rates_table(rows, kind), file=out)
    return EXIT_OK


def cmd_riemann(cfg, out=None):
    out = out or sys.stdout
    prob = cfg.riemann_problem()
    star = solve_star_state(prob)
    sp = wave_speeds(prob, star)
    print(f"# p_star={star.p!r} u_star={star.u!r} rho_star_left={star.rho_left!r} rho_star_right={star.rho_right!r}", file=out)
    print(f"# left={star.left_wave} right={star.right_wave} residual={star.residual:.3e}", file=out)
    for side in ("left", "right"):
        print(f"# {side} wave speeds: " + " ".join(f"{k}={v!r}" for k, v in sp[side].items()), file=out)
    a, b = cfg.extents[0]
    n = cfg.counts[0]
    x = a + (np.arange(n) + 0.5) * (b - a) / n
    rho, u, p = profile(prob, x, cfg.t_end, star)
    print(f"# t={cfg.t_end!r}", file=out)
    print("x,rho,u,p", file=out)
    for row in zip(x, rho, u, p):
        print(",".join(repr(float(v)) for v in row), file=out)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="stagfv", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "run a case and write field CSVs (and the audit when enabled)"),
        ("audit", "run a case with the full identity audit"),
        ("study", "refinement study with observed rates"),
        ("riemann", "exact Riemann solution for a Riemann-type preset"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="flat key = value configuration file")
        if name == "study":
            p.add_argument("--levels", type=int, default=None, help="number of refinement levels (>= 3)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "audit":
            return cmd_run(cfg, audit=True)
        if args.command == "study":
            return cmd_study(cfg, args.levels if args.levels is not None else cfg.levels)
        return cmd_riemann(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VacuumError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PositivityError, NonFiniteError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except StagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
