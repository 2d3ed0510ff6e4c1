"""Command-line interface for hylam."""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from hylam import __version__
from hylam.core.cohesive import check_law
from hylam.core.engine import LEMMA_SLACK, EvolutionEngine
from hylam.core.errors import HylamError
from hylam.core.materials import check_regularity_condition
from hylam.core.verification import build_report, history_equivalence_study
from hylam.utils.config import emit_config, parse_config
from hylam.utils.export import (
    read_snapshots,
    read_trace,
    write_csv,
    write_json,
    write_manifest,
    write_snapshots,
    write_text,
    write_trace,
)
from hylam.utils.system import CrashHandler, PathManager, SystemDoctor

COMMANDS = ("run", "check-law", "check-condition", "verify", "sweep", "refine")
SWEEP_COLUMNS = [
    "index", "value", "n_steps", "final_W", "final_total", "max_eb_residual", "remainder", "max_lemma_excess",
    "max_stress_residual", "max_gamma_minus_dh", "margin", "converged",
]
REFINE_COLUMNS = [
    "n", "max_eb_residual", "remainder", "max_lemma_excess", "max_stress_residual", "max_gamma_minus_dh",
    "lipschitz_modulus", "gap", "cross_level_gap", "cross_level_bound", "converged",
]


def setup_parser():
    """Setup CLI argument parser."""
    p = argparse.ArgumentParser(
        prog="hylam",
        description="hylam - quasi-static two-layer laminate with damage and a cohesive interface",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s run --config ramp.json --out results/ramp
  %(prog)s check-condition --config ramp.json --out results/ramp
  %(prog)s verify --config ramp.json --out results/ramp
  %(prog)s sweep --config sweep.json --out results/sweep --seed 3
  %(prog)s refine --config ramp.json --out results/refine
        """
    )
    p.add_argument("command", choices=COMMANDS, help="What to do with the configuration")
    p.add_argument("--config", required=True, help="Path to the JSON run configuration")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--seed", type=int, help="Override the configuration seed")
    p.add_argument("--trace", help="Trace file for verify (default: <out>/trace.csv)")
    p.add_argument("--strict", action="store_true", help="Stop on the first increment that exhausts its budget")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def cli_progress(pct, msg):
    """Display CLI progress bar."""
    bar_len = 30
    filled = int(pct / 100 * bar_len)
    bar = '#' * filled + '-' * (bar_len - filled)
    sys.stdout.write(f"\r[{bar}] {pct:.1f}% | {msg[:40].ljust(40)}")
    sys.stdout.flush()


def cli_log(msg):
    """Log message in CLI mode."""
    print(f"\n[LOG] {msg}")


def load_config(args):
    """Parse the configuration and apply the --seed and --strict overrides."""
    config = parse_config(args.config)
    if args.seed is not None:
        config = config.with_value("seed", args.seed)
    if args.strict:
        config = config.with_value("solver.strict", True)
    return config


def _finish_manifest(out_dir, config, files, extra=None):
    config_path = write_text(os.path.join(out_dir, "config.json"), emit_config(config))
    environment = SystemDoctor().environment()
    return write_manifest(out_dir, emit_config(config), [config_path] + list(files), config.seed,
                          __version__, environment, extra)


def command_run(config, out_dir):
    """Run the evolution; writes trace.csv, snapshots/ and manifest.json."""
    PathManager.ensure_dir(out_dir)
    problem = config.problem()
    log = cli_log if config.verbosity >= 1 else (lambda msg: None)
    engine = EvolutionEngine(problem, log_callback=log)
    progress = cli_progress if config.verbosity >= 1 else None
    trace = engine.run_evolution(progress)
    if progress:
        print("")

    files = [write_trace(os.path.join(out_dir, "trace.csv"), trace)]
    for directory in write_snapshots(out_dir, trace, problem.layers):
        files.extend(sorted(os.path.join(directory, name) for name in os.listdir(directory)))
    lemma_ok = trace.max_lemma_excess <= LEMMA_SLACK * (1.0 + abs(trace.final.total))
    ok = trace.all_converged and lemma_ok
    _finish_manifest(out_dir, config, files, {
        "n_steps": trace.n_steps,
        "all_converged": trace.all_converged,
        "energy_inequality_holds": lemma_ok,
    })

    print(f"[INFO] steps={trace.n_steps} final W={trace.final.W!r} max eb_residual={trace.max_eb_residual!r}")
    if not trace.all_converged:
        print(f"[WARN] Some increments did not converge: {engine.last_detailed_error}")
    if not lemma_ok:
        print(f"[WARN] Discrete energy inequality violated by {trace.max_lemma_excess!r}")
    return 0 if ok else 1


def command_check_law(config, out_dir):
    """Certify the cohesive law; writes law_report.txt."""
    PathManager.ensure_dir(out_dir)
    settings = config.verification
    report = check_law(config.law, settings["law_grid_resolution"], settings["law_tolerance"])
    write_text(os.path.join(out_dir, "law_report.txt"), report.to_text())
    if report.passed:
        print("[SUCCESS] Cohesive law satisfies every required assumption")
        return 0
    print(f"[FAIL] Violated: {', '.join(entry.name for entry in report.failures() if entry.required)}")
    return 1


def command_check_condition(config, out_dir):
    """Evaluate the convexity budget; writes budget.json and prints the margin."""
    PathManager.ensure_dir(out_dir)
    budget = check_regularity_condition(config.layers, config.law, config.mesh.L)
    write_json(os.path.join(out_dir, "budget.json"), budget.to_dict())
    print(f"margin {budget.margin!r}")
    print(f"[INFO] m/M={budget.m_over_M!r} lambda={budget.lam!r} L^2/pi^2={budget.poincare!r}")
    return 0 if budget.holds else 1


def command_verify(config, out_dir, trace_path=None):
    """Verify an exported trace; writes report.txt and residuals.csv."""
    trace_path = trace_path or os.path.join(out_dir, "trace.csv")
    table = read_trace(trace_path)
    snapshots = read_snapshots(os.path.dirname(os.path.abspath(trace_path)))
    settings = config.verification
    report = build_report(
        table, config.layers, config.law, snapshots=snapshots, problem=config.problem(),
        eb_tolerance=settings["eb_tolerance"], tol_grad=config.solver.tol_grad,
        stability_tolerance=settings["stability_tolerance"], n_test_fields=settings["n_test_fields"],
        seed=config.seed,
    )
    PathManager.ensure_dir(out_dir)
    write_text(os.path.join(out_dir, "report.txt"), report.to_text())
    rows = report.rows()
    write_csv(os.path.join(out_dir, "residuals.csv"), list(rows[0]) if rows else ["k"], rows)
    if report.passed:
        print("[SUCCESS] Every check passed")
        return 0
    print(f"[FAIL] Failed checks: {', '.join(report.failures())}")
    return 1


def _sweep_point(index, value, config, out_dir):
    point = config.with_value(config.sweep["path"], value)
    point_dir = PathManager.ensure_dir(PathManager.sweep_point_dir(out_dir, index))
    problem = point.problem()
    trace = EvolutionEngine(problem, log_callback=lambda msg: None).run_evolution()
    write_trace(os.path.join(point_dir, "trace.csv"), trace)
    write_text(os.path.join(point_dir, "config.json"), emit_config(point))
    budget = check_regularity_condition(point.layers, point.law, point.mesh.L)
    return {
        "index": index,
        "value": value,
        "n_steps": trace.n_steps,
        "final_W": trace.final.W,
        "final_total": trace.final.total,
        "max_eb_residual": trace.max_eb_residual,
        "remainder": trace.remainder,
        "max_lemma_excess": trace.max_lemma_excess,
        "max_stress_residual": float(np.max(trace.column("stress_residual"))),
        "max_gamma_minus_dh": float(np.max(trace.column("max_gamma_minus_dh"))),
        "margin": budget.margin,
        "converged": trace.all_converged,
    }


def command_sweep(config, out_dir):
    """Run one evolution per sweep value; writes points/<i>/ and sweep.csv."""
    sweep = config.sweep
    if not sweep["path"] or not sweep["values"]:
        raise HylamError("sweep: both sweep.path and a nonempty sweep.values are required")
    PathManager.ensure_dir(out_dir)
    values = list(sweep["values"])
    print(f"[SWEEP] {sweep['path']} over {len(values)} values")

    def point(item):
        return _sweep_point(item[0], item[1], config, out_dir)

    if config.concurrency > 1:
        with ThreadPoolExecutor(max_workers=config.concurrency) as executor:
            rows = list(executor.map(point, enumerate(values)))
    else:
        rows = [point(item) for item in enumerate(values)]
    rows.sort(key=lambda row: row["index"])
    sweep_csv = write_csv(os.path.join(out_dir, "sweep.csv"), SWEEP_COLUMNS, rows)
    files = [sweep_csv] + [os.path.join(PathManager.sweep_point_dir(out_dir, row["index"]), "trace.csv")
                           for row in rows]
    _finish_manifest(out_dir, config, files, {"sweep_path": sweep["path"], "n_points": len(rows)})
    return 0 if all(row["converged"] for row in rows) else 1


def command_refine(config, out_dir):
    """Refinement and history study over verification.refine_partitions; writes refine.csv."""
    PathManager.ensure_dir(out_dir)
    partitions = config.verification["refine_partitions"]
    log = cli_log if config.verbosity >= 1 else (lambda msg: None)
    print(f"[REFINE] n in {partitions}")
    settings = config.verification
    study = history_equivalence_study(config.problem(), partitions, log_callback=log,
                                      tolerance=settings["history_tolerance"],
                                      lipschitz_growth=settings["lipschitz_growth"],
                                      cross_level_factor=settings["cross_level_factor"])
    rows = study.rows()
    refine_csv = write_csv(os.path.join(out_dir, "refine.csv"), REFINE_COLUMNS, rows)
    _finish_manifest(out_dir, config, [refine_csv], {"partitions": list(partitions), "warnings": study.warnings})

    for row in rows:
        print(f"[INFO] n={row['n']} max eb_residual={row['max_eb_residual']!r} gap={row['gap']!r}")
    for check in study.checks():
        print(f"[{'SUCCESS' if check.passed else 'FAIL'}] {check.name}: worst={check.worst!r} {check.detail}")
    converged = all(row["converged"] for row in rows)
    if study.passed and converged:
        print("[SUCCESS] Refinement study passed")
        return 0
    print("[FAIL] History study did not pass" if converged else "[FAIL] Some refinement levels did not converge")
    return 1


def run_cli(args):
    """Dispatch a parsed command line; returns the exit status."""
    print(f"\n--- hylam {__version__} [{args.command}] ---\n")
    config = load_config(args)
    if args.command == "run":
        return command_run(config, args.out)
    if args.command == "check-law":
        return command_check_law(config, args.out)
    if args.command == "check-condition":
        return command_check_condition(config, args.out)
    if args.command == "verify":
        return command_verify(config, args.out, args.trace)
    if args.command == "refine":
        return command_refine(config, args.out)
    return command_sweep(config, args.out)


def main(argv=None):
    """Main CLI entry point."""
    parser = setup_parser()
    args = parser.parse_args(argv)
    try:
        return run_cli(args)
    except HylamError as e:
        print(f"\n[ERROR] {type(e).__name__}: {e}")
        CrashHandler.handle(e, args.out)
        return 2


if __name__ == "__main__":
    sys.exit(main())
