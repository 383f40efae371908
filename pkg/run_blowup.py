#!/usr/bin/env python3
"""
run_blowup.py

Construct, verify and export the approximate self-similar blowup profile.

Subcommands:
 - solve:       march the dynamic rescaling equations to a steady state
 - verify:      run the inequality checklist on a checkpoint
 - uniqueness:  converge four initial families and compare the profiles
 - export:      write profile / weights / stability data as CSV
 - hilbert:     evaluate one velocity derivative with its error budget

Usage examples:
    python run_blowup.py solve --mesh-L 1e4 --tol 1e-6 --out out/
    python run_blowup.py solve --init family:f2 --tol 1e-4
    python run_blowup.py verify out/state.json
    python run_blowup.py export out/state.json stability out/stability.csv
    python run_blowup.py hilbert --a 0.3335 -k 1 1e5 1e6

Exit codes: 0 success, 1 invalid input, 2 verification failed,
3 divergence or step budget exhausted, 4 IO or format error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

# UTF-8 output on Windows consoles
if sys.platform == 'win32':
    try:
        sys.stdout.reconfigure(encoding='utf-8')
        sys.stderr.reconfigure(encoding='utf-8')
    except Exception:
        pass

from common import (Colors, load_values, print_error, print_separator, print_task_header,
                    print_task_summary, print_timestamp_log, use_color)
from config import ConfigError, RunConfig

logger = logging.getLogger('run_blowup')

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VERIFY_FAILED = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

EXPORT_KINDS = ('profile', 'weights', 'stability')


def load_config(args) -> RunConfig:
    """Config file (if any) with command-line flags on top; flags win."""
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    flags = {
        'mesh_L': getattr(args, 'mesh_L', None),
        'tol': getattr(args, 'tol', None),
        'init': getattr(args, 'init', None),
        'refine': getattr(args, 'refine', None),
        'out': getattr(args, 'out', None),
    }
    return config.with_overrides(flags).validate()


# ============================================
# Commands
# ============================================


def cmd_solve(args, config: RunConfig) -> int:
    from solver import DynamicRescalingSolver, SolverError, checkpoint_save, export_history_csv

    checkpoint = config.get('output.checkpoint')
    print_task_header("Dynamic rescaling solve", {
        'mesh L': config.get('mesh.L'), 'refine': config.get('mesh.refine'),
        'tol': config.get('solver.tol'), 'init': config.get('solver.init'), 'checkpoint': checkpoint,
    })
    start = time.time()
    solver = DynamicRescalingSolver.from_config(config, progress=args.progress)
    state = solver.init_state(config.get('solver.init', 'zero'))
    try:
        state, history = solver.run(state)
    except SolverError as exc:
        print_error(str(exc))
        if exc.state is not None:
            partial = Path(checkpoint).with_suffix('.partial.json')
            checkpoint_save(exc.state, partial)
            print_timestamp_log("💾", f"last state written to {partial}", Colors.YELLOW)
        print_task_summary(False, "No convergence", time.time() - start)
        return EXIT_DIVERGED
    checkpoint_save(state, checkpoint, history[-1]['Re'])
    export_history_csv(history, config.get('output.history'))
    print_timestamp_log("✓", f"Re = {history[-1]['Re']:.3e} after {state.steps} steps, "
                              f"c_w/c_l = {state.ratio:.9f}", Colors.GREEN)
    print_task_summary(True, "Converged", time.time() - start, checkpoint)
    return EXIT_OK


def cmd_verify(args, config: RunConfig) -> int:
    from solver import checkpoint_load
    from verifier import verify_state

    report_path = args.report or config.get('output.report')
    print_task_header("Verification", {'checkpoint': args.checkpoint, 'report': report_path})
    start = time.time()
    state = checkpoint_load(args.checkpoint)
    report = verify_state(state, config, progress=args.progress)
    report.save(report_path)
    print(report.format_table())
    for result in report.failed():
        if result.detail:
            print(f"  {Colors.RED}{result.name}{Colors.RESET}: {result.detail}")
    summary = f"{report.n_passed} of {len(report.results)} checks passed"
    print_task_summary(report.passed, summary, time.time() - start, report_path)
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def cmd_uniqueness(args, config: RunConfig) -> int:
    from solver import DynamicRescalingSolver, SolverError, run_uniqueness

    tols = tuple(sorted(args.tols, reverse=True))
    out = Path(config.get('output.dir')) / 'uniqueness.json'
    print_task_header("Uniqueness experiment", {'families': ', '.join(args.families),
                                                'tolerances': ', '.join(f"{t:g}" for t in tols)})
    start = time.time()
    solver = DynamicRescalingSolver.from_config(config, progress=args.progress)
    try:
        result = run_uniqueness(solver, args.families, tols, window=float(config.get('verify.window', 40.0)))
    except SolverError as exc:
        print_error(str(exc))
        print_task_summary(False, "A family did not converge", time.time() - start)
        return EXIT_DIVERGED
    data = {'tolerances': list(tols), 'initial_peaks': result.initial_peaks,
            'final_peaks': result.final_peaks, 'distances': {}}
    for tol in tols:
        print(f"{Colors.BOLD}Re <= {tol:g}{Colors.RESET}: max sup-distance {result.max_distance(tol):.3e}")
        pairs = result.distances(tol)
        for (a, b), d in pairs.items():
            print(f"  {Colors.DIM}·{Colors.RESET} {a}-{b}: {d:.3e}")
        data['distances'][f"{tol:g}"] = {f"{a}-{b}": d for (a, b), d in pairs.items()}
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(data, indent=2), encoding='utf-8')
    except OSError as exc:
        raise RuntimeError(f"Failed to write {out}: {exc}") from exc
    print_task_summary(True, "Uniqueness runs finished", time.time() - start, str(out))
    return EXIT_OK


def cmd_export(args, config: RunConfig) -> int:
    from energy import (StabilityParameters, WeightSet, evaluate, export_stability_csv,
                        export_weights_csv, far_samples, weights_at)
    from hilbert import HilbertParams
    from solver import DynamicRescalingSolver, checkpoint_load, export_profile_csv

    state = checkpoint_load(args.checkpoint)
    hilbert = HilbertParams.from_config(config)
    if args.what == 'profile':
        solver = DynamicRescalingSolver(state.mesh, state.profile, hilbert=hilbert, progress=args.progress)
        export_profile_csv(solver, state, args.path)
    elif args.what == 'weights':
        x = state.mesh.nodes[1:]
        export_weights_csv(x, weights_at(state, x, WeightSet.from_config(config)), args.path)
    else:
        nodes = state.mesh.nodes
        ev = evaluate(state, nodes, far_samples(float(nodes[-1])), WeightSet.from_config(config),
                      StabilityParameters.from_config(config), hilbert, args.progress)
        export_stability_csv(ev, args.path, float(config.get('verify.window', 40.0)))
    print_timestamp_log("💾", f"{args.what} data written to {args.path}", Colors.GREEN)
    return EXIT_OK


def cmd_hilbert(args, config: RunConfig) -> int:
    from hilbert import (FieldVelocity, HilbertError, HilbertParams, VelocityEval, cu_error_constant,
                         velocity_closed_rational, velocity_Fa)

    xs = load_values(args.x, args.values_file, entity_label="x value")
    params = HilbertParams.from_config(config)
    field = None
    if args.checkpoint:
        from solver import checkpoint_load
        state = checkpoint_load(args.checkpoint)
        field = FieldVelocity.omega(state.profile, state.omega_p, params)
    elif args.a is None and args.rational is None:
        raise HilbertError("give --a, --rational or --checkpoint")
    print_separator()
    for x in xs:
        if field is not None:
            ev = field.eval(x, args.k)
        elif args.rational is not None:
            s, r = args.rational
            ev = VelocityEval(velocity_closed_rational(s, r, x, args.k), 0.0, {'closed': 1})
        else:
            ev = velocity_Fa(args.a, x, args.k, params)
        trace = ', '.join(f"{name}={count}" for name, count in sorted(ev.trace.items()))
        print(f"x={x:.6g} k={args.k}: {Colors.CYAN}{ev.value:.16e}{Colors.RESET} "
              f"± {ev.budget:.3e}  [{trace}]")
        if args.a is not None and field is None and 'asymptotic' in ev.trace and args.k <= 2:
            print(f"  {Colors.DIM}C_u,err({args.k}) = {cu_error_constant(args.a, args.k, params.M1):.6g}"
                  f"{Colors.RESET}")
    print_separator()
    return EXIT_OK


COMMANDS = {
    'solve': cmd_solve,
    'verify': cmd_verify,
    'uniqueness': cmd_uniqueness,
    'export': cmd_export,
    'hilbert': cmd_hilbert,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Dynamic rescaling blowup profile: solve, verify, export")
    parser.add_argument("--config", help="configuration file (YAML/JSON)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only, no progress bars")
    parser.add_argument("--no-color", action="store_true", help="plain console output")
    sub = parser.add_subparsers(dest="command", required=True)

    def mesh_flags(p):
        p.add_argument("--mesh-L", type=float, help="mesh extent L")
        p.add_argument("--refine", type=int, help="split every mesh interval into this many parts")
        p.add_argument("-o", "--out", help="output directory")

    p = sub.add_parser("solve", help="march to an approximate steady state")
    mesh_flags(p)
    p.add_argument("--tol", type=float, help="stop when Re <= tol")
    p.add_argument("--init", help="'zero' or family:f1..family:f4")

    p = sub.add_parser("verify", help="run the inequality checklist on a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--report", help="report JSON path")
    p.add_argument("-o", "--out", help="output directory")

    p = sub.add_parser("uniqueness", help="converge four initial families and compare")
    mesh_flags(p)
    p.add_argument("--families", nargs="+", default=['f1', 'f2', 'f3', 'f4'])
    p.add_argument("--tols", nargs="+", type=float, default=[1e-4, 1e-6])

    p = sub.add_parser("export", help="write CSV data from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("what", choices=EXPORT_KINDS)
    p.add_argument("path")

    p = sub.add_parser("hilbert", help="one velocity derivative with its budget")
    p.add_argument("x", nargs="*", help="evaluation points")
    p.add_argument("-f", "--values-file", help="file with one x per line")
    p.add_argument("-k", type=int, default=0, help="derivative order 0..3")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--a", type=float, help="F_a exponent")
    source.add_argument("--rational", nargs=2, type=float, metavar=("S", "R"),
                        help="closed-form s·x/(1+(r x)^2)")
    source.add_argument("--checkpoint", help="use the vorticity of a checkpoint")
    return parser


def setup_logging(verbose: bool, quiet: bool):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
                        datefmt="%H:%M:%S")


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    use_color(not args.no_color and sys.stdout.isatty())
    args.progress = not args.quiet and sys.stderr.isatty()

    try:
        config = load_config(args)
    except (ConfigError, ImportError) as exc:
        print_error(f"invalid configuration: {exc}")
        return EXIT_INVALID

    from solver import CheckpointError, SolverError

    try:
        return COMMANDS[args.command](args, config)
    except SolverError as exc:
        print_error(str(exc))
        return EXIT_DIVERGED
    except (CheckpointError, RuntimeError) as exc:
        print_error(str(exc))
        return EXIT_IO
    except ValueError as exc:
        print_error(str(exc))
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
