"""Command-line front end.

Subcommands
-----------
run       simulate one case under one scheme and write its reports
compare   sweep cases over schemes and tabulate solver effort
analyze   sample the single-interface residual space and trace solver paths
validate  run the randomized structural checks

Exit status: 0 on success, 1 when a simulation aborts (or validation fails),
2 on usage or configuration errors.  Output files land in ``--out`` if given,
else in ``$HUFLOW_OUT_DIR``, else in ``./out``.
"""

from __future__ import annotations

import argparse
import os
import sys

from .analysis import (
    CORNER_STARTS,
    OneCellProblem,
    newton_path,
    residual_surface,
    solve_one_cell,
    velocity_surface,
)
from .cases import CaseSpec, builtin_case, builtin_labels, load_case
from .compare import run_case, run_matrix
from .flux import SCHEME_LABELS, SchemeConfig
from .report import write_matrix_outputs, write_run_outputs, write_surface_outputs
from .verify import all_passed, run_invariant_checks


def _out_dir(args) -> str:
    path = args.out or os.environ.get("HUFLOW_OUT_DIR") or "out"
    os.makedirs(path, exist_ok=True)
    return path


def _resolve_case(label: str, config: str | None) -> CaseSpec:
    if os.path.exists(label) or label.endswith(".ini"):
        spec = load_case(label)
    else:
        spec = builtin_case(label)
    if config:
        spec = load_case(config, base=spec)
    return spec


def _scheme_or_die(label: str, alpha: float) -> SchemeConfig:
    return SchemeConfig.from_label(label, alpha=alpha)  # raises ValueError


def _run(args) -> int:
    spec = _resolve_case(args.case, args.config)
    scheme = args.scheme or spec.scheme
    if not scheme:
        raise ValueError("no scheme: pass --scheme or set it in the config")
    _scheme_or_die(scheme, args.alpha)
    report = run_case(spec, scheme, alpha=args.alpha)
    out = _out_dir(args)
    paths = write_run_outputs(report, spec.grid(), spec.phase_names, out,
                              render=not args.no_render)
    defect = max(abs(float(d)) for d in report.conservation_defect)
    rel = defect / max(max(abs(float(m)) for m in report.mass_initial), 1e-300)
    # with pressure-held cells the balance term is the net boundary exchange
    balance = "boundary exchange" if spec.sources().dirichlet else "mass-balance defect"
    status = "ABORTED" if report.aborted else "completed"
    print(f"{spec.name} [{scheme}] {status}: "
          f"{report.iterations} iterations + {report.wasted} wasted, "
          f"{report.cuts} cuts, reached t = {report.final_time:.6g} s, "
          f"{balance} {rel:.3e} (relative)")
    for p in paths:
        print(f"  wrote {p}")
    return 1 if report.aborted else 0


def _compare(args) -> int:
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    if not schemes:
        raise ValueError("empty --schemes list")
    for s in schemes:
        _scheme_or_die(s, args.alpha)
    specs = [_resolve_case(c, None) for c in args.cases]
    matrix = run_matrix(specs, schemes, alpha=args.alpha)
    out = _out_dir(args)
    paths = write_matrix_outputs(matrix, out, render=not args.no_render)
    if args.states:
        for spec in specs:
            for scheme in schemes:
                rep = matrix.report(spec.name, scheme)
                paths += write_run_outputs(rep, spec.grid(), spec.phase_names,
                                           out, render=not args.no_render)
    header = f"{'case':<20s} {'scheme':<10s} {'total':>6s} {'wasted':>6s} " \
             f"{'cuts':>4s} {'aborted':>7s}"
    print(header)
    aborted_any = False
    for row in matrix.rows():
        aborted_any |= bool(row["aborted"])
        print(f"{row['case']:<20s} {row['scheme']:<10s} "
              f"{row['total_iterations']:>6d} {row['wasted']:>6d} "
              f"{row['cuts']:>4d} {'yes' if row['aborted'] else 'no':>7s}")
    for p in paths:
        print(f"  wrote {p}")
    return 1 if aborted_any else 0


def _analyze(args) -> int:
    if args.target not in ("one-cell", "one_cell"):
        raise ValueError("only 'one-cell' analysis is available")
    labels = ([s.strip() for s in args.scheme.split(",")]
              if args.scheme != "all" else list(SCHEME_LABELS))
    for s in labels:
        _scheme_or_die(s, args.alpha)
    problem = OneCellProblem()
    out = _out_dir(args)
    surface_fn = velocity_surface if args.surface == "velocity" else residual_surface
    for label in labels:
        scheme = SchemeConfig.from_label(label, alpha=args.alpha)
        sample = surface_fn(problem, scheme, resolution=args.resolution)
        solution = solve_one_cell(problem, scheme)
        paths = None
        if args.paths:
            paths = {}
            for k, start in enumerate(CORNER_STARTS):
                paths[f"corner{k}"] = newton_path(problem, scheme, start)
        stem = f"one_cell_{args.surface}_{label.replace('-', '_')}"
        written = write_surface_outputs(sample, out, stem, paths=paths,
                                        solution=solution,
                                        render=not args.no_render)
        print(f"{label}: solution p = {solution.pressure:.9g}, "
              f"s_w = {solution.s_w:.9g}, |total flux| = "
              f"{abs(solution.total_flux):.3e}, residual norm = "
              f"{solution.residual_norm:.3e}")
        if paths:
            for name, p in paths.items():
                flips = sum(p.crossings.values())
                print(f"  path {name}: {len(p.points)} points, "
                      f"converged = {p.converged}, locus crossings = {flips}")
        for p in written:
            print(f"  wrote {p}")
    return 0


def _validate(args) -> int:
    checks = run_invariant_checks(seed=args.seed, n=args.states)
    for c in checks:
        print(c.line())
    ok = all_passed(checks)
    print(f"{'all checks passed' if ok else 'CHECKS FAILED'} "
          f"({sum(c.passed for c in checks)}/{len(checks)})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="huflow",
        description="Implicit finite-volume simulation of immiscible "
                    "porous-media flow with pluggable interface-flux schemes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output directory "
                       "(default: $HUFLOW_OUT_DIR or ./out)")
        p.add_argument("--alpha", type=float, default=1.0,
                       help="sharpness multiplier of the blend weights")
        p.add_argument("--no-render", action="store_true",
                       help="skip figure rendering, write delimited files only")

    p_run = sub.add_parser("run", help="simulate one case under one scheme")
    p_run.add_argument("case", help="built-in case label or config path; "
                       f"built-ins: {', '.join(builtin_labels())}")
    p_run.add_argument("--scheme", default=None,
                       help=f"one of: {', '.join(SCHEME_LABELS)}")
    p_run.add_argument("--config", default=None,
                       help="INI file overriding case parameters")
    common(p_run)
    p_run.set_defaults(func=_run)

    p_cmp = sub.add_parser("compare", help="run cases under several schemes")
    p_cmp.add_argument("cases", nargs="+", help="case labels or config paths")
    p_cmp.add_argument("--schemes", default=",".join(SCHEME_LABELS),
                       help="comma-separated scheme labels")
    p_cmp.add_argument("--states", action="store_true",
                       help="also write per-run step logs and final states")
    common(p_cmp)
    p_cmp.set_defaults(func=_compare)

    p_ana = sub.add_parser("analyze",
                           help="single-interface residual-space diagnostics")
    p_ana.add_argument("target", help="analysis target: one-cell")
    p_ana.add_argument("--scheme", default="all",
                       help="scheme label, comma list, or 'all'")
    p_ana.add_argument("--surface", choices=("velocity", "residual"),
                       default="residual", help="which field to sample")
    p_ana.add_argument("--resolution", type=int, default=64,
                       help="lattice points per axis")
    p_ana.add_argument("--paths", action="store_true",
                       help="trace damped solver paths from the four corners")
    common(p_ana)
    p_ana.set_defaults(func=_analyze)

    p_val = sub.add_parser("validate", help="randomized structural checks")
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--states", type=int, default=2000,
                       help="random face states per batch")
    p_val.set_defaults(func=_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
