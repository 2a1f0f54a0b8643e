"""Command line entry point: ``masolve run | sweep | envelope``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .cases import CASE_NAMES, test_case
from .errors import MasolveError
from .grid import MeshFunction
from .harness import ConvergenceReport, convergence_sweep, make_spec, run_case, solve_spec
from .operators import PHI_TAGS, get_phi
from .program import ProgramSpec, build_program, canonicalize
from .solver import OPTIMAL, SolveSettings

EXIT_OK, EXIT_USAGE, EXIT_NONOPTIMAL = 0, 1, 2


def _parse_ns(text: str) -> list[int]:
    try:
        Ns = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad N list {text!r}") from None
    if not Ns:
        raise argparse.ArgumentTypeError("empty N list")
    return Ns


def _common(p: argparse.ArgumentParser):
    p.add_argument("--phi", choices=PHI_TAGS, default=None, help="integrand (default: the case's own)")
    p.add_argument("--tol", type=float, default=1e-8, help="feasibility and gap tolerance")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--algorithm", choices=("interior-point", "operator-splitting"), default="interior-point")
    p.add_argument("--out", type=Path, help="report path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-v", "--verbose", action="store_true")


def _case_args(p: argparse.ArgumentParser):
    p.add_argument("--case", required=True, choices=CASE_NAMES)
    p.add_argument("--scheme", choices=("standard", "monotone", "envelope"), default="standard")
    p.add_argument("--stencil-width", type=int, choices=(1, 2), default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="masolve", description="Monge-Ampere Dirichlet problems by discrete convex minimization")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one case on one mesh")
    _case_args(run)
    run.add_argument("--N", type=int, required=True)
    run.add_argument("--dump-program", type=Path, help="write the canonical program as JSON")
    run.add_argument("--surface", type=Path, help="write the solution as i,j,value CSV")
    _common(run)

    sweep = sub.add_parser("sweep", help="convergence table over several meshes")
    _case_args(sweep)
    sweep.add_argument("--N", type=_parse_ns, default=[4, 8, 16, 32, 64], help="comma separated, e.g. 4,8,16")
    _common(sweep)

    env = sub.add_parser("envelope", help="convex envelope of boundary data or of an obstacle")
    src = env.add_mutually_exclusive_group(required=True)
    src.add_argument("--boundary", type=Path, help="i,j,value CSV; only boundary nodes are used")
    src.add_argument("--obstacle", type=Path, help="i,j,value CSV giving the obstacle at every node")
    env.add_argument("--dump-program", type=Path)
    env.add_argument("--surface", type=Path)
    _common(env)
    return ap


def _settings(args) -> SolveSettings:
    return SolveSettings(eps_feas=args.tol, eps_gap=args.tol, max_iter=args.max_iter, algorithm=args.algorithm)


def _scheme(name: str) -> str:
    return "envelope-boundary" if name == "envelope" else name


def _emit(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _report_text(report: ConvergenceReport, fmt: str) -> str:
    return report.to_json() + "\n" if fmt == "json" else report.to_csv()


def _cmd_run(args) -> int:
    case = test_case(args.case)
    phi = args.phi or case.default_phi
    scheme = _scheme(args.scheme)
    settings = _settings(args)
    if args.dump_program:
        spec = make_spec(case, args.N, phi, scheme, args.stencil_width)
        args.dump_program.write_text(canonicalize(build_program(spec)).to_json())
    u, row = run_case(case, args.N, phi, scheme, settings, args.stencil_width)
    if args.surface:
        args.surface.write_text(u.to_csv())
    width = args.stencil_width if scheme == "monotone" else None
    report = ConvergenceReport(case.name, scheme, get_phi(phi).tag, width, [row])
    _emit(_report_text(report, args.format), args.out)
    return EXIT_OK if row.status == OPTIMAL else EXIT_NONOPTIMAL


def _cmd_sweep(args) -> int:
    scheme = _scheme(args.scheme)
    report = convergence_sweep(args.case, args.N, args.phi, scheme, _settings(args), args.stencil_width)
    _emit(_report_text(report, args.format), args.out)
    return EXIT_OK if all(r.status == OPTIMAL for r in report.rows) else EXIT_NONOPTIMAL


def _cmd_envelope(args) -> int:
    path = args.boundary or args.obstacle
    data = MeshFunction.from_csv(path.read_text())
    phi = args.phi or "squared"
    if args.boundary:
        spec = ProgramSpec(data.mesh, None, data, phi, "envelope-boundary")
    else:
        spec = ProgramSpec(data.mesh, None, None, phi, "envelope-obstacle", obstacle=data)
    if args.dump_program:
        args.dump_program.write_text(canonicalize(build_program(spec)).to_json())
    u, result, _ = solve_spec(spec, _settings(args))
    if args.surface:
        args.surface.write_text(u.to_csv())
    summary = {
        "scheme": spec.scheme, "N": spec.mesh.N, "status": result.status, "objective": result.objective,
        "iters": result.iterations, "seconds": result.seconds,
    }
    if args.format == "json":
        text = json.dumps(summary, indent=1) + "\n"
    else:
        text = ",".join(summary) + "\n" + ",".join(str(v) for v in summary.values()) + "\n"
    _emit(text, args.out)
    return EXIT_OK if result.status == OPTIMAL else EXIT_NONOPTIMAL


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; 2 is reserved for non-optimal solves
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    commands = {"run": _cmd_run, "sweep": _cmd_sweep, "envelope": _cmd_envelope}
    try:
        return commands[args.command](args)
    except (MasolveError, ValueError, OSError) as exc:
        print(f"masolve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
