"""Running benchmark cases, convergence tables and structural checks."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .cases import TestCase, test_case
from .errors import InfeasibleSampleError, MasolveError
from .grid import MeshFunction, backward_gradient, build_mesh, sample
from .operators import get_phi, j_h, monotone_ma, stencil_bases
from .program import ConicProgram, ProgramSpec, build_program, canonicalize, is_feasible
from .solver import SolveResult, SolveSettings, solve

log = logging.getLogger(__name__)


@dataclass
class ReportRow:
    N: int
    h: float
    error: float
    objective: float
    residual: float | None  # max |M[u] - f|, monotone scheme only
    status: str
    iters: int
    seconds: float
    order: float | None = None


@dataclass
class ConvergenceReport:
    case: str
    scheme: str
    phi: str
    width: int | None
    rows: list[ReportRow] = field(default_factory=list)

    COLUMNS = ("h", "error", "order", "objective", "residual", "status", "iters", "seconds")

    def errors(self) -> list[float]:
        return [r.error for r in self.rows]

    def orders(self) -> list[float | None]:
        return [r.order for r in self.rows[1:]]

    def to_csv(self, seconds: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([
                repr(r.h), repr(r.error), "" if r.order is None else repr(r.order), repr(r.objective),
                "" if r.residual is None else repr(r.residual), r.status, r.iters,
                repr(r.seconds) if seconds else "",
            ])
        return buf.getvalue()

    def to_json(self, seconds: bool = True) -> str:
        d = asdict(self)
        if not seconds:
            for r in d["rows"]:
                r["seconds"] = None
        return json.dumps(d, indent=1)


def _resolve(case) -> TestCase:
    return case if isinstance(case, TestCase) else test_case(case)


def make_spec(case, N: int, phi=None, scheme: str = "standard", width: int = 1) -> ProgramSpec:
    case = _resolve(case)
    mesh = build_mesh(N)
    phi = phi or case.default_phi
    stencil = stencil_bases(width) if scheme == "monotone" else None
    return ProgramSpec(mesh, case.rhs(mesh), case.boundary(mesh), get_phi(phi), scheme, stencil)


def solve_spec(spec: ProgramSpec, settings: SolveSettings | None = None) -> tuple[MeshFunction, SolveResult, ConicProgram]:
    program = canonicalize(build_program(spec))
    result = solve(program, settings)
    return program.mesh_function(result.x), result, program


def run_case(case, N: int, phi=None, scheme: str = "standard", settings: SolveSettings | None = None, width: int = 1):
    """Solve one (case, N) instance; returns the discrete solution and its report row."""
    case = _resolve(case)
    spec = make_spec(case, N, phi, scheme, width)
    u, result, _ = solve_spec(spec, settings)
    exact = sample(case.exact, spec.mesh)
    error = float(np.abs(u.values - exact.values)[1:-1, 1:-1].max())
    residual = None
    if scheme == "monotone":
        residual = float(np.abs(monotone_ma(u, spec.stencil) - spec.rhs_interior()).max())
    row = ReportRow(
        N=N,
        h=spec.mesh.h,
        error=error,
        objective=j_h(u, spec.phi),
        residual=residual,
        status=result.status,
        iters=result.iterations,
        seconds=result.seconds,
    )
    return u, row


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MASOLVE_THREADS", "1")))
    except ValueError:
        return 1


def convergence_sweep(case, Ns, phi=None, scheme: str = "standard", settings: SolveSettings | None = None,
                      width: int = 1) -> ConvergenceReport:
    case = _resolve(case)
    phi = phi or case.default_phi
    Ns = sorted(Ns)  # decreasing h
    settings = settings or SolveSettings()

    def one(N):
        try:
            return run_case(case, N, phi, scheme, settings, width)[1]
        except MasolveError as exc:
            log.warning("N=%d failed: %s", N, exc)
            return ReportRow(N, 1.0 / N, math.nan, math.nan, None, f"failed: {type(exc).__name__}", 0, 0.0)

    if _threads() > 1 and len(Ns) > 1:
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            rows = list(pool.map(one, Ns))
    else:
        rows = [one(N) for N in Ns]
    floor = 10 * settings.eps_feas
    for prev, row in zip(rows, rows[1:]):
        if prev.error > floor and row.error > floor:  # NaN compares false
            row.order = math.log2(prev.error / row.error)
    return ConvergenceReport(case.name, scheme, get_phi(phi).tag, width if scheme == "monotone" else None, rows)


# --------------------------------------------------------------------------
# structural checks


def check_monotone_theorem(solution: MeshFunction, case, stencil=None) -> float:
    """max |M[u] - f| over interior nodes; zero for an exact minimizer of the monotone program."""
    case = _resolve(case)
    stencil = stencil or stencil_bases(1)
    f = case.rhs(solution.mesh).interior_values()
    return float(np.abs(monotone_ma(solution, stencil) - f).max())


def variational_margin(u: MeshFunction, v: MeshFunction) -> float:
    """h^2 sum <grad u, grad v> - h^2 sum |grad u|^2 over the backward domain."""
    gu = backward_gradient(u).stacked()
    gv = backward_gradient(v).stacked()
    h2 = u.mesh.h**2
    return float(h2 * np.sum(gu * (gv - gu)))


def check_variational_inequality(u: MeshFunction, samples, spec: ProgramSpec | None = None,
                                 tol: float = 1e-7) -> float:
    """Worst margin of the first-order optimality condition over feasible samples.

    Samples are checked against ``spec`` (when given) and rejected if infeasible.
    """
    worst = math.inf
    for k, v in enumerate(samples):
        if spec is not None and not is_feasible(spec, v, tol):
            raise InfeasibleSampleError(f"sample {k} is not feasible")
        worst = min(worst, variational_margin(u, v))
    return worst


def feasible_perturbations(u: MeshFunction, spec: ProgramSpec, count: int = 20, seed: int = 0,
                           tol: float = 1e-7, extra=()) -> list[MeshFunction]:
    """Feasible mesh functions near ``u``.

    Candidates are ``u + t * max(a (x^2 - x), b (y^2 - y))`` (a convex function
    vanishing on the boundary, so det H only grows) and convex combinations
    with ``extra`` feasible functions. Infeasible candidates are discarded.
    """
    rng = np.random.default_rng(seed)
    X, Y = spec.mesh.coords()
    out: list[MeshFunction] = []
    pool = [w for w in extra if is_feasible(spec, w, tol)]
    tries = 0
    while len(out) < count and tries < 50 * count:
        tries += 1
        if pool and tries % 3 == 0:
            t = rng.uniform(0.05, 1.0)
            v = (1 - t) * u + t * pool[rng.integers(len(pool))]
        else:
            a, b = rng.uniform(0.1, 2.0, size=2)
            w = np.maximum(a * (X**2 - X), b * (Y**2 - Y))
            v = MeshFunction(u.mesh, u.values + rng.uniform(0.01, 1.0) * w)
        if is_feasible(spec, v, tol):
            out.append(v)
    return out
