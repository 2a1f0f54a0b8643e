"""Primal-dual interior-point solver for conic programs in standard form.

    minimize    c^T x + d
    subject to  A x = b,  x in K

where ``K`` is a product of free, nonnegative, second-order and rotated
second-order cones. The dual is ``max b^T y  s.t.  A^T y + s = c, s in K*``
with ``s = 0`` on free coordinates.

The default algorithm runs Mehrotra predictor-corrector steps on the
homogeneous self-dual embedding with Nesterov-Todd scaling; each iteration
factors one sparse quasi-definite KKT matrix with an LDL^T factorization
(qdldl) and reuses it for three solves. An ADMM splitting is available as a
low-accuracy fallback.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
import qdldl
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import ConeLayout
from .errors import MalformedProgramError, SolverFailure

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal-infeasible"
DUAL_INFEASIBLE = "dual-infeasible"
ITERATION_LIMIT = "iteration-limit"


@dataclass
class SolveSettings:
    eps_feas: float = 1e-8
    eps_gap: float = 1e-8
    max_iter: int = 200
    admm_max_iter: int = 20000
    algorithm: str = "interior-point"  # or "operator-splitting"
    trace: TextIO | None = None  # per-iteration CSV trace
    ruiz_iters: int = 15
    static_reg: float = 1e-9
    refine_steps: int = 4
    # after the tolerances are met, keep iterating (at most extra_iters times) towards
    # extra_accuracy * tolerances; degenerate problems converge like sqrt(mu) in x
    extra_accuracy: float = 1e-4
    extra_iters: int = 15
    # Newton steps on the unscaled KKT equations with complementarity x o s = 0,
    # applied to an optimal result; kept only when they improve it
    polish: bool = True
    polish_iters: int = 30

    def __post_init__(self):
        if self.eps_feas <= 0 or self.eps_gap <= 0:
            raise ValueError("tolerances must be positive")
        if self.algorithm not in ("interior-point", "operator-splitting"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")


@dataclass
class Residuals:
    primal: float
    dual: float
    gap: float

    def within(self, eps_feas: float, eps_gap: float) -> bool:
        return self.primal <= eps_feas and self.dual <= eps_feas and self.gap <= eps_gap


@dataclass
class SolveResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    seconds: float
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def kkt_residuals(program, x, y, s) -> Residuals:
    """Scaled primal, dual and gap residuals of a candidate primal-dual triple.

    Pure evaluation; works for any candidate, including output of other solvers.
    """
    A, b, c = program.A, program.b, program.c
    x, y, s = (np.asarray(v, dtype=float) for v in (x, y, s))
    if x.shape != (A.shape[1],) or s.shape != (A.shape[1],) or y.shape != (A.shape[0],):
        raise MalformedProgramError(
            f"dimension mismatch: A is {A.shape}, x {x.shape}, y {y.shape}, s {s.shape}"
        )
    pres = np.linalg.norm(A @ x - b) / (1.0 + np.linalg.norm(b))
    dres = np.linalg.norm(A.T @ y + s - c) / (1.0 + np.linalg.norm(c))
    cx, by = float(c @ x), float(b @ y)
    gap = abs(cx - by) / (1.0 + abs(cx) + abs(by))
    return Residuals(float(pres), float(dres), float(gap))


def _check_program(program) -> ConeLayout:
    A = program.A
    n = A.shape[1]
    if program.b.shape != (A.shape[0],) or program.c.shape != (n,):
        raise MalformedProgramError(
            f"inconsistent dimensions: A {A.shape}, b {program.b.shape}, c {program.c.shape}"
        )
    try:
        layout = ConeLayout(program.cones)
    except ValueError as exc:
        raise MalformedProgramError(str(exc)) from exc
    if layout.n != n:
        raise MalformedProgramError(f"cone blocks cover {layout.n} variables, A has {n} columns")
    return layout


def solve(program, settings: SolveSettings | None = None) -> SolveResult:
    settings = settings or SolveSettings()
    layout = _check_program(program)
    t0 = time.perf_counter()
    if settings.algorithm == "operator-splitting":
        res = _solve_admm(program, layout, settings)
    else:
        # late iterations on degenerate problems can overflow the scaling; the loop
        # checks for non-finite iterates itself
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            res = _InteriorPoint(program, layout, settings).run()
    res.seconds = time.perf_counter() - t0
    return res


# --------------------------------------------------------------------------
# equilibration


def _ruiz(A: sp.csr_matrix, layout: ConeLayout, iters: int):
    """Row scaling D and cone-respecting column scaling E so that D A E is balanced."""
    m, n = A.shape
    D = np.ones(m)
    E = np.ones(n)
    M = A.tocsc(copy=True)
    M.data = np.abs(M.data)
    for _ in range(iters):
        S = sp.diags(D) @ M @ sp.diags(E)
        r = np.sqrt(np.maximum(_row_max(S.tocsr()), 1e-8))
        col = np.maximum(_row_max(S.T.tocsr()), 1e-8)
        # one scale per cone block so cone membership is preserved
        for g in layout.groups:
            col[g.idx] = col[g.idx].max(axis=1, keepdims=True)
        cs = np.sqrt(col)
        D /= r
        E /= cs
    np.clip(D, 1e-4, 1e4, out=D)
    np.clip(E, 1e-4, 1e4, out=E)
    return D, E


def _row_max(M: sp.csr_matrix) -> np.ndarray:
    out = np.zeros(M.shape[0])
    nz = np.diff(M.indptr) > 0
    if M.nnz:
        out[nz] = np.maximum.reduceat(M.data, M.indptr[:-1][nz])
    return out


# --------------------------------------------------------------------------
# KKT system


class _KKT:
    """Quasi-definite KKT matrix ``[[-H - reg, A^T], [A, reg]]`` with a fixed pattern."""

    def __init__(self, A: sp.csr_matrix, layout: ConeLayout, reg: float, refine: int):
        self.A = A.tocsr()
        self.AT = self.A.T.tocsr()
        self.layout = layout
        self.reg = reg
        self.refine = refine
        m, n = A.shape
        self.m, self.n = m, n
        rows, cols = [], []
        # diagonal entries for every primal coordinate, then the upper part of cone blocks
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        self._block_slices = []
        pos = n
        for g in layout.groups:
            iu, ju = np.triu_indices(g.dim, k=1)
            r = g.idx[:, iu].ravel()
            c = g.idx[:, ju].ravel()
            rows.append(r)
            cols.append(c)
            self._block_slices.append((g, slice(pos, pos + len(r)), iu, ju))
            pos += len(r)
        Ac = self.A.tocoo()
        rows.append(Ac.col)
        cols.append(Ac.row + n)
        self._a_slice = slice(pos, pos + Ac.nnz)
        self._a_data = Ac.data
        pos += Ac.nnz
        rows.append(np.arange(n, n + m))
        cols.append(np.arange(n, n + m))
        self._y_slice = slice(pos, pos + m)
        pos += m
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        self.nnz = pos
        tag = sp.csc_matrix((np.arange(1, pos + 1, dtype=float), (rows, cols)), shape=(n + m, n + m))
        self._perm = tag.data.astype(np.int64) - 1
        self.K = tag
        self.vals = np.zeros(pos)
        self.vals[self._a_slice] = self._a_data
        self.solver = None
        self.W = None

    def factor(self, W):
        self.W = W
        n = self.n
        diag = np.zeros(n)
        diag[self.layout.nonneg] -= W.hessian_diag()
        self._blocks = list(W.hessian_blocks())
        for (g, H), (_, sl, iu, ju) in zip(self._blocks, self._block_slices):
            di = np.arange(g.dim)
            diag[g.idx] -= H[:, di, di]
            self.vals[sl] = -H[:, iu, ju].ravel()
        self._hdiag = diag
        self.shift = self.reg
        self._factor()

    def _factor(self):
        n = self.n
        self.vals[:n] = self._hdiag - self.shift
        self.vals[self._y_slice] = self.shift
        self.K.data = self.vals[self._perm]
        try:
            if self.solver is None:
                self.solver = qdldl.Solver(self.K, upper=True)
            else:
                self.solver.update(self.K, upper=True)
        except Exception as exc:  # qdldl raises plain ValueError on zero pivots
            raise SolverFailure(f"KKT factorization failed: {exc}") from exc

    def _matvec(self, v):
        n = self.n
        x, y = v[:n], v[n:]
        top = -self.W.apply_hessian(x) + self.AT @ y
        return np.concatenate([top, self.A @ x])

    def _refined(self, rhs):
        scale = 1.0 + np.linalg.norm(rhs, np.inf)
        z = self.solver.solve(rhs)
        r = rhs - self._matvec(z)
        err = np.linalg.norm(r, np.inf)
        for _ in range(self.refine):
            if not np.isfinite(err) or err <= 1e-14 * scale:
                break
            z_new = z + self.solver.solve(r)
            r_new = rhs - self._matvec(z_new)
            err_new = np.linalg.norm(r_new, np.inf)
            if not err_new < err:  # refinement stopped helping
                break
            z, r, err = z_new, r_new, err_new
        return z, err / scale

    def solve(self, rhs):
        z, rel = self._refined(rhs)
        # a pivot too small for the shift gives a useless solve: enlarge the shift
        # (for this factorization only) and let refinement undo it
        tries = 0
        while not (np.isfinite(rel) and rel <= 1e-4) and tries < 4:
            self.shift *= 100.0
            self._factor()
            z2, rel2 = self._refined(rhs)
            if np.isfinite(rel2) and not rel2 >= rel:
                z, rel = z2, rel2
            tries += 1
        return z[: self.n], z[self.n :]


# --------------------------------------------------------------------------
# interior point


class _InteriorPoint:
    def __init__(self, program, layout: ConeLayout, settings: SolveSettings):
        self.p = program
        self.layout = layout
        self.st = settings
        A = sp.csr_matrix(program.A, dtype=float)
        self.A0, self.b0, self.c0 = A, np.asarray(program.b, float), np.asarray(program.c, float)
        if A.shape[0]:
            D, E = _ruiz(A, layout, settings.ruiz_iters)
        else:
            D, E = np.ones(0), np.ones(A.shape[1])
        self.D, self.E = D, E
        As = (sp.diags(D) @ A @ sp.diags(E)).tocsr()
        bs = D * self.b0
        cs = E * self.c0
        self.bscale = 1.0 / max(1.0, np.linalg.norm(bs))
        self.cscale = 1.0 / max(1.0, np.linalg.norm(cs))
        self.A, self.AT = As, As.T.tocsr()
        self.b = bs * self.bscale
        self.c = cs * self.cscale
        self.nb0 = np.linalg.norm(self.b0)
        self.nc0 = np.linalg.norm(self.c0)

    # map scaled iterates back to the caller's coordinates
    def _unscale(self, x, y, s):
        return (
            self.E * x / self.bscale,
            self.D * y / self.cscale,
            s / self.E / self.cscale,
        )

    def _measures(self, x, y, s, tau):
        xu, yu, su = self._unscale(x / tau, y / tau, s / tau)
        r = kkt_residuals(self.p, xu, yu, su)
        return r, xu, yu, su

    def _trace(self, row):
        if self.st.trace is not None:
            self.st.trace.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")

    def run(self) -> SolveResult:
        L = self.layout
        st = self.st
        n, m = self.A.shape[1], self.A.shape[0]
        A, AT, b, c = self.A, self.AT, self.b, self.c
        x = L.identity()
        s = L.identity()
        y = np.zeros(m)
        tau, kappa = 1.0, 1.0
        e_alg = L.algebra_identity()
        kkt = _KKT(A, L, st.static_reg, st.refine_steps)
        nu = L.degree
        best = None
        if st.trace is not None:
            st.trace.write("iter,pres,dres,gap,mu,tau,kappa,step\n")
        status = ITERATION_LIMIT
        met_at = 0
        step = 0.0
        it = 0
        for it in range(st.max_iter + 1):
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(s))):
                if status == OPTIMAL:
                    break
                raise SolverFailure("non-finite iterate", {"iteration": it, "tau": tau, "kappa": kappa})
            rp = A @ x - b * tau
            rd = AT @ y + s - c * tau
            rg = c @ x - b @ y + kappa
            mu = (L.dot(x, s) + tau * kappa) / (nu + 1)

            res, xu, yu, su = self._measures(x, y, s, tau)
            score = max(res.primal / st.eps_feas, res.dual / st.eps_feas, res.gap / st.eps_gap)
            if best is None or score < best[0]:
                best = (score, res, xu, yu, su, it)
            self._trace((it, res.primal, res.dual, res.gap, float(mu), float(tau), float(kappa), float(step)))
            if res.within(st.eps_feas, st.eps_gap):
                if status != OPTIMAL:
                    status, met_at = OPTIMAL, it
                f = st.extra_accuracy
                if f >= 1.0 or res.within(f * st.eps_feas, f * st.eps_gap) or it - met_at >= st.extra_iters:
                    break
            cert = None if status == OPTIMAL else self._certificate(x, y, s)
            if cert is not None:
                status, xc, yc, sc = cert
                obj = float("nan")
                return SolveResult(status, xc, yc, sc, obj, res.primal, res.dual, res.gap, it, 0.0)
            if it == st.max_iter:
                break

            W = L.scaling(x, s)
            lam = W.lam
            kkt.factor(W)
            dx1, dy1 = kkt.solve(np.concatenate([c, b]))
            denom_base = c @ dx1 - b @ dy1

            def newton(eta, rc, rtau):
                ds_alg = L.jordan_divide(lam, rc)
                r1 = -eta * rd - W.apply_WT(ds_alg)
                r1[L.free] = -eta * rd[L.free]
                dx2, dy2 = kkt.solve(np.concatenate([r1, -eta * rp]))
                dtau = (-eta * rg - rtau / tau - c @ dx2 + b @ dy2) / (denom_base - kappa / tau)
                dx = dx2 + dtau * dx1
                dy = dy2 + dtau * dy1
                # from the linearized dual equation, so rd shrinks exactly even when the
                # scaling is badly conditioned; the solve error moves into complementarity
                ds = -eta * rd - AT @ dy + c * dtau
                ds[L.free] = 0.0
                dkappa = (rtau - kappa * dtau) / tau
                return dx, dy, ds, dtau, dkappa

            def max_step(dx, ds, dtau, dkappa):
                # in scaled coordinates lam is well centred, so the boundary test does not cancel
                a = min(L.max_step_algebra(lam, W.apply_W(dx)), L.max_step_algebra(lam, W.apply_Winv_T(ds)), 1e300)
                if dtau < 0:
                    a = min(a, -tau / dtau)
                if dkappa < 0:
                    a = min(a, -kappa / dkappa)
                return a

            lam_sq = L.jordan_product(lam, lam)
            aff = newton(1.0, -lam_sq, -tau * kappa)
            a_aff = min(1.0, max_step(aff[0], aff[2], aff[3], aff[4]))
            sigma = float(np.clip((1.0 - a_aff) ** 3, 0.0, 1.0))
            corr = L.jordan_product(W.apply_W(aff[0]), W.apply_Winv_T(aff[2]))
            rc = -lam_sq - corr + sigma * mu * e_alg
            rtau = -tau * kappa - aff[3] * aff[4] + sigma * mu
            dx, dy, ds, dtau, dkappa = newton(1.0 - sigma, rc, rtau)
            step = min(1.0, 0.99 * max_step(dx, ds, dtau, dkappa))
            x = x + step * dx
            y = y + step * dy
            s = s + step * ds
            s[L.free] = 0.0
            tau = tau + step * dtau
            kappa = kappa + step * dkappa
            if step < 1e-10:
                log.debug("step collapsed at iteration %d", it)
                break

        # best scored iterate; once the tolerances are met this is an optimal one
        _, res, xu, yu, su, _ = best
        if status == OPTIMAL and st.polish:
            xu, yu, su = _polish(self.p, L, xu, yu, su, st.polish_iters)
            res = kkt_residuals(self.p, xu, yu, su)
        obj = float(self.c0 @ xu + self.p.d)
        return SolveResult(status, xu, yu, su, obj, res.primal, res.dual, res.gap, it, 0.0)

    def _certificate(self, x, y, s):
        eps = self.st.eps_feas
        xu, yu, su = self._unscale(x, y, s)
        by = float(self.b0 @ yu)
        if by > 0:
            if np.linalg.norm(self.A0.T @ yu + su) / by <= eps:
                return PRIMAL_INFEASIBLE, np.full_like(xu, np.nan), yu / by, su / by
        cx = float(self.c0 @ xu)
        if cx < 0:
            if np.linalg.norm(self.A0 @ xu) / -cx <= eps:
                return DUAL_INFEASIBLE, xu / -cx, np.full_like(yu, np.nan), np.full_like(su, np.nan)
        return None


# --------------------------------------------------------------------------
# polishing


def _polish_state(program, layout, x, y, s):
    F = np.concatenate([
        program.A @ x - program.b,
        program.A.T @ y + s - program.c,
        layout.complementarity(x, s),
    ])
    viol = max(0.0, -layout.min_residual(x), -layout.min_residual(s))
    return F, float(np.abs(F).max(initial=0.0)), viol


def _polish(program, layout: ConeLayout, x, y, s, iters: int):
    """Full Newton steps on [Ax = b, A^T y + s = c, x o s = 0] from an optimal point.

    Degenerate problems leave interior-point iterates O(sqrt(mu)) away from the
    solution; the unscaled Newton iteration removes that error at a linear or
    better rate. Steps continue while the equation residual shrinks; the result
    is the last iterate whose cone violation is no larger than the start's
    (or 1e-12), and the input is returned if the KKT residuals got worse.
    """
    A = sp.csr_matrix(program.A, dtype=float)
    m, n = A.shape
    s = s.copy()
    s[layout.free] = 0.0
    free_rows = sp.csr_matrix(
        (np.ones(len(layout.free)), (layout.free, layout.free)), shape=(n, n)
    )
    start = kkt_residuals(program, x, y, s)
    F, size, viol0 = _polish_state(program, layout, x, y, s)
    vmax = max(viol0, 1e-12)
    orig = cur = keep = (x, y, s)
    for _ in range(iters):
        x, y, s = cur
        J = sp.bmat([
            [A, None, None],
            [None, A.T, sp.identity(n)],
            [layout.complementarity_jacobian(s), None, layout.complementarity_jacobian(x) + free_rows],
        ], format="csc")
        try:
            with np.errstate(all="ignore"):
                d = spla.splu(J).solve(-F)
        except RuntimeError:  # singular Jacobian
            break
        if not np.all(np.isfinite(d)):
            break
        new = (x + d[:n], y + d[n:n + m], s + d[n + m:])
        F_new, size_new, viol = _polish_state(program, layout, *new)
        if not size_new < 0.9 * size:
            break
        cur, F, size = new, F_new, size_new
        if viol <= vmax:
            keep = cur
    end = kkt_residuals(program, *keep)
    if max(end.primal, end.dual, end.gap) <= max(start.primal, start.dual, start.gap, 1e-14):
        return keep
    return orig


# --------------------------------------------------------------------------
# operator splitting


def _solve_admm(program, layout: ConeLayout, settings: SolveSettings) -> SolveResult:
    """ADMM on ``min c^T x + I{Ax=b}(x) + I_K(z)  s.t.  x = z``.

    The affine projection reuses one factorization of ``[[I, A^T], [A, -reg]]``.
    Accuracy is modest; it exists for very large meshes.
    """
    A = sp.csr_matrix(program.A, dtype=float)
    b = np.asarray(program.b, float)
    c = np.asarray(program.c, float)
    m, n = A.shape
    rho = 1.0
    Kmat = sp.bmat([[sp.eye(n), A.T], [A, -1e-10 * sp.eye(m)]], format="csc")
    fac = qdldl.Solver(Kmat)
    z = np.zeros(n)
    u = np.zeros(n)
    x = np.zeros(n)
    y = np.zeros(m)
    status = ITERATION_LIMIT
    it = 0
    res = Residuals(np.inf, np.inf, np.inf)
    max_iter = settings.admm_max_iter
    for it in range(1, max_iter + 1):
        v = z - u - c / rho
        sol = fac.solve(np.concatenate([v, b]))
        x = sol[:n]
        z = layout.project(x + u)
        u = u + x - z
        # multipliers: nu = rho * w for Ax=b, lambda = rho * u for x=z; y = -nu, s = -lambda
        y = -rho * sol[n:]
        s = -rho * u
        if it % 10 == 0:
            res = kkt_residuals(program, z, y, s)
            if res.within(settings.eps_feas, settings.eps_gap) and np.linalg.norm(x - z) <= settings.eps_feas * (
                1 + np.linalg.norm(z)
            ):
                status = OPTIMAL
                break
    obj = float(c @ z + program.d)
    return SolveResult(status, z, y, s, obj, res.primal, res.dual, res.gap, it, 0.0)
