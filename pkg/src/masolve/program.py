"""Discrete convex programs for the Dirichlet Monge-Ampere problem in conic form.

Every program is assembled in the standard form ``min c^T x + d, A x = b,
x in K``. Grid values at the unknown nodes come first (free variables), then
the cone blocks in node order. Each cone entry that is an affine function of
the grid values is tied to it by one equality row ``entry - (affine) = const``,
so ``A`` always has full row rank.

All cone entries are scaled by powers of ``h`` so that the stencil
coefficients are small integers; the encoded sets are unchanged because the
cones are homogeneous.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .cones import ConeLayout
from .errors import InfeasiblePresolveError, InvalidDataError
from .grid import Mesh, MeshFunction
from .operators import (
    PhiSpec,
    StencilSet,
    det_and_lambda_min,
    discrete_hessian,
    get_phi,
    is_locally_discrete_convex,
    is_wide_stencil_convex,
    monotone_ma,
)

SCHEMES = ("standard", "monotone", "envelope-boundary", "envelope-obstacle")
SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ProgramSpec:
    mesh: Mesh
    f: MeshFunction | None  # right-hand side; only interior values are used
    g: MeshFunction | None  # Dirichlet data; only boundary values are used
    phi: PhiSpec
    scheme: str = "standard"
    stencil: StencilSet | None = None
    obstacle: MeshFunction | None = None

    def __post_init__(self):
        object.__setattr__(self, "phi", get_phi(self.phi))
        if self.scheme not in SCHEMES:
            raise InvalidDataError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "monotone" and self.stencil is None:
            raise InvalidDataError("monotone scheme needs a stencil")
        if self.scheme == "envelope-obstacle":
            if self.obstacle is None:
                raise InvalidDataError("obstacle envelope needs an obstacle function")
            _check_finite(self.obstacle.values, "obstacle")
        else:
            if self.g is None:
                raise InvalidDataError("boundary data g is required")
            _check_finite(self.g.values[self.mesh.boundary_mask()], "boundary data g")
        if self.f is not None:
            fi = self.f.interior_values()
            _check_finite(fi, "right-hand side f")
            if np.any(fi < 0):
                raise InvalidDataError("right-hand side f must be nonnegative on the interior")

    def rhs_interior(self) -> np.ndarray:
        N = self.mesh.N
        if self.f is None or self.scheme.startswith("envelope"):
            return np.zeros((N - 1, N - 1))
        return np.array(self.f.interior_values())


def _check_finite(a, what):
    if not np.all(np.isfinite(a)):
        raise InvalidDataError(f"{what} has non-finite values")


@dataclass(eq=False)
class ConicProgram:
    c: np.ndarray
    d: float
    A: sp.csr_matrix
    b: np.ndarray
    cones: tuple  # ((kind, dim), ...) in variable order
    mesh: Mesh | None = None
    node_var: np.ndarray | None = None  # (N+1, N+1) variable index, -1 where fixed
    node_const: np.ndarray | None = None  # values at fixed nodes
    meta: dict = field(default_factory=dict)
    # evaluation recipe used by assign(); indices refer to the variables before presolve
    _recipe: list | None = field(default=None, repr=False)
    _origin: np.ndarray | None = field(default=None, repr=False)
    _n_build: int = 0

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def layout(self) -> ConeLayout:
        return ConeLayout(self.cones)

    def count(self, kind: str, dim: int | None = None) -> int:
        return sum(1 for k, d in self.cones if k == kind and (dim is None or d == dim))

    def mesh_function(self, x: np.ndarray) -> MeshFunction:
        vals = np.where(self.node_var >= 0, x[np.maximum(self.node_var, 0)], self.node_const)
        return MeshFunction(self.mesh, vals)

    def assign(self, v: MeshFunction) -> np.ndarray:
        """Variable vector representing the mesh function ``v`` with tight epigraph slacks.

        Every equality row holds exactly for the returned vector. The vector is
        cone-feasible exactly when ``v`` satisfies the program's constraints.
        """
        if self._recipe is None:
            raise ValueError("program carries no assignment recipe")
        x = np.zeros(self._n_build)
        origin = self._origin if self._origin is not None else np.arange(self.n)
        gv = _grid_values_index(self, origin)
        x[gv[0]] = v.values[gv[1]]
        for step in self._recipe:
            step(x)
        return x[origin]

    # --- serialization -------------------------------------------------

    def to_json(self) -> str:
        A = self.A.tocoo()
        trip = [[int(i), int(j), float(v)] for i, j, v in zip(A.row, A.col, A.data)]
        return json.dumps(
            {
                "c": self.c.tolist(),
                "d": float(self.d),
                "A": {"shape": list(self.A.shape), "triplets": trip},
                "b": self.b.tolist(),
                "cones": [{"type": k, "dim": int(d)} for k, d in self.cones],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ConicProgram":
        data = json.loads(text)
        shape = tuple(data["A"]["shape"])
        t = np.array(data["A"]["triplets"], dtype=float).reshape(-1, 3)
        A = sp.csr_matrix((t[:, 2], (t[:, 0].astype(int), t[:, 1].astype(int))), shape=shape)
        return cls(
            c=np.asarray(data["c"], float),
            d=float(data["d"]),
            A=A,
            b=np.asarray(data["b"], float),
            cones=tuple((cn["type"], int(cn["dim"])) for cn in data["cones"]),
        )


def _grid_values_index(program, origin):
    """(build-time variable indices, node index tuple) for grid unknowns."""
    nv = program.meta["build_node_var"]
    mask = nv >= 0
    return nv[mask], np.nonzero(mask)


# --------------------------------------------------------------------------
# affine expressions over variables, batched over B blocks


@dataclass
class Affine:
    idx: np.ndarray  # (B, t) variable indices, -1 for unused
    coef: np.ndarray  # (B, t)
    const: np.ndarray  # (B,)

    @classmethod
    def constant(cls, value, B):
        return cls(np.full((B, 0), -1), np.zeros((B, 0)), np.broadcast_to(np.asarray(value, float), (B,)).copy())

    @classmethod
    def var(cls, idx):
        idx = np.asarray(idx)
        return cls(idx[:, None], np.ones((len(idx), 1)), np.zeros(len(idx)))

    def __add__(self, other):
        if not isinstance(other, Affine):
            return Affine(self.idx, self.coef, self.const + other)
        return Affine(
            np.hstack([self.idx, other.idx]), np.hstack([self.coef, other.coef]), self.const + other.const
        )

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, k):
        k = np.asarray(k, float)
        kk = k[:, None] if k.ndim == 1 else k
        return Affine(self.idx, self.coef * kk, self.const * k)

    __rmul__ = __mul__

    def evaluate(self, x):
        safe = np.maximum(self.idx, 0)
        return np.sum(np.where(self.idx >= 0, self.coef * x[safe], 0.0), axis=1) + self.const


class _Assembler:
    def __init__(self):
        self.blocks: list[tuple[str, int]] = []
        self.nvar = 0
        self.rows: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self.b: list[np.ndarray] = []
        self.nrow = 0
        self.c: dict[int, float] = {}
        self.cvec: list[tuple[np.ndarray, np.ndarray]] = []
        self.recipe: list[Callable] = []

    def new_vars(self, kind, B, dim):
        idx = self.nvar + np.arange(B * dim).reshape(B, dim)
        self.blocks.extend([(kind, dim)] * B if kind != "free" else [(kind, B * dim)] if B * dim else [])
        self.nvar += B * dim
        return idx

    def tie(self, z, expr: Affine):
        """Rows ``z - expr.linear = expr.const`` for a batch of variables ``z``."""
        B = len(z)
        ridx = self.nrow + np.arange(B)
        cols = np.hstack([z[:, None], expr.idx])
        vals = np.hstack([np.ones((B, 1)), -expr.coef])
        rr = np.repeat(ridx[:, None], cols.shape[1], axis=1)
        keep = cols >= 0
        self.rows.append((rr[keep], cols[keep], vals[keep]))
        self.b.append(expr.const)
        self.nrow += B
        self.recipe.append(lambda x, z=z, e=expr: x.__setitem__(z, e.evaluate(x)))

    def objective(self, z, coef):
        self.cvec.append((np.asarray(z).ravel(), np.broadcast_to(np.asarray(coef, float), np.shape(z)).ravel()))

    def cone(self, kind, entries, tight=None, obj=None):
        """Append a batch of cone blocks; ``entries[k]`` is an Affine or None (slack).

        ``tight(values)`` computes the smallest feasible slack from the other
        entries; it is only used to build assignments.
        """
        B = next(len(e.const) for e in entries if e is not None)
        z = self.new_vars(kind, B, len(entries))
        for k, e in enumerate(entries):
            if e is not None:
                self.tie(z[:, k], e)
        if tight is not None:
            k0 = [k for k, e in enumerate(entries) if e is None]

            def fill(x, z=z, k0=k0):
                x[z[:, k0[0]]] = tight(x[z])

            self.recipe.append(fill)
        if obj is not None:
            self.objective(z[:, 0], obj)
        return z

    def build(self, d=0.0) -> ConicProgram:
        n = self.nvar
        if self.rows:
            r = np.concatenate([t[0] for t in self.rows])
            cidx = np.concatenate([t[1] for t in self.rows])
            v = np.concatenate([t[2] for t in self.rows])
        else:
            r = cidx = np.zeros(0, int)
            v = np.zeros(0)
        A = sp.csr_matrix((v, (r, cidx)), shape=(self.nrow, n))
        A.sum_duplicates()
        A.eliminate_zeros()
        b = np.concatenate(self.b) if self.b else np.zeros(0)
        c = np.zeros(n)
        for z, coef in self.cvec:
            np.add.at(c, z, coef)
        return ConicProgram(c=c, d=d, A=A, b=b, cones=tuple(self.blocks), _recipe=self.recipe, _n_build=n)


# --------------------------------------------------------------------------
# builders


class _Grid:
    """Maps mesh nodes to grid variables or to fixed values."""

    def __init__(self, asm: _Assembler, mesh: Mesh, g: MeshFunction | None, all_nodes=False):
        N = mesh.N
        self.mesh = mesh
        self.node_var = np.full(mesh.shape, -1, dtype=int)
        self.node_const = np.zeros(mesh.shape)
        if all_nodes:
            mask = np.ones(mesh.shape, dtype=bool)
        else:
            mask = mesh.interior_mask()
            self.node_const[~mask] = g.values[~mask]
        nfree = int(mask.sum())
        idx = asm.new_vars("free", 1, nfree).ravel()
        self.node_var[mask] = idx  # row-major over (i, j)
        self.asm = asm

    def u(self, ii, jj) -> Affine:
        v = self.node_var[ii, jj]
        fixed = v < 0
        return Affine(v[:, None], np.where(fixed, 0.0, 1.0)[:, None], np.where(fixed, self.node_const[ii, jj], 0.0))

    def second_diff(self, ii, jj, e) -> Affine:
        a, b = e
        return self.u(ii + a, jj + b) + self.u(ii - a, jj - b) - 2.0 * self.u(ii, jj)


def _interior_nodes(mesh):
    I = np.arange(1, mesh.N)
    ii, jj = np.meshgrid(I, I, indexing="ij")
    return ii.ravel(), jj.ravel()


def _cells(mesh):
    I = np.arange(1, mesh.N + 1)
    ii, jj = np.meshgrid(I, I, indexing="ij")
    return ii.ravel(), jj.ravel()


def epigraph_of_phi(asm: _Assembler, phi: PhiSpec, grad: tuple[Affine, Affine], h: float):
    """Epigraph blocks for ``h^2 * phi(grad / h)`` summed into the objective.

    ``grad`` holds the scaled backward differences ``h * grad u`` (plain
    differences of grid values); the returned objective contribution equals
    ``h^2 * phi(grad u)`` at tight slacks.
    """
    g1, g2 = grad
    B = len(g1.const)
    tag = phi.tag
    if tag == "squared":
        # 2 * t * (1/2) >= |g|^2  ->  t >= h^2 |grad u|^2
        return asm.cone(
            "rsoc", [None, Affine.constant(0.5, B), g1, g2],
            tight=lambda V: V[:, 2] ** 2 + V[:, 3] ** 2, obj=1.0,
        )
    if tag == "sqrt1pp":
        # t >= sqrt(h^2 + |g|^2) = h sqrt(1 + |grad u|^2)
        return asm.cone(
            "soc", [None, g1, g2, Affine.constant(h, B)],
            tight=lambda V: np.linalg.norm(V[:, 1:], axis=1), obj=h,
        )
    if tag == "euclid":
        return asm.cone("soc", [None, g1, g2], tight=lambda V: np.hypot(V[:, 1], V[:, 2]), obj=h)
    # l1: t_i free with t_i - g_i >= 0 and t_i + g_i >= 0; objective h (t_1 + t_2)
    t = asm.new_vars("free", B, 2)
    asm.objective(t, h)

    def fill(x, t=t, g1=g1, g2=g2):
        x[t[:, 0]] = np.abs(g1.evaluate(x))
        x[t[:, 1]] = np.abs(g2.evaluate(x))

    asm.recipe.append(fill)
    t1, t2 = Affine.var(t[:, 0]), Affine.var(t[:, 1])
    return asm.cone("nonneg", [t1 - g1, t1 + g1, t2 - g2, t2 + g2])


def _objective_blocks(asm, grid: _Grid, phi: PhiSpec):
    mesh = grid.mesh
    ii, jj = _cells(mesh)
    g1 = grid.u(ii, jj) - grid.u(ii - 1, jj)
    g2 = grid.u(ii, jj) - grid.u(ii, jj - 1)
    epigraph_of_phi(asm, phi, (g1, g2), mesh.h)


def _det_cones(asm, grid: _Grid, f_int: np.ndarray):
    """(h^2 H11, h^2 H22, sqrt2 h^2 H12, sqrt2 h^2 sqrt f) in the rotated cone, per interior node."""
    mesh = grid.mesh
    ii, jj = _interior_nodes(mesh)
    h2 = mesh.h**2
    a = grid.second_diff(ii, jj, (1, 0))
    b = grid.second_diff(ii, jj, (0, 1))
    cross = (grid.u(ii + 1, jj + 1) + grid.u(ii - 1, jj - 1) - grid.u(ii + 1, jj - 1) - grid.u(ii - 1, jj + 1)) * (
        SQRT2 / 4.0
    )
    sf = Affine.constant(SQRT2 * h2 * np.sqrt(f_int[ii - 1, jj - 1]), len(ii))
    asm.cone("rsoc", [a, b, cross, sf])


def _finish(asm, grid: _Grid, spec: ProgramSpec, **meta) -> ConicProgram:
    prog = asm.build()
    prog.mesh = spec.mesh
    prog.node_var = grid.node_var.copy()
    prog.node_const = grid.node_const.copy()
    prog.meta = dict(scheme=spec.scheme, N=spec.mesh.N, phi=spec.phi.tag, build_node_var=grid.node_var.copy(), **meta)
    return prog


def build_standard_program(spec: ProgramSpec) -> ConicProgram:
    if spec.scheme not in ("standard", "envelope-boundary"):
        raise InvalidDataError(f"standard builder cannot handle scheme {spec.scheme!r}")
    asm = _Assembler()
    grid = _Grid(asm, spec.mesh, spec.g)
    _objective_blocks(asm, grid, spec.phi)
    _det_cones(asm, grid, spec.rhs_interior())
    return _finish(asm, grid, spec)


def build_monotone_program(spec: ProgramSpec) -> ConicProgram:
    if spec.scheme != "monotone":
        raise InvalidDataError(f"monotone builder cannot handle scheme {spec.scheme!r}")
    mesh = spec.mesh
    N = mesh.N
    asm = _Assembler()
    grid = _Grid(asm, mesh, spec.g)
    _objective_blocks(asm, grid, spec.phi)
    f_int = spec.rhs_interior()
    ii, jj = _interior_nodes(mesh)
    h2 = mesh.h**2

    def admissible(e):
        a, b = e
        return (ii - abs(a) >= 0) & (ii + abs(a) <= N) & (jj - abs(b) >= 0) & (jj + abs(b) <= N)

    # node-major ordering: for each node, its basis-pair cones then its convexity slacks
    per_node = []
    for e1, e2 in spec.stencil.pairs:
        ok = admissible(e1) & admissible(e2)
        per_node.append(("pair", (e1, e2), ok))
    for e in spec.stencil.directions:
        per_node.append(("dir", e, admissible(e)))
    for k in range(len(ii)):
        i, j = ii[k : k + 1], jj[k : k + 1]
        for what, e, ok in per_node:
            if not ok[k]:
                continue
            if what == "pair":
                e1, e2 = e
                l1 = grid.second_diff(i, j, e1) * (1.0 / (e1[0] ** 2 + e1[1] ** 2))
                l2 = grid.second_diff(i, j, e2) * (1.0 / (e2[0] ** 2 + e2[1] ** 2))
                sf = Affine.constant(SQRT2 * h2 * np.sqrt(f_int[i[0] - 1, j[0] - 1]), 1)
                asm.cone("rsoc", [l1, l2, sf])
            else:
                asm.cone("nonneg", [grid.second_diff(i, j, e)])
    return _finish(asm, grid, spec, width=spec.stencil.width)


def build_envelope_program(spec: ProgramSpec) -> ConicProgram:
    """Convex envelope programs.

    ``envelope-boundary``: minimize the energy over locally discrete convex
    functions with the given boundary values.

    ``envelope-obstacle``: maximize ``h^2 * sum(u)`` over locally discrete
    convex functions below the obstacle at every node. The energy is
    invariant under constant shifts, so it cannot select the envelope when the
    boundary is free; the largest minorant can.
    """
    if spec.scheme == "envelope-boundary":
        return build_standard_program(spec)
    if spec.scheme != "envelope-obstacle":
        raise InvalidDataError(f"envelope builder cannot handle scheme {spec.scheme!r}")
    mesh = spec.mesh
    asm = _Assembler()
    grid = _Grid(asm, mesh, None, all_nodes=True)
    asm.objective(grid.node_var.ravel(), -mesh.h**2)
    _det_cones(asm, grid, np.zeros((mesh.N - 1, mesh.N - 1)))
    I = np.arange(mesh.N + 1)
    ii, jj = (a.ravel() for a in np.meshgrid(I, I, indexing="ij"))
    gap = Affine.constant(spec.obstacle.values[ii, jj], len(ii)) - grid.u(ii, jj)
    asm.cone("nonneg", [gap])
    return _finish(asm, grid, spec)


def build_program(spec: ProgramSpec) -> ConicProgram:
    if spec.scheme == "monotone":
        return build_monotone_program(spec)
    if spec.scheme == "standard":
        return build_standard_program(spec)
    return build_envelope_program(spec)


# --------------------------------------------------------------------------
# presolve


def canonicalize(program: ConicProgram) -> ConicProgram:
    """Presolve into canonical form.

    Free variables pinned by singleton rows are eliminated and folded into
    ``b`` and ``d``; empty and duplicate rows are dropped; dependent rows are
    removed when detectable. Variable and row order is otherwise preserved.
    Idempotent.
    """
    A = program.A.tocsr().copy()
    A.sum_duplicates()
    A.eliminate_zeros()
    b = program.b.astype(float).copy()
    c = program.c.astype(float).copy()
    d = float(program.d)
    layout = ConeLayout(program.cones)
    n = A.shape[1]
    is_free = np.zeros(n, dtype=bool)
    is_free[layout.free] = True
    keep_col = np.ones(n, dtype=bool)
    fixed_val = np.zeros(n)
    keep_row = np.ones(A.shape[0], dtype=bool)

    while True:
        nnz_row = np.diff(A.indptr)
        cand = np.nonzero(keep_row & (nnz_row == 1))[0]
        cand = [r for r in cand if is_free[A.indices[A.indptr[r]]] and keep_col[A.indices[A.indptr[r]]]]
        if not cand:
            break
        for r in cand:
            j = A.indices[A.indptr[r]]
            if not keep_col[j]:
                continue
            val = b[r] / A.data[A.indptr[r]]
            fixed_val[j] = val
            keep_col[j] = False
            keep_row[r] = False
            col = A[:, j].toarray().ravel()
            b -= col * val
            d += c[j] * val
        # zero the eliminated columns so they no longer count in rows
        A = (A @ sp.diags(keep_col.astype(float))).tocsr()
        A.eliminate_zeros()

    nnz_row = np.diff(A.indptr)
    empty = keep_row & (nnz_row == 0)
    if np.any(np.abs(b[empty]) > 1e-12 * (1 + np.abs(b).max(initial=0))):
        raise InfeasiblePresolveError("an equality row with no variables has a nonzero right-hand side")
    keep_row &= ~empty

    seen: dict[tuple, int] = {}
    for r in np.nonzero(keep_row)[0]:
        sl = slice(A.indptr[r], A.indptr[r + 1])
        key = (A.indices[sl].tobytes(), A.data[sl].tobytes())
        if key in seen:
            if b[r] != b[seen[key]]:
                raise InfeasiblePresolveError(f"rows {seen[key]} and {r} have equal coefficients but different b")
            keep_row[r] = False
        else:
            seen[key] = r

    A = A[keep_row][:, keep_col].tocsr()
    b = b[keep_row]
    A, b = _drop_dependent_rows(A, b)

    new_index = -np.ones(n, dtype=int)
    new_index[keep_col] = np.arange(keep_col.sum())
    cones = []
    pos = 0
    for kind, dim in program.cones:
        kept = int(keep_col[pos : pos + dim].sum())
        if kind != "free" and kept != dim:
            raise AssertionError("presolve removed a cone variable")
        if kept:
            cones.append((kind, kept))
        pos += dim
    cones = _merge_free(cones)

    out = replace(program, c=c[keep_col], d=d, A=A, b=b, cones=tuple(cones), meta=dict(program.meta))
    if program.node_var is not None:
        nv = program.node_var
        out.node_var = np.where(nv >= 0, new_index[np.maximum(nv, 0)], -1)
        const = program.node_const.copy()
        elim = (nv >= 0) & (out.node_var < 0)
        const[elim] = fixed_val[nv[elim]]
        out.node_const = const
    origin = program._origin if program._origin is not None else np.arange(n)
    out._origin = origin[keep_col]
    return out


def _merge_free(cones):
    out = []
    for kind, dim in cones:
        if kind == "free" and out and out[-1][0] == "free":
            out[-1] = ("free", out[-1][1] + dim)
        else:
            out.append((kind, dim))
    return out


def _drop_dependent_rows(A: sp.csr_matrix, b: np.ndarray, dense_limit: int = 3000):
    """Remove linearly dependent rows; structural check first, dense QR for small A."""
    m = A.shape[0]
    if m == 0:
        return A, b
    csc = A.tocsc()
    col_count = np.diff(csc.indptr)
    private = np.zeros(m, dtype=bool)
    singles = np.nonzero(col_count == 1)[0]
    private[csc.indices[csc.indptr[singles]]] = True
    if private.all() or m > dense_limit:
        return A, b
    M = A.toarray()
    _, R, piv = scipy.linalg.qr(M.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    tol = max(M.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank == m:
        return A, b
    keep = np.sort(piv[:rank])
    Ak, bk = M[keep], b[keep]
    sol = np.linalg.lstsq(Ak, bk, rcond=None)[0]
    if np.linalg.norm(M @ sol - b) > 1e-9 * (1 + np.linalg.norm(b)):
        raise InfeasiblePresolveError("dependent equality rows are inconsistent")
    return sp.csr_matrix(Ak), bk


# --------------------------------------------------------------------------
# feasibility predicates on mesh functions


def is_feasible(spec: ProgramSpec, v: MeshFunction, tol: float = 0.0) -> bool:
    """Check ``v`` against the discrete feasible set of ``spec`` directly (no cones)."""
    mesh = spec.mesh
    f = spec.rhs_interior()
    if spec.scheme == "envelope-obstacle":
        if np.any(v.values > spec.obstacle.values + tol):
            return False
        return is_locally_discrete_convex(v, tol)
    bd = mesh.boundary_mask()
    if np.any(np.abs(v.values[bd] - spec.g.values[bd]) > tol):
        return False
    if spec.scheme == "monotone":
        if not is_wide_stencil_convex(v, spec.stencil, tol):
            return False
        return bool(np.all(monotone_ma(v, spec.stencil) >= f - tol))
    det, lam = det_and_lambda_min(discrete_hessian(v))
    return bool(np.all(lam >= -tol) and np.all(det >= f - tol))
