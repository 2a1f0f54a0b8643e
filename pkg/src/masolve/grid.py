"""Uniform meshes on the unit square, mesh functions and finite differences.

Nodes are stored row-major by integer coordinates ``(i, j)`` with
``x = i * h`` and ``y = j * h``; arrays have shape ``(N + 1, N + 1)`` and
axis 0 is the x index. All stencils are integer offsets.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidMeshError, OutOfStencilError, SamplingError


@dataclass(frozen=True)
class Mesh:
    N: int

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 2:
            raise InvalidMeshError(f"need an integer N >= 2, got {self.N!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N + 1, self.N + 1)

    @property
    def n_nodes(self) -> int:
        return (self.N + 1) ** 2

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as two ``(N+1, N+1)`` arrays (x, y)."""
        z = np.arange(self.N + 1) / self.N
        return np.meshgrid(z, z, indexing="ij")

    def interior_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    def boundary_mask(self) -> np.ndarray:
        return ~self.interior_mask()

    def backward_mask(self) -> np.ndarray:
        """Nodes where the backward gradient is defined (both indices >= 1)."""
        m = np.zeros(self.shape, dtype=bool)
        m[1:, 1:] = True
        return m

    def interior(self) -> np.ndarray:
        return np.argwhere(self.interior_mask())

    def boundary(self) -> np.ndarray:
        return np.argwhere(self.boundary_mask())

    def backward_domain(self) -> np.ndarray:
        return np.argwhere(self.backward_mask())

    def contains(self, i: int, j: int) -> bool:
        return 0 <= i <= self.N and 0 <= j <= self.N


def build_mesh(N: int) -> Mesh:
    return Mesh(N)


@dataclass(frozen=True, eq=False)
class MeshFunction:
    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.mesh.shape:
            raise ValueError(f"values shape {vals.shape} does not match mesh {self.mesh.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("mesh function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        if isinstance(other, MeshFunction):
            _check_same_mesh(self, other)
            return MeshFunction(self.mesh, self.values + other.values)
        return MeshFunction(self.mesh, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, MeshFunction):
            _check_same_mesh(self, other)
            return MeshFunction(self.mesh, self.values - other.values)
        return MeshFunction(self.mesh, self.values - other)

    def __neg__(self):
        return MeshFunction(self.mesh, -self.values)

    def __mul__(self, scalar):
        return MeshFunction(self.mesh, self.values * float(scalar))

    __rmul__ = __mul__

    def __call__(self, i: int, j: int) -> float:
        return float(self.values[i, j])

    def interior_values(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]

    # --- serialization -------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "value"])
        n = self.mesh.N
        for i in range(n + 1):
            for j in range(n + 1):
                w.writerow([i, j, format(self.values[i, j], ".17g")])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MeshFunction":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty mesh function CSV")
        idx = np.array([(int(r["i"]), int(r["j"])) for r in rows])
        N = int(idx.max())
        vals = np.full((N + 1, N + 1), np.nan)
        for (i, j), r in zip(idx, rows):
            vals[i, j] = float(r["value"])
        if np.isnan(vals).any():
            raise ValueError("mesh function CSV does not cover every node")
        return cls(build_mesh(N), vals)

    def to_json(self) -> str:
        # float repr is shortest round-trip, so JSON is bit-exact
        return json.dumps({"N": self.mesh.N, "values": self.values.ravel().tolist()})

    @classmethod
    def from_json(cls, text: str) -> "MeshFunction":
        data = json.loads(text)
        mesh = build_mesh(int(data["N"]))
        return cls(mesh, np.asarray(data["values"], dtype=float).reshape(mesh.shape))


def _check_same_mesh(a: MeshFunction, b: MeshFunction):
    if a.mesh != b.mesh:
        raise ValueError("mesh functions live on different meshes")


def sample(fn: Callable, mesh: Mesh) -> MeshFunction:
    """Restrict ``fn(x, y)`` to the mesh nodes.

    ``fn`` is first tried on coordinate arrays; scalar-only callables fall back
    to pointwise evaluation.
    """
    X, Y = mesh.coords()
    try:
        vals = np.asarray(fn(X, Y), dtype=float)
        if vals.shape != mesh.shape:
            vals = np.broadcast_to(vals, mesh.shape).astype(float)
    except (TypeError, ValueError):
        vals = np.array([[fn(x, y) for x, y in zip(rx, ry)] for rx, ry in zip(X, Y)], dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise SamplingError(f"non-finite value at node ({i}, {j}) = ({X[i, j]}, {Y[i, j]})")
    return MeshFunction(mesh, vals)


_KINDS = {"forward": (1, 0), "backward": (0, -1), "centered": (1, -1)}


def diff(v: MeshFunction, axis: int, kind: str, node: tuple[int, int]) -> float:
    """First-order difference quotient of ``v`` at ``node`` along ``axis`` (1 or 2)."""
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    if kind not in _KINDS:
        raise ValueError(f"unknown difference kind {kind!r}")
    mesh = v.mesh
    i, j = node
    e = (1, 0) if axis == 1 else (0, 1)
    hi, lo = _KINDS[kind]
    p = (i + hi * e[0], j + hi * e[1])
    q = (i + lo * e[0], j + lo * e[1])
    if not (mesh.contains(i, j) and mesh.contains(*p) and mesh.contains(*q)):
        raise OutOfStencilError(f"{kind} difference along axis {axis} leaves the mesh at {node}")
    width = (hi - lo) * mesh.h
    return (v.values[p] - v.values[q]) / width


@dataclass(frozen=True, eq=False)
class GradField:
    """Backward gradient on the nodes ``(i, j)`` with ``i, j >= 1``.

    ``gx[k, l]`` belongs to node ``(k + 1, l + 1)``.
    """

    mesh: Mesh
    gx: np.ndarray
    gy: np.ndarray

    def at(self, i: int, j: int) -> np.ndarray:
        if i < 1 or j < 1:
            raise OutOfStencilError(f"backward gradient undefined at ({i}, {j})")
        return np.array([self.gx[i - 1, j - 1], self.gy[i - 1, j - 1]])

    def stacked(self) -> np.ndarray:
        return np.stack([self.gx, self.gy], axis=-1)


def backward_gradient(v: MeshFunction) -> GradField:
    u = v.values
    h = v.mesh.h
    gx = (u[1:, 1:] - u[:-1, 1:]) / h
    gy = (u[1:, 1:] - u[1:, :-1]) / h
    return GradField(v.mesh, gx, gy)


@dataclass(frozen=True)
class Norms:
    sup_interior: float  # |v|_{0,inf}
    l2: float  # ||v||_0
    h1_seminorm: float  # |v|_1
    sup_all: float  # ||v||_{2,inf}: max of the three sup semi-norms
    grad_sup: float  # |v|_{1,inf}
    hess_sup: float  # |v|_{2,inf}


def _forward_sup(a: np.ndarray, h: float) -> float:
    """|a|_{1,inf} of an array indexed by interior nodes, over nodes where defined."""
    out = 0.0
    for ax in (0, 1):
        d = np.diff(a, axis=ax) / h
        if d.size:
            out = max(out, float(np.abs(d).max()))
    return out


def norms(v: MeshFunction) -> Norms:
    u = v.values
    h = v.mesh.h
    inner = u[1:-1, 1:-1]
    sup0 = float(np.abs(inner).max())
    l2 = float(np.sqrt(h**2 * np.sum(inner**2)))
    # forward differences at interior nodes; the forward neighbour always exists
    fx = (u[2:, 1:-1] - u[1:-1, 1:-1]) / h
    fy = (u[1:-1, 2:] - u[1:-1, 1:-1]) / h
    h1 = float(np.sqrt(h**2 * (np.sum(fx**2) + np.sum(fy**2))))
    grad_sup = float(max(np.abs(fx).max(), np.abs(fy).max()))
    d11 = (u[2:, 1:-1] - 2 * inner + u[:-2, 1:-1]) / h**2
    d22 = (u[1:-1, 2:] - 2 * inner + u[1:-1, :-2]) / h**2
    d12 = (u[2:, 2:] + u[:-2, :-2] - u[2:, :-2] - u[:-2, 2:]) / (4 * h**2)
    hess_sup = max(_forward_sup(d, h) for d in (d11, d22, d12))
    return Norms(
        sup_interior=sup0,
        l2=l2,
        h1_seminorm=h1,
        sup_all=max(sup0, grad_sup, hess_sup),
        grad_sup=grad_sup,
        hess_sup=hess_sup,
    )
