"""Benchmark problems with closed-form solutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AtomPlacementError, SamplingError, UnknownCaseError
from .grid import Mesh, MeshFunction, sample

Atom = tuple[tuple[float, float], float]


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # keep pytest from collecting it

    name: str
    exact: Callable  # exact solution; also supplies the boundary data
    f: Callable | None = None  # density, or None when the data is atomic
    atoms: tuple[Atom, ...] = ()
    phis: tuple[str, ...] = ("squared", "sqrt1pp", "l1", "euclid")
    default_phi: str = "sqrt1pp"

    @property
    def atomic(self) -> bool:
        return self.f is None

    def g(self, x, y):
        return self.exact(x, y)

    def rhs(self, mesh: Mesh) -> MeshFunction:
        if self.atomic:
            return discretize_measure(self.atoms, mesh)
        # f only matters at interior nodes and may blow up on the boundary
        X, Y = mesh.coords()
        vals = np.zeros(mesh.shape)
        vals[1:-1, 1:-1] = self.f(X[1:-1, 1:-1], Y[1:-1, 1:-1])
        if not np.all(np.isfinite(vals)):
            raise SamplingError(f"{self.name}: right-hand side is not finite at an interior node")
        return MeshFunction(mesh, vals)

    def boundary(self, mesh: Mesh) -> MeshFunction:
        return sample(self.exact, mesh)


def _dirac_exact(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    band = np.abs(y - 0.5)
    cone = np.minimum(np.hypot(x - 0.25, y - 0.5), np.hypot(x - 0.75, y - 0.5))
    return np.where((x > 0.25) & (x < 0.75), band, cone)


_CASES = {
    "test1": TestCase(
        "test1",
        exact=lambda x, y: np.exp((x**2 + y**2) / 2),
        f=lambda x, y: (1 + x**2 + y**2) * np.exp(x**2 + y**2),
    ),
    "test2": TestCase(
        "test2",
        exact=lambda x, y: -np.sqrt(2 - x**2 - y**2),
        f=lambda x, y: 2 / (2 - x**2 - y**2) ** 2,
    ),
    "test3": TestCase(
        "test3",
        exact=lambda x, y: (x - 0.5) ** 2 + (y - 0.5) ** 2,
        f=lambda x, y: 4 + 0 * x,
    ),
    "test4": TestCase(
        "test4",
        exact=lambda x, y: np.abs(x - 0.5) + 0 * y,
        f=lambda x, y: 0 * x,
    ),
    "dirac2": TestCase(
        "dirac2",
        exact=_dirac_exact,
        atoms=(((0.25, 0.5), np.pi / 2), ((0.75, 0.5), np.pi / 2)),
        phis=("euclid", "squared"),
        default_phi="euclid",
    ),
}

CASE_NAMES = tuple(_CASES)


def test_case(name: str) -> TestCase:
    try:
        return _CASES[name]
    except KeyError:
        raise UnknownCaseError(f"unknown case {name!r}; expected one of {CASE_NAMES}") from None


test_case.__test__ = False


def discretize_measure(atoms, mesh: Mesh) -> MeshFunction:
    """Lump point masses onto nodes: ``mass / h^2`` at each atom, zero elsewhere."""
    N = mesh.N
    vals = np.zeros(mesh.shape)
    for (px, py), mass in atoms:
        zi, zj = px * N, py * N
        i, j = round(zi), round(zj)
        if abs(zi - i) > 1e-9 or abs(zj - j) > 1e-9:
            raise AtomPlacementError(
                f"atom at ({px}, {py}) is not a node for N={N}; N must be a multiple of {_denominator(px, py)}"
            )
        if not (0 < i < N and 0 < j < N):
            raise AtomPlacementError(f"atom at ({px}, {py}) is not an interior node")
        vals[i, j] += mass / mesh.h**2
    return MeshFunction(mesh, vals)


def _denominator(*coords) -> int:
    from fractions import Fraction
    from math import lcm

    return lcm(*(Fraction(c).limit_denominator(1 << 20).denominator for c in coords))
