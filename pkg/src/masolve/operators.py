"""Integrands, the discrete energy, discrete Hessians and the monotone operator."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import NondifferentiableError, OperatorUndefinedError, UnsupportedStencilError
from .grid import Mesh, MeshFunction, backward_gradient


# --------------------------------------------------------------------------
# integrands


@dataclass(frozen=True)
class PhiSpec:
    """A convex, nonnegative integrand of the gradient.

    ``tag`` is one of ``squared`` (|p|^2), ``sqrt1pp`` (sqrt(1+|p|^2)),
    ``l1`` (|p1|+|p2|) or ``euclid`` (|p|).
    """

    tag: str

    def __post_init__(self):
        if self.tag not in PHI_TAGS:
            raise ValueError(f"unknown integrand {self.tag!r}; expected one of {PHI_TAGS}")

    @property
    def smooth(self) -> bool:
        return self.tag in ("squared", "sqrt1pp")

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        p1, p2 = p[..., 0], p[..., 1]
        if self.tag == "squared":
            return p1**2 + p2**2
        if self.tag == "sqrt1pp":
            return np.sqrt(1.0 + p1**2 + p2**2)
        if self.tag == "l1":
            return np.abs(p1) + np.abs(p2)
        return np.hypot(p1, p2)

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        if self.tag == "squared":
            return 2.0 * p
        if self.tag == "sqrt1pp":
            return p / np.sqrt(1.0 + np.sum(p**2, axis=-1, keepdims=True))
        if self.tag == "l1":
            if np.any(p == 0):
                raise NondifferentiableError("|p1|+|p2| is not differentiable where a component is 0")
            return np.sign(p)
        r = np.linalg.norm(p, axis=-1, keepdims=True)
        if np.any(r == 0):
            raise NondifferentiableError("|p| is not differentiable at p = 0")
        return p / r


PHI_TAGS = ("squared", "sqrt1pp", "l1", "euclid")
PHIS = {tag: PhiSpec(tag) for tag in PHI_TAGS}


def get_phi(phi) -> PhiSpec:
    return phi if isinstance(phi, PhiSpec) else PHIS[phi] if phi in PHIS else PhiSpec(phi)


def phi_eval(phi, p) -> float:
    return get_phi(phi)(p)


def phi_grad(phi, p) -> np.ndarray:
    return get_phi(phi).grad(p)


def j_h(v: MeshFunction, phi) -> float:
    """h^2 times the sum of phi(backward gradient) over the backward domain."""
    g = backward_gradient(v)
    return float(v.mesh.h**2 * np.sum(get_phi(phi)(g.stacked())))


# --------------------------------------------------------------------------
# discrete Hessian


@dataclass(frozen=True, eq=False)
class HessianField:
    """Discrete Hessian entries on interior nodes; ``h11[k, l]`` is node ``(k+1, l+1)``."""

    mesh: Mesh
    h11: np.ndarray
    h22: np.ndarray
    h12: np.ndarray

    def at(self, i: int, j: int) -> np.ndarray:
        k, l = i - 1, j - 1
        return np.array([[self.h11[k, l], self.h12[k, l]], [self.h12[k, l], self.h22[k, l]]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "h11", "h22", "h12"])
        for (k, l), a in np.ndenumerate(self.h11):
            w.writerow([k + 1, l + 1, repr(float(a)), repr(float(self.h22[k, l])), repr(float(self.h12[k, l]))])
        return buf.getvalue()


def discrete_hessian(v: MeshFunction) -> HessianField:
    u = v.values
    h2 = v.mesh.h**2
    c = u[1:-1, 1:-1]
    h11 = (u[2:, 1:-1] - 2 * c + u[:-2, 1:-1]) / h2
    h22 = (u[1:-1, 2:] - 2 * c + u[1:-1, :-2]) / h2
    h12 = (u[2:, 2:] + u[:-2, :-2] - u[2:, :-2] - u[:-2, 2:]) / (4 * h2)
    return HessianField(v.mesh, h11, h22, h12)


def det_and_lambda_min(H):
    """Determinant and smallest eigenvalue of symmetric 2x2 matrices.

    Accepts a ``2x2`` array, a stack ``(..., 2, 2)`` or a :class:`HessianField`.
    """
    if isinstance(H, HessianField):
        a, b, c = H.h11, H.h22, H.h12
    else:
        H = np.asarray(H, dtype=float)
        a, b, c = H[..., 0, 0], H[..., 1, 1], H[..., 0, 1]
    det = a * b - c * c
    # same as (tr - sqrt(tr^2 - 4 det)) / 2, without the cancellation
    lam = 0.5 * (a + b) - np.hypot(0.5 * (a - b), c)
    return det, lam


def is_locally_discrete_convex(v: MeshFunction, tol: float = 0.0) -> bool:
    _, lam = det_and_lambda_min(discrete_hessian(v))
    return bool(np.all(lam >= -tol))


# --------------------------------------------------------------------------
# wide stencils


@dataclass(frozen=True)
class StencilSet:
    width: int
    pairs: tuple  # ((a1, a2), (b1, b2)) orthogonal integer directions
    directions: tuple

    @property
    def n_points(self) -> int:
        return 1 + 2 * len(self.directions)


_WIDTH_PAIRS = {
    1: (((1, 0), (0, 1)), ((1, 1), (1, -1))),
    2: (((1, 0), (0, 1)), ((1, 1), (1, -1)), ((1, 2), (2, -1)), ((2, 1), (1, -2))),
}


def stencil_bases(width: int = 1) -> StencilSet:
    if width not in _WIDTH_PAIRS:
        raise UnsupportedStencilError(f"stencil width {width!r} not supported (use 1 or 2)")
    pairs = _WIDTH_PAIRS[width]
    directions = tuple(d for pair in pairs for d in pair)
    return StencilSet(width, pairs, directions)


def second_difference(v: MeshFunction, e: tuple[int, int]) -> np.ndarray:
    """v(x+e) - 2v(x) + v(x-e) at interior nodes; NaN where x +- e leaves the mesh."""
    u = v.values
    N = v.mesh.N
    a, b = e
    out = np.full((N - 1, N - 1), np.nan)
    I = np.arange(1, N)
    ii, jj = np.meshgrid(I, I, indexing="ij")
    ok = (
        (ii + a >= 0) & (ii + a <= N) & (ii - a >= 0) & (ii - a <= N)
        & (jj + b >= 0) & (jj + b <= N) & (jj - b >= 0) & (jj - b <= N)
    )
    pi, pj = ii[ok], jj[ok]
    out[ok] = u[pi + a, pj + b] - 2 * u[pi, pj] + u[pi - a, pj - b]
    return out


def monotone_ma(v: MeshFunction, stencil: StencilSet) -> np.ndarray:
    """Monotone Monge-Ampere operator at interior nodes, shape ``(N-1, N-1)``.

    Minimum over the admissible orthogonal pairs of the product of normalized
    directional second differences. A pair is admissible at ``x`` when all of
    ``x +- alpha_i`` lie in the closed mesh.
    """
    h2 = v.mesh.h**2
    products = []
    for e1, e2 in stencil.pairs:
        l1 = second_difference(v, e1) / (h2 * (e1[0] ** 2 + e1[1] ** 2))
        l2 = second_difference(v, e2) / (h2 * (e2[0] ** 2 + e2[1] ** 2))
        products.append(l1 * l2)
    P = np.stack(products)
    undefined = np.all(np.isnan(P), axis=0)
    if undefined.any():
        k, l = np.argwhere(undefined)[0]
        raise OperatorUndefinedError(f"no admissible basis pair at node ({k + 1}, {l + 1})")
    return np.nanmin(P, axis=0)


def is_wide_stencil_convex(v: MeshFunction, stencil: StencilSet, tol: float = 0.0) -> bool:
    for e in stencil.directions:
        d = second_difference(v, e)
        d = d[~np.isnan(d)]
        if np.any(d < -tol):
            return False
    return True
