"""Vectorized algebra for products of free, nonnegative, second-order and
rotated second-order cones.

Blocks of the same kind and dimension are stacked into ``(B, d)`` index
arrays so that scaling, Jordan products and step lengths are evaluated for
all blocks at once.

Conventions: the second-order cone is ``{(t, z): t >= |z|}``; the rotated cone
is ``{(u, v, w): 2uv >= |w|^2, u, v >= 0}``. The rotated cone is handled by the
symmetric orthogonal map ``T(u, v, w) = ((u+v)/sqrt2, (u-v)/sqrt2, w)``, which
carries it onto the second-order cone without changing the variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

KINDS = ("free", "nonneg", "soc", "rsoc")
_R2 = np.sqrt(0.5)


def _T(V: np.ndarray) -> np.ndarray:
    out = V.copy()
    out[:, 0] = _R2 * (V[:, 0] + V[:, 1])
    out[:, 1] = _R2 * (V[:, 0] - V[:, 1])
    return out


def _J(V: np.ndarray) -> np.ndarray:
    out = -V
    out[:, 0] = V[:, 0]
    return out


def soc_residual(V: np.ndarray) -> np.ndarray:
    """t - |z| for each row; nonnegative iff the row is in the cone."""
    return V[:, 0] - np.linalg.norm(V[:, 1:], axis=1)


def rsoc_residual(V: np.ndarray) -> np.ndarray:
    return soc_residual(_T(V))


def jordan_product(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    out = U[:, :1] * V + V[:, :1] * U
    out[:, 0] = np.einsum("ij,ij->i", U, V)
    return out


def jordan_divide(L: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Solve ``L o X = R`` for X (L in the interior of the cone)."""
    l0 = L[:, 0]
    l1 = L[:, 1:]
    det = l0**2 - np.einsum("ij,ij->i", l1, l1)
    x0 = (l0 * R[:, 0] - np.einsum("ij,ij->i", l1, R[:, 1:])) / det
    out = np.empty_like(R)
    out[:, 0] = x0
    out[:, 1:] = (R[:, 1:] - x0[:, None] * l1) / l0[:, None]
    return out


def soc_max_step(X: np.ndarray, D: np.ndarray) -> float:
    """Largest alpha >= 0 with X + alpha D in the cone, for every row."""
    if X.size == 0:
        return np.inf
    # per-row normalization keeps the quadratic in range; alpha scales by sx / sd
    sx = np.maximum(np.abs(X).max(axis=1), 1e-300)
    sd = np.maximum(np.abs(D).max(axis=1), 1e-300)
    X, D = X / sx[:, None], D / sd[:, None]
    x0, x1 = X[:, 0], X[:, 1:]
    d0, d1 = D[:, 0], D[:, 1:]
    a = d0**2 - np.einsum("ij,ij->i", d1, d1)
    b = x0 * d0 - np.einsum("ij,ij->i", x1, d1)
    c = np.maximum(x0**2 - np.einsum("ij,ij->i", x1, x1), 0.0)
    disc = b * b - a * c
    alpha = np.full(len(X), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.abs(a) <= 1e-14 * (np.abs(b) + np.abs(c) + 1e-300)
        lin_neg = lin & (b < 0)
        alpha[lin_neg] = -c[lin_neg] / (2 * b[lin_neg])
        quad = ~lin & (disc >= 0)
        sq = np.sqrt(np.where(quad, disc, 0.0))
        q = -(b + np.where(b >= 0, sq, -sq))
        r1 = np.where(quad, q / a, np.inf)
        r2 = np.where(quad & (q != 0), c / q, np.inf)
    r1 = np.where(r1 > 0, r1, np.inf)
    r2 = np.where(r2 > 0, r2, np.inf)
    alpha = np.minimum(alpha, np.minimum(r1, r2))
    # the direction leaves through the apex region when x0 + alpha d0 < 0
    neg = d0 < 0
    if np.any(neg):
        alpha[neg] = np.minimum(alpha[neg], -x0[neg] / d0[neg])
    return float((alpha * (sx / sd)).min())


@dataclass
class _Group:
    kind: str  # "soc" or "rsoc"
    dim: int
    idx: np.ndarray  # (B, dim)


class ConeLayout:
    """Index bookkeeping for a product cone given as a list of ``(kind, dim)`` blocks."""

    def __init__(self, blocks):
        free, nonneg = [], []
        groups: dict[tuple[str, int], list] = {}
        pos = 0
        for kind, dim in blocks:
            dim = int(dim)
            if kind not in KINDS or dim < 1:
                raise ValueError(f"bad cone block ({kind!r}, {dim})")
            rng = np.arange(pos, pos + dim)
            if kind == "free":
                free.append(rng)
            elif kind == "nonneg":
                nonneg.append(rng)
            else:
                if dim < (2 if kind == "soc" else 3):
                    raise ValueError(f"{kind} block needs a larger dimension than {dim}")
                groups.setdefault((kind, dim), []).append(rng)
            pos += dim
        self.n = pos
        self.free = np.concatenate(free) if free else np.zeros(0, dtype=int)
        self.nonneg = np.concatenate(nonneg) if nonneg else np.zeros(0, dtype=int)
        self.groups = [_Group(k, d, np.array(v)) for (k, d), v in sorted(groups.items())]
        self.cone_mask = np.ones(self.n, dtype=bool)
        self.cone_mask[self.free] = False
        self.degree = len(self.nonneg) + sum(len(g.idx) for g in self.groups)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.n)
        e[self.nonneg] = 1.0
        for g in self.groups:
            if g.kind == "soc":
                e[g.idx[:, 0]] = 1.0
            else:
                e[g.idx[:, 0]] = _R2
                e[g.idx[:, 1]] = _R2
        return e

    def algebra_identity(self) -> np.ndarray:
        """Identity element in algebra coordinates (rotated blocks mapped by T)."""
        e = np.zeros(self.n)
        e[self.nonneg] = 1.0
        for g in self.groups:
            e[g.idx[:, 0]] = 1.0
        return e

    def dot(self, u: np.ndarray, v: np.ndarray) -> float:
        m = self.cone_mask
        return float(u[m] @ v[m])

    def min_residual(self, x: np.ndarray) -> float:
        """Smallest per-block distance-to-boundary proxy; >= 0 iff x is in the cone."""
        r = [np.inf]
        if len(self.nonneg):
            r.append(float(x[self.nonneg].min()))
        for g in self.groups:
            V = x[g.idx]
            res = soc_residual(V) if g.kind == "soc" else rsoc_residual(V)
            r.append(float(res.min()))
        return min(r)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the cone (free part untouched)."""
        out = x.copy()
        out[self.nonneg] = np.maximum(x[self.nonneg], 0.0)
        for g in self.groups:
            V = x[g.idx]
            if g.kind == "rsoc":
                V = _T(V)
            P = _project_soc(V)
            out[g.idx] = _T(P) if g.kind == "rsoc" else P
        return out

    def max_step(self, x: np.ndarray, dx: np.ndarray) -> float:
        alpha = np.inf
        if len(self.nonneg):
            xn, dn = x[self.nonneg], dx[self.nonneg]
            neg = dn < 0
            if neg.any():
                alpha = min(alpha, float(np.min(-xn[neg] / dn[neg])))
        for g in self.groups:
            X, D = x[g.idx], dx[g.idx]
            if g.kind == "rsoc":
                X, D = _T(X), _T(D)
            alpha = min(alpha, soc_max_step(X, D))
        return alpha

    def max_step_algebra(self, lam: np.ndarray, d: np.ndarray) -> float:
        """Like :meth:`max_step` for vectors already in algebra coordinates (all blocks plain SOC)."""
        alpha = np.inf
        if len(self.nonneg):
            ln, dn = lam[self.nonneg], d[self.nonneg]
            neg = dn < 0
            if neg.any():
                alpha = min(alpha, float(np.min(-ln[neg] / dn[neg])))
        for g in self.groups:
            alpha = min(alpha, soc_max_step(lam[g.idx], d[g.idx]))
        return alpha

    def jordan_product(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.nonneg] = u[self.nonneg] * v[self.nonneg]
        for g in self.groups:
            out[g.idx] = jordan_product(u[g.idx], v[g.idx])
        return out

    def complementarity(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Jordan product of x and s in algebra coordinates; zero iff x, s in K are complementary."""
        out = np.zeros(self.n)
        out[self.nonneg] = x[self.nonneg] * s[self.nonneg]
        for g in self.groups:
            X, S = x[g.idx], s[g.idx]
            if g.kind == "rsoc":
                X, S = _T(X), _T(S)
            out[g.idx] = jordan_product(X, S)
        return out

    def complementarity_jacobian(self, v: np.ndarray) -> sp.csr_matrix:
        """Derivative of ``complementarity(x, v)`` with respect to x (free rows are zero)."""
        rows, cols, vals = [self.nonneg], [self.nonneg], [v[self.nonneg]]
        for g in self.groups:
            B, d = g.idx.shape
            V = v[g.idx]
            if g.kind == "rsoc":
                V = _T(V)
            arrow = np.zeros((B, d, d))
            arrow[:, 0, :] = V
            arrow[:, :, 0] = V
            k = np.arange(1, d)
            arrow[:, k, k] = V[:, :1]
            if g.kind == "rsoc":
                arrow = arrow @ _T(np.eye(d))  # T is symmetric
            rows.append(np.repeat(g.idx, d, axis=1).ravel())
            cols.append(np.tile(g.idx, (1, d)).ravel())
            vals.append(arrow.ravel())
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n, self.n)
        )

    def jordan_divide(self, lam: np.ndarray, r: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.nonneg] = r[self.nonneg] / lam[self.nonneg]
        for g in self.groups:
            out[g.idx] = jordan_divide(lam[g.idx], r[g.idx])
        return out

    def scaling(self, x: np.ndarray, s: np.ndarray) -> "NTScaling":
        return NTScaling(self, x, s)


def _project_soc(V: np.ndarray) -> np.ndarray:
    t = V[:, 0]
    z = V[:, 1:]
    nz = np.linalg.norm(z, axis=1)
    out = V.copy()
    inside = nz <= t
    polar = nz <= -t
    mid = ~(inside | polar)
    out[polar] = 0.0
    a = 0.5 * (t[mid] + nz[mid])
    out[mid, 0] = a
    out[mid, 1:] = (a / nz[mid])[:, None] * z[mid]
    return out


class NTScaling:
    """Nesterov-Todd scaling ``W`` with ``W x = W^{-T} s = lambda``.

    ``W`` maps original coordinates to algebra coordinates; for rotated blocks
    it is ``W_soc T``. ``hessian_blocks`` returns ``W^T W`` per block, the
    matrix that enters the KKT system.
    """

    def __init__(self, layout: ConeLayout, x: np.ndarray, s: np.ndarray):
        self.layout = layout
        nn = layout.nonneg
        self.d = np.sqrt(s[nn] / x[nn])  # nonnegative orthant: W = diag(sqrt(s/x))
        self.blocks = []
        for g in layout.groups:
            X, S = x[g.idx], s[g.idx]
            if g.kind == "rsoc":
                X, S = _T(X), _T(S)
            xn = np.sqrt(np.maximum(X[:, 0] ** 2 - np.einsum("ij,ij->i", X[:, 1:], X[:, 1:]), 1e-300))
            sn = np.sqrt(np.maximum(S[:, 0] ** 2 - np.einsum("ij,ij->i", S[:, 1:], S[:, 1:]), 1e-300))
            xb = X / xn[:, None]
            sb = S / sn[:, None]
            gamma = np.sqrt(0.5 * (1.0 + np.einsum("ij,ij->i", xb, sb)))
            wb = (sb + _J(xb)) / (2.0 * gamma[:, None])
            # put w back on the unit hyperboloid; rounding there makes W^T W indefinite
            wb[:, 0] = np.sqrt(1.0 + np.einsum("ij,ij->i", wb[:, 1:], wb[:, 1:]))
            beta = np.sqrt(sn / xn)
            self.blocks.append((g, wb, beta))
        self.lam = self.apply_W(x)

    # W = beta [[w0, w1^T], [w1, I + w1 w1^T / (1 + w0)]], so W^2 = beta^2 (2 w w^T - J)
    @staticmethod
    def _W(wb, beta, V):
        w0, w1 = wb[:, 0], wb[:, 1:]
        v0, v1 = V[:, 0], V[:, 1:]
        wv = np.einsum("ij,ij->i", w1, v1)
        out = np.empty_like(V)
        out[:, 0] = w0 * v0 + wv
        out[:, 1:] = v1 + (v0 + wv / (1.0 + w0))[:, None] * w1
        return beta[:, None] * out

    @staticmethod
    def _Winv(wb, beta, V):
        w0, w1 = wb[:, 0], wb[:, 1:]
        v0, v1 = V[:, 0], V[:, 1:]
        wv = np.einsum("ij,ij->i", w1, v1)
        out = np.empty_like(V)
        out[:, 0] = w0 * v0 - wv
        out[:, 1:] = v1 + (wv / (1.0 + w0) - v0)[:, None] * w1
        return out / beta[:, None]

    def apply_W(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        nn = self.layout.nonneg
        out[nn] = self.d * v[nn]
        for g, wb, beta in self.blocks:
            V = v[g.idx]
            if g.kind == "rsoc":
                V = _T(V)
            out[g.idx] = self._W(wb, beta, V)
        return out

    def apply_Winv_T(self, v: np.ndarray) -> np.ndarray:
        """W^{-T} v: maps a dual (s-type) vector into algebra coordinates."""
        out = np.zeros_like(v)
        nn = self.layout.nonneg
        out[nn] = v[nn] / self.d
        for g, wb, beta in self.blocks:
            V = v[g.idx]
            if g.kind == "rsoc":
                V = _T(V)
            out[g.idx] = self._Winv(wb, beta, V)
        return out

    def apply_WT(self, v: np.ndarray) -> np.ndarray:
        """W^T v: maps an algebra-coordinate vector back to original coordinates."""
        out = np.zeros_like(v)
        nn = self.layout.nonneg
        out[nn] = self.d * v[nn]
        for g, wb, beta in self.blocks:
            V = self._W(wb, beta, v[g.idx])
            out[g.idx] = _T(V) if g.kind == "rsoc" else V
        return out

    def hessian_diag(self) -> np.ndarray:
        return self.d**2

    def hessian_blocks(self):
        """Yield ``(group, H)`` with ``H`` of shape ``(B, d, d)`` equal to W^T W."""
        for g, wb, beta in self.blocks:
            d = g.dim
            J = -np.eye(d)
            J[0, 0] = 1.0
            H = 2.0 * np.einsum("bi,bj->bij", wb, wb) - J[None]
            H *= (beta**2)[:, None, None]
            if g.kind == "rsoc":
                Tm = np.eye(d)
                Tm[:2, :2] = _R2 * np.array([[1.0, 1.0], [1.0, -1.0]])
                H = np.einsum("ij,bjk,kl->bil", Tm, H, Tm)
            yield g, H

    def apply_hessian(self, v: np.ndarray) -> np.ndarray:
        return self.apply_WT(self.apply_W(v))
