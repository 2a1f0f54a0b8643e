import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from masolve.errors import NondifferentiableError, OperatorUndefinedError, UnsupportedStencilError
from masolve.grid import MeshFunction, build_mesh, sample
from masolve.operators import (
    det_and_lambda_min,
    discrete_hessian,
    get_phi,
    is_locally_discrete_convex,
    is_wide_stencil_convex,
    j_h,
    monotone_ma,
    phi_eval,
    phi_grad,
    stencil_bases,
)

from convex_samples import random_convex


def test_phi_examples():
    assert phi_eval("squared", [0, 0]) == 0
    assert np.allclose(phi_grad("squared", [0, 0]), 0)
    assert phi_eval("sqrt1pp", [0, 0]) == 1
    assert phi_eval("euclid", [3, 4]) == 5
    assert phi_eval("l1", [3, -4]) == 7


@pytest.mark.parametrize("tag, p", [("l1", [0.0, 1.0]), ("euclid", [0.0, 0.0])])
def test_phi_grad_at_kink(tag, p):
    with pytest.raises(NondifferentiableError):
        phi_grad(tag, p)


def test_phi_unknown():
    with pytest.raises(ValueError):
        get_phi("cubic")


@pytest.mark.parametrize("tag", ["squared", "sqrt1pp", "l1", "euclid"])
def test_phi_grad_matches_finite_differences(tag):
    p = np.array([0.3, -1.7])
    g = phi_grad(tag, p)
    eps = 1e-6
    fd = [(phi_eval(tag, p + eps * e) - phi_eval(tag, p - eps * e)) / (2 * eps) for e in np.eye(2)]
    assert np.allclose(g, fd, atol=1e-6)


@pytest.mark.parametrize("tag", ["squared", "sqrt1pp", "l1", "euclid"])
def test_j_h_affine(tag):
    v = sample(lambda x, y: 0.7 * x - 1.3 * y + 2, build_mesh(6))
    assert j_h(v, tag) == pytest.approx(phi_eval(tag, [0.7, -1.3]))


def test_j_h_constant():
    assert j_h(sample(lambda x, y: 5 + 0 * x, build_mesh(4)), "squared") == 0


def test_j_h_quadrature_oracle():
    # |grad e^{r^2/2}|^2 = r^2 e^{r^2}; reference by tensor Gauss-Legendre
    t, w = np.polynomial.legendre.leggauss(40)
    t, w = (t + 1) / 2, w / 2
    X, Y = np.meshgrid(t, t, indexing="ij")
    ref = float(np.sum(np.outer(w, w) * (X**2 + Y**2) * np.exp(X**2 + Y**2)))
    v = sample(lambda x, y: np.exp((x**2 + y**2) / 2), build_mesh(32))
    assert abs(j_h(v, "squared") - ref) < 5 / 32


@pytest.mark.parametrize("tag", ["squared", "sqrt1pp", "l1", "euclid"])
def test_j_h_convex(tag):
    rng = np.random.default_rng(1)
    m = build_mesh(6)
    for _ in range(20):
        v, w = MeshFunction(m, rng.normal(size=m.shape)), MeshFunction(m, rng.normal(size=m.shape))
        for t in (0.25, 0.5, 0.75):
            assert j_h(t * v + (1 - t) * w, tag) <= t * j_h(v, tag) + (1 - t) * j_h(w, tag) + 1e-12


def test_discrete_hessian_quadratic():
    for N in (2, 5, 8):
        H = discrete_hessian(sample(lambda x, y: x**2 + 3 * x * y + y**2, build_mesh(N)))
        assert np.allclose(H.h11, 2) and np.allclose(H.h22, 2) and np.allclose(H.h12, 3)
    H = discrete_hessian(sample(lambda x, y: 4 * x - y, build_mesh(4)))
    assert np.allclose(H.h11, 0, atol=1e-12) and np.allclose(H.h12, 0, atol=1e-12)


def test_discrete_hessian_test2_oracle():
    H = discrete_hessian(sample(lambda x, y: -np.sqrt(2 - x**2 - y**2), build_mesh(16)))
    x = y = 0.5
    r = 2 - x**2 - y**2
    exact = np.array([[(2 - y**2) / r**1.5, x * y / r**1.5], [x * y / r**1.5, (2 - x**2) / r**1.5]])
    assert np.allclose(H.at(8, 8), exact, atol=4 / 16**2)


def test_hessian_csv_header():
    H = discrete_hessian(sample(lambda x, y: x * y, build_mesh(3)))
    lines = H.to_csv().splitlines()
    assert lines[0] == "i,j,h11,h22,h12" and len(lines) == 1 + 4


@pytest.mark.parametrize("H, det, lam", [
    ([[2, 0], [0, 2]], 4, 2),
    ([[2, 3], [3, 2]], -5, -1),
    ([[1, 0], [0, 0]], 0, 0),
])
def test_det_and_lambda_min(H, det, lam):
    d, l = det_and_lambda_min(np.array(H, dtype=float))
    assert d == pytest.approx(det) and l == pytest.approx(lam, abs=1e-15)


def test_local_convexity_examples():
    m = build_mesh(8)
    assert is_locally_discrete_convex(sample(lambda x, y: x**2 + y**2, m))
    assert not is_locally_discrete_convex(sample(lambda x, y: -(x**2), m))
    kink = lambda x, y: np.abs(x - 0.5) + 0 * y
    for N in (2, 4, 8):  # dyadic nodes: the second differences are exact
        assert is_locally_discrete_convex(sample(kink, build_mesh(N)))
    for N in (3, 6, 7):  # otherwise rounding leaves -1e-17 on the linear pieces
        assert is_locally_discrete_convex(sample(kink, build_mesh(N)), tol=1e-12)


def test_stencil_bases():
    s1, s2 = stencil_bases(1), stencil_bases(2)
    assert len(s1.pairs) == 2 and len(s1.directions) == 4 and s1.n_points == 9
    assert len(s2.pairs) == 4 and len(s2.directions) == 8 and s2.n_points == 17
    for a, b in s2.pairs:
        assert a[0] * b[0] + a[1] * b[1] == 0
    with pytest.raises(UnsupportedStencilError):
        stencil_bases(3)


def test_monotone_ma_examples():
    m = build_mesh(8)
    s = stencil_bases(1)
    assert np.allclose(monotone_ma(sample(lambda x, y: x**2 + y**2, m), s), 4)
    assert np.allclose(monotone_ma(sample(lambda x, y: 2 * x + y, m), s), 0, atol=1e-9)
    a, b = 3.0, 0.5
    q = sample(lambda x, y: 0.5 * (a * x**2 + b * y**2), m)
    assert np.allclose(monotone_ma(q, s), a * b)  # AM-GM: ab <= ((a+b)/2)^2


def test_monotone_ma_width2_near_boundary():
    # at nodes next to the boundary only the width-1 pairs are admissible
    m = build_mesh(6)
    s = stencil_bases(2)
    M = monotone_ma(sample(lambda x, y: x**2 + y**2, m), s)
    assert np.allclose(M, 4)


def test_monotone_ma_undefined():
    from masolve.operators import StencilSet

    far = StencilSet(9, (((3, 0), (0, 3)),), ((3, 0), (0, 3)))
    with pytest.raises(OperatorUndefinedError):
        monotone_ma(sample(lambda x, y: x**2, build_mesh(4)), far)


def test_wide_stencil_convexity_examples():
    m = build_mesh(6)
    s = stencil_bases(1)
    assert is_wide_stencil_convex(sample(lambda x, y: x**2 + x * y + y**2, m), s)
    assert not is_wide_stencil_convex(sample(lambda x, y: x * y, m), s)
    assert is_wide_stencil_convex(sample(lambda x, y: np.abs(x - 0.5) + 0 * y, build_mesh(8)), s)
    assert is_wide_stencil_convex(sample(lambda x, y: np.abs(x - 0.5) + 0 * y, m), s, tol=1e-12)


@given(st.integers(0, 10**6), st.sampled_from([1, 2]))
@settings(max_examples=60, deadline=None)
def test_superadditivity_and_homogeneity(seed, width):
    rng = np.random.default_rng(seed)
    m = build_mesh(int(rng.integers(4, 10)))
    s = stencil_bases(width)
    v, w = random_convex(rng, m), random_convex(rng, m)
    Mv, Mw, Mvw = (monotone_ma(u, s) for u in (v, w, v + w))
    assert np.all(np.sqrt(Mvw) >= np.sqrt(Mv) + np.sqrt(Mw) - 1e-12 * (1 + np.sqrt(Mvw)))
    lam = float(rng.uniform(0, 3))
    assert np.allclose(monotone_ma(lam * v, s), lam**2 * Mv, rtol=1e-12, atol=1e-12)


def test_hessian_linear():
    rng = np.random.default_rng(3)
    m = build_mesh(5)
    v, w = MeshFunction(m, rng.normal(size=m.shape)), MeshFunction(m, rng.normal(size=m.shape))
    a, b, c = discrete_hessian(v), discrete_hessian(w), discrete_hessian(2 * v + w)
    assert np.allclose(c.h12, 2 * a.h12 + b.h12) and np.allclose(c.h11, 2 * a.h11 + b.h11)
