import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from masolve.cases import test_case
from masolve.cones import rsoc_residual
from masolve.errors import InvalidDataError
from masolve.grid import MeshFunction, build_mesh, sample
from masolve.harness import make_spec
from masolve.operators import (
    det_and_lambda_min,
    discrete_hessian,
    is_locally_discrete_convex,
    j_h,
    monotone_ma,
    stencil_bases,
)
from masolve.program import (
    ConicProgram,
    ProgramSpec,
    build_envelope_program,
    build_monotone_program,
    build_program,
    build_standard_program,
    canonicalize,
    is_feasible,
)
from masolve.solver import solve

from convex_samples import random_convex, random_matrix_and_f


def _in_cone(program: ConicProgram, x, tol=1e-12) -> bool:
    # tight epigraph slacks sit on the cone boundary up to rounding
    return program.layout().min_residual(x) >= -tol


def _equalities_hold(program: ConicProgram, x, tol=1e-10) -> bool:
    return np.abs(program.A @ x - program.b).max(initial=0.0) <= tol * (1 + np.abs(program.b).max(initial=0.0))


def test_standard_counts_n4():
    P = build_standard_program(make_spec("test1", 4, "squared"))
    assert (P.node_var >= 0).sum() == 9
    assert P.count("rsoc", 4) == 16 + 9  # squared epigraphs and determinant cones
    Q = build_standard_program(make_spec("test1", 4, "sqrt1pp"))
    assert Q.count("soc", 4) == 16 and Q.count("rsoc", 4) == 9


def test_monotone_counts_n4():
    P = build_monotone_program(make_spec("test1", 4, "sqrt1pp", "monotone"))
    assert P.count("rsoc", 3) == 18  # 9 nodes x 2 basis pairs
    assert P.count("nonneg", 1) == 36  # 9 nodes x 4 directions
    assert P.count("soc", 4) == 16


def test_l1_epigraph_blocks():
    P = build_standard_program(make_spec("test1", 4, "l1"))
    assert P.count("nonneg", 4) == 16


@pytest.mark.parametrize("scheme", ["standard", "monotone"])
def test_n2_single_variable(scheme):
    P = canonicalize(build_program(make_spec("test3", 2, "squared", scheme)))
    assert (P.node_var >= 0).sum() == 1
    assert P.count("free") == 1 and P.cones[0] == ("free", 1)
    assert np.abs(P.b).max() > 0  # boundary data lives in b


def _scan_n2(scheme):
    spec = make_spec("test3", 2, "squared", scheme)
    g = spec.g.values.copy()
    best = None
    for u in np.linspace(-1, 1, 2001):
        g[1, 1] = u
        v = MeshFunction(spec.mesh, g.copy())
        if is_feasible(spec, v):
            J = j_h(v, "squared")
            if best is None or J < best[0]:
                best = (J, u)
    return best[1]


@pytest.mark.parametrize("scheme", ["standard", "monotone"])
def test_n2_scan_oracle(scheme):
    assert _scan_n2(scheme) == pytest.approx(0.0, abs=1e-3)
    P = canonicalize(build_program(make_spec("test3", 2, "squared", scheme)))
    res = solve(P)
    assert res.optimal
    assert P.mesh_function(res.x)(1, 1) == pytest.approx(0.0, abs=1e-7)


def test_n2_cone_reduces_to_u_nonpositive():
    spec = make_spec("test3", 2, "squared")
    for u, ok in [(-0.3, True), (0.0, True), (0.01, False)]:
        g = spec.g.values.copy()
        g[1, 1] = u
        assert is_feasible(spec, MeshFunction(spec.mesh, g)) is ok


def test_zero_rhs_is_local_convexity():
    rng = np.random.default_rng(5)
    m = build_mesh(5)
    for _ in range(30):
        v = random_convex(rng, m) if rng.uniform() < 0.5 else MeshFunction(m, rng.normal(size=m.shape))
        spec = ProgramSpec(m, None, v, "squared")
        P = build_standard_program(spec)
        x = P.assign(v)
        assert _in_cone(P, x, 1e-12) == is_locally_discrete_convex(v, 1e-12)


def _spec_with_rhs(rng, v, scheme, stencil=None):
    """A program whose right-hand side sits near the operator value of v, on either side."""
    m = v.mesh
    if scheme == "standard":
        det, _ = det_and_lambda_min(discrete_hessian(v))
        base = np.maximum(det, 0)
    else:
        base = np.maximum(monotone_ma(v, stencil), 0)
    f = np.zeros(m.shape)
    f[1:-1, 1:-1] = base * rng.uniform(0.8, 1.2, size=base.shape)
    return ProgramSpec(m, MeshFunction(m, f), v, rng.choice(["squared", "sqrt1pp", "l1", "euclid"]), scheme, stencil)


@given(st.integers(0, 10**6), st.sampled_from(["standard", "monotone"]))
@settings(max_examples=60, deadline=None)
def test_feasibility_transfer(seed, scheme):
    rng = np.random.default_rng(seed)
    m = build_mesh(int(rng.integers(3, 7)))
    stencil = stencil_bases(int(rng.integers(1, 3))) if scheme == "monotone" else None
    v = random_convex(rng, m)
    spec = _spec_with_rhs(rng, v, scheme, stencil)
    P = build_program(spec)
    x = P.assign(v)
    assert _equalities_hold(P, x)
    assert _in_cone(P, x) == is_feasible(spec, v)
    assert P.c @ x + P.d == pytest.approx(j_h(v, spec.phi), rel=1e-12, abs=1e-12)
    C = canonicalize(P)
    xc = C.assign(v)
    assert _equalities_hold(C, xc)
    assert _in_cone(C, xc) == is_feasible(spec, v)


def test_assign_on_nonconvex_is_infeasible():
    m = build_mesh(4)
    v = sample(lambda x, y: -(x**2) - y**2, m)
    spec = ProgramSpec(m, None, v, "squared")
    P = canonicalize(build_standard_program(spec))
    assert not _in_cone(P, P.assign(v))


@pytest.mark.parametrize("phi, value", [("squared", 25.0), ("sqrt1pp", np.sqrt(26.0)), ("l1", 7.0), ("euclid", 5.0)])
def test_epigraph_tight_value(phi, value):
    m = build_mesh(3)
    v = sample(lambda x, y: 3 * x - 4 * y, m)
    P = build_standard_program(ProgramSpec(m, None, v, phi))
    assert P.c @ P.assign(v) + P.d == pytest.approx(value)


@pytest.mark.parametrize("phi, value", [("squared", 0.0), ("sqrt1pp", 1.0), ("l1", 0.0), ("euclid", 0.0)])
def test_epigraph_minimal_slack_at_zero_gradient(phi, value):
    m = build_mesh(2)
    v = sample(lambda x, y: 0 * x + 1, m)
    P = canonicalize(build_standard_program(ProgramSpec(m, None, v, phi)))
    res = solve(P)
    assert res.optimal and res.objective == pytest.approx(value, abs=1e-7)


def test_rotated_cone_matches_eigen_predicate():
    rng = np.random.default_rng(11)
    agree = 0
    for _ in range(500):
        H, f = random_matrix_and_f(rng)
        det, lam = det_and_lambda_min(H)
        pred = bool(lam >= 0 and det >= f)
        V = np.array([[H[0, 0], H[1, 1], np.sqrt(2) * H[0, 1], np.sqrt(2) * np.sqrt(f)]])
        agree += bool(rsoc_residual(V)[0] >= 0) == pred
    assert agree == 500


def test_rotated_cone_integer_grid():
    # with integer data the two sides of the inequality differ by at least 1 off the boundary
    for a in range(-2, 3):
        for b in range(-2, 3):
            for c in range(-2, 3):
                for f in (0, 1, 2, 4):
                    det, lam = det_and_lambda_min(np.array([[a, c], [c, b]], dtype=float))
                    pred = lam >= -1e-12 and det >= f
                    V = np.array([[a, b, np.sqrt(2) * c, np.sqrt(2 * f)]], dtype=float)
                    assert (rsoc_residual(V)[0] >= -1e-9) == pred


def test_invalid_data():
    m = build_mesh(3)
    g = sample(lambda x, y: x, m)
    f = np.zeros(m.shape)
    f[1, 1] = -1
    with pytest.raises(InvalidDataError):
        ProgramSpec(m, MeshFunction(m, f), g, "squared")
    with pytest.raises(InvalidDataError):
        ProgramSpec(m, None, g, "squared", "monotone")  # no stencil
    with pytest.raises(InvalidDataError):
        ProgramSpec(m, None, g, "squared", "quadratic")


def test_invalid_boundary_data():
    m = build_mesh(3)
    g = sample(lambda x, y: x, m)
    bad = g.values.copy()
    bad[0, 0] = np.nan
    object.__setattr__(g, "values", bad)  # bypasses the constructor check
    with pytest.raises(InvalidDataError):
        ProgramSpec(m, None, g, "squared")


@pytest.mark.parametrize("scheme, phi", [("standard", "sqrt1pp"), ("monotone", "l1"), ("standard", "euclid")])
def test_canonicalize_idempotent(scheme, phi):
    P = canonicalize(build_program(make_spec("test1", 5, phi, scheme)))
    Q = canonicalize(P)
    assert Q.cones == P.cones
    assert np.array_equal(Q.b, P.b) and np.array_equal(Q.c, P.c) and Q.d == P.d
    assert (Q.A != P.A).nnz == 0
    assert np.array_equal(Q.node_var, P.node_var)


@pytest.mark.parametrize("scheme", ["standard", "monotone"])
def test_canonical_full_row_rank(scheme):
    P = canonicalize(build_program(make_spec("test1", 4, "sqrt1pp", scheme)))
    assert np.linalg.matrix_rank(P.A.toarray()) == P.n_rows
    assert sum(d for _, d in P.cones) == P.n


def test_canonicalize_is_deterministic():
    a = canonicalize(build_program(make_spec("test2", 6, "sqrt1pp"))).to_json()
    b = canonicalize(build_program(make_spec("test2", 6, "sqrt1pp"))).to_json()
    assert a == b


def test_program_json_round_trip():
    P = canonicalize(build_program(make_spec("dirac2", 4, "euclid")))
    text = P.to_json()
    data = json.loads(text)
    assert set(data) >= {"c", "d", "A", "b", "cones"}
    assert data["cones"][0] == {"type": P.cones[0][0], "dim": P.cones[0][1]}
    Q = ConicProgram.from_json(text)
    assert Q.cones == P.cones and np.array_equal(Q.b, P.b) and np.array_equal(Q.c, P.c)
    assert (Q.A != P.A).nnz == 0 and Q.d == P.d
    assert solve(Q).objective == pytest.approx(solve(P).objective, rel=1e-10)


def test_envelope_affine_boundary():
    m = build_mesh(6)
    g = sample(lambda x, y: 2 * x + y, m)
    P = canonicalize(build_envelope_program(ProgramSpec(m, None, g, "squared", "envelope-boundary")))
    res = solve(P)
    assert res.optimal and res.objective == pytest.approx(5.0, abs=1e-6)
    assert np.allclose(P.mesh_function(res.x).values, g.values, atol=1e-6)


def test_envelope_boundary_equals_standard_with_zero_rhs():
    spec = make_spec("test4", 8, "sqrt1pp")
    env = ProgramSpec(spec.mesh, None, spec.g, "sqrt1pp", "envelope-boundary")
    a = solve(canonicalize(build_program(spec)))
    b = solve(canonicalize(build_program(env)))
    assert a.objective == pytest.approx(b.objective, abs=1e-8)


def test_envelope_obstacle_convex():
    # a convex obstacle is its own envelope
    m = build_mesh(8)
    gbar = sample(lambda x, y: -np.minimum(x, 1 - x), m)
    P = canonicalize(build_envelope_program(ProgramSpec(m, None, None, "squared", "envelope-obstacle", obstacle=gbar)))
    res = solve(P)
    u = P.mesh_function(res.x)
    assert res.optimal
    assert u(4, 4) == pytest.approx(-0.5, abs=1e-6)
    assert np.allclose(u.values, gbar.values, atol=1e-6)


def test_envelope_obstacle_brute_force_n2():
    # N=2 has one Hessian; grid search over the centre value with the boundary at the obstacle
    m = build_mesh(2)
    gbar = sample(lambda x, y: (x - 0.3) ** 2 - np.abs(y - 0.5), m)
    spec = ProgramSpec(m, None, None, "squared", "envelope-obstacle", obstacle=gbar)
    best = -np.inf
    for c in np.linspace(-2, gbar(1, 1), 4001):
        v = gbar.values.copy()
        v[1, 1] = c
        if is_feasible(spec, MeshFunction(m, v)):
            best = max(best, c)
    res = solve(canonicalize(build_program(spec)))
    assert res.optimal
    u = canonicalize(build_program(spec)).mesh_function(res.x)
    assert u(1, 1) == pytest.approx(best, abs=2e-3)


def test_case_rhs_feeds_program():
    spec = make_spec("dirac2", 4, "euclid")
    assert spec.f(1, 2) == pytest.approx(8 * np.pi)
    assert spec.rhs_interior().sum() * spec.mesh.h**2 == pytest.approx(np.pi)
    assert test_case("dirac2").default_phi == "euclid"
