import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dirichlet_sets import cones, symmat
from dirichlet_sets.acceptance import cone_catalog
from dirichlet_sets.errors import DegenerateSetError, DimensionError, ParameterError, SamplingError

from conftest import random_sym

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
sym3 = arrays(np.float64, (3, 3), elements=finite).map(lambda X: 0.5 * (X + X.T))


def _all_sets(n):
    """Cone catalog plus non-cone members (SL, translates, half-spaces with c)."""
    out = cone_catalog(n)
    out += [cones.SL(n, 0.6), cones.SL(n, -1.0), cones.translate(cones.P(n), np.diag(np.arange(n) - 1.0)),
            cones.halfspace(np.eye(n), 1.0)]
    return out


# --------------------------------------------------------------------------
# defect


def test_defect_of_P():
    assert cones.P(2).defect(np.diag([1.0, 2.0])) == 1.0


def test_defect_of_Ptilde():
    assert cones.Ptilde(2).defect(np.diag([-1.0, -2.0])) == -1.0


def test_defect_of_SL_zero_at_origin():
    assert cones.SL(2, 0.0).defect(np.zeros((2, 2))) == 0.0


def test_defect_dimension_mismatch():
    with pytest.raises(DimensionError):
        cones.P(3).defect(np.eye(2))


def test_defect_batches_keep_shape(rng):
    A = random_sym(rng, 3, 12).reshape(3, 4, 3, 3)
    assert cones.harm(3).defect(A).shape == (3, 4)


# --------------------------------------------------------------------------
# dual, translate, conjugate, intersect, union, product_extend


def test_dual_of_P_is_lambda_max():
    assert cones.dual(cones.P(2)).defect(np.diag([-1.0, 5.0])) == 5.0


def test_dual_of_positive_halfspace_is_itself(rng):
    X = rng.standard_normal((3, 3))
    H = cones.halfspace(X @ X.T + np.eye(3))
    A = random_sym(rng, 3, 1000)
    assert np.array_equal(cones.dual(H).defect(A), H.defect(A))


def test_dual_of_SL_is_SL_negated(rng):
    A = cones.sample_sym(rng, 3, 1000)
    for c in (0.6, -1.3, 2.0):
        np.testing.assert_allclose(cones.dual(cones.SL(3, c)).defect(A), cones.SL(3, -c).defect(A), atol=1e-10)


def test_translate_P_by_identity():
    assert cones.translate(cones.P(3), np.eye(3)).defect(np.eye(3)) == 0.0


def test_dual_of_translate(rng):
    A0 = random_sym(rng, 3)
    A = random_sym(rng, 3, 500)
    for F in (cones.P(3), cones.SL(3, 0.4), cones.sigma_k(3, 2)):
        lhs = cones.dual(cones.translate(F, A0)).defect(A)
        rhs = cones.translate(cones.dual(F), -A0).defect(A)
        assert np.array_equal(lhs, rhs)


def test_conjugate_preserves_psd_sign(rng):
    for _ in range(50):
        g = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        Pm = random_sym(rng, 3)
        gP = cones.conjugate(cones.P(3), g)
        s1 = np.sign(cones.P(3).defect(Pm))
        s2 = np.sign(gP.defect(g.T @ Pm @ g))
        assert s1 == s2


def test_conjugate_singular():
    with pytest.raises(ParameterError):
        cones.conjugate(cones.P(2), [[1.0, 1.0], [1.0, 1.0]])


def test_intersect_with_itself(rng):
    A = random_sym(rng, 3, 200)
    assert np.array_equal(cones.intersect([cones.P(3), cones.P(3)]).defect(A), cones.P(3).defect(A))


def test_intersect_coordinate_halfspaces():
    F = cones.intersect([cones.halfspace(np.diag([1.0, 0.0])), cones.halfspace(np.diag([0.0, 1.0]))])
    assert F.defect(np.diag([1.0, -1.0])) == -1.0


def test_dual_of_intersection_is_union_of_duals(rng):
    A = random_sym(rng, 3, 1000)
    F1, F2 = cones.branch_q(3, 1), cones.SL(3, 0.8)
    lhs = cones.dual(cones.intersect([F1, F2])).defect(A)
    rhs = cones.union([cones.dual(F1), cones.dual(F2)]).defect(A)
    assert np.array_equal(lhs, rhs)


def test_intersect_union_errors():
    with pytest.raises(ParameterError):
        cones.intersect([])
    with pytest.raises(DimensionError):
        cones.union([cones.P(2), cones.P(3)])


def test_product_extend_line():
    F = cones.product_extend(cones.halfspace([[1.0]]), 2)
    A = np.array([[0.7, 5.0], [5.0, -9.0]])
    assert F.defect(A) == 0.7


def test_product_extend_dual(rng):
    F0 = cones.branch_q(2, 0)
    A = random_sym(rng, 4, 500)
    lhs = cones.dual(cones.product_extend(F0, 4, [1, 3])).defect(A)
    rhs = cones.product_extend(cones.dual(F0), 4, [1, 3]).defect(A)
    assert np.array_equal(lhs, rhs)


def test_product_extend_ignores_complement(rng):
    F = cones.product_extend(cones.SL(2, 0.3), 4, [0, 2])
    A = random_sym(rng, 4)
    B = A + random_sym(rng, 4)
    B[np.ix_([0, 2], [0, 2])] = A[np.ix_([0, 2], [0, 2])]
    assert F.defect(A) == F.defect(B)


def test_product_extend_bad_subspace():
    with pytest.raises(ParameterError):
        cones.product_extend(cones.P(2), 3, [0, 0])
    with pytest.raises(ParameterError):
        cones.product_extend(cones.P(3), 3)


# --------------------------------------------------------------------------
# edge thresholds


def test_edge_threshold_P():
    assert cones.P(2).edge_threshold(np.diag([-2.0, 3.0])) == 2.0


def test_edge_threshold_trace():
    B = np.diag([-1.0, -3.0, 1.0])
    assert cones.harm(3).edge_threshold(B) == pytest.approx(1.0, abs=1e-15)


def _scalar_bisect(g, lo, hi):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if g(mid) >= 0 else (mid, hi)
    return hi


def test_edge_threshold_SL_quarter_pi():
    expected = _scalar_bisect(lambda t: 2 * math.atan(t) - math.pi / 4, -10.0, 10.0)
    assert expected == pytest.approx(math.tan(math.pi / 8), abs=1e-14)
    assert cones.SL(2, math.pi / 4).edge_threshold(np.zeros((2, 2))) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_edge_threshold_consistency(rng, n):
    B = cones.sample_sym(rng, n, 300)
    for F in _all_sets(n):
        b = F.edge_threshold(B)
        d = F.defect(B + b[:, None, None] * np.eye(n))
        assert np.max(np.abs(d)) <= 1e-9, F.name
        below = F.defect(B + (b - 1e-6 * (1 + np.abs(b)))[:, None, None] * np.eye(n))
        assert np.all(below < 0), F.name


def test_edge_threshold_fast_path_matches_bisection(rng):
    B = cones.sample_sym(rng, 3, 200)
    for F in (cones.SL(3, 0.6), cones.sigma_k(3, 2), cones.garding_det(3), cones.PG(3, 2)):
        np.testing.assert_allclose(F.edge_threshold(B), cones.bisect_threshold(F.defect_fn, B), atol=1e-9)


def test_edge_threshold_degenerate():
    F = cones.ConeSet(n=2, defect_fn=lambda A: np.full(len(A), -1.0), is_cone=False, name="empty")
    with pytest.raises(DegenerateSetError):
        F.edge_threshold(np.zeros((2, 2)))


def test_defect_strictly_increasing_along_identity(rng):
    B = cones.sample_sym(rng, 3, 100)
    ts = np.linspace(-3, 3, 13)
    for F in _all_sets(3):
        vals = np.array([F.defect(B + t * np.eye(3)) for t in ts])
        assert np.all(np.diff(vals, axis=0) > 0), F.name


# --------------------------------------------------------------------------
# ray sets


def test_ray_defect_of_cone_is_defect(rng):
    A = random_sym(rng, 3, 50)
    assert np.array_equal(cones.ray_defect(cones.P(3), A), cones.P(3).defect(A))


def test_ray_defect_of_translate_at_identity(rng):
    for _ in range(10):
        A0 = 5 * random_sym(rng, 3)
        assert cones.ray_defect(cones.translate(cones.P(3), A0), np.eye(3)) > 0


def test_ray_set_of_truncated_P_is_P_like(rng):
    F = cones.translate(cones.P(2), np.eye(2))
    assert cones.ray_defect(F, np.diag([1.0, 0.5])) > 0
    assert cones.ray_defect(F, np.diag([1.0, -0.1])) < 0
    assert cones.ray_defect(F, np.diag([1.0, 0.0])) <= 0


def test_ray_defect_of_SL_matches_its_cone():
    # the ray set of SL(c) in the plane is the harmonic half-plane when c = 0 and is
    # otherwise the cone over the asymptotic directions; interior elements of P are interior
    F = cones.SL(2, 0.6)
    assert cones.ray_defect(F, np.eye(2)) > 0
    assert cones.ray_defect(F, -np.eye(2)) < 0


# --------------------------------------------------------------------------
# catalog


def test_branch_zero_is_P(rng):
    A = random_sym(rng, 4, 300)
    assert np.array_equal(cones.branch_q(4, 0).defect(A), cones.P(4).defect(A))


def test_garding_det_is_lambda_min(rng):
    A = cones.sample_sym(rng, 4, 2000)
    np.testing.assert_allclose(cones.garding_det(4).defect(A), np.linalg.eigvalsh(A)[:, 0], atol=1e-8)


def test_generic_garding_det(rng):
    F = cones.catalog("garding", 3, M=np.linalg.det, degree=3)
    A = cones.sample_sym(rng, 3, 300)
    np.testing.assert_allclose(F.defect(A), np.linalg.eigvalsh(A)[:, 0], atol=1e-8)


def test_garding_rejects_non_hyperbolic():
    # t^2 - a^2 style polynomial that is not hyperbolic: M(A) = a11^2 + a22^2 - a12^2 ... scaled so M(I) = 1
    M = lambda A: 0.5 * (A[0, 0] ** 2 + A[1, 1] ** 2) + 4.0 * A[0, 1] ** 2
    with pytest.raises(ParameterError):
        cones.garding(2, M, 2)
    with pytest.raises(ParameterError):
        cones.garding(2, lambda A: 2.0 * np.linalg.det(A), 2)


def test_sigma_1_is_normalized_trace(rng):
    A = random_sym(rng, 4, 200)
    np.testing.assert_allclose(cones.sigma_k(4, 1).defect(A), np.trace(A, axis1=1, axis2=2) / 4, atol=1e-10)


def test_sigma_n_is_det_cone(rng):
    A = random_sym(rng, 3, 200)
    np.testing.assert_allclose(cones.sigma_k(3, 3).defect(A), cones.garding_det(3).defect(A), atol=1e-9)


def test_sigma_2_threshold_oracle(rng):
    # sigma_2(B + tI) = 0 at the largest root of sum_{i<j} (l_i + t)(l_j + t), by numpy roots
    for _ in range(20):
        B = random_sym(rng, 3)
        lam = np.linalg.eigvalsh(B)
        e1, e2 = lam.sum(), lam[0] * lam[1] + lam[0] * lam[2] + lam[1] * lam[2]
        roots = np.roots([3.0, 2 * e1, e2]).real
        assert cones.sigma_k(3, 2).edge_threshold(B) == pytest.approx(roots.max(), abs=1e-9)


def test_SL_zero_plane_boundary_is_traceless(rng):
    for _ in range(100):
        B = random_sym(rng, 2)
        B0 = B - 0.5 * np.trace(B) * np.eye(2)
        assert abs(cones.SL(2, 0.0).defect(B0)) <= 1e-14
        d = cones.SL(2, 0.0).defect(B)
        assert np.sign(d) == np.sign(np.trace(B))


def test_LAG_dual_formula(rng):
    A = random_sym(rng, 4, 300)
    J = symmat.ComplexStructure("complex", 4).J
    t = np.trace(A, axis1=1, axis2=2)
    w = np.linalg.eigvalsh(0.5 * (A + J @ A @ J))
    expected = 0.5 * t + 0.5 * np.abs(w).sum(axis=1)
    np.testing.assert_allclose(cones.dual(cones.LAG(4)).defect(A), expected, atol=1e-12)


def test_ISO_endpoints():
    rng = np.random.default_rng(3)
    A = random_sym(rng, 6, 100)
    np.testing.assert_array_equal(cones.ISO(6, 3).defect(A), cones.LAG(6).defect(A))
    np.testing.assert_array_equal(cones.ISO(6, 1).defect(A), cones.P(6).defect(A))


def test_ISO_intermediate_matches_sdp_relaxation():
    cp = pytest.importorskip("cvxpy")
    n, p = 6, 2
    J = symmat.ComplexStructure("complex", n).J
    rng = np.random.default_rng(1)
    A = cones.sample_sym(rng, n, 8)
    iso = cones.ISO(n, p).defect(A)
    for a, value in zip(A, iso):
        # convex hull of isotropic p-plane projections: 0 <= P, P + J P J^T <= I, tr P = p
        P = cp.Variable((n, n), symmetric=True)
        prob = cp.Problem(cp.Minimize(cp.trace(a @ P)),
                          [P >> 0, np.eye(n) - P - J @ P @ J.T >> 0, cp.trace(P) == p])
        prob.solve()
        assert value == pytest.approx(prob.value, abs=5e-5 * (1 + np.abs(a).max()))


def test_ISO_closed_form_candidate_is_not_monotone():
    # (p/2m) tr A minus the top p skew eigenvalues fails positivity for 1 < p < m,
    # which is why ISO_p uses the minimization over isotropic planes instead
    n, p, m = 6, 2, 3
    J = symmat.ComplexStructure("complex", n).J

    def candidate(A):
        w = np.linalg.eigvalsh(0.5 * (A + J @ A @ J))
        return p / (2 * m) * np.trace(A, axis1=1, axis2=2) - np.clip(w[:, -p:], 0, None).sum(axis=1)

    rng = np.random.default_rng(0)
    A = cones.sample_sym(rng, n, 4000)
    P = cones.sample_psd(rng, n, 4000)
    assert np.min(candidate(A + P) - candidate(A)) < -0.1


def test_ISO_intermediate_positivity():
    rng = np.random.default_rng(4)
    F = cones.ISO(6, 2)
    A = cones.sample_sym(rng, 6, 300)
    P = cones.sample_psd(rng, 6, 300)
    assert np.min(F.defect(A + P) - F.defect(A)) >= -1e-9


def test_complex_and_quaternionic_names():
    assert cones.branch_q(4, 0, "complex").name == "P_0[complex]"
    assert cones.PG(8, 1, "quaternionic").name == "PG1[quaternionic]"
    assert cones.Pq_G(4, 1, 1, "complex").name == "P1(G1)[complex]"


def test_parameter_ranges():
    with pytest.raises(ParameterError):
        cones.branch_q(3, 3)
    with pytest.raises(ParameterError):
        cones.SL(2, math.pi)
    with pytest.raises(ParameterError):
        cones.SL(2, -math.pi)
    with pytest.raises(ParameterError):
        cones.PG(4, 3, "complex")
    with pytest.raises(ParameterError):
        cones.Pq_G(3, 2, 2)
    with pytest.raises(ParameterError):
        cones.halfspace(np.diag([1.0, -1.0]))
    with pytest.raises(ParameterError):
        cones.LAG(3)
    with pytest.raises(ParameterError):
        cones.catalog("nope", 2)
    with pytest.raises(ParameterError):
        cones.sigma_k(3, 0)


def test_from_spec_ops(rng):
    spec = {"name": "branch_q", "n": 3, "params": {"q": 1},
            "ops": ["dual", {"op": "translate", "A0": np.eye(3).tolist()},
                    {"op": "intersect", "with": [{"name": "harm"}]}]}
    F = cones.from_spec(spec)
    A = random_sym(rng, 3, 100)
    expected = np.minimum(cones.translate(cones.dual(cones.branch_q(3, 1)), np.eye(3)).defect(A),
                          cones.harm(3).defect(A))
    assert np.array_equal(F.defect(A), expected)


# --------------------------------------------------------------------------
# invariants on the whole catalog


@pytest.mark.parametrize("n", [2, 3, 4])
def test_positivity(n):
    rng = np.random.default_rng(n)
    A = cones.sample_sym(rng, n, 10000)
    P = cones.sample_psd(rng, n, 10000)
    for F in _all_sets(n):
        assert np.min(F.defect(A + P) - F.defect(A)) >= -1e-9, F.name


@pytest.mark.parametrize("n", [2, 3, 4])
def test_involution(n, rng):
    A = cones.sample_sym(rng, n, 2000)
    for F in _all_sets(n):
        assert np.array_equal(cones.dual(cones.dual(F)).defect(A), F.defect(A)), F.name


@pytest.mark.parametrize("n", [2, 3, 5])
def test_branch_duality(n, rng):
    A = cones.sample_sym(rng, n, 2000)
    lam = np.linalg.eigvalsh(A)
    for q in range(n):
        d = cones.dual(cones.branch_q(n, q)).defect(A)
        np.testing.assert_allclose(d, lam[:, n - q - 1], atol=1e-9)
        np.testing.assert_allclose(d, cones.branch_q(n, n - q - 1).defect(A), atol=1e-9)


@pytest.mark.parametrize("n", [3, 4])
def test_next_tier_duality(n, rng):
    A = cones.sample_sym(rng, n, 2000)
    for p in range(1, n + 1):
        for q in range(0, n - p + 1):
            lhs = cones.dual(cones.Pq_G(n, p, q)).defect(A)
            np.testing.assert_allclose(lhs, cones.Pq_G(n, p, n - q - p).defect(A), atol=1e-9)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_normalization(n, rng):
    A = cones.sample_sym(rng, n, 500)
    s = rng.uniform(0.1, 10.0, 500)[:, None, None]
    for F in cone_catalog(n):
        assert abs(F.defect(np.zeros((n, n)))) <= 1e-12, F.name
        if F.name.startswith("SL"):
            assert np.array_equal(np.sign(F.defect(s * A)), np.sign(F.defect(A)))
        else:
            np.testing.assert_allclose(F.defect(s * A), s[:, 0, 0] * F.defect(A), rtol=1e-8, atol=1e-9,
                                       err_msg=F.name)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_max_principle_flag(n):
    for F in _all_sets(n) + [cones.translate(cones.P(n), -np.eye(n))]:
        d0 = F.defect(np.zeros((n, n)))
        assert (d0 <= 1e-12) == F.satisfies_max_principle, F.name
    assert not cones.translate(cones.P(n), -np.eye(n)).satisfies_max_principle


@pytest.mark.parametrize("n", [2, 4])
def test_ptilde_shift(n):
    rng = np.random.default_rng(66)
    for F in _all_sets(n):
        lam = cones.ptilde_shift(F)
        assert lam >= 0
        if F.is_cone:
            assert lam <= 1e-12, F.name
        members = cones.sample_members(F, rng, 500)
        assert np.min(symmat.lambda_max(members + lam * np.eye(n))) >= -1e-9, F.name


@pytest.mark.parametrize("n", [2, 3])
def test_quadratic_duality(n):
    for F in _all_sets(n):
        rep = cones.quadratic_duality_check(F, samples=500, seed=1)
        assert rep.violations == 0 and rep.worst >= -1e-8, F.name


def test_quadratic_duality_examples():
    for F in (cones.P(3), cones.branch_q(3, 1), cones.LAG(4)):
        assert cones.quadratic_duality_check(F, samples=2000).violations == 0


def test_self_dual_middle_branch(rng):
    A = random_sym(rng, 3, 500)
    F = cones.branch_q(3, 1)
    assert np.array_equal(cones.dual(F).defect(A), F.defect(A))


def test_sample_members_too_thin():
    F = cones.halfspace(np.eye(2), 1e6)
    with pytest.raises(SamplingError):
        cones.sample_members(F, np.random.default_rng(0), 10, max_attempts=3)


@settings(max_examples=50, deadline=None)
@given(sym3, st.floats(0.0, 5.0))
def test_hypothesis_positivity_along_identity(A, t):
    for F in (cones.P(3), cones.sigma_k(3, 2), cones.SL(3, 0.5), cones.PG(3, 2)):
        assert F.defect(A + t * np.eye(3)) >= F.defect(A) - 1e-9


# --------------------------------------------------------------------------
# free dimension


def test_free_dim_P():
    for n in (2, 3):
        rep = cones.free_dim(cones.P(n), random_frames=50)
        assert rep.free_dim == 0


def test_free_dim_Ptilde():
    for n in (2, 3, 4):
        assert cones.free_dim(cones.Ptilde(n), random_frames=50).free_dim == n - 1


def test_free_dim_examples():
    assert cones.free_dim(cones.PG(4, 1, "complex"), random_frames=100).free_dim == 2
    assert cones.free_dim(cones.LAG(4), random_frames=100).free_dim == 2


def test_free_dim_report_invariants():
    F = cones.Pq_G(4, 2, 0)
    rep = cones.free_dim(F, random_frames=100)
    assert rep.witness_free_subspace.shape[1] == rep.free_dim
    N = rep.witness_strict_normal
    assert cones.ray_defect(F, N @ N.T) > 0
    W = rep.witness_free_subspace
    np.testing.assert_allclose(W.T @ N, 0.0, atol=1e-12)


def test_morse_equivalence(rng):
    # some A in F is negative definite on W  <=>  P_{W-perp} is strictly inside the ray set
    sets = [cones.P(3), cones.harm(3), cones.Ptilde(3), cones.PG(3, 2), cones.branch_q(3, 1), cones.sigma_k(3, 2)]
    for F in sets:
        for k in (1, 2):
            for _ in range(5):
                W = symmat.random_orthonormal(rng, 3, k)
                Pperp = np.eye(3) - W @ W.T
                assert cones.is_morse(F, W) == (cones.ray_defect(F, Pperp) > 1e-12), F.name
