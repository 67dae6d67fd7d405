import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dirichlet_sets import symmat
from dirichlet_sets.errors import DimensionError, NonConvergenceError, NotHyperbolicError

from conftest import random_sym

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def sym_strategy(n):
    return arrays(np.float64, (n, n), elements=finite).map(lambda X: 0.5 * (X + X.T))


def _sturm_all_roots(coeffs, tol=1e-13):
    """Every real root by bisection on the Sturm count (oracle independent of Jacobi)."""
    chain = symmat.sturm_chain(coeffs)
    bound = symmat.cauchy_bound(coeffs)
    total = symmat.count_real_roots(chain, -bound, bound)
    roots = []
    for k in range(total):
        lo, hi = -bound, bound
        # the (k+1)-th smallest root r: count in (-bound, x] >= k+1 iff x >= r
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if symmat.count_real_roots(chain, -bound, mid) >= k + 1:
                hi = mid
            else:
                lo = mid
        roots.append(0.5 * (lo + hi))
    return np.array(roots)


def _charpoly_by_interpolation(A):
    """det(tI - A) via LU determinants at n + 1 nodes and a Vandermonde solve."""
    n = A.shape[0]
    nodes = np.cos(np.pi * (np.arange(n + 1) + 0.5) / (n + 1)) * (1 + np.abs(A).sum())
    vals = [np.linalg.det(t * np.eye(n) - A) for t in nodes]
    return np.linalg.solve(np.vander(nodes, n + 1), vals)


# --------------------------------------------------------------------------
# eig_sorted


def test_eig_sorted_permuted_diagonal():
    assert np.array_equal(symmat.eig_sorted(np.diag([3.0, 1.0, 2.0])), [1.0, 2.0, 3.0])


def test_eig_sorted_reflection():
    np.testing.assert_allclose(symmat.eig_sorted(np.array([[0.0, 1.0], [1.0, 0.0]])), [-1.0, 1.0], atol=1e-15)


def test_eig_sorted_matches_sturm_roots_of_charpoly(rng):
    for _ in range(20):
        A = random_sym(rng, 3)
        roots = _sturm_all_roots(_charpoly_by_interpolation(A))
        assert len(roots) == 3
        np.testing.assert_allclose(symmat.eig_sorted(A), roots, atol=1e-9)


def test_eigendecomposition_reconstructs(rng):
    for n in (2, 3, 5, 8, 16):
        A = 3 * random_sym(rng, n)
        w, Q = symmat.eigh_sorted(A)
        err = np.max(np.abs(A - Q @ np.diag(w) @ Q.T))
        assert err <= 1e-10 * (1 + np.max(np.abs(A)))
        np.testing.assert_allclose(Q.T @ Q, np.eye(n), atol=1e-12)


def test_batched_eigenvalues_match_numpy(rng):
    A = random_sym(rng, 4, 500)
    np.testing.assert_allclose(symmat.eig_sorted(A), np.linalg.eigvalsh(A), atol=1e-12)


def test_nonconvergence_is_reported(monkeypatch, rng):
    monkeypatch.setattr(symmat, "_MAX_SWEEPS", 1)
    with pytest.raises(NonConvergenceError):
        symmat.eig_sorted(random_sym(rng, 8))


def test_as_sym_rejects_asymmetric():
    with pytest.raises(DimensionError):
        symmat.as_sym([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(DimensionError):
        symmat.as_sym(np.eye(17))


def test_as_sym_upper_triangle_wins():
    A = symmat.as_sym([[1.0, 2.0], [2.0 + 1e-12, 1.0]])
    assert A[1, 0] == A[0, 1] == 2.0


@settings(max_examples=60, deadline=None)
@given(sym_strategy(4), st.floats(-100, 100))
def test_eig_shift_by_identity(A, t):
    np.testing.assert_allclose(symmat.eig_sorted(A + t * np.eye(4)), symmat.eig_sorted(A) + t, atol=1e-9)


# --------------------------------------------------------------------------
# complex and quaternionic structures


@pytest.mark.parametrize("kind,N", [("complex", 2), ("complex", 6), ("quaternionic", 4), ("quaternionic", 8)])
def test_units_orthogonal_and_square_to_minus_identity(kind, N):
    S = symmat.ComplexStructure(kind, N)
    for U in S.units:
        np.testing.assert_array_equal(U.T @ U, np.eye(N))
        np.testing.assert_array_equal(U @ U, -np.eye(N))


def test_quaternion_relations():
    I, J, K = symmat.ComplexStructure("quaternionic", 8).units
    np.testing.assert_array_equal(I @ J, K)
    np.testing.assert_array_equal(I @ J, -(J @ I))
    np.testing.assert_array_equal(J @ K, -(K @ J))
    np.testing.assert_array_equal(I @ K, -(K @ I))


def test_structure_dimension_checked():
    with pytest.raises(DimensionError):
        symmat.ComplexStructure("complex", 3)
    with pytest.raises(DimensionError):
        symmat.ComplexStructure("quaternionic", 6)


def test_hermitian_part_real_is_identity(rng):
    A = random_sym(rng, 3)
    np.testing.assert_array_equal(symmat.hermitian_part(A, symmat.ComplexStructure("real", 3)), A)


def test_hermitian_part_complex_plane():
    # J = [[0,-1],[1,0]]: -J diag(2,0) J = diag(0,2), so the average is I
    S = symmat.ComplexStructure("complex", 2)
    np.testing.assert_array_equal(S.J, [[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(symmat.hermitian_part(np.diag([2.0, 0.0]), S), np.eye(2))


def test_hermitian_part_commutes_and_has_even_multiplicity(rng):
    S = symmat.ComplexStructure("complex", 4)
    for _ in range(50):
        AC = symmat.hermitian_part(random_sym(rng, 4), S)
        np.testing.assert_allclose(AC @ S.J, S.J @ AC, atol=1e-12)
        w = symmat.eig_sorted(AC)
        np.testing.assert_allclose(w[0::2], w[1::2], atol=1e-8)


def test_quaternionic_hermitian_part_has_multiplicity_four(rng):
    S = symmat.ComplexStructure("quaternionic", 8)
    AH = symmat.hermitian_part(random_sym(rng, 8), S)
    for U in S.units:
        np.testing.assert_allclose(AH @ U, U @ AH, atol=1e-12)
    w = symmat.eig_sorted(AH).reshape(2, 4)
    np.testing.assert_allclose(w, w[:, :1].repeat(4, axis=1), atol=1e-8)


@pytest.mark.parametrize("kind,N", [("complex", 4), ("quaternionic", 8), ("real", 3)])
def test_hermitian_part_idempotent(rng, kind, N):
    S = symmat.ComplexStructure(kind, N)
    AK = symmat.hermitian_part(random_sym(rng, N), S)
    np.testing.assert_allclose(symmat.hermitian_part(AK, S), AK, atol=1e-10)


def test_hermitian_part_dimension_mismatch():
    with pytest.raises(DimensionError):
        symmat.hermitian_part(np.eye(3), symmat.ComplexStructure("complex", 4))


def test_k_eigenvalues_are_cluster_values(rng):
    S = symmat.ComplexStructure("complex", 6)
    A = random_sym(rng, 6)
    w = symmat.eig_sorted(symmat.hermitian_part(A, S))
    np.testing.assert_allclose(symmat.k_eigenvalues(A, S), w[0::2], atol=1e-8)


def test_skew_part_of_diagonal():
    a, b = 3.0, -1.5
    S = symmat.ComplexStructure("complex", 2)
    np.testing.assert_allclose(symmat.skew_hermitian_part(np.diag([a, b]), S), np.diag([(a - b) / 2, (b - a) / 2]))


def test_skew_part_of_scalar_is_zero():
    S = symmat.ComplexStructure("complex", 4)
    np.testing.assert_allclose(symmat.skew_hermitian_part(2.5 * np.eye(4), S), 0.0, atol=1e-15)


def test_skew_part_anticommutes_and_spectrum_is_paired(rng):
    S = symmat.ComplexStructure("complex", 4)
    for _ in range(50):
        K = symmat.skew_hermitian_part(random_sym(rng, 4), S)
        np.testing.assert_allclose(K @ S.J, -(S.J @ K), atol=1e-12)
        s = symmat.eig_sorted(K)
        np.testing.assert_allclose(s, -s[::-1], atol=1e-8)


def test_skew_part_needs_complex_structure():
    with pytest.raises(ValueError):
        symmat.skew_hermitian_part(np.eye(4), symmat.ComplexStructure("quaternionic", 4))


# --------------------------------------------------------------------------
# traces on subspaces


def test_trace_on_coordinate_plane():
    assert symmat.trace_on(np.diag([1.0, 2.0, 3.0]), np.eye(3)[:, :2]) == 3.0


def test_trace_on_full_space(rng):
    A = random_sym(rng, 4)
    Q = symmat.random_orthonormal(rng, 4, 4)
    assert symmat.trace_on(A, Q) == pytest.approx(np.trace(A), abs=1e-12)


def test_trace_on_is_inner_product_with_projection(rng):
    for k in (1, 2, 3):
        A = random_sym(rng, 5)
        xi = symmat.random_orthonormal(rng, 5, k)
        assert symmat.trace_on(A, xi) == pytest.approx(np.sum(A * symmat.projection(xi)), abs=1e-12)


def test_trace_on_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        symmat.trace_on(np.eye(2), np.array([[1.0], [1.0]]))


def test_trace_on_monotone(rng):
    from dirichlet_sets import cones
    A = random_sym(rng, 4, 1000)
    P = cones.sample_psd(rng, 4, 1000)
    xi = symmat.random_orthonormal(rng, 4, 2)
    assert np.all(symmat.trace_on(A + P, xi) >= symmat.trace_on(A, xi) - 1e-12)


# --------------------------------------------------------------------------
# Sturm roots


def test_sturm_t2_minus_1():
    assert symmat.sturm_largest_root([1.0, 0.0, -1.0]) == pytest.approx(1.0, abs=1e-12)


def test_sturm_det_of_diagonal():
    lam = np.array([-0.7, 0.2, 1.9, 3.0])
    coeffs = np.poly(-lam)  # det(tI + diag(lam)) has roots -lam
    assert symmat.sturm_largest_root(coeffs) == pytest.approx(-lam.min(), abs=1e-10)


def test_sturm_no_real_roots():
    with pytest.raises(NotHyperbolicError):
        symmat.sturm_largest_root([1.0, 0.0, 1.0])
    with pytest.raises(NotHyperbolicError):
        symmat.sturm_largest_roots(np.array([[1.0, 0.0, 1.0]]))


def test_sturm_partially_complex():
    # (t - 1)(t^2 + 1): one real root, still not hyperbolic
    with pytest.raises(NotHyperbolicError):
        symmat.sturm_largest_root(np.polymul([1.0, -1.0], [1.0, 0.0, 1.0]))


def test_sturm_degree_zero_and_sign():
    with pytest.raises(ValueError):
        symmat.sturm_largest_root([2.0])
    with pytest.raises(ValueError):
        symmat.sturm_largest_root([-1.0, 0.0, 1.0])


def test_sturm_repeated_roots():
    coeffs = np.poly([2.0, 2.0, -1.0, -1.0, -1.0])
    assert symmat.sturm_largest_root(coeffs) == pytest.approx(2.0, abs=1e-9)
    assert symmat.sturm_largest_roots(coeffs[None])[0] == pytest.approx(2.0, abs=1e-6)


def test_sturm_charpoly_gives_minus_lambda_min(rng):
    A = heavy = random_sym(rng, 4, 1000)
    coeffs = symmat.shifted_charpoly(heavy)
    batched = symmat.sturm_largest_roots(coeffs)
    np.testing.assert_allclose(batched, -np.linalg.eigvalsh(A)[:, 0], atol=1e-8)
    for i in range(50):
        assert symmat.sturm_largest_root(coeffs[i]) == pytest.approx(-np.linalg.eigvalsh(A[i])[0], abs=1e-8)


def test_shifted_charpoly_matches_interpolation(rng):
    A = random_sym(rng, 5)
    # det(tI + A) = det(tI - (-A))
    np.testing.assert_allclose(symmat.shifted_charpoly(A), _charpoly_by_interpolation(-A), atol=1e-9)
