"""Spectral kernel for small dense symmetric matrices.

Everything here works on plain numpy arrays. Functions that take a matrix
accept either a single ``(n, n)`` array or a stack ``(..., n, n)``; results
keep the leading batch shape.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, NonConvergenceError, NotHyperbolicError

MAX_DIM = 16
_MAX_SWEEPS = 60


def as_sym(A, tol=1e-9):
    """Validate a symmetric matrix (or stack) and return an exactly symmetric copy.

    The upper triangle is authoritative; the lower one is overwritten.
    """
    A = np.array(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DimensionError(f"expected square matrix, got shape {A.shape}")
    n = A.shape[-1]
    if not 1 <= n <= MAX_DIM:
        raise DimensionError(f"dimension {n} outside 1..{MAX_DIM}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    asym = np.max(np.abs(A - np.swapaxes(A, -1, -2)), initial=0.0)
    if asym > tol * (1.0 + np.max(np.abs(A), initial=0.0)):
        raise DimensionError(f"matrix is not symmetric (deviation {asym:.3g})")
    iu = np.triu_indices(n, 1)
    A[..., iu[1], iu[0]] = A[..., iu[0], iu[1]]
    return A


def _jacobi(A, want_vectors):
    A = np.array(A, dtype=float)
    batch = A.shape[:-2]
    n = A.shape[-1]
    A = A.reshape(-1, n, n).copy()
    V = np.broadcast_to(np.eye(n), A.shape).copy() if want_vectors else None
    if n == 1:
        w = A[:, 0, :].copy()
        return w.reshape(batch + (1,)), (V.reshape(batch + (1, 1)) if want_vectors else None)

    scale = np.sqrt(np.sum(A * A, axis=(1, 2)))
    thresh = (1e-15 * scale) ** 2
    offmask = ~np.eye(n, dtype=bool)
    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]
    for _ in range(_MAX_SWEEPS):
        off = np.sum(A[:, offmask] ** 2, axis=1)
        active = off > thresh
        if not active.any():
            break
        for p, q in pairs:
            apq = A[:, p, q]
            rot = active & (apq != 0.0)
            if not rot.any():
                continue
            tau = np.where(rot, (A[:, q, q] - A[:, p, p]) / np.where(rot, 2.0 * apq, 1.0), 0.0)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            t = np.where(rot, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            cc, ss = c[:, None], s[:, None]
            colp, colq = A[:, :, p].copy(), A[:, :, q].copy()
            A[:, :, p] = cc * colp - ss * colq
            A[:, :, q] = ss * colp + cc * colq
            rowp, rowq = A[:, p, :].copy(), A[:, q, :].copy()
            A[:, p, :] = cc * rowp - ss * rowq
            A[:, q, :] = ss * rowp + cc * rowq
            A[rot, p, q] = 0.0
            A[rot, q, p] = 0.0
            if want_vectors:
                vp, vq = V[:, :, p].copy(), V[:, :, q].copy()
                V[:, :, p] = cc * vp - ss * vq
                V[:, :, q] = ss * vp + cc * vq
    else:
        off = np.sum(A[:, offmask] ** 2, axis=1)
        if np.any(off > thresh * 1e4):
            raise NonConvergenceError(
                f"Jacobi eigensolver did not converge after {_MAX_SWEEPS} sweeps "
                f"(max off-diagonal mass {np.sqrt(off.max()):.3g})"
            )
    w = np.diagonal(A, axis1=1, axis2=2).copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    if want_vectors:
        V = np.take_along_axis(V, order[:, None, :], axis=2)
        return w.reshape(batch + (n,)), V.reshape(batch + (n, n))
    return w.reshape(batch + (n,)), None


def eig_sorted(A):
    """Ascending eigenvalues by cyclic Jacobi rotations."""
    return _jacobi(A, want_vectors=False)[0]


def eigh_sorted(A):
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    return _jacobi(A, want_vectors=True)


def lambda_max(A):
    return eig_sorted(A)[..., -1]


def lambda_min(A):
    return eig_sorted(A)[..., 0]


# --------------------------------------------------------------------------
# complex and quaternionic structures


def _block_j(m):
    J = np.zeros((2 * m, 2 * m))
    for k in range(m):
        J[2 * k + 1, 2 * k] = 1.0
        J[2 * k, 2 * k + 1] = -1.0
    return J


# right multiplication by i and j on H = R^4, coordinates (1, i, j, k)
_RI = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]], dtype=float)
_RJ = np.array([[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)


@dataclass(frozen=True)
class ComplexStructure:
    """Real, complex or quaternionic structure on R^N.

    complex: R^{2m} = C^m with z_k = x_{2k} + i x_{2k+1}; J is multiplication by i.
    quaternionic: R^{4m} = H^m acted on from the right; I, J are right
    multiplication by i and j, and K := IJ (right multiplication by -k).
    """

    kind: str
    N: int

    def __post_init__(self):
        d = {"real": 1, "complex": 2, "quaternionic": 4}.get(self.kind)
        if d is None:
            raise ValueError(f"unknown structure kind {self.kind!r}")
        if self.N % d:
            raise DimensionError(f"{self.kind} structure needs N divisible by {d}, got {self.N}")

    @property
    def multiplicity(self):
        return {"real": 1, "complex": 2, "quaternionic": 4}[self.kind]

    @property
    def rank(self):
        """Dimension over the scalar field."""
        return self.N // self.multiplicity

    @cached_property
    def units(self):
        """The imaginary units as real N x N matrices (empty for ``real``)."""
        if self.kind == "real":
            return ()
        if self.kind == "complex":
            return (_block_j(self.N // 2),)
        m = self.N // 4
        I = np.kron(np.eye(m), _RI)
        J = np.kron(np.eye(m), _RJ)
        return (I, J, I @ J)

    @property
    def J(self):
        if self.kind == "complex":
            return self.units[0]
        if self.kind == "quaternionic":
            return self.units[1]
        raise ValueError("real structure has no J")


def _check_compatible(A, S):
    if A.shape[-1] != S.N:
        raise DimensionError(f"matrix dimension {A.shape[-1]} does not match structure N={S.N}")


def hermitian_part(A, S):
    """A_K: 1/2 (A - JAJ) over C, 1/4 (A - IAI - JAJ - KAK) over H."""
    A = np.asarray(A, dtype=float)
    _check_compatible(A, S)
    if S.kind == "real":
        return A.copy()
    acc = A.copy()
    for U in S.units:
        acc = acc - U @ A @ U
    return acc / (len(S.units) + 1)


def skew_hermitian_part(A, S):
    """A_skew = 1/2 (A + JAJ); anticommutes with J."""
    A = np.asarray(A, dtype=float)
    _check_compatible(A, S)
    if S.kind != "complex":
        raise ValueError("skew-hermitian part is defined for complex structures only")
    J = S.J
    return 0.5 * (A + J @ A @ J)


def k_eigenvalues(A, S):
    """The ``S.rank`` eigenvalues of the hermitian part, one per cluster, ascending.

    Eigenvalues of A_K come in clusters of size 2 (C) or 4 (H); each cluster is
    replaced by its mean.
    """
    w = eig_sorted(hermitian_part(A, S))
    d = S.multiplicity
    if d == 1:
        return w
    return w.reshape(w.shape[:-1] + (S.rank, d)).mean(axis=-1)


def trace_on(A, xi, tol=1e-8):
    """Trace of A restricted to the span of the orthonormal columns of ``xi``."""
    A = np.asarray(A, dtype=float)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.shape[0] != A.shape[-1]:
        xi = xi.T
    if xi.shape[0] != A.shape[-1]:
        raise DimensionError("basis vectors do not match matrix dimension")
    gram = xi.T @ xi
    dev = np.max(np.abs(gram - np.eye(gram.shape[0])), initial=0.0)
    if dev > tol:
        raise ValueError(f"basis is not orthonormal (Gram deviation {dev:.3g})")
    return np.einsum("ip,...ij,jp->...", xi, A, xi)


def projection(xi):
    """Orthogonal projection onto the span of the orthonormal columns of ``xi``."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    return xi @ xi.T


def restrict(A, basis):
    """Matrix of the quadratic form A on span(basis) in that basis."""
    basis = np.asarray(basis, dtype=float)
    return np.swapaxes(basis, -1, -2) @ A @ basis


# --------------------------------------------------------------------------
# Sturm sequences


def _trim(p, tol=0.0):
    p = np.asarray(p, dtype=float)
    nz = np.nonzero(np.abs(p) > tol)[0]
    return p[nz[0]:] if len(nz) else np.zeros(1)


def _normalize(p):
    m = np.max(np.abs(p))
    return p / m if m > 0 else p


def _polyrem(a, b):
    a = a.copy()
    lb = len(b)
    while len(a) >= lb:
        coef = a[0] / b[0]
        a[:lb] -= coef * b
        a = a[1:]
    return a


def sturm_chain(coeffs, rtol=1e-10):
    """Sturm chain of a polynomial (coefficients highest degree first).

    Each member is rescaled to unit max-norm (positive scaling leaves sign
    counts unchanged); a remainder whose entries are all below ``rtol`` ends the
    chain. The last member is then an approximate gcd(p, p').
    """
    p = _normalize(_trim(coeffs))
    if len(p) < 2:
        raise ValueError("polynomial must have degree >= 1")
    chain = [p, _normalize(np.polyder(p))]
    while len(chain[-1]) > 1:
        r = _polyrem(chain[-2], chain[-1])
        r = _trim(r, rtol)
        if len(r) == 1 and abs(r[0]) <= rtol:
            break
        chain.append(-_normalize(r))
    return chain


def _horner(p, x):
    acc = 0.0
    for c in p:
        acc = acc * x + c
    return acc


def _variations(values):
    signs = [v > 0 for v in values if v != 0.0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _variations_at_inf(chain, sign):
    vals = []
    for p in chain:
        deg = len(p) - 1
        vals.append(p[0] * (sign ** deg))
    return _variations(vals)


def count_real_roots(chain, lo=-np.inf, hi=np.inf):
    """Number of distinct real roots in (lo, hi]."""

    def V(x):
        if np.isinf(x):
            return _variations_at_inf(chain, 1 if x > 0 else -1)
        return _variations([_horner(p, x) for p in chain])

    return V(lo) - V(hi)


def _check_real_rooted(chain, depth=0):
    deg = len(chain[0]) - 1
    g = chain[-1]
    gdeg = len(g) - 1
    distinct = count_real_roots(chain)
    if distinct < deg - gdeg:
        raise NotHyperbolicError(
            f"polynomial of degree {deg} has only {distinct} distinct real roots "
            f"(expected {deg - gdeg}); it is not hyperbolic"
        )
    if gdeg >= 1 and depth < 32:
        _check_real_rooted(sturm_chain(g), depth + 1)


def cauchy_bound(coeffs):
    p = _trim(coeffs)
    return 1.0 + float(np.max(np.abs(p[1:] / p[0]), initial=0.0))


def sturm_largest_root(coeffs, tol=1e-13, check=True):
    """Largest real root of an all-real-rooted polynomial.

    Coefficients are ordered highest degree first and the leading one must be
    positive. The root is bracketed by the Cauchy bound and located by
    bisection on the Sturm count of roots above the midpoint.
    """
    p = _trim(np.asarray(coeffs, dtype=float))
    if len(p) < 2:
        raise ValueError("polynomial must have degree >= 1")
    if p[0] <= 0:
        raise ValueError("leading coefficient must be positive")
    chain = sturm_chain(p)
    if check:
        _check_real_rooted(chain)
    if len(chain[-1]) > 1:
        # multiple roots: bisect on the square-free part p / gcd(p, p'), whose
        # roots are simple and so are located to full precision
        q, _ = np.polydiv(_normalize(p), chain[-1])
        p = _normalize(_trim(q))
        chain = sturm_chain(p)
    bound = cauchy_bound(p)
    lo, hi = -bound, bound
    v_hi = _variations_at_inf(chain, 1)

    def above(x):
        return _variations([_horner(q, x) for q in chain]) - v_hi

    if above(lo) == 0:
        raise NotHyperbolicError("polynomial has no real roots; it is not hyperbolic")
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if above(mid) >= 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _batch_rem(a, b):
    a = a.copy()
    lb = b.shape[1]
    while a.shape[1] >= lb:
        coef = a[:, :1] / b[:, :1]
        a[:, :lb] -= coef * b
        a = a[:, 1:]
    return a


def sturm_largest_roots(coeffs, tol=1e-13, check=True, lead_tol=1e-8):
    """Batched ``sturm_largest_root`` for polynomials of equal degree.

    Rows whose Sturm chain is generic (full length, every leading coefficient
    well away from zero) are handled together; a generic chain certifies
    hyperbolicity exactly when all leading coefficients are positive. Other
    rows, e.g. with repeated roots, fall back to the scalar routine.
    """
    C0 = np.atleast_2d(np.asarray(coeffs, dtype=float))
    k, d1 = C0.shape
    if d1 < 2:
        raise ValueError("polynomial must have degree >= 1")
    if np.any(C0[:, 0] <= 0):
        raise ValueError("leading coefficient must be positive")
    # substitute t = s u so that every root lies in [-1, 1]
    s = 1.0 + np.max(np.abs(C0[:, 1:] / C0[:, :1]), axis=1)
    C = C0 * s[:, None] ** -np.arange(d1)[None, :]
    norm = lambda p: p / np.max(np.abs(p), axis=1, keepdims=True)
    deriv = C[:, :-1] * np.arange(d1 - 1, 0, -1)
    chain = [norm(C), norm(deriv)]
    generic = np.ones(k, dtype=bool)
    while chain[-1].shape[1] > 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = _batch_rem(chain[-2], chain[-1])
        scale = np.max(np.abs(r), axis=1, keepdims=True)
        generic &= np.abs(r[:, 0]) > lead_tol * np.maximum(scale[:, 0], 1e-300)
        generic &= scale[:, 0] > lead_tol
        safe = np.where(scale > 0, scale, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            chain.append(-r / safe)
    leads = np.stack([c[:, 0] for c in chain], axis=1)
    hyper = np.all(leads > 0, axis=1)
    out = np.empty(k)
    slow = ~generic | ~hyper
    fast = ~slow
    if np.any(fast):
        ch = [c[fast] for c in chain]
        p = C[fast]
        bound = 1.0 + np.max(np.abs(p[:, 1:] / p[:, :1]), axis=1)
        lo, hi = -bound, bound.copy()

        def above(x):
            vals = []
            for q in ch:
                acc = np.zeros_like(x)
                for j in range(q.shape[1]):
                    acc = acc * x + q[:, j]
                vals.append(acc)
            V = np.stack(vals, axis=1)
            s = np.sign(V)
            # zeros are skipped by carrying the previous sign forward
            for j in range(1, s.shape[1]):
                s[:, j] = np.where(s[:, j] == 0, s[:, j - 1], s[:, j])
            return np.sum(s[:, 1:] * s[:, :-1] < 0, axis=1)

        for _ in range(200):
            mid = 0.5 * (lo + hi)
            up = above(mid) >= 1
            lo = np.where(up, mid, lo)
            hi = np.where(up, hi, mid)
            if np.all(hi - lo <= tol * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))):
                break
        out[fast] = 0.5 * (lo + hi)
    for i in np.nonzero(slow)[0]:
        out[i] = _largest_root_fallback(C[i], tol, check)
    return out * s


def _largest_root_fallback(p, tol, check, imag_tol=1e-6):
    """Largest root of a polynomial whose Sturm chain is degenerate.

    Rounding can split a multiple root of a hyperbolic polynomial into a
    complex pair with imaginary part of order sqrt(machine eps). Companion
    matrix roots are used; imaginary parts up to ``imag_tol`` (roots scaled
    into [-1, 1]) count as real, and larger ones fall back to the exact Sturm
    certificate, which raises for genuinely complex roots.
    """
    r = np.roots(p)
    if np.all(np.abs(r.imag) <= imag_tol):
        return float(np.max(r.real))
    return sturm_largest_root(p, tol=tol, check=check)


# --------------------------------------------------------------------------
# characteristic polynomials


def shifted_charpoly(A):
    """Coefficients (highest first) of t -> det(tI + A), by Faddeev-LeVerrier.

    Independent of the eigensolver, so it can serve as a cross-check.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    B = -A
    coeffs = np.zeros(A.shape[:-2] + (n + 1,))
    coeffs[..., 0] = 1.0
    M = np.zeros_like(B)
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = B @ M + coeffs[..., k - 1, None, None] * eye
        coeffs[..., k] = -np.trace(B @ M, axis1=-2, axis2=-1) / k
    return coeffs


def random_orthonormal(rng, n, k):
    """k orthonormal columns in R^n, Haar-distributed."""
    G = rng.standard_normal((n, k))
    Q, R = np.linalg.qr(G)
    return Q * np.sign(np.diagonal(R))
