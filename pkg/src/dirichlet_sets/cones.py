"""Dirichlet sets represented by monotone defect functions.

A set F in Sym^2(R^N) is stored as a continuous function ``f`` with
F = {f >= 0}, Int F = {f > 0} and f(A + P) >= f(A) for P >= 0. Every
construction (dual, translate, intersection, ...) is a transform of ``f``.

Defects are evaluated on stacks: ``defect_fn`` receives an array of shape
``(k, N, N)`` and returns shape ``(k,)``.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import symmat
from .errors import (
    DegenerateSetError,
    DimensionError,
    NotHyperbolicError,
    ParameterError,
    SamplingError,
)

BRACKET_LIMIT = 1e9


@dataclass(frozen=True, eq=False)
class ConeSet:
    n: int
    defect_fn: Callable = field(repr=False)
    is_cone: bool
    name: str
    params: dict = field(default_factory=dict)
    threshold_fn: Optional[Callable] = field(default=None, repr=False)
    # defect(B + tI) = defect(B) + slope * t exactly, when known
    slope: Optional[float] = None

    def _stack(self, A):
        A = np.asarray(A, dtype=float)
        if A.shape[-2:] != (self.n, self.n):
            raise DimensionError(f"{self.name} lives in dimension {self.n}, got matrix shape {A.shape}")
        return A.reshape(-1, self.n, self.n), A.shape[:-2]

    def defect(self, A):
        S, batch = self._stack(A)
        out = np.asarray(self.defect_fn(S), dtype=float).reshape(batch)
        return float(out) if out.ndim == 0 else out

    def contains(self, A, tol=0.0):
        return self.defect(A) >= -tol

    def edge_threshold(self, B):
        S, batch = self._stack(B)
        if self.threshold_fn is not None:
            t = np.asarray(self.threshold_fn(S), dtype=float)
        else:
            t = bisect_threshold(self.defect_fn, S)
        t = t.reshape(batch)
        return float(t) if t.ndim == 0 else t

    def dual(self):
        return dual(self)

    @property
    def satisfies_max_principle(self):
        """0 is not interior; equivalently the I-line through 0 enters F at t >= 0."""
        return self.edge_threshold(np.zeros((self.n, self.n))) >= -1e-12

    def __repr__(self):
        return f"ConeSet({self.name}, n={self.n})"


def defect(F, A):
    return F.defect(A)


def edge_threshold(F, B):
    """The b with {t : B + tI in F} = [b, inf)."""
    return F.edge_threshold(B)


def bisect_threshold(defect_fn, B, rtol=1e-15, max_iter=200):
    """Root of the strictly increasing map t -> defect(B + tI), batched."""
    B = np.asarray(B, dtype=float)
    k, n = B.shape[0], B.shape[-1]
    eye = np.eye(n)

    def f(t):
        return np.asarray(defect_fn(B + t[:, None, None] * eye), dtype=float)

    scale = 1.0 + np.max(np.abs(B), axis=(1, 2))
    hi = scale.copy()
    lo = -scale.copy()
    fhi = f(hi)
    while np.any(fhi < 0):
        bad = fhi < 0
        if np.any(np.abs(hi[bad]) > BRACKET_LIMIT):
            raise DegenerateSetError("I-line never enters the set within |t| <= 1e9")
        lo = np.where(bad, hi, lo)
        hi = np.where(bad, 2.0 * hi, hi)
        fhi = f(hi)
    flo = f(lo)
    while np.any(flo >= 0):
        bad = flo >= 0
        if np.any(np.abs(lo[bad]) > BRACKET_LIMIT):
            raise DegenerateSetError("I-line never leaves the set within |t| <= 1e9")
        hi = np.where(bad, lo, hi)
        lo = np.where(bad, 2.0 * lo, lo)
        flo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        pos = fm >= 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.all(hi - lo <= rtol * np.maximum(1.0, np.abs(hi))):
            break
    # the root lies in [lo, hi); hi is always a member
    return hi


def _linear_threshold(defect_fn, slope):
    return lambda B: -np.asarray(defect_fn(B)) / slope


def _make(n, defect_fn, is_cone, name, params=None, threshold_fn=None, slope=None):
    if threshold_fn is None and slope is not None:
        threshold_fn = _linear_threshold(defect_fn, slope)
    return ConeSet(n=n, defect_fn=defect_fn, is_cone=is_cone, name=name,
                   params=dict(params or {}), threshold_fn=threshold_fn, slope=slope)


# --------------------------------------------------------------------------
# algebra


def dual(F):
    """Dirichlet dual, with defect g(A) = -f(-A)."""
    f = F.defect_fn
    thr = None
    if F.threshold_fn is not None:
        tf = F.threshold_fn
        thr = lambda B: -np.asarray(tf(-B))
    name = F.name[5:-1] if F.name.startswith("dual(") and F.name.endswith(")") else f"dual({F.name})"
    return ConeSet(n=F.n, defect_fn=lambda A: -np.asarray(f(-A)), is_cone=F.is_cone,
                   name=name, params=dict(F.params), threshold_fn=thr, slope=F.slope)


def translate(F, A0):
    """F + A0."""
    A0 = symmat.as_sym(A0)
    if A0.shape != (F.n, F.n):
        raise DimensionError("translation matrix has the wrong dimension")
    f = F.defect_fn
    thr = None
    if F.threshold_fn is not None:
        tf = F.threshold_fn
        thr = lambda B: tf(B - A0)
    return ConeSet(n=F.n, defect_fn=lambda A: f(A - A0), is_cone=F.is_cone and not np.any(A0),
                   name=f"({F.name}+A0)", params={**F.params, "A0": A0.tolist()},
                   threshold_fn=thr, slope=F.slope)


def conjugate(F, g):
    """g(F) = {g^T B g : B in F}; defect_{gF}(A) = defect_F(g^-T A g^-1)."""
    g = np.asarray(g, dtype=float)
    if g.shape != (F.n, F.n):
        raise DimensionError("conjugating matrix has the wrong dimension")
    if abs(np.linalg.det(g)) < 1e-12 * max(1.0, np.max(np.abs(g))) ** F.n:
        raise ParameterError("conjugating matrix is singular")
    ginv = np.linalg.inv(g)
    f = F.defect_fn
    return ConeSet(n=F.n, defect_fn=lambda A: f(ginv.T @ A @ ginv), is_cone=F.is_cone,
                   name=f"g({F.name})", params=dict(F.params))


def _same_dim(sets):
    if not sets:
        raise ParameterError("need at least one set")
    n = sets[0].n
    if any(S.n != n for S in sets):
        raise DimensionError("all sets must share the ambient dimension")
    return n


def intersect(sets):
    sets = list(sets)
    n = _same_dim(sets)
    fs = [S.defect_fn for S in sets]
    thr = None
    if all(S.threshold_fn is not None for S in sets):
        ts = [S.threshold_fn for S in sets]
        thr = lambda B: np.max([np.asarray(t(B)) for t in ts], axis=0)
    return ConeSet(n=n, defect_fn=lambda A: np.min([np.asarray(f(A)) for f in fs], axis=0),
                   is_cone=all(S.is_cone for S in sets),
                   name="(" + " & ".join(S.name for S in sets) + ")", threshold_fn=thr)


def union(sets):
    sets = list(sets)
    n = _same_dim(sets)
    fs = [S.defect_fn for S in sets]
    thr = None
    if all(S.threshold_fn is not None for S in sets):
        ts = [S.threshold_fn for S in sets]
        thr = lambda B: np.min([np.asarray(t(B)) for t in ts], axis=0)
    return ConeSet(n=n, defect_fn=lambda A: np.max([np.asarray(f(A)) for f in fs], axis=0),
                   is_cone=all(S.is_cone for S in sets),
                   name="(" + " | ".join(S.name for S in sets) + ")", threshold_fn=thr)


def product_extend(F0, n, W=None):
    """F0 on a coordinate subspace W of R^n, extended by Sym^2(W)^perp.

    ``W`` lists the coordinate indices spanning the subspace (default: the
    first ``F0.n`` axes).
    """
    W = list(range(F0.n)) if W is None else [int(i) for i in W]
    if len(W) != F0.n or len(set(W)) != len(W) or any(not 0 <= i < n for i in W):
        raise ParameterError(f"W={W} is not a set of {F0.n} distinct coordinate indices in 0..{n - 1}")
    if F0.n >= n:
        raise ParameterError("subspace must be a proper subspace")
    idx = np.array(W)
    f = F0.defect_fn

    def restrict(A):
        return A[:, idx[:, None], idx[None, :]]

    thr = None
    if F0.threshold_fn is not None:
        tf = F0.threshold_fn
        thr = lambda B: tf(restrict(B))
    return ConeSet(n=n, defect_fn=lambda A: f(restrict(A)), is_cone=F0.is_cone,
                   name=f"ext({F0.name},W={W})", params={**F0.params, "W": W},
                   threshold_fn=thr, slope=F0.slope)


# --------------------------------------------------------------------------
# catalog

_FIELDS = ("real", "complex", "quaternionic")


def _structure(n, fieldname):
    if fieldname not in _FIELDS:
        raise ParameterError(f"field must be one of {_FIELDS}")
    try:
        return symmat.ComplexStructure(fieldname, n)
    except DimensionError as exc:
        raise ParameterError(str(exc)) from None


def _kspec(S):
    if S.kind == "real":
        return symmat.eig_sorted
    return lambda A: symmat.k_eigenvalues(A, S)


def P(n):
    return _make(n, lambda A: symmat.eig_sorted(A)[:, 0], True, "P", {}, slope=1.0)


def Ptilde(n):
    return _make(n, lambda A: symmat.eig_sorted(A)[:, -1], True, "Ptilde", {}, slope=1.0)


def harm(n):
    return _make(n, lambda A: np.trace(A, axis1=1, axis2=2), True, "harm", {}, slope=float(n))


def halfspace(A0, c=0.0):
    """{A : <A0, A> >= c}; a Dirichlet set iff A0 is positive semidefinite and nonzero."""
    A0 = symmat.as_sym(A0)
    n = A0.shape[0]
    if not np.any(A0) or symmat.eig_sorted(A0)[0] < -1e-12:
        raise ParameterError("half-space normal must be nonzero and positive semidefinite")
    c = float(c)
    slope = float(np.trace(A0))
    fn = lambda A: np.einsum("ij,kij->k", A0, A) - c
    return _make(n, fn, c == 0.0, "halfspace", {"A0": A0.tolist(), "c": c}, slope=slope)


def _field_name(name, field):
    return name if field == "real" else f"{name}[{field}]"


def branch_q(n, q, field="real"):
    S = _structure(n, field)
    m = S.rank
    if not 0 <= q < m:
        raise ParameterError(f"branch index q={q} outside 0..{m - 1}")
    spec = _kspec(S)
    return _make(n, lambda A: spec(A)[:, q], True, _field_name(f"P_{q}", field), {"q": q, "field": field}, slope=1.0)


def PG(n, p, field="real"):
    """Sum of the p smallest K-eigenvalues (geometric p-plurisubharmonic set)."""
    S = _structure(n, field)
    if not 1 <= p <= S.rank:
        raise ParameterError(f"p={p} outside 1..{S.rank}")
    spec = _kspec(S)
    return _make(n, lambda A: spec(A)[:, :p].sum(axis=1), True, _field_name(f"PG{p}", field),
                 {"p": p, "field": field}, slope=float(p))


def Pq_G(n, p, q, field="real"):
    """lambda_{q+1} + ... + lambda_{q+p} >= 0."""
    S = _structure(n, field)
    if p < 1 or q < 0 or p + q > S.rank:
        raise ParameterError(f"need p >= 1, q >= 0, p + q <= {S.rank}")
    spec = _kspec(S)
    return _make(n, lambda A: spec(A)[:, q:q + p].sum(axis=1), True, _field_name(f"P{q}(G{p})", field),
                 {"p": p, "q": q, "field": field}, slope=float(p))


def _lag_defect(A, J):
    t = np.trace(A, axis1=-2, axis2=-1)
    skew = 0.5 * (A + J @ A @ J)
    w = symmat.eig_sorted(skew)
    return 0.5 * t - 0.5 * np.abs(w).sum(axis=-1)


def LAG(n):
    """Lagrangian set on R^n = C^{n/2}: t/2 minus the nonnegative skew eigenvalues."""
    S = _structure(n, "complex")
    J = S.J
    return _make(n, lambda A: _lag_defect(A, J), True, "LAG", {}, slope=n / 2.0)


def _real_to_cplx(V):
    """Real 2m-vectors (stacked on the second-to-last axis) to complex m-vectors."""
    return V[..., 0::2, :] + 1j * V[..., 1::2, :]


def _cplx_to_real(U):
    V = np.empty(U.shape[:-2] + (2 * U.shape[-2], U.shape[-1]))
    V[..., 0::2, :] = U.real
    V[..., 1::2, :] = U.imag
    return V


def _orthonormalize(U):
    Q, R = np.linalg.qr(U)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    phase = np.where(np.abs(d) > 0, d / np.maximum(np.abs(d), 1e-300), 1.0)
    return Q * phase[..., None, :]


def _iso_min(A, p, J, iters=3000, gtol=1e-9, seed=0):
    """min over isotropic real p-planes xi of tr_xi A, batched over A.

    An isotropic p-plane is spanned by the real forms of a unitary p-frame U,
    so this is a trace minimization on the complex Stiefel manifold. It is
    solved by projected gradient descent with QR retraction from several
    starts: the lowest complex eigenvectors of the hermitian part, the most
    negative eigenvectors of the skew part, the lowest eigenvectors of A, and
    two seeded random frames. The result is an upper bound on the minimum
    that is sharp up to the optimizer's tolerance.
    """
    k, N, _ = A.shape
    m = N // 2
    AC = 0.5 * (A - J @ A @ J)
    skew = 0.5 * (A + J @ A @ J)
    starts = [
        _real_to_cplx(np.linalg.eigh(AC)[1][..., 0:2 * p:2]),
        _real_to_cplx(np.linalg.eigh(skew)[1][..., :p]),
        _real_to_cplx(np.linalg.eigh(A)[1][..., :p]),
    ]
    rng = np.random.default_rng(seed)
    for _ in range(2):
        starts.append(rng.standard_normal((k, m, p)) + 1j * rng.standard_normal((k, m, p)))
    # the gradient 2AX is 2|A|-Lipschitz
    step = 0.5 / (1e-300 + np.max(np.abs(np.linalg.eigvalsh(A)), axis=1))[:, None, None]
    best = np.full(k, np.inf)
    for U in starts:
        U = _orthonormalize(U)
        live = np.arange(k)
        for _ in range(iters):
            Ul = U[live]
            G = _real_to_cplx(2.0 * A[live] @ _cplx_to_real(Ul))
            UhG = np.swapaxes(Ul.conj(), 1, 2) @ G
            grad = G - Ul @ (0.5 * (UhG + np.swapaxes(UhG.conj(), 1, 2)))
            U[live] = _orthonormalize(Ul - step[live] * grad)
            gnorm = np.sqrt(np.sum(np.abs(grad) ** 2, axis=(1, 2))) * step[live, 0, 0]
            live = live[gnorm > gtol]
            if live.size == 0:
                break
        X = _cplx_to_real(U)
        val = np.trace(np.swapaxes(X, 1, 2) @ A @ X, axis1=1, axis2=2)
        best = np.minimum(best, val)
    return best


def ISO(n, p):
    """Isotropic p-plane set on R^n = C^{n/2}: tr_xi A >= 0 on every isotropic p-plane.

    The defect is min tr_xi A over isotropic p-planes. p = n/2 reduces to LAG
    and p = 1 to P (every real line is isotropic); both are closed form.
    Intermediate p is minimized numerically and is accurate only to the
    optimizer.
    """
    S = _structure(n, "complex")
    m = S.rank
    if not 1 <= p <= m:
        raise ParameterError(f"p={p} outside 1..{m}")
    J = S.J
    params = {"p": p}
    if p == m:
        return _make(n, lambda A: _lag_defect(A, J), True, f"ISO{p}", params, slope=float(p))
    if p == 1:
        return _make(n, lambda A: symmat.eig_sorted(A)[:, 0], True, f"ISO{p}", params, slope=1.0)

    return _make(n, lambda A: _iso_min(A, p, J), True, f"ISO{p}", params, slope=float(p))


def _sl_plane_root(mu, c):
    """Starting point in the plane: tan of the angle sum turns the equation
    into a quadratic in t; of its two roots, one solves the angle equation
    and the other the equation shifted by pi."""
    S = mu.sum(axis=1)
    Pr = mu[:, 0] * mu[:, 1]
    if c == 0.0:
        return -0.5 * S
    T = math.tan(c) if abs(abs(c) - math.pi / 2) > 1e-12 else None
    if T is None:
        # c = +-pi/2: (l1 + t)(l2 + t) = 1
        disc = np.sqrt(np.maximum(0.25 * (mu[:, 1] - mu[:, 0]) ** 2 + 1.0, 0.0))
        return -0.5 * S + np.sign(c) * disc
    b = 2.0 + T * S
    cc = S - T + T * Pr
    disc = np.sqrt(np.maximum(b * b - 4.0 * T * cc, 0.0))
    r1 = (-b + disc) / (2.0 * T)
    r2 = (-b - disc) / (2.0 * T)
    g = lambda r: np.abs(np.arctan(mu + r[:, None]).sum(axis=1) - c)
    return np.where(g(r1) <= g(r2), r1, r2)


def _sl_threshold(A, c, max_iter=100):
    """Root of t -> sum arctan(mu_i + t) - c by safeguarded Newton, batched.

    The root is bracketed by tan(c/n) - mu_max and tan(c/n) - mu_min; a Newton
    step leaving the bracket is replaced by bisection.
    """
    mu = symmat.eig_sorted(A)
    n = mu.shape[1]
    base = math.tan(c / n)
    lo = base - mu[:, -1]
    hi = base - mu[:, 0]
    t = 0.5 * (lo + hi)
    if n == 2:
        t = np.clip(_sl_plane_root(mu, c), lo, hi)
    for _ in range(max_iter):
        x = mu + t[:, None]
        g = np.arctan(x).sum(axis=1) - c
        dg = (1.0 / (1.0 + x * x)).sum(axis=1)
        pos = g >= 0
        hi = np.where(pos, t, hi)
        lo = np.where(pos, lo, t)
        step = t - g / dg
        bad = (step < lo) | (step > hi)
        t_new = np.where(bad, 0.5 * (lo + hi), step)
        done = np.abs(t_new - t) <= 4e-16 * np.maximum(1.0, np.abs(t))
        t = t_new
        if np.all(done | (hi - lo <= 4e-16 * np.maximum(1.0, np.abs(hi)))):
            break
    return t


def SL(n, c):
    """Special Lagrangian potential set: sum arctan(lambda_i) >= c.

    The defect is not homogeneous; only for c = 0 and n <= 2 is the set a cone.
    """
    c = float(c)
    if not abs(c) < n * math.pi / 2:
        raise ParameterError(f"c must satisfy |c| < n*pi/2 = {n * math.pi / 2:.6g}")
    fn = lambda A: np.arctan(symmat.eig_sorted(A)).sum(axis=1) - c
    return _make(n, fn, c == 0.0 and n <= 2, f"SL({c:g})", {"c": c},
                 threshold_fn=lambda B: _sl_threshold(B, c))


def _poly_from_samples(M, A, degree):
    """Coefficients of t -> M(tI + A) by interpolation at Chebyshev nodes."""
    n = A.shape[0]
    scale = 1.0 + np.max(np.abs(A))
    k = np.arange(degree + 1)
    nodes = scale * np.cos((2 * k + 1) * np.pi / (2 * degree + 2))
    vals = np.array([M(A + t * np.eye(n)) for t in nodes])
    V = np.vander(nodes / scale, degree + 1)
    c = np.linalg.solve(V, vals)
    return c / scale ** np.arange(degree, -1, -1)


def _garding_from_polys(n, polys_fn, name, params):
    """Garding set from a batched map A -> coefficients of t -> M(tI + A)."""

    def largest_roots(A):
        return symmat.sturm_largest_roots(polys_fn(A))

    return _make(n, lambda A: -largest_roots(A), True, name, params,
                 threshold_fn=largest_roots, slope=1.0)


def garding(n, M, degree, samples=32, seed=0):
    """Garding cone of a polynomial M on Sym^2(R^n) hyperbolic in the direction I.

    ``M`` is a callable on n x n arrays, homogeneous of ``degree``, with M(I) = 1.
    Hyperbolicity is spot-checked on random matrices at construction.
    """
    if not callable(M):
        raise ParameterError("M must be callable")
    mI = M(np.eye(n))
    if abs(mI - 1.0) > 1e-10:
        raise ParameterError(f"M(I) must equal 1, got {mI}")
    polys = lambda A: np.array([_poly_from_samples(M, a, degree) for a in A])
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (samples, n, n))
    try:
        symmat.sturm_largest_roots(polys(X + np.swapaxes(X, 1, 2)))
    except NotHyperbolicError as exc:
        raise ParameterError(f"M is not hyperbolic in the direction I: {exc}") from None
    return _garding_from_polys(n, polys, "garding", {"degree": degree})


def _sigma_polys(A, k):
    n = A.shape[-1]
    q = symmat.shifted_charpoly(A)
    ell = n - k
    # d^ell/dt^ell of sum_j q_j t^(n-j), keeping the first k+1 coefficients
    powers = np.arange(n, ell - 1, -1)
    fall = np.array([math.perm(int(m), ell) for m in powers], dtype=float)
    return q[:, : k + 1] * fall / (math.factorial(ell) * math.comb(n, k))


def sigma_k(n, k):
    """Garding cone of the normalized elementary symmetric function sigma_k.

    t -> sigma_k(A + tI) is the (n-k)-th derivative of det(tI + A) over (n-k)!,
    scaled so that the leading coefficient is 1.
    """
    if not 1 <= k <= n:
        raise ParameterError(f"k={k} outside 1..{n}")
    return _garding_from_polys(n, lambda A: _sigma_polys(A, k), f"sigma_{k}", {"k": k})


def garding_det(n):
    return _garding_from_polys(n, symmat.shifted_charpoly, "det", {})


_CATALOG = {
    "P": lambda n, **kw: P(n),
    "Ptilde": lambda n, **kw: Ptilde(n),
    "harm": lambda n, **kw: harm(n),
    "halfspace": lambda n, A0, c=0.0: halfspace(A0, c),
    "branch_q": branch_q,
    "PG": PG,
    "Pq_G": Pq_G,
    "LAG": lambda n: LAG(n),
    "ISO": ISO,
    "SL": SL,
    "garding": None,
    "sigma_k": sigma_k,
}


def catalog(name, n, **params):
    """Build a catalog set by name. ``n`` is the real ambient dimension."""
    if name == "garding":
        M = params.get("M", "det")
        if M == "det":
            return garding_det(n)
        if M == "sigma":
            return sigma_k(n, int(params["k"]))
        if callable(M):
            return garding(n, M, int(params["degree"]))
        raise ParameterError(f"unknown Garding polynomial {M!r}")
    if name not in _CATALOG:
        raise ParameterError(f"unknown catalog set {name!r}; known: {sorted(_CATALOG)}")
    try:
        return _CATALOG[name](n, **params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {name}: {exc}") from None


def catalog_names():
    return sorted(_CATALOG)


# --------------------------------------------------------------------------
# ray sets


def ray_defect(F, A, R=None, rungs=10, max_extra=40):
    """Strictness margin of A with respect to the ray set of F.

    For cones the ray set is F itself and this is ``defect(F, A)``. Otherwise
    it returns the largest eps with C (A - eps I) in F for every C on a
    geometric ladder, which is min_C -b(C A) / C with b the edge threshold.
    Positive values certify A in the interior of the ray set at that scale.

    By default the ladder starts where C |A| = 2^10 (1 + |b(0)|), far beyond
    the vertex scale, and is extended until the smallest eigenvalue above
    1e-12 |A| is scaled past the same mark (at most 2^max_extra further), so
    badly conditioned A are judged in every eigendirection.
    """
    if F.is_cone:
        return F.defect(A)
    A = np.asarray(A, dtype=float)
    S, batch = F._stack(A)
    tops = np.full(len(S), float(rungs))
    R_given = R
    if R is None:
        offset = abs(float(F.edge_threshold(np.zeros((F.n, F.n)))))
        lam = np.abs(symmat.eig_sorted(S))
        zero = lam[:, -1] == 0.0
        size = np.where(zero, 1.0, lam[:, -1])
        sig = np.where(lam > 1e-12 * size[:, None], lam, np.inf).min(axis=1)
        extra = np.clip(np.ceil(np.log2(size / np.minimum(sig, size))), 0, max_extra)
        tops = tops + extra
        R = 2.0 ** 10 * (1.0 + offset) / size
    R = np.broadcast_to(np.asarray(R, dtype=float), (len(S),))
    K = int(np.max(tops))
    Cs = R[None, :] * 2.0 ** (np.linspace(0.0, 1.0, K + 1)[:, None] * tops[None, :])
    stacked = (Cs[:, :, None, None] * S[None]).reshape(-1, F.n, F.n)
    b = np.asarray(F.edge_threshold(stacked)).reshape(K + 1, len(S))
    eps = np.min(-b / Cs, axis=0)
    if R_given is None:
        # a ray set is a closed cone other than Sym, so 0 lies on its boundary
        eps = np.where(zero, 0.0, eps)
    eps = eps.reshape(batch)
    return float(eps) if eps.ndim == 0 else eps


@dataclass
class FreeDimReport:
    free_dim: int
    witness_free_subspace: np.ndarray
    witness_strict_normal: np.ndarray
    samples_used: int

    def to_dict(self):
        return {
            "free_dim": self.free_dim,
            "witness_free_subspace": self.witness_free_subspace.tolist(),
            "witness_strict_normal": self.witness_strict_normal.tolist(),
            "samples_used": self.samples_used,
        }


def _complement(N, n):
    if N.shape[1] == 0:
        return np.eye(n)
    if N.shape[1] == n:
        return np.zeros((n, 0))
    Q, _ = np.linalg.qr(np.hstack([N, np.eye(n)]))
    # full QR of [N | I]: the trailing columns span N-perp
    Q = np.linalg.qr(np.hstack([N, np.eye(n)]), mode="complete")[0]
    return Q[:, N.shape[1]:n]


def free_dim(F, random_frames=1000, seed=0, tol=1e-9):
    """Free dimension n - min{dim N : P_N strictly inside the ray set}.

    Searches coordinate subspaces first, then ``random_frames`` Haar frames per
    dimension. The random part only certifies a lower bound.
    """
    n = F.n
    rng = np.random.default_rng(seed)
    used = 0
    for k in range(n + 1):
        frames = []
        combos = list(itertools.combinations(range(n), k))
        for combo in combos:
            frames.append(np.eye(n)[:, list(combo)])
        if 0 < k < n:
            frames.extend(symmat.random_orthonormal(rng, n, k) for _ in range(random_frames))
        projs = np.array([fr @ fr.T for fr in frames])
        used += len(frames)
        margins = np.atleast_1d(ray_defect(F, projs))
        hit = np.nonzero(margins > tol)[0]
        if len(hit):
            Nbasis = frames[int(hit[np.argmax(margins[hit])])]
            return FreeDimReport(n - k, _complement(Nbasis, n), Nbasis, used)
    raise DegenerateSetError("no strict subspace found; the identity is not interior")


def is_morse(F, W, ladder=30):
    """Whether some A in F is negative definite on span(W).

    Uses the witness family -P_W + t P_{W-perp}, which is exact for ray sets.
    """
    W = np.asarray(W, dtype=float).reshape(F.n, -1)
    PW = W @ W.T
    Pperp = np.eye(F.n) - PW
    ts = 2.0 ** np.arange(-4, ladder)
    cands = -PW[None] + ts[:, None, None] * Pperp[None]
    return bool(np.any(np.asarray(F.defect(cands)) >= 0))


# --------------------------------------------------------------------------
# sampling


def sample_sym(rng, n, size, outlier_prob=0.1, outlier_scale=3.0):
    """Symmetric matrices with uniform[-1,1] entries plus scale-3 outliers."""
    X = rng.uniform(-1.0, 1.0, (size, n, n))
    mask = rng.random((size, n, n)) < outlier_prob
    X = X + mask * outlier_scale * rng.uniform(-1.0, 1.0, (size, n, n))
    return 0.5 * (X + np.swapaxes(X, 1, 2))


def sample_psd(rng, n, size):
    r = rng.integers(1, n + 1, size)
    G = rng.standard_normal((size, n, n))
    G = G * (np.arange(n)[None, None, :] < r[:, None, None])
    scale = np.exp(rng.uniform(-2, 1, size))[:, None, None]
    return scale * (G @ np.swapaxes(G, 1, 2)) / n


def sample_members(F, rng, size, max_attempts=50):
    """Rejection-sample matrices with defect_F >= 0.

    Proposals are heavy-tailed symmetric matrices shifted along I by a random
    amount in [-2, 4].
    """
    found = []
    total = 0
    for _ in range(max_attempts):
        X = sample_sym(rng, F.n, size) + rng.uniform(-2, 4, size)[:, None, None] * np.eye(F.n)
        keep = X[np.asarray(F.defect(X)) >= 0]
        found.append(keep)
        total += len(keep)
        if total >= size:
            return np.concatenate(found)[:size]
    raise SamplingError(f"found only {total} of {size} members of {F.name}; set too thin to sample")


@dataclass
class DualityReport:
    pairs: int
    violations: int
    worst: float


def quadratic_duality_check(F, samples=1000, seed=0, tol=1e-8):
    """Check lambda_max(A + B) >= -tol for A in F and B in the dual of F."""
    rng = np.random.default_rng(seed)
    A = sample_members(F, rng, samples)
    B = sample_members(dual(F), rng, samples)
    lm = symmat.lambda_max(A + B)
    return DualityReport(samples, int(np.sum(lm < -tol)), float(lm.min()))


def ptilde_shift(F):
    """A lambda >= 0 with F + lambda I inside Ptilde (0 for ray sets)."""
    return max(0.0, float(F.dual().edge_threshold(np.zeros((F.n, F.n)))))


# --------------------------------------------------------------------------
# JSON specs


def from_spec(spec, n=None):
    """Build a set from {"name", "n", "params", "ops"}.

    ops: "dual" | {"op": "translate", "A0": M} | {"op": "conjugate", "g": M}
    | {"op": "intersect"|"union", "with": [spec, ...]}
    | {"op": "product_extend", "n": int, "W": [indices]}
    """
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict) or "name" not in spec:
        raise ParameterError("set spec must be an object with a 'name'")
    params = dict(spec.get("params", {}))
    dim = spec.get("n", params.pop("n", n))
    if dim is None:
        raise ParameterError("set spec needs a dimension 'n'")
    F = catalog(spec["name"], int(dim), **params)
    for op in spec.get("ops", []):
        if op == "dual":
            F = dual(F)
            continue
        if not isinstance(op, dict) or "op" not in op:
            raise ParameterError(f"bad op {op!r}")
        kind = op["op"]
        if kind == "dual":
            F = dual(F)
        elif kind == "translate":
            F = translate(F, op["A0"])
        elif kind == "conjugate":
            F = conjugate(F, op["g"])
        elif kind in ("intersect", "union"):
            others = [from_spec(s, n=F.n) for s in op["with"]]
            F = (intersect if kind == "intersect" else union)([F] + others)
        elif kind == "product_extend":
            F = product_extend(F, int(op["n"]), op.get("W"))
        else:
            raise ParameterError(f"unknown op {kind!r}")
    return F
