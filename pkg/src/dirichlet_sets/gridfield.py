"""Scalar fields on uniform box lattices and their discrete second-order analysis.

Values are stored in C order with x1 the slowest axis. The interior is every
lattice point at distance >= 1 from the boundary layer, where the 9-point
(in 2D; 3^n-point in general) Hessian stencil is available.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from . import cones, symmat
from .errors import DimensionError, ParameterError, PreconditionError


@dataclass(frozen=True, eq=False)
class GridField:
    lo: np.ndarray
    h: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float).reshape(-1))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != len(self.lo):
            raise DimensionError("values must have one axis per coordinate")
        if not self.h > 0:
            raise ParameterError("h must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("grid values must be finite")

    @property
    def n(self):
        return len(self.lo)

    @property
    def shape(self):
        return self.values.shape

    @property
    def hi(self):
        return self.lo + self.h * (np.array(self.shape) - 1)

    def axes(self):
        return [self.lo[i] + self.h * np.arange(m) for i, m in enumerate(self.shape)]

    def coords(self):
        """Lattice coordinates, shape values.shape + (n,)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def interior_coords(self):
        return self.coords()[(slice(1, -1),) * self.n]

    def boundary_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        for i in range(self.n):
            idx = [slice(None)] * self.n
            idx[i] = 0
            mask[tuple(idx)] = True
            idx[i] = -1
            mask[tuple(idx)] = True
        return mask

    def with_values(self, values):
        return GridField(self.lo, self.h, values)

    def __add__(self, other):
        if isinstance(other, GridField):
            _check_same(self, other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridField):
            _check_same(self, other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __neg__(self):
        return self.with_values(-self.values)

    def point(self, index):
        return self.lo + self.h * np.asarray(index, dtype=float)


def _check_same(u, v):
    if u.shape != v.shape or not np.allclose(u.lo, v.lo) or not math.isclose(u.h, v.h):
        raise DimensionError("fields live on different lattices")


def box_grid(lo, hi, h):
    """Lattice point counts for a box, checking that h divides the sides."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m = np.rint((hi - lo) / h).astype(int) + 1
    if np.any(np.abs(lo + (m - 1) * h - hi) > 1e-9 * (1 + np.abs(hi))):
        raise ParameterError("h must divide every side of the box")
    if np.any(m < 3):
        raise ParameterError("grid needs at least 3 points per axis")
    return lo, m


def from_function(f, lo, hi, h):
    """Sample f (a callable on arrays of shape (..., n)) on the lattice."""
    lo, m = box_grid(lo, hi, h)
    u = GridField(lo, h, np.zeros(tuple(m)))
    return u.with_values(np.broadcast_to(f(u.coords()), tuple(m)).astype(float))


def maximum(u, v):
    _check_same(u, v)
    return u.with_values(np.maximum(u.values, v.values))


def add_quadratic(u, B):
    """u + 1/2 x^T B x."""
    X = u.coords()
    return u.with_values(u.values + 0.5 * np.einsum("...i,ij,...j->...", X, np.asarray(B), X))


# --------------------------------------------------------------------------
# discrete Hessians


def _shift(vals, offsets):
    """View of vals shifted by the given offsets, restricted to the interior."""
    sl = []
    for o, m in zip(offsets, vals.shape):
        sl.append(slice(1 + o, m - 1 + o))
    return vals[tuple(sl)]


def hessians(u):
    """Discrete Hessians at every interior point, shape interior.shape + (n, n)."""
    v = u.values
    n = u.n
    if any(m < 3 for m in v.shape):
        raise ParameterError("grid too small for a Hessian stencil")
    h2 = u.h * u.h
    center = _shift(v, (0,) * n)
    H = np.empty(center.shape + (n, n))
    for i in range(n):
        e = [0] * n
        e[i] = 1
        plus = _shift(v, e)
        e[i] = -1
        minus = _shift(v, e)
        H[..., i, i] = (plus - 2.0 * center + minus) / h2
        for j in range(i + 1, n):
            def s(a, b):
                off = [0] * n
                off[i], off[j] = a, b
                return _shift(v, off)
            hij = (s(1, 1) + s(-1, -1) - s(1, -1) - s(-1, 1)) / (4.0 * h2)
            H[..., i, j] = hij
            H[..., j, i] = hij
    return H


def discrete_hessian(u, p):
    """Discrete Hessian at lattice index p (needs the full stencil around p)."""
    p = tuple(int(i) for i in p)
    if len(p) != u.n:
        raise DimensionError("index has the wrong length")
    if any(i < 1 or i > m - 2 for i, m in zip(p, u.shape)):
        raise PreconditionError(f"point {p} lacks a full stencil (boundary-adjacent)")
    n = u.n
    v = u.values
    h2 = u.h * u.h
    H = np.empty((n, n))
    c = v[p]

    def at(off):
        return v[tuple(a + b for a, b in zip(p, off))]

    for i in range(n):
        e = np.zeros(n, dtype=int)
        e[i] = 1
        H[i, i] = (at(e) - 2.0 * c + at(-e)) / h2
        for j in range(i + 1, n):
            f = np.zeros(n, dtype=int)
            f[j] = 1
            H[i, j] = H[j, i] = (at(e + f) + at(-e - f) - at(e - f) - at(-e + f)) / (4.0 * h2)
    return H


# --------------------------------------------------------------------------
# reports


@dataclass
class AnalysisReport:
    property: str
    worst_point: list
    worst_margin: float
    passed: bool
    tolerance: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"property": self.property, "worst_point": self.worst_point,
                "worst_margin": self.worst_margin, "pass": self.passed,
                "tolerance": self.tolerance, "details": self.details}


def _worst(u, margins, prop, tol, details=None):
    flat = int(np.argmin(margins))
    idx = np.unravel_index(flat, margins.shape)
    worst = float(margins[idx])
    point = u.point(np.array(idx) + 1).tolist()
    return AnalysisReport(prop, point, worst, bool(worst >= -tol), tol, details or {})


def _max_principle_probe(u, tol, probes, seed):
    """Random lattice sub-boxes K and random slopes g: with a the tightest affine
    function of slope g above u on the lattice boundary of K, measure
    max_K (u - a) / (1 + |a|)."""
    rng = np.random.default_rng(seed)
    X = u.coords()
    v = u.values
    scale = 1.0 + float(np.max(np.abs(v)))
    worst = -np.inf
    worst_pt = None
    for _ in range(probes):
        lo = []
        hi = []
        for m in u.shape:
            a = int(rng.integers(0, m - 2))
            b = int(rng.integers(a + 2, m))
            lo.append(a)
            hi.append(b)
        box = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
        sub = v[box]
        Xs = X[box]
        g = rng.standard_normal(u.n) * scale / max(1e-12, float(np.max(u.hi - u.lo)))
        w = sub - Xs @ g
        inner = np.zeros(sub.shape, dtype=bool)
        inner[(slice(1, -1),) * u.n] = True
        c = float(np.max(w[~inner]))
        excess = (w - c) / (1.0 + abs(c) + float(np.linalg.norm(g)))
        ex = np.where(inner, excess, -np.inf)
        k = np.unravel_index(int(np.argmax(ex)), ex.shape)
        if ex[k] > worst:
            worst = float(ex[k])
            worst_pt = Xs[k].tolist()
    return worst, worst_pt


def subaffine_report(u, tol=1e-7, probes=100, seed=0):
    """lambda_max of the discrete Hessian >= -tol at every interior point.

    A randomized maximum-principle probe over sub-boxes is run alongside; its
    outcome is reported in ``details`` and a disagreement with the pointwise
    test is flagged (the two are not equivalent on a lattice).
    """
    lm = symmat.lambda_max(hessians(u).reshape(-1, u.n, u.n)).reshape(tuple(m - 2 for m in u.shape))
    excess, pt = _max_principle_probe(u, tol, probes, seed)
    probe_pass = excess <= tol
    rep = _worst(u, lm, "subaffine", tol)
    rep.details = {"probe_worst_excess": excess, "probe_worst_point": pt, "probe_pass": bool(probe_pass),
                   "probes": probes, "disagreement": bool(probe_pass != rep.passed)}
    return rep


def type_report(u, F, tol=1e-7, dual_probes=5, seed=0):
    """defect(F, discrete Hessian) >= -tol at every interior point.

    ``details`` also records the dual probe: u + B must be subaffine for
    sampled quadratics B in the dual set.
    """
    H = hessians(u).reshape(-1, u.n, u.n)
    d = np.asarray(F.defect(H)).reshape(tuple(m - 2 for m in u.shape))
    rep = _worst(u, d, f"type[{F.name}]", tol)
    if dual_probes:
        rng = np.random.default_rng(seed)
        try:
            Bs = cones.sample_members(cones.dual(F), rng, dual_probes)
        except Exception:
            Bs = np.zeros((0, u.n, u.n))
        probe = [float(np.min(symmat.lambda_max(H + B))) for B in Bs]
        rep.details["dual_probe_min_lambda_max"] = min(probe) if probe else None
        rep.details["dual_probe_pass"] = bool(not probe or min(probe) >= -tol)
    return rep


# --------------------------------------------------------------------------
# sup-convolution and quasiconvexity


def sup_convolution(u, eps, N=None):
    """u^eps(x) = max over lattice y with |x - y| <= delta of u(y) - |x - y|^2 / eps,
    delta = sqrt(2 eps N), on the grid shrunk by floor(delta / h) layers."""
    if not eps > 0:
        raise ParameterError("eps must be positive")
    bound = float(np.max(np.abs(u.values)))
    N = bound if N is None else float(N)
    if bound > N * (1 + 1e-12):
        raise PreconditionError(f"|u| <= N fails: max |u| = {bound:g} > N = {N:g}")
    delta = math.sqrt(2.0 * eps * N)
    r = int(math.floor(delta / u.h + 1e-12))
    if any(m - 2 * r < 3 for m in u.shape):
        raise ParameterError("the delta-window leaves no interior grid")
    v = u.values
    out_shape = tuple(m - 2 * r for m in u.shape)
    best = np.full(out_shape, -np.inf)
    for z in itertools.product(range(-r, r + 1), repeat=u.n):
        d2 = u.h * u.h * sum(k * k for k in z)
        if d2 > delta * delta * (1 + 1e-12):
            continue
        sl = tuple(slice(r + k, r + k + m) for k, m in zip(z, out_shape))
        np.maximum(best, v[sl] - d2 / eps, out=best)
    return GridField(u.lo + r * u.h, u.h, best)


def values_on(u, v):
    """Values of u on the lattice of v, a sub-lattice with the same spacing."""
    if not math.isclose(u.h, v.h):
        raise DimensionError("fields have different spacings")
    off = np.rint((v.lo - u.lo) / u.h).astype(int)
    if np.any(off < 0) or np.any(off + np.array(v.shape) > np.array(u.shape)):
        raise DimensionError("second lattice is not inside the first")
    return u.values[tuple(slice(o, o + m) for o, m in zip(off, v.shape))]


def quasiconvex_modulus(u):
    """max(0, -min lambda_min) of the discrete Hessian over the interior."""
    lm = symmat.lambda_min(hessians(u).reshape(-1, u.n, u.n))
    return max(0.0, -float(np.min(lm)))


def _directions(n, count=64):
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        a = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    k = np.arange(count * 4) + 0.5
    z = 1 - 2 * k / len(k)
    phi = np.pi * (1 + math.sqrt(5)) * k
    s = np.sqrt(1 - z * z)
    D = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    if n == 3:
        return D
    G = np.random.default_rng(0).standard_normal((count * 8, n))
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def largest_eigenvalue_K(v, x, ladder=(4, 8, 16), kink_ratio=0.6):
    """Estimate of K(v, x) = limsup 2 eps^-2 sup_|y|=1 {v(x + eps y) - v(x) - eps grad v(x) . y}.

    Off-lattice values use cubic spline interpolation and grad v is a centered
    difference. Returns math.inf when one-sided differences at x jump by an
    amount that does not shrink with eps (v is not differentiable at x).
    """
    x = np.asarray(x, dtype=float)
    idx = (x - v.lo) / v.h
    reach = max(ladder) + 1
    if np.any(idx - reach < 0) or np.any(idx + reach > np.array(v.shape) - 1):
        raise ParameterError("the eps-ladder leaves the grid")
    vals = v.values

    def at(P):
        return map_coordinates(vals, ((P - v.lo) / v.h).T, order=3, mode="nearest")

    n = v.n
    f0 = float(at(x[None])[0])
    probes = list(np.eye(n))
    for i, j in itertools.combinations(range(n), 2):
        probes.append((np.eye(n)[i] + np.eye(n)[j]) / math.sqrt(2))
        probes.append((np.eye(n)[i] - np.eye(n)[j]) / math.sqrt(2))
    probes = np.array(probes)
    jumps = []
    for k in (ladder[0], ladder[-1]):
        e = k * v.h
        fp = at(x + e * probes)
        fm = at(x - e * probes)
        jumps.append(np.abs(fp + fm - 2 * f0) / e)
    small, large = jumps
    scale = 1e-9 * (1.0 + float(np.max(np.abs(vals))))
    if np.any((small >= kink_ratio * large) & (large > scale) & (small > scale)):
        return math.inf
    grad = np.array([(at(x[None] + v.h * np.eye(n)[i])[0] - at(x[None] - v.h * np.eye(n)[i])[0]) / (2 * v.h)
                     for i in range(n)])
    Y = _directions(n)
    best = -np.inf
    for k in ladder:
        e = k * v.h
        q = at(x + e * Y) - f0 - e * (Y @ grad)
        best = max(best, 2.0 * float(np.max(q)) / (e * e))
    return best


# --------------------------------------------------------------------------
# comparison


def comparison_check(u, v, F, tol=1e-7):
    """u of type F, -v of type dual(F), u <= v on the boundary layer: check u <= v + tol inside."""
    _check_same(u, v)
    ru = type_report(u, F, tol, dual_probes=0)
    rv = type_report(-v, cones.dual(F), tol, dual_probes=0)
    if not ru.passed:
        raise PreconditionError(f"u is not of type {F.name} (margin {ru.worst_margin:g})")
    if not rv.passed:
        raise PreconditionError(f"-v is not of the dual type (margin {rv.worst_margin:g})")
    bmask = u.boundary_mask()
    if np.any(u.values[bmask] > v.values[bmask]):
        raise PreconditionError("u <= v fails on the boundary layer")
    gap = (v.values - u.values)[(slice(1, -1),) * u.n]
    rep = _worst(u, gap + 0.0, "comparison", tol)
    rep.details = {"type_u_margin": ru.worst_margin, "type_minus_v_margin": rv.worst_margin}
    return rep
