"""Implicit domains, boundary convexity with respect to ray sets, and global
defining functions that are strict of a given type.

A domain is Omega = {rho < 0} for a C^2 field rho. Fields expose batched
``derivs(X) -> (value, gradient, hessian)`` for X of shape (k, n).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import cones, expr
from .errors import (
    NonConvergenceError,
    ParameterError,
    PreconditionError,
    VerificationError,
)

GRAD_MIN = 1e-6


# --------------------------------------------------------------------------
# fields


@dataclass(frozen=True)
class ExprField:
    """A scalar field given by a parsed expression."""

    expression: object
    n: int

    def derivs(self, X):
        v, g, H = expr.eval_with_derivatives(self.expression, np.asarray(X, dtype=float))
        return np.atleast_1d(v), np.atleast_2d(g), H.reshape(-1, self.n, self.n)

    def __str__(self):
        return expr.to_string(self.expression)


@dataclass(frozen=True)
class BoundaryRepair:
    """rho_b + C rho_b^2 where rho_b = smooth_max(rho, -a, a/4), a = 1/(4C).

    Near the boundary (rho > -3a/4) this is exactly rho + C rho^2. The clip
    keeps 1 + 2 C rho_b > 0, so the result stays a defining function deep
    inside, where plain rho + C rho^2 would turn positive.
    """

    base: object
    C: float

    @property
    def n(self):
        return self.base.n

    def derivs(self, X):
        v, g, H = self.base.derivs(X)
        a = 1.0 / (4.0 * self.C)
        m, d1, _, d11, _, _ = smooth_max_derivs(v, np.full_like(v, -a), a / 4.0)
        vb = m
        gb = d1[:, None] * g
        Hb = d1[:, None, None] * H + d11[:, None, None] * np.einsum("ki,kj->kij", g, g)
        s = 1.0 + 2.0 * self.C * vb
        val = vb + self.C * vb ** 2
        grad = s[:, None] * gb
        hess = s[:, None, None] * Hb + 2.0 * self.C * np.einsum("ki,kj->kij", gb, gb)
        return val, grad, hess


@dataclass(frozen=True)
class Quadratic:
    """-r + delta |x - c|^2."""

    center: np.ndarray
    r: float
    delta: float

    @property
    def n(self):
        return len(self.center)

    def derivs(self, X):
        X = np.atleast_2d(X)
        d = X - self.center
        val = -self.r + self.delta * np.sum(d * d, axis=1)
        grad = 2.0 * self.delta * d
        hess = np.broadcast_to(2.0 * self.delta * np.eye(self.n), (len(X), self.n, self.n)).copy()
        return val, grad, hess


@dataclass(frozen=True)
class SmoothMaxField:
    """smooth_max(f, g, eps) with exact chain-rule Hessian."""

    f: object
    g: object
    eps: float

    @property
    def n(self):
        return self.f.n

    def derivs(self, X):
        fv, fg, fH = self.f.derivs(X)
        gv, gg, gH = self.g.derivs(X)
        m, d1, d2, d11, _, _ = smooth_max_derivs(fv, gv, self.eps)
        diff = fg - gg
        grad = d1[:, None] * fg + d2[:, None] * gg
        hess = (d1[:, None, None] * fH + d2[:, None, None] * gH
                + d11[:, None, None] * np.einsum("ki,kj->kij", diff, diff))
        return m, grad, hess


# --------------------------------------------------------------------------
# smoothed maximum


def _kernel_cdf(u):
    return np.clip(0.5 + (15.0 / 16.0) * (u - 2.0 * u ** 3 / 3.0 + u ** 5 / 5.0), 0.0, 1.0)


def _phi(s, eps):
    """C^2 smoothing of max(s, 0) that agrees with it for |s| >= eps.

    phi' is the CDF of the biweight kernel (15/16)(1 - u^2)^2 on [-1, 1]
    rescaled to [-eps, eps], so phi' in [0, 1] and phi'' >= 0.
    """
    s = np.asarray(s, dtype=float)
    u = np.clip(s / eps, -1.0, 1.0)
    inside = np.abs(s) < eps
    poly = (15.0 / 16.0) * (u ** 2 / 2.0 - u ** 4 / 2.0 + u ** 6 / 6.0 - 1.0 / 6.0)
    val = np.where(inside, s * _kernel_cdf(u) - eps * poly, np.maximum(s, 0.0))
    d1 = np.where(inside, _kernel_cdf(u), (s > 0).astype(float))
    d2 = np.where(inside, (15.0 / 16.0) * (1.0 - u ** 2) ** 2 / eps, 0.0)
    return val, d1, d2


def smooth_max_derivs(t1, t2, eps):
    """M_eps(t1, t2) = t2 + phi(t1 - t2) and its partial derivatives.

    Returns (M, dM/dt1, dM/dt2, d2M/dt1^2, d2M/dt1dt2, d2M/dt2^2).
    """
    if not eps > 0:
        raise ParameterError("eps must be positive")
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    val, d1, d2 = _phi(t1 - t2, eps)
    # off the strip return max itself: t2 + (t1 - t2) can differ from t1 by rounding
    M = np.where(np.abs(t1 - t2) >= eps, np.maximum(t1, t2), t2 + val)
    return M, d1, 1.0 - d1, d2, -d2, d2


def smooth_max(t1, t2, eps):
    """C^2 maximum: equals max(t1, t2) when |t1 - t2| >= eps, partials sum to 1,
    and 0 <= M_eps - max <= 5 eps / 32."""
    m = smooth_max_derivs(t1, t2, eps)[0]
    return float(m) if np.ndim(m) == 0 else m


# --------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Domain:
    n: int
    field: object
    bbox_lo: np.ndarray
    bbox_hi: np.ndarray
    interior_point: np.ndarray
    name: str = "domain"

    def __post_init__(self):
        v = float(self.rho(self.interior_point[None])[0])
        if not v < 0:
            raise ParameterError(f"interior point has rho = {v:g}, expected < 0")
        if np.any(self.bbox_lo >= self.bbox_hi):
            raise ParameterError("bounding box is empty")

    def derivs(self, X):
        return self.field.derivs(np.atleast_2d(np.asarray(X, dtype=float)))

    def rho(self, X):
        return self.derivs(X)[0]

    def with_field(self, fld, name=None):
        return Domain(self.n, fld, self.bbox_lo, self.bbox_hi, self.interior_point, name or self.name)


def expr_domain(src, n, bbox_lo, bbox_hi, interior_point, name="expr"):
    """Domain {rho < 0} for an expression rho. abs/min/max are rejected: rho must be C^2."""
    e = expr.parse(src) if isinstance(src, str) else src
    if expr.has_nonsmooth(e):
        raise ParameterError("domain defining functions must be C^2; abs/min/max are not allowed")
    if expr.dimension(e) > n:
        raise ParameterError(f"expression uses x{expr.dimension(e)} but n = {n}")
    return Domain(n, ExprField(e, n), np.asarray(bbox_lo, dtype=float), np.asarray(bbox_hi, dtype=float),
                  np.asarray(interior_point, dtype=float), name)


def _fmt(v):
    return repr(float(v))


def ball(n, radius=1.0, center=None):
    """rho = 1/2 (|x - c|^2 - R^2)."""
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    terms = " + ".join(f"(x{i + 1} - {_fmt(c[i])})^2" for i in range(n))
    src = f"0.5*({terms} - {_fmt(radius * radius)})"
    pad = 2.0 * radius
    return expr_domain(src, n, c - pad, c + pad, c, "ball")


def ellipsoid(axes, center=None):
    """rho = sum ((x_i - c_i)/a_i)^2 - 1."""
    axes = np.asarray(axes, dtype=float)
    n = len(axes)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    src = " + ".join(f"(x{i + 1} - {_fmt(c[i])})^2/{_fmt(axes[i] ** 2)}" for i in range(n)) + " - 1"
    return expr_domain(src, n, c - 2.0 * axes, c + 2.0 * axes, c, "ellipsoid")


def domain_from_spec(spec):
    """{"kind": "ball"|"ellipsoid"|"expr", ...}."""
    kind = spec.get("kind")
    p = spec.get("params", {})
    if kind == "ball":
        return ball(int(p.get("n", spec.get("n", 2))), float(p.get("radius", 1.0)), p.get("center"))
    if kind == "ellipsoid":
        return ellipsoid(p["axes"], p.get("center"))
    if kind == "expr":
        n = int(spec["n"])
        return expr_domain(spec["expr"], n, spec["bbox"][0], spec["bbox"][1],
                           spec.get("interior_point", [0.0] * n))
    raise ParameterError(f"unknown domain kind {kind!r}")


# --------------------------------------------------------------------------
# boundary points


def boundary_project(d, x0, tol=1e-10, max_steps=100):
    """Newton steps x <- x - rho grad / |grad|^2 until |rho| <= tol."""
    X = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    if np.any(X < d.bbox_lo - 1e-12) or np.any(X > d.bbox_hi + 1e-12):
        raise PreconditionError("starting point lies outside the bounding box")
    for _ in range(max_steps + 1):
        v, g, _ = d.derivs(X)
        if np.all(np.abs(v) <= tol):
            return X[0] if np.ndim(x0) == 1 else X
        gg = np.sum(g * g, axis=1)
        if np.any(gg < GRAD_MIN ** 2):
            raise NonConvergenceError("vanishing gradient during boundary projection")
        X = X - (v / gg)[:, None] * g
    raise NonConvergenceError(f"boundary projection did not reach |rho| <= {tol} in {max_steps} steps")


def sample_directions(n, count, seed=0):
    """Evenly spaced angles (n=2), a Fibonacci sphere (n=3), Gaussian directions otherwise."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        a = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    if n == 3:
        k = np.arange(count) + 0.5
        z = 1.0 - 2.0 * k / count
        phi = np.pi * (1.0 + math.sqrt(5.0)) * k
        s = np.sqrt(1.0 - z * z)
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    G = np.random.default_rng(seed).standard_normal((count, n))
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def boundary_samples(d, count=512, seed=0, march=400):
    """Boundary points on rays from the interior witness (first exit along each ray)."""
    dirs = sample_directions(d.n, count, seed)
    c = d.interior_point
    with np.errstate(divide="ignore", invalid="ignore"):
        lim = np.where(dirs > 0, (d.bbox_hi - c) / dirs, np.where(dirs < 0, (d.bbox_lo - c) / dirs, np.inf))
    tmax = np.min(lim, axis=1)
    ts = np.linspace(0.0, 1.0, march + 1)[1:]
    lo = np.zeros(len(dirs))
    hi = np.full(len(dirs), np.nan)
    prev = np.zeros(len(dirs))
    for t in ts:
        T = t * tmax
        v = d.rho(c + T[:, None] * dirs)
        new = np.isnan(hi) & (v >= 0)
        hi[new] = T[new]
        lo[new] = prev[new]
        prev = np.where(np.isnan(hi), T, prev)
    if np.any(np.isnan(hi)):
        raise ParameterError("some rays never leave the domain inside the bounding box")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        v = d.rho(c + mid[:, None] * dirs)
        out = v >= 0
        hi = np.where(out, mid, hi)
        lo = np.where(out, lo, mid)
    X = c + (0.5 * (lo + hi))[:, None] * dirs
    return boundary_project(d, X)


def unit_normal(d, X):
    _, g, _ = d.derivs(X)
    norm = np.linalg.norm(g, axis=1)
    if np.any(norm < GRAD_MIN):
        raise ParameterError("gradient of rho vanishes at a boundary point")
    return g / norm[:, None]


def tangent_frame(nrm):
    """Orthonormal basis of nrm-perp: Gram-Schmidt on the coordinate axes, after
    dropping the axis most aligned with the normal."""
    n = len(nrm)
    drop = int(np.argmax(np.abs(nrm)))
    basis = []
    for i in range(n):
        if i == drop:
            continue
        v = np.eye(n)[i] - nrm[i] * nrm
        for b in basis:
            v = v - (b @ v) * b
        basis.append(v / np.linalg.norm(v))
    return np.array(basis).T.reshape(n, n - 1)


def second_fundamental_form(d, x):
    """II = Hess rho restricted to T, divided by |grad rho| (inward normal convention).

    Returns (II, T) with T the tangent frame (columns) used.
    """
    x = np.asarray(x, dtype=float)
    _, g, H = d.derivs(x[None])
    norm = np.linalg.norm(g[0])
    if norm < GRAD_MIN:
        raise ParameterError("gradient of rho vanishes; no tangent plane")
    T = tangent_frame(g[0] / norm)
    return T.T @ H[0] @ T / norm, T


# --------------------------------------------------------------------------
# strict convexity


@dataclass
class ConvexityReport:
    point: np.ndarray
    margin: float
    t_star: Optional[float]
    verdict: str
    t_range: tuple = field(default=(0.0, 0.0))

    def to_row(self):
        return {"point": [float(v) for v in self.point], "margin": self.margin,
                "t_star": self.t_star, "verdict": self.verdict,
                "t_min": self.t_range[0], "t_max": self.t_range[1]}


def _normalized_hessians(d, X):
    _, g, H = d.derivs(X)
    norm = np.linalg.norm(g, axis=1)
    if np.any(norm < GRAD_MIN):
        raise ParameterError("gradient of rho vanishes at a boundary point")
    nrm = g / norm[:, None]
    return H / norm[:, None, None], np.einsum("ki,kj->kij", nrm, nrm)


def strict_convexity(d, R, X, search=8, persist=8):
    """Vectorized strict convexity test at boundary points X.

    With H = Hess rho / |grad rho| and P_n the normal projection, t0 is the
    first rung of t_k = (1 + |H|) 2^k, k = 0..search, with
    ray_defect(R, H + t0 P_n) > 0; strictness also requires positivity on
    t0, 2 t0, ..., 2^persist t0, and the margin is the minimum there.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    H, Pn = _normalized_hessians(d, X)
    base = 1.0 + np.linalg.norm(H, ord=2, axis=(1, 2))
    ks = np.arange(search + persist + 1)
    ts = base[:, None] * 2.0 ** ks[None, :]
    stack = H[:, None] + ts[:, :, None, None] * Pn[:, None]
    vals = np.asarray(cones.ray_defect(R, stack.reshape(-1, d.n, d.n))).reshape(len(X), -1)
    reports = []
    for i in range(len(X)):
        t_range = (float(ts[i, 0]), float(ts[i, -1]))
        pos = np.nonzero(vals[i, : search + 1] > 0)[0]
        verdict, t_star, margin = "fail", None, float(np.max(vals[i]))
        if len(pos):
            k0 = int(pos[0])
            window = vals[i, k0:k0 + persist + 1]
            if np.all(window > 0):
                verdict, t_star, margin = "strict", float(ts[i, k0]), float(np.min(window))
            else:
                margin = float(np.min(window))
        reports.append(ConvexityReport(X[i], margin, t_star, verdict, t_range))
    return reports


def strict_convexity_at(d, R, x):
    return strict_convexity(d, R, np.asarray(x, dtype=float)[None])[0]


def tangential_witness(d, R, x, ladder=20):
    """Search B = H_TT (+) s P_n, with the tangent/normal cross terms removed,
    for B in Int of the ray set, over s = +-(1 + |H|) 2^k, |k| <= ladder (the
    scale range on which float certification is meaningful). Returns the s
    found or None."""
    H, Pn = _normalized_hessians(d, np.asarray(x, dtype=float)[None])
    H, Pn = H[0], Pn[0]
    Pt = np.eye(d.n) - Pn
    HT = Pt @ H @ Pt
    pos = (1.0 + np.linalg.norm(H, ord=2)) * 2.0 ** np.arange(-ladder, ladder + 1)
    ss = np.concatenate([-pos[::-1], [0.0], pos])
    vals = np.atleast_1d(cones.ray_defect(R, HT[None] + ss[:, None, None] * Pn[None]))
    ok = np.nonzero(vals > 0)[0]
    return float(ss[ok[0]]) if len(ok) else None


# --------------------------------------------------------------------------
# global defining functions


def interior_samples(d, per_axis=None):
    per_axis = per_axis or {1: 400, 2: 60, 3: 22}.get(d.n, 8)
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(d.bbox_lo, d.bbox_hi)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d.n)
    return X[d.rho(X) < 0]


def collar_samples(d, Xb, depths=(1e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1)):
    nrm = unit_normal(d, Xb)
    pts = [Xb - t * nrm for t in depths]
    X = np.concatenate(pts)
    return X[d.rho(X) < 0]


@dataclass
class DefiningResult:
    field: object
    report: dict


def _margins(R, fld, X):
    _, _, H = fld.derivs(X)
    return np.atleast_1d(cones.ray_defect(R, H))


def construct_global_defining(d, R, F=None, boundary_count=512, per_axis=None, seed=0):
    """Global defining function strict of the ray type R, following the classical
    construction: boundary repair, collar, quadratic bowl, smoothed maximum.

    Stages (each failure raises VerificationError naming the stage):
      boundary_repair  rho~ = rho + C rho^2 with C doubled until every boundary
                       sample is strict;
      collar           largest level s with every sample in {-rho~ < 2s} strict;
      blend            smooth_max(rho~, -r + delta|x - c|^2, r/4), r = s/2,
                       delta = r / (4 D^2);
      interior         the blend is strict at every boundary, collar and
                       interior sample;
      display          eps', R' with defect_F(C (Hess - eps' I)) >= 0 for
                       C in R' * {1, 2, ..., 2^8} at every sample (only if F).
    """
    Xb = boundary_samples(d, boundary_count, seed)
    Xc = collar_samples(d, Xb)
    Xi = interior_samples(d, per_axis)
    X_all = np.concatenate([Xb, Xc, Xi])
    report = {"samples": {"boundary": len(Xb), "collar": len(Xc), "interior": len(Xi)}}

    # (i) boundary repair
    chosen = None
    worst = None
    for k in range(-4, 41):
        C = 2.0 ** k
        rep = BoundaryRepair(d.field, C)
        m = _margins(R, rep, Xb)
        worst = (int(np.argmin(m)), float(np.min(m)))
        if worst[1] > 0:
            chosen = rep
            break
    if chosen is None:
        raise VerificationError("boundary_repair", "no C up to 2^40 makes every boundary sample strict",
                                point=Xb[worst[0]].tolist(), value=worst[1])
    report["C"] = chosen.C

    # (ii) collar
    vals, _, _ = chosen.derivs(X_all)
    level = -vals
    m = _margins(R, chosen, X_all)
    bad = m <= 0
    if np.any(bad):
        s = 0.5 * float(np.min(level[bad]))
    else:
        s = 0.5 * float(np.max(level))
    if not s > 0:
        i = int(np.argmin(np.where(bad, level, np.inf)))
        raise VerificationError("collar", "non-strict samples reach the boundary",
                                point=X_all[i].tolist(), value=float(m[i]))
    r = 0.5 * s
    D2 = float(np.max(np.sum((X_all - d.interior_point) ** 2, axis=1)))
    delta = r / (4.0 * max(D2, 1e-300))
    report.update({"collar_level": s, "r": r, "delta": delta})

    # (iii) blend
    eps = r / 4.0
    blended = SmoothMaxField(chosen, Quadratic(d.interior_point, r, delta), eps)
    report["eps"] = eps

    # (iv) interior verification
    vb, _, _ = blended.derivs(X_all)
    mb = _margins(R, blended, X_all)
    i = int(np.argmin(mb))
    report["min_ray_defect"] = float(mb[i])
    if not mb[i] > 0:
        raise VerificationError("interior", "blended field is not strict at a sample",
                                point=X_all[i].tolist(), value=float(mb[i]))
    nb = len(Xb)
    if np.max(np.abs(vb[:nb])) > 1e-9 or np.any(vb[nb:] >= 0):
        raise VerificationError("interior", "blended field is not a defining function on the samples")

    # (v) display
    if F is not None:
        _, _, H = blended.derivs(X_all)
        scale = 1.0 + float(np.max(np.linalg.norm(H, ord=2, axis=(1, 2))))
        found = None
        for j in range(0, 41):
            e1 = scale * 2.0 ** -j
            shifted = H - e1 * np.eye(d.n)
            # interior of the ray set first; then C(.) lies in F for all large C
            if not np.all(np.atleast_1d(cones.ray_defect(F, shifted)) > 0):
                continue
            for k in range(0, 31):
                R1 = 2.0 ** k
                Cs = R1 * 2.0 ** np.arange(9)
                M = (Cs[:, None, None, None] * shifted[None]).reshape(-1, d.n, d.n)
                if np.all(np.asarray(F.defect(M)) >= 0):
                    found = (e1, R1)
                    break
            if found:
                break
        if found is None:
            raise VerificationError("display", "no eps', R' found on the ladders")
        report["display"] = {"eps": found[0], "R": found[1], "C_range": [found[1], found[1] * 256]}
    return DefiningResult(blended, report)
