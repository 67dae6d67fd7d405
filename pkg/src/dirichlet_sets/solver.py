"""Gauss-Seidel solver for the F-Dirichlet problem on box grids.

The center value v of the discrete Hessian enters only through -(2v/h^2) I.
So with H0 the stencil evaluated with the center set to 0, the pointwise
equation defect(F, H0 - (2v/h^2) I) = 0 has the exact solution
v* = -(h^2/2) edge_threshold(F, H0).
"""

import itertools
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.ndimage import map_coordinates

from . import cones, expr, gridfield
from .errors import ParameterError, PreconditionError

INITS = ("affine_interp", "boundary_min", "harmonic", "noisy", "multilevel")
SWEEPS = ("lexicographic", "red_black")


@dataclass(frozen=True)
class SolveConfig:
    F: object
    lo: tuple
    hi: tuple
    h: float
    phi: str
    init: str = "affine_interp"
    sweep: str = "red_black"
    damping: float = 1.0
    max_iters: int = 200000
    tol_update: float = None
    tol_residual: float = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ParameterError("damping must lie in (0, 1]")
        if self.tol_update is not None and not self.tol_update > 0:
            raise ParameterError("tol_update must be positive")
        if self.init not in INITS:
            raise ParameterError(f"init must be one of {INITS}")
        if self.sweep not in SWEEPS:
            raise ParameterError(f"sweep must be one of {SWEEPS}")
        if len(self.lo) != len(self.hi):
            raise ParameterError("box corners differ in dimension")

    @property
    def n(self):
        return len(self.lo)

    def cone(self):
        F = self.F if isinstance(self.F, cones.ConeSet) else cones.from_spec(self.F, n=self.n)
        if F.n != self.n:
            raise ParameterError(f"set dimension {F.n} does not match box dimension {self.n}")
        return F


@dataclass
class SolveReport:
    iterations: int
    final_max_update: float
    residual_sup: float
    dual_residual: float
    wall_time: float
    success: bool
    message: str = ""
    tol_update: float = 0.0
    tol_residual: float = 0.0
    contraction: float = 0.0

    def to_dict(self, include_time=False):
        d = {
            "iterations": self.iterations,
            "final_max_update": self.final_max_update,
            "residual_sup": self.residual_sup,
            "dual_residual": self.dual_residual,
            "success": self.success,
            "message": self.message,
            "tol_update": self.tol_update,
            "tol_residual": self.tol_residual,
            "contraction": self.contraction,
        }
        if include_time:
            d["wall_time"] = self.wall_time
        return d


# --------------------------------------------------------------------------
# boundary data and initial guesses


def boundary_field(cfg):
    """Grid with phi on every lattice point (only the boundary layer is used)."""
    e = expr.parse(cfg.phi) if isinstance(cfg.phi, str) else cfg.phi
    if expr.dimension(e) > cfg.n:
        raise ParameterError(f"boundary data uses x{expr.dimension(e)} but the box has dimension {cfg.n}")
    lo, m = gridfield.box_grid(cfg.lo, cfg.hi, cfg.h)
    u = gridfield.GridField(lo, cfg.h, np.zeros(tuple(m)))
    X = u.coords()
    vals = np.zeros(tuple(m))
    mask = u.boundary_mask()
    vals[mask] = np.broadcast_to(expr.evaluate(e, X[mask]), (int(mask.sum()),))
    if not np.all(np.isfinite(vals[mask])):
        raise ParameterError("boundary data is not finite on the boundary layer")
    return u.with_values(vals)


def _face(vals, axes, choice):
    idx = [slice(None)] * vals.ndim
    for ax, c in zip(axes, choice):
        idx[ax] = slice(0, 1) if c == 0 else slice(-1, None)
    return vals[tuple(idx)]


def transfinite_interpolation(u):
    """Boolean sum of the axis-wise linear interpolants (Coons patch) of the
    boundary values; exact for data that is linear along any one axis."""
    vals = u.values
    n = u.n
    weights = [np.linspace(0.0, 1.0, m) for m in vals.shape]
    out = np.zeros_like(vals)
    for k in range(1, n + 1):
        sign = 1.0 if k % 2 else -1.0
        for axes in itertools.combinations(range(n), k):
            term = np.zeros_like(vals)
            for choice in itertools.product((0, 1), repeat=k):
                w = np.ones_like(vals)
                for ax, c in zip(axes, choice):
                    shape = [1] * n
                    shape[ax] = -1
                    wa = weights[ax] if c else 1.0 - weights[ax]
                    w = w * wa.reshape(shape)
                term += w * _face(vals, axes, choice)
            out += sign * term
    return out


def _harmonic_init(u):
    """Discrete Laplace solve (axis 3-point stencils) with the boundary values."""
    shape = u.shape
    inner = tuple(m - 2 for m in shape)
    N = int(np.prod(inner))
    L = None
    for ax in range(u.n):
        mats = [sp.identity(k, format="csr") for k in inner]
        mats[ax] = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(inner[ax], inner[ax]), format="csr")
        term = mats[0]
        for M in mats[1:]:
            term = sp.kron(term, M, format="csr")
        L = term if L is None else L + term
    # boundary contributions
    full = u.values.copy()
    full[(slice(1, -1),) * u.n] = 0.0
    rhs = np.zeros(inner)
    for ax in range(u.n):
        plus = [0] * u.n
        plus[ax] = 1
        minus = [0] * u.n
        minus[ax] = -1
        rhs -= gridfield._shift(full, plus) + gridfield._shift(full, minus)
    sol = spla.spsolve(L.tocsc(), rhs.reshape(N))
    out = u.values.copy()
    out[(slice(1, -1),) * u.n] = sol.reshape(inner)
    return out


def initial_guess(cfg, u_bdry, F):
    vals = u_bdry.values.copy()
    inner = (slice(1, -1),) * u_bdry.n
    bmask = u_bdry.boundary_mask()
    scale = max(1.0, float(np.max(np.abs(vals[bmask]))))
    if cfg.init == "affine_interp":
        vals[inner] = transfinite_interpolation(u_bdry)[inner]
    elif cfg.init == "boundary_min":
        vals[inner] = float(np.min(vals[bmask]))
    elif cfg.init == "harmonic":
        vals = _harmonic_init(u_bdry)
    elif cfg.init == "noisy":
        rng = np.random.default_rng(cfg.seed)
        base = transfinite_interpolation(u_bdry)[inner]
        vals[inner] = base + 0.1 * scale * rng.uniform(-1.0, 1.0, base.shape)
    elif cfg.init == "multilevel":
        vals = _multilevel_init(cfg, u_bdry, F)
    return u_bdry.with_values(vals)


def _multilevel_init(cfg, u_bdry, F):
    """Solve on the grid of spacing 2h (when it exists) and interpolate multilinearly."""
    m = np.array(u_bdry.shape)
    if np.any((m - 1) % 2) or np.any((m - 1) // 2 < 4):
        return initial_guess(replace(cfg, init="affine_interp"), u_bdry, F).values
    coarse_cfg = replace(cfg, h=2 * cfg.h, init="multilevel", tol_update=None, tol_residual=None)
    uc, _ = solve_dirichlet(coarse_cfg, F=F)
    idx = (u_bdry.coords() - uc.lo) / uc.h
    fine = map_coordinates(uc.values, np.moveaxis(idx, -1, 0), order=1, mode="nearest")
    vals = u_bdry.values.copy()
    inner = (slice(1, -1),) * u_bdry.n
    vals[inner] = fine[inner]
    return vals


# --------------------------------------------------------------------------
# sweeps


def _color_slices(shape, color):
    """Interior index slices with parity pattern ``color`` along each axis."""
    return tuple(slice(1 + c, m - 1, 2) for c, m in zip(color, shape))


def _hessians_at(vals, sl, h, n):
    """Stencil Hessians with the center value removed at points selected by sl."""
    h2 = h * h

    def shifted(off):
        return vals[tuple(slice(s.start + o, s.stop + o, s.step) for s, o in zip(sl, off))]

    k = shifted([0] * n).shape
    H = np.empty(k + (n, n))

    for i in range(n):
        e = [0] * n
        e[i] = 1
        p = shifted(e)
        e[i] = -1
        q = shifted(e)
        H[..., i, i] = (p + q) / h2
        for j in range(i + 1, n):
            def s(a, b):
                off = [0] * n
                off[i], off[j] = a, b
                return shifted(off)
            hij = (s(1, 1) + s(-1, -1) - s(1, -1) - s(-1, 1)) / (4.0 * h2)
            H[..., i, j] = hij
            H[..., j, i] = hij
    return H


def pointwise_update(F, vals, index, h):
    """Exact local solve at one lattice index: the value making defect(F, D^2 u) = 0."""
    n = vals.ndim
    sl = tuple(slice(i, i + 1) for i in index)
    H0 = _hessians_at(vals, sl, h, n).reshape(n, n)
    return -(h * h / 2.0) * float(F.edge_threshold(H0))


def _sweep_colors(F, vals, h, theta):
    n = vals.ndim
    biggest = 0.0
    for color in itertools.product((0, 1), repeat=n):
        sl = _color_slices(vals.shape, color)
        H0 = _hessians_at(vals, sl, h, n)
        kshape = H0.shape[:-2]
        if 0 in kshape:
            continue
        b = np.asarray(F.edge_threshold(H0.reshape(-1, n, n))).reshape(kshape)
        target = -(h * h / 2.0) * b
        old = vals[sl]
        new = (1.0 - theta) * old + theta * target
        biggest = max(biggest, float(np.max(np.abs(new - old))))
        vals[sl] = new
    return biggest


def _sweep_lex(F, vals, h, theta):
    biggest = 0.0
    for index in itertools.product(*(range(1, m - 1) for m in vals.shape)):
        target = pointwise_update(F, vals, index, h)
        old = vals[index]
        new = (1.0 - theta) * old + theta * target
        biggest = max(biggest, abs(new - old))
        vals[index] = new
    return biggest


def residuals(F, u):
    H = gridfield.hessians(u).reshape(-1, u.n, u.n)
    r = np.abs(np.asarray(F.defect(H)))
    rd = np.abs(np.asarray(cones.dual(F).defect(-H)))
    return float(np.max(r)), float(np.max(rd))


def solve_dirichlet(cfg, F=None):
    """Run Gauss-Seidel sweeps to a fixed point; returns (GridField, SolveReport).

    Stops when the largest update is at most tol_update and the a-posteriori
    error bound update * rho / (1 - rho), with rho the observed contraction
    of successive updates, is also at most tol_update.
    """
    t0 = time.perf_counter()
    F = F if F is not None else cfg.cone()
    u_bdry = boundary_field(cfg)
    bmask = u_bdry.boundary_mask()
    scale = max(1.0, float(np.max(np.abs(u_bdry.values[bmask]))))
    tol_update = cfg.tol_update if cfg.tol_update is not None else 1e-9 * scale
    tol_residual = cfg.tol_residual if cfg.tol_residual is not None else 1e-6 / cfg.h ** 2
    u = initial_guess(cfg, u_bdry, F)
    vals = u.values.copy()
    sweep = _sweep_colors if cfg.sweep == "red_black" else _sweep_lex
    prev = None
    rho = 0.0
    ratios = []
    converged = False
    it = 0
    upd = 0.0
    for it in range(1, cfg.max_iters + 1):
        upd = sweep(F, vals, cfg.h, cfg.damping)
        if prev is not None and prev > 0:
            ratios.append(min(upd / prev, 0.999999))
            rho = max(ratios[-5:])
        prev = upd
        if upd <= tol_update and (upd == 0.0 or (it > 2 and upd * rho / (1.0 - rho) <= tol_update)):
            converged = True
            break
    vals[bmask] = u_bdry.values[bmask]
    out = u_bdry.with_values(vals)
    res, dres = residuals(F, out)
    success = converged and res <= tol_residual
    if not converged:
        msg = f"max_iters={cfg.max_iters} reached with max update {upd:.3e}"
    elif not success:
        msg = f"residual {res:.3e} exceeds tol_residual {tol_residual:.3e}"
    else:
        msg = "converged"
    report = SolveReport(it, float(upd), res, dres, time.perf_counter() - t0, bool(success), msg,
                         float(tol_update), float(tol_residual), float(rho))
    return out, report


# --------------------------------------------------------------------------
# harnesses


@dataclass
class HarnessReport:
    name: str
    passed: bool
    worst: float
    bound: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "pass": self.passed, "worst": self.worst, "bound": self.bound,
                "details": self.details}


def check_inclusion(F1, F2, samples=10000, seed=0):
    """Largest defect_F2 deficit over sampled members of F1 (0 when none fails)."""
    rng = np.random.default_rng(seed)
    A = cones.sample_members(F1, rng, samples)
    d2 = np.asarray(F2.defect(A))
    return float(max(0.0, -np.min(d2)))


def nesting_check(F1, F2, cfg, samples=10000):
    """Solve for F1 and F2 (F1 inside F2) with the same data; check u1 <= u2."""
    deficit = check_inclusion(F1, F2, samples, cfg.seed)
    if deficit > 1e-12:
        raise PreconditionError(f"{F1.name} is not contained in {F2.name} on samples (deficit {deficit:g})")
    u1, r1 = solve_dirichlet(cfg, F=F1)
    u2, r2 = solve_dirichlet(cfg, F=F2)
    if not (r1.success and r2.success):
        raise PreconditionError(f"solve failed: {r1.message if not r1.success else r2.message}")
    bound = 2.0 * r1.tol_residual * cfg.h ** 2
    viol = float(np.max((u1.values - u2.values)[(slice(1, -1),) * u1.n]))
    return HarnessReport(f"nesting[{F1.name} <= {F2.name}]", viol <= bound, viol, bound,
                         {"iterations": [r1.iterations, r2.iterations]}), (u1, u2)


def duality_reflection_check(F, cfg, partner=None, partner_init="harmonic"):
    """Solve (F, phi) and (partner, -phi), partner defaulting to dual(F); check u + u' = 0.

    The second solve starts from a different initial guess so the two runs
    share no iterates; with identical starts the sign symmetry of the
    arithmetic can make them agree bit for bit.
    """
    partner = cones.dual(F) if partner is None else partner
    u1, r1 = solve_dirichlet(cfg, F=F)
    neg = replace(cfg, phi=f"-({cfg.phi})" if isinstance(cfg.phi, str) else expr.Neg(cfg.phi),
                  init=partner_init or cfg.init)
    u2, r2 = solve_dirichlet(neg, F=partner)
    if not (r1.success and r2.success):
        raise PreconditionError(f"solve failed: {r1.message if not r1.success else r2.message}")
    bound = 2.0 * r1.tol_update + 10.0 * r1.tol_residual * cfg.h ** 2
    worst = float(np.max(np.abs(u1.values + u2.values)))
    return HarnessReport(f"reflection[{F.name}, {partner.name}]", worst <= bound, worst, bound,
                         {"iterations": [r1.iterations, r2.iterations]})


def uniqueness_probe(F, cfg, k=5):
    """Solve from k distinct initial guesses; all pairs must agree within 5 tol_update."""
    plans = [("affine_interp", cfg.seed), ("boundary_min", cfg.seed), ("harmonic", cfg.seed),
             ("noisy", cfg.seed), ("multilevel", cfg.seed)]
    while len(plans) < k:
        plans.append(("noisy", cfg.seed + len(plans)))
    sols = []
    tol = None
    for init, seed in plans[:k]:
        u, r = solve_dirichlet(replace(cfg, init=init, seed=seed), F=F)
        if not r.success:
            return HarnessReport(f"uniqueness[{F.name}]", False, math.inf, 0.0,
                                 {"failed_init": init, "message": r.message})
        tol = r.tol_update
        sols.append((f"{init}:{seed}", u.values))
    worst, pair = 0.0, None
    for (a, ua), (b, ub) in itertools.combinations(sols, 2):
        d = float(np.max(np.abs(ua - ub)))
        if d > worst:
            worst, pair = d, (a, b)
    bound = 5.0 * tol
    return HarnessReport(f"uniqueness[{F.name}]", worst <= bound, worst, bound, {"worst_pair": pair})
