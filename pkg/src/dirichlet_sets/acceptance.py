"""The acceptance battery: ten numbered criteria shared by the CLI suite and the tests.

Each criterion returns a CriterionResult; ``run`` executes a selection and
prints one pass/fail line per criterion.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import cones, geometry, gridfield, solver, symmat
from .errors import VerificationError

PHI_SMOOTH = "sin(pi*x1)*cosh(x2) + x1*x2^2"


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self):
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}  ({self.seconds:.1f} s)"

    def to_dict(self):
        return {"number": self.number, "title": self.title, "pass": self.passed,
                "seconds": self.seconds, "details": self.details}


def cone_catalog(n):
    """Cone sets of the catalog in dimension n (complex ones only for even n)."""
    out = [cones.P(n), cones.Ptilde(n), cones.harm(n),
           cones.halfspace(np.diag(np.arange(1.0, n + 1)), 0.0), cones.garding_det(n)]
    out += [cones.branch_q(n, q) for q in range(n)]
    out += [cones.PG(n, p) for p in range(1, n)]
    out += [cones.Pq_G(n, p, q) for p in range(1, n) for q in range(0, n - p + 1)]
    out += [cones.sigma_k(n, k) for k in range(1, n)]
    if n % 2 == 0:
        m = n // 2
        out += [cones.LAG(n)]
        out += [cones.branch_q(n, q, "complex") for q in range(m)]
        out += [cones.PG(n, p, "complex") for p in range(1, m + 1)]
        out += [cones.ISO(n, p) for p in sorted({1, m})]
    if n % 4 == 0:
        out += [cones.branch_q(n, q, "quaternionic") for q in range(n // 4)]
    if n == 2:
        out += [cones.SL(2, 0.0)]
    return out


def _timed(number, title, fn):
    t0 = time.perf_counter()
    passed, details = fn()
    return CriterionResult(number, title, bool(passed), time.perf_counter() - t0, details)


# --------------------------------------------------------------------------
# 1-5: solver


def criterion_1():
    """u_xx = 0 on [0,1]^2: slice-wise linear interpolation of the boundary data."""
    F = cones.product_extend(cones.halfspace([[1.0]], 0.0), 2)
    exact = lambda X: (1 - X[..., 0]) * X[..., 1] ** 2 + X[..., 0] * (1 + X[..., 1])

    def run():
        out = {}
        ok = True
        for init in ("affine_interp", "boundary_min"):
            cfg = solver.SolveConfig(F=F, lo=(0, 0), hi=(1, 1), h=1 / 32, phi="(1-x1)*x2^2 + x1*(1+x2)", init=init)
            t0 = time.perf_counter()
            u, rep = solver.solve_dirichlet(cfg, F=F)
            secs = time.perf_counter() - t0
            err = float(np.max(np.abs(u.values - exact(u.coords()))))
            out[init] = {"error": err, "iterations": rep.iterations, "seconds": secs}
            ok &= rep.success and err <= 1e-7 and secs < 10
        return ok, out

    return _timed(1, "slice-linear exactness, error <= 1e-7, < 10 s", run)


def criterion_2():
    F = cones.harm(2)

    def run():
        out = {}
        ok = True
        for init in ("affine_interp", "boundary_min"):
            cfg = solver.SolveConfig(F=F, lo=(-1, -1), hi=(1, 1), h=1 / 32, phi="x1^2 - x2^2", init=init)
            t0 = time.perf_counter()
            u, rep = solver.solve_dirichlet(cfg, F=F)
            secs = time.perf_counter() - t0
            X = u.coords()
            err = float(np.max(np.abs(u.values - (X[..., 0] ** 2 - X[..., 1] ** 2))))
            out[init] = {"error": err, "iterations": rep.iterations, "seconds": secs}
            ok &= rep.success and err <= 1e-6 and secs < 30
        return ok, out

    return _timed(2, "harmonic branch x^2 - y^2, error <= 1e-6, < 30 s", run)


def criterion_3():
    cfg = solver.SolveConfig(F=None, lo=(-1, -1), hi=(1, 1), h=1 / 16, phi="sin(pi*x1)*cosh(x2)")
    pairs = [(cones.branch_q(2, 0), cones.branch_q(2, 1)),
             (cones.P(2), cones.harm(2)), (cones.harm(2), cones.Ptilde(2))]

    def run():
        t0 = time.perf_counter()
        out = {}
        worst = -math.inf
        for F1, F2 in pairs:
            rep, (u1, u2) = solver.nesting_check(F1, F2, cfg)
            out[rep.name] = {"max(u1 - u2)": rep.worst, "gap": float(np.max(u2.values - u1.values))}
            worst = max(worst, rep.worst)
        secs = time.perf_counter() - t0
        out["seconds"] = secs
        return worst <= 1e-6 and secs < 120, out

    return _timed(3, "branch nesting P0 <= P1 and P <= harm <= Ptilde, violations <= 1e-6, < 2 min", run)


def criterion_4():
    cfg = solver.SolveConfig(F=None, lo=(0, 0), hi=(1, 1), h=1 / 32, phi=PHI_SMOOTH)
    pairs = [(cones.P(2), cones.Ptilde(2)), (cones.SL(2, 0.6), cones.SL(2, -0.6)),
             (cones.branch_q(2, 0), cones.branch_q(2, 1))]

    def run():
        out = {}
        ok = True
        for F, G in pairs:
            rep = solver.duality_reflection_check(F, cfg, partner=G)
            out[rep.name] = rep.worst
            ok &= rep.worst <= 1e-5
        return ok, out

    return _timed(4, "duality reflection sup|u_F,phi + u_dual,-phi| <= 1e-5", run)


def criterion_5():
    def run():
        out = {}
        ok = True
        for lo, hi, phi in [((-1, -1), (1, 1), "x1^2 - x2^2"), ((0, 0), (1, 1), PHI_SMOOTH)]:
            cfg = solver.SolveConfig(F=None, lo=lo, hi=hi, h=1 / 32, phi=phi)
            u1, r1 = solver.solve_dirichlet(cfg, F=cones.SL(2, 0.0))
            u2, r2 = solver.solve_dirichlet(cfg, F=cones.harm(2))
            d = float(np.max(np.abs(u1.values - u2.values)))
            out[phi] = d
            ok &= r1.success and r2.success and d <= 1e-5
        return ok, out

    return _timed(5, "SL(0) equals harm in the plane, difference <= 1e-5", run)


# --------------------------------------------------------------------------
# 6: cone algebra


def cone_battery(n=4, samples=10000, seed=0):
    """Property battery on the catalog; returns {identity: worst value} and pass flags."""
    rng = np.random.default_rng(seed)
    A = cones.sample_sym(rng, n, samples)
    Pm = cones.sample_psd(rng, n, samples)
    sets = cone_catalog(n)
    res = {}

    # involution, bit for bit
    inv = 0.0
    for F in sets:
        inv = max(inv, float(np.max(np.abs(cones.dual(cones.dual(F)).defect(A) - F.defect(A)))))
    res["involution"] = (inv, inv == 0.0)

    # positivity F + P in F, as defect monotonicity
    pos = math.inf
    for F in sets + [cones.SL(n, 0.6), cones.SL(n, -1.0)]:
        pos = min(pos, float(np.min(F.defect(A + Pm) - F.defect(A))))
    res["positivity"] = (pos, pos >= -1e-9)

    # branch duality P~_q = P_{n-q-1}, over R and C
    br = 0.0
    for field_, m in [("real", n)] + ([("complex", n // 2)] if n % 2 == 0 else []):
        for q in range(m):
            d1 = cones.dual(cones.branch_q(n, q, field_)).defect(A)
            d2 = cones.branch_q(n, m - q - 1, field_).defect(A)
            br = max(br, float(np.max(np.abs(d1 - d2))))
    res["branch_duality"] = (br, br <= 1e-9)

    # next tier P~_q(G(p)) = P_{n-q-p}(G(p))
    nt = 0.0
    for p in range(1, n + 1):
        for q in range(0, n - p + 1):
            d1 = cones.dual(cones.Pq_G(n, p, q)).defect(A)
            d2 = cones.Pq_G(n, p, n - q - p).defect(A)
            nt = max(nt, float(np.max(np.abs(d1 - d2))))
    res["next_tier_duality"] = (nt, nt <= 1e-9)

    # SL duals
    sl = 0.0
    for c in (0.0, 0.6, -2.0):
        sl = max(sl, float(np.max(np.abs(cones.dual(cones.SL(n, c)).defect(A) - cones.SL(n, -c).defect(A)))))
    res["SL_duality"] = (sl, sl <= 1e-10)

    # Garding cone of det: largest root of det(tI + A) is -lambda_1
    lam1 = np.linalg.eigvalsh(A)[:, 0]
    gd = float(np.max(np.abs(cones.garding_det(n).defect(A) - lam1)))
    generic = cones.garding(n, np.linalg.det, n)
    sub = A[: min(samples, 2000)]
    gg = float(np.max(np.abs(generic.defect(sub) - lam1[: len(sub)])))
    res["garding_det"] = (max(gd, gg), max(gd, gg) <= 1e-8)

    # half-space self-duality, bit for bit
    hs = 0.0
    for _ in range(5):
        X = rng.standard_normal((n, n))
        H = cones.halfspace(X @ X.T, 0.0)
        hs = max(hs, float(np.max(np.abs(cones.dual(H).defect(A) - H.defect(A)))))
    res["halfspace_self_dual"] = (hs, hs == 0.0)

    # quadratic duality probe lambda_max(A + B) >= -1e-8 for A in F, B in dual F
    worst = math.inf
    violations = 0
    for F in sets:
        rep = cones.quadratic_duality_check(F, samples=samples, seed=seed)
        violations += rep.violations
        worst = min(worst, rep.worst)
    res["quadratic_duality"] = (worst, violations == 0 and worst >= -1e-8)
    return res, [F.name for F in sets]


def criterion_6():
    def run():
        t0 = time.perf_counter()
        res, names = cone_battery(4, 10000, seed=0)
        secs = time.perf_counter() - t0
        details = {k: {"value": v, "pass": ok} for k, (v, ok) in res.items()}
        details["sets"] = names
        details["seconds"] = secs
        return all(ok for _, ok in res.values()) and secs < 60, details

    return _timed(6, "cone-algebra battery on 1e4 matrices per identity, n = 4, < 1 min", run)


# --------------------------------------------------------------------------
# 7, 10: grid analysis


def random_typed_field(F, rng, lo=(-1.0, -1.0), hi=(1.0, 1.0), h=1 / 32, relus=3, curvature=4.0,
                       diagonal=False):
    """A field of type F: 1/2 x^T A x plus nonnegative multiples of axis-aligned
    ramps max(0, +-(x_i - s)).

    A = B + (b + m) I with B random of size ``curvature``, b its edge threshold
    and m a margin between 5% and 30% of ``curvature``, so A lies inside F
    but close to its boundary, with eigenvalues of either sign. With
    ``diagonal`` B is diagonal and the field is a sum of one-variable terms.
    """
    B = cones.sample_sym(rng, F.n, 1)[0]
    if diagonal:
        B = np.diag(np.diag(B))
    B = curvature * B / max(1e-12, float(np.max(np.abs(B))))
    A = B + (float(F.edge_threshold(B)) + curvature * float(rng.uniform(0.05, 0.3))) * np.eye(F.n)
    base = gridfield.from_function(lambda X: np.zeros(X.shape[:-1]), lo, hi, h)
    X = base.coords()
    vals = 0.5 * np.einsum("...i,ij,...j->...", X, A, X)
    for _ in range(relus):
        i = int(rng.integers(0, len(lo)))
        s = float(rng.uniform(lo[i], hi[i]))
        sign = float(rng.choice([-1.0, 1.0]))
        vals = vals + float(rng.uniform(0.0, 0.5)) * np.maximum(0.0, sign * (X[..., i] - s))
    return base.with_values(vals), A


def supconv_suite(sets, fields_per_set, eps_list=(0.01, 0.02), curvature=10.0, seed=0, tol=1e-5):
    rng = np.random.default_rng(seed)
    rows = []
    for F in sets:
        for _ in range(fields_per_set):
            # separable fields: the lattice maximization splits by coordinate,
            # so the maximizer jumps only across axis-aligned lines
            u, A = random_typed_field(F, rng, curvature=curvature, diagonal=True)
            N = float(np.max(np.abs(u.values)))
            convs = [gridfield.sup_convolution(u, e, N) for e in eps_list]
            row = {"set": F.name, "lambda_min(A)": float(np.linalg.eigvalsh(A)[0])}
            # u <= u^eps and eps1 < eps2 => u^eps1 <= u^eps2, compared on the smaller grid
            mono = float(np.max(gridfield.values_on(u, convs[0]) - convs[0].values))
            for a, b in zip(convs, convs[1:]):
                mono = max(mono, float(np.max(gridfield.values_on(a, b) - b.values)))
            row["monotone_excess"] = mono
            # share of lattice points where the maximizer left x (the operation is not the identity)
            row["moved_fraction"] = float(np.mean(convs[0].values > gridfield.values_on(u, convs[0]) + 1e-12))
            row["modulus_ratio"] = max(
                gridfield.quasiconvex_modulus(c) / (1.0 / e + 10 * u.h) for c, e in zip(convs, eps_list))
            row["type_worst"] = min(gridfield.type_report(c, F, tol=tol, dual_probes=0).worst_margin
                                    for c in convs)
            row["pass"] = bool(mono <= 0.0 and row["modulus_ratio"] <= 1.0 and row["type_worst"] >= -tol)
            rows.append(row)
    return rows


def criterion_7():
    sets = [cones.P(2), cones.harm(2), cones.Ptilde(2), cones.SL(2, 0.6), cones.SL(2, -0.6),
            cones.halfspace(np.diag([1.0, 2.0])), cones.product_extend(cones.halfspace([[1.0]]), 2),
            cones.LAG(2), cones.garding_det(2), cones.translate(cones.P(2), -np.eye(2))]

    def run():
        rows = supconv_suite(sets, 1, seed=7)
        return all(r["pass"] for r in rows) and len(rows) == 10, {"fields": rows}

    return _timed(7, "sup-convolution monotone, modulus <= 1/eps + 10h, type kept at 1e-5 (10 fields)", run)


def subaffine_pairs(sets, total=50, seed=0, tol=1e-7):
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(total):
        F = sets[k % len(sets)]
        u, _ = random_typed_field(F, rng)
        v, _ = random_typed_field(cones.dual(F), rng)
        rep = gridfield.subaffine_report(u + v, tol=tol, seed=seed + k)
        rows.append({"set": F.name, "pass": rep.passed, "worst_lambda_max": rep.worst_margin,
                     "probe_pass": rep.details["probe_pass"]})
    return rows


def criterion_10():
    sets = [cones.P(2), cones.harm(2), cones.SL(2, 0.6), cones.halfspace(np.diag([1.0, 3.0]))]

    def run():
        rows = subaffine_pairs(sets, 50, seed=10)
        failures = sum(not r["pass"] for r in rows)
        probe_failures = sum(not r["probe_pass"] for r in rows)
        return failures == 0 and probe_failures == 0, {
            "pairs": len(rows), "violations": failures, "probe_violations": probe_failures,
            "worst_lambda_max": min(r["worst_lambda_max"] for r in rows)}

    return _timed(10, "u type F + v type dual F is subaffine at 1e-7 (50 pairs, 4 sets)", run)


# --------------------------------------------------------------------------
# 8: free dimension


def criterion_8():
    cases = [("PG1 complex on R^4", cones.PG(4, 1, "complex"), 2), ("LAG on C^2", cones.LAG(4), 2)]
    for n in (2, 3, 4):
        cases += [(f"P({n})", cones.P(n), 0), (f"Ptilde({n})", cones.Ptilde(n), n - 1)]

    def run():
        t0 = time.perf_counter()
        out = {}
        ok = True
        for label, F, want in cases:
            got = cones.free_dim(F, seed=0).free_dim
            out[label] = {"free_dim": got, "expected": want}
            ok &= got == want
        secs = time.perf_counter() - t0
        out["seconds"] = secs
        return ok and secs < 60, out

    return _timed(8, "free dimensions PG1(C)=2, LAG=2, P=0, Ptilde=n-1, < 1 min", run)


# --------------------------------------------------------------------------
# 9: boundary convexity


DUMBBELL = "x2^2 + (x1^2 - 1)^2 - 1.2"
CORRUPTED_ELLIPSE = "(x1^2/2.25 + x2^2 - 1)*(2 + x1)"


def dumbbell_domain():
    return geometry.expr_domain(DUMBBELL, 2, [-1.6, -1.3], [1.6, 1.3], [0.0, 0.0], name="dumbbell")


def corrupted_ellipse_domain():
    return geometry.expr_domain(CORRUPTED_ELLIPSE, 2, [-1.8, -1.3], [1.8, 1.3], [0.0, 0.0],
                                name="corrupted ellipse")


def criterion_9():
    def run():
        out = {}
        ok = True
        worst = math.inf
        count = 0
        for n in (2, 3, 4):
            d = geometry.ball(n)
            Xb = geometry.boundary_samples(d, 512, seed=n)
            for F in cone_catalog(n):
                reps = geometry.strict_convexity(d, F, Xb)
                m = min(r.margin for r in reps)
                strict = all(r.verdict == "strict" and r.margin > 0 for r in reps)
                worst = min(worst, m)
                count += 1
                if not strict:
                    out.setdefault("ball_failures", []).append(f"{F.name} (n={n})")
                ok &= strict
        out["ball"] = {"sets": count, "min_margin": worst}

        # dumbbell against u_11 >= 0: the waist points (0, +-sqrt(0.2)) fail, nothing else
        d = dumbbell_domain()
        R = cones.product_extend(cones.halfspace([[1.0]]), 2)
        Xb = geometry.boundary_samples(d, 512, seed=0)
        reps = geometry.strict_convexity(d, R, Xb)
        bad = np.array([r.point for r in reps if r.verdict != "strict"]).reshape(-1, 2)
        waist = np.array([[0.0, math.sqrt(0.2)], [0.0, -math.sqrt(0.2)]])
        at_waist = [geometry.strict_convexity_at(d, R, geometry.boundary_project(d, w)).verdict for w in waist]
        dist = np.min(np.linalg.norm(bad[:, None] - waist[None], axis=2), axis=1) if len(bad) else np.zeros(0)
        near = [int(np.sum(np.argmin(np.linalg.norm(bad[:, None] - waist[None], axis=2), axis=1) == i))
                for i in range(2)] if len(bad) else [0, 0]
        dumbbell_ok = (all(v == "fail" for v in at_waist) and len(bad) > 0
                       and float(np.max(dist)) < 0.3 and min(near) > 0)
        try:
            geometry.construct_global_defining(d, R)
            stage = None
        except VerificationError as exc:
            stage = exc.stage
        out["dumbbell"] = {"failing_samples": len(bad), "per_waist_point": near,
                           "max_distance_to_waist": float(np.max(dist)) if len(bad) else None,
                           "waist_verdicts": at_waist, "construction_stops_at": stage}
        ok &= dumbbell_ok and stage == "boundary_repair"

        # corrupted ellipse: the construction ends strict everywhere
        res = geometry.construct_global_defining(corrupted_ellipse_domain(), cones.P(2), F=cones.P(2))
        out["corrupted_ellipse"] = {"C": res.report["C"], "min_ray_defect": res.report["min_ray_defect"],
                                    "display": res.report.get("display")}
        ok &= res.report["min_ray_defect"] > 0
        return ok, out

    return _timed(9, "boundary convexity: ball strict, dumbbell fails at the waist, construction strict", run)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10}


def run(numbers=None, echo=print):
    results = []
    for k in sorted(numbers or CRITERIA):
        r = CRITERIA[k]()
        if echo:
            echo(r.line())
        results.append(r)
    return results
