"""Command line interface: ``dirichlet-sets <subcommand> ...``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage or
configuration errors. The SEED environment variable overrides every seed.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import acceptance, cones, config, geometry, gridfield, io, solver, symmat
from .errors import ConfigError, DirichletError, VerificationError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _seed(args_seed):
    env = os.environ.get("SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SEED must be an integer, got {env!r}", "") from None
    return args_seed


def _emit(data, out=None):
    text = json.dumps(data, indent=2, sort_keys=True, default=io._default)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _set_arg(text, n=None):
    """A set given as a catalog name, inline JSON, or a path to a JSON file."""
    if text.lstrip().startswith("{"):
        spec = config.loads(text)
    elif Path(text).is_file():
        spec = config.load_json(text)
    else:
        spec = {"name": text}
    return config.set_from_json(spec, n=n)


# --------------------------------------------------------------------------
# subcommands


def cmd_solve(args):
    data = config.load_json(args.config)
    cfg = config.solve_config_from_json(data, seed=_seed(None))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    u, rep = solver.solve_dirichlet(cfg)
    grid = io.write_grid_csv(u, out / "solution.csv")
    side = io.write_sidecar(u, out / "solution.json",
                            provenance={"config_sha256": io.config_hash(data), "seed": cfg.seed})
    report = io.write_json(rep.to_dict(), out / "report.json")
    io.write_manifest(out / "manifest.json", data, cfg.seed, [grid, side, report], wall_time=rep.wall_time)
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return EXIT_PASS if rep.success else EXIT_FAIL


def cmd_verify_cones(args):
    seed = _seed(args.seed)
    rng = np.random.default_rng(seed)
    sets = [_set_arg(args.set, n=args.n)] if args.set else acceptance.cone_catalog(args.n)
    rows = []
    ok = True
    A = cones.sample_sym(rng, args.n, args.samples)
    Pm = cones.sample_psd(rng, args.n, args.samples)
    for F in sets:
        if F.n != args.n:
            A_, P_ = cones.sample_sym(rng, F.n, args.samples), cones.sample_psd(rng, F.n, args.samples)
        else:
            A_, P_ = A, Pm
        d = F.defect(A_)
        row = {"set": F.name, "n": F.n}
        row["involution"] = float(np.max(np.abs(cones.dual(cones.dual(F)).defect(A_) - d)))
        row["positivity"] = float(np.min(F.defect(A_ + P_) - d))
        b = F.edge_threshold(A_)
        row["edge_threshold"] = float(np.max(np.abs(F.defect(A_ + b[:, None, None] * np.eye(F.n)))))
        d0 = float(F.defect(np.zeros((F.n, F.n))))
        row["defect_at_0"] = d0
        row["max_principle_flag"] = bool(F.satisfies_max_principle)
        dual_rep = cones.quadratic_duality_check(F, samples=min(args.samples, 2000), seed=seed)
        row["quadratic_duality_violations"] = dual_rep.violations
        # F + lambda I inside Ptilde, on sampled members
        lam = cones.ptilde_shift(F)
        members = cones.sample_members(F, rng, min(args.samples, 2000))
        row["ptilde_shift"] = lam
        row["ptilde_shift_margin"] = float(np.min(symmat.lambda_max(members + lam * np.eye(F.n))))
        checks = [row["involution"] == 0.0, row["positivity"] >= -1e-9, row["edge_threshold"] <= 1e-9,
                  (d0 <= 1e-12) == row["max_principle_flag"], dual_rep.violations == 0,
                  lam >= 0, row["ptilde_shift_margin"] >= -1e-9]
        if F.is_cone:
            checks.append(abs(d0) <= 1e-12)
        row["pass"] = all(checks)
        ok &= row["pass"]
        rows.append(row)
    if not args.set:
        res, _ = acceptance.cone_battery(args.n, args.samples, seed)
        identities = {k: {"value": v, "pass": p} for k, (v, p) in res.items()}
        ok &= all(p for _, p in res.values())
    else:
        identities = {}
    _emit({"seed": seed, "samples": args.samples, "sets": rows, "identities": identities, "pass": ok}, args.out)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_check_boundary(args):
    d = config.domain_from_json(config.load_json(args.domain))
    R = _set_arg(args.set, n=d.n)
    Xb = geometry.boundary_samples(d, args.samples, seed=_seed(args.seed))
    reps = geometry.strict_convexity(d, R, Xb)
    out = Path(args.out)
    with open(out, "w") as fh:
        fh.write(",".join([f"x{i + 1}" for i in range(d.n)] + ["margin", "t_star", "verdict", "t_min", "t_max"]) + "\n")
        for r in reps:
            row = r.to_row()
            vals = [io._fmt(v) for v in row["point"]] + [io._fmt(row["margin"]),
                    "" if row["t_star"] is None else io._fmt(row["t_star"]), row["verdict"],
                    io._fmt(row["t_min"]), io._fmt(row["t_max"])]
            fh.write(",".join(vals) + "\n")
    failing = [r.to_row() for r in reps if r.verdict != "strict"]
    print(json.dumps({"samples": len(reps), "failing": len(failing), "table": str(out),
                      "first_failures": failing[:10]}, indent=2, default=io._default))
    return EXIT_PASS if not failing else EXIT_FAIL


def cmd_build_defining(args):
    d = config.domain_from_json(config.load_json(args.domain))
    R = _set_arg(args.set, n=d.n)
    F = _set_arg(args.display, n=d.n) if args.display else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        res = geometry.construct_global_defining(d, R, F=F, seed=_seed(args.seed))
    except VerificationError as exc:
        io.write_json({"pass": False, "stage": exc.stage, "message": str(exc), "point": exc.point,
                       "value": exc.value}, out / "verification.json")
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    lo, hi = d.bbox_lo, d.bbox_hi
    h = float(np.max(hi - lo)) / args.resolution
    m = np.ceil((hi - lo) / h).astype(int)
    g = gridfield.GridField(lo, h, np.zeros(tuple(m + 1)))
    X = g.coords()
    vals = np.asarray(res.field.derivs(X.reshape(-1, d.n))[0]).reshape(g.shape)
    grid = io.write_grid_csv(g.with_values(vals), out / "defining.csv")
    io.write_json({"pass": True, **res.report}, out / "verification.json")
    print(json.dumps({"pass": True, **res.report, "grid": str(grid)}, indent=2, default=io._default))
    return EXIT_PASS


def cmd_analyze(args):
    u = io.read_grid_csv(args.grid)
    F = _set_arg(args.set, n=u.n) if args.set else None
    reports = {}
    ok = True
    if args.subaffine:
        r = gridfield.subaffine_report(u, tol=args.tol, seed=_seed(args.seed))
        reports["subaffine"] = r.to_dict()
        ok &= r.passed
    if args.type:
        if F is None:
            raise ConfigError("--type needs --set", "")
        r = gridfield.type_report(u, F, tol=args.tol, seed=_seed(args.seed))
        reports["type"] = r.to_dict()
        ok &= r.passed
    if args.supconv is not None:
        v = gridfield.sup_convolution(u, args.supconv, args.N)
        entry = {"eps": args.supconv, "shape": list(v.shape), "quasiconvex_modulus": gridfield.quasiconvex_modulus(v),
                 "bound": 1.0 / args.supconv + 10 * u.h,
                 "monotone": bool(np.all(v.values >= gridfield.values_on(u, v)))}
        if F is not None:
            r = gridfield.type_report(v, F, tol=args.tol, seed=_seed(args.seed))
            entry["type"] = r.to_dict()
            ok &= r.passed
        ok &= entry["monotone"]
        if args.supconv_out:
            io.write_grid_csv(v, args.supconv_out)
        reports["supconv"] = entry
    if not reports:
        raise ConfigError("choose at least one of --subaffine, --type, --supconv", "")
    _emit({"grid": str(args.grid), "reports": reports, "pass": ok})
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_freedim(args):
    if Path(args.set).is_file():
        spec = config.load_json(args.set)
    else:
        spec = config.loads(args.set) if args.set.lstrip().startswith("{") else {"name": args.set}
    F = config.set_from_json(spec, n=args.n)
    rep = cones.free_dim(F, random_frames=args.frames, seed=_seed(args.seed))
    _emit({"set": F.name, "n": F.n, **rep.to_dict()})
    return EXIT_PASS


def cmd_suite(args):
    numbers = [int(k) for k in args.only.split(",")] if args.only else None
    if numbers and any(k not in acceptance.CRITERIA for k in numbers):
        raise ConfigError(f"criteria are numbered 1..{len(acceptance.CRITERIA)}", "")
    results = acceptance.run(numbers)
    if args.out:
        io.write_json([r.to_dict() for r in results], args.out)
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return EXIT_PASS if ok else EXIT_FAIL


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="dirichlet-sets", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the F-Dirichlet problem on a box")
    s.add_argument("config")
    s.add_argument("--out", default="out", help="output directory (default: out)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("verify-cones", help="cone invariants on random matrices")
    s.add_argument("--set", help="catalog name, inline JSON or JSON file (default: whole catalog)")
    s.add_argument("--n", type=int, default=4)
    s.add_argument("--samples", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify_cones)

    s = sub.add_parser("check-boundary", help="strict boundary convexity sweep")
    s.add_argument("domain")
    s.add_argument("set")
    s.add_argument("--samples", type=int, default=512)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="convexity.csv")
    s.set_defaults(func=cmd_check_boundary)

    s = sub.add_parser("build-defining", help="construct a strict global defining function")
    s.add_argument("domain")
    s.add_argument("set")
    s.add_argument("--display", help="set for the final eps', R' display stage")
    s.add_argument("--resolution", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="defining")
    s.set_defaults(func=cmd_build_defining)

    s = sub.add_parser("analyze", help="subaffine, type and sup-convolution reports for a grid")
    s.add_argument("grid")
    s.add_argument("--set")
    s.add_argument("--subaffine", action="store_true")
    s.add_argument("--type", action="store_true")
    s.add_argument("--supconv", type=float, metavar="EPS")
    s.add_argument("--N", type=float, help="bound on |u| for the sup-convolution window")
    s.add_argument("--supconv-out")
    s.add_argument("--tol", type=float, default=1e-7)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("freedim", help="free dimension of a set")
    s.add_argument("set")
    s.add_argument("--n", type=int)
    s.add_argument("--frames", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_freedim)

    s = sub.add_parser("suite", help="run the acceptance criteria")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.add_argument("--out")
    s.set_defaults(func=cmd_suite)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DirichletError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
