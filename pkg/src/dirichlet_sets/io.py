"""Grid CSV files, JSON sidecars, reports and run manifests."""

import csv
import datetime
import hashlib
import json
import platform
from pathlib import Path

import numpy as np
import scipy

from .errors import ConfigError
from .gridfield import GridField


def _fmt(x):
    return "%.17g" % x


def write_grid_csv(u, path):
    """One row per lattice point, x1 slowest, 17 significant digits."""
    path = Path(path)
    X = u.coords().reshape(-1, u.n)
    v = u.values.reshape(-1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(u.n)] + ["value"])
        for row, val in zip(X, v):
            w.writerow([_fmt(c) for c in row] + [_fmt(val)])
    return path


def write_sidecar(u, path, provenance=None):
    data = {"n": u.n, "h": u.h, "box": {"lo": u.lo.tolist(), "hi": u.hi.tolist()},
            "shape": list(u.shape), "provenance": provenance or {}}
    return write_json(data, path)


def read_grid_csv(path):
    """Read a grid CSV written by write_grid_csv; the lattice is inferred from the coordinates."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read grid: {exc.strerror}", "") from None
    if not rows:
        raise ConfigError("empty grid file", "")
    header = rows[0]
    n = len(header) - 1
    if n < 1 or header != [f"x{i + 1}" for i in range(n)] + ["value"]:
        raise ConfigError("header must be x1,...,xn,value", "/0")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError:
        raise ConfigError("non-numeric entry in grid", "") from None
    if data.ndim != 2 or data.shape[1] != n + 1:
        raise ConfigError("ragged grid rows", "")
    axes = [np.unique(data[:, i]) for i in range(n)]
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != len(data):
        raise ConfigError("rows do not form a full lattice", "")
    h = float(axes[0][1] - axes[0][0])
    lo = np.array([a[0] for a in axes])
    u = GridField(lo, h, data[:, -1].reshape(shape))
    if not np.allclose(u.coords().reshape(-1, n), data[:, :n], atol=1e-9 * max(1.0, h)):
        raise ConfigError("rows are not a uniform lattice in row-major order", "")
    return u


def write_json(data, path):
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_default) + "\n")
    return path


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(config):
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_default)
    return hashlib.sha256(canon.encode()).hexdigest()


def versions():
    from . import __version__
    return {"dirichlet_sets": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_manifest(path, config, seed, outputs, wall_time=None):
    """Provenance record. Outputs are listed with their sha256 so reruns can be compared."""
    now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    data = {
        "config_sha256": config_hash(config),
        "seed": seed,
        "versions": versions(),
        "timestamp": now,
        "outputs": {str(p): sha256_file(p) for p in outputs},
    }
    if wall_time is not None:
        data["wall_time"] = wall_time
    return write_json(data, path)
