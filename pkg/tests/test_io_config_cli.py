import json

import numpy as np
import pytest

from dirichlet_sets import cli, config, gridfield as G, io
from dirichlet_sets.errors import ConfigError

SLICE = {"set": {"name": "halfspace", "params": {"A0": [[1.0]]}, "ops": [{"op": "product_extend", "n": 2}]},
         "box": {"lo": [0, 0], "hi": [1, 1]}, "h": 0.125, "phi": "(1-x1)*x2^2 + x1*(1+x2)"}
DUMBBELL = {"kind": "expr", "n": 2, "expr": "x2^2 + (x1^2 - 1)^2 - 1.2",
            "bbox": [[-1.6, -1.3], [1.6, 1.3]], "interior_point": [0, 0]}
A11 = {"name": "halfspace", "params": {"A0": [[1.0]]}, "ops": [{"op": "product_extend", "n": 2}]}


def dump(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


# --------------------------------------------------------------------------
# grid files


def test_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    u = G.GridField([-1.0, 0.5], 0.1, rng.standard_normal((7, 5)) * 1e3)
    io.write_grid_csv(u, tmp_path / "u.csv")
    v = io.read_grid_csv(tmp_path / "u.csv")
    assert np.array_equal(u.values, v.values)
    assert v.h == pytest.approx(u.h) and np.allclose(v.lo, u.lo)
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,value" and len(lines) == 36


def test_csv_round_trip_3d(tmp_path):
    u = G.from_function(lambda X: X.sum(-1) ** 3, [0, 0, 0], [1, 1, 1], 0.25)
    io.write_grid_csv(u, tmp_path / "u.csv")
    assert np.array_equal(io.read_grid_csv(tmp_path / "u.csv").values, u.values)


@pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "x1,value\n0,1\nz,2\n", "x1,x2,value\n0,0,1\n0,1,2\n1,0,3\n",
                                  "x1,value\n0,1\n1,2,3\n"])
def test_csv_read_errors(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ConfigError):
        io.read_grid_csv(p)


def test_missing_file():
    with pytest.raises(ConfigError):
        io.read_grid_csv("/nonexistent/grid.csv")


def test_manifest(tmp_path):
    out = io.write_json({"a": 1}, tmp_path / "r.json")
    io.write_manifest(tmp_path / "m.json", {"b": 2}, 7, [out], wall_time=0.5)
    m = json.loads((tmp_path / "m.json").read_text())
    assert m["seed"] == 7 and m["wall_time"] == 0.5
    assert m["outputs"][str(out)] == io.sha256_file(out)
    assert m["config_sha256"] == io.config_hash({"b": 2}) != io.config_hash({"b": 3})
    assert set(m["versions"]) >= {"dirichlet_sets", "numpy", "python"}


# --------------------------------------------------------------------------
# configuration


@pytest.mark.parametrize("data,pointer", [
    ({**SLICE, "h": -1}, "/h"),
    ({**SLICE, "damping": 2.0}, "/damping"),
    ({**SLICE, "box": {"lo": [0, 0], "hi": [1]}}, "/box/hi"),
    ({**SLICE, "sweep": "zigzag"}, "/sweep"),
    ({**SLICE, "extra": 1}, ""),
    ({**SLICE, "set": {"name": "P", "ops": [{"op": "translate"}]}}, "/set/ops/0"),
])
def test_config_errors_carry_pointers(data, pointer):
    with pytest.raises(ConfigError) as exc:
        config.solve_config_from_json(data)
    assert exc.value.pointer == pointer


def test_set_errors():
    with pytest.raises(ConfigError) as exc:
        config.set_from_json({"name": "nope"})
    assert exc.value.pointer == "/name"
    with pytest.raises(ConfigError) as exc:
        config.set_from_json({"name": "SL", "n": 2, "params": {"c": 9.0}})
    assert exc.value.pointer == "/params"
    with pytest.raises(ConfigError):
        config.loads("{not json")


def test_set_from_json_builds_ops():
    F = config.set_from_json(A11, n=1)
    assert F.n == 2
    assert F.defect(np.diag([1.0, -5.0])) == pytest.approx(1.0)
    G_ = config.set_from_json({"name": "P", "n": 2, "ops": ["dual"]})
    assert G_.defect(np.diag([1.0, -5.0])) == pytest.approx(1.0)


def test_domain_errors():
    with pytest.raises(ConfigError):
        config.domain_from_json({"kind": "expr", "n": 2})
    with pytest.raises(ConfigError):
        config.domain_from_json({"kind": "torus"})


# --------------------------------------------------------------------------
# command line


def test_cli_solve_and_seed_determinism(tmp_path, monkeypatch, capsys):
    c = dump(tmp_path, "c.json", {**SLICE, "init": "noisy"})
    monkeypatch.setenv("SEED", "11")
    assert cli.main(["solve", c, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["solve", c, "--out", str(tmp_path / "b")]) == 0
    for name in ("solution.csv", "report.json", "solution.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["success"] and "wall_time" not in report
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 11 and "wall_time" in manifest
    u = io.read_grid_csv(tmp_path / "a" / "solution.csv")
    X = u.coords()
    exact = (1 - X[..., 0]) * X[..., 1] ** 2 + X[..., 0] * (1 + X[..., 1])
    assert np.max(np.abs(u.values - exact)) <= 1e-7


def test_cli_seed_must_be_integer(tmp_path, monkeypatch):
    monkeypatch.setenv("SEED", "abc")
    assert cli.main(["solve", dump(tmp_path, "c.json", SLICE), "--out", str(tmp_path / "o")]) == 2


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert cli.main(["solve", dump(tmp_path, "c.json", {**SLICE, "h": -1})]) == 2
    assert "/h" in capsys.readouterr().err
    assert cli.main(["solve", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["bogus-command"]) == 2
    assert cli.main([]) == 2


def test_cli_failed_solve_exit_code(tmp_path):
    c = dump(tmp_path, "c.json", {**SLICE, "phi": "sin(pi*x1)*cosh(x2)", "set": "P", "max_iters": 1})
    assert cli.main(["solve", c, "--out", str(tmp_path / "o")]) == 1


def test_cli_check_boundary(tmp_path):
    d = dump(tmp_path, "d.json", DUMBBELL)
    s = dump(tmp_path, "s.json", A11)
    out = tmp_path / "conv.csv"
    assert cli.main(["check-boundary", d, s, "--samples", "64", "--out", str(out)]) == 1
    assert "fail" in out.read_text()
    ball = dump(tmp_path, "b.json", {"kind": "ball", "params": {"n": 2}})
    assert cli.main(["check-boundary", ball, "P", "--samples", "64", "--out", str(out)]) == 0


def test_cli_build_defining(tmp_path):
    ball = dump(tmp_path, "b.json", {"kind": "ball", "params": {"n": 2}})
    assert cli.main(["build-defining", ball, "P", "--display", "P", "--resolution", "24",
                     "--out", str(tmp_path / "ok")]) == 0
    v = json.loads((tmp_path / "ok" / "verification.json").read_text())
    assert v["pass"] and v["min_ray_defect"] > 0
    d = dump(tmp_path, "d.json", DUMBBELL)
    assert cli.main(["build-defining", d, json.dumps(A11), "--out", str(tmp_path / "bad")]) == 1
    v = json.loads((tmp_path / "bad" / "verification.json").read_text())
    assert not v["pass"] and v["stage"] == "boundary_repair"


def test_cli_analyze(tmp_path, capsys):
    u = G.from_function(lambda X: X[..., 0] ** 2 - X[..., 1] ** 2, [-1, -1], [1, 1], 1 / 16)
    io.write_grid_csv(u, tmp_path / "u.csv")
    assert cli.main(["analyze", str(tmp_path / "u.csv"), "--set", "harm", "--subaffine", "--type"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["pass"] and out["reports"]["type"]["pass"]
    assert cli.main(["analyze", str(tmp_path / "u.csv"), "--set", "P", "--type"]) == 1
    capsys.readouterr()
    assert cli.main(["analyze", str(tmp_path / "u.csv"), "--supconv", "0.05",
                     "--supconv-out", str(tmp_path / "v.csv")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["reports"]["supconv"]["monotone"]
    assert io.read_grid_csv(tmp_path / "v.csv").shape == tuple(out["reports"]["supconv"]["shape"])
    assert cli.main(["analyze", str(tmp_path / "u.csv")]) == 2


def test_cli_freedim(capsys):
    assert cli.main(["freedim", "P", "--n", "3", "--frames", "200"]) == 0
    assert json.loads(capsys.readouterr().out)["free_dim"] == 0
    assert cli.main(["freedim", json.dumps({"name": "LAG", "n": 4}), "--frames", "200"]) == 0
    assert json.loads(capsys.readouterr().out)["free_dim"] == 2


def test_cli_verify_cones(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert cli.main(["verify-cones", "--set", "harm", "--n", "3", "--samples", "2000", "--out", str(out)]) == 0
    assert json.loads(out.read_text())


def test_cli_suite_single_criterion(tmp_path, capsys):
    assert cli.main(["suite", "--only", "8", "--out", str(tmp_path / "s.json")]) == 0
    assert "1/1 criteria passed" in capsys.readouterr().out
    rows = json.loads((tmp_path / "s.json").read_text())
    assert rows[0]["number"] == 8 and rows[0]["pass"]
    assert cli.main(["suite", "--only", "11"]) == 2
