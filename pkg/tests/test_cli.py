import csv
import json
import math
import subprocess
import sys

import pytest

from surgailis.cli import main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *args, out="out"):
    return main([*args, "--out", str(tmp_path / out)])


def test_evolve_poisson_first_moment(tmp_path):
    code = run(tmp_path, "evolve", "--set", "times=[0, 1]", "--set", "probe_sizes=[1]", "--set", "probes_per_size=1")
    assert code == 0
    r = rows(tmp_path / "out" / "evolve.csv")
    assert [float(x["k_value"]) for x in r] == [1.0, pytest.approx(2 - math.exp(-1), abs=1e-15)]
    assert r[0]["bound_value"] == ""


def test_evolve_time_zero_and_bounds(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"initial": "gauss_poisson", "A": 1.0, "b": 0.5, "scale": 0.3,
                               "window_upper": 1.0, "times": [0.0, 0.5, 2.0], "norm_C": 2.5}))
    assert run(tmp_path, "evolve", "--config", str(cfg)) == 0
    out = rows(tmp_path / "out" / "evolve.csv")
    probes = json.loads((tmp_path / "out" / "probes.json").read_text())
    from surgailis import models
    from surgailis.config_core import Configuration
    k0 = models.gauss_poisson(1.0, 0.5, 0.3)
    for row in out:
        assert abs(float(row["k_value"])) <= float(row["bound_value"])
        if float(row["t"]) == 0.0:
            eta = Configuration(probes[row["config_id"]], d=1)
            assert float(row["k_value"]) == k0(eta)


def test_evolve_tabulated(tmp_path):
    code = run(tmp_path, "evolve", "--set", "initial=tabulated", "--set", "grid=[0, 10]",
               "--set", "values=[1, 3]", "--set", "times=[0]")
    assert code == 0


def test_resolvent_output(tmp_path):
    assert run(tmp_path, "resolvent", "--set", "probe_sizes=[0]", "--set", "probes_per_size=1") == 0
    r = rows(tmp_path / "out" / "resolvent.csv")
    assert [float(x["r_value"]) for x in r] == pytest.approx([2.0, 1.0, 1 / 3], rel=1e-12)


def test_simulate_is_byte_identical(tmp_path):
    args = ["simulate", "--seed", "99", "--replicas", "300"]
    assert run(tmp_path, *args, out="a") == 0
    assert run(tmp_path, *args, "--threads", "3", out="b") == 0
    for name in ("ensemble.csv", "ensemble.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    sidecar = json.loads((tmp_path / "a" / "ensemble.json").read_text())
    assert sidecar["config"]["seed"] == 99 and sidecar["replicas"] == 300
    assert "version" in sidecar


def test_simulate_agrees_with_evolve(tmp_path):
    assert run(tmp_path, "simulate", "--replicas", "2000", "--set", "t_end=1.0") == 0
    assert run(tmp_path, "report") == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert run(tmp_path, "evolve", "--set", "times=[1.0]", "--set", "probe_sizes=[1]", out="ev") == 0
    k1 = float(rows(tmp_path / "ev" / "evolve.csv")[0]["k_value"])
    fm = report["factorial_moments"][0]
    assert abs(fm["estimate"] - k1) <= 3 * fm["std_error"]
    assert all(abs(b["value"]) <= 3 * b["std_error"] for b in report["gap"])


def test_verify_empty_list(tmp_path):
    assert run(tmp_path, "verify", "--set", "checks=[]") == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["checks"] == [] and report["passed"]


def test_verify_subset_passes(tmp_path):
    assert run(tmp_path, "verify", "--set", 'checks=["poisson_preservation","algebra_identities"]') == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert all(c["passed"] and c["anchor"] for c in report["checks"])


def test_verify_injection_fails(tmp_path):
    code = run(tmp_path, "verify", "--set", "checks=invariance_ergodic", "--set", "inject=half_invariant")
    assert code == 1
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    failed = {c["name"] for c in report["checks"] if not c["passed"]}
    assert "invariant_annihilated" in failed


@pytest.mark.parametrize("override", ["m=0", "sigma=-1", "bogus=1", "checks=nope", "inject=other",
                                      "scheme=leap", "times=[-1]", "initial=lattice", "window_upper=-1"])
def test_config_errors_exit_2(tmp_path, override):
    command = "simulate" if override.startswith("scheme") else "verify" if override.split("=")[0] in ("checks", "inject") else "evolve"
    assert run(tmp_path, command, "--set", override) == 2


def test_unreadable_config_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(tmp_path, "evolve", "--config", str(bad)) == 2
    assert run(tmp_path, "report", "--set", f"ensemble={tmp_path / 'missing.csv'}") == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "surgailis", "verify", "--set", "checks=[]", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
