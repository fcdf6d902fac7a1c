"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Criteria 1-10 run the shared verification registry at its stated tolerances;
criterion 11 drives the command-line interface.
"""
import json

import pytest

from surgailis.checks import CRITERIA, VerifyContext, run_checks
from surgailis.cli import main

NUMBERED = list(enumerate(CRITERIA, start=1))


def report(capsys, number, name, passed, summary):
    with capsys.disabled():
        print(f"\nCRITERION {number:2d} {name}: {'PASS' if passed else 'FAIL'} | {summary}")


@pytest.mark.parametrize("number,name", NUMBERED, ids=[n for _, n in NUMBERED])
def test_criterion(number, name, capsys):
    results = run_checks([name], VerifyContext())
    passed = all(r.passed for r in results)
    summary = "; ".join(f"{r.name} {r.observed:.3g}/{r.tolerance:.3g}" for r in results)
    report(capsys, number, name, passed, summary)
    failed = [r.line() for r in results if not r.passed]
    assert not failed, failed


def test_criterion_cli_determinism_and_mutation(tmp_path, capsys):
    def files(tag):
        out = tmp_path / tag
        codes = [
            main(["simulate", "--seed", "2024", "--replicas", "500", "--out", str(out)]),
            main(["evolve", "--set", "norm_C=3", "--set", "times=[0,0.5,1,2]", "--out", str(out)]),
            main(["resolvent", "--out", str(out)]),
            main(["verify", "--set", 'checks=["poisson_preservation","semigroup_law","simulation"]',
                  "--replicas", "1000", "--out", str(out)]),
        ]
        return codes, {p.name: p.read_bytes() for p in sorted(out.iterdir())}

    codes_a, a = files("a")
    codes_b, b = files("b")
    identical = codes_a == codes_b == [0, 0, 0, 0] and a == b and len(a) >= 8

    mutated = tmp_path / "mutated"
    code = main(["verify", "--set", "inject=half_invariant", "--out", str(mutated)])
    rep = json.loads((mutated / "report.json").read_text())
    flipped = sorted(c["name"] for c in rep["checks"] if not c["passed"])
    sensitive = code == 1 and len(flipped) >= 1

    report(capsys, 11, "cli_determinism_and_mutation", identical and sensitive,
           f"{len(a)} files byte-identical={a == b}; injected corruption failed {flipped}")
    assert identical
    assert sensitive
