import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import configurations
from surgailis import models
from surgailis.checks import CheckResult, VerifyContext, run_checks
from surgailis.config_core import Configuration
from surgailis.evolution import ModelParams
from surgailis.lp_integration import Window


@given(configurations(6), st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.0, 1.0))
def test_mixed_poisson_values(eta, a1, a2, w):
    n = len(eta)
    assert models.mixed_poisson(a1, a2, w)(eta) == pytest.approx(w * a1 ** n + (1 - w) * a2 ** n)


def test_mixed_poisson_weight_range():
    with pytest.raises(ValueError):
        models.mixed_poisson(1.0, 2.0, 1.5)


def test_gauss_poisson_three_points():
    A, b, s = 1.2, 0.5, 0.4
    k = models.gauss_poisson(A, b, s)
    x = [0.1, 0.3, 0.8]
    pair = lambda i, j: b * math.exp(-(x[i] - x[j]) ** 2 / (2 * s * s))
    expect = A ** 3 + A * (pair(0, 1) + pair(0, 2) + pair(1, 2))
    assert k(Configuration(x)) == pytest.approx(expect, rel=1e-12)


def test_tabulated_interpolates():
    k = models.tabulated([0.0, 1.0], [1.0, 3.0])
    assert k(Configuration([0.5])) == pytest.approx(2.0)
    assert k(Configuration([0.0, 1.0])) == pytest.approx(3.0)
    assert k.bound.C == 3.0
    with pytest.raises(ValueError):
        models.tabulated([1.0, 0.0], [1.0, 2.0])


def test_random_function_caps_size():
    G = models.random_set_function(np.random.default_rng(0), n_max=3)
    with pytest.raises(ValueError):
        G(Configuration([0.1, 0.2, 0.3, 0.4]))


def test_bump_theta():
    th = models.bump(Window((0.0,), (10.0,)), 0.5, 5.0, 0.5)
    assert th.mean == pytest.approx(0.5 * 0.5 * math.sqrt(2 * math.pi), rel=1e-10)
    assert th.sup == 0.5


def test_injection_only_affects_invariant():
    ctx = VerifyContext(inject="half_invariant")
    p = ModelParams(1.0, 2.0)
    assert ctx.invariant_intensity(p) == 1.0
    assert VerifyContext().invariant_intensity(p) == 2.0


def test_check_results_are_plain():
    r = CheckResult("x", np.bool_(True), np.float64(1.0), 2, "anchor", {"v": np.float32(3.0)})
    d = r.to_dict()
    assert d["passed"] is True and type(d["observed"]) is float and d["detail"]["v"] == 3.0
    assert run_checks([]) == []
    with pytest.raises(KeyError):
        run_checks(["nope"])
