import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surgailis import models
from surgailis.config_core import Bound, SetFunction, coherent_state, constant, size_function, vacuum
from surgailis.errors import TruncationUnsound
from surgailis.lp_integration import (
    LPIntegralSpec,
    MonteCarlo,
    Quadrature,
    TripleFunction,
    Window,
    lp_integrate,
    minlos_check,
    posdef_check,
    tail_bound,
)

UNIT = Window((0.0,), (1.0,))


def test_window_validation():
    with pytest.raises(ValueError):
        Window((1.0,), (0.0,))
    with pytest.raises(ValueError):
        Window((0.0,), (1.0,), "reflecting")
    w = Window((0.0, 0.0), (2.0, 3.0), "periodic")
    assert w.d == 2 and w.volume == 6.0


def test_spec_validation():
    with pytest.raises(ValueError):
        LPIntegralSpec(UNIT, z=0.0)
    with pytest.raises(ValueError):
        LPIntegralSpec(Window((0.0, 0.0), (1.0, 1.0)), method=Quadrature())
    with pytest.raises(ValueError):
        LPIntegralSpec(UNIT, truncation=13)


def test_quadrature_node_schedule():
    q = Quadrature(16, 1 << 15)
    assert q.nodes_for_level(0) == 1
    assert q.nodes_for_level(1) == 16
    assert q.nodes_for_level(4) == 13
    assert q.nodes_for_level(15) == 2


def test_vacuum_integrates_to_one():
    res = lp_integrate(vacuum(), LPIntegralSpec(UNIT))
    assert res.value == 1.0


def test_coherent_state_integral():
    value, tail = lp_integrate(coherent_state(0.5), LPIntegralSpec(UNIT, 1.0, 10))
    assert abs(value - math.exp(0.5)) <= tail + 1e-12
    assert tail < 1e-10


@given(st.floats(0.1, 1.5), st.floats(0.5, 2.0), st.floats(0.5, 1.5))
def test_coherent_state_integral_within_tail(c, length, z):
    spec = LPIntegralSpec(Window((0.0,), (length,)), z, 10, Quadrature(4, 64))
    value, tail = lp_integrate(coherent_state(c), spec)
    assert abs(value - math.exp(z * c * length)) <= tail * (1 + 1e-9) + 1e-12


def test_smooth_coherent_state_integral():
    f = lambda X: 0.3 * np.cos(2 * X[..., 0])
    value, _ = lp_integrate(coherent_state(f, sup=0.3), LPIntegralSpec(UNIT, 1.0, 10))
    assert abs(value - math.exp(0.15 * math.sin(2.0))) < 1e-10


def test_size_function_levels():
    # int 1_{|eta| = 2} dlambda_z = (z |W|)^2 / 2
    G = size_function(lambda n: float(n == 2)).with_bound(Bound(1.0, 1.0))
    res = lp_integrate(G, LPIntegralSpec(Window((0.0,), (2.0,)), 0.5, 5))
    assert abs(res.value - 0.5) < 1e-12
    assert res.levels[2] == pytest.approx(0.5)


def test_certify_requires_bound():
    G = SetFunction(points_func=lambda X: np.ones(X.shape[0]))
    assert lp_integrate(G, LPIntegralSpec(UNIT, truncation=3)).tail_bound is None
    with pytest.raises(TruncationUnsound):
        lp_integrate(G, LPIntegralSpec(UNIT, truncation=3), certify=True)


def test_tail_bound_dominates_series():
    a = 2.0 * 1.5 * 1.0
    exact_tail = sum(a ** n / math.factorial(n) for n in range(7, 60))
    assert exact_tail <= tail_bound(1.0, 2.0, 1.5, 1.0, 6)


def test_monte_carlo_in_two_dimensions():
    w = Window((0.0, 0.0), (1.0, 1.0))
    f = lambda X: 0.5 + 0.2 * X[..., 0] * X[..., 1]
    spec = LPIntegralSpec(w, 1.0, 8, MonteCarlo(20000, seed=3))
    res = lp_integrate(coherent_state(f, sup=0.7), spec)
    assert abs(res.value - math.exp(0.55)) <= 4 * res.std_error + res.tail_bound
    again = lp_integrate(coherent_state(f, sup=0.7), spec)
    assert again.value == res.value


def test_quadrature_and_monte_carlo_agree():
    G = models.random_set_function(np.random.default_rng(2), n_max=8, scale=0.3)
    q = lp_integrate(G, LPIntegralSpec(UNIT, 1.0, 6, Quadrature(12, 4096)))
    mc = lp_integrate(G, LPIntegralSpec(UNIT, 1.0, 6, MonteCarlo(40000, seed=1)))
    assert abs(q.value - mc.value) <= 4 * mc.std_error + 1e-6


def test_posdef_for_poisson():
    probes = [models.random_set_function(np.random.default_rng(s), n_max=8, scale=0.3) for s in range(3)]
    vals = posdef_check(coherent_state(1.2), probes, LPIntegralSpec(UNIT, 1.0, 4, Quadrature(6, 256)))
    assert all(v >= -1e-9 for v in vals)


def test_minlos_separable_closed_form():
    a, b = 0.3, 0.5
    H = TripleFunction(points_func=lambda A, B, C: np.full(A.shape[0], a ** A.shape[1] * b ** B.shape[1]),
                       bound=Bound(1.0, 0.5))
    spec = LPIntegralSpec(Window((0.0,), (2.0,)), 1.0, 10, Quadrature(8, 4096))
    res = minlos_check(H, spec)
    closed = math.exp((a + b) * 2.0)
    assert abs(res.lhs - closed) <= res.lhs_tail + 1e-8
    assert abs(res.rhs - closed) <= res.rhs_tail + 1e-8
    assert abs(res.lhs - res.rhs) < 1e-12


def test_minlos_accepts_plain_callable():
    H = lambda xi, eta, zeta: 1.0 if len(zeta) <= 1 else 0.0
    spec = LPIntegralSpec(UNIT, 1.0, 3, Quadrature(4, 16))
    lhs, rhs = minlos_check(H, spec)
    assert abs(lhs - rhs) < 1e-12
    assert abs(lhs - 3.0) < 1e-12  # level 0: H=1; level 1: two splits of a singleton


def test_constant_integral_levels():
    res = lp_integrate(constant(1.0), LPIntegralSpec(UNIT, 2.0, 12, Quadrature(3, 27)))
    assert abs(res.value - math.exp(2.0)) <= res.tail_bound
    assert all(isinstance(v, float) for v in res.levels)
