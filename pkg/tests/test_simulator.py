import json
import math

import numpy as np
import pytest

from surgailis.config_core import Configuration
from surgailis.errors import InsufficientReplicas
from surgailis.evolution import ModelParams, fit_decay_rate
from surgailis.lp_integration import Window
from surgailis.simulator import (
    EmptyInitial,
    FixedInitial,
    PoissonInitial,
    SimConfig,
    factorial_moments,
    gap_estimator,
    read_ensemble,
    sample_exact,
    sample_gillespie,
    simulate,
    write_ensemble,
)

P = ModelParams(1.0, 2.0)
LINE = Window((0.0,), (10.0,), "periodic")
FIXED = FixedInitial(Configuration([1.0, 2.5, 4.0, 7.5, 9.0]))


def cfg(**kw):
    base = dict(params=P, window=LINE, initial=PoissonInitial(1.0), t_end=1.0, replicas=2000, seed=7, scheme="exact")
    base.update(kw)
    return SimConfig(**base)


def within(est, se, target, k=3.0):
    return abs(est - target) <= k * se


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(replicas=0)
    with pytest.raises(ValueError):
        cfg(t_end=-1.0)
    with pytest.raises(ValueError):
        cfg(scheme="tau-leap")
    with pytest.raises(ValueError):
        cfg(initial=FixedInitial(Configuration([11.0])))
    with pytest.raises(ValueError):
        sample_gillespie(cfg())


def test_config_dict_roundtrip():
    c = cfg(initial=FIXED, scheme="gillespie")
    assert SimConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c


@pytest.mark.parametrize("scheme", ["exact", "gillespie"])
def test_zero_time_keeps_fixed_initial(scheme):
    ens = simulate(cfg(initial=FIXED, t_end=0.0, replicas=20, scheme=scheme))
    assert all(c == FIXED.configuration for c in ens.configs)


@pytest.mark.parametrize("scheme", ["exact", "gillespie"])
def test_pure_death_is_binomial_thinning(scheme):
    ens = simulate(cfg(params=ModelParams(1.0, 0.0), initial=FIXED, t_end=0.7, scheme=scheme))
    counts = ens.counts
    p = math.exp(-0.7)
    assert within(counts.mean(), counts.std(ddof=1) / math.sqrt(len(counts)), 5 * p)
    assert all(set(map(tuple, c.array)) <= set(FIXED.configuration) for c in ens.configs)


def test_gillespie_vacuum_is_absorbing():
    ens = sample_gillespie(cfg(params=ModelParams(1.0, 0.0), initial=EmptyInitial(), replicas=50, scheme="gillespie"))
    assert ens.counts.sum() == 0


@pytest.mark.parametrize("scheme", ["exact", "gillespie"])
def test_pure_immigration_intensity(scheme):
    ens = simulate(cfg(initial=EmptyInitial(), scheme=scheme))
    est, se = factorial_moments(ens, 1)
    assert within(est, se, 2 * (1 - math.exp(-1)))


def test_points_stay_in_window():
    ens = sample_exact(cfg(window=Window((0.0, -1.0), (2.0, 1.0)), params=ModelParams(1.0, 2.0, 2), replicas=50))
    assert all(np.all(ens.meta.window.contains(c.array)) for c in ens.configs if len(c))


def test_fixed_initial_moments_at_time_zero():
    ens = sample_exact(cfg(initial=FIXED, t_end=0.0, replicas=100))
    est, se = factorial_moments(ens, 1)
    assert est == 0.5 and se == 0.0


def test_factorial_moment_preconditions():
    ens = sample_exact(cfg(replicas=50))
    with pytest.raises(InsufficientReplicas):
        factorial_moments(ens, 1)
    with pytest.raises(ValueError):
        factorial_moments(sample_exact(cfg(replicas=100)), 5)


@pytest.mark.parametrize("j", [1, 2, 3])
def test_poisson_factorial_moments(j):
    # stationary start: Poisson(sigma/m)
    ens = sample_exact(cfg(initial=PoissonInitial(2.0), t_end=3.0, replicas=4000))
    est, se = factorial_moments(ens, j)
    assert within(est, se, 2.0 ** j)


def test_stationarity():
    for t in (0.5, 2.0, 8.0):
        ens = sample_exact(cfg(initial=PoissonInitial(P.rho_inv), t_end=t, replicas=3000, seed=int(10 * t)))
        for j in (1, 2):
            est, se = factorial_moments(ens, j)
            assert within(est, se, P.rho_inv ** j)


def test_relaxation_rate():
    ts = np.linspace(0.25, 2.5, 10)
    window = Window((0.0,), (100.0,))
    dev = []
    for i, t in enumerate(ts):
        ens = sample_exact(SimConfig(P, window, EmptyInitial(), float(t), 2000, 100 + i))
        dev.append(abs(factorial_moments(ens, 1)[0] - P.rho_inv))
    assert abs(fit_decay_rate(ts, dev) - P.m) / P.m < 0.05


@pytest.mark.parametrize("initial", [PoissonInitial(0.5), FIXED, EmptyInitial()])
def test_exact_and_gillespie_agree(initial):
    a = sample_exact(cfg(initial=initial, t_end=0.6, replicas=3000, seed=21)).counts.astype(float)
    b = sample_gillespie(cfg(initial=initial, t_end=0.6, replicas=3000, seed=22, scheme="gillespie")).counts.astype(float)
    se = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
    assert abs(a.mean() - b.mean()) <= 3 * se
    # variance: normal-theory SE of a sample variance is close enough for Poisson-like counts
    vse = math.sqrt(2 * a.var() ** 2 / len(a) + 2 * b.var() ** 2 / len(b) + a.mean() / len(a) + b.mean() / len(b))
    assert abs(a.var(ddof=1) - b.var(ddof=1)) <= 3 * vse


def test_reproducible_across_thread_counts():
    c = cfg(replicas=300, scheme="gillespie")
    one, four = simulate(c, threads=1), simulate(c, threads=4)
    assert all(x == y for x, y in zip(one.configs, four.configs))
    assert simulate(c).configs[5] == one.configs[5]


def test_poisson_gap_is_zero():
    ens = sample_exact(cfg(replicas=4000))
    for b in gap_estimator(ens, np.linspace(0.0, 5.0, 11)):
        assert not b.empty
        assert abs(b.value) <= 3 * b.std_error


def test_fixed_pair_gap_is_negative_off_the_pair_distance():
    pair = FixedInitial(Configuration([2.0, 5.0]))
    ens = sample_exact(cfg(params=ModelParams(1.0, 0.0), initial=pair, t_end=0.1, replicas=500))
    bins = gap_estimator(ens, [0.0, 1.0, 2.0, 2.5, 3.5, 4.5])
    for b in bins:
        if b.r != 3.0:
            assert b.empty and b.value < 0


def test_gap_estimator_preconditions():
    with pytest.raises(ValueError):
        gap_estimator(sample_exact(cfg(window=Window((0.0,), (10.0,)), replicas=10)), [0.0, 1.0])
    ens = sample_exact(cfg(replicas=10))
    with pytest.raises(ValueError):
        gap_estimator(ens, [0.0, 6.0])
    with pytest.raises(ValueError):
        gap_estimator(ens, [1.0, 0.5])


def test_ensemble_files_roundtrip(tmp_path):
    ens = sample_exact(cfg(params=ModelParams(1.0, 2.0, 2), window=Window((0.0, 0.0), (3.0, 3.0), "periodic"),
                           replicas=40))
    csv_path, json_path = write_ensemble(ens, tmp_path)
    back = read_ensemble(csv_path)
    assert back.meta == ens.meta and back.t == ens.t
    assert all(x == y for x, y in zip(back.configs, ens.configs))
    sidecar = json.loads(json_path.read_text())
    assert sidecar["replicas"] == 40 and sidecar["config"]["seed"] == 7
    ids = {line.split(",")[0] for line in csv_path.read_text().splitlines()[1:]}
    assert len(ids) == sum(1 for c in ens.configs if len(c))
    first = csv_path.read_bytes()
    write_ensemble(sample_exact(ens.meta), tmp_path)
    assert csv_path.read_bytes() == first
