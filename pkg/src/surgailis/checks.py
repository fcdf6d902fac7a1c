"""Verification suite: every closed form checked against an independent route.

Each criterion function returns a list of ``CheckResult``.  The CLI ``verify``
subcommand and ``tests/test_acceptance.py`` both run this registry.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from . import models
from .config_core import (
    Bound,
    Configuration,
    SetFunction,
    ast_convolution,
    coherent_state,
    empirical_sup,
    k_inverse_fn,
    k_transform_fn,
    random_configuration,
    star_convolution,
)
from .evolution import (
    ModelParams,
    apply_dual_generator,
    bogolyubov_ball_check,
    bogolyubov_evolve,
    bogolyubov_functional,
    correlation_gap,
    ergodic_bound,
    evolve_correlation,
    evolve_gap,
    fit_decay_rate,
    fit_power,
    gap_function,
    gap_norm_bound,
    mean_ergodic_average,
    mean_ergodic_limit,
    resolvent_dual,
)
from .lp_integration import LPIntegralSpec, Quadrature, TripleFunction, Window, minlos_check
from .simulator import PoissonInitial, SimConfig, factorial_moments, gap_estimator, simulate


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


@dataclass
class CheckResult:
    name: str
    passed: bool
    observed: float
    tolerance: float
    anchor: str
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.observed = float(self.observed)
        self.tolerance = float(self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["detail"] = json.loads(json.dumps(self.detail, default=_plain))
        return d

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: observed={self.observed:.3e} tolerance={self.tolerance:.3e}"


@dataclass
class VerifyContext:
    seed: int = 2024
    replicas: int = 10_000
    threads: int = 1
    inject: str | None = None

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def invariant(self, params: ModelParams) -> SetFunction:
        """``k_inv``; the ``half_invariant`` injection corrupts its intensity for harness testing."""
        rho = params.rho_inv / 2 if self.inject == "half_invariant" else params.rho_inv
        return coherent_state(rho)

    def invariant_intensity(self, params: ModelParams) -> float:
        return params.rho_inv / 2 if self.inject == "half_invariant" else params.rho_inv


def _probes(rng, sizes, per_size=2, lo=0.0, hi=1.0):
    return [random_configuration(rng, n, lo, hi) for n in sizes for _ in range(per_size)]


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


# 1

def poisson_preservation(ctx: VerifyContext) -> list[CheckResult]:
    rng = ctx.rng(1)
    worst = 0.0
    for m, sigma, A in [(1.0, 2.0, 1.0), (0.5, 0.1, 3.0), (2.0, 0.0, 1.0)]:
        p = ModelParams(m, sigma)
        probes = _probes(rng, range(7), 3)
        for t in (0.0, 0.3, 1.0, 5.0):
            kt = evolve_correlation(models.poisson(A), t, p)
            if sigma == 0:
                closed = lambda n: (A * math.exp(-t * m)) ** n
            else:
                closed = lambda n: ((A - p.rho_inv) * math.exp(-t * m) + p.rho_inv) ** n
            for eta in probes:
                worst = max(worst, abs(kt(eta) - closed(len(eta))))
    return [CheckResult("poisson_preservation", worst <= 1e-12, worst, 1e-12, "Poisson preservation")]


# 2

def semigroup_law(ctx: VerifyContext) -> list[CheckResult]:
    rng = ctx.rng(2)
    p = ModelParams(1.0, 2.0)
    k0 = models.random_set_function(rng, unit_at_empty=True, positive=True)
    probes = _probes(rng, range(6), 2)
    comp = forms = 0.0
    for s in (0.3, 0.7, 1.5):
        ks = evolve_correlation(k0, s, p)
        for t in (0.3, 0.7, 1.5):
            lhs = evolve_correlation(ks, t, p)
            rhs = evolve_correlation(k0, s + t, p)
            direct = evolve_correlation(k0, t, p, form="direct")
            alt = evolve_correlation(k0, t, p, form="alt")
            for eta in probes:
                comp = max(comp, _rel(lhs(eta), rhs(eta)))
                forms = max(forms, _rel(direct(eta), alt(eta)))
    return [
        CheckResult("semigroup_composition", comp <= 1e-10, comp, 1e-10, "semigroup law"),
        CheckResult("closed_form_equivalence", forms <= 1e-10, forms, 1e-10, "two closed forms of k_t"),
    ]


# 3

def generator_resolvent(ctx: VerifyContext) -> list[CheckResult]:
    rng = ctx.rng(3)
    p = ModelParams(1.0, 2.0)
    k0 = models.random_set_function(rng, unit_at_empty=True, positive=True)
    h = 1e-4
    fd = 0.0
    for tau in (0.5, 1.0, 2.0):
        gen = apply_dual_generator(evolve_correlation(k0, tau, p), p)
        kp, km = evolve_correlation(k0, tau + h, p), evolve_correlation(k0, tau - h, p)
        for eta in _probes(rng, range(1, 5), 2):
            deriv = (kp(eta) - km(eta)) / (2 * h)
            fd = max(fd, abs(deriv - gen(eta)) / max(abs(gen(eta)), 1e-300))

    ident = lap = 0.0
    probes = _probes(rng, range(6), 2)
    for z in (0.5, 1.0, 3.0):
        R = resolvent_dual(k0, z, p)
        LR = apply_dual_generator(R, p)
        for eta in probes:
            lhs = z * R(eta) - LR(eta)
            ident = max(ident, abs(lhs - k0(eta)) / abs(k0(eta)))
        for eta in probes[::2]:
            ref, _ = integrate.quad(lambda t: math.exp(-z * t) * evolve_correlation(k0, t, p)(eta),
                                    0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=400)
            lap = max(lap, abs(R(eta) - ref) / abs(ref))
    return [
        CheckResult("generator_finite_difference", fd <= 1e-5, fd, 1e-5, "dual generator"),
        CheckResult("dual_resolvent_identity", ident <= 1e-8, ident, 1e-8, "dual resolvent, Euler beta"),
        CheckResult("dual_resolvent_laplace", lap <= 1e-8, lap, 1e-8, "Laplace transform of the semigroup"),
    ]


# 4

def invariance_ergodic(ctx: VerifyContext) -> list[CheckResult]:
    rng = ctx.rng(4)
    out = []
    worst = 0.0
    for m, sigma in [(1.0, 2.0), (0.5, 0.1), (2.0, 0.7)]:
        p = ModelParams(m, sigma)
        L = apply_dual_generator(ctx.invariant(p), p)
        for eta in _probes(rng, range(7), 2):
            worst = max(worst, abs(L(eta)))
    out.append(CheckResult("invariant_annihilated", worst <= 1e-12, worst, 1e-12, "invariant measure"))

    p = ModelParams(1.0, 2.0)
    kinv = ctx.invariant(p)
    probes = _probes(rng, range(6), 2)
    ratio = 0.0
    rates = []
    for A in (1.0, 1.5):
        k0 = models.poisson(A)
        for factor in (1.5, 2.0, 4.0):
            C = factor * p.rho_inv
            norm = empirical_sup(k0 - kinv, probes, C, closed=True)
            eb = ergodic_bound(k0, C, p, k0_norm=norm)
            for t in (0.5, 1.0, 2.0, 4.0):
                kt = evolve_correlation(k0, t, p)
                emp = empirical_sup(kt - kinv, probes, C, closed=False)
                ratio = max(ratio, emp / eb(t) if eb(t) > 0 else math.inf)
            ts = np.linspace(1.0, 5.0, 9)
            emp_t = [empirical_sup(evolve_correlation(k0, t, p) - kinv, probes, C, closed=False) for t in ts]
            rates.append(fit_decay_rate(ts, emp_t))
    rate_err = max(abs(r - p.m) / p.m for r in rates)
    out.append(CheckResult("ergodic_bound", ratio <= 1.0, ratio, 1.0, "ergodic inequality",
                           {"max_empirical_over_bound": ratio}))
    out.append(CheckResult("ergodic_rate", rate_err <= 0.05, rate_err, 0.05, "relaxation rate m",
                           {"rates": rates}))
    return out


# 5

def decay_of_correlations(ctx: VerifyContext) -> list[CheckResult]:
    rng = ctx.rng(5)
    p = ModelParams(1.0, 2.0)
    C = 4.0
    cases = [
        ("mixed_poisson", models.mixed_poisson(1.0, 3.0, 0.5), 0.0, 1.0),
        ("gauss_poisson", models.gauss_poisson(1.0, 0.4, 0.3), 0.0, 1.0),
    ]
    formula = 0.0
    bound_ratio = 0.0
    for name, k0, lo, hi in cases:
        probes = _probes(rng, range(5), 2, lo, hi)
        y = rng.uniform(lo, hi, size=1)
        v0 = gap_function(k0, y)
        if name == "mixed_poisson":
            a_y = max(C ** -n * abs(models.mixed_poisson_gap(1.0, 3.0, 0.5, n)) for n in range(200))
        else:
            a_y = empirical_sup(v0, probes, C, closed=True)
        for t in (0.5, 1.0, 2.0):
            kt = evolve_correlation(k0, t, p)
            vt = evolve_gap(v0, t, p)
            for eta in probes:
                direct = correlation_gap(kt, eta, y)
                formula = max(formula, _rel(direct, vt(eta)))
            emp = empirical_sup(gap_function(kt, y), probes, C, closed=True)
            bound = gap_norm_bound(a_y, t, p)
            bound_ratio = max(bound_ratio, emp / bound)
    return [
        CheckResult("evolved_gap_formula", formula <= 1e-10, formula, 1e-10, "decay of correlations"),
        CheckResult("gap_norm_bound", bound_ratio <= 1.0, bound_ratio, 1.0, "gap contracts as e^{-tm}"),
    ]


# 6

def algebra_identities(ctx: VerifyContext) -> list[CheckResult]:
    rng = ctx.rng(6)
    G1 = models.random_set_function(rng, scale=0.5)
    G2 = models.random_set_function(rng, scale=0.5)
    probes = _probes(rng, range(6), 2)
    f = lambda X: 0.4 * np.sin(3 * X[..., 0]) + 0.1
    g = lambda X: 0.3 * np.cos(2 * X[..., 0]) - 0.2
    ef, eg = coherent_state(f), coherent_state(g)
    K1, K2 = k_transform_fn(G1), k_transform_fn(G2)
    Kstar = k_transform_fn(star_convolution(G1, G2))
    roundtrip = k_inverse_fn(k_transform_fn(G1))
    rscoh_l = star_convolution(ef, eg)
    rscoh_r = coherent_state(lambda X: f(X) + g(X) + f(X) * g(X))
    add_l, add_r = ast_convolution(ef, eg), coherent_state(lambda X: f(X) + g(X))
    dist_l = ef * ast_convolution(G1, G2)
    dist_r = ast_convolution(ef * G1, ef * G2)
    errs = {"k_roundtrip": 0.0, "multiplicativity": 0.0, "star_coherent": 0.0,
            "ast_coherent": 0.0, "ast_distributive": 0.0}
    for eta in probes:
        errs["k_roundtrip"] = max(errs["k_roundtrip"], _rel(roundtrip(eta), G1(eta)))
        errs["multiplicativity"] = max(errs["multiplicativity"], _rel(Kstar(eta), K1(eta) * K2(eta)))
        errs["star_coherent"] = max(errs["star_coherent"], _rel(rscoh_l(eta), rscoh_r(eta)))
        errs["ast_coherent"] = max(errs["ast_coherent"], _rel(add_l(eta), add_r(eta)))
        errs["ast_distributive"] = max(errs["ast_distributive"], _rel(dist_l(eta), dist_r(eta)))
    return [CheckResult(f"algebra_{k}", v <= 1e-12, v, 1e-12, "configuration algebra") for k, v in errs.items()]


# 7

def _separable_H(a: float, b: float) -> TripleFunction:
    return TripleFunction(points_func=lambda A, B, C: np.full(A.shape[0], a ** A.shape[1] * b ** B.shape[1]),
                          bound=Bound(1.0, max(a, b)))


def _random_H(rng) -> TripleFunction:
    c1, c2, c3 = rng.uniform(-0.4, 0.4, 3)
    d1, d2, d3 = rng.uniform(-0.3, 0.3, 3)
    om = rng.uniform(0.1, 0.5, 2)

    def pf(A, B, C):
        e = lambda Z, c, d: np.prod(c + d * Z[..., 0], axis=1) if Z.shape[1] else np.ones(Z.shape[0])
        return e(A, c1, d1) * e(B, c2, d2) * e(C, 1.0 + c3, d3) * math.cos(om[0] * A.shape[1] - om[1] * B.shape[1])

    P = lambda c, d: abs(c) + 2 * abs(d)
    return TripleFunction(points_func=pf, bound=Bound(1.0, max(P(c1, d1), P(c2, d2)) * P(1.0 + c3, d3)))


def minlos_identity(ctx: VerifyContext) -> list[CheckResult]:
    rng = ctx.rng(7)
    out = []
    window = Window((0.0,), (2.0,))
    spec = LPIntegralSpec(window, 1.0, 10, Quadrature(8, 4096))
    a, b = 0.3, 0.5
    res = minlos_check(_separable_H(a, b), spec)
    closed = math.exp((a + b) * window.volume)
    sep_err = max(abs(res.lhs - closed), abs(res.rhs - closed))
    sep_tol = res.lhs_tail + 1e-8
    out.append(CheckResult("minlos_separable", sep_err <= sep_tol and sep_err / closed <= 1e-5, sep_err, sep_tol,
                           "Minlos identity", {"lhs": res.lhs, "rhs": res.rhs, "closed": closed}))
    worst = 0.0
    tol = math.inf
    for _ in range(3):
        r = minlos_check(_random_H(rng), spec)
        gap = abs(r.lhs - r.rhs)
        t = r.lhs_tail + r.rhs_tail + 1e-8
        worst, tol = max(worst, gap), min(tol, t)
    out.append(CheckResult("minlos_random", worst <= tol, worst, tol, "Minlos identity"))
    return out


# 8

def bogolyubov(ctx: VerifyContext) -> list[CheckResult]:
    rng = ctx.rng(8)
    out = []
    p = ModelParams(1.0, 2.0)
    window = Window((0.0,), (1.0,))
    spec = LPIntegralSpec(window, 1.0, 10, Quadrature(12, 1 << 13))
    A1, A2, w = 1.0, 3.0, 0.5
    k0 = models.mixed_poisson(A1, A2, w)
    B0 = lambda th: w * math.exp(A1 * th.mean) + (1 - w) * math.exp(A2 * th.mean)
    thetas = [models.bump(window, 0.5, 0.5, 0.2), models.bump(window, -0.4, 0.3, 0.3),
              models.bump(window, 0.3, 0.8, 0.5)]
    worst = 0.0
    for th in thetas:
        for t in (0.3, 1.0):
            closed = bogolyubov_evolve(B0, th, t, p)
            quad = bogolyubov_functional(evolve_correlation(k0, t, p), th, spec).value
            worst = max(worst, abs(closed - quad) / abs(closed))
    out.append(CheckResult("bogolyubov_closed_vs_quadrature", worst <= 1e-4, worst, 1e-4, "Bogolyubov functional"))

    rho = ctx.invariant_intensity(p)
    Binv = lambda th: math.exp(rho * th.mean)
    fix = 0.0
    for th in thetas:
        for t in (0.5, 2.0, 10.0):
            fix = max(fix, abs(bogolyubov_evolve(Binv, th, t, p) - math.exp(p.rho_inv * th.mean)))
    out.append(CheckResult("bogolyubov_invariant_fixed", fix <= 1e-10, fix, 1e-10, "invariant Bogolyubov functional"))

    draws = [models.random_theta(rng, Window((0.0,), (4.0,)), 2.0) for _ in range(50)]
    excess = -math.inf
    for alpha in (p.rho_inv, 1.5 * p.rho_inv):
        for t in (0.5, 2.0):
            bc = bogolyubov_ball_check(B0, draws, t, p, alpha)
            excess = max(excess, bc.norm_t / bc.norm_0 - 1.0)
    out.append(CheckResult("bogolyubov_ball", excess <= 0.0, excess, 0.0, "balls of E^alpha preserved"))
    return out


# 9

def simulation(ctx: VerifyContext) -> list[CheckResult]:
    p = ModelParams(1.0, 2.0)
    window = Window((0.0,), (10.0,), "periodic")
    out = []
    target1 = 2.0 - math.exp(-1.0)
    ens = {}
    for offset, scheme in enumerate(("exact", "gillespie")):
        cfg = SimConfig(p, window, PoissonInitial(1.0), 1.0, ctx.replicas, ctx.seed + offset, scheme)
        ens[scheme] = simulate(cfg, ctx.threads)
    for scheme, e in ens.items():
        for j, target in ((1, target1), (2, target1 ** 2)):
            est, se = factorial_moments(e, j)
            z = abs(est - target) / se
            out.append(CheckResult(f"sim_{scheme}_factorial_{j}", z <= 3.0, z, 3.0, "measure decomposition",
                                   {"estimate": est, "se": se, "target": target}))
    ca, cb = ens["exact"].counts.astype(float), ens["gillespie"].counts.astype(float)
    z_mean = abs(ca.mean() - cb.mean()) / math.sqrt(ca.var(ddof=1) / len(ca) + cb.var(ddof=1) / len(cb))
    z_var = abs(ca.var(ddof=1) - cb.var(ddof=1)) / math.sqrt(_var_se(ca) ** 2 + _var_se(cb) ** 2)
    out.append(CheckResult("sim_samplers_mean", z_mean <= 3.0, z_mean, 3.0, "two samplers agree"))
    out.append(CheckResult("sim_samplers_variance", z_var <= 3.0, z_var, 3.0, "two samplers agree"))
    bins = gap_estimator(ens["exact"], np.linspace(0.0, 5.0, 11))
    zmax = max(abs(b.value) / b.std_error for b in bins if not b.empty)
    out.append(CheckResult("sim_gap_zero", zmax <= 3.0, zmax, 3.0, "Poissonian dynamics has zero gap"))
    return out


def _var_se(x: np.ndarray) -> float:
    n = len(x)
    c = x - x.mean()
    m2, m4 = (c ** 2).mean(), (c ** 4).mean()
    return math.sqrt(max(m4 - m2 ** 2 * (n - 3) / (n - 1), 0.0) / n)


# 10

def mean_ergodic(ctx: VerifyContext) -> list[CheckResult]:
    rng = ctx.rng(10)
    p = ModelParams(1.0, 2.0)
    window = Window((0.0,), (1.0,))
    spec = LPIntegralSpec(window, 1.0, 3, Quadrature(24, 1 << 12))
    g = lambda X: 0.5 + 0.3 * np.sin(3.0 * X[..., 0])
    eg = coherent_state(g)
    G = SetFunction(points_func=lambda X: eg.on_points(X) * (X.shape[1] <= 3), name="G_bs")
    target = mean_ergodic_limit(G, p, spec)
    probes = _probes(rng, range(4), 2)
    ts = (5.0, 10.0, 20.0, 40.0)
    norms = []
    for t in ts:
        avg = mean_ergodic_average(G, t, p, spec)
        norms.append(max(abs(avg(eta) - target(eta)) for eta in probes))
    slope = fit_power(ts, norms)
    err = abs(slope + 1.0)
    return [CheckResult("mean_ergodic_rate", err <= 0.15, err, 0.15, "mean-ergodic average",
                        {"slope": slope, "norms": norms})]


CRITERIA: dict[str, Callable[[VerifyContext], list[CheckResult]]] = {
    "poisson_preservation": poisson_preservation,
    "semigroup_law": semigroup_law,
    "generator_resolvent": generator_resolvent,
    "invariance_ergodic": invariance_ergodic,
    "decay_of_correlations": decay_of_correlations,
    "algebra_identities": algebra_identities,
    "minlos_identity": minlos_identity,
    "bogolyubov": bogolyubov,
    "simulation": simulation,
    "mean_ergodic": mean_ergodic,
}


def run_checks(names=None, ctx: VerifyContext | None = None) -> list[CheckResult]:
    ctx = ctx or VerifyContext()
    names = list(CRITERIA) if names is None else list(names)
    unknown = [n for n in names if n not in CRITERIA]
    if unknown:
        raise KeyError(f"unknown checks: {unknown}")
    results = []
    for name in names:
        for r in CRITERIA[name](ctx):
            r.detail.setdefault("criterion", name)
            results.append(r)
    return results
