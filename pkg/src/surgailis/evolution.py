"""Closed-form dynamics of the death-immigration process.

Correlation functions evolve by an exact subset sum, quasi-observables by a
Lebesgue-Poisson integral, and both resolvents reduce to Euler beta weights.
Around these sit the invariant measure, the ergodic and decay-of-correlation
bounds, Ursell and Bogolyubov evolutions, and the time-averaged semigroup.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import betaln

from .config_core import (
    N_MAX,
    Bound,
    Configuration,
    SetFunction,
    _check_cap,
    _sized_splits,
    coherent_state,
    empirical_sup,
)
from .errors import DomainError, DuplicatePoint, PreconditionViolated
from .lp_integration import (
    LPIntegralSpec,
    LPResult,
    Window,
    integrate_levels,
    lp_integrate,
    shifted_integrand,
    tail_bound,
)


@dataclass(frozen=True)
class ModelParams:
    """Death rate ``m``, immigration intensity ``sigma`` and dimension ``d``."""

    m: float
    sigma: float
    d: int = 1

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError("death rate m must be positive")
        if not self.sigma >= 0:
            raise DomainError("immigration intensity sigma must be non-negative")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError("dimension d must be a positive integer")

    @property
    def rho_inv(self) -> float:
        """Intensity ``sigma / m`` of the invariant Poisson measure."""
        return self.sigma / self.m

    def immigrant_intensity(self, t: float) -> float:
        """``z_t = (sigma/m)(1 - e^{-mt})``."""
        return -self.rho_inv * math.expm1(-self.m * t)

    def survival(self, t: float) -> float:
        return math.exp(-self.m * t)


@dataclass(frozen=True)
class NormContext:
    C: float
    n_probe: int = 5
    probes: tuple = field(default=(), repr=False)

    def require_ergodic(self, params: ModelParams) -> None:
        if not self.C > params.rho_inv:
            raise DomainError(f"need C > sigma/m = {params.rho_inv}, got C = {self.C}")


# generators

def _point_rule(window: Window, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre rule for single points: nodes (Q, d), weights (Q,)."""
    x, w = np.polynomial.legendre.leggauss(p)
    axes, wts = [], []
    for a, b in zip(window.lower, window.upper):
        axes.append(0.5 * (b - a) * x + 0.5 * (b + a))
        wts.append(0.5 * (b - a) * w)
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, window.d)
    weights = np.prod(np.stack(np.meshgrid(*wts, indexing="ij"), axis=-1).reshape(-1, window.d), axis=1)
    return nodes, weights


def apply_generator_symbol(G: SetFunction, params: ModelParams, window: Window,
                           points_per_dim: int = 32) -> SetFunction:
    """``(LG)(eta) = -m|eta| G(eta) + sigma int_W G(eta + x) dx``.

    The integral runs over ``window`` only, so ``G(eta + x)`` must vanish for
    ``x`` outside it.
    """
    nodes, weights = _point_rule(window, points_per_dim)

    def pf(X):
        B, k, d = X.shape
        inner = shifted_integrand(G, X)(nodes[:, None, :])  # (Q, B)
        return -params.m * k * G.on_points(X) + params.sigma * (weights @ inner)

    return SetFunction(points_func=pf, name=f"L{G.name}")


def apply_dual_generator(k: SetFunction, params: ModelParams) -> SetFunction:
    """``(L*k)(eta) = -m|eta| k(eta) + sigma sum_{x in eta} k(eta - x)``."""
    def pf(X):
        n = X.shape[1]
        out = -params.m * n * k.on_points(X)
        cols = np.arange(n)
        for i in range(n):
            out += params.sigma * k.on_points(X[:, cols != i])
        return out

    return SetFunction(points_func=pf, name=f"L*{k.name}")


# correlation functions

def evolve_correlation(k0: SetFunction, t: float, params: ModelParams, form: str = "alt") -> SetFunction:
    """Correlation function at time ``t`` started from ``k0``.

    ``form="direct"``: ``e^{-tm|eta|} (e(a) * k0)(eta)`` with ``a = (sigma/m)(e^{tm} - 1)``.
    ``form="alt"``:    ``(e(z_t) * (e(e^{-tm}) k0))(eta)`` with ``z_t = (sigma/m)(1 - e^{-tm})``.
    The two agree exactly; ``alt`` avoids the growing factor ``e^{tm}``.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    if form not in ("alt", "direct"):
        raise ValueError(f"unknown form {form!r}")
    if t == 0:
        return k0
    m, rho = params.m, params.rho_inv
    decay = math.exp(-t * m)
    zt = params.immigrant_intensity(t)
    a = rho * math.expm1(t * m) if form == "direct" else 0.0

    def pf(X):
        n = X.shape[1]
        _check_cap(n, N_MAX)
        total = np.zeros(X.shape[0])
        for idx_in, _, j in _sized_splits(n):
            if form == "alt":
                w = zt ** (n - j) * decay ** j
            else:
                w = a ** (n - j)
            if w:
                total += w * k0.on_points(X[:, idx_in])
        return total if form == "alt" else decay ** n * total

    bound = None
    if k0.bound is not None:
        bound = Bound(k0.bound.norm, k0.bound.C * decay + zt)
    return SetFunction(points_func=pf, bound=bound, name=f"T*({t:g}){k0.name}")


@dataclass(frozen=True)
class SubPoissonBound:
    """``|k_t(eta)| <= k0_norm * max(C, sigma/m)^|eta|`` and its time-resolved form."""

    k0_norm: float
    C: float
    params: ModelParams

    def __call__(self, t: float, n: int) -> float:
        return self.k0_norm * max(self.C, self.params.rho_inv) ** n

    def tight(self, t: float, n: int) -> float:
        p = self.params
        return self.k0_norm * ((self.C - p.rho_inv) * math.exp(-p.m * t) + p.rho_inv) ** n


def sub_poisson_bound(k0_norm: float, C: float, params: ModelParams) -> SubPoissonBound:
    return SubPoissonBound(float(k0_norm), float(C), params)


def invariant_correlation(params: ModelParams) -> SetFunction:
    """``k_inv(eta) = (sigma/m)^|eta|``, the Poisson measure of intensity sigma/m."""
    k = coherent_state(params.rho_inv)
    k.name = "k_inv"
    return k


# quasi-observables

def semigroup_quasi(G: SetFunction, t: float, params: ModelParams, spec: LPIntegralSpec) -> SetFunction:
    """``(T(t)G)(eta) = e^{-tm|eta|} int G(eta + xi) e(z_t, xi) dlambda(xi)``.

    The integral uses ``spec``'s window, truncation and method; ``spec.z`` is
    not used (the measure is fixed to activity 1).
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    zt = params.immigrant_intensity(t)
    N = spec.truncation
    c = np.array([zt ** n / math.factorial(n) for n in range(N + 1)])

    def pf(X):
        B, k, _ = X.shape
        if zt == 0.0:
            vals = G.on_points(X)
        else:
            lv, _ = integrate_levels(shifted_integrand(G, X), spec.window, N, spec.method, batch=B)
            vals = c @ lv
        return math.exp(-t * params.m * k) * vals

    bound = None
    if G.bound is not None:
        bound = Bound(G.bound.norm * math.exp(G.bound.C * zt * spec.window.volume),
                      G.bound.C * math.exp(-t * params.m))
    return SetFunction(points_func=pf, bound=bound, name=f"T({t:g}){G.name}")


# resolvents

@lru_cache(maxsize=4096)
def _beta(x: float, y: float) -> float:
    return math.exp(betaln(x, y))


def resolvent_dual(k: SetFunction, z: float, params: ModelParams) -> SetFunction:
    """``(R_z k)(eta) = (1/m) sum_{xi subset eta} rho^|xi| B(z/m + |eta| - |xi|, |xi| + 1) k(eta - xi)``."""
    if not z > 0:
        raise DomainError("resolvent needs real z > 0")
    m, rho = params.m, params.rho_inv

    def pf(X):
        n = X.shape[1]
        _check_cap(n, N_MAX)
        total = np.zeros(X.shape[0])
        # idx_in indexes eta - xi (the argument of k); j = |eta - xi|
        for idx_in, _, j in _sized_splits(n):
            w = rho ** (n - j) * _beta(z / m + j, n - j + 1)
            if w:
                total += w * k.on_points(X[:, idx_in])
        return total / m

    return SetFunction(points_func=pf, name=f"R*({z:g}){k.name}")


def resolvent_quasi(G: SetFunction, z: float, params: ModelParams, spec: LPIntegralSpec) -> SetFunction:
    """``(R_z G)(eta) = (1/m) int G(eta + xi) rho^|xi| B(z/m + |eta|, |xi| + 1) dlambda(xi)``."""
    if not z > 0:
        raise DomainError("resolvent needs real z > 0")
    m, rho = params.m, params.rho_inv
    N = spec.truncation

    def pf(X):
        B, k, _ = X.shape
        lv, _ = integrate_levels(shifted_integrand(G, X), spec.window, N, spec.method, batch=B)
        c = np.array([rho ** n * _beta(z / m + k, n + 1) / math.factorial(n) for n in range(N + 1)])
        return (c @ lv) / m

    return SetFunction(points_func=pf, name=f"R({z:g}){G.name}")


# ergodicity

def fit_decay_rate(ts, values) -> float:
    """Rate ``r`` of a least-squares fit ``values ~ c e^{-r t}``."""
    slope, _ = np.polyfit(np.asarray(ts, dtype=float), np.log(np.asarray(values, dtype=float)), 1)
    return float(-slope)


def fit_power(ts, values) -> float:
    """Exponent ``p`` of a least-squares fit ``values ~ c t^p``."""
    slope, _ = np.polyfit(np.log(np.asarray(ts, dtype=float)), np.log(np.asarray(values, dtype=float)), 1)
    return float(slope)


@dataclass
class ErgodicBound:
    """Exponential relaxation bound ``||k_t - k_inv||_C <= norm e^{-mt} / (1 - sigma/(Cm))``.

    ``initial_norm`` is either declared or the empirical weighted sup of
    ``k0 - k_inv`` over the probes and all their subsets.  ``empirical(t)``
    is the weighted sup of ``k_t - k_inv`` over the probes.
    """

    k0: SetFunction
    C: float
    params: ModelParams
    probes: Sequence[Configuration]
    initial_norm: float

    def __call__(self, t: float) -> float:
        p = self.params
        return self.initial_norm * math.exp(-p.m * t) / (1.0 - p.rho_inv / self.C)

    def empirical(self, t: float) -> float:
        diff = evolve_correlation(self.k0, t, self.params) - invariant_correlation(self.params)
        return empirical_sup(diff, self.probes, self.C, closed=False)


def ergodic_bound(k0: SetFunction, C: float, params: ModelParams, probes: Sequence[Configuration] = (),
                  k0_norm: float | None = None) -> ErgodicBound:
    if not C > params.rho_inv:
        raise DomainError(f"need C > sigma/m = {params.rho_inv}, got C = {C}")
    if k0_norm is None:
        if not probes:
            raise ValueError("give k0_norm or a probe set to estimate it")
        k0_norm = empirical_sup(k0 - invariant_correlation(params), probes, C, closed=True)
    return ErgodicBound(k0, float(C), params, list(probes), float(k0_norm))


def projection_density(k: SetFunction, window: Window, spec: LPIntegralSpec) -> SetFunction:
    """Density of the window projection w.r.t. the Lebesgue-Poisson measure.

    ``(eta) -> int_{Gamma_W} (-1)^|xi| k(eta + xi) dlambda(xi)``, an
    alternating series truncated at ``spec.truncation``.
    """
    N = spec.truncation
    c = np.array([(-1.0) ** n / math.factorial(n) for n in range(N + 1)])
    if k.bound is None:
        warnings.warn(f"{k.name} has no declared bound; projection truncation is not certified",
                      stacklevel=2)

    def pf(X):
        lv, _ = integrate_levels(shifted_integrand(k, X), window, N, spec.method, batch=X.shape[0])
        return c @ lv

    return SetFunction(points_func=pf, name=f"dmu^W/dlambda[{k.name}]")


def projection_tail(k: SetFunction, window: Window, N: int, size: int) -> float | None:
    """Truncation tail of ``projection_density`` at a configuration of ``size`` points."""
    if k.bound is None:
        return None
    return tail_bound(k.bound.norm * k.bound.C ** size, k.bound.C, 1.0, window.volume, N)


def projection_ergodic_bound(t: float, C: float, params: ModelParams, window: Window,
                             initial_norm: float = 1.0) -> float:
    """Bound on the ``K_C`` distance between projected densities at ``t`` and at equilibrium."""
    if not C > params.rho_inv:
        raise DomainError(f"need C > sigma/m = {params.rho_inv}, got C = {C}")
    A = 1.0 / (1.0 - params.rho_inv / C)
    return initial_norm * A * math.exp(-t * params.m) * math.exp(C * window.volume)


# decay of correlations

def correlation_gap(k: SetFunction, eta: Configuration, y) -> float:
    """``v(eta, y) = k(eta + y) - k(eta) k({y})``."""
    if y in eta:
        raise DuplicatePoint("y must not belong to eta")
    single = Configuration([np.asarray(y, dtype=float).reshape(-1)], d=eta.d)
    return k(eta | single) - k(eta) * k(single)


def gap_function(k: SetFunction, y) -> SetFunction:
    """``eta -> v(eta, y)`` for a fixed point ``y``."""
    y = np.asarray(y, dtype=float).reshape(1, 1, -1)

    def pf(X):
        Y = np.broadcast_to(y, (X.shape[0], 1, X.shape[2]))
        return k.on_points(np.concatenate([X, Y], axis=1)) - k.on_points(X) * k.on_points(Y)

    return SetFunction(points_func=pf, name=f"v[{k.name}]")


def evolve_gap(v0: SetFunction, t: float, params: ModelParams) -> SetFunction:
    """``v_t(eta) = e^{-tm(|eta|+1)} sum_{xi subset eta} a^{|eta - xi|} v0(xi)``, ``a = (sigma/m)(e^{tm}-1)``.

    Evaluated as ``e^{-tm} sum z_t^{|eta - xi|} e^{-tm|xi|} v0(xi)``, which is the same sum.
    """
    decay = math.exp(-t * params.m)
    zt = params.immigrant_intensity(t)

    def pf(X):
        n = X.shape[1]
        total = np.zeros(X.shape[0])
        for idx_in, _, j in _sized_splits(n):
            w = zt ** (n - j) * decay ** j
            if w:
                total += w * v0.on_points(X[:, idx_in])
        return decay * total

    return SetFunction(points_func=pf, name=f"v_{t:g}")


def gap_norm_bound(a_y: float, t: float, params: ModelParams) -> float:
    return a_y * math.exp(-t * params.m)


# Ursell functions

def evolve_ursell(u0: SetFunction, t: float, params: ModelParams) -> SetFunction:
    """``u_t(eta) = e^{-tm|eta|} u0(eta) + 1{|eta| = 1} z_t``."""
    zt = params.immigrant_intensity(t)

    def pf(X):
        n = X.shape[1]
        u = u0.on_points(X)
        if n == 0:
            if np.any(np.abs(u) > 1e-12):
                raise PreconditionViolated("Ursell functions need u0(empty) = 0")
            return np.zeros(X.shape[0])
        return math.exp(-t * params.m * n) * u + (zt if n == 1 else 0.0)

    return SetFunction(points_func=pf, name=f"u_{t:g}")


# Bogolyubov functionals

@dataclass(frozen=True)
class Theta:
    """Integrable function on R^d supported in ``window``.

    ``func`` is vectorised: ``(..., d)`` points to ``(...)`` values.  ``mean``
    (the integral) and ``l1`` are computed by quadrature unless supplied.
    """

    func: Callable[[np.ndarray], np.ndarray]
    window: Window
    mean: float | None = None
    l1: float | None = None
    sup: float | None = None

    def __post_init__(self):
        if self.mean is None or self.l1 is None:
            nodes, weights = _point_rule(self.window, 64 if self.window.d == 1 else 24)
            vals = np.asarray(self.func(nodes), dtype=float)
            if self.mean is None:
                object.__setattr__(self, "mean", float(weights @ vals))
            if self.l1 is None:
                object.__setattr__(self, "l1", float(weights @ np.abs(vals)))

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        inside = self.window.contains(X)
        return np.where(inside, self.func(X), 0.0)

    def scaled(self, c: float) -> "Theta":
        f = self.func
        sup = None if self.sup is None else abs(c) * self.sup
        return Theta(lambda X: c * f(X), self.window, c * self.mean, abs(c) * self.l1, sup)


def bogolyubov_evolve(B0: Callable[[Theta], float], theta: Theta, t: float,
                      params: ModelParams) -> float:
    """``B_t(theta) = exp{z_t <theta>} B_0(e^{-tm} theta)``."""
    zt = params.immigrant_intensity(t)
    return math.exp(zt * theta.mean) * B0(theta.scaled(math.exp(-t * params.m)))


def bogolyubov_functional(k: SetFunction, theta: Theta, spec: LPIntegralSpec) -> LPResult:
    """``B(theta) = int e(theta, eta) k(eta) dlambda(eta)`` over the support window of ``theta``."""
    spec = LPIntegralSpec(theta.window, 1.0, spec.truncation, spec.method)
    e_theta = coherent_state(theta, sup=theta.sup)
    return lp_integrate(e_theta * k, spec)


def poisson_bogolyubov(A: float) -> Callable[[Theta], float]:
    """Bogolyubov functional of the Poisson measure with intensity ``A``."""
    return lambda theta: math.exp(A * theta.mean)


@dataclass(frozen=True)
class BallCheck:
    norm_t: float
    norm_0: float
    alpha: float

    @property
    def holds(self) -> bool:
        return self.norm_t <= self.norm_0 * (1 + 1e-12)


def bogolyubov_ball_check(B0, thetas: Sequence[Theta], t: float, params: ModelParams,
                          alpha: float) -> BallCheck:
    """Sampled ``||B_t||_alpha`` against the sampled ``||B_0||_alpha``.

    ``||A||_alpha = sup |A(theta)| e^{-alpha ||theta||_1}``.  The ``B_0``
    estimate includes the rescaled arguments ``e^{-tm} theta`` that ``B_t``
    actually evaluates, so the comparison is between like samples.
    """
    decay = math.exp(-t * params.m)
    norm_t = max(abs(bogolyubov_evolve(B0, th, t, params)) * math.exp(-alpha * th.l1) for th in thetas)
    pool = list(thetas) + [th.scaled(decay) for th in thetas]
    norm_0 = max(abs(B0(th)) * math.exp(-alpha * th.l1) for th in pool)
    return BallCheck(norm_t, norm_0, alpha)


# mean-ergodic averages

def _simpson(y: np.ndarray, h: float) -> np.ndarray:
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum(axis=0) + 2.0 * y[2:-1:2].sum(axis=0))


def mean_ergodic_average(G: SetFunction, t: float, params: ModelParams, spec: LPIntegralSpec,
                         time_steps: int = 64, tol: float = 1e-6) -> SetFunction:
    """``(1/t) int_0^t T(s)G ds`` by composite Simpson in time.

    ``T(s)G(eta) = sum_n e^{-sm|eta|} z_s^n / n! I_n(eta)`` with
    ``I_n(eta) = int_{W^n} G(eta + xi) dxi`` independent of ``s``, so the
    space integrals are done once and only the scalar weights are
    time-integrated.  Steps double until a halving moves the result by less
    than ``tol``.
    """
    if not t > 0:
        raise DomainError("averaging time must be positive")
    N = spec.truncation
    m, rho = params.m, params.rho_inv
    fact = np.array([math.factorial(n) for n in range(N + 1)], dtype=float)

    def weights(k: int, steps: int) -> np.ndarray:
        s = np.linspace(0.0, t, steps + 1)
        zs = -rho * np.expm1(-m * s)
        y = np.exp(-m * k * s)[:, None] * zs[:, None] ** np.arange(N + 1) / fact
        return _simpson(y, t / steps) / t

    def pf(X):
        B, k, _ = X.shape
        lv, _ = integrate_levels(shifted_integrand(G, X), spec.window, N, spec.method, batch=B)
        steps = max(2, time_steps + time_steps % 2)
        prev = weights(k, steps) @ lv
        while True:
            steps *= 2
            cur = weights(k, steps) @ lv
            if np.all(np.abs(cur - prev) < tol) or steps > 1 << 20:
                return cur
            prev = cur

    return SetFunction(points_func=pf, name=f"avg_{t:g}{G.name}")


def mean_ergodic_limit(G: SetFunction, params: ModelParams, spec: LPIntegralSpec) -> SetFunction:
    """``1{eta = empty} * int G k_inv dlambda``."""
    spec1 = LPIntegralSpec(spec.window, 1.0, spec.truncation, spec.method)
    value = lp_integrate(G * invariant_correlation(params), spec1).value

    def pf(X):
        return np.full(X.shape[0], value if X.shape[1] == 0 else 0.0)

    return SetFunction(points_func=pf, name="avg_inf")
