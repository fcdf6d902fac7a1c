"""Lebesgue-Poisson integration over configurations in a bounded window.

``lambda_z = sum_n z^n/n! * Lebesgue^n`` is integrated level by level up to a
truncation ``N``.  Each level ``int_{W^n} G(x_1..x_n) dx`` is computed either by
a tensor Gauss-Legendre grid (d = 1) or by plain Monte Carlo.  Results always
carry the truncation tail bound implied by the integrand's declared growth
bound, or ``None`` when the integrand declares none.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config_core import Bound, Configuration, SetFunction, _sized_splits, star_convolution
from .errors import TruncationUnsound

_CHUNK = 1 << 15  # rows per vectorised evaluation


@dataclass(frozen=True)
class Window:
    """Axis-aligned box with a boundary mode ("plain" or "periodic")."""

    lower: tuple
    upper: tuple
    boundary: str = "plain"

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper must have the same positive length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("window needs lower < upper in every coordinate")
        if self.boundary not in ("plain", "periodic"):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def lengths(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.all((X >= self.lower) & (X <= self.upper), axis=-1)

    def uniform(self, rng: np.random.Generator, size) -> np.ndarray:
        size = (size,) if np.isscalar(size) else tuple(size)
        return rng.uniform(self.lower, self.upper, size=size + (self.d,))

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "boundary": self.boundary}


@dataclass(frozen=True)
class Quadrature:
    """Tensor Gauss-Legendre rule; level ``n`` uses ``min(points_per_dim, budget**(1/n))`` nodes per axis."""

    points_per_dim: int = 16
    budget: int = 1 << 15

    def nodes_for_level(self, n: int) -> int:
        if n == 0:
            return 1
        p = int(math.floor(self.budget ** (1.0 / n) + 1e-9))
        return max(2, min(self.points_per_dim, p))


@dataclass(frozen=True)
class MonteCarlo:
    samples: int = 20000
    seed: int = 0


@dataclass(frozen=True)
class LPIntegralSpec:
    window: Window
    z: float = 1.0
    truncation: int = 10
    method: Quadrature | MonteCarlo = field(default_factory=Quadrature)

    def __post_init__(self):
        if self.z <= 0:
            raise ValueError("activity z must be positive")
        if self.truncation < 0:
            raise ValueError("truncation must be >= 0")
        if isinstance(self.method, Quadrature):
            if self.window.d != 1:
                raise ValueError("quadrature is restricted to d = 1; use MonteCarlo")
            if self.truncation > 12:
                raise ValueError("quadrature truncation must be <= 12")


@dataclass(frozen=True)
class LPResult:
    """Integral value with its truncation tail bound (``None`` if unknown).

    Unpacks as ``value, tail_bound``.  ``std_error`` is zero for quadrature.
    """

    value: float
    tail_bound: float | None
    std_error: float = 0.0
    levels: tuple = ()

    def __iter__(self):
        return iter((self.value, self.tail_bound))


def tail_bound(norm: float, C: float, z: float, volume: float, N: int) -> float:
    """``norm * sum_{n>N} (C z V)^n / n!  <=  norm (CzV)^{N+1}/(N+1)! e^{CzV}``."""
    a = C * abs(z) * volume
    return norm * a ** (N + 1) / math.factorial(N + 1) * math.exp(a)


# level machinery

def _gauss_nodes(window: Window, p: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(p)
    a, b = window.lower[0], window.upper[0]
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def level_rule(window: Window, n: int, method, chunk: int = _CHUNK):
    """Yield ``(nodes (Q, n, d), weights (Q,))`` chunks for ``int_{W^n} . dx``.

    Monte Carlo weights are ``|W|^n / samples``; each level draws from its
    own stream keyed by ``(seed, n)`` so levels are reproducible in isolation.
    """
    d = window.d
    if n == 0:
        yield np.empty((1, 0, d)), np.ones(1)
        return
    if isinstance(method, Quadrature):
        p = method.nodes_for_level(n)
        x, w = _gauss_nodes(window, p)
        total = p ** n
        for start in range(0, total, chunk):
            idx = np.unravel_index(np.arange(start, min(start + chunk, total)), (p,) * n)
            nodes = np.stack([x[i] for i in idx], axis=1)[..., None]
            weights = np.prod(np.stack([w[i] for i in idx], axis=1), axis=1)
            yield nodes, weights
    else:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([method.seed, n])))
        scale = window.volume ** n / method.samples
        for start in range(0, method.samples, chunk):
            q = min(chunk, method.samples - start)
            yield window.uniform(rng, (q, n)), np.full(q, scale)


def integrate_levels(integrand: Callable[[np.ndarray], np.ndarray], window: Window, N: int,
                     method, batch: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Per-level integrals ``int_{W^n} f`` for ``n = 0..N`` and their MC standard errors.

    ``integrand`` maps nodes ``(Q, n, d)`` to ``(Q,)`` or ``(Q, batch)``.
    """
    chunk = max(1, _CHUNK // max(batch, 1))
    vals = np.zeros((N + 1, batch))
    errs = np.zeros((N + 1, batch))
    for n in range(N + 1):
        sums = np.zeros(batch)
        sq = np.zeros(batch)
        count = 0
        for nodes, weights in level_rule(window, n, method, chunk):
            f = np.asarray(integrand(nodes), dtype=float).reshape(len(weights), -1)
            wf = weights[:, None] * f
            sums += wf.sum(axis=0)
            sq += (wf ** 2).sum(axis=0)
            count += len(weights)
        vals[n] = sums
        if isinstance(method, MonteCarlo) and n > 0 and count > 1:
            # wf = scale * f, so var(mean) from the raw second moment
            mean = sums / count
            var = (sq / count - mean ** 2) * count / (count - 1)
            errs[n] = np.sqrt(np.maximum(var, 0.0) * count)
    return vals, errs


def activity_weights(z: float, N: int) -> np.ndarray:
    return np.array([z ** n / math.factorial(n) for n in range(N + 1)])


def shifted_integrand(G: SetFunction, X: np.ndarray, factor: Callable[[np.ndarray], np.ndarray] | None = None):
    """Integrand ``xi -> G(eta_b + xi) * factor(xi)`` for a batch of ``eta_b`` (rows of ``X``)."""
    X = np.asarray(X, dtype=float)
    B, k, d = X.shape

    def f(Y):
        Q, n, _ = Y.shape
        Z = np.concatenate([np.broadcast_to(X[:, None], (B, Q, k, d)),
                            np.broadcast_to(Y[None], (B, Q, n, d))], axis=2)
        vals = G.on_points(Z.reshape(B * Q, k + n, d)).reshape(B, Q).T
        if factor is not None:
            vals = vals * factor(Y)[:, None]
        return vals

    return f


def lp_integrate(G: SetFunction, spec: LPIntegralSpec, certify: bool = False) -> LPResult:
    """``sum_{n<=N} z^n/n! int_{W^n} G`` with the certified tail bound when ``G`` declares one."""
    vals, errs = integrate_levels(G.on_points, spec.window, spec.truncation, spec.method)
    c = activity_weights(spec.z, spec.truncation)
    levels = c * vals[:, 0]
    if G.bound is not None:
        tail = tail_bound(G.bound.norm, G.bound.C, spec.z, spec.window.volume, spec.truncation)
    elif certify:
        raise TruncationUnsound(f"{G.name} has no declared bound; tail cannot be certified")
    else:
        tail = None
    se = float(np.sqrt(np.sum((c * errs[:, 0]) ** 2)))
    return LPResult(float(levels.sum()), tail, se, tuple(float(v) for v in levels))


# Minlos identity

class TripleFunction:
    """Function ``H(xi, eta, zeta)`` of three configurations.

    ``points_func(A, B, C)`` is the batched form on arrays ``(Q, a, d)``,
    ``(Q, b, d)``, ``(Q, c, d)``.  ``bound`` asserts
    ``|H(xi, eta, zeta)| <= norm * C^(|xi| + |eta|)``.
    """

    def __init__(self, func=None, points_func=None, bound: Bound | None = None):
        if func is None and points_func is None:
            raise ValueError("need func or points_func")
        self._func = func
        self._points_func = points_func
        self.bound = Bound(*bound) if bound is not None else None

    def __call__(self, xi, eta, zeta) -> float:
        if self._func is not None:
            return float(self._func(xi, eta, zeta))
        return float(self.on_points(xi.array[None], eta.array[None], zeta.array[None])[0])

    def on_points(self, A, B, C) -> np.ndarray:
        if self._points_func is not None:
            return np.broadcast_to(np.asarray(self._points_func(A, B, C), dtype=float), (A.shape[0],))
        d = C.shape[2]
        mk = lambda a: Configuration(a, d=d, allow_coincident=True)
        return np.array([self._func(mk(a), mk(b), mk(c)) for a, b, c in zip(A, B, C)])


@dataclass(frozen=True)
class MinlosResult:
    lhs: float
    rhs: float
    lhs_tail: float | None = None
    rhs_tail: float | None = None
    std_error: float = 0.0

    def __iter__(self):
        return iter((self.lhs, self.rhs))


def minlos_check(H, spec: LPIntegralSpec) -> MinlosResult:
    """Both sides of ``int sum_{xi subset eta} H(xi, eta-xi, eta) = int int H(xi, eta, eta+xi)``.

    The double integral is truncated at ``|xi| + |eta| <= N`` so the two sides
    see the same levels; tails come from ``H.bound`` when declared.
    """
    if not isinstance(H, TripleFunction):
        H = TripleFunction(func=H)
    N, z = spec.truncation, spec.z

    def lhs_integrand(Y):
        total = np.zeros(Y.shape[0])
        for idx_in, idx_out, _ in _sized_splits(Y.shape[1]):
            total += H.on_points(Y[:, idx_in], Y[:, idx_out], Y)
        return total

    lv, le = integrate_levels(lhs_integrand, spec.window, N, spec.method)
    c = activity_weights(z, N)
    lhs = float(np.sum(c * lv[:, 0]))

    rhs = 0.0
    rvar = 0.0
    for n in range(N + 1):
        for j in range(n + 1):
            def rhs_integrand(Y, j=j):
                return H.on_points(Y[:, :j], Y[:, j:], Y)
            method = spec.method
            if isinstance(method, MonteCarlo):
                method = MonteCarlo(method.samples, method.seed + 7919 * (j + 1))
            v, e = _single_level(rhs_integrand, spec.window, n, method)
            w = z ** n / (math.factorial(j) * math.factorial(n - j))
            rhs += w * v
            rvar += (w * e) ** 2

    lt = rt = None
    if H.bound is not None:
        lt = rt = tail_bound(H.bound.norm, 2.0 * H.bound.C, z, spec.window.volume, N)
    se = math.sqrt(float(np.sum((c * le[:, 0]) ** 2)) + rvar)
    return MinlosResult(lhs, float(rhs), lt, rt, se)


def _single_level(integrand, window: Window, n: int, method) -> tuple[float, float]:
    total = 0.0
    sq = 0.0
    count = 0
    for nodes, weights in level_rule(window, n, method):
        wf = weights * integrand(nodes)
        total += float(wf.sum())
        sq += float((wf ** 2).sum())
        count += len(weights)
    err = 0.0
    if isinstance(method, MonteCarlo) and n > 0 and count > 1:
        mean = total / count
        err = math.sqrt(max(sq / count - mean ** 2, 0.0) * count / (count - 1) * count)
    return total, err


# positive definiteness

def posdef_check(k: SetFunction, probes: Sequence[SetFunction], spec: LPIntegralSpec) -> list[float]:
    """``int (G star G)(eta) k(eta) dlambda`` for each real probe ``G``."""
    return [lp_integrate(star_convolution(G, G) * k, spec).value for G in probes]
