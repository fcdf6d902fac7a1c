"""Built-in initial correlation functions and test-function families."""
from __future__ import annotations

import math

import numpy as np

from .config_core import Bound, SetFunction, coherent_state, ursell_exp
from .evolution import Theta
from .lp_integration import Window


def poisson(A: float) -> SetFunction:
    """Correlation function ``A^|eta|`` of the Poisson measure with intensity ``A``."""
    k = coherent_state(A)
    k.name = f"poisson({A:g})"
    return k


def mixed_poisson(A1: float, A2: float, w: float = 0.5) -> SetFunction:
    """``w A1^|eta| + (1-w) A2^|eta|``: a two-point mixture of Poisson measures.

    Non-Poisson but homogeneous; its gap ``v(eta, y)`` is independent of
    ``y`` and known in closed form (``mixed_poisson_gap``).
    """
    if not 0 <= w <= 1:
        raise ValueError("mixture weight must lie in [0, 1]")

    def pf(X):
        n = X.shape[1]
        return np.full(X.shape[0], w * A1 ** n + (1 - w) * A2 ** n)

    return SetFunction(points_func=pf, bound=Bound(1.0, max(abs(A1), abs(A2), 1e-300)),
                       name=f"mixed_poisson({A1:g},{A2:g})")


def mixed_poisson_gap(A1: float, A2: float, w: float, n: int) -> float:
    """``v(eta, y)`` of ``mixed_poisson`` at ``|eta| = n``."""
    k = lambda j: w * A1 ** j + (1 - w) * A2 ** j
    return k(n + 1) - k(n) * k(1)


def gauss_poisson_ursell(A: float, b: float, scale: float) -> SetFunction:
    """Ursell function with ``u({x}) = A`` and ``u({x, y}) = b exp(-|x-y|^2 / (2 scale^2))``."""
    def pf(X):
        n = X.shape[1]
        if n == 1:
            return np.full(X.shape[0], float(A))
        if n == 2:
            r2 = ((X[:, 0] - X[:, 1]) ** 2).sum(axis=1)
            return b * np.exp(-r2 / (2 * scale ** 2))
        return np.zeros(X.shape[0])

    return SetFunction(points_func=pf, name=f"u_gp({A:g},{b:g})")


def gauss_poisson(A: float, b: float, scale: float = 0.5) -> SetFunction:
    """Correlation function of a Gauss-Poisson process: Poisson singles plus Poisson pairs."""
    k = ursell_exp(gauss_poisson_ursell(A, b, scale))
    k.name = f"gauss_poisson({A:g},{b:g},{scale:g})"
    return k


def tabulated(grid, values) -> SetFunction:
    """Inhomogeneous Poisson correlation ``prod_x rho(x)`` with ``rho`` interpolated on a 1-d grid."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing and match values")
    rho = lambda X: np.interp(X[..., 0], grid, values)
    k = coherent_state(rho, sup=float(np.max(np.abs(values))) or None)
    k.name = "tabulated"
    return k


BUILTINS = {
    "poisson": poisson,
    "mixed_poisson": mixed_poisson,
    "gauss_poisson": gauss_poisson,
}


def random_set_function(rng: np.random.Generator, n_max: int = 14, unit_at_empty: bool = False,
                        positive: bool = False, scale: float = 1.0) -> SetFunction:
    """Smooth symmetric pseudo-random function of configurations with a declared bound.

    ``G(eta) = c_|eta| prod_x exp(a sin(w.x + phi)) + b sum_{x<y} cos(w2 |x-y|)``,
    with the pair term replaced by a bounded multiplicative factor when
    ``positive`` is set.
    """
    c = rng.uniform(0.5, 1.5, n_max + 1) * scale
    if not positive:
        c *= rng.choice([-1.0, 1.0], n_max + 1)
    if unit_at_empty:
        c[0] = 1.0
    a, w, phi, w2 = rng.uniform(-0.5, 0.5), rng.uniform(0.5, 3.0), rng.uniform(0, 2 * math.pi), rng.uniform(0.5, 3.0)
    b = rng.uniform(-0.3, 0.3)

    def pf(X):
        n = X.shape[1]
        if n > n_max:
            raise ValueError(f"random function defined up to {n_max} points")
        s = X.sum(axis=2)
        single = np.exp(a * np.sin(w * s + phi)).prod(axis=1) if n else np.ones(X.shape[0])
        if n < 2:
            pair = np.zeros(X.shape[0])
        else:
            i, j = np.triu_indices(n, k=1)
            r = np.sqrt(((X[:, i] - X[:, j]) ** 2).sum(axis=2))
            pair = np.cos(w2 * r).sum(axis=1) / (n * (n - 1) / 2)
        if positive:
            return c[n] * single * (1.0 + b * pair)
        return c[n] * single + b * pair * (n >= 2)

    norm = float(np.max(np.abs(c))) * 1.3 + abs(b)
    return SetFunction(points_func=pf, bound=Bound(norm, math.exp(abs(a))), name="G_rand")


def bump(window: Window, amplitude: float, center: float, width: float) -> Theta:
    """Gaussian bump ``amplitude * exp(-(x-center)^2 / (2 width^2))`` restricted to ``window``."""
    def f(X):
        r2 = ((np.asarray(X)[..., :] - center) ** 2).sum(axis=-1)
        return amplitude * np.exp(-r2 / (2 * width ** 2))

    return Theta(f, window, sup=abs(amplitude))


def random_theta(rng: np.random.Generator, window: Window, max_amplitude: float = 0.5) -> Theta:
    lo, hi = window.lower[0], window.upper[0]
    return bump(window, rng.uniform(-max_amplitude, max_amplitude), rng.uniform(lo, hi),
                rng.uniform(0.1, 0.5) * (hi - lo))
