"""Finite configurations and the combinatorial algebra of functions on them.

A configuration is a finite set of distinct points in R^d.  Functions of
configurations (``SetFunction``) are black boxes that can be evaluated either
on a single ``Configuration`` or, vectorised, on a batch of point tuples of
shape ``(B, n, d)``.  Every operation in this module (K-transform and its
inverse, the two convolutions, coherent states, Ursell exp/log) is an exact
finite sum over the subset lattice of the argument.
"""
from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .errors import CapExceeded, DuplicatePoint, PreconditionViolated

# 2^n and 3^n enumeration caps; keep a single evaluation below ~1e7 terms
N_MAX = 22
N_MAX_STAR = 14

_URSELL_TOL = 1e-12


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise CapExceeded(f"configuration of size {n} exceeds enumeration cap {cap}")


class Configuration:
    """Finite set of pairwise distinct points, stored in lexicographic order.

    ``points`` is anything convertible to an ``(n, d)`` float array.  A flat
    sequence of numbers is read as ``n`` points on the line.  Coincident points
    raise ``DuplicatePoint`` unless ``allow_coincident`` is set, which is only
    used internally when a quadrature rule lands on a diagonal.
    """

    __slots__ = ("_arr", "_key")

    def __init__(self, points=(), d: int | None = None, *, allow_coincident: bool = False):
        arr = np.array(points, dtype=float)
        if arr.size == 0:
            arr = np.empty((0, d if d is not None else 1))
        elif arr.ndim == 1:
            arr = arr[:, None] if d in (None, 1) else arr[None, :]
        if arr.ndim != 2:
            raise ValueError("points must form an (n, d) array")
        if d is not None and arr.shape[1] != d:
            raise ValueError(f"expected dimension {d}, got {arr.shape[1]}")
        if arr.shape[1] < 1:
            raise ValueError("dimension must be at least 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coordinates must be finite")
        if len(arr) > 1:
            arr = arr[np.lexsort(arr.T[::-1])]
            if not allow_coincident and np.any(np.all(arr[1:] == arr[:-1], axis=1)):
                raise DuplicatePoint("configuration contains coincident points")
        arr.setflags(write=False)
        self._arr = arr
        self._key = None

    @classmethod
    def empty(cls, d: int = 1) -> "Configuration":
        return cls((), d=d)

    @property
    def array(self) -> np.ndarray:
        """Read-only ``(n, d)`` array of the points in canonical order."""
        return self._arr

    @property
    def d(self) -> int:
        return self._arr.shape[1]

    def __len__(self) -> int:
        return self._arr.shape[0]

    def __iter__(self) -> Iterator[tuple[float, ...]]:
        return (tuple(row) for row in self._arr.tolist())

    def __contains__(self, point) -> bool:
        p = np.asarray(point, dtype=float).reshape(-1)
        return bool(len(self)) and bool(np.any(np.all(self._arr == p, axis=1)))

    def _hash_key(self):
        if self._key is None:
            self._key = (self._arr.shape, self._arr.tobytes())
        return self._key

    def __hash__(self) -> int:
        return hash(self._hash_key())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self._hash_key() == other._hash_key()

    def __repr__(self) -> str:
        pts = ", ".join(str(p if self.d > 1 else p[0]) for p in self)
        return f"Configuration({{{pts}}})"

    def __or__(self, other) -> "Configuration":
        """Disjoint union; a shared point raises ``DuplicatePoint``."""
        if not isinstance(other, Configuration):
            other = Configuration([np.asarray(other, dtype=float).reshape(-1)], d=self.d)
        return Configuration(np.concatenate([self._arr, other.array]), d=self.d)

    def __sub__(self, other) -> "Configuration":
        if not isinstance(other, Configuration):
            other = Configuration([np.asarray(other, dtype=float).reshape(-1)], d=self.d)
        keep = [i for i, row in enumerate(self._arr) if row.tolist() not in other.array.tolist()]
        return Configuration(self._arr[keep], d=self.d)

    def take(self, idx) -> "Configuration":
        return Configuration(self._arr[np.asarray(idx, dtype=int)], d=self.d)


class Bound(NamedTuple):
    """Declared geometric bound ``|f(eta)| <= norm * C**|eta|``."""

    norm: float
    C: float


class SetFunction:
    """Real function on finite configurations.

    Give either ``func`` (``Configuration -> float``) or ``points_func``
    (``(B, n, d) array -> (B,) array``), or both.  ``points_func`` must be
    symmetric in its ``n`` axis; it is the fast path used by the integrators.
    On tuples with coinciding points it is evaluated as written, which is the
    continuous extension of the function to the diagonal.
    """

    def __init__(
        self,
        func: Callable[[Configuration], float] | None = None,
        points_func: Callable[[np.ndarray], np.ndarray] | None = None,
        bound: Bound | tuple | None = None,
        name: str | None = None,
    ):
        if func is None and points_func is None:
            raise ValueError("need func or points_func")
        self._func = func
        self._points_func = points_func
        if bound is not None:
            bound = Bound(float(bound[0]), float(bound[1]))
            if bound.norm < 0 or bound.C <= 0:
                raise ValueError("bound needs norm >= 0 and C > 0")
        self.bound = bound
        self.name = name or "G"

    def __repr__(self) -> str:
        return f"SetFunction({self.name})"

    def __call__(self, eta: Configuration) -> float:
        if self._func is not None:
            return float(self._func(eta))
        return float(self.on_points(eta.array[None])[0])

    def on_points(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        B = X.shape[0]
        if self._points_func is not None:
            return np.broadcast_to(np.asarray(self._points_func(X), dtype=float), (B,)).copy()
        return np.array(
            [self._func(Configuration(x, d=X.shape[2], allow_coincident=True)) for x in X],
            dtype=float,
        )

    def with_bound(self, bound) -> "SetFunction":
        return SetFunction(self._func, self._points_func, bound, self.name)

    # pointwise algebra

    def __add__(self, other) -> "SetFunction":
        if not isinstance(other, SetFunction):
            return self + constant(float(other))
        bound = None
        if self.bound and other.bound:
            bound = Bound(self.bound.norm + other.bound.norm, max(self.bound.C, other.bound.C))
        return SetFunction(
            points_func=lambda X: self.on_points(X) + other.on_points(X),
            bound=bound, name=f"({self.name}+{other.name})",
        )

    __radd__ = __add__

    def __neg__(self) -> "SetFunction":
        return -1.0 * self

    def __sub__(self, other) -> "SetFunction":
        return self + (-1.0) * other if isinstance(other, SetFunction) else self + (-float(other))

    def __rsub__(self, other) -> "SetFunction":
        return (-1.0) * self + other

    def __mul__(self, other) -> "SetFunction":
        if isinstance(other, SetFunction):
            bound = None
            if self.bound and other.bound:
                bound = Bound(self.bound.norm * other.bound.norm, self.bound.C * other.bound.C)
            return SetFunction(
                points_func=lambda X: self.on_points(X) * other.on_points(X),
                bound=bound, name=f"{self.name}*{other.name}",
            )
        a = float(other)
        bound = Bound(abs(a) * self.bound.norm, self.bound.C) if self.bound else None
        return SetFunction(points_func=lambda X: a * self.on_points(X), bound=bound,
                           name=f"{a:g}{self.name}")

    __rmul__ = __mul__


def constant(c: float) -> SetFunction:
    """The function identically equal to ``c`` (including at the empty set)."""
    c = float(c)
    return SetFunction(points_func=lambda X: np.full(X.shape[0], c), bound=Bound(abs(c), 1.0),
                       name=f"{c:g}")


def vacuum() -> SetFunction:
    """``1*(eta) = 0^|eta|``: unit of both convolutions."""
    return SetFunction(points_func=lambda X: np.full(X.shape[0], 1.0 if X.shape[1] == 0 else 0.0),
                       bound=Bound(1.0, 1.0), name="1*")


def size_function(phi: Callable[[int], float], name: str = "phi(|eta|)") -> SetFunction:
    """Function of the number of points only."""
    return SetFunction(points_func=lambda X: np.full(X.shape[0], float(phi(X.shape[1]))), name=name)


def coherent_state(f, sup: float | None = None) -> SetFunction:
    """``e(f, eta) = prod_{x in eta} f(x)`` with ``e(f, {}) = 1``.

    ``f`` is a number or a vectorised callable mapping an array of points of
    shape ``(..., d)`` to values of shape ``(...)``.  ``sup`` declares
    ``sup |f|`` for callables, which gives the function a geometric bound.
    """
    if callable(f):
        def pf(X):
            return np.prod(f(X), axis=1) if X.shape[1] else np.ones(X.shape[0])
        bound = Bound(1.0, sup) if sup else None
        return SetFunction(points_func=pf, bound=bound, name=getattr(f, "__name__", "e(f)"))
    c = float(f)
    return SetFunction(
        points_func=lambda X: np.full(X.shape[0], c ** X.shape[1]),
        bound=Bound(1.0, abs(c)) if c else Bound(1.0, 1.0),
        name=f"e({c:g})",
    )


# subset lattice

def subsets(eta: Configuration, n_max: int = N_MAX) -> Iterator[tuple[Configuration, Configuration]]:
    """All ``(xi, eta minus xi)`` pairs, bitmask order over the canonical point order."""
    n = len(eta)
    _check_cap(n, n_max)
    for idx_in, idx_out in _splits(n):
        yield eta.take(idx_in), eta.take(idx_out)


@lru_cache(maxsize=None)
def _split_table(n: int) -> tuple[tuple[np.ndarray, np.ndarray, int], ...]:
    cols = np.arange(n)
    out = []
    for mask in range(1 << n):
        bits = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        out.append((cols[bits], cols[~bits], int(bits.sum())))
    return tuple(out)


def _splits(n: int):
    if n <= 14:
        return [(a, b) for a, b, _ in _split_table(n)]
    return (_split(n, mask) for mask in range(1 << n))


def _split(n: int, mask: int) -> tuple[np.ndarray, np.ndarray]:
    bits = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
    cols = np.arange(n)
    return cols[bits], cols[~bits]


def _sized_splits(n: int):
    """``(idx_in, idx_out, |idx_in|)`` for every subset."""
    if n <= 14:
        return _split_table(n)
    return ((a, b, len(a)) for a, b in _splits(n))


def subset_sum(X: np.ndarray, term: Callable[[np.ndarray, np.ndarray], np.ndarray],
               n_max: int = N_MAX) -> np.ndarray:
    """``sum_{xi subset eta} term(idx_xi, idx_rest)`` over a batch ``X`` of shape (B, n, d)."""
    n = X.shape[1]
    _check_cap(n, n_max)
    total = np.zeros(X.shape[0])
    for idx_in, idx_out in _splits(n):
        total += term(idx_in, idx_out)
    return total


# K-transform

def k_transform_fn(G: SetFunction) -> SetFunction:
    """``KG(gamma) = sum_{eta subset gamma} G(eta)`` as a set function of finite ``gamma``."""
    def pf(X):
        return subset_sum(X, lambda a, b: G.on_points(X[:, a]))
    return SetFunction(points_func=pf, name=f"K{G.name}")


def k_inverse_fn(F: SetFunction) -> SetFunction:
    def pf(X):
        n = X.shape[1]
        return subset_sum(X, lambda a, b: (-1.0) ** (n - len(a)) * F.on_points(X[:, a]))
    return SetFunction(points_func=pf, name=f"K^-1{F.name}")


def k_transform(G: SetFunction, gamma: Configuration) -> float:
    return float(k_transform_fn(G).on_points(gamma.array[None])[0])


def k_inverse(F: SetFunction, eta: Configuration) -> float:
    return float(k_inverse_fn(F).on_points(eta.array[None])[0])


# convolutions

def ast_convolution(G1: SetFunction, G2: SetFunction) -> SetFunction:
    """``(G1 * G2)(eta) = sum_{xi subset eta} G1(xi) G2(eta minus xi)``."""
    def pf(X):
        return subset_sum(X, lambda a, b: G1.on_points(X[:, a]) * G2.on_points(X[:, b]))
    bound = None
    if G1.bound and G2.bound:
        bound = Bound(G1.bound.norm * G2.bound.norm, G1.bound.C + G2.bound.C)
    return SetFunction(points_func=pf, bound=bound, name=f"({G1.name} * {G2.name})")


def star_convolution(G1: SetFunction, G2: SetFunction) -> SetFunction:
    """Sum over ordered partitions ``eta = x1 + x2 + x3`` of ``G1(x1+x2) G2(x2+x3)``.

    Each point gets a base-3 digit: 0 -> x1, 1 -> x2, 2 -> x3.
    """
    def pf(X):
        n = X.shape[1]
        _check_cap(n, N_MAX_STAR)
        cols = np.arange(n)
        total = np.zeros(X.shape[0])
        for digits in itertools.product((0, 1, 2), repeat=n):
            dg = np.array(digits, dtype=int)
            total += G1.on_points(X[:, cols[dg != 2]]) * G2.on_points(X[:, cols[dg != 0]])
        return total
    bound = None
    if G1.bound and G2.bound:
        c1, c2 = G1.bound.C, G2.bound.C
        bound = Bound(G1.bound.norm * G2.bound.norm, c1 + c2 + c1 * c2)
    return SetFunction(points_func=pf, bound=bound, name=f"({G1.name} star {G2.name})")


# Ursell functions

def _ursell_tables(X: np.ndarray, known: np.ndarray, mode: str) -> np.ndarray:
    """Fill the other table over all submasks of the full point set.

    Recurrence with a distinguished point ``x0`` (lowest set bit):
    ``k(eta) = sum_{xi subset eta, x0 in xi} u(xi) k(eta minus xi)``.
    """
    n = X.shape[1]
    full = (1 << n) - 1
    out = np.zeros_like(known)
    if mode == "log":
        k, u = known, out
    else:
        u, k = known, out
        k[0] = 1.0
    for mask in range(1, full + 1):
        low = mask & -mask
        rest = mask ^ low
        acc = np.zeros(X.shape[0])
        s = rest
        while True:
            sub = s | low
            if mode == "log":
                if sub != mask:
                    acc += u[sub] * k[mask ^ sub]
            else:
                acc += u[sub] * k[mask ^ sub]
            if s == 0:
                break
            s = (s - 1) & rest
        if mode == "log":
            u[mask] = k[mask] - acc
        else:
            k[mask] = acc
    return out


def _mask_values(F: SetFunction, X: np.ndarray) -> np.ndarray:
    n = X.shape[1]
    vals = np.empty((1 << n, X.shape[0]))
    for mask in range(1 << n):
        idx = [i for i in range(n) if (mask >> i) & 1]
        vals[mask] = F.on_points(X[:, idx])
    return vals


def ursell_log(k: SetFunction) -> SetFunction:
    """Ursell function ``u`` with ``k = exp*(u)``; requires ``k({}) = 1``."""
    def pf(X):
        _check_cap(X.shape[1], N_MAX)
        kv = _mask_values(k, X)
        if np.any(np.abs(kv[0] - 1.0) > _URSELL_TOL):
            raise PreconditionViolated("ursell_log needs k(empty) = 1")
        return _ursell_tables(X, kv, "log")[-1]
    return SetFunction(points_func=pf, name=f"log*{k.name}")


def ursell_exp(u: SetFunction) -> SetFunction:
    """``exp*(u) = sum_n u^{*n} / n!``; requires ``u({}) = 0``."""
    def pf(X):
        _check_cap(X.shape[1], N_MAX)
        uv = _mask_values(u, X)
        if np.any(np.abs(uv[0]) > _URSELL_TOL):
            raise PreconditionViolated("ursell_exp needs u(empty) = 0")
        return _ursell_tables(X, uv, "exp")[-1]
    return SetFunction(points_func=pf, name=f"exp*{u.name}")


# probes

def random_configuration(rng: np.random.Generator, n: int, lower, upper) -> Configuration:
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    pts = rng.uniform(lower, upper, size=(n, len(lower)))
    return Configuration(pts, d=len(lower))


def probe_set(rng: np.random.Generator, sizes, lower, upper, per_size: int = 1) -> list[Configuration]:
    """Random probe configurations, ``per_size`` of each size in ``sizes``."""
    return [random_configuration(rng, n, lower, upper) for n in sizes for _ in range(per_size)]


def empirical_sup(f: SetFunction, probes, C: float = 1.0, closed: bool = True) -> float:
    """``max C^{-|eta|} |f(eta)|`` over the probes (and all their subsets if ``closed``).

    A lower bound on the weighted sup norm; exact on the probed family.
    """
    best = 0.0
    for eta in probes:
        X = eta.array[None]
        n = len(eta)
        if closed:
            for idx_in, _, size in _sized_splits(n):
                best = max(best, abs(float(f.on_points(X[:, idx_in])[0])) * C ** (-size))
        else:
            best = max(best, abs(f(eta)) * C ** (-n))
    return best
