"""Stochastic sampling of the death-immigration process on a window.

Points neither move nor interact, so the process restricted to a window has
the same law as the window projection of the infinite-volume process.  Two
samplers are provided: an exact one (independent thinning of the initial
points plus a Poisson cloud of immigrants) and an event-driven Gillespie
simulation of the jump process.  Every replica draws from its own Philox
stream keyed by ``(seed, replica)``, so ensembles are reproducible and do
not depend on how replicas are scheduled.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .config_core import Configuration
from .errors import DuplicatePoint, InsufficientReplicas
from .evolution import ModelParams
from .lp_integration import Window

VERSION = "0.1.0"


@dataclass(frozen=True)
class PoissonInitial:
    intensity: float

    def to_dict(self):
        return {"kind": "poisson", "intensity": self.intensity}


@dataclass(frozen=True)
class FixedInitial:
    configuration: Configuration

    def to_dict(self):
        return {"kind": "fixed", "points": self.configuration.array.tolist()}


@dataclass(frozen=True)
class EmptyInitial:
    def to_dict(self):
        return {"kind": "empty"}


def initial_from_dict(spec: dict, d: int):
    kind = spec.get("kind", "empty")
    if kind == "poisson":
        return PoissonInitial(float(spec.get("intensity", spec.get("A", 1.0))))
    if kind == "fixed":
        return FixedInitial(Configuration(spec["points"], d=d))
    if kind == "empty":
        return EmptyInitial()
    raise ValueError(f"unknown initial law {kind!r}")


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    window: Window
    initial: PoissonInitial | FixedInitial | EmptyInitial = field(default_factory=EmptyInitial)
    t_end: float = 1.0
    replicas: int = 1000
    seed: int = 0
    scheme: str = "exact"

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.scheme not in ("exact", "gillespie"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.window.d != self.params.d:
            raise ValueError("window dimension differs from params.d")
        if isinstance(self.initial, FixedInitial):
            if len(self.initial.configuration) and not np.all(self.window.contains(self.initial.configuration.array)):
                raise ValueError("fixed initial configuration must lie inside the window")
        if isinstance(self.initial, PoissonInitial) and self.initial.intensity < 0:
            raise ValueError("initial intensity must be >= 0")

    def to_dict(self) -> dict:
        return {
            "params": {"m": self.params.m, "sigma": self.params.sigma, "d": self.params.d},
            "window": self.window.to_dict(),
            "initial": self.initial.to_dict(),
            "t_end": self.t_end,
            "replicas": self.replicas,
            "seed": self.seed,
            "scheme": self.scheme,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        params = ModelParams(**data["params"])
        w = data["window"]
        window = Window(tuple(w["lower"]), tuple(w["upper"]), w.get("boundary", "plain"))
        return cls(params, window, initial_from_dict(data["initial"], params.d), float(data["t_end"]),
                   int(data["replicas"]), int(data["seed"]), data["scheme"])


@dataclass
class SampleEnsemble:
    configs: list
    t: float
    meta: SimConfig

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(c) for c in self.configs])

    def __len__(self) -> int:
        return len(self.configs)


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replica)])))


def _initial_points(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    init = cfg.initial
    if isinstance(init, PoissonInitial):
        n = rng.poisson(init.intensity * cfg.window.volume)
        return cfg.window.uniform(rng, n)
    if isinstance(init, FixedInitial):
        return init.configuration.array.copy()
    return np.empty((0, cfg.window.d))


def _exact_replica(cfg: SimConfig, replica: int) -> Configuration:
    rng = replica_rng(cfg.seed, replica)
    p = cfg.params
    keep = math.exp(-p.m * cfg.t_end)
    lam = p.immigrant_intensity(cfg.t_end) * cfg.window.volume
    while True:
        pts = _initial_points(cfg, rng)
        pts = pts[rng.random(len(pts)) < keep]
        new = cfg.window.uniform(rng, rng.poisson(lam))
        try:
            return Configuration(np.concatenate([pts, new]), d=cfg.window.d)
        except DuplicatePoint:
            continue


def _gillespie_replica(cfg: SimConfig, replica: int) -> Configuration:
    rng = replica_rng(cfg.seed, replica)
    p = cfg.params
    immigration = p.sigma * cfg.window.volume
    while True:
        pts = list(_initial_points(cfg, rng))
        t = 0.0
        while True:
            n = len(pts)
            rate = p.m * n + immigration
            if rate == 0.0:
                break
            t += rng.exponential(1.0 / rate)
            if t > cfg.t_end:
                break
            if rng.random() * rate < p.m * n:
                i = rng.integers(n)
                pts[i] = pts[-1]
                pts.pop()
            else:
                pts.append(cfg.window.uniform(rng, 1)[0])
        arr = np.array(pts).reshape(-1, cfg.window.d)
        try:
            return Configuration(arr, d=cfg.window.d)
        except DuplicatePoint:
            continue


def _run(cfg: SimConfig, worker, threads: int) -> SampleEnsemble:
    ids = range(cfg.replicas)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            configs = list(pool.map(lambda r: worker(cfg, r), ids))
    else:
        configs = [worker(cfg, r) for r in ids]
    return SampleEnsemble(configs, cfg.t_end, cfg)


def sample_exact(cfg: SimConfig, threads: int = 1) -> SampleEnsemble:
    """Thin the initial configuration with survival ``e^{-mt}`` and add Poisson(z_t) immigrants."""
    if cfg.scheme != "exact":
        raise ValueError("sample_exact needs scheme='exact'")
    return _run(cfg, _exact_replica, threads)


def sample_gillespie(cfg: SimConfig, threads: int = 1) -> SampleEnsemble:
    """Event-driven simulation: total rate ``m|gamma| + sigma|W|``, death or immigration per event."""
    if cfg.scheme != "gillespie":
        raise ValueError("sample_gillespie needs scheme='gillespie'")
    return _run(cfg, _gillespie_replica, threads)


def simulate(cfg: SimConfig, threads: int = 1) -> SampleEnsemble:
    return sample_exact(cfg, threads) if cfg.scheme == "exact" else sample_gillespie(cfg, threads)


# estimators

def factorial_moments(ens: SampleEnsemble, order: int) -> tuple[float, float]:
    """Mean of ``N(N-1)...(N-j+1) / |W|^j`` over replicas and its standard error."""
    if not 1 <= order <= 4:
        raise ValueError("order must be between 1 and 4")
    if len(ens) < 100:
        raise InsufficientReplicas(f"need at least 100 replicas, got {len(ens)}")
    N = ens.counts.astype(float)
    falling = np.ones_like(N)
    for i in range(order):
        falling *= N - i
    vals = falling / ens.meta.window.volume ** order
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


class GapBin(NamedTuple):
    r: float
    value: float
    std_error: float
    empty: bool = False


def _torus_distances(pts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(len(pts), k=1)
    diff = np.abs(pts[i] - pts[j])
    diff = np.minimum(diff, lengths - diff)
    return np.sqrt((diff ** 2).sum(axis=1))


def _shell_volume(r1: float, r2: float, d: int) -> float:
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return ball * (r2 ** d - r1 ** d)


def gap_estimator(ens: SampleEnsemble, r_bins: Sequence[float]) -> list[GapBin]:
    """Binned estimate of ``k2(r) - rho^2`` with jackknife errors over replicas.

    ``k2`` in a distance shell is the mean ordered-pair count divided by
    ``|W| * shell volume``; ``rho`` is the mean count over ``|W|``.  Torus
    distances are used, so the window must be periodic and bins must stay
    below half the shortest side.
    """
    window = ens.meta.window
    if window.boundary != "periodic":
        raise ValueError("gap_estimator needs a periodic window")
    edges = np.asarray(r_bins, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("r_bins must be an increasing sequence of at least two edges")
    if edges[-1] > window.lengths.min() / 2:
        raise ValueError("largest bin edge exceeds half the window side")
    R = len(ens)
    if R < 2:
        raise InsufficientReplicas("jackknife needs at least 2 replicas")
    lengths = window.lengths
    pairs = np.zeros((R, len(edges) - 1))
    for r, c in enumerate(ens.configs):
        if len(c) > 1:
            pairs[r] = 2.0 * np.histogram(_torus_distances(c.array, lengths), bins=edges)[0]
    N = ens.counts.astype(float)
    V = window.volume
    shells = np.array([_shell_volume(a, b, window.d) for a, b in zip(edges[:-1], edges[1:])])

    def estimate(pair_mean, count_mean):
        return pair_mean / (V * shells) - (count_mean / V) ** 2

    full = estimate(pairs.mean(axis=0), N.mean())
    loo_pairs = (pairs.sum(axis=0)[None] - pairs) / (R - 1)
    loo_counts = (N.sum() - N) / (R - 1)
    loo = loo_pairs / (V * shells) - (loo_counts[:, None] / V) ** 2
    se = np.sqrt((R - 1) / R * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    totals = pairs.sum(axis=0)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return [GapBin(float(c), float(v), float(s), bool(n == 0)) for c, v, s, n in zip(centers, full, se, totals)]


# serialisation

def write_ensemble(ens: SampleEnsemble, out_dir, stem: str = "ensemble") -> tuple[Path, Path]:
    """Flat CSV ``replica_id, point_index, coord_0..`` plus a JSON sidecar with the run config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    d = ens.meta.window.d
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replica_id", "point_index"] + [f"coord_{i}" for i in range(d)])
        for r, c in enumerate(ens.configs):
            for i, row in enumerate(c.array):
                w.writerow([r, i] + [format(v, ".17g") for v in row])
    sidecar = {"version": VERSION, "config": ens.meta.to_dict(), "t": ens.t, "replicas": len(ens)}
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_ensemble(csv_path, json_path=None) -> SampleEnsemble:
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    sidecar = json.loads(json_path.read_text())
    cfg = SimConfig.from_dict(sidecar["config"])
    d = cfg.window.d
    rows: dict[int, list] = {r: [] for r in range(int(sidecar["replicas"]))}
    with open(csv_path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows[int(rec["replica_id"])].append([float(rec[f"coord_{i}"]) for i in range(d)])
    configs = [Configuration(rows[r], d=d) if rows[r] else Configuration.empty(d) for r in sorted(rows)]
    return SampleEnsemble(configs, float(sidecar["t"]), cfg)
