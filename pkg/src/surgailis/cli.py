"""Command-line front end: ``evolve``, ``simulate``, ``resolvent``, ``verify``, ``report``.

Every run reads one flat JSON config (``--config``) overlaid with
``--set key=value`` overrides and the dedicated flags.  Exit codes: 0 success,
1 a verification check failed, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import models
from .checks import CRITERIA, VerifyContext, run_checks
from .config_core import Configuration, empirical_sup, random_configuration
from .errors import ConfigError, SurgailisError
from .evolution import ModelParams, evolve_correlation, resolvent_dual, sub_poisson_bound
from .lp_integration import Window
from .simulator import (
    VERSION,
    PoissonInitial,
    SimConfig,
    factorial_moments,
    gap_estimator,
    initial_from_dict,
    read_ensemble,
    simulate,
    write_ensemble,
)

DEFAULTS = {
    "m": 1.0,
    "sigma": 2.0,
    "d": 1,
    "window_lower": 0.0,
    "window_upper": 10.0,
    "boundary": "periodic",
    # initial state
    "initial": "poisson",
    "A": 1.0,
    "A2": 3.0,
    "w": 0.5,
    "b": 0.4,
    "scale": 0.5,
    "grid": None,
    "values": None,
    "points": None,
    # evolve / resolvent
    "times": [0.0, 1.0],
    "probe_sizes": [0, 1, 2, 3],
    "probes_per_size": 2,
    "norm_C": None,
    "form": "alt",
    "z_values": [0.5, 1.0, 3.0],
    # simulate
    "t_end": 1.0,
    "replicas": 1000,
    "seed": 0,
    "scheme": "exact",
    "threads": 1,
    "max_order": 2,
    "r_bins": None,
    "ensemble": None,
    # verify
    "checks": None,
    "inject": None,
}

INJECTIONS = (None, "half_invariant")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path: str | None, overrides: list[str]) -> dict:
    cfg = dict(DEFAULTS)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg.update(data)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        cfg[key.strip()] = _parse_value(value)
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    return cfg


def _float(cfg, key) -> float:
    try:
        v = float(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a number") from exc
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return v


def _floats(cfg, key) -> list[float]:
    v = cfg[key]
    if not isinstance(v, list):
        v = [v]
    try:
        return [float(x) for x in v]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a list of numbers") from exc


def build_params(cfg) -> ModelParams:
    try:
        return ModelParams(_float(cfg, "m"), _float(cfg, "sigma"), int(cfg["d"]))
    except (SurgailisError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def build_window(cfg) -> Window:
    d = int(cfg["d"])
    lo, hi = _floats(cfg, "window_lower"), _floats(cfg, "window_upper")
    lo, hi = (lo * d if len(lo) == 1 else lo), (hi * d if len(hi) == 1 else hi)
    if len(lo) != d or len(hi) != d:
        raise ConfigError("window bounds must have d entries")
    try:
        return Window(tuple(lo), tuple(hi), cfg["boundary"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_initial_correlation(cfg):
    kind = cfg["initial"]
    if kind == "poisson":
        return models.poisson(_float(cfg, "A"))
    if kind == "mixed_poisson":
        return models.mixed_poisson(_float(cfg, "A"), _float(cfg, "A2"), _float(cfg, "w"))
    if kind == "gauss_poisson":
        return models.gauss_poisson(_float(cfg, "A"), _float(cfg, "b"), _float(cfg, "scale"))
    if kind == "tabulated":
        if cfg["grid"] is None or cfg["values"] is None:
            raise ConfigError("tabulated initial state needs grid and values")
        try:
            return models.tabulated(cfg["grid"], cfg["values"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown initial correlation {kind!r}; expected poisson, mixed_poisson, "
                      "gauss_poisson or tabulated")


def build_probes(cfg, window: Window) -> list[tuple[str, Configuration]]:
    rng = np.random.default_rng([int(cfg["seed"]), 7])
    probes = []
    for n in cfg["probe_sizes"]:
        n = int(n)
        if n < 0:
            raise ConfigError("probe sizes must be non-negative")
        for i in range(int(cfg["probes_per_size"])):
            eta = random_configuration(rng, n, np.array(window.lower), np.array(window.upper))
            probes.append((f"n{n}_{i}", eta))
    return probes


def build_sim_config(cfg) -> SimConfig:
    params, window = build_params(cfg), build_window(cfg)
    kind = cfg["initial"]
    spec = {"kind": kind, "intensity": cfg["A"], "points": cfg["points"]}
    try:
        initial = initial_from_dict(spec, params.d)
        return SimConfig(params, window, initial, _float(cfg, "t_end"), int(cfg["replicas"]),
                         int(cfg["seed"]), cfg["scheme"])
    except (SurgailisError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid simulation config: {exc}") from exc


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_probes(out: Path, probes) -> None:
    _write_json(out / "probes.json", {cid: eta.array.tolist() for cid, eta in probes})


# commands

def cmd_evolve(cfg, out: Path) -> int:
    params, window = build_params(cfg), build_window(cfg)
    k0 = build_initial_correlation(cfg)
    probes = build_probes(cfg, window)
    times = _floats(cfg, "times")
    if any(t < 0 for t in times):
        raise ConfigError("times must be non-negative")
    if cfg["form"] not in ("alt", "direct"):
        raise ConfigError("form must be 'alt' or 'direct'")
    bound = None
    if cfg["norm_C"] is not None:
        C = _float(cfg, "norm_C")
        if C <= 0:
            raise ConfigError("norm_C must be positive")
        if k0.bound is not None and k0.bound.C <= C:
            norm = k0.bound.norm
        else:
            norm = empirical_sup(k0, [eta for _, eta in probes], C, closed=True)
        bound = sub_poisson_bound(norm, C, params)

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "evolve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "config_id", "k_value", "bound_value"])
        for t in times:
            kt = evolve_correlation(k0, t, params, form=cfg["form"])
            for cid, eta in probes:
                b = "" if bound is None else _fmt(bound.tight(t, len(eta)))
                w.writerow([_fmt(t), cid, _fmt(kt(eta)), b])
    _write_probes(out, probes)
    _write_json(out / "evolve.json", {"version": VERSION, "command": "evolve", "config": cfg})
    return 0


def cmd_resolvent(cfg, out: Path) -> int:
    params, window = build_params(cfg), build_window(cfg)
    k0 = build_initial_correlation(cfg)
    probes = build_probes(cfg, window)
    zs = _floats(cfg, "z_values")
    if any(z <= 0 for z in zs):
        raise ConfigError("z_values must be positive")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "resolvent.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z", "config_id", "r_value"])
        for z in zs:
            R = resolvent_dual(k0, z, params)
            for cid, eta in probes:
                w.writerow([_fmt(z), cid, _fmt(R(eta))])
    _write_probes(out, probes)
    _write_json(out / "resolvent.json", {"version": VERSION, "command": "resolvent", "config": cfg})
    return 0


def cmd_simulate(cfg, out: Path) -> int:
    sim = build_sim_config(cfg)
    ens = simulate(sim, threads=max(1, int(cfg["threads"])))
    write_ensemble(ens, out, "ensemble")
    return 0


def cmd_report(cfg, out: Path) -> int:
    src = Path(cfg["ensemble"]) if cfg["ensemble"] else out / "ensemble.csv"
    if not src.exists():
        raise ConfigError(f"ensemble file {src} not found")
    ens = read_ensemble(src)
    sim = ens.meta
    report = {"version": VERSION, "config": sim.to_dict(), "t": ens.t, "replicas": len(ens),
              "mean_count": float(ens.counts.mean()), "factorial_moments": []}
    closed = None
    if isinstance(sim.initial, PoissonInitial):
        p = sim.params
        A = sim.initial.intensity
        closed = (A - p.rho_inv) * math.exp(-p.m * ens.t) + p.rho_inv
    for j in range(1, int(cfg["max_order"]) + 1):
        try:
            est, se = factorial_moments(ens, j)
        except SurgailisError as exc:
            report["factorial_moments"].append({"order": j, "error": str(exc)})
            continue
        row = {"order": j, "estimate": est, "std_error": se}
        if closed is not None:
            row["closed_form"] = closed ** j
            row["z_score"] = abs(est - closed ** j) / se if se > 0 else None
        report["factorial_moments"].append(row)
    if sim.window.boundary == "periodic":
        half = float(np.min(sim.window.lengths)) / 2
        edges = cfg["r_bins"] if cfg["r_bins"] is not None else np.linspace(0.0, half, 11).tolist()
        try:
            report["gap"] = [b._asdict() for b in gap_estimator(ens, edges)]
        except (SurgailisError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", report)
    return 0


def cmd_verify(cfg, out: Path) -> int:
    names = cfg["checks"]
    if names is None:
        names = list(CRITERIA)
    elif isinstance(names, str):
        names = [n for n in names.split(",") if n]
    unknown = [n for n in names if n not in CRITERIA]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; available: {list(CRITERIA)}")
    if cfg["inject"] not in INJECTIONS:
        raise ConfigError(f"unknown injection {cfg['inject']!r}")
    ctx = VerifyContext(seed=int(cfg["seed"]), replicas=int(cfg["replicas"]),
                        threads=max(1, int(cfg["threads"])), inject=cfg["inject"])
    results = run_checks(names, ctx)
    for r in results:
        print(r.line())
    passed = all(r.passed for r in results)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", {"version": VERSION, "passed": passed, "seed": ctx.seed,
                                      "inject": ctx.inject, "checks": [r.to_dict() for r in results]})
    return 0 if passed else 1


COMMANDS = {
    "evolve": cmd_evolve,
    "simulate": cmd_simulate,
    "resolvent": cmd_resolvent,
    "verify": cmd_verify,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="surgailis", description="Death-immigration dynamics of point configurations.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat JSON config file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--replicas", type=int)
    ap.add_argument("--threads", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        for key in ("seed", "replicas", "threads"):
            if getattr(args, key) is not None:
                cfg[key] = getattr(args, key)
        if int(cfg["seed"]) < 0 or int(cfg["seed"]) >= 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return COMMANDS[args.command](cfg, Path(args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
