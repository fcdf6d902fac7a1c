"""Decay of the time-averaged semigroup towards its mean-ergodic limit.

Uses ``G = 1{|eta| <= 3} prod g`` with ``g = 0.5 + 0.3 sin 3x`` on [0, 1] and
reports the probe sup of ``|avg_t G - limit|`` with the fitted power of t.
"""
import argparse

import numpy as np

from surgailis.config_core import SetFunction, coherent_state, probe_set
from surgailis.evolution import ModelParams, fit_power, mean_ergodic_average, mean_ergodic_limit
from surgailis.lp_integration import LPIntegralSpec, Quadrature, Window


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--sigma", type=float, default=2.0)
    ap.add_argument("--times", type=float, nargs="+", default=[2.5, 5.0, 10.0, 20.0, 40.0, 80.0])
    args = ap.parse_args()

    p = ModelParams(args.m, args.sigma)
    spec = LPIntegralSpec(Window((0.0,), (1.0,)), 1.0, 3, Quadrature(24, 1 << 12))
    eg = coherent_state(lambda X: 0.5 + 0.3 * np.sin(3.0 * X[..., 0]))
    G = SetFunction(points_func=lambda X: eg.on_points(X) * (X.shape[1] <= 3))
    target = mean_ergodic_limit(G, p, spec)
    probes = probe_set(np.random.default_rng(0), range(4), 0.0, 1.0, per_size=2)
    norms = []
    for t in args.times:
        avg = mean_ergodic_average(G, t, p, spec)
        norms.append(max(abs(avg(e) - target(e)) for e in probes))
        print(f"t = {t:6.1f}   sup |avg - limit| = {norms[-1]:.6e}   t * sup = {t * norms[-1]:.4f}")
    print(f"fitted exponent {fit_power(args.times, norms):.4f} (expected -1)")


if __name__ == "__main__":
    main()
