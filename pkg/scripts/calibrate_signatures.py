#!/usr/bin/env python3
"""Pilot runs behind the signature-regression thresholds.

Simulates the named reference controllers on seeds {0, 1, 2} plus a
200-controller random baseline, and prints the feature values and baseline
percentiles the acceptance suite freezes as its oracle. Re-run after any
change to the kinematic defaults and update tests/test_acceptance.py if
the printed margins move.
"""
import argparse

import numpy as np

from hetswarm.controllers import preset
from hetswarm.features import (
    MetricWindow,
    angular_momentum,
    group_rotation,
    radial_variance,
    scatter,
)
from hetswarm.search import SearchConfig, derive_seed, sample_genome
from hetswarm.sim import TYPE_A, TYPE_B, SimConfig, simulate


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--baseline-count", type=int, default=200)
    parser.add_argument("--baseline-seed", type=int, default=2024)
    args = parser.parse_args()

    config = SimConfig()
    everyone = np.arange(config.n_agents)
    end = MetricWindow(config.horizon - 300, config.horizon)
    early = MetricWindow(0, 100)

    rng = np.random.default_rng(args.baseline_seed)
    search = SearchConfig()
    baseline = []
    for i in range(args.baseline_count):
        traj = simulate(sample_genome(rng, search), config, derive_seed(args.baseline_seed, i))
        baseline.append(
            (
                abs(angular_momentum(traj, everyone, end)),
                radial_variance(traj, everyone, end),
                abs(group_rotation(traj, everyone, end)),
            )
        )
    baseline = np.array(baseline)
    print(f"baseline over {args.baseline_count} random controllers:")
    for name, column in zip(("|angular_momentum|", "radial_variance", "|group_rotation|"), baseline.T):
        percentiles = {p: np.percentile(column, p) for p in (10, 35, 50, 90)}
        formatted = "  ".join(f"p{p}={v:.4f}" for p, v in percentiles.items())
        print(f"  {name:20s} {formatted}")

    print("\nreference controllers (seeds 0, 1, 2):")
    for name in ("aggregation", "dispersal", "cyclic_pursuit", "milling", "aggregation_dispersal"):
        for seed in (0, 1, 2):
            traj = simulate(preset(name), config, seed)
            ratio = scatter(traj, everyone, end) / scatter(traj, everyone, early)
            am = abs(angular_momentum(traj, everyone, end))
            rv = radial_variance(traj, everyone, end)
            gr = abs(group_rotation(traj, everyone, end))
            s_a = scatter(traj, traj.type_indices(TYPE_A), end)
            s_b = scatter(traj, traj.type_indices(TYPE_B), end)
            print(
                f"  {name:24s} seed {seed}: scatter end/start={ratio:.3f} |am|={am:.3f} "
                f"rv={rv:.4f} |gr|={gr:.3f} scatter A={s_a:.3f} B={s_b:.3f}"
            )


if __name__ == "__main__":
    main()
