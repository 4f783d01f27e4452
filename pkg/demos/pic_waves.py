"""
Particles drifting across processors
====================================

A particle-in-cell grid of 1000x1000 cells starts with most particles in
the leftmost columns. Every step each particle moves five columns right
and one row up, so the crowd sweeps across the four column stripes of
processors and wraps around after 200 steps. Balancing every ten steps
lets chares follow the crowd.
"""

import numpy as np

from simlb import PicSpec, StrategyConfig, run_simulation

spec = PicSpec()
runs = {name: run_simulation(spec, StrategyConfig(name), lb_every=10, steps=200)
        for name in ("none", "greedy-refine", "diff-comm", "diff-coord")}

# without balancing, each node's particle count is the same wave shifted in
# time: a node is 250 columns wide and particles cover 5 columns per step
counts = runs["none"].node_particles
for node in range(spec.node_count):
    peak = int(np.argmax(counts[:, node])) + 1
    print(f"node {node}: peak {counts[:, node].max():6d} particles at step {peak}")

# mean max/avg particle ratio from the first balancing step on
base = runs["none"].report.diagnostics["mean_particle_ratio"]
for name, res in runs.items():
    mean = res.report.diagnostics["mean_particle_ratio"]
    print(f"{name:<14} mean max/avg {mean:.2f}  improvement {1 - mean / base:5.1%}")

# a coarse trace of the ratio every 10 steps
bars = " .:-=+*#%@"
for name, res in runs.items():
    r = np.array(res.particle_ratio[9::10])
    trace = "".join(bars[min(int(v / 4.0 * (len(bars) - 1)), len(bars) - 1)] for v in r)
    print(f"{name:<14} |{trace}|")
