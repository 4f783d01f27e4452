"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The lines are printed in the terminal summary of every pytest run, or
directly when this file is executed as a script.
"""

import json
import time

import numpy as np
import pytest

from simlb.diffusion import virtual_balance
from simlb.generators import PicSpec, gen_stencil
from simlb.metrics import compute_metrics
from simlb.migration import apply_plan, object_node_comm_scratch, select_objects_comm, select_objects_coord
from simlb.model import node_comm_matrix
from simlb.neighbors import NeighborGraph, build_comm_neighbors, build_coord_neighbors, compute_centroids
from simlb.presets import mod7_benchmark, ring_spike, tiled_random
from simlb.simulate import run_simulation
from simlb.strategy import STRATEGIES, StrategyConfig, plan_round, rebalance

from conftest import random_snapshot
from test_diffusion import oracle as diffusion_oracle

RESULTS = {}


class Criterion:
    """Collects named checks; the test fails if any check fails."""

    def __init__(self, key, title):
        self.key, self.title = key, title
        self.checks = []
        self.t0 = time.perf_counter()

    def check(self, ok, text):
        self.checks.append((bool(ok), text))

    def finish(self, limit=None):
        elapsed = time.perf_counter() - self.t0
        if limit is not None:
            self.check(elapsed < limit, f"runtime {elapsed:.1f}s < {limit}s")
        ok = all(c for c, _ in self.checks)
        failed = [t for c, t in self.checks if not c]
        detail = "; ".join(failed if failed else [t for _, t in self.checks])
        RESULTS[self.key] = f"{'PASS' if ok else 'FAIL'}  {self.key} {self.title}: {detail}"
        assert ok, RESULTS[self.key]


def test_c1_neighbor_count_trend():
    c = Criterion("C1", "ring spike, diff-comm K=1,2,4,8")
    s = gen_stencil(ring_spike())
    ratios, ext = [], []
    for K in (1, 2, 4, 8):
        out, _ = rebalance(s, StrategyConfig("diff-comm", neighbors=K))
        m = compute_metrics(out)
        ratios.append(m.max_avg_load)
        ext.append(m.ext_int_ratio)
    c.check(all(a > b for a, b in zip(ratios, ratios[1:])),
            "max/avg strictly decreasing " + " > ".join(f"{r:.3f}" for r in ratios))
    c.check(ratios[0] >= 3.0, f"K=1 {ratios[0]:.3f} >= 3.0")
    c.check(ratios[-1] <= 1.3, f"K=8 {ratios[-1]:.3f} <= 1.3")
    c.check(ext[-1] >= ext[0], f"ext/int K=8 {ext[-1]:.3f} >= K=1 {ext[0]:.3f}")
    c.finish(limit=5)


def test_c2_tiled_random_bands():
    c = Criterion("C2", "16-node tiled stencil, +-40%, K=4")
    s = gen_stencil(tiled_random())
    init = compute_metrics(s).max_avg_load
    comm = compute_metrics(rebalance(s, StrategyConfig("diff-comm", neighbors=4))[0])
    coord = compute_metrics(rebalance(s, StrategyConfig("diff-coord", neighbors=4))[0])
    c.check(1.4 <= init <= 2.1, f"initial {init:.3f} in [1.4, 2.1]")
    c.check(comm.max_avg_load <= 1.15, f"diff-comm {comm.max_avg_load:.3f} <= 1.15")
    c.check(coord.max_avg_load <= 1.20, f"diff-coord {coord.max_avg_load:.3f} <= 1.20")
    c.check(comm.ext_int_ratio <= coord.ext_int_ratio,
            f"ext/int comm {comm.ext_int_ratio:.3f} <= coord {coord.ext_int_ratio:.3f}")
    c.finish(limit=5)


def test_c3_mod7_ordering():
    c = Criterion("C3", "mod-7 3D stencil on 32 nodes")
    s = gen_stencil(mod7_benchmark(2))
    init = compute_metrics(s).max_avg_load
    rows = {}
    for name in ("greedy-refine", "diff-comm", "diff-coord"):
        rows[name] = compute_metrics(rebalance(s, StrategyConfig(name, neighbors=4))[0], s)
    g, d, k = rows["greedy-refine"], rows["diff-comm"], rows["diff-coord"]
    c.check(abs(init - 1.37) <= 0.05, f"initial {init:.3f} = 1.37 +- 0.05")
    c.check(g.max_avg_load <= 1.02, f"greedy {g.max_avg_load:.3f} <= 1.02")
    c.check(d.max_avg_load <= 1.10, f"diff-comm {d.max_avg_load:.3f} <= 1.10")
    c.check(d.migration_fraction <= 0.25, f"diff-comm migrations {d.migration_fraction:.3f} <= 0.25")
    c.check(d.ext_int_ratio < g.ext_int_ratio,
            f"ext/int diff-comm {d.ext_int_ratio:.3f} < greedy {g.ext_int_ratio:.3f}")
    c.check(k.ext_int_ratio >= d.ext_int_ratio,
            f"ext/int diff-coord {k.ext_int_ratio:.3f} >= diff-comm {d.ext_int_ratio:.3f}")
    c.finish(limit=30)


@pytest.fixture(scope="module")
def pic_runs():
    spec = PicSpec()
    t0 = time.perf_counter()
    runs = {name: run_simulation(spec, StrategyConfig(name), lb_every=10, steps=200)
            for name in ("none", "diff-comm", "diff-coord")}
    return runs, time.perf_counter() - t0


def test_c4_pic_improvement(pic_runs):
    c = Criterion("C4", "PIC 200 steps, LB every 10")
    runs, elapsed = pic_runs
    base = runs["none"].report.diagnostics["mean_particle_ratio"]
    for name in ("diff-comm", "diff-coord"):
        mean = runs[name].report.diagnostics["mean_particle_ratio"]
        gain = 1 - mean / base
        c.check(gain >= 0.40, f"{name} {mean:.3f} vs none {base:.3f} ({gain:.0%} >= 40%)")
    c.check(elapsed < 60, f"runtime {elapsed:.1f}s < 60s")
    c.finish()


def test_c5_traveling_wave(pic_runs):
    c = Criterion("C5", "no-LB particle counts are circular shifts")
    series = pic_runs[0]["none"].node_particles
    spec = PicSpec()
    shift = spec.grid_cells // spec.node_count // (2 * spec.k + 1)
    ok = all(np.array_equal(series[:, n], np.roll(series[:, 0], shift * n))
             for n in range(spec.node_count))
    c.check(ok, f"node n series == node 0 rolled by {shift}*n steps, exact")
    c.finish()


def test_c6_property_suite(tmp_path):
    c = Criterion("C6", "property suite")
    rng = np.random.default_rng(2024)
    instances = [random_snapshot(rng, int(rng.integers(8, 51)), int(rng.integers(2, 7)))
                 for _ in range(40)]
    workloads = [gen_stencil(tiled_random()), gen_stencil(ring_spike()), gen_stencil(mod7_benchmark(1))]

    conserved = cap = graphs = True
    for s in instances + workloads:
        total = s.node_loads().sum()
        for name in STRATEGIES:
            plan = plan_round(s, StrategyConfig(name, neighbors=3))
            conserved &= abs(apply_plan(s, plan).node_loads().sum() - total) <= 1e-9 * total
            tp = plan.diagnostics.get("transfer_plan")
            if tp is not None:
                out = np.zeros(s.node_count)
                for (i, _), t in tp.transfers.items():
                    out[i] += t
                cap &= bool(np.all(out <= s.node_loads() * (1 + 1e-12)))
        for K in (1, 2, 4):
            for g in (build_comm_neighbors(node_comm_matrix(s), s.node_count, K),
                      build_coord_neighbors(compute_centroids(s)[0], K)):
                adj = g.adjacency()
                graphs &= g.degrees().max(initial=0) <= K
                graphs &= all(i in adj[j] for i in range(s.node_count) for j in adj[i])
    c.check(conserved, "load conserved under every plan")
    c.check(cap, "single-hop cap holds")
    c.check(graphs, "degree <= K and symmetric")

    incremental = True
    for s in instances:
        plan = virtual_balance(s.node_loads(), build_comm_neighbors(node_comm_matrix(s), s.node_count, 3))

        def comm_hook(comm):
            nonlocal incremental
            scratch = object_node_comm_scratch(s, comm.nodes)
            for a, b in zip(comm.as_dicts(), scratch):
                keys = {k for k in a if abs(a[k]) > 1e-9} | {k for k in b if abs(b[k]) > 1e-9}
                incremental &= all(abs(a.get(k, 0) - b.get(k, 0)) <= 1e-9 * max(1, b.get(k, 0))
                                   for k in keys)

        select_objects_comm(s, plan, on_move=comm_hook)
        cent, _ = compute_centroids(s)
        cplan = virtual_balance(s.node_loads(), build_coord_neighbors(cent, 3))
        moves = select_objects_coord(s, cplan, cent).moves
        placement = s.nodes.copy()
        step = iter(moves)

        def coord_hook(cur, counts):
            nonlocal incremental
            o, _, j = next(step)
            placement[o] = j
            for node in np.flatnonzero(counts):
                incremental &= np.allclose(cur[node], s.coords[placement == node].mean(axis=0),
                                           rtol=1e-9, atol=1e-9)

        select_objects_coord(s, cplan, cent, on_move=coord_hook)
    c.check(incremental, "incremental comm and centroid state == scratch (<= 50 objects)")

    fixed_point = True
    for _ in range(60):
        n = int(rng.integers(2, 9))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5] or [(0, 1)]
        loads = rng.uniform(0, 10, n).tolist()
        got = virtual_balance(loads, NeighborGraph(n, frozenset(pairs), n), eps=0.01, max_iters=500)
        want = diffusion_oracle(loads, pairs, 0.01, 500)
        fixed_point &= all(abs(got.transfers.get(k, 0) - want.get(k, 0)) <= 1e-9
                           for k in set(want) | set(got.transfers))
    c.check(fixed_point, "virtual_balance == brute-force iteration (<= 8 nodes)")

    from simlb.cli import main
    snap = tmp_path / "in.snap"
    main(["gen", "stencil", "--grid", "32x32", "--nodes", "4x4", "--imbalance", "random",
          "--grain", "8x8", "--seed", "3", "-o", str(snap)])
    for name in ("a", "b"):
        main(["run", str(snap), "--strategy", "diff-comm", "--steps", "2", "--dump-snapshots",
              "--out-dir", str(tmp_path), "--name", name])
    files = json.loads((tmp_path / "a" / "manifest.json").read_text())["files"]
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in files if f != "timing.json")
    c.check(same, f"two CLI runs byte-identical ({len(files) - 1} files)")
    c.finish()


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
