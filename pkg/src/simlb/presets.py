"""Named workload configurations used by the demos and acceptance tests."""

from .generators import STRIPED_RING, Mod7, PicSpec, RandomPct, Spike, StencilSpec

# 4-column stripes give every node the same 1:7 external/internal byte ratio.
RING_NODES = 12


def ring_spike(nodes: int = RING_NODES, rows: int = 16, factor: float = 10.0) -> StencilSpec:
    """Nodes form a 1D ring of column stripes; node 0 is overloaded."""
    return StencilSpec(grid_dims=(4 * nodes, rows), node_dims=(STRIPED_RING, nodes),
                       imbalance=Spike(factor))


def tiled_random(seed: int = 3, grid: int = 32, nodes: int = 4) -> StencilSpec:
    """2D tiled stencil on ``nodes x nodes`` processors with +-40% loads.

    Draws are shared across each processor tile so the node-level
    imbalance is visible at this object count.
    """
    tile = grid // nodes
    return StencilSpec(grid_dims=(grid, grid), node_dims=(nodes, nodes),
                       imbalance=RandomPct(0.4, seed, grain=(tile, tile)))


BENCHMARKS = {
    # tiles 4x4x2 and 8x8x8 give initial external/internal ratios 0.5 and 1/7
    1: dict(grid_dims=(8, 8, 4), node_dims=(2, 2, 2)),
    2: dict(grid_dims=(32, 32, 16), node_dims=(4, 4, 2)),
    3: dict(grid_dims=(16, 16, 16), node_dims=(8, 4, 4)),
}


def mod7_benchmark(which: int = 2) -> StencilSpec:
    return StencilSpec(**BENCHMARKS[which], imbalance=Mod7())


def pic_default(**overrides) -> PicSpec:
    return PicSpec(**overrides)
