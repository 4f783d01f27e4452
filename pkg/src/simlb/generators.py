"""Synthetic stencil workloads and the particle-in-cell workload model."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from .model import WorkloadSnapshot


# -- imbalance -----------------------------------------------------------------

@dataclass(frozen=True)
class RandomPct:
    """Multiply each load by ``1 + p`` or ``1 - p`` with equal probability.

    ``grain`` groups objects into blocks of that many grid points per
    dimension that share one draw; the default of 1 draws per object.
    """

    p: float = 0.4
    seed: int = 0
    grain: Optional[tuple] = None


@dataclass(frozen=True)
class Mod7:
    """Nodes with index 1 or 2 (mod 7) overloaded, index 3 (mod 7) underloaded."""

    over: float = 1.38
    under: float = 0.4


@dataclass(frozen=True)
class Spike:
    """One node's objects are scaled by ``factor``."""

    factor: float = 10.0
    node: int = 0


Imbalance = Union[RandomPct, Mod7, Spike, None]


def imbalance_from_dict(d: Optional[dict]) -> Imbalance:
    if not d:
        return None
    d = dict(d)
    kind = d.pop("kind")
    if "grain" in d and d["grain"] is not None:
        d["grain"] = tuple(d["grain"])
    return {"random": RandomPct, "mod7": Mod7, "spike": Spike}[kind](**d)


def imbalance_to_dict(imb: Imbalance) -> Optional[dict]:
    if imb is None:
        return None
    kind = {RandomPct: "random", Mod7: "mod7", Spike: "spike"}[type(imb)]
    return {"kind": kind, **asdict(imb)}


# -- stencil -------------------------------------------------------------------

STRIPED_RING = "striped-1d-ring"


@dataclass(frozen=True)
class StencilSpec:
    """Grid of objects with a 5-point (2D) or 7-point (3D) stencil.

    ``node_dims`` is either a tuple matching ``grid_dims`` (tiled placement)
    or ``(STRIPED_RING, n)`` for ``n`` column stripes along the first axis.
    """

    grid_dims: tuple
    node_dims: tuple
    periodic: bool = True
    base_load: float = 1.0
    bytes_per_edge: float = 8.0
    imbalance: Imbalance = None

    @property
    def striped(self) -> bool:
        return len(self.node_dims) == 2 and self.node_dims[0] == STRIPED_RING

    @property
    def node_count(self) -> int:
        if self.striped:
            return int(self.node_dims[1])
        return int(np.prod(self.node_dims))

    def validate(self) -> None:
        if len(self.grid_dims) not in (2, 3) or min(self.grid_dims) < 1:
            raise ValueError("grid_dims must be 2 or 3 positive integers")
        if self.striped:
            n = self.node_dims[1]
            if n < 1 or self.grid_dims[0] % n:
                raise ValueError(f"{n} stripes do not divide {self.grid_dims[0]} columns")
        else:
            if len(self.node_dims) != len(self.grid_dims):
                raise ValueError("node_dims must match grid_dims rank")
            for g, p in zip(self.grid_dims, self.node_dims):
                if p < 1 or g % p:
                    raise ValueError(f"node_dims {self.node_dims} do not divide grid {self.grid_dims}")
        if self.base_load <= 0 or self.bytes_per_edge <= 0:
            raise ValueError("base_load and bytes_per_edge must be positive")


def _stencil_edges(grid_dims, periodic: bool) -> np.ndarray:
    n = int(np.prod(grid_dims))
    ids = np.arange(n).reshape(grid_dims)
    parts = []
    for axis, size in enumerate(grid_dims):
        if size < 2:
            continue
        nxt = np.roll(ids, -1, axis=axis)
        a = ids.reshape(-1)
        b = nxt.reshape(-1)
        if not periodic or size == 2:
            # size-2 axes would duplicate the interior edge when wrapped
            coord = np.indices(grid_dims)[axis].reshape(-1)
            keep = coord < size - 1
            a, b = a[keep], b[keep]
        parts.append(np.stack([a, b], axis=1))
    if not parts:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(parts)


def _stencil_placement(spec: StencilSpec) -> np.ndarray:
    idx = np.indices(spec.grid_dims).reshape(len(spec.grid_dims), -1)
    if spec.striped:
        width = spec.grid_dims[0] // spec.node_dims[1]
        return idx[0] // width
    tiles = [idx[d] // (spec.grid_dims[d] // spec.node_dims[d]) for d in range(len(spec.grid_dims))]
    return np.ravel_multi_index(tuple(tiles), tuple(spec.node_dims))


def _apply_imbalance(loads, nodes, imb: Imbalance, grid_dims, node_count):
    if imb is None:
        return loads
    if isinstance(imb, RandomPct):
        rng = np.random.default_rng(imb.seed)
        grain = imb.grain or (1,) * len(grid_dims)
        blocks = tuple(-(-g // b) for g, b in zip(grid_dims, grain))
        signs = rng.choice([-1.0, 1.0], size=blocks)
        idx = np.indices(grid_dims)
        block_idx = tuple(idx[d] // grain[d] for d in range(len(grid_dims)))
        mult = 1.0 + imb.p * signs[block_idx].reshape(-1)
        return loads * mult
    if isinstance(imb, Mod7):
        r = np.arange(node_count) % 7
        node_mult = np.where((r == 1) | (r == 2), imb.over, np.where(r == 3, imb.under, 1.0))
        return loads * node_mult[nodes]
    if isinstance(imb, Spike):
        return np.where(nodes == imb.node, loads * imb.factor, loads)
    raise TypeError(f"unknown imbalance {imb!r}")


def gen_stencil(spec: StencilSpec) -> WorkloadSnapshot:
    """Build the stencil workload: one object per grid point, tiles or stripes."""
    spec.validate()
    n = int(np.prod(spec.grid_dims))
    nodes = _stencil_placement(spec)
    loads = _apply_imbalance(np.full(n, float(spec.base_load)), nodes, spec.imbalance,
                             spec.grid_dims, spec.node_count)
    if np.any(loads <= 0):
        raise ValueError("imbalance produced non-positive loads")
    edges = _stencil_edges(spec.grid_dims, spec.periodic)
    coords = np.indices(spec.grid_dims).reshape(len(spec.grid_dims), -1).T.astype(float)
    return WorkloadSnapshot(
        node_count=spec.node_count,
        threads_per_node=1,
        loads=loads,
        nodes=nodes,
        threads=np.zeros(n, dtype=np.int64),
        edges=edges,
        edge_bytes=np.full(len(edges), float(spec.bytes_per_edge)),
        coords=coords,
        periodic=(spec.periodic,) * len(spec.grid_dims),
    )


def stencil_edge_count(grid_dims, periodic: bool) -> int:
    """Closed-form edge count; a periodic axis wraps only when it has 3 or more points."""
    total = int(np.prod(grid_dims))
    return sum((g if periodic and g > 2 else g - 1) * total // g for g in grid_dims)


# -- particle in cell ----------------------------------------------------------

@dataclass(frozen=True)
class PicSpec:
    grid_cells: int = 1000
    particles: int = 100_000
    rho: float = 0.9
    k: int = 2
    chare_dims: tuple = (12, 12)
    node_count: int = 4
    mapping: str = "striped"
    seed: int = 0
    bytes_per_particle_crossing: float = 1.0
    bytes_halo_const: float = 8.0
    load_per_particle: float = 1.0
    load_per_cell: float = 0.01

    def validate(self) -> None:
        if self.grid_cells < 1 or self.particles < 0:
            raise ValueError("grid_cells must be positive and particles nonnegative")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        if any(c < 1 or c > self.grid_cells for c in self.chare_dims):
            raise ValueError("chare_dims must lie in 1..grid_cells")
        if self.mapping not in ("striped", "quad"):
            raise ValueError("mapping must be 'striped' or 'quad'")
        n_chares = self.chare_dims[0] * self.chare_dims[1]
        if self.node_count < 1 or self.node_count > n_chares:
            raise ValueError("node_count must lie in 1..number of chares")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PicSpec":
        d = dict(d)
        d["chare_dims"] = tuple(d["chare_dims"])
        return cls(**d)


@dataclass
class PicState:
    """Particle positions as integer ``(column, row)`` cells."""

    spec: PicSpec
    cols: np.ndarray
    rows: np.ndarray
    step: int = 0

    @property
    def n_particles(self) -> int:
        return len(self.cols)


def geometric_column_weights(c: int, rho: float) -> np.ndarray:
    """Probability of each column under the ``A * rho**i`` profile."""
    w = rho ** np.arange(c, dtype=float)
    return w / w.sum()


def gen_pic_initial(spec: PicSpec) -> tuple:
    """Place particles with the geometric column profile; rows uniform."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    cols = rng.choice(spec.grid_cells, size=spec.particles,
                      p=geometric_column_weights(spec.grid_cells, spec.rho))
    rows = rng.integers(0, spec.grid_cells, size=spec.particles)
    state = PicState(spec, cols.astype(np.int64), rows.astype(np.int64))
    return state, pic_to_snapshot(state)


def pic_step(state: PicState) -> PicState:
    """Advance every particle ``2k+1`` columns and one row, periodically."""
    c = state.spec.grid_cells
    return PicState(state.spec,
                    (state.cols + 2 * state.spec.k + 1) % c,
                    (state.rows + 1) % c,
                    state.step + 1)


def chare_bounds(c: int, parts: int) -> np.ndarray:
    """Cell boundaries of ``parts`` nearly equal blocks of ``c`` cells."""
    return (np.arange(parts + 1) * c) // parts


def _chare_of(cells, bounds):
    return np.searchsorted(bounds, cells, side="right") - 1


def pic_initial_placement(spec: PicSpec) -> np.ndarray:
    """Chare-to-node map; chare ids run column-major (``id = cx * ny + cy``)."""
    nx, ny = spec.chare_dims
    n = nx * ny
    if spec.mapping == "striped":
        return (np.arange(n) * spec.node_count) // n
    px, py = _quad_dims(spec.node_count)
    cx, cy = np.divmod(np.arange(n), ny)
    tx = (cx * px) // nx
    ty = (cy * py) // ny
    return tx * py + ty


def _quad_dims(p: int) -> tuple:
    a = int(np.floor(np.sqrt(p)))
    while p % a:
        a -= 1
    return p // a, a


def pic_chare_counts(state: PicState) -> np.ndarray:
    """Particle count per chare (column-major chare ids)."""
    spec = state.spec
    nx, ny = spec.chare_dims
    bx = chare_bounds(spec.grid_cells, nx)
    by = chare_bounds(spec.grid_cells, ny)
    ids = _chare_of(state.cols, bx) * ny + _chare_of(state.rows, by)
    return np.bincount(ids, minlength=nx * ny)


def pic_to_snapshot(state: PicState, placement=None) -> WorkloadSnapshot:
    """Chare-level workload for the current particle state.

    Loads are affine in particle and cell counts; edge bytes count particles
    crossing the shared chare boundary on the next step plus a halo constant.
    A diagonal crossing is charged to the horizontal and then the vertical
    boundary it passes.
    """
    spec = state.spec
    c = spec.grid_cells
    nx, ny = spec.chare_dims
    bx = chare_bounds(c, nx)
    by = chare_bounds(c, ny)
    if placement is None:
        placement = pic_initial_placement(spec)

    cx = _chare_of(state.cols, bx)
    cy = _chare_of(state.rows, by)
    counts = np.bincount(cx * ny + cy, minlength=nx * ny)
    widths = np.diff(bx)
    heights = np.diff(by)
    cells = np.outer(widths, heights).reshape(-1)
    loads = spec.load_per_particle * counts + spec.load_per_cell * cells

    cx2 = _chare_of((state.cols + 2 * spec.k + 1) % c, bx)
    cy2 = _chare_of((state.rows + 1) % c, by)
    crossing = {}
    hmask = cx2 != cx
    if hmask.any():
        a = cx[hmask] * ny + cy[hmask]
        b = cx2[hmask] * ny + cy[hmask]
        _accumulate(crossing, a, b)
    vmask = cy2 != cy
    if vmask.any():
        a = cx2[vmask] * ny + cy[vmask]
        b = cx2[vmask] * ny + cy2[vmask]
        _accumulate(crossing, a, b)

    edges = []
    for x, y in itertools.product(range(nx), range(ny)):
        me = x * ny + y
        if nx > 1 and (x + 1 < nx or nx > 2):
            edges.append(tuple(sorted((me, ((x + 1) % nx) * ny + y))))
        if ny > 1 and (y + 1 < ny or ny > 2):
            edges.append(tuple(sorted((me, x * ny + (y + 1) % ny))))
    edges = sorted(set(edges))
    ebytes = [spec.bytes_halo_const + spec.bytes_per_particle_crossing * crossing.get(e, 0)
              for e in edges]

    centers = np.stack(np.meshgrid((bx[:-1] + bx[1:]) / 2.0, (by[:-1] + by[1:]) / 2.0,
                                   indexing="ij"), axis=-1).reshape(-1, 2)
    return WorkloadSnapshot(
        node_count=spec.node_count,
        threads_per_node=1,
        loads=loads,
        nodes=placement,
        threads=np.zeros(nx * ny, dtype=np.int64),
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        edge_bytes=ebytes,
        coords=centers,
        periodic=(True, True),
    )


def _accumulate(out: dict, a, b):
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    pairs, counts = np.unique(np.stack([lo, hi], axis=1), axis=0, return_counts=True)
    for (p, q), k in zip(pairs.tolist(), counts.tolist()):
        out[(p, q)] = out.get((p, q), 0) + k


def node_particle_counts(state: PicState, placement) -> np.ndarray:
    counts = pic_chare_counts(state)
    out = np.bincount(np.asarray(placement), weights=counts, minlength=state.spec.node_count)
    return out.astype(np.int64)
