"""Workload data model, invariants and the snapshot text format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

FORMAT_TAG = "simlb-snapshot v1"


class SnapshotError(ValueError):
    """Raised on malformed snapshot input or violated invariants."""


@dataclass(frozen=True)
class ObjectInfo:
    id: int
    home_node: int
    home_thread: int
    load: float
    coords: Optional[tuple] = None


@dataclass(frozen=True)
class CommEdge:
    a: int
    b: int
    bytes: float


@dataclass(eq=False)
class WorkloadSnapshot:
    """Immutable system state: object placement, loads, coordinates and edges.

    Objects are stored column-wise in numpy arrays indexed by object id
    (ids are dense ``0..n-1``). Edges are undirected and stored with
    ``a < b``.
    """

    node_count: int
    threads_per_node: int
    loads: np.ndarray
    nodes: np.ndarray
    threads: np.ndarray
    edges: np.ndarray
    edge_bytes: np.ndarray
    coords: Optional[np.ndarray] = None
    periodic: Optional[tuple] = None
    _adj: Optional[list] = field(default=None, repr=False)

    def __post_init__(self):
        self.loads = np.asarray(self.loads, dtype=float)
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        self.threads = np.asarray(self.threads, dtype=np.int64)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.edge_bytes = np.asarray(self.edge_bytes, dtype=float).reshape(-1)
        self.edges = np.sort(edges, axis=1)
        if self.coords is not None:
            self.coords = np.asarray(self.coords, dtype=float)
            if self.coords.ndim == 1:
                self.coords = self.coords.reshape(-1, 1)
        if self.periodic is not None:
            self.periodic = tuple(bool(p) for p in self.periodic)
        for arr in (self.loads, self.nodes, self.threads, self.edges,
                    self.edge_bytes, self.coords):
            if arr is not None:
                arr.setflags(write=False)
        self.validate()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_records(cls, node_count, threads_per_node, objects: Sequence[ObjectInfo],
                     edges: Sequence[CommEdge], periodic=None) -> "WorkloadSnapshot":
        objs = sorted(objects, key=lambda o: o.id)
        ids = [o.id for o in objs]
        if ids != list(range(len(objs))):
            raise SnapshotError("object ids must be dense 0..n-1")
        coords = None
        if objs and objs[0].coords is not None:
            coords = np.array([o.coords for o in objs], dtype=float)
        return cls(
            node_count=node_count,
            threads_per_node=threads_per_node,
            loads=[o.load for o in objs],
            nodes=[o.home_node for o in objs],
            threads=[o.home_thread for o in objs],
            edges=[(e.a, e.b) for e in edges],
            edge_bytes=[e.bytes for e in edges],
            coords=coords,
            periodic=periodic,
        )

    def replace_placement(self, nodes, threads=None) -> "WorkloadSnapshot":
        """New snapshot with the same objects and edges but a new placement."""
        out = WorkloadSnapshot(
            node_count=self.node_count,
            threads_per_node=self.threads_per_node,
            loads=self.loads,
            nodes=nodes,
            threads=self.threads if threads is None else threads,
            edges=self.edges,
            edge_bytes=self.edge_bytes,
            coords=self.coords,
            periodic=self.periodic,
        )
        out._adj = self._adj
        return out

    # -- views ----------------------------------------------------------------

    @property
    def n_objects(self) -> int:
        return len(self.loads)

    @property
    def coord_dims(self) -> int:
        return 0 if self.coords is None else self.coords.shape[1]

    @property
    def objects(self) -> list:
        coords = self.coords
        return [
            ObjectInfo(i, int(self.nodes[i]), int(self.threads[i]), float(self.loads[i]),
                       None if coords is None else tuple(float(c) for c in coords[i]))
            for i in range(self.n_objects)
        ]

    @property
    def comm_edges(self) -> list:
        return [CommEdge(int(a), int(b), float(w))
                for (a, b), w in zip(self.edges, self.edge_bytes)]

    def node_loads(self) -> np.ndarray:
        return np.bincount(self.nodes, weights=self.loads, minlength=self.node_count)

    def node_objects(self) -> list:
        """Object ids per node, ascending."""
        order = np.argsort(self.nodes, kind="stable")
        counts = np.bincount(self.nodes, minlength=self.node_count)
        return [list(map(int, part)) for part in np.split(order, np.cumsum(counts)[:-1])]

    def adjacency(self) -> list:
        """Per-object list of ``(partner, bytes)`` pairs."""
        if self._adj is None:
            adj = [[] for _ in range(self.n_objects)]
            for (a, b), w in zip(self.edges.tolist(), self.edge_bytes.tolist()):
                adj[a].append((b, w))
                adj[b].append((a, w))
            self._adj = adj
        return self._adj

    # -- invariants -----------------------------------------------------------

    def validate(self) -> None:
        n = len(self.loads)
        if self.node_count < 1 or self.threads_per_node < 1:
            raise SnapshotError("node_count and threads_per_node must be positive")
        if not (len(self.nodes) == len(self.threads) == n):
            raise SnapshotError("object arrays have inconsistent lengths")
        if n and np.any(self.loads < 0):
            i = int(np.argmax(self.loads < 0))
            raise SnapshotError(f"object {i}: negative load {self.loads[i]}")
        if n and (self.nodes.min() < 0 or self.nodes.max() >= self.node_count):
            i = int(np.argmax((self.nodes < 0) | (self.nodes >= self.node_count)))
            raise SnapshotError(f"object {i}: home_node {self.nodes[i]} out of range")
        if n and (self.threads.min() < 0 or self.threads.max() >= self.threads_per_node):
            i = int(np.argmax((self.threads < 0) | (self.threads >= self.threads_per_node)))
            raise SnapshotError(f"object {i}: home_thread {self.threads[i]} out of range")
        if self.coords is not None and len(self.coords) != n:
            raise SnapshotError("coords must be given for every object")
        if len(self.edges) != len(self.edge_bytes):
            raise SnapshotError("edge arrays have inconsistent lengths")
        if len(self.edges):
            bad = (self.edges < 0) | (self.edges >= n)
            if bad.any():
                k = int(np.argmax(bad.any(axis=1)))
                a, b = self.edges[k]
                raise SnapshotError(f"edge {k} ({a}, {b}): endpoint references unknown object")
            loops = self.edges[:, 0] == self.edges[:, 1]
            if loops.any():
                k = int(np.argmax(loops))
                raise SnapshotError(f"edge {k}: self-loop on object {self.edges[k, 0]}")
            if np.any(self.edge_bytes < 0):
                k = int(np.argmax(self.edge_bytes < 0))
                raise SnapshotError(f"edge {k}: negative bytes")
            key = self.edges[:, 0] * n + self.edges[:, 1]
            uniq, counts = np.unique(key, return_counts=True)
            if np.any(counts > 1):
                dup = int(uniq[np.argmax(counts > 1)])
                raise SnapshotError(f"duplicate edge ({dup // n}, {dup % n})")

    def __eq__(self, other) -> bool:
        if not isinstance(other, WorkloadSnapshot):
            return NotImplemented
        if (self.node_count, self.threads_per_node, self.periodic) != (
                other.node_count, other.threads_per_node, other.periodic):
            return False
        if (self.coords is None) != (other.coords is None):
            return False
        same = (np.array_equal(self.loads, other.loads)
                and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.threads, other.threads))
        if not same:
            return False
        if self.coords is not None and not np.array_equal(self.coords, other.coords):
            return False
        a, b = _canonical_edges(self), _canonical_edges(other)
        return np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    __hash__ = None


def _canonical_edges(s: WorkloadSnapshot):
    if not len(s.edges):
        return s.edges, s.edge_bytes
    order = np.lexsort((s.edges[:, 1], s.edges[:, 0]))
    return s.edges[order], s.edge_bytes[order]


# -- file format ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def save_snapshot(s: WorkloadSnapshot, path) -> None:
    """Write ``s`` in the line-oriented snapshot format.

    Output is byte-deterministic: objects by id, edges by ``(min, max)`` endpoint.
    """
    lines = [FORMAT_TAG,
             f"nodes {s.node_count}",
             f"threads {s.threads_per_node}",
             f"coord_dims {s.coord_dims}"]
    if s.periodic is not None:
        lines.append("periodic " + " ".join("1" if p else "0" for p in s.periodic))
    lines.append(f"objects {s.n_objects}")
    for i in range(s.n_objects):
        rec = f"O {i} {s.nodes[i]} {s.threads[i]} {_fmt(s.loads[i])}"
        if s.coords is not None:
            rec += " " + " ".join(_fmt(c) for c in s.coords[i])
        lines.append(rec)
    edges, weights = _canonical_edges(s)
    lines.append(f"edges {len(edges)}")
    for (a, b), w in zip(edges.tolist(), weights.tolist()):
        lines.append(f"E {a} {b} {_fmt(w)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_snapshot(path, write_id_map: bool = False) -> WorkloadSnapshot:
    """Parse a snapshot file and return its canonical (dense-id) form.

    Sparse object ids are remapped to ``0..n-1`` in ascending order. With
    ``write_id_map`` the mapping is written next to the file as
    ``<path>.idmap.json``.
    """
    path = Path(path)
    header = {}
    objects = []
    edges = []
    saw_tag = False
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not saw_tag:
            if line != FORMAT_TAG:
                raise SnapshotError(f"{path}:{lineno}: expected header '{FORMAT_TAG}'")
            saw_tag = True
            continue
        tok = line.split()
        try:
            if tok[0] == "O":
                if len(tok) < 5:
                    raise SnapshotError(f"{path}:{lineno}: object record needs id node thread load")
                objects.append((int(tok[1]), int(tok[2]), int(tok[3]), float(tok[4]),
                                tuple(float(t) for t in tok[5:]), lineno))
            elif tok[0] == "E":
                if len(tok) != 4:
                    raise SnapshotError(f"{path}:{lineno}: edge record needs a b bytes")
                edges.append((int(tok[1]), int(tok[2]), float(tok[3]), lineno))
            elif tok[0] in ("nodes", "threads", "coord_dims", "objects", "edges"):
                header[tok[0]] = int(tok[1])
            elif tok[0] == "periodic":
                header["periodic"] = tuple(t not in ("0", "false", "False") for t in tok[1:])
            else:
                raise SnapshotError(f"{path}:{lineno}: unknown record '{tok[0]}'")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, SnapshotError):
                raise
            raise SnapshotError(f"{path}:{lineno}: {exc}") from None
    if not saw_tag:
        raise SnapshotError(f"{path}: empty file")
    if "nodes" not in header:
        raise SnapshotError(f"{path}: missing 'nodes' header")
    dims = header.get("coord_dims", 0)
    for oid, _, _, _, c, lineno in objects:
        if len(c) != dims:
            raise SnapshotError(f"{path}:{lineno}: object {oid} has {len(c)} coords, expected {dims}")
    for key, items in (("objects", objects), ("edges", edges)):
        if key in header and header[key] != len(items):
            raise SnapshotError(f"{path}: header declares {header[key]} {key}, found {len(items)}")

    source_ids = sorted(o[0] for o in objects)
    if len(set(source_ids)) != len(source_ids):
        raise SnapshotError(f"{path}: duplicate object id")
    remap = {old: new for new, old in enumerate(source_ids)}
    for a, b, _, lineno in edges:
        for end in (a, b):
            if end not in remap:
                raise SnapshotError(f"{path}:{lineno}: edge ({a}, {b}) references unknown object {end}")
    objects.sort(key=lambda o: o[0])
    snap = WorkloadSnapshot(
        node_count=header["nodes"],
        threads_per_node=header.get("threads", 1),
        loads=[o[3] for o in objects],
        nodes=[o[1] for o in objects],
        threads=[o[2] for o in objects],
        edges=[(remap[a], remap[b]) for a, b, _, _ in edges],
        edge_bytes=[e[2] for e in edges],
        coords=np.array([o[4] for o in objects], dtype=float).reshape(len(objects), dims) if dims else None,
        periodic=header.get("periodic"),
    )
    if write_id_map and source_ids != list(range(len(source_ids))):
        Path(str(path) + ".idmap.json").write_text(json.dumps(source_ids))
    return snap


# -- derived quantities --------------------------------------------------------

def node_comm_matrix(s: WorkloadSnapshot) -> dict:
    """Bytes exchanged between each unordered node pair ``(i, j)``, ``i < j``.

    Pairs with zero bytes are omitted.
    """
    if not len(s.edges):
        return {}
    na = s.nodes[s.edges[:, 0]]
    nb = s.nodes[s.edges[:, 1]]
    cross = na != nb
    lo = np.minimum(na, nb)[cross]
    hi = np.maximum(na, nb)[cross]
    key = lo * s.node_count + hi
    sums = np.bincount(key, weights=s.edge_bytes[cross], minlength=1)
    out = {}
    for k in np.flatnonzero(sums):
        out[(int(k // s.node_count), int(k % s.node_count))] = float(sums[k])
    return out


def internal_bytes(s: WorkloadSnapshot) -> float:
    if not len(s.edges):
        return 0.0
    same = s.nodes[s.edges[:, 0]] == s.nodes[s.edges[:, 1]]
    return float(s.edge_bytes[same].sum())


@dataclass
class MigrationPlan:
    """Object moves between nodes plus within-node thread reassignments."""

    moves: list = field(default_factory=list)         # (object, from_node, to_node)
    thread_moves: list = field(default_factory=list)  # (object, to_thread)
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.moves)

    def to_dict(self) -> dict:
        return {
            "moves": [list(m) for m in self.moves],
            "thread_moves": [list(m) for m in self.thread_moves],
        }
