"""Object selection for node transfers, thread refinement and plan application."""

from __future__ import annotations

import heapq

import numpy as np

from .diffusion import TransferPlan
from .model import MigrationPlan, SnapshotError, WorkloadSnapshot


class ObjectNodeComm:
    """Bytes each object exchanges with objects resident on each node.

    Kept consistent with a mutable placement as objects move.
    """

    def __init__(self, s: WorkloadSnapshot, nodes=None):
        self.adj = s.adjacency()
        self.nodes = np.array(s.nodes if nodes is None else nodes, dtype=np.int64)
        self.table = [dict() for _ in range(s.n_objects)]
        for o, partners in enumerate(self.adj):
            row = self.table[o]
            for p, w in partners:
                nd = int(self.nodes[p])
                row[nd] = row.get(nd, 0.0) + w

    def bytes_to(self, o: int, node: int) -> float:
        return self.table[o].get(node, 0.0)

    def move(self, o: int, dst: int) -> list:
        """Relocate ``o``; returns the partners whose entries changed."""
        src = int(self.nodes[o])
        self.nodes[o] = dst
        for p, w in self.adj[o]:
            row = self.table[p]
            left = row[src] - w
            if left <= 1e-12 * max(w, 1.0):
                del row[src]
            else:
                row[src] = left
            row[dst] = row.get(dst, 0.0) + w
        return [p for p, _ in self.adj[o]]

    def as_dicts(self) -> list:
        return [dict(r) for r in self.table]


def object_node_comm_scratch(s: WorkloadSnapshot, nodes) -> list:
    """From-scratch recomputation of the per-object, per-node byte table."""
    nodes = np.asarray(nodes)
    table = [dict() for _ in range(s.n_objects)]
    for (a, b), w in zip(s.edges.tolist(), s.edge_bytes.tolist()):
        table[a][int(nodes[b])] = table[a].get(int(nodes[b]), 0.0) + w
        table[b][int(nodes[a])] = table[b].get(int(nodes[a]), 0.0) + w
    return table


def _record(diag, i, j, target, sent, exhausted):
    diag.setdefault("transfers", []).append(
        {"src": i, "dst": j, "target": target, "sent": sent, "exhausted": exhausted})
    if exhausted and target - sent > 0:
        diag["unmet"] = diag.get("unmet", 0.0) + (target - sent)


def select_objects_comm(s: WorkloadSnapshot, plan: TransferPlan, on_move=None) -> MigrationPlan:
    """Pick objects for each transfer by bytes exchanged with the destination.

    Nodes are processed in ascending id, each node's transfers largest
    first. Candidates are the node's original residents not yet moved,
    ordered by bytes toward the destination (then larger load, lower id).
    An object is accepted iff ``sent + load/2 <= target``. Communication
    state is updated after every acceptance.
    """
    comm = ObjectNodeComm(s)
    loads = s.loads
    residents = s.node_objects()
    moved = np.zeros(s.n_objects, dtype=bool)
    result = MigrationPlan()
    diag = result.diagnostics

    for i in range(s.node_count):
        for j, target in plan.outgoing(i):
            heap = [(-comm.bytes_to(o, j), -loads[o], o) for o in residents[i] if not moved[o]]
            heapq.heapify(heap)
            sent = 0.0
            skipped = set()
            while heap and sent < target:
                negb, negl, o = heapq.heappop(heap)
                if moved[o] or o in skipped or -negb != comm.bytes_to(o, j):
                    continue
                if sent + loads[o] / 2.0 > target:
                    skipped.add(o)
                    continue
                moved[o] = True
                sent += loads[o]
                result.moves.append((o, i, j))
                for p in comm.move(o, j):
                    if s.nodes[p] == i and not moved[p] and p not in skipped:
                        heapq.heappush(heap, (-comm.bytes_to(p, j), -loads[p], p))
                if on_move is not None:
                    on_move(comm)
            remaining = any(not moved[o] for o in residents[i])
            exhausted = not remaining and sent + 1e-12 < target
            _record(diag, i, j, target, sent, exhausted)
    return result


def select_objects_coord(s: WorkloadSnapshot, plan: TransferPlan, centroids,
                         on_move=None) -> MigrationPlan:
    """Pick objects for each transfer by distance to the destination centroid.

    Same skeleton as :func:`select_objects_comm`; centroids of both nodes
    are updated after each accepted move.
    """
    if s.coords is None:
        raise ValueError("coordinate selection needs object coordinates")
    coords = s.coords
    loads = s.loads
    counts = np.bincount(s.nodes, minlength=s.node_count).astype(float)
    sums = np.zeros((s.node_count, s.coord_dims))
    np.add.at(sums, s.nodes, coords)
    cent = np.array(centroids, dtype=float, copy=True)
    residents = [np.array(r, dtype=np.int64) for r in s.node_objects()]
    moved = np.zeros(s.n_objects, dtype=bool)
    result = MigrationPlan()
    diag = result.diagnostics

    for i in range(s.node_count):
        for j, target in plan.outgoing(i):
            sent = 0.0
            rejected = np.zeros(s.n_objects, dtype=bool)
            while sent < target:
                cand = residents[i][~moved[residents[i]] & ~rejected[residents[i]]]
                if not len(cand):
                    break
                dist = np.linalg.norm(coords[cand] - cent[j], axis=1)
                o = int(cand[np.lexsort((cand, -loads[cand], dist))[0]])
                if sent + loads[o] / 2.0 > target:
                    rejected[o] = True
                    continue
                moved[o] = True
                sent += loads[o]
                result.moves.append((o, i, j))
                for node, sign in ((i, -1.0), (j, 1.0)):
                    counts[node] += sign
                    sums[node] += sign * coords[o]
                    if counts[node] > 0:
                        cent[node] = sums[node] / counts[node]
                if on_move is not None:
                    on_move(cent, counts)
            exhausted = not (~moved[residents[i]]).any() and sent + 1e-12 < target
            _record(diag, i, j, target, sent, exhausted)
    diag["centroids"] = cent
    return result


def refine_threads(s: WorkloadSnapshot, eps_t: float = 0.02) -> list:
    """Greedy load-only refinement of thread assignment within each node.

    While a node's heaviest thread exceeds ``(1 + eps_t)`` times the node's
    mean thread load, move the object from the heaviest thread that best
    evens it with the lightest thread, as long as that lowers the heavier
    of the two.
    """
    T = s.threads_per_node
    if T == 1:
        return []
    threads = s.threads.copy()
    moves = {}
    for members in s.node_objects():
        if not members:
            continue
        members = np.array(members)
        tl = np.bincount(threads[members], weights=s.loads[members], minlength=T)
        limit = (1 + eps_t) * tl.mean()
        while True:
            h = int(np.argmax(tl))
            lt = int(np.argmin(tl))
            if tl[h] <= limit or h == lt:
                break
            cand = members[threads[members] == h]
            gap = tl[h] - tl[lt]
            # objects that strictly lower the heavy thread without overtaking it
            ok = cand[s.loads[cand] < gap]
            ok = ok[s.loads[ok] > 0]
            if not len(ok):
                break
            after = np.maximum(tl[h] - s.loads[ok], tl[lt] + s.loads[ok])
            o = int(ok[np.lexsort((ok, s.loads[ok], after))[0]])
            threads[o] = lt
            tl[h] -= s.loads[o]
            tl[lt] += s.loads[o]
            moves[o] = lt
    return sorted((o, t) for o, t in moves.items() if t != s.threads[o])


def apply_plan(s: WorkloadSnapshot, m: MigrationPlan) -> WorkloadSnapshot:
    """Commit node moves and thread moves; loads and edges are untouched."""
    nodes = s.nodes.copy()
    seen = set()
    for o, src, dst in m.moves:
        if o in seen:
            raise SnapshotError(f"object {o} appears twice in the plan")
        seen.add(o)
        if not 0 <= o < s.n_objects:
            raise SnapshotError(f"object {o} does not exist")
        if s.nodes[o] != src:
            raise SnapshotError(f"stale plan: object {o} is on node {s.nodes[o]}, not {src}")
        if src == dst or not 0 <= dst < s.node_count:
            raise SnapshotError(f"object {o}: invalid destination {dst}")
        nodes[o] = dst
    threads = s.threads.copy()
    for o, t in m.thread_moves:
        if not 0 <= t < s.threads_per_node:
            raise SnapshotError(f"object {o}: thread {t} out of range")
        threads[o] = t
    return s.replace_placement(nodes, threads)
