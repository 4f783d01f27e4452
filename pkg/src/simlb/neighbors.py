"""Per-round node neighbor graph via the request/hold/confirm handshake.

The distributed protocol is simulated in synchronous rounds. In each round
every node that still needs neighbors sends requests, receivers accept while
they have spare capacity (reserving a *hold*), and requesters confirm the
acceptances they can still afford. Holds expire at the end of the round.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .model import WorkloadSnapshot


@dataclass
class NeighborGraph:
    node_count: int
    edges: frozenset  # unordered pairs stored as (i, j) with i < j
    K: int
    diagnostics: dict = field(default_factory=dict)

    def neighbors(self, i: int) -> list:
        return sorted(j for e in self.edges if i in e for j in e if j != i)

    def adjacency(self) -> list:
        adj = [[] for _ in range(self.node_count)]
        for i, j in sorted(self.edges):
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges


def default_max_rounds(K: int) -> int:
    return 2 * K + 4


def _tie_order(n: int, seed, randomize: bool) -> np.ndarray:
    """Rank of each node id used to break ties (identity unless randomized)."""
    if not randomize:
        return np.arange(n)
    return np.random.default_rng(seed).permutation(n)


def handshake(rankings: list, K: int, max_rounds: int) -> tuple:
    """Run the neighbor handshake given each node's ordered candidate list.

    Returns ``(edges, rounds_used)``.
    """
    n = len(rankings)
    confirmed = [set() for _ in range(n)]
    pending = [deque(r) for r in rankings]
    edges = set()
    rounds = 0
    for _ in range(max_rounds):
        # request phase
        requests = {}
        for v in range(n):
            need = K - len(confirmed[v])
            if need <= 0:
                continue
            sent = 0
            while pending[v] and sent < math.ceil(need / 2):
                u = pending[v].popleft()
                if u in confirmed[v]:
                    continue
                requests.setdefault(u, []).append(v)
                sent += 1
        if not requests:
            break
        rounds += 1

        # respond phase: receivers accept in ascending requester order
        holds = [set() for _ in range(n)]
        accepted = []
        for u in sorted(requests):
            for v in sorted(requests[u]):
                if len(confirmed[u]) >= K or len(confirmed[u]) + len(holds[u]) >= K:
                    continue
                holds[u].add(v)
                accepted.append((v, u))

        # confirm phase: requester v got an accept from u
        retry = [[] for _ in range(n)]
        for v, u in sorted(accepted):
            pair = (min(u, v), max(u, v))
            if pair in edges:
                continue
            mutual = u in holds[v]
            others = len(holds[v] - {u})
            if (mutual or len(confirmed[v]) + others < K) and len(confirmed[u]) < K:
                if len(confirmed[v]) < K:
                    edges.add(pair)
                    confirmed[v].add(u)
                    confirmed[u].add(v)
                    holds[v].discard(u)
            elif len(confirmed[u]) < K:
                # declined for lack of own capacity, not rejected: u stays a candidate
                retry[v].append(u)
            holds[u].discard(v)
        for v in range(n):
            pending[v].extendleft(reversed(retry[v]))
    return frozenset(edges), rounds


_UNREACHABLE = np.iinfo(np.int64).max


def _hop_distances(n: int, pairs) -> np.ndarray:
    adj = [[] for _ in range(n)]
    for i, j in pairs:
        adj[i].append(j)
        adj[j].append(i)
    dist = np.full((n, n), _UNREACHABLE, dtype=np.int64)
    for s in range(n):
        dist[s, s] = 0
        q = deque([s])
        while q:
            x = q.popleft()
            for y in adj[x]:
                if dist[s, y] > dist[s, x] + 1:
                    dist[s, y] = dist[s, x] + 1
                    q.append(y)
    return dist


def build_comm_neighbors(matrix: dict, node_count: int, K: int, max_rounds=None,
                         seed=None, fallback: bool = True,
                         randomize_ties: bool = False) -> NeighborGraph:
    """Neighbor graph ranked by inter-node communication volume.

    Candidates are the node's communication partners by decreasing bytes.
    With ``fallback`` the list continues with non-communicating nodes ordered
    by hop distance in the node communication graph, so a node with fewer
    than ``K`` partners can still reach ``K`` neighbors. Nodes in other
    connected components are never candidates.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if max_rounds is None:
        max_rounds = default_max_rounds(K)
    tie = _tie_order(node_count, seed, randomize_ties)
    partners = [dict() for _ in range(node_count)]
    for (i, j), w in matrix.items():
        if w > 0:
            partners[i][j] = w
            partners[j][i] = w
    hops = _hop_distances(node_count, [e for e, w in matrix.items() if w > 0]) if fallback else None
    rankings = []
    for v in range(node_count):
        ranked = sorted(partners[v], key=lambda u: (-partners[v][u], tie[u]))
        if fallback:
            rest = [u for u in range(node_count)
                    if u != v and u not in partners[v] and hops[v, u] < _UNREACHABLE]
            ranked += sorted(rest, key=lambda u: (hops[v, u], tie[u]))
        rankings.append(ranked)
    edges, rounds = handshake(rankings, K, max_rounds)
    graph = NeighborGraph(node_count, edges, K)
    isolated = [v for v in range(node_count) if not partners[v]]
    deg = graph.degrees()
    graph.diagnostics = {
        "rounds": rounds,
        "isolated": isolated,
        "unfilled": [v for v in range(node_count) if deg[v] < min(K, node_count - 1)],
    }
    return graph


def compute_centroids(s: WorkloadSnapshot, nodes=None) -> tuple:
    """Unweighted mean object position per node.

    Returns ``(centroids, empty)`` where ``empty`` lists nodes without
    objects; their centroid is set to the mean of the other centroids.
    """
    if s.coords is None:
        raise ValueError("snapshot has no coordinates")
    nodes = s.nodes if nodes is None else np.asarray(nodes)
    counts = np.bincount(nodes, minlength=s.node_count).astype(float)
    sums = np.stack([np.bincount(nodes, weights=s.coords[:, d], minlength=s.node_count)
                     for d in range(s.coord_dims)], axis=1)
    empty = np.flatnonzero(counts == 0).tolist()
    cent = np.zeros_like(sums)
    ok = counts > 0
    cent[ok] = sums[ok] / counts[ok, None]
    if empty and ok.any():
        cent[~ok] = cent[ok].mean(axis=0)
    return cent, empty


def build_coord_neighbors(centroids, K: int, max_rounds=None, seed=None,
                          randomize_ties: bool = False) -> NeighborGraph:
    """Neighbor graph ranked by ascending Euclidean centroid distance.

    Every node ranks all other nodes; distances are not periodic.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    cent = np.asarray(centroids, dtype=float)
    n = len(cent)
    if max_rounds is None:
        max_rounds = default_max_rounds(K)
    tie = _tie_order(n, seed, randomize_ties)
    dist = np.linalg.norm(cent[:, None, :] - cent[None, :, :], axis=-1)
    rankings = []
    for v in range(n):
        others = [u for u in range(n) if u != v]
        rankings.append(sorted(others, key=lambda u: (dist[v, u], tie[u])))
    edges, rounds = handshake(rankings, K, max_rounds)
    graph = NeighborGraph(n, edges, K)
    deg = graph.degrees()
    graph.diagnostics = {
        "rounds": rounds,
        "isolated": [],
        "unfilled": [v for v in range(n) if deg[v] < min(K, n - 1)],
    }
    return graph
