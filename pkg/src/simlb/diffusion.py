"""Virtual load balancing: first-order diffusion over the neighbor graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .neighbors import NeighborGraph


@dataclass
class TransferPlan:
    """Target load to send along each neighbor edge, keyed by ``(src, dst)``."""

    graph: NeighborGraph
    transfers: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def outgoing(self, i: int) -> list:
        """``(dst, amount)`` pairs leaving node ``i``, largest first."""
        out = [(j, t) for (a, j), t in self.transfers.items() if a == i]
        return sorted(out, key=lambda x: (-x[1], x[0]))

    def apply(self, loads) -> np.ndarray:
        new = np.array(loads, dtype=float)
        for (i, j), t in self.transfers.items():
            new[i] -= t
            new[j] += t
        return new

    def __len__(self):
        return len(self.transfers)


def alpha_max_degree(deg_i: int, deg_j: int) -> float:
    return 1.0 / (max(deg_i, deg_j) + 1)


def uniform_alpha(value: float):
    def rule(deg_i: int, deg_j: int) -> float:
        return value
    return rule


def neighborhood_converged(loads, adj, tol: float) -> bool:
    """True if every node's neighborhood load stddev is at most ``tol``."""
    for i, nbrs in enumerate(adj):
        if nbrs and np.std(loads[[i] + nbrs]) > tol:
            return False
    return True


def virtual_balance(loads, graph: NeighborGraph, alpha_rule=alpha_max_degree,
                    eps: float = 0.05, max_iters: int = 100) -> TransferPlan:
    """Diffuse node loads over ``graph`` and return per-edge transfers.

    Jacobi iteration ``l_i += sum_j a_ij (l_j - l_i)``; the signed flow on each
    edge is accumulated, netted to one direction, and a node's outgoing flows
    are scaled down proportionally if they exceed its initial load.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    loads0 = np.asarray(loads, dtype=float)
    n = graph.node_count
    if len(loads0) != n:
        raise ValueError("loads length does not match graph")
    edges = sorted(graph.edges)
    plan = TransferPlan(graph)
    mean = loads0.mean() if n else 0.0
    if not edges or mean <= 0:
        plan.diagnostics = {"iterations": 0, "converged": True, "residual": 0.0, "capped_nodes": [],
                            "components": _components(n, edges)}
        return plan

    deg = graph.degrees()
    src = np.array([e[0] for e in edges])
    dst = np.array([e[1] for e in edges])
    alpha = np.array([alpha_rule(deg[i], deg[j]) for i, j in edges])
    adj = graph.adjacency()
    tol = eps * mean

    cur = loads0.copy()
    flow = np.zeros(len(edges))  # positive means src -> dst
    it = 0
    converged = neighborhood_converged(cur, adj, tol)
    while not converged and it < max_iters:
        step = alpha * (cur[src] - cur[dst])
        flow += step
        cur = cur - np.bincount(src, weights=step, minlength=n) + np.bincount(dst, weights=step, minlength=n)
        it += 1
        converged = neighborhood_converged(cur, adj, tol)

    amounts = {}
    for (i, j), f in zip(edges, flow):
        if f > 0:
            amounts[(i, j)] = float(f)
        elif f < 0:
            amounts[(j, i)] = float(-f)

    out_total = np.zeros(n)
    for (i, _), t in amounts.items():
        out_total[i] += t
    scale = np.ones(n)
    over = out_total > loads0
    scale[over] = loads0[over] / out_total[over]
    for i in np.flatnonzero(over):
        # rounding may leave the scaled sum an ulp above the load; the cap must hold exactly
        while sum(t * scale[i] for (a, _), t in amounts.items() if a == i) > loads0[i]:
            scale[i] = np.nextafter(scale[i], 0.0)
    transfers = {}
    for (i, j), t in amounts.items():
        t *= scale[i]
        if t > 0:
            transfers[(i, j)] = t
    plan.transfers = transfers
    resid = max((np.std(cur[[i] + nb]) for i, nb in enumerate(adj) if nb), default=0.0)
    plan.diagnostics = {
        "iterations": it,
        "converged": bool(converged),
        "residual": float(resid / mean),
        "capped_nodes": np.flatnonzero(over).tolist(),
        "components": _components(n, edges),
    }
    return plan


def _components(n: int, edges) -> int:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        parent[find(i)] = find(j)
    return len({find(i) for i in range(n)})
