"""Reference strategies: no balancing and a GreedyRefine-style rebalancer."""

import bisect

import numpy as np

from .model import MigrationPlan, WorkloadSnapshot


def no_lb(s: WorkloadSnapshot) -> MigrationPlan:
    return MigrationPlan()


def greedy_refine(s: WorkloadSnapshot, tol: float = 0.01) -> MigrationPlan:
    """Move objects from overloaded nodes to the lightest node, ignoring comm.

    The heaviest node above ``mean * (1 + tol)`` gives up its largest object
    that neither drops it below the mean nor lifts the lightest node above
    ``mean * (1 + tol)``. Overloaded nodes are tried heaviest first; the loop
    ends when the threshold is met or no such move exists.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    loads = s.loads
    node_load = s.node_loads()
    mean = node_load.mean()
    cap = mean * (1 + tol)
    # per node: ascending (load, -id) keys so the best candidate is found by bisect
    pools = []
    for members in s.node_objects():
        pools.append(sorted((float(loads[o]), -o) for o in members))
    plan = MigrationPlan()

    while True:
        over = [i for i in np.argsort(-node_load, kind="stable") if node_load[i] > cap]
        if not over:
            break
        dst = int(np.argmin(node_load))
        room = cap - node_load[dst]
        done = False
        for src in over:
            src = int(src)
            if src == dst:
                continue
            limit = min(node_load[src] - mean, room)
            pool = pools[src]
            k = bisect.bisect_right(pool, (limit, 1)) - 1
            if k < 0 or pool[k][0] <= 0:
                continue
            load, neg_id = pool.pop(k)
            o = -neg_id
            plan.moves.append((o, src, dst))
            node_load[src] -= load
            node_load[dst] += load
            done = True
            break
        if not done:
            break
    return plan
