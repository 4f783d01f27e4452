"""Strategy configuration and the per-round balancing pipeline."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Optional

from .baselines import greedy_refine, no_lb
from .diffusion import alpha_max_degree, uniform_alpha, virtual_balance
from .migration import apply_plan, refine_threads, select_objects_comm, select_objects_coord
from .model import MigrationPlan, WorkloadSnapshot, node_comm_matrix
from .neighbors import build_comm_neighbors, build_coord_neighbors, compute_centroids

STRATEGIES = ("diff-comm", "diff-coord", "greedy-refine", "none")


@dataclass(frozen=True)
class StrategyConfig:
    name: str = "diff-comm"
    neighbors: int = 4
    alpha: Optional[float] = None  # None selects 1/(max(d_i, d_j) + 1)
    eps: float = 0.05
    max_iters: int = 100
    max_rounds: Optional[int] = None
    comm_fallback: bool = True
    randomize_ties: bool = False
    seed: int = 0
    thread_eps: float = 0.02
    greedy_tol: float = 0.01

    def __post_init__(self):
        if self.name not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.name!r}; choose from {', '.join(STRATEGIES)}")
        if self.neighbors < 1:
            raise ValueError("neighbors must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


def plan_round(s: WorkloadSnapshot, cfg: StrategyConfig) -> MigrationPlan:
    """Compute one round's migration plan for ``s`` under ``cfg``.

    Diffusion strategies run neighbor selection, virtual balancing, object
    selection and thread refinement. The plan's diagnostics carry the
    intermediate results and the strategy wall time in seconds.
    """
    t0 = time.perf_counter()
    if cfg.name == "none":
        plan = no_lb(s)
    elif cfg.name == "greedy-refine":
        plan = greedy_refine(s, cfg.greedy_tol)
    else:
        alpha = alpha_max_degree if cfg.alpha is None else uniform_alpha(cfg.alpha)
        if cfg.name == "diff-comm":
            graph = build_comm_neighbors(node_comm_matrix(s), s.node_count, cfg.neighbors,
                                         cfg.max_rounds, cfg.seed, cfg.comm_fallback,
                                         cfg.randomize_ties)
        else:
            centroids, empty = compute_centroids(s)
            graph = build_coord_neighbors(centroids, cfg.neighbors, cfg.max_rounds,
                                          cfg.seed, cfg.randomize_ties)
            graph.diagnostics["empty_nodes"] = empty
        transfer = virtual_balance(s.node_loads(), graph, alpha, cfg.eps, cfg.max_iters)
        if cfg.name == "diff-comm":
            plan = select_objects_comm(s, transfer)
        else:
            plan = select_objects_coord(s, transfer, centroids)
            plan.diagnostics.pop("centroids", None)
        plan.diagnostics["neighbor_graph"] = {
            "edges": sorted(graph.edges), **graph.diagnostics}
        plan.diagnostics["virtual"] = transfer.diagnostics
        plan.diagnostics["transfer_plan"] = transfer
    if s.threads_per_node > 1:
        moved = apply_plan(s, MigrationPlan(plan.moves))
        plan.thread_moves = refine_threads(moved, cfg.thread_eps)
    plan.diagnostics["wall_time"] = time.perf_counter() - t0
    return plan


def rebalance(s: WorkloadSnapshot, cfg: StrategyConfig) -> tuple:
    """Plan and commit one round; returns ``(new_snapshot, plan)``."""
    plan = plan_round(s, cfg)
    return apply_plan(s, plan), plan
