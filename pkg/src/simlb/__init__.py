"""Communication-aware diffusion load balancing simulator."""

from .baselines import greedy_refine, no_lb
from .diffusion import TransferPlan, virtual_balance
from .generators import (Mod7, PicSpec, PicState, RandomPct, Spike, StencilSpec,
                         gen_pic_initial, gen_stencil, pic_step, pic_to_snapshot)
from .metrics import MetricsReport, compute_metrics
from .migration import apply_plan, refine_threads, select_objects_comm, select_objects_coord
from .model import (CommEdge, MigrationPlan, ObjectInfo, SnapshotError, WorkloadSnapshot,
                    load_snapshot, node_comm_matrix, save_snapshot)
from .neighbors import NeighborGraph, build_comm_neighbors, build_coord_neighbors, compute_centroids
from .simulate import SimulationResult, run_simulation
from .strategy import STRATEGIES, StrategyConfig, plan_round, rebalance

__version__ = "0.1.0"
