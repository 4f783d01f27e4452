"""Evaluation metrics: load imbalance, communication locality, migrations."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .model import WorkloadSnapshot


@dataclass
class MetricsReport:
    max_avg_load: float
    ext_bytes: float
    int_bytes: float
    ext_int_ratio: float
    migration_fraction: float = 0.0
    strategy_wall_time: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    per_round_series: list = field(default_factory=list)

    def row(self) -> dict:
        """Scalar fields only."""
        return {k: v for k, v in asdict(self).items()
                if k not in ("diagnostics", "per_round_series")}

    def to_dict(self) -> dict:
        return {**self.row(), "diagnostics": self.diagnostics,
                "per_round_series": self.per_round_series}


def max_avg(values) -> float:
    values = np.asarray(values, dtype=float)
    mean = values.mean() if len(values) else 0.0
    if mean <= 0:
        return 1.0
    return float(values.max() / mean)


def compute_metrics(s: WorkloadSnapshot, previous: Optional[WorkloadSnapshot] = None) -> MetricsReport:
    """Max/avg node load, external/internal bytes and migrated fraction."""
    node_load = s.node_loads()
    diag = {}
    if node_load.sum() <= 0:
        diag["zero_load"] = True
    if len(s.edges):
        cross = s.nodes[s.edges[:, 0]] != s.nodes[s.edges[:, 1]]
        ext = float(s.edge_bytes[cross].sum())
        internal = float(s.edge_bytes[~cross].sum())
    else:
        ext = internal = 0.0
    ratio = ext / internal if internal > 0 else (float("inf") if ext > 0 else 0.0)
    frac = 0.0
    if previous is not None:
        if previous.n_objects != s.n_objects:
            raise ValueError("snapshots describe different object sets")
        if s.n_objects:
            frac = float(np.count_nonzero(previous.nodes != s.nodes) / s.n_objects)
    return MetricsReport(max_avg(node_load), ext, internal, ratio, frac, diagnostics=diag)
