import numpy as np
import pytest
from hypothesis import strategies as st

from simlb.model import WorkloadSnapshot


def random_snapshot(rng, n_objects=30, node_count=4, threads=1, edge_prob=0.15, coords=True):
    """Random valid snapshot with every node populated."""
    nodes = rng.integers(0, node_count, size=n_objects)
    nodes[:node_count] = np.arange(node_count)
    pairs = [(a, b) for a in range(n_objects) for b in range(a + 1, n_objects)
             if rng.random() < edge_prob]
    return WorkloadSnapshot(
        node_count=node_count,
        threads_per_node=threads,
        loads=rng.uniform(0.1, 5.0, size=n_objects),
        nodes=nodes,
        threads=rng.integers(0, threads, size=n_objects),
        edges=np.array(pairs, dtype=np.int64).reshape(-1, 2),
        edge_bytes=rng.integers(1, 20, size=len(pairs)).astype(float),
        coords=rng.uniform(0, 10, size=(n_objects, 2)) if coords else None,
    )


@st.composite
def snapshots(draw, max_objects=50, max_nodes=6, threads=1):
    seed = draw(st.integers(0, 2**32 - 1))
    n_nodes = draw(st.integers(2, max_nodes))
    n_obj = draw(st.integers(n_nodes, max_objects))
    return random_snapshot(np.random.default_rng(seed), n_obj, n_nodes, threads)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
