import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from udsched.resources import VmCatalog, VmType, default_catalog  # noqa: E402
from udsched.workflow import Edge, Task, WorkflowGraph  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_dag(rng: np.random.Generator, n: int, density: float = 0.4,
               demand=(1_000.0, 100_000.0), data=(8.0, 800.0)) -> WorkflowGraph:
    ids = [f"t{i}" for i in range(n)]
    tasks = [Task(t, float(rng.uniform(*demand))) for t in ids]
    edges = [Edge(ids[i], ids[j], float(rng.uniform(*data)))
             for i in range(n) for j in range(i + 1, n) if rng.random() < density]
    return WorkflowGraph(tasks, edges)


def small_catalog(rng: np.random.Generator, n_vms: int) -> VmCatalog:
    """A catalog whose pool is cut down to ``n_vms`` (1..3) slots."""
    base = default_catalog()
    names = rng.choice(len(base.types), size=2, replace=False)
    cat = VmCatalog(tuple(base.types[i] for i in sorted(names)))
    object.__setattr__(cat, "pool", cat.pool[:n_vms])
    return cat


def uniform_catalog(speeds, p_hourly=0.0) -> VmCatalog:
    return VmCatalog(tuple(VmType(f"v{i}", 1, float(s), 1.0 + i, 0.2 + 0.2 * i, p_hourly)
                           for i, s in enumerate(speeds)))


@pytest.fixture
def catalog():
    return default_catalog()
