from __future__ import annotations

import numpy as np
import pytest

from clustersync import (
    ActivationSpec,
    ClusterParams,
    ClusterPartition,
    DelayEvaluator,
    NetworkSpec,
    validate_network,
)
from clustersync.experiment import load_config, run_case

# Example network written out independently of the preset tables.
EXAMPLE_A = (np.array([[1.95, -0.1], [-5.0, 3.0]]), np.array([[2.0, -0.11], [-5.1, 3.0]]))
EXAMPLE_B = (np.array([[-1.5, -0.1], [-0.3, -2.41]]), np.array([[-1.5, -0.1], [-0.2, -2.45]]))
EXAMPLE_G = np.array([
    [-4.0, 2.0, 2.0, 0.5, -0.5],
    [2.0, -3.0, 1.0, 0.2, -0.2],
    [1.0, 1.0, -2.0, 0.3, -0.3],
    [0.5, 0.5, -1.0, -1.0, 1.0],
    [0.4, -0.4, 0.0, 1.0, -1.0],
])
EXAMPLE_NODES = np.array([[10.0, -5.0]] * 2 + [[8.0, -6.0]] * 3)
EXAMPLE_LEADERS = np.array([[0.4, 0.6]] * 2)


def example_spec(coupling: str = "error") -> NetworkSpec:
    params = tuple(ClusterParams(C=np.eye(2), A=a, B=b, I=np.zeros(2)) for a, b in zip(EXAMPLE_A, EXAMPLE_B))
    return NetworkSpec(n=2, partition=ClusterPartition.from_sizes([2, 3]), params=params, G=EXAMPLE_G,
                       activation=ActivationSpec("arctan"), delay=DelayEvaluator.logistic(1.7),
                       coupling=coupling)


def scalar_spec(C=1.0, A=0.0, B=0.0, G=0.0, delay=None) -> NetworkSpec:
    return NetworkSpec(n=1, partition=ClusterPartition.from_sizes([1]),
                       params=(ClusterParams(C=[[C]], A=[[A]], B=[[B]], I=[0.0]),), G=[[G]],
                       activation=ActivationSpec("arctan"), delay=delay or DelayEvaluator.constant(1.0))


@pytest.fixture(scope="session")
def example_network():
    return validate_network(example_spec())


@pytest.fixture(scope="session")
def preset_runs():
    cache: dict = {}

    def get(name: str):
        if name not in cache:
            cache[name] = run_case(load_config(name))
        return cache[name]

    return get


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in test_acceptance.summary_lines():
        terminalreporter.write_line(line)
