from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clustersync import (
    ActivationSpec,
    ClusterPartition,
    DelayEvaluator,
    cluster_of,
    validate_network,
)
from clustersync.errors import (
    BadPartition,
    ClassA1Violation,
    NonPositiveDefiniteC,
    NonZeroRowSum,
    OutOfRange,
    UnknownActivation,
)
from clustersync.network import ClusterParams, lipschitz_bound

from conftest import EXAMPLE_A, EXAMPLE_B, EXAMPLE_G, EXAMPLE_LEADERS, EXAMPLE_NODES, example_spec, scalar_spec

finite = st.floats(-50, 50, allow_nan=False)


def test_example_network_validates(example_network):
    assert example_network.N == 5
    assert example_network.M == 2
    assert example_network.n == 2
    np.testing.assert_array_equal(example_network.labels, [0, 0, 1, 1, 1])


def test_example_block_structure_is_reported_not_raised(example_network):
    # The 5x5 example matrix has nonzero row sums inside its blocks for this
    # partition; the default validation keeps the issues on the handle.
    assert not example_network.satisfies_assumption2
    with pytest.raises(ClassA1Violation):
        validate_network(example_spec(), strict_blocks=True)


def test_row_sum_violation_names_row_and_total():
    G = EXAMPLE_G.copy()
    G[0, 0] += 0.1
    with pytest.raises(NonZeroRowSum) as info:
        validate_network(dataclasses.replace(example_spec(), G=G))
    assert info.value.row == 1
    assert info.value.total == pytest.approx(0.1)


def test_negative_c_rejected():
    spec = example_spec()
    bad = (ClusterParams(C=-np.eye(2), A=EXAMPLE_A[0], B=EXAMPLE_B[0], I=np.zeros(2)), spec.params[1])
    with pytest.raises(NonPositiveDefiniteC):
        validate_network(dataclasses.replace(spec, params=bad))


def test_partition_must_start_at_zero_and_increase():
    with pytest.raises(BadPartition):
        ClusterPartition((1, 3)).validate()
    with pytest.raises(BadPartition):
        ClusterPartition((0, 3, 3)).validate()


@pytest.mark.parametrize("i, p", [(1, 1), (2, 1), (3, 2), (4, 2), (5, 2)])
def test_cluster_of(i, p):
    assert cluster_of(ClusterPartition.from_sizes([2, 3]), i) == p


@pytest.mark.parametrize("i", [0, 6])
def test_cluster_of_out_of_range(i):
    with pytest.raises(OutOfRange):
        cluster_of(ClusterPartition.from_sizes([2, 3]), i)


def test_leader_rhs_zero_state(example_network):
    np.testing.assert_allclose(example_network.leader_rhs(1, np.zeros(2), np.zeros(2)), 0.0)


def test_leader_rhs_cluster_one():
    # Hand arithmetic: arctan(0.4)=0.380506377, arctan(0.6)=0.540419500.
    f = np.array([0.380506377112365, 0.540419500270584])
    s = np.array([0.4, 0.6])
    expected = -s + EXAMPLE_A[0] @ f + EXAMPLE_B[0] @ f
    net = validate_network(example_spec())
    got = net.leader_rhs(1, s, s)
    np.testing.assert_allclose(got, expected, atol=1e-12)
    np.testing.assert_allclose(got, [-0.33686, -2.29784], atol=1e-5)


def test_leader_rhs_cluster_two():
    f = np.arctan([0.4, 0.6])
    s = np.array([0.4, 0.6])
    expected = -s + EXAMPLE_A[1] @ f + EXAMPLE_B[1] @ f
    got = validate_network(example_spec()).leader_rhs(2, s, s)
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_coupled_rhs_consensus_matches_leaders(example_network):
    s = np.array([[0.4, 0.6], [-1.0, 2.0]])
    X = s[example_network.labels]
    rhs = example_network.coupled_rhs(0.0, X, X, reference=X)
    for i, p in enumerate(example_network.labels):
        np.testing.assert_allclose(rhs[i], example_network.leader_rhs(p + 1, s[p], s[p]), atol=1e-12)


def test_coupled_rhs_trivial_solution(example_network):
    Z = np.zeros((5, 2))
    np.testing.assert_array_equal(example_network.coupled_rhs(0.0, Z, Z, np.zeros((5, 2))), 0.0)


def test_single_linear_node_decays():
    net = validate_network(scalar_spec(C=1.0))
    assert net.coupled_rhs(0.0, np.array([[2.0]]), np.array([[2.0]]), np.zeros((1, 1)))[0, 0] == -2.0


def test_error_state_of_initial_condition(example_network):
    E = example_network.error_state(EXAMPLE_NODES, EXAMPLE_LEADERS)
    np.testing.assert_allclose(E[0], [9.6, -5.6])
    np.testing.assert_allclose(E[2], [7.6, -6.6])
    np.testing.assert_array_equal(example_network.error_state(EXAMPLE_LEADERS[example_network.labels],
                                                              EXAMPLE_LEADERS), 0.0)


@pytest.mark.parametrize("activation, xi", [
    (ActivationSpec("arctan"), 1.0),
    (ActivationSpec("linear", slope=0.5), 0.5),
    (ActivationSpec("custom", func=lambda x: 2 * np.sin(x), lipschitz=2.0), 2.0),
])
def test_lipschitz_bound(activation, xi):
    np.testing.assert_array_equal(lipschitz_bound(activation, 2), [xi, xi])


def test_custom_activation_needs_constant():
    with pytest.raises(UnknownActivation):
        lipschitz_bound(ActivationSpec("custom", func=np.sin), 1)
    with pytest.raises(UnknownActivation):
        ActivationSpec("relu")


def test_activation_lipschitz_sampled():
    rng = np.random.default_rng(0)
    f = ActivationSpec("arctan")
    x = rng.normal(scale=5, size=(10_000, 2))
    y = rng.normal(scale=5, size=(10_000, 2))
    lhs = np.linalg.norm(f(x) - f(y), axis=1)
    assert np.all(lhs <= np.linalg.norm(x - y, axis=1) + 1e-12)


def test_logistic_delay_bounds():
    d = DelayEvaluator.logistic(1.7)
    assert d.tau_bar == 1.7
    assert d.sigma == pytest.approx(0.425, abs=1e-15)
    ts = np.linspace(-1.7, 50, 20001)
    taus = np.array([d(t) for t in ts])
    assert np.all(taus > 0) and np.all(taus < d.tau_bar + 1e-15)
    slopes = np.diff(taus) / np.diff(ts)
    assert slopes.max() <= d.sigma + 1e-6
    assert d.derivative(0.0) == pytest.approx(0.425)


def test_delay_with_fast_derivative_rejected():
    with pytest.raises(ValueError):
        DelayEvaluator.logistic(4.0)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (5, 2), elements=finite), arrays(float, (2, 2), elements=finite))
def test_error_round_trip(X, S):
    net = validate_network(example_spec())
    np.testing.assert_allclose(net.node_states(net.error_state(X, S), S), X, rtol=0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 2, elements=finite))
def test_coupling_annihilates_constants(c):
    assert np.allclose(EXAMPLE_G @ np.tile(c, (5, 1)), 0.0, atol=1e-11)
