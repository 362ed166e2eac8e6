from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from clustersync import (
    ActivationSpec,
    ClusterPartition,
    ImpulseSchedule,
    PinningImpulsiveConfig,
    Theorem1Params,
    Theorem2Params,
    check_theorem1,
    check_theorem2,
    compute_mu_upsilon,
    eta_k,
    impulsive_control_jump,
    lyapunov_V1,
    lyapunov_V2,
    power_mean_check,
    quadratic_bound_check,
    settling_time,
    validate_network,
)
from clustersync.criteria import CriteriaReport
from clustersync.errors import SingularE

from conftest import EXAMPLE_A, EXAMPLE_B, EXAMPLE_G, example_spec, scalar_spec

I2 = np.eye(2)
ONE = np.eye(1)


def _toy():
    return validate_network(scalar_spec(C=1.0, A=0.0, B=0.0, G=0.0))


def _pin_all(period=0.03, d_k=-0.8):
    return PinningImpulsiveConfig(d_k=d_k, schedule=ImpulseSchedule.arithmetic(period), rho=(1,))


# -- mu / upsilon -----------------------------------------------------------


def test_mu_upsilon_scalar_toy():
    mu, ups = compute_mu_upsilon(_toy(), Theorem1Params(Q=ONE, E1=ONE, E2=ONE))
    assert mu == pytest.approx(-1.0, abs=1e-12)
    assert ups == pytest.approx(1.0, abs=1e-12)


def test_upsilon_vanishes_without_delayed_gain():
    spec = scalar_spec()
    spec = dataclasses.replace(spec, activation=ActivationSpec("linear", slope=0.0))
    _, ups = compute_mu_upsilon(validate_network(spec), Theorem1Params(Q=ONE, E1=ONE, E2=ONE))
    assert ups == 0.0


def test_mu_matches_dense_eigenvalue_oracle(example_network):
    # Independent assembly with Q = E1 = E2 = I, alpha = beta = xi = 1.
    blocks = [-2 * I2 + A @ A.T + B @ B.T + I2 for A, B in zip(EXAMPLE_A, EXAMPLE_B)]
    M = np.zeros((10, 10))
    for i, p in enumerate([0, 0, 1, 1, 1]):
        M[2 * i:2 * i + 2, 2 * i:2 * i + 2] = blocks[p]
    for i in range(5):
        for j in range(5):
            M[2 * i:2 * i + 2, 2 * j:2 * j + 2] += (EXAMPLE_G[i, j] + EXAMPLE_G[j, i]) * I2
    expected = np.linalg.eigvalsh(M).max()
    mu, ups = compute_mu_upsilon(example_network, Theorem1Params(Q=I2, E1=I2, E2=I2))
    assert mu == pytest.approx(expected, rel=1e-12)
    assert ups == pytest.approx(1.0, rel=1e-12)


def test_singular_weight_rejected(example_network):
    with pytest.raises(SingularE):
        compute_mu_upsilon(example_network, Theorem1Params(Q=I2, E1=np.diag([1.0, 0.0]), E2=I2))


# -- eta_k ------------------------------------------------------------------


def test_eta_example_pin_counts():
    # cluster 1: 0.04 + 0.96 * (1/2) = 0.52 ; cluster 2: 0.04
    assert abs(eta_k(I2, -0.8, ClusterPartition.from_sizes([2, 3]), (1, 3)) - 0.52) <= 1e-12


def test_eta_pin_everything():
    part = ClusterPartition.from_sizes([2, 3])
    assert abs(eta_k(I2, -0.8, part, (2, 3)) - 0.04) <= 1e-12
    assert abs(eta_k(I2, -1.0, part, (2, 3))) <= 1e-12


def test_eta_bound_monte_carlo():
    part = ClusterPartition.from_sizes([2, 3])
    cfg = PinningImpulsiveConfig(d_k=-0.8, schedule=ImpulseSchedule.arithmetic(0.03), rho=(1, 3))
    eta = eta_k(I2, -0.8, part, (1, 3))
    rng = np.random.default_rng(7)
    for _ in range(1000):
        E = rng.normal(size=(5, 2)) * rng.uniform(0.01, 10, size=(5, 1))
        E_plus, _ = impulsive_control_jump(E, cfg, 1, part)
        assert lyapunov_V1(E_plus, I2) <= eta * lyapunov_V1(E, I2) + 1e-10


# -- theorem 1 checker ------------------------------------------------------


def test_theorem1_scalar_toy_passes():
    params = Theorem1Params(Q=ONE, E1=ONE, E2=ONE, lam=0.1, gamma=1 / 0.04)
    rep = check_theorem1(_toy(), params, _pin_all(), horizon=1.0)
    assert rep.passed, rep.to_text()
    assert rep.derived["mu"] == pytest.approx(-1.0)
    assert rep.derived["eta_k"][0] == pytest.approx(0.04)


def test_theorem1_huge_gap_fails_impulse_condition():
    params = Theorem1Params(Q=ONE, E1=ONE, E2=ONE, lam=0.1, gamma=2.0)
    rep = check_theorem1(validate_network(scalar_spec()), params,
                         PinningImpulsiveConfig(d_k=-0.8, schedule=ImpulseSchedule.arithmetic(1e3), rho=(1,)))
    c10 = [r for r in rep.records if r.name.startswith("C10")]
    assert c10 and not any(r.passed for r in c10)
    assert not rep.passed


def test_theorem1_zero_upsilon_fails_delayed_dominance():
    params = Theorem1Params(Q=ONE, E1=ONE, E2=ONE, gamma=1 / 0.04, upsilon=0.0)
    rep = check_theorem1(_toy(), params, _pin_all())
    assert not rep.get("C9 delayed-term dominance: lambda_min(upsilon Q - xi^2 E2 / beta)").passed


def test_report_passes_iff_all_records_pass():
    rep = CriteriaReport("t")
    rep.record("a", 1.0, "<", 2.0)
    assert rep.passed
    rep.record("b", 3.0, "<=", 2.0)
    assert not rep.passed
    assert rep.to_dict()["passed"] is False
    assert "FAIL" in rep.to_text()


# -- theorem 2 checker ------------------------------------------------------


def test_theorem2_condition_one(example_network):
    rep = check_theorem2(example_network, Theorem2Params(alpha=0.2, beta=2.0, E1=I2, E2=I2))
    assert rep.derived["condition1"] == pytest.approx([0.925, 0.925], abs=1e-12)
    assert all(r.passed for r in rep.records if r.name.startswith("condition 1"))
    rep = check_theorem2(example_network, Theorem2Params(alpha=0.2, beta=1.0, E1=I2, E2=I2))
    assert rep.derived["condition1"] == pytest.approx([1.425, 1.425], abs=1e-12)
    assert not any(r.passed for r in rep.records if r.name.startswith("condition 1"))


def test_theorem2_large_g1_passes_condition_two(example_network):
    weak = check_theorem2(example_network, Theorem2Params(alpha=1.0, beta=2.0, E1=I2, E2=I2, g1=0.1))
    strong = check_theorem2(example_network, Theorem2Params(alpha=1.0, beta=2.0, E1=I2, E2=I2, g1=1e6))
    assert not all(r.passed for r in weak.records if r.name.startswith("condition 2"))
    assert all(r.passed for r in strong.records if r.name.startswith("condition 2"))


# -- settling time and Lyapunov functions ------------------------------------


@pytest.mark.parametrize("V0, expected", [(0.0, 0.0), (8.0, 2.0), (0.5, 1.0)])
def test_settling_time(V0, expected):
    assert settling_time(V0, 2.0, 0.5) == expected


def test_settling_time_monotone():
    Vs = np.linspace(0.1, 100, 50)
    ts = [settling_time(v, 2.0, 0.5) for v in Vs]
    assert np.all(np.diff(ts) > 0)
    ks = np.linspace(0.5, 5, 20)
    assert np.all(np.diff([settling_time(10.0, k, 0.5) for k in ks]) < 0)


def test_lyapunov_V1():
    assert lyapunov_V1(np.zeros((3, 2)), I2) == 0.0
    assert lyapunov_V1(np.array([[3.0, 4.0]]), I2) == 25.0
    assert lyapunov_V1(np.array([[1.0, 1.0]]), np.diag([2.0, 1.0])) == 3.0


def test_lyapunov_V2():
    assert lyapunov_V2(np.zeros((2, 2)), [0, 0], [0], 1.4, 41.4) == 0.0
    assert lyapunov_V2(np.array([[1.0, 1.0]]), [0.0], [], 1.4, 41.4) == 1.0
    assert lyapunov_V2(np.array([[1.0, 1.0]]), [2.0], [], 1.4, 41.4) == pytest.approx(2.4, abs=1e-15)


# -- inequality oracles -----------------------------------------------------


def test_power_mean_examples():
    assert power_mean_check([np.array([3.0, 4.0])], 1.0)
    assert power_mean_check([np.array([1.0, 0.0]), np.array([0.0, 1.0])], 1.0)
    rng = np.random.default_rng(3)
    assert power_mean_check(list(rng.normal(size=(100, 3))), 1.5)


@pytest.mark.parametrize("q", [0.5, 1.0, 1.5])
def test_power_mean_sampled(q):
    rng = np.random.default_rng(int(q * 10))
    for _ in range(1000):
        vecs = rng.normal(size=(rng.integers(1, 8), 3)) * rng.uniform(0, 10)
        assert power_mean_check(list(vecs), q)


def test_quadratic_bound_sampled():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        R = rng.normal(size=(n, n))
        E = R @ R.T + 0.1 * np.eye(n)
        assert quadratic_bound_check(rng.normal(size=n), rng.normal(size=n), float(rng.uniform(0.01, 10)), E)


# -- trajectory-level properties --------------------------------------------


def test_razumikhin_growth_bound_along_impulsive_run(preset_runs):
    traj, _ = preset_runs("case2")
    net = validate_network(example_spec())
    params = Theorem1Params(Q=I2, E1=I2, E2=I2, alpha=0.2, beta=0.5, lam=0.1, gamma=2.0)
    rep = check_theorem1(net, params, PinningImpulsiveConfig(d_k=-0.8, schedule=ImpulseSchedule.arithmetic(0.03),
                                                             rho=(1, 3)), horizon=5.0)
    assert rep.passed, rep.to_text()
    q, growth = rep.derived["q"], rep.derived["razumikhin_growth"]
    tau_bar = 1.7
    plain = np.array([lim == "" for lim in traj.limits])
    V, t = traj.V, traj.times
    checked = 0
    for r in range(len(V) - 1):
        # forward difference inside one inter-impulse interval
        if traj.limits[r + 1] == "+" or t[r + 1] == t[r] or not (plain[r] or traj.limits[r] == "+"):
            continue
        past = V[np.searchsorted(t, t[r] - tau_bar - 1e-12):r + 1]
        if q * V[r] < past.max():
            continue
        dV = (V[r + 1] - V[r]) / (t[r + 1] - t[r])
        assert dV <= growth * max(V[r], V[r + 1]) + 1e-9
        checked += 1
    # the premise holds only on a few stretches, since impulses keep V far below its recent maximum
    assert checked >= 10


def test_finite_time_envelope(preset_runs):
    traj, _ = preset_runs("case3")
    rep = check_theorem2(validate_network(example_spec()),
                         Theorem2Params(alpha=0.2, beta=2.0, E1=I2, E2=I2))
    assert rep.passed
    mu = 0.5
    W = traj.V ** ((1 - mu) / 2)
    below = np.flatnonzero(traj.V < 1e-8)
    assert below.size
    end = below[0]
    assert np.all(np.diff(W[:end + 1]) <= 1e-12)
    rate = (W[0] - W[end]) / (traj.times[end] - traj.times[0])
    assert rate >= 0.8 * 2.0 * (1 - mu) * 2 ** ((mu - 1) / 2)
    assert math.isfinite(rate)
