"""Joint integration of nodes and leaders under the available controllers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .controllers import (
    ForwardIntegral,
    HybridConfig,
    PinningImpulsiveConfig,
    chi_mask,
    forward_integral_estimate,
    hybrid_control_inputs,
    impulsive_control_jump,
    psi_gains,
    psi_flow,
)
from .criteria import settling_time
from .engine import HistoryBuffer, ImpulseEvent, IntegratorConfig, Trajectory, rk4_step
from .network import ValidatedNetwork

Controller = PinningImpulsiveConfig | HybridConfig | None


@dataclass(frozen=True, eq=False)
class InitialCondition:
    """Node and leader states at ``t0``.

    ``history`` optionally maps ``t <= t0`` to the stacked ``(N + M, n)``
    joint state; without it the initial functions are constant.
    """

    nodes: np.ndarray
    leaders: np.ndarray
    history: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.array(self.nodes, dtype=float))
        object.__setattr__(self, "leaders", np.array(self.leaders, dtype=float))

    def joint(self) -> np.ndarray:
        return np.vstack([self.nodes, self.leaders])


def integrate(network: ValidatedNetwork, controller: Controller = None, config: IntegratorConfig | None = None,
              initial: InitialCondition | None = None, *, Q: np.ndarray | None = None,
              t0: float = 0.0) -> Trajectory:
    """Simulate the network from ``t0`` to ``t0 + T`` with fixed-step RK4.

    Impulses are applied on their grid points; the trajectory then records
    the left and the right limit.  The recorded ``V`` is ``sum e_i^T Q e_i``
    for the uncontrolled and impulsive cases and the hybrid Lyapunov
    functional for the hybrid controller.  Identical inputs give identical
    output.
    """
    config = config or IntegratorConfig()
    if initial is None:
        raise ValueError("an initial condition is required")
    if initial.nodes.shape != (network.N, network.n) or initial.leaders.shape != (network.M, network.n):
        raise ValueError(f"initial nodes must be {(network.N, network.n)} and leaders {(network.M, network.n)}")
    if isinstance(controller, HybridConfig) and controller.future_mode == "iterative":
        return _iterate_passes(network, controller, config, initial, t0)
    return _run(network, controller, config, initial, Q, t0, future=None)


def _iterate_passes(network, controller, config, initial, t0) -> Trajectory:
    future = None
    traj = None
    t1 = None
    for _ in range(controller.passes):
        traj = _run(network, controller, config, initial, None, t0, future=future)
        t1 = t0 + settling_time(float(traj.V[0]), controller.k, controller.mu_exp)
        future = ForwardIntegral.from_trajectory(traj, t1)
    traj.meta["settling_estimate"] = t1
    return traj


def resolve_chi(network: ValidatedNetwork, controller: HybridConfig) -> tuple[tuple[int, ...], ...]:
    chi = controller.chi if controller.chi is not None else network.boundary_nodes()
    if len(chi) != network.M:
        raise ValueError(f"chi has {len(chi)} groups for {network.M} clusters")
    for p, grp in enumerate(chi, start=1):
        if not set(grp) <= set(network.partition.members(p)):
            raise ValueError(f"chi nodes {grp} are not all in cluster {p}")
    return tuple(chi)


def _run(network: ValidatedNetwork, controller: Controller, config: IntegratorConfig, initial: InitialCondition,
         Q: np.ndarray | None, t0: float, future: ForwardIntegral | None) -> Trajectory:
    N, M, n = network.N, network.M, network.n
    labels = network.labels
    tau = network.delay
    h = config.h
    n_steps = config.n_steps
    y = initial.joint()
    hist0 = initial.history if initial.history is not None else y

    def err(state: np.ndarray) -> np.ndarray:
        return state[:N] - state[N:][labels]

    buf = HistoryBuffer.from_initial(hist0, t0, tau.tau_bar, h, capacity=n_steps + 2)

    pinning = controller if isinstance(controller, PinningImpulsiveConfig) else None
    hybrid = controller if isinstance(controller, HybridConfig) else None
    impulse_at: dict[int, int] = {}
    if pinning is not None:
        pinning.check(network.partition)
        impulse_at = config.impulse_steps(pinning.schedule)

    chan = None
    I_tau = None
    if hybrid is not None:
        mask = chi_mask(resolve_chi(network, hybrid), N)
        if callable(hist0):
            chan_init = lambda s: np.sum(err(np.asarray(hist0(s), dtype=float)) ** 2, axis=1)  # noqa: E731
        else:
            chan_init = np.sum(err(y) ** 2, axis=1)
        chan = HistoryBuffer.from_initial(chan_init, t0, tau.tau_bar, h, capacity=n_steps + 2, track_integral=True)
        explicit_psi = hybrid.psi_treatment == "explicit"
        I_tau = chan.integral(t0 - tau(t0), t0)

    times: list[float] = [t0]
    limits: list[str] = [""]
    snaps: list[np.ndarray] = [y.copy()]
    itaus: list[np.ndarray] = [] if hybrid is None else [I_tau.copy()]
    ifuts: list[np.ndarray] = []
    events: list[ImpulseEvent] = []

    def future_at(t: float) -> np.ndarray:
        if future is None:
            return np.zeros(N)
        return forward_integral_estimate(future, t, N, "iterative")

    if hybrid is not None:
        ifuts.append(future_at(t0))

    for step in range(n_steps):
        t = t0 + step * h
        t_next = t0 + (step + 1) * h
        if hybrid is None:
            def rhs(ts, yy, yd):
                return network.joint_rhs(yy, yd)
            y_new = rk4_step(rhs, buf, t, y, h, tau)
        else:
            I_fut = ifuts[-1]

            def rhs(ts, yy, yd, I_tau=I_tau, I_fut=I_fut):
                U = hybrid_control_inputs(err(yy), I_tau, I_fut, mask, hybrid, include_psi=explicit_psi)
                return network.joint_rhs(yy, yd, U)
            y_new = rk4_step(rhs, buf, t, y, h, tau)
            if not explicit_psi:
                gains = psi_gains(I_tau, I_fut, mask, hybrid)
                E_new = psi_flow(err(y_new), gains, h, hybrid.psi_epsilon)
                y_new[:N] = y_new[N:][labels] + E_new
        buf.append(t_next, y_new)
        y = y_new

        k = impulse_at.get(step + 1)
        if k is not None:
            times.append(t_next)
            limits.append("-")
            snaps.append(y.copy())
            E_right, pinned = impulsive_control_jump(err(y), pinning, k, network.partition)
            y = y.copy()
            y[:N] = y[N:][labels] + E_right
            buf.record_jump(y)
            events.append(ImpulseEvent(t_next, k, pinning.gain(k), pinned))
            times.append(t_next)
            limits.append("+")
            snaps.append(y.copy())
        else:
            times.append(t_next)
            limits.append("")
            snaps.append(y.copy())

        if hybrid is not None:
            chan.append(t_next, np.sum(err(y) ** 2, axis=1))
            I_tau = chan.integral(t_next - tau(t_next), t_next)
            itaus.append(I_tau.copy())
            ifuts.append(future_at(t_next))

    Y = np.asarray(snaps)
    states = Y[:, :N]
    leaders = Y[:, N:]
    errors = states - leaders[:, labels]
    sq = np.sum(errors ** 2, axis=2)
    norms = np.sqrt(sq)
    meta: dict = {}
    if hybrid is None:
        Qm = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
        V = np.einsum("rij,jk,rik->r", errors, Qm, errors)
        delayed = None
    else:
        delayed = np.asarray(itaus)
        fut = np.asarray(ifuts)
        V = 0.5 * sq.sum(axis=1) + 0.5 * hybrid.k1 * delayed.sum(axis=1) + hybrid.g1 * (fut * ~mask).sum(axis=1)
        meta["settling_estimate"] = t0 + settling_time(float(V[0]), hybrid.k, hybrid.mu_exp)
        meta["chi"] = resolve_chi(network, hybrid)
    return Trajectory(
        times=np.asarray(times),
        limits=tuple(limits),
        states=states,
        leaders=leaders,
        errors=errors,
        error_norms=norms,
        V=V,
        delayed_integrals=delayed,
        impulses=tuple(events),
        labels=labels.copy(),
        meta=meta,
    )
