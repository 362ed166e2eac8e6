"""Pinning impulsive control and finite-time hybrid control."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .engine import ImpulseSchedule, Trajectory, apply_impulse_event
from .errors import NoPreviousPass, RhoTooLarge
from .network import ClusterPartition

PinnedSet = tuple[tuple[int, ...], ...]

FUTURE_MODES = ("zero-future", "iterative")
PSI_TREATMENTS = ("split", "explicit")


@dataclass(frozen=True)
class PinningImpulsiveConfig:
    """Impulse gains, schedule and per-cluster pin counts.

    ``d_k`` is a constant or a sequence indexed by impulse number.  When
    ``nodes`` is given, those fixed (1-based) node sets are pinned at every
    impulse instead of selecting by error norm.
    """

    d_k: float | tuple[float, ...]
    schedule: ImpulseSchedule
    rho: tuple[int, ...] | None = None
    nodes: PinnedSet | None = None

    def __post_init__(self):
        if isinstance(self.d_k, (list, tuple)):
            object.__setattr__(self, "d_k", tuple(float(d) for d in self.d_k))
        if self.rho is not None:
            object.__setattr__(self, "rho", tuple(int(r) for r in self.rho))
        if self.nodes is not None:
            object.__setattr__(self, "nodes", tuple(tuple(int(i) for i in grp) for grp in self.nodes))
        if (self.rho is None) == (self.nodes is None):
            raise ValueError("give exactly one of rho (pin counts) or nodes (fixed pinned sets)")

    def gain(self, k: int) -> float:
        """``d_k`` for impulse number ``k`` (1-based)."""
        if isinstance(self.d_k, tuple):
            if not 1 <= k <= len(self.d_k):
                raise IndexError(f"no impulse gain for impulse {k} (sequence has {len(self.d_k)})")
            return self.d_k[k - 1]
        return float(self.d_k)

    def check(self, partition: ClusterPartition) -> None:
        if self.rho is not None:
            if len(self.rho) != partition.M:
                raise RhoTooLarge(f"rho has {len(self.rho)} entries for {partition.M} clusters")
            for p, (r, size) in enumerate(zip(self.rho, partition.sizes), start=1):
                if not 0 <= r <= size:
                    raise RhoTooLarge(f"rho_{p}={r} outside 0..{size}")
        else:
            if len(self.nodes) != partition.M:
                raise ValueError(f"nodes has {len(self.nodes)} groups for {partition.M} clusters")
            for p, grp in enumerate(self.nodes, start=1):
                members = set(partition.members(p))
                if not set(grp) <= members:
                    raise ValueError(f"pinned nodes {grp} are not all in cluster {p}")


@dataclass(frozen=True)
class HybridConfig:
    """Gains of the finite-time hybrid controller.

    ``chi`` lists, per cluster, the nodes that receive the linear feedback
    ``-g1 e_i``; ``None`` derives it from the coupling matrix.
    ``psi_treatment="split"`` integrates the normalized ``psi`` terms with
    their exact sub-flow after each RK4 step (see :func:`psi_flow`);
    ``"explicit"`` feeds them to RK4 like every other term.
    """

    k: float = 2.0
    k1: float = 1.4
    g1: float = 41.4
    mu_exp: float = 0.5
    psi_epsilon: float = 1e-10
    future_mode: str = "zero-future"
    passes: int = 3
    chi: PinnedSet | None = None
    psi_treatment: str = "split"

    def __post_init__(self):
        if not 0 < self.mu_exp < 1:
            raise ValueError(f"mu_exp must lie in (0, 1), got {self.mu_exp}")
        if not (self.k > 0 and self.k1 > 0 and self.g1 > 0):
            raise ValueError("k, k1 and g1 must be positive")
        if self.future_mode not in FUTURE_MODES:
            raise ValueError(f"future_mode must be one of {FUTURE_MODES}")
        if self.psi_treatment not in PSI_TREATMENTS:
            raise ValueError(f"psi_treatment must be one of {PSI_TREATMENTS}")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")
        if self.chi is not None:
            object.__setattr__(self, "chi", tuple(tuple(int(i) for i in grp) for grp in self.chi))

    @property
    def exponent(self) -> float:
        return 0.5 * (1.0 + self.mu_exp)


# ---------------------------------------------------------------------------
# pinning impulsive control
# ---------------------------------------------------------------------------


def select_pinned_nodes(error_norms: Sequence[float], partition: ClusterPartition, d_k: float,
                        rho: Sequence[int]) -> PinnedSet:
    """Pick ``rho_p`` nodes per cluster by error norm.

    For ``-2 < d_k < 0`` the largest norms are pinned, otherwise the
    smallest.  Ties go to the smaller node index.
    """
    norms = np.asarray(error_norms, dtype=float)
    if len(rho) != partition.M:
        raise RhoTooLarge(f"rho has {len(rho)} entries for {partition.M} clusters")
    largest = -2.0 < d_k < 0.0
    out = []
    b = partition.boundaries
    for p in range(partition.M):
        idx = np.arange(b[p], b[p + 1])
        r = int(rho[p])
        if not 0 <= r <= idx.size:
            raise RhoTooLarge(f"rho_{p + 1}={r} exceeds cluster size {idx.size}")
        key = -norms[idx] if largest else norms[idx]
        order = np.lexsort((idx, key))
        out.append(tuple(sorted(int(i) + 1 for i in idx[order[:r]])))
    return tuple(out)


def impulsive_control_jump(E: np.ndarray, config: PinningImpulsiveConfig, k: int,
                           partition: ClusterPartition) -> tuple[np.ndarray, PinnedSet]:
    """Error state right after impulse ``k`` and the pinned set used."""
    d_k = config.gain(k)
    if config.nodes is not None:
        pinned = config.nodes
    else:
        pinned = select_pinned_nodes(np.linalg.norm(E, axis=1), partition, d_k, config.rho)
    flat = [i for grp in pinned for i in grp]
    return apply_impulse_event(E, flat, d_k), pinned


# ---------------------------------------------------------------------------
# hybrid control
# ---------------------------------------------------------------------------


def psi(e_i: np.ndarray, norm_e: float, epsilon: float = 1e-10) -> np.ndarray:
    """``e_i / ||e||^2`` outside the guard ``||e|| <= epsilon``, zero inside."""
    e_i = np.asarray(e_i, dtype=float)
    if norm_e > epsilon:
        return e_i / (norm_e * norm_e)
    return np.zeros_like(e_i)


def signed_power(e: np.ndarray, mu: float) -> np.ndarray:
    """Componentwise ``sign(e) |e|^mu``."""
    e = np.asarray(e, dtype=float)
    return np.sign(e) * np.abs(e) ** mu


def psi_gains(I_tau: np.ndarray, I_fut: np.ndarray, in_chi: np.ndarray, config: HybridConfig) -> np.ndarray:
    """Scalar multiplier of ``psi(e_i, ||e||)`` in each node's control input."""
    a = config.exponent
    c = config.k * (config.k1 * np.maximum(I_tau, 0.0)) ** a
    fut = 2.0 * config.k * (config.g1 * np.maximum(I_fut, 0.0)) ** a
    return c + np.where(in_chi, 0.0, fut)


def hybrid_control_input(e_i: np.ndarray, norm_e: float, I_tau: float, I_fut: float, config: HybridConfig,
                         in_chi: bool) -> np.ndarray:
    """Control input of a single node.

    ``in_chi`` tells whether the node is coupled to another cluster (and so
    receives ``-g1 e_i``); the forward integral ``I_fut`` only acts on the
    other nodes.
    """
    e_i = np.asarray(e_i, dtype=float)
    c = psi_gains(np.array([I_tau]), np.array([I_fut]), np.array([in_chi]), config)[0]
    u = -config.k * signed_power(e_i, config.mu_exp) - c * psi(e_i, norm_e, config.psi_epsilon)
    if in_chi:
        u = u - config.g1 * e_i
    return u


def hybrid_control_inputs(E: np.ndarray, I_tau: np.ndarray, I_fut: np.ndarray, in_chi: np.ndarray,
                          config: HybridConfig, include_psi: bool = True) -> np.ndarray:
    """Vectorized :func:`hybrid_control_input` for all nodes (rows of ``E``)."""
    U = -config.k * signed_power(E, config.mu_exp)
    U -= config.g1 * E * in_chi[:, None]
    if include_psi:
        norm_e = float(np.sqrt(np.sum(E * E)))
        if norm_e > config.psi_epsilon:
            U -= psi_gains(I_tau, I_fut, in_chi, config)[:, None] * E / (norm_e * norm_e)
    return U


def psi_flow(E: np.ndarray, gains: np.ndarray, h: float, epsilon: float = 1e-10) -> np.ndarray:
    """Exact solution over ``h`` of ``e_i' = -c_i e_i / ||e||^2`` with frozen gains ``c_i``.

    Each row keeps its direction and shrinks by ``exp(-c_i s)`` where
    ``ds/dt = 1 / ||e||^2``.  The flow stops once ``||e||`` reaches
    ``epsilon`` (inside the guard the term vanishes).
    """
    E = np.asarray(E, dtype=float)
    w = np.sum(E * E, axis=1)
    r0 = float(w.sum())
    eps2 = epsilon * epsilon
    c = np.asarray(gains, dtype=float)
    active = (c > 0) & (w > 0)
    if r0 <= eps2 or not active.any():
        return E.copy()
    ca, wa = c[active], w[active]
    w_rest = float(w[~active].sum())

    def elapsed(s: float) -> float:
        return float(np.sum(wa * -np.expm1(-2.0 * ca * s) / (2.0 * ca))) + w_rest * s

    def norm2(s: float) -> float:
        return float(np.sum(wa * np.exp(-2.0 * ca * s))) + w_rest

    s_stop = np.inf
    if eps2 == 0.0 and w_rest == 0.0:
        if h >= float(np.sum(wa / (2.0 * ca))):
            out = E.copy()
            out[active] = 0.0
            return out
    elif w_rest < eps2:
        hi = 1.0 / ca.max()
        while norm2(hi) > eps2:
            hi *= 2.0
        s_stop = brentq(lambda s: norm2(s) - eps2, 0.0, hi, xtol=1e-15, rtol=1e-14)
    if elapsed(s_stop) <= h:
        s = s_stop
    else:
        hi = min(h / r0, s_stop) if np.isfinite(s_stop) else h / r0
        while elapsed(hi) < h and hi < s_stop:
            hi = min(2.0 * hi, s_stop)
        s = brentq(lambda x: elapsed(x) - h, 0.0, hi, xtol=1e-15, rtol=1e-14)
    return E * np.exp(-c * s)[:, None]


@dataclass
class ForwardIntegral:
    """Integral of ``e_i^T e_i`` over ``[t, t1]`` read from a previous pass."""

    times: np.ndarray
    cumulative: np.ndarray
    t1: float

    @classmethod
    def from_trajectory(cls, traj: Trajectory, t1: float) -> "ForwardIntegral":
        sq = traj.squared_errors
        dt = np.diff(traj.times)[:, None]
        cum = np.concatenate([np.zeros((1, sq.shape[1])), np.cumsum(0.5 * dt * (sq[1:] + sq[:-1]), axis=0)])
        return cls(np.asarray(traj.times, dtype=float), cum, float(t1))

    def _cum_at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.cumulative[:, j]) for j in range(self.cumulative.shape[1])])

    def __call__(self, t: float) -> np.ndarray:
        if t >= self.t1:
            return np.zeros(self.cumulative.shape[1])
        end = min(self.t1, float(self.times[-1]))
        return np.maximum(self._cum_at(end) - self._cum_at(t), 0.0)


def forward_integral_estimate(previous: ForwardIntegral | None, t: float, n_nodes: int,
                              mode: str = "zero-future") -> np.ndarray:
    """Per-node estimate of the forward-looking integral used by the controller."""
    if mode == "zero-future":
        return np.zeros(n_nodes)
    if mode != "iterative":
        raise ValueError(f"unknown future mode {mode!r}")
    if previous is None:
        raise NoPreviousPass("iterative forward integral needs a previous simulation pass")
    return previous(t)


def chi_mask(chi: PinnedSet, n_nodes: int) -> np.ndarray:
    mask = np.zeros(n_nodes, dtype=bool)
    for grp in chi:
        for i in grp:
            mask[i - 1] = True
    return mask


__all__ = [
    "PinnedSet", "PinningImpulsiveConfig", "HybridConfig", "select_pinned_nodes", "impulsive_control_jump",
    "psi", "signed_power", "psi_gains", "hybrid_control_input", "hybrid_control_inputs", "psi_flow",
    "ForwardIntegral", "forward_integral_estimate", "chi_mask",
]
