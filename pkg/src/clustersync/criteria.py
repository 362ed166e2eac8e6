"""Checkers for the sufficient synchronization conditions and the Lyapunov quantities.

Definiteness is decided from symmetric eigenvalues with tolerance
``PD_TOL`` on the minimum eigenvalue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import SingularE
from .network import ClusterPartition, ValidatedNetwork

if TYPE_CHECKING:
    from .controllers import PinningImpulsiveConfig

PD_TOL = 1e-9
COND_LIMIT = 1e12


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


REL_TOL = 1e-12


@dataclass
class ConditionRecord:
    name: str
    lhs: float
    relation: str
    rhs: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "relation": self.relation, "rhs": self.rhs,
                "passed": self.passed, "detail": self.detail}


@dataclass
class CriteriaReport:
    theorem: str
    records: list[ConditionRecord] = field(default_factory=list)
    derived: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def record(self, name: str, lhs: float, relation: str, rhs: float, detail: str = "") -> ConditionRecord:
        lhs, rhs = float(lhs), float(rhs)
        # Non-strict relations absorb rounding, so quantities that are equal by
        # construction (e.g. q = gamma exp(lam tau_bar)) do not fail spuriously.
        slack = REL_TOL * max(1.0, abs(lhs), abs(rhs))
        ok = {
            "<": lhs < rhs,
            "<=": lhs <= rhs + slack,
            ">=": lhs >= rhs - slack,
            ">": lhs > rhs,
        }[relation]
        rec = ConditionRecord(name, lhs, relation, rhs, bool(ok), detail)
        self.records.append(rec)
        return rec

    def get(self, name: str) -> ConditionRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "passed": self.passed,
            "conditions": [r.to_dict() for r in self.records],
            "derived": _jsonable(self.derived),
            "notes": list(self.notes),
        }

    def to_text(self) -> str:
        lines = [f"{self.theorem}: {'PASS' if self.passed else 'FAIL'}"]
        for r in self.records:
            mark = "ok  " if r.passed else "FAIL"
            extra = f"  ({r.detail})" if r.detail else ""
            lines.append(f"  [{mark}] {r.name}: {r.lhs:.6g} {r.relation} {r.rhs:.6g}{extra}")
        for k, v in self.derived.items():
            lines.append(f"  {k} = {_jsonable(v)}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        return "\n".join(lines)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


# ---------------------------------------------------------------------------
# linear algebra helpers
# ---------------------------------------------------------------------------


def _sym(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def lambda_max(M: np.ndarray) -> float:
    """Largest eigenvalue of the symmetric part of ``M``."""
    return float(np.linalg.eigvalsh(_sym(M)).max())


def lambda_min(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(_sym(M)).min())


def _checked_spd(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise SingularE(f"{name} must be square, got shape {M.shape}")
    if not np.allclose(M, M.T, atol=1e-12):
        raise SingularE(f"{name} must be symmetric")
    eig = np.linalg.eigvalsh(M)
    if eig.min() <= PD_TOL or eig.max() / eig.min() > COND_LIMIT:
        raise SingularE(f"{name} is not positive definite / invertible to tolerance (eigenvalues {eig})")
    return M


# ---------------------------------------------------------------------------
# impulsive pinning criteria
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Theorem1Params:
    """Free parameters of the impulsive pinning criterion.

    ``q`` defaults to ``gamma * exp(lam * tau_bar)``; ``mu``/``upsilon``
    default to the tight values from :func:`compute_mu_upsilon`;
    ``epsilon`` (weight of ``upsilon`` in the rate condition) defaults to
    ``q``; ``sigma_rate`` defaults to ``max(mu + q upsilon + lam, 0) + margin``.
    """

    Q: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    alpha: float = 1.0
    beta: float = 1.0
    lam: float = 0.1
    gamma: float = 1.0
    q: float | None = None
    mu: float | None = None
    upsilon: float | None = None
    epsilon: float | None = None
    sigma_rate: float | None = None
    margin: float = 1e-6

    def __post_init__(self):
        for name in ("Q", "E1", "E2"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        if not (self.alpha > 0 and self.beta > 0 and self.lam > 0):
            raise ValueError("alpha, beta and lam must be positive")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")


def clusterwise_phi(network: ValidatedNetwork, params: Theorem1Params, p: int) -> np.ndarray:
    """Quadratic-form bound on the non-delayed part of dV/dt for one node of cluster ``p`` (1-based)."""
    Q, E1, E2 = params.Q, params.E1, params.E2
    cp = network.params(p)
    xi = network.xi[p - 1]
    QA = Q @ cp.A
    QB = Q @ cp.B
    return (-Q @ cp.C - cp.C.T @ Q
            + params.alpha * QA @ np.linalg.solve(E1, QA.T)
            + params.beta * QB @ np.linalg.solve(E2, QB.T)
            + xi ** 2 / params.alpha * E1)


def growth_matrix(network: ValidatedNetwork, params: Theorem1Params) -> np.ndarray:
    """``Nn x Nn`` matrix ``M`` with ``dV/dt <= e^T M e + (delayed term)``."""
    N, n = network.N, network.n
    M = np.zeros((N * n, N * n))
    phis = [clusterwise_phi(network, params, p) for p in range(1, network.M + 1)]
    for i, p in enumerate(network.labels):
        M[i * n:(i + 1) * n, i * n:(i + 1) * n] = _sym(phis[p])
    GQ = np.kron(network.G, params.Q)
    return M + GQ + GQ.T


def compute_mu_upsilon(network: ValidatedNetwork, params: Theorem1Params) -> tuple[float, float]:
    """Tight ``mu`` and ``upsilon`` with ``dV/dt <= mu V(t) + upsilon V(t - tau(t))``."""
    Q = _checked_spd(params.Q, "Q")
    _checked_spd(params.E1, "E1")
    E2 = _checked_spd(params.E2, "E2")
    M = growth_matrix(network, params)
    mu = float(scipy.linalg.eigh(M, np.kron(np.eye(network.N), Q), eigvals_only=True).max())
    xi_max = float(network.xi.max())
    delayed = xi_max ** 2 / params.beta * E2
    upsilon = float(scipy.linalg.eigh(_sym(delayed), Q, eigvals_only=True).max())
    return mu, max(upsilon, 0.0)


def eta_factors(Q: np.ndarray, d_k: float, partition: ClusterPartition, rho: Sequence[int]) -> np.ndarray:
    """Per-cluster Lyapunov contraction factor of one impulse."""
    Q = np.asarray(Q, dtype=float)
    lo, hi = lambda_min(Q), lambda_max(Q)
    sizes = np.asarray(partition.sizes, dtype=float)
    free = sizes - np.asarray(rho, dtype=float)
    # Largest errors pinned for -2 < d_k < 0; smallest pinned otherwise, where the
    # unpinned share enters with the opposite sign and the eigenvalue ratio flips.
    ratio = hi / lo if -2.0 < d_k < 0.0 else lo / hi
    return (1.0 + d_k) ** 2 - d_k * (2.0 + d_k) * ratio * free / sizes


def eta_k(Q: np.ndarray, d_k: float, partition: ClusterPartition, rho: Sequence[int]) -> float:
    """Worst-cluster contraction factor ``eta_k`` of an impulse with gain ``d_k``."""
    return float(eta_factors(Q, d_k, partition, rho).max())


def _impulse_list(pinning: "PinningImpulsiveConfig", horizon: float | None) -> list[tuple[int, float, float]]:
    """``(k, d_k, t_k - t_{k-1})`` for the impulses the criterion must cover."""
    sched = pinning.schedule
    if sched.period is not None:
        count = len(pinning.d_k) if isinstance(pinning.d_k, tuple) else 1
        if horizon is not None and isinstance(pinning.d_k, tuple):
            count = min(count, len(sched.times_until(horizon)))
        return [(k, pinning.gain(k), sched.period) for k in range(1, count + 1)]
    gaps = sched.gaps(horizon)
    if isinstance(pinning.d_k, tuple):
        gaps = gaps[: len(pinning.d_k)]
    return [(k, pinning.gain(k), float(g)) for k, g in enumerate(gaps, start=1)]


def check_theorem1(network: ValidatedNetwork, params: Theorem1Params, pinning: "PinningImpulsiveConfig",
                   horizon: float | None = None) -> CriteriaReport:
    """Evaluate the impulsive pinning criterion for the given parameters."""
    rep = CriteriaReport("pinning impulsive criterion")
    tau_bar = network.delay.tau_bar
    mu_t, ups_t = compute_mu_upsilon(network, params)
    mu = mu_t if params.mu is None else float(params.mu)
    ups = ups_t if params.upsilon is None else float(params.upsilon)
    q = params.gamma * math.exp(params.lam * tau_bar) if params.q is None else float(params.q)
    eps = q if params.epsilon is None else float(params.epsilon)
    growth = mu + q * ups
    sigma_rate = (max(growth + params.lam, 0.0) + params.margin
                  if params.sigma_rate is None else float(params.sigma_rate))
    xi_max = float(network.xi.max())

    diff = ups * params.Q - xi_max ** 2 / params.beta * params.E2
    rep.record("C9 delayed-term dominance: lambda_min(upsilon Q - xi^2 E2 / beta)", lambda_min(diff),
               ">=", -PD_TOL)

    pinning.check(network.partition)
    impulses = _impulse_list(pinning, horizon)
    etas = []
    for k, d, gap in impulses:
        if pinning.rho is not None:
            rho = pinning.rho
        else:
            rho = [len(g) for g in pinning.nodes]
        eta = eta_k(params.Q, d, network.partition, rho)
        etas.append(eta)
        log_eta = math.log(eta) if eta > 0 else -math.inf
        rep.record(f"C10 impulse {k}: ln eta_k <= -(sigma_rate + lam) * gap", log_eta, "<=",
                   -(sigma_rate + params.lam) * gap, f"eta_k={eta:.6g}, gap={gap:.6g}")
        rep.record(f"L1 impulse {k}: eta_k > 0", eta, ">", 0.0)
        rep.record(f"L1 impulse {k}: eta_k <= 1", eta, "<=", 1.0)
        if eta > 0:
            rep.record(f"L1 impulse {k}: gamma >= 1/eta_k", params.gamma, ">=", 1.0 / eta)
    rep.record("C11 rate: mu + epsilon upsilon - (sigma_rate + lam)", mu + eps * ups - (sigma_rate + params.lam),
               "<", 0.0)
    rep.record("L1 Razumikhin constant: q >= gamma exp(lam tau_bar)", q, ">=",
               params.gamma * math.exp(params.lam * tau_bar))
    rep.record("L1 growth window: sigma_rate - lam >= mu + q upsilon", sigma_rate - params.lam, ">=", growth)
    rep.record("L1 sigma_rate > 0", sigma_rate, ">", 0.0)

    rep.derived.update({
        "mu": mu, "upsilon": ups, "q": q, "epsilon": eps, "sigma_rate": sigma_rate,
        "razumikhin_growth": growth, "eta_k": etas,
        "worst_cluster_factor": max(etas) if etas else None,
        "xi_per_cluster": network.xi, "xi_max": xi_max,
        "convergence_rate": params.lam / 2.0,
    })
    rep.notes.append("the printed block matrix inequality mixes N x N and Nn x Nn blocks; the checker assembles "
                     "mu from the quadratic growth bound and upsilon from the delayed-term bound instead")
    rep.notes.append("epsilon in the rate condition is taken as q unless overridden")
    if not network.satisfies_assumption2:
        rep.notes.append("coupling matrix violates the block row-sum structure for this partition")
    return rep


# ---------------------------------------------------------------------------
# finite-time hybrid criteria
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Theorem2Params:
    alpha: float
    beta: float
    E1: np.ndarray
    E2: np.ndarray
    k1: float = 1.4
    g1: float = 41.4
    k: float = 2.0
    mu_exp: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "E1", np.array(self.E1, dtype=float))
        object.__setattr__(self, "E2", np.array(self.E2, dtype=float))
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if not (self.k1 > 0 and self.g1 > 0 and self.k > 0):
            raise ValueError("k, k1 and g1 must be positive")
        if not 0 < self.mu_exp < 1:
            raise ValueError("mu_exp must lie in (0, 1)")


def check_theorem2(network: ValidatedNetwork, params: Theorem2Params) -> CriteriaReport:
    """Evaluate both finite-time conditions for every cluster."""
    E1 = _checked_spd(params.E1, "E1")
    E2 = _checked_spd(params.E2, "E2")
    sigma = network.delay.sigma
    coupling = lambda_max(np.kron(network.G, np.eye(network.n)))
    rep = CriteriaReport("finite-time hybrid criterion")
    cond1, cond2 = [], []
    for p in range(1, network.M + 1):
        cp = network.params(p)
        xi = float(network.xi[p - 1])
        v1 = xi ** 2 / params.beta * lambda_max(E2) + sigma
        rep.record(f"condition 1, cluster {p}: xi^2 lambda_max(E2) / beta + sigma", v1, "<", 1.0)
        v2 = (-lambda_min(cp.C)
              + 0.5 * params.alpha * lambda_max(cp.A @ np.linalg.solve(E1, cp.A.T))
              + 0.5 * xi ** 2 / params.alpha * lambda_max(E1)
              + 0.5 * params.beta * lambda_max(cp.B @ np.linalg.solve(E2, cp.B.T))
              + coupling + 0.5 * params.k1 - params.g1)
        rep.record(f"condition 2, cluster {p}: growth rate bound", v2, "<", 0.0)
        cond1.append(v1)
        cond2.append(v2)
    rep.derived.update({"condition1": cond1, "condition2": cond2, "sigma_delay": sigma,
                        "lambda_max_coupling": coupling, "xi_per_cluster": network.xi})
    rep.notes.append("lambda_max(G x I) is taken over the symmetric part of G")
    return rep


def settling_time(V0: float, k: float, mu_exp: float) -> float:
    """Time from ``t0`` until the hybrid Lyapunov functional reaches zero."""
    if V0 < 0:
        raise ValueError("V0 must be nonnegative")
    return (2.0 * V0) ** ((1.0 - mu_exp) / 2.0) / (k * (1.0 - mu_exp))


# ---------------------------------------------------------------------------
# Lyapunov functions and inequality oracles
# ---------------------------------------------------------------------------


def lyapunov_V1(E: np.ndarray, Q: np.ndarray) -> float:
    E = np.atleast_2d(np.asarray(E, dtype=float))
    return float(np.einsum("ij,jk,ik->", E, np.asarray(Q, dtype=float), E))


def lyapunov_V2(E: np.ndarray, I_tau: Iterable[float], I_fut: Iterable[float], k1: float, g1: float) -> float:
    """Hybrid Lyapunov functional; ``I_fut`` holds the forward integrals of the non-boundary nodes."""
    E = np.atleast_2d(np.asarray(E, dtype=float))
    return float(0.5 * np.sum(E * E) + 0.5 * k1 * np.sum(np.asarray(I_tau, dtype=float))
                 + g1 * np.sum(np.asarray(I_fut, dtype=float)))


def power_mean_check(vectors: Iterable[np.ndarray], q: float) -> bool:
    """``(sum ||x_i||^2)^(q/2) <= sum ||x_i||^q`` for ``0 < q < 2``."""
    if not 0 < q < 2:
        raise ValueError("q must lie in (0, 2)")
    norms = np.array([np.linalg.norm(np.asarray(v, dtype=float)) for v in vectors])
    lhs = float(np.sum(norms ** 2) ** (q / 2.0))
    rhs = float(np.sum(norms ** q))
    return lhs <= rhs * (1.0 + 1e-12)


def quadratic_bound_check(x: np.ndarray, y: np.ndarray, varpi: float, E: np.ndarray) -> bool:
    """``2 x^T y <= varpi x^T E x + y^T E^{-1} y / varpi`` for ``E > 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    E = np.asarray(E, dtype=float)
    lhs = 2.0 * float(x @ y)
    rhs = varpi * float(x @ E @ x) + float(y @ np.linalg.solve(E, y)) / varpi
    return lhs <= rhs + 1e-12 * max(1.0, abs(rhs))
