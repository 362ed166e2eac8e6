"""Coupled delayed neural network: cluster structure, leaders and error states.

Node and cluster indices in the public API are 1-based, matching the usual
mathematical notation (nodes ``1..N``, clusters ``1..M``).  Internally every
array is 0-based.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .errors import (
    BadPartition,
    ClassA1Violation,
    ClassA2Violation,
    NetworkValidationError,
    NonPositiveDefiniteC,
    NonZeroRowSum,
    OutOfRange,
    UnknownActivation,
)

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-9
PD_TOL = 1e-9


# ---------------------------------------------------------------------------
# partition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterPartition:
    """Contiguous clusters given by boundaries ``v_0 = 0 < v_1 < ... < v_M = N``."""

    boundaries: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(int(b) for b in self.boundaries))

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "ClusterPartition":
        return cls((0, *np.cumsum([int(s) for s in sizes]).tolist()))

    def validate(self) -> None:
        b = self.boundaries
        if len(b) < 2:
            raise BadPartition("partition needs at least one cluster")
        if b[0] != 0:
            raise BadPartition(f"first boundary must be 0, got {b[0]}")
        for lo, hi in zip(b[:-1], b[1:]):
            if hi <= lo:
                raise BadPartition(f"boundaries must be strictly increasing, got {list(b)}")

    @property
    def N(self) -> int:
        return self.boundaries[-1]

    @property
    def M(self) -> int:
        return len(self.boundaries) - 1

    @property
    def sizes(self) -> tuple[int, ...]:
        b = self.boundaries
        return tuple(b[p + 1] - b[p] for p in range(self.M))

    def members(self, p: int) -> range:
        """1-based node indices of cluster ``p`` (1-based)."""
        if not 1 <= p <= self.M:
            raise OutOfRange(f"cluster {p} not in 1..{self.M}")
        return range(self.boundaries[p - 1] + 1, self.boundaries[p] + 1)

    def labels(self) -> np.ndarray:
        """0-based cluster label of every 0-based node."""
        return np.repeat(np.arange(self.M), self.sizes)


def cluster_of(partition: ClusterPartition, i: int) -> int:
    """Cluster ``p`` (1-based) containing node ``i`` (1-based)."""
    if not 1 <= i <= partition.N:
        raise OutOfRange(f"node {i} not in 1..{partition.N}")
    b = partition.boundaries
    for p in range(1, len(b)):
        if b[p - 1] < i <= b[p]:
            return p
    raise OutOfRange(f"node {i} not covered by partition {list(b)}")  # pragma: no cover


# ---------------------------------------------------------------------------
# per-cluster parameters, activation, delay
# ---------------------------------------------------------------------------


def _as_matrix(a, n: int | None = None) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NetworkValidationError(f"expected a square matrix, got shape {m.shape}")
    if n is not None and m.shape[0] != n:
        raise NetworkValidationError(f"expected {n}x{n} matrix, got {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class ClusterParams:
    C: np.ndarray
    A: np.ndarray
    B: np.ndarray
    I: np.ndarray

    def __post_init__(self):
        C = _as_matrix(self.C)
        n = C.shape[0]
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "A", _as_matrix(self.A, n))
        object.__setattr__(self, "B", _as_matrix(self.B, n))
        I = np.array(self.I, dtype=float).reshape(-1)
        if I.shape != (n,):
            raise NetworkValidationError(f"input vector I must have length {n}, got {I.shape}")
        object.__setattr__(self, "I", I)

    @property
    def n(self) -> int:
        return self.C.shape[0]


ACTIVATION_KINDS = ("arctan", "tanh", "linear", "custom")


@dataclass(frozen=True, eq=False)
class ActivationSpec:
    """Componentwise activation ``f``.

    ``lipschitz`` is a declared constant (scalar, or one value per cluster);
    it overrides the analytic value for the built-in kinds and is mandatory
    for ``custom``.
    """

    kind: str = "arctan"
    slope: float = 1.0
    func: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz: float | tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise UnknownActivation(f"unknown activation kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise UnknownActivation("custom activation needs a callable")
        if isinstance(self.lipschitz, (list, tuple)):
            object.__setattr__(self, "lipschitz", tuple(float(x) for x in self.lipschitz))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "arctan":
            return np.arctan(x)
        if self.kind == "tanh":
            return np.tanh(x)
        if self.kind == "linear":
            return self.slope * np.asarray(x, dtype=float)
        return np.asarray(self.func(x), dtype=float)


def lipschitz_bound(activation: ActivationSpec, n_clusters: int = 1) -> np.ndarray:
    """Lipschitz constant ``xi_p`` of the activation for each cluster."""
    if activation.lipschitz is not None:
        xi = np.atleast_1d(np.asarray(activation.lipschitz, dtype=float))
        if xi.size == 1:
            xi = np.full(n_clusters, xi[0])
        if xi.size != n_clusters:
            raise UnknownActivation(f"expected {n_clusters} Lipschitz constants, got {xi.size}")
        if np.any(xi < 0):
            raise UnknownActivation("Lipschitz constants must be nonnegative")
        return xi
    if activation.kind in ("arctan", "tanh"):
        return np.ones(n_clusters)
    if activation.kind == "linear":
        return np.full(n_clusters, abs(activation.slope))
    raise UnknownActivation(f"activation {activation.kind!r} needs an explicit Lipschitz constant")


DELAY_FORMS = ("constant", "logistic", "tabulated")


@dataclass(frozen=True, eq=False)
class DelayEvaluator:
    """Time-varying delay ``tau(t)`` with its bounds ``tau_bar`` and ``sigma``.

    Use the constructors :meth:`constant`, :meth:`logistic` and
    :meth:`tabulated`.  ``tau_bar`` bounds ``tau`` from above and ``sigma``
    bounds its derivative; both are derived at construction.
    """

    form: str
    value: float = 0.0
    times: np.ndarray | None = None
    values: np.ndarray | None = None
    tau_bar: float = field(init=False)
    sigma: float = field(init=False)

    def __post_init__(self):
        if self.form == "constant":
            if not self.value > 0:
                raise NetworkValidationError("constant delay must be positive")
            tau_bar, sigma = float(self.value), 0.0
        elif self.form == "logistic":
            if not self.value > 0:
                raise NetworkValidationError("logistic delay amplitude must be positive")
            # a*e^t/(1+e^t) -> a as t -> inf; derivative a*e^t/(1+e^t)^2 peaks at t=0.
            tau_bar, sigma = float(self.value), float(self.value) / 4.0
        elif self.form == "tabulated":
            ts = np.asarray(self.times, dtype=float)
            vs = np.asarray(self.values, dtype=float)
            if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2:
                raise NetworkValidationError("tabulated delay needs matching 1-d times/values (>= 2 points)")
            if np.any(np.diff(ts) <= 0):
                raise NetworkValidationError("tabulated delay times must be strictly increasing")
            if np.any(vs <= 0):
                raise NetworkValidationError("tabulated delay values must be positive")
            object.__setattr__(self, "times", ts)
            object.__setattr__(self, "values", vs)
            tau_bar = float(vs.max())
            sigma = max(0.0, float(np.max(np.diff(vs) / np.diff(ts))))
        else:
            raise NetworkValidationError(f"unknown delay form {self.form!r}")
        if sigma >= 1.0:
            raise NetworkValidationError(f"delay derivative bound sigma={sigma:.6g} must be < 1")
        object.__setattr__(self, "tau_bar", tau_bar)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def constant(cls, c: float) -> "DelayEvaluator":
        return cls("constant", value=c)

    @classmethod
    def logistic(cls, amplitude: float) -> "DelayEvaluator":
        return cls("logistic", value=amplitude)

    @classmethod
    def tabulated(cls, times: Sequence[float], values: Sequence[float]) -> "DelayEvaluator":
        return cls("tabulated", times=times, values=values)

    def __call__(self, t: float) -> float:
        if self.form == "constant":
            return self.value
        if self.form == "logistic":
            return self.value * float(expit(t))
        return float(np.interp(t, self.times, self.values))

    def derivative(self, t: float) -> float:
        if self.form == "constant":
            return 0.0
        if self.form == "logistic":
            s = float(expit(t))
            return self.value * s * (1.0 - s)
        ts, vs = self.times, self.values
        if t < ts[0] or t >= ts[-1]:
            return 0.0
        k = int(np.searchsorted(ts, t, side="right")) - 1
        return float((vs[k + 1] - vs[k]) / (ts[k + 1] - ts[k]))

    def to_dict(self) -> dict:
        if self.form == "tabulated":
            return {"form": "tabulated", "times": self.times.tolist(), "values": self.values.tolist()}
        key = "value" if self.form == "constant" else "amplitude"
        return {"form": self.form, key: self.value}


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------

COUPLING_FORMS = ("error", "state")


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Full description of the coupled network.

    ``coupling`` selects how the diffusive term enters the node equations:
    ``"state"`` uses ``sum_j g_ij x_j`` literally, ``"error"`` uses
    ``sum_j g_ij (x_j - s_{p(j)})``, i.e. the coupling seen by the error
    system.  The two coincide whenever every block of ``G`` has zero row sums.
    """

    n: int
    partition: ClusterPartition
    params: tuple[ClusterParams, ...]
    G: np.ndarray
    activation: ActivationSpec = field(default_factory=ActivationSpec)
    delay: DelayEvaluator = field(default_factory=lambda: DelayEvaluator.constant(1.0))
    coupling: str = "error"

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "G", np.array(self.G, dtype=float))


def is_positive_definite(M: np.ndarray, tol: float = PD_TOL) -> bool:
    M = np.asarray(M, dtype=float)
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T)).min() > tol)


def assumption2_issues(G: np.ndarray, partition: ClusterPartition, tol: float = ROW_SUM_TOL) -> list[NetworkValidationError]:
    """Block-structure violations of ``G`` (diagonal blocks in A1, off-diagonal in A2)."""
    issues: list[NetworkValidationError] = []
    b = partition.boundaries
    M = partition.M
    for p in range(M):
        for q in range(M):
            blk = G[b[p]:b[p + 1], b[q]:b[q + 1]]
            if p == q:
                off = blk - np.diag(np.diag(blk))
                neg = np.argwhere(off < -tol)
                if neg.size:
                    r, c = neg[0]
                    issues.append(ClassA1Violation((p + 1, q + 1), (int(r) + 1, int(c) + 1),
                                                   f"negative off-diagonal entry {blk[r, c]:.12g}"))
                sums = blk.sum(axis=1)
                for r in np.flatnonzero(np.abs(sums) > tol):
                    issues.append(ClassA1Violation((p + 1, q + 1), (int(r) + 1, int(r) + 1),
                                                   f"row sum {sums[r]:.12g} != 0"))
            else:
                sums = blk.sum(axis=1)
                for r in np.flatnonzero(np.abs(sums) > tol):
                    issues.append(ClassA2Violation((p + 1, q + 1), int(r) + 1, float(sums[r])))
    return issues


class ValidatedNetwork:
    """A network whose invariants have been checked, with precomputed stacks.

    Rows ``0..N-1`` of a *joint* state are the nodes, rows ``N..N+M-1`` the
    cluster leaders.
    """

    def __init__(self, spec: NetworkSpec, block_issues: list[NetworkValidationError]):
        self.spec = spec
        self.block_issues = block_issues
        part = spec.partition
        self.n = spec.n
        self.N = part.N
        self.M = part.M
        self.labels = part.labels()
        self.xi = lipschitz_bound(spec.activation, self.M)
        self.G = spec.G
        self.coupling = spec.coupling
        rows = np.concatenate([self.labels, np.arange(self.M)])
        self._C = np.stack([spec.params[p].C for p in rows])
        self._A = np.stack([spec.params[p].A for p in rows])
        self._B = np.stack([spec.params[p].B for p in rows])
        self._I = np.stack([spec.params[p].I for p in rows])

    @property
    def partition(self) -> ClusterPartition:
        return self.spec.partition

    @property
    def delay(self) -> DelayEvaluator:
        return self.spec.delay

    @property
    def activation(self) -> ActivationSpec:
        return self.spec.activation

    @property
    def satisfies_assumption2(self) -> bool:
        return not self.block_issues

    def params(self, p: int) -> ClusterParams:
        return self.spec.params[p - 1]

    def leader_rhs(self, p: int, s_now: np.ndarray, s_delayed: np.ndarray) -> np.ndarray:
        """Isolated cluster dynamics followed by leader ``p`` (1-based)."""
        if not 1 <= p <= self.M:
            raise OutOfRange(f"cluster {p} not in 1..{self.M}")
        cp = self.spec.params[p - 1]
        f = self.spec.activation
        s_now = np.asarray(s_now, dtype=float)
        return -cp.C @ s_now + cp.A @ f(s_now) + cp.B @ f(np.asarray(s_delayed, dtype=float)) + cp.I

    def coupled_rhs(self, t: float, X: np.ndarray, X_delayed: np.ndarray, U: np.ndarray | None = None,
                    reference: np.ndarray | None = None) -> np.ndarray:
        """Node right-hand sides, one row per node.

        ``reference`` (N x n) shifts the coupling to act on ``X - reference``.
        """
        X = np.asarray(X, dtype=float)
        f = self.spec.activation
        N = self.N
        out = (-_rowmul(self._C[:N], X) + _rowmul(self._A[:N], f(X))
               + _rowmul(self._B[:N], f(np.asarray(X_delayed, dtype=float))) + self._I[:N])
        out += self.G @ (X if reference is None else X - reference)
        if U is not None:
            out += U
        return out

    def joint_rhs(self, y: np.ndarray, y_delayed: np.ndarray, U: np.ndarray | None = None) -> np.ndarray:
        """Right-hand side of the stacked node + leader system."""
        f = self.spec.activation
        N = self.N
        out = -_rowmul(self._C, y) + _rowmul(self._A, f(y)) + _rowmul(self._B, f(y_delayed)) + self._I
        X = y[:N]
        if self.coupling == "error":
            out[:N] += self.G @ (X - y[N:][self.labels])
        else:
            out[:N] += self.G @ X
        if U is not None:
            out[:N] += U
        return out

    def error_state(self, X: np.ndarray, S: np.ndarray) -> np.ndarray:
        """Per-node synchronization error ``x_i - s_{p(i)}``."""
        return np.asarray(X, dtype=float) - np.asarray(S, dtype=float)[self.labels]

    def node_states(self, E: np.ndarray, S: np.ndarray) -> np.ndarray:
        return np.asarray(E, dtype=float) + np.asarray(S, dtype=float)[self.labels]

    def boundary_nodes(self) -> tuple[tuple[int, ...], ...]:
        """Per cluster, the 1-based nodes with a nonzero coupling to another cluster."""
        G = self.G
        out = []
        for p in range(self.M):
            inside = self.labels == p
            chosen = [i + 1 for i in np.flatnonzero(inside)
                      if np.any(G[i, ~inside] != 0) or np.any(G[~inside, i] != 0)]
            out.append(tuple(chosen))
        return tuple(out)


def _rowmul(mats: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    return np.matmul(mats, vecs[..., None])[..., 0]


def validate_network(spec: NetworkSpec, strict_blocks: bool = False) -> ValidatedNetwork:
    """Check every invariant of ``spec`` and return a validated handle.

    Block-structure violations of ``G`` are raised only with
    ``strict_blocks=True``; otherwise they are logged and kept on the handle
    in ``block_issues``.
    """
    part = spec.partition
    part.validate()
    if spec.n < 1:
        raise NetworkValidationError("state dimension n must be >= 1")
    if len(spec.params) != part.M:
        raise BadPartition(f"{part.M} clusters but {len(spec.params)} parameter sets")
    for p, cp in enumerate(spec.params, start=1):
        if cp.n != spec.n:
            raise NetworkValidationError(f"cluster {p} matrices are {cp.n}x{cp.n}, expected n={spec.n}")
        if not np.allclose(cp.C, cp.C.T, atol=1e-12):
            raise NonPositiveDefiniteC(p)
        lo = float(np.linalg.eigvalsh(cp.C).min())
        if lo <= PD_TOL:
            raise NonPositiveDefiniteC(p, lo)
    G = spec.G
    if G.shape != (part.N, part.N):
        raise NetworkValidationError(f"G must be {part.N}x{part.N}, got {G.shape}")
    sums = G.sum(axis=1)
    for r, s in enumerate(sums, start=1):
        if abs(s) > ROW_SUM_TOL:
            raise NonZeroRowSum(r, float(s))
    if spec.coupling not in COUPLING_FORMS:
        raise NetworkValidationError(f"coupling must be one of {COUPLING_FORMS}, got {spec.coupling!r}")
    lipschitz_bound(spec.activation, part.M)
    issues = assumption2_issues(G, part)
    if issues:
        if strict_blocks:
            raise issues[0]
        log.info("coupling matrix violates the block row-sum structure (%d issues); first: %s",
                 len(issues), issues[0])
    return ValidatedNetwork(spec, issues)


__all__ = [
    "ClusterPartition", "ClusterParams", "ActivationSpec", "DelayEvaluator", "NetworkSpec",
    "ValidatedNetwork", "validate_network", "cluster_of", "lipschitz_bound", "is_positive_definite",
    "assumption2_issues",
]
