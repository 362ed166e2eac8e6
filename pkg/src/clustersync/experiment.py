"""Config-driven experiment runner with CSV export and run summaries."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .controllers import HybridConfig, PinningImpulsiveConfig
from .criteria import (
    CriteriaReport,
    Theorem1Params,
    Theorem2Params,
    check_theorem1,
    check_theorem2,
)
from .engine import ImpulseSchedule, IntegratorConfig, Trajectory
from .errors import ClusterSyncError, ParseError, ValidationError
from .network import (
    ActivationSpec,
    ClusterParams,
    ClusterPartition,
    DelayEvaluator,
    NetworkSpec,
    validate_network,
)
from .simulation import Controller, InitialCondition, integrate

DEFAULT_TOL = 1e-3

# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

_EXAMPLE_NETWORK = {
    "n": 2,
    "clusters": [2, 3],
    "params": [
        {"C": [[1.0, 0.0], [0.0, 1.0]], "A": [[1.95, -0.1], [-5.0, 3.0]],
         "B": [[-1.5, -0.1], [-0.3, -2.41]], "I": [0.0, 0.0]},
        {"C": [[1.0, 0.0], [0.0, 1.0]], "A": [[2.0, -0.11], [-5.1, 3.0]],
         "B": [[-1.5, -0.1], [-0.2, -2.45]], "I": [0.0, 0.0]},
    ],
    "G": [
        [-4.0, 2.0, 2.0, 0.5, -0.5],
        [2.0, -3.0, 1.0, 0.2, -0.2],
        [1.0, 1.0, -2.0, 0.3, -0.3],
        [0.5, 0.5, -1.0, -1.0, 1.0],
        [0.4, -0.4, 0.0, 1.0, -1.0],
    ],
    "activation": {"kind": "arctan"},
    "delay": {"form": "logistic", "amplitude": 1.7},
    "coupling": "error",
    "initial": {
        "nodes": [[10.0, -5.0], [10.0, -5.0], [8.0, -6.0], [8.0, -6.0], [8.0, -6.0]],
        "leaders": [[0.4, 0.6], [0.4, 0.6]],
    },
}

_IDENTITY = [[1.0, 0.0], [0.0, 1.0]]

PRESETS: dict[str, dict] = {
    "case1": {
        "name": "case1",
        "network": _EXAMPLE_NETWORK,
        "controller": {"kind": "none"},
        "integrator": {"h": 1e-3, "T": 5.0},
    },
    "case2": {
        "name": "case2",
        "network": _EXAMPLE_NETWORK,
        "controller": {"kind": "pinning_impulsive", "d_k": -0.8, "delta": 0.03, "rho": [1, 3]},
        "integrator": {"h": 1e-3, "T": 5.0},
        "criteria": {"theorem1": {"Q": _IDENTITY, "E1": _IDENTITY, "E2": _IDENTITY, "alpha": 0.2,
                                  "beta": 0.5, "lam": 0.1, "gamma": 2.0}},
    },
    "case3": {
        "name": "case3",
        "network": _EXAMPLE_NETWORK,
        "controller": {"kind": "hybrid", "k": 2.0, "k1": 1.4, "g1": 41.4, "mu_exp": 0.5,
                       "future_mode": "zero-future"},
        "integrator": {"h": 1e-3, "T": 5.0},
        "criteria": {"theorem2": {"alpha": 0.2, "beta": 2.0, "E1": _IDENTITY, "E2": _IDENTITY}},
    },
}


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    name: str
    network: NetworkSpec
    initial: InitialCondition
    controller: Controller
    integrator: IntegratorConfig
    theorem1: Theorem1Params | None = None
    theorem2: Theorem2Params | None = None
    tol: float = DEFAULT_TOL
    csv_path: str | None = None
    summary_path: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


class _Reader:
    """Typed access into a nested mapping that reports dotted key paths."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ParseError(path or "<root>", f"expected a mapping, got {type(data).__name__}")
        self.data = data
        self.path = path

    def _p(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def has(self, key: str) -> bool:
        return key in self.data

    def sub(self, key: str, required: bool = True) -> "_Reader | None":
        if key not in self.data:
            if required:
                raise ParseError(self._p(key), "missing key")
            return None
        return _Reader(self.data[key], self._p(key))

    def get(self, key: str, kind=float, default: Any = ..., choices=None):
        if key not in self.data:
            if default is ...:
                raise ParseError(self._p(key), "missing key")
            return default
        value = self.data[key]
        if value is None and default is None:
            return None
        try:
            if kind is float:
                if isinstance(value, bool):
                    raise TypeError
                value = float(value)
            elif kind is int:
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError
                value = int(value)
            elif kind is str:
                if not isinstance(value, str):
                    raise TypeError
            elif kind == "matrix":
                value = np.array(value, dtype=float)
                if value.ndim != 2:
                    raise TypeError
                value = value.tolist()
            elif kind == "vector":
                value = np.array(value, dtype=float)
                if value.ndim != 1:
                    raise TypeError
                value = value.tolist()
            elif kind == "floats":
                value = [float(x) for x in np.atleast_1d(np.array(value, dtype=float))]
            elif kind == "ints":
                value = [int(x) for x in value]
        except (TypeError, ValueError):
            raise ParseError(self._p(key), f"expected {getattr(kind, '__name__', kind)}, got {value!r}") from None
        if choices is not None and value not in choices:
            raise ParseError(self._p(key), f"expected one of {list(choices)}, got {value!r}")
        return value


def _parse_network(r: _Reader) -> tuple[dict, NetworkSpec, InitialCondition]:
    n = r.get("n", int)
    if r.has("clusters"):
        sizes = r.get("clusters", "ints")
        partition = ClusterPartition.from_sizes(sizes)
    else:
        partition = ClusterPartition(tuple(r.get("boundaries", "ints")))
    params_raw = r.data.get("params")
    if not isinstance(params_raw, list):
        raise ParseError(f"{r.path}.params", "missing key" if params_raw is None else "expected a list")
    params, params_norm = [], []
    for j, item in enumerate(params_raw):
        pr = _Reader(item, f"{r.path}.params[{j}]")
        entry = {"C": pr.get("C", "matrix"), "A": pr.get("A", "matrix"), "B": pr.get("B", "matrix"),
                 "I": pr.get("I", "vector", default=[0.0] * n)}
        params_norm.append(entry)
        try:
            params.append(ClusterParams(**entry))
        except ClusterSyncError as exc:
            raise ValidationError(f"{pr.path}: {exc}") from None
    G = r.get("G", "matrix")

    ar = r.sub("activation", required=False)
    act_norm: dict = {"kind": "arctan"}
    if ar is not None:
        act_norm = {"kind": ar.get("kind", str, default="arctan", choices=("arctan", "tanh", "linear"))}
        if act_norm["kind"] == "linear":
            act_norm["slope"] = ar.get("slope", float, default=1.0)
        if ar.has("lipschitz"):
            act_norm["lipschitz"] = ar.get("lipschitz", "floats")
    lip = act_norm.get("lipschitz")
    activation = ActivationSpec(kind=act_norm["kind"], slope=act_norm.get("slope", 1.0),
                                lipschitz=None if lip is None else tuple(lip))

    dr = r.sub("delay")
    form = dr.get("form", str, choices=("constant", "logistic", "tabulated"))
    try:
        if form == "constant":
            delay_norm = {"form": form, "value": dr.get("value", float)}
            delay = DelayEvaluator.constant(delay_norm["value"])
        elif form == "logistic":
            delay_norm = {"form": form, "amplitude": dr.get("amplitude", float)}
            delay = DelayEvaluator.logistic(delay_norm["amplitude"])
        else:
            delay_norm = {"form": form, "times": dr.get("times", "vector"), "values": dr.get("values", "vector")}
            delay = DelayEvaluator.tabulated(delay_norm["times"], delay_norm["values"])
    except ClusterSyncError as exc:
        raise ValidationError(f"{dr.path}: {exc}") from None

    coupling = r.get("coupling", str, default="error", choices=("error", "state"))
    ir = r.sub("initial")
    nodes = ir.get("nodes", "matrix")
    leaders = ir.get("leaders", "matrix")
    spec = NetworkSpec(n=n, partition=partition, params=tuple(params), G=G, activation=activation,
                       delay=delay, coupling=coupling)
    norm = {"n": n, "boundaries": list(partition.boundaries), "params": params_norm, "G": G,
            "activation": act_norm, "delay": delay_norm, "coupling": coupling,
            "initial": {"nodes": nodes, "leaders": leaders}}
    return norm, spec, InitialCondition(nodes, leaders)


def _parse_controller(r: _Reader | None) -> tuple[dict, Controller]:
    if r is None:
        return {"kind": "none"}, None
    kind = r.get("kind", str, choices=("none", "pinning_impulsive", "hybrid"))
    if kind == "none":
        return {"kind": "none"}, None
    if kind == "pinning_impulsive":
        d = r.get("d_k", "floats")
        norm: dict = {"kind": kind, "d_k": d[0] if len(d) == 1 and not isinstance(r.data["d_k"], list) else d}
        if r.has("times"):
            norm["times"] = r.get("times", "floats")
            schedule = ImpulseSchedule(explicit=tuple(norm["times"]))
        else:
            norm["delta"] = r.get("delta", float)
            schedule = ImpulseSchedule.arithmetic(norm["delta"])
        if r.has("nodes"):
            norm["nodes"] = [[int(i) for i in grp] for grp in r.data["nodes"]]
            ctrl = PinningImpulsiveConfig(d_k=norm["d_k"], schedule=schedule, nodes=norm["nodes"])
        else:
            norm["rho"] = r.get("rho", "ints")
            ctrl = PinningImpulsiveConfig(d_k=norm["d_k"], schedule=schedule, rho=norm["rho"])
        return norm, ctrl
    norm = {
        "kind": kind,
        "k": r.get("k", float),
        "k1": r.get("k1", float),
        "g1": r.get("g1", float),
        "mu_exp": r.get("mu_exp", float, default=0.5),
        "psi_epsilon": r.get("psi_epsilon", float, default=1e-10),
        "future_mode": r.get("future_mode", str, default="zero-future", choices=("zero-future", "iterative")),
        "passes": r.get("passes", int, default=3),
        "psi_treatment": r.get("psi_treatment", str, default="split", choices=("split", "explicit")),
    }
    if r.has("chi"):
        norm["chi"] = [[int(i) for i in grp] for grp in r.data["chi"]]
    try:
        ctrl = HybridConfig(k=norm["k"], k1=norm["k1"], g1=norm["g1"], mu_exp=norm["mu_exp"],
                            psi_epsilon=norm["psi_epsilon"], future_mode=norm["future_mode"],
                            passes=norm["passes"], chi=norm.get("chi"), psi_treatment=norm["psi_treatment"])
    except ValueError as exc:
        raise ValidationError(f"{r.path}: {exc}") from None
    return norm, ctrl


def _parse_criteria(r: _Reader | None, controller_norm: dict) -> tuple[dict, Theorem1Params | None,
                                                                      Theorem2Params | None]:
    if r is None:
        return {}, None, None
    norm: dict = {}
    t1 = t2 = None
    sr = r.sub("theorem1", required=False)
    if sr is not None:
        d = {"Q": sr.get("Q", "matrix"), "E1": sr.get("E1", "matrix"), "E2": sr.get("E2", "matrix"),
             "alpha": sr.get("alpha", float, default=1.0), "beta": sr.get("beta", float, default=1.0),
             "lam": sr.get("lam", float, default=0.1), "gamma": sr.get("gamma", float, default=1.0)}
        for opt in ("q", "mu", "upsilon", "epsilon", "sigma_rate"):
            if sr.has(opt):
                d[opt] = sr.get(opt, float)
        norm["theorem1"] = d
        try:
            t1 = Theorem1Params(**d)
        except ValueError as exc:
            raise ValidationError(f"{sr.path}: {exc}") from None
    sr = r.sub("theorem2", required=False)
    if sr is not None:
        d = {"alpha": sr.get("alpha", float), "beta": sr.get("beta", float),
             "E1": sr.get("E1", "matrix"), "E2": sr.get("E2", "matrix")}
        for key, default in (("k1", 1.4), ("g1", 41.4), ("k", 2.0), ("mu_exp", 0.5)):
            d[key] = sr.get(key, float, default=controller_norm.get(key, default))
        norm["theorem2"] = d
        try:
            t2 = Theorem2Params(**d)
        except ValueError as exc:
            raise ValidationError(f"{sr.path}: {exc}") from None
    return norm, t1, t2


def parse_config(data: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a plain mapping."""
    root = _Reader(data, "")
    name = root.get("name", str, default="experiment")
    net_norm, spec, initial = _parse_network(root.sub("network"))
    ctrl_norm, controller = _parse_controller(root.sub("controller", required=False))
    ir = root.sub("integrator", required=False)
    h = ir.get("h", float, default=1e-3) if ir else 1e-3
    T = ir.get("T", float, default=5.0) if ir else 5.0
    try:
        integrator = IntegratorConfig(h=h, T=T)
        integrator.n_steps
    except ValueError as exc:
        raise ValidationError(f"integrator: {exc}") from None
    crit_norm, t1, t2 = _parse_criteria(root.sub("criteria", required=False), ctrl_norm)
    tol = root.get("tol", float, default=DEFAULT_TOL)
    out = root.sub("output", required=False)
    csv_path = out.get("csv", str, default=None) if out else None
    summary_path = out.get("summary", str, default=None) if out else None
    raw = {"name": name, "network": net_norm, "controller": ctrl_norm, "integrator": {"h": h, "T": T},
           "criteria": crit_norm, "tol": tol, "output": {"csv": csv_path, "summary": summary_path}}
    return ExperimentConfig(name=name, network=spec, initial=initial, controller=controller,
                            integrator=integrator, theorem1=t1, theorem2=t2, tol=tol, csv_path=csv_path,
                            summary_path=summary_path, raw=raw)


def load_config(path: str | Path) -> ExperimentConfig:
    """Load a YAML/JSON experiment file, or one of the named presets."""
    if str(path) in PRESETS and not Path(path).exists():
        return parse_config(copy.deepcopy(PRESETS[str(path)]))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(str(path), f"cannot read config: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(str(path), f"invalid YAML/JSON: {exc}") from None
    return parse_config(data)


def write_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config.raw, sort_keys=True))


def with_overrides(config: ExperimentConfig, *, h: float | None = None, T: float | None = None,
                   tol: float | None = None) -> ExperimentConfig:
    raw = copy.deepcopy(config.raw)
    if h is not None:
        raw["integrator"]["h"] = h
    if T is not None:
        raw["integrator"]["T"] = T
    if tol is not None:
        raw["tol"] = tol
    net = raw["network"]
    net["clusters"] = np.diff(net.pop("boundaries")).tolist()
    return parse_config(raw)


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def detect_settling(trajectory: Trajectory, tol: float = DEFAULT_TOL) -> float | None:
    """First recorded time after which every record has ``max_i ||e_i|| < tol``."""
    worst = trajectory.max_error_norm
    if worst.size == 0:
        return None
    bad = np.flatnonzero(~(worst < tol))
    if bad.size == 0:
        return float(trajectory.times[0])
    t_bad = trajectory.times[bad[-1]]
    later = np.flatnonzero(trajectory.times > t_bad)
    if later.size == 0:
        return None
    return float(trajectory.times[later[0]])


def export_csv(trajectory: Trajectory, path: str | Path) -> None:
    """Write ``t, e_norm_1..e_norm_N, V, limit``; impulse instants get a ``-`` and a ``+`` row."""
    N = trajectory.error_norms.shape[1] if trajectory.error_norms.ndim == 2 else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *[f"e_norm_{i}" for i in range(1, N + 1)], "V", "limit"])
        for r in range(len(trajectory)):
            w.writerow([_num(trajectory.times[r]), *[_num(x) for x in trajectory.error_norms[r]],
                        _num(trajectory.V[r]), trajectory.limits[r]])


def _num(x: float) -> str:
    return f"{float(x):.16e}"


@dataclass
class RunSummary:
    name: str
    final_max_error: float
    final_cluster_errors: list[float]
    settling_time: float | None
    tol: float
    settling_estimate: float | None
    min_leader_separation: float | None
    criteria: list[dict]
    criteria_passed: bool | None
    n_records: int
    n_impulses: int
    wall_clock: float
    config_digest: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def min_leader_separation(trajectory: Trajectory) -> float | None:
    S = trajectory.leaders
    M = S.shape[1]
    if M < 2:
        return None
    best = np.inf
    for p in range(M):
        for q in range(p + 1, M):
            best = min(best, float(np.linalg.norm(S[:, p] - S[:, q], axis=1).min()))
    return best


def run_criteria(config: ExperimentConfig, network=None) -> list[CriteriaReport]:
    network = network or validate_network(config.network)
    reports = []
    if config.theorem1 is not None:
        if not isinstance(config.controller, PinningImpulsiveConfig):
            raise ValidationError("criteria.theorem1 needs a pinning_impulsive controller")
        reports.append(check_theorem1(network, config.theorem1, config.controller, config.integrator.T))
    if config.theorem2 is not None:
        reports.append(check_theorem2(network, config.theorem2))
    return reports


def run_case(config: ExperimentConfig) -> tuple[Trajectory, RunSummary]:
    """Validate, simulate, measure and (when parameters are given) check criteria."""
    start = time.perf_counter()
    network = validate_network(config.network)
    Q = config.theorem1.Q if config.theorem1 is not None else None
    traj = integrate(network, config.controller, config.integrator, config.initial, Q=Q)
    reports = run_criteria(config, network)
    labels = traj.labels
    final = traj.error_norms[-1]
    cluster_final = [float(final[labels == p].max()) for p in range(network.M)]
    summary = RunSummary(
        name=config.name,
        final_max_error=float(final.max()),
        final_cluster_errors=cluster_final,
        settling_time=detect_settling(traj, config.tol),
        tol=config.tol,
        settling_estimate=traj.meta.get("settling_estimate"),
        min_leader_separation=min_leader_separation(traj),
        criteria=[r.to_dict() for r in reports],
        criteria_passed=None if not reports else all(r.passed for r in reports),
        n_records=len(traj),
        n_impulses=len(traj.impulses),
        wall_clock=time.perf_counter() - start,
        config_digest=config.digest,
    )
    return traj, summary


def write_summary(summary: RunSummary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
