"""Fixed-step method-of-steps machinery for delay equations with jumps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import MisalignedImpulse, OutOfCoverage

_STAMP_TOL = 1e-9


class HistoryBuffer:
    """Interpolable record of past states on an ascending time grid.

    Values stored at a stamp are right limits.  When a jump is recorded at
    the latest stamp, its left limit is kept separately so that a query *at*
    the jump time returns the left limit (the state is left continuous) and
    interpolation on the following interval starts from the right limit.

    With ``track_integral=True`` a cumulative trapezoid of the stored signal
    is maintained, which makes window integrals O(log n).
    """

    def __init__(self, shape: Sequence[int] | int = (), capacity: int = 1024, track_integral: bool = False):
        self.shape = (shape,) if isinstance(shape, int) else tuple(shape)
        cap = max(int(capacity), 2)
        self._t = np.empty(cap)
        self._v = np.empty((cap, *self.shape))
        self._cum = np.empty((cap, *self.shape)) if track_integral else None
        self._n = 0
        self._left: dict[int, np.ndarray] = {}
        self.track_integral = track_integral

    @classmethod
    def from_initial(cls, initial, t0: float, span: float, h: float, capacity: int = 1024,
                     track_integral: bool = False) -> "HistoryBuffer":
        """Tabulate an initial function on stamps ``t0 - m h, ..., t0`` covering ``span``.

        ``initial`` is either a callable of time or a constant array.
        """
        m = max(int(math.ceil(span / h - _STAMP_TOL)), 1)
        if callable(initial):
            first = np.asarray(initial(t0), dtype=float)
            get = lambda s: np.asarray(initial(s), dtype=float)  # noqa: E731
        else:
            first = np.asarray(initial, dtype=float)
            get = lambda s: first  # noqa: E731
        buf = cls(first.shape, capacity=capacity + m + 1, track_integral=track_integral)
        for j in range(m, -1, -1):
            s = t0 - j * h
            buf.append(s, first if j == 0 else get(s))
        return buf

    def __len__(self) -> int:
        return self._n

    @property
    def times(self) -> np.ndarray:
        return self._t[: self._n]

    @property
    def values(self) -> np.ndarray:
        return self._v[: self._n]

    @property
    def coverage(self) -> tuple[float, float]:
        if self._n == 0:
            return (math.nan, math.nan)
        return float(self._t[0]), float(self._t[self._n - 1])

    @property
    def jump_records(self) -> list[tuple[float, np.ndarray, np.ndarray]]:
        return [(float(self._t[k]), left, self._v[k].copy()) for k, left in sorted(self._left.items())]

    @property
    def latest(self) -> np.ndarray:
        return self._v[self._n - 1]

    def _grow(self) -> None:
        cap = 2 * self._t.shape[0]
        self._t = np.resize(self._t, cap)
        self._v = np.resize(self._v, (cap, *self.shape))
        if self._cum is not None:
            self._cum = np.resize(self._cum, (cap, *self.shape))

    def append(self, t: float, value) -> None:
        n = self._n
        if n and not t > self._t[n - 1]:
            raise ValueError(f"stamps must increase: {t!r} after {self._t[n - 1]!r}")
        if n == self._t.shape[0]:
            self._grow()
        self._t[n] = t
        self._v[n] = value
        if self._cum is not None:
            if n == 0:
                self._cum[0] = 0.0
            else:
                self._cum[n] = self._cum[n - 1] + 0.5 * (t - self._t[n - 1]) * (self._v[n - 1] + self._v[n])
        self._n = n + 1

    def record_jump(self, right_value) -> None:
        """Replace the latest value by ``right_value``, keeping the old one as left limit."""
        k = self._n - 1
        left = self._v[k].copy()
        self._left[k] = left
        self._v[k] = right_value
        # cumulative integral up to t_k was built from the left limit and stays valid.

    def _locate(self, t: float) -> tuple[int, float]:
        """Index ``k`` and fraction in ``[0, 1)`` with ``t = t_k + frac (t_{k+1} - t_k)``."""
        n = self._n
        if n == 0:
            raise OutOfCoverage(t, math.nan, math.nan)
        ts = self._t
        lo, hi = ts[0], ts[n - 1]
        scale = _STAMP_TOL * max(1.0, abs(t))
        if t < lo - scale or t > hi + scale:
            raise OutOfCoverage(t, lo, hi)
        k = int(np.searchsorted(ts[:n], t, side="right")) - 1
        k = min(max(k, 0), n - 1)
        if abs(t - ts[k]) <= scale:
            return k, 0.0
        if k + 1 < n and abs(ts[k + 1] - t) <= scale:
            return k + 1, 0.0
        return k, (t - ts[k]) / (ts[k + 1] - ts[k])

    def query(self, t: float, right: bool = False) -> np.ndarray:
        """State at ``t``; at a jump stamp the left limit unless ``right`` is set."""
        k, frac = self._locate(t)
        if frac == 0.0:
            if not right and k in self._left:
                return self._left[k]
            return self._v[k]
        a = self._v[k]
        b = self._left.get(k + 1, self._v[k + 1])
        return a + frac * (b - a)

    def cumulative(self, t: float) -> np.ndarray:
        """Integral of the stored signal from the first stamp to ``t``."""
        if self._cum is None:
            raise RuntimeError("buffer was created without track_integral")
        k, frac = self._locate(t)
        if frac == 0.0:
            return self._cum[k]
        a = self._v[k]
        b = self._left.get(k + 1, self._v[k + 1])
        dt = t - self._t[k]
        mid = a + frac * (b - a)
        return self._cum[k] + 0.5 * dt * (a + mid)

    def integral(self, a: float, b: float) -> np.ndarray:
        return self.cumulative(b) - self.cumulative(a)


def sample_history(buffer: HistoryBuffer, t: float, right: bool = False) -> np.ndarray:
    """Linear interpolation of ``buffer`` at ``t`` (left limit at jump stamps)."""
    return buffer.query(t, right=right)


def running_integral(buffer: HistoryBuffer, t: float, delay: Callable[[float], float] | float) -> np.ndarray:
    """Integral of the buffered channel over the window ``[t - tau(t), t]``."""
    tau = delay(t) if callable(delay) else float(delay)
    return buffer.integral(t - tau, t)


def rk4_step(rhs: Callable, buffer: HistoryBuffer, t: float, y: np.ndarray, h: float,
             delay: Callable[[float], float] | float) -> np.ndarray:
    """One classical RK4 step of ``y' = rhs(t, y, y(t - tau(t)))``.

    Delayed arguments are read from ``buffer`` at every stage time, so the
    buffer must already cover ``t + h - tau(t + h)``.  Where ``tau`` is zero
    the stage state itself is used.
    """
    tau = delay if callable(delay) else (lambda s, c=float(delay): c)

    def lagged(s: float, stage: np.ndarray) -> np.ndarray:
        # A vanishing delay reads the stage value itself instead of the buffer.
        d = tau(s)
        return stage if d <= 0.0 else buffer.query(s - d)

    half = t + 0.5 * h
    full = t + h
    k1 = rhs(t, y, lagged(t, y))
    y2 = y + 0.5 * h * k1
    k2 = rhs(half, y2, lagged(half, y2))
    y3 = y + 0.5 * h * k2
    k3 = rhs(half, y3, lagged(half, y3))
    y4 = y + h * k3
    k4 = rhs(full, y4, lagged(full, y4))
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def apply_impulse_event(E: np.ndarray, pinned: Sequence[int], d_k: float) -> np.ndarray:
    """Scale the rows of the pinned (1-based) nodes by ``1 + d_k``."""
    out = np.array(E, dtype=float, copy=True)
    idx = [i - 1 for i in pinned]
    out[idx] *= 1.0 + d_k
    return out


@dataclass(frozen=True)
class ImpulseSchedule:
    """Impulse instants ``t_1 < t_2 < ...`` (arithmetic ``t_k = k * period`` or explicit)."""

    period: float | None = None
    explicit: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.period is None) == (self.explicit is None):
            raise ValueError("give exactly one of period or explicit")
        if self.period is not None and not self.period > 0:
            raise ValueError("impulse period must be positive")
        if self.explicit is not None:
            ts = tuple(float(x) for x in self.explicit)
            if not ts:
                raise ValueError("explicit schedule is empty")
            if ts[0] <= 0 or any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("explicit impulse times must be positive and strictly increasing")
            object.__setattr__(self, "explicit", ts)

    @classmethod
    def arithmetic(cls, period: float) -> "ImpulseSchedule":
        return cls(period=float(period))

    def times_until(self, T: float) -> np.ndarray:
        if self.period is not None:
            count = int(math.floor(T / self.period + _STAMP_TOL))
            return self.period * np.arange(1, count + 1)
        ts = np.asarray(self.explicit)
        return ts[ts <= T + _STAMP_TOL]

    def gaps(self, T: float | None = None) -> np.ndarray:
        """Gaps ``t_k - t_{k-1}`` with ``t_0 = 0``."""
        if self.period is not None:
            return np.array([self.period])
        ts = np.asarray(self.explicit if T is None else self.times_until(T))
        return np.diff(np.concatenate([[0.0], ts]))


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 1e-3
    T: float = 5.0
    require_alignment: bool = True

    def __post_init__(self):
        if not self.h > 0 or not self.T > 0:
            raise ValueError("step and horizon must be positive")

    @property
    def n_steps(self) -> int:
        r = self.T / self.h
        n = int(round(r))
        if abs(r - n) > _STAMP_TOL * max(1.0, r):
            raise ValueError(f"horizon {self.T} is not a multiple of the step {self.h}")
        return n

    def impulse_steps(self, schedule: ImpulseSchedule) -> dict[int, int]:
        """Map grid index -> impulse number ``k`` (1-based) for every ``t_k <= T``."""
        out: dict[int, int] = {}
        for k, tk in enumerate(schedule.times_until(self.T), start=1):
            r = tk / self.h
            idx = int(round(r))
            if abs(r - idx) > _STAMP_TOL * max(1.0, r):
                if self.require_alignment:
                    raise MisalignedImpulse(f"impulse t_{k}={tk!r} is not a multiple of h={self.h!r}")
                idx = int(math.floor(r))
            if idx >= 1:
                out[idx] = k
        return out


@dataclass(frozen=True)
class ImpulseEvent:
    time: float
    k: int
    d_k: float
    pinned: tuple[tuple[int, ...], ...]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded run.  Impulse instants appear twice: left limit (``"-"``) then right limit (``"+"``)."""

    times: np.ndarray
    limits: tuple[str, ...]
    states: np.ndarray
    leaders: np.ndarray
    errors: np.ndarray
    error_norms: np.ndarray
    V: np.ndarray
    delayed_integrals: np.ndarray | None = None
    impulses: tuple[ImpulseEvent, ...] = ()
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def max_error_norm(self) -> np.ndarray:
        if self.error_norms.size == 0:
            return np.zeros(len(self))
        return self.error_norms.max(axis=1)

    @property
    def squared_errors(self) -> np.ndarray:
        return self.error_norms ** 2

    def at(self, t: float, limit: str = "-") -> int:
        """Record index of the grid time ``t`` (left limit at impulse instants by default)."""
        hits = np.flatnonzero(np.abs(self.times - t) <= _STAMP_TOL * max(1.0, abs(t)))
        if hits.size == 0:
            raise KeyError(t)
        if hits.size > 1 and limit == "+":
            return int(hits[-1])
        return int(hits[0])
