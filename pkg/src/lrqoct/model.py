"""Controlled system H(t) = H_static + eps[u](t) V, control pulses, and merit functions."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import DimensionError, DomainError, GridError
from .linalg import Operator, QuantumState, as_hermitian


@dataclass(frozen=True, eq=False)
class ControlledSystem:
    h_static: Operator
    coupling: Operator
    initial_state: QuantumState
    t0: float = 0.0
    tf: float = 1.0

    def __post_init__(self):
        h = as_hermitian(self.h_static, "h_static")
        v = as_hermitian(self.coupling, "coupling")
        object.__setattr__(self, "h_static", h)
        object.__setattr__(self, "coupling", v)
        if not (h.dim == v.dim == self.initial_state.dim):
            raise DimensionError(
                f"dimension mismatch: h_static {h.dim}, coupling {v.dim}, "
                f"initial state {self.initial_state.dim}"
            )
        if not self.tf > self.t0:
            raise DomainError(f"need tf > t0, got t0={self.t0}, tf={self.tf}")

    @property
    def dim(self) -> int:
        return self.h_static.dim


class ControlKind(str, Enum):
    PIECEWISE_CONSTANT = "piecewise_constant"
    SINE_BASIS = "sine_basis"
    RAW_GRID = "raw_grid"


@dataclass(frozen=True, eq=False)
class ControlParameterization:
    """Linear map u -> eps[u](t) on [t0, tf].

    * ``piecewise_constant``: M equal bins, right-open except the last.
    * ``sine_basis``: ``sum_k u_k sin(k pi (t - t0) / (tf - t0))``, k = 1..M.
    * ``raw_grid``: M equally spaced samples joined by linear interpolation.
    """

    kind: ControlKind
    params: np.ndarray
    t0: float = 0.0
    tf: float = 1.0

    def __post_init__(self):
        kind = ControlKind(self.kind)
        u = np.array(self.params, dtype=np.float64).reshape(-1)
        if u.size < 1:
            raise ValueError("control needs at least one parameter")
        if kind is ControlKind.RAW_GRID and u.size < 2:
            raise ValueError("raw_grid control needs at least two samples")
        if not np.all(np.isfinite(u)):
            raise ValueError("control parameters must be finite")
        if not self.tf > self.t0:
            raise DomainError(f"need tf > t0, got t0={self.t0}, tf={self.tf}")
        u.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", u)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "tf", float(self.tf))

    @classmethod
    def piecewise_constant(cls, params, t0=0.0, tf=1.0):
        return cls(ControlKind.PIECEWISE_CONSTANT, params, t0, tf)

    @classmethod
    def sine_basis(cls, params, t0=0.0, tf=1.0):
        return cls(ControlKind.SINE_BASIS, params, t0, tf)

    @classmethod
    def raw_grid(cls, params, t0=0.0, tf=1.0):
        return cls(ControlKind.RAW_GRID, params, t0, tf)

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def duration(self) -> float:
        return self.tf - self.t0

    def with_params(self, params) -> "ControlParameterization":
        return replace(self, params=params)

    def basis(self, ts) -> np.ndarray:
        """Matrix ``B[k, j] = d eps / d u_k (ts[j])``; independent of u."""
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        slack = 1e-12 * max(1.0, abs(self.t0), abs(self.tf))
        if np.any(ts < self.t0 - slack) or np.any(ts > self.tf + slack):
            bad = ts[(ts < self.t0 - slack) | (ts > self.tf + slack)][0]
            raise DomainError(f"t={bad!r} outside control interval [{self.t0}, {self.tf}]")
        m = self.n_params
        x = (ts - self.t0) / self.duration
        if self.kind is ControlKind.PIECEWISE_CONSTANT:
            idx = np.clip(np.floor(x * m).astype(int), 0, m - 1)
            out = np.zeros((m, ts.size))
            out[idx, np.arange(ts.size)] = 1.0
            return out
        if self.kind is ControlKind.SINE_BASIS:
            k = np.arange(1, m + 1)[:, None]
            out = np.sin(k * np.pi * x[None, :])
            # sin(k pi) is not exactly zero in floating point; pin the endpoints
            out[:, (x <= 0.0) | (x >= 1.0)] = 0.0
            return out
        pos = x * (m - 1)
        return np.maximum(0.0, 1.0 - np.abs(pos[None, :] - np.arange(m)[:, None]))

    def values(self, ts) -> np.ndarray:
        return self.params @ self.basis(ts)


def epsilon(ctrl: ControlParameterization, t: float) -> float:
    return float(ctrl.values([t])[0])


def depsilon_du(ctrl: ControlParameterization, k: int, t: float) -> float:
    if not 0 <= k < ctrl.n_params:
        raise IndexError(f"parameter index {k} out of range for {ctrl.n_params} parameters")
    return float(ctrl.basis([t])[k, 0])


def hamiltonian_at(sys: ControlledSystem, ctrl: ControlParameterization, t: float) -> Operator:
    eps = epsilon(ctrl, t)
    if eps == 0.0:
        return sys.h_static
    return Operator(sys.h_static.matrix + eps * sys.coupling.matrix, hermitian=True)


class TargetKind(str, Enum):
    FINAL_TIME = "final_time"
    TIME_DEPENDENT = "time_dependent"
    COMPOSITE = "composite"


@dataclass(frozen=True, eq=False)
class Target:
    """Merit function definition.

    ``final_time``: <A>(tf).  ``time_dependent``: trapezoid of g(t) <A>(t) over
    the grid, with ``weights`` holding g at the grid nodes.  ``composite``: the
    final-time objective (or the time-dependent one when ``weights`` is given)
    minus ``penalty_alpha * int eps(t)^2 dt``.
    """

    kind: TargetKind
    observable: Operator
    weights: np.ndarray | None = None
    penalty_alpha: float = 0.0

    def __post_init__(self):
        kind = TargetKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "observable", as_hermitian(self.observable, "observable"))
        if kind is TargetKind.TIME_DEPENDENT and self.weights is None:
            raise ValueError("time_dependent target needs weights g(t)")
        if kind is TargetKind.FINAL_TIME and self.weights is not None:
            raise ValueError("final_time target takes no weights")
        if self.weights is not None:
            g = np.array(self.weights, dtype=np.float64).reshape(-1)
            if not np.all(np.isfinite(g)):
                raise ValueError("weights must be finite")
            g.setflags(write=False)
            object.__setattr__(self, "weights", g)
        if self.penalty_alpha < 0:
            raise ValueError("penalty_alpha must be >= 0")
        if kind is not TargetKind.COMPOSITE and self.penalty_alpha != 0:
            raise ValueError("penalty_alpha is only used by composite targets")

    @classmethod
    def final_time(cls, observable):
        return cls(TargetKind.FINAL_TIME, observable)

    @classmethod
    def time_dependent(cls, observable, weights):
        return cls(TargetKind.TIME_DEPENDENT, observable, weights)

    @classmethod
    def composite(cls, observable, penalty_alpha, weights=None):
        return cls(TargetKind.COMPOSITE, observable, weights, float(penalty_alpha))

    @property
    def time_dependent_objective(self) -> bool:
        return self.weights is not None

    def check_grid(self, grid) -> None:
        if self.weights is not None and self.weights.size != grid.n_nodes:
            raise GridError(
                f"weights have {self.weights.size} samples, grid has {grid.n_nodes} nodes"
            )


def _raw_expectations(states: np.ndarray, pure: bool, m: np.ndarray) -> np.ndarray:
    if pure:
        return np.einsum("ji,ik,jk->j", states.conj(), m, states).real
    return np.einsum("jik,ki->j", states, m).real


def observable_series(trajectory, a) -> np.ndarray:
    """Real expectation value of ``a`` at each node of a state trajectory.

    Values are divided by the state norm (pure) or trace (density), computed
    along the same arithmetic path, so round-off drift in the normalization
    does not leak into the merit; ``a = I`` gives exactly 1.
    """
    m = a.matrix if isinstance(a, Operator) else np.asarray(a)
    s, pure = trajectory.states, trajectory.pure
    return _raw_expectations(s, pure, m) / _raw_expectations(s, pure, np.eye(m.shape[0]))


def fluence(ctrl: ControlParameterization, grid) -> float:
    eps = ctrl.values(grid.nodes)
    return float(grid.trapezoid_weights() @ eps**2)


def merit(sys: ControlledSystem, ctrl: ControlParameterization, target: Target, trajectory) -> float:
    grid = trajectory.grid
    if trajectory.states.shape[0] != grid.n_nodes:
        raise GridError("trajectory does not cover every grid node")
    if abs(grid.t0 - sys.t0) > 1e-12 or abs(grid.tf - sys.tf) > 1e-12:
        raise GridError("trajectory grid does not span the system interval")
    target.check_grid(grid)
    if target.time_dependent_objective:
        values = observable_series(trajectory, target.observable)
        j1 = float(grid.trapezoid_weights() @ (target.weights * values))
    else:
        last = trajectory.states[-1:]
        a = target.observable.matrix
        j1 = float(_raw_expectations(last, trajectory.pure, a)[0]
                   / _raw_expectations(last, trajectory.pure, np.eye(a.shape[0]))[0])
    if target.kind is TargetKind.COMPOSITE:
        j1 -= target.penalty_alpha * fluence(ctrl, grid)
    return j1
