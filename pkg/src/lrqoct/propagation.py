"""Time grids and the forward / backward propagation problems.

One stepping scheme is used everywhere, the exponential midpoint rule

    U_j = exp(-i H(t_j + dt/2) dt),

and the step unitaries are computed once per control (``StepPropagatorCache``)
and reused by every propagation.  Sharing the cache is what makes the gradient
routes in :mod:`lrqoct.gradients` agree to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, DomainError, GridError
from .linalg import QuantumState, as_hermitian, as_matrix, dagger, expm_hermitian_stack
from .model import ControlledSystem, ControlParameterization


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    tf: float
    n_steps: int

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise GridError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not self.tf > self.t0:
            raise DomainError(f"degenerate time interval t0={self.t0}, tf={self.tf}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "tf", float(self.tf))

    @classmethod
    def for_system(cls, sys: ControlledSystem, n_steps: int) -> "TimeGrid":
        return cls(sys.t0, sys.tf, n_steps)

    @property
    def dt(self) -> float:
        return (self.tf - self.t0) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.t0, self.tf, self.n_nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return self.t0 + (np.arange(self.n_steps) + 0.5) * self.dt

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_nodes, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    def node_index(self, t: float) -> int:
        """Index of the node equal to ``t`` (to rounding); GridError otherwise."""
        j = int(round((t - self.t0) / self.dt))
        if not 0 <= j <= self.n_steps or abs(self.nodes[j] - t) > 1e-9 * self.dt:
            raise GridError(f"t={t!r} is not a grid node")
        return j


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class TrajectoryKind(str, Enum):
    PURE = "pure"
    DENSITY = "density"
    OPERATOR = "operator"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Node-sampled solution: ``states[j]`` is the value at ``grid.nodes[j]``.

    States are stored as one stacked array: ``(n_nodes, N)`` for pure vectors,
    ``(n_nodes, N, N)`` for density matrices or Heisenberg-picture operators.
    """

    grid: TimeGrid
    states: np.ndarray
    direction: Direction
    kind: TrajectoryKind

    def __post_init__(self):
        if self.states.shape[0] != self.grid.n_nodes:
            raise GridError(
                f"{self.states.shape[0]} states for a grid of {self.grid.n_nodes} nodes"
            )
        self.states.setflags(write=False)

    @property
    def pure(self) -> bool:
        return self.kind is TrajectoryKind.PURE

    def __len__(self):
        return self.states.shape[0]

    def state_at(self, j: int) -> QuantumState:
        if self.kind is TrajectoryKind.OPERATOR:
            raise TypeError("operator trajectories hold observables, not states")
        if self.pure:
            return QuantumState.pure(self.states[j])
        return QuantumState.density(self.states[j])


@dataclass(frozen=True, eq=False)
class StepPropagatorCache:
    grid: TimeGrid
    unitaries: np.ndarray  # (n_steps, N, N)

    def full_propagator(self) -> np.ndarray:
        """U(tf, t0) = U_{n-1} ... U_1 U_0."""
        u = np.eye(self.unitaries.shape[1], dtype=np.complex128)
        for step in self.unitaries:
            u = step @ u
        return u

    def node_propagators(self) -> np.ndarray:
        """Stack of U(t_j, t0) for every node j."""
        n = self.unitaries.shape[1]
        out = np.empty((self.grid.n_nodes, n, n), dtype=np.complex128)
        out[0] = np.eye(n)
        for j, step in enumerate(self.unitaries):
            out[j + 1] = step @ out[j]
        return out


def _check_grid(sys: ControlledSystem, ctrl: ControlParameterization, grid: TimeGrid):
    tol = 1e-12 * max(1.0, abs(sys.t0), abs(sys.tf))
    if abs(grid.t0 - sys.t0) > tol or abs(grid.tf - sys.tf) > tol:
        raise GridError(f"grid [{grid.t0}, {grid.tf}] does not match system [{sys.t0}, {sys.tf}]")
    if abs(ctrl.t0 - sys.t0) > tol or abs(ctrl.tf - sys.tf) > tol:
        raise GridError(f"control [{ctrl.t0}, {ctrl.tf}] does not match system [{sys.t0}, {sys.tf}]")


def midpoint_hamiltonians(sys: ControlledSystem, ctrl: ControlParameterization, grid: TimeGrid):
    eps = ctrl.values(grid.midpoints)
    return sys.h_static.matrix[None] + eps[:, None, None] * sys.coupling.matrix[None]


def build_step_propagators(sys: ControlledSystem, ctrl: ControlParameterization,
                           grid: TimeGrid) -> StepPropagatorCache:
    _check_grid(sys, ctrl, grid)
    hs = midpoint_hamiltonians(sys, ctrl, grid)
    return StepPropagatorCache(grid, expm_hermitian_stack(hs, -1j * grid.dt))


def _cache(sys, ctrl, grid, cache):
    if cache is None:
        return build_step_propagators(sys, ctrl, grid)
    if cache.grid != grid:
        raise GridError("step propagator cache was built on a different grid")
    return cache


def propagate_forward(sys, ctrl, grid, cache=None) -> Trajectory:
    """Schrodinger (pure) or von Neumann (density) evolution from ``sys.initial_state``."""
    cache = _cache(sys, ctrl, grid, cache)
    psi0 = sys.initial_state
    us = cache.unitaries
    if psi0.is_pure:
        out = np.empty((grid.n_nodes, psi0.dim), dtype=np.complex128)
        out[0] = psi0.data
        for j, u in enumerate(us):
            out[j + 1] = u @ out[j]
        kind = TrajectoryKind.PURE
    else:
        out = np.empty((grid.n_nodes, psi0.dim, psi0.dim), dtype=np.complex128)
        out[0] = psi0.data
        for j, u in enumerate(us):
            out[j + 1] = u @ out[j] @ u.conj().T
        kind = TrajectoryKind.DENSITY
    return Trajectory(grid, out, Direction.FORWARD, kind)


def propagate_costate_backward(sys, ctrl, grid, terminal, cache=None) -> Trajectory:
    """Homogeneous backward Schrodinger problem ending in ``terminal`` at tf.

    ``terminal`` is a plain (generally unnormalized) vector, e.g. A|psi(tf)>.
    """
    cache = _cache(sys, ctrl, grid, cache)
    chi_f = np.asarray(terminal.data if isinstance(terminal, QuantumState) else terminal,
                       dtype=np.complex128)
    if chi_f.shape != (sys.dim,):
        raise DimensionError(f"terminal costate has shape {chi_f.shape}, expected ({sys.dim},)")
    out = np.empty((grid.n_nodes, sys.dim), dtype=np.complex128)
    out[-1] = chi_f
    for j in range(grid.n_steps - 1, -1, -1):
        out[j] = cache.unitaries[j].conj().T @ out[j + 1]
    return Trajectory(grid, out, Direction.BACKWARD, TrajectoryKind.PURE)


def _weights(g, grid: TimeGrid) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64).reshape(-1)
    if g.size != grid.n_nodes:
        raise GridError(f"weights have {g.size} samples, grid has {grid.n_nodes} nodes")
    return g


def propagate_costate_backward_inhomogeneous(sys, ctrl, grid, forward: Trajectory, a, g,
                                             cache=None) -> Trajectory:
    """Costate for a time-dependent target: zero at tf, driven by g(t) A psi(t).

    Each step is the trapezoid rule for the source integral,

        chi_j = U_j^+ (chi_{j+1} + dt/2 g_{j+1} A psi_{j+1}) + dt/2 g_j A psi_j,

    so chi_j equals the trapezoid quadrature of
    ``int_{t_j}^{tf} g(t) U^+(t, t_j) A psi(t) dt`` on the grid.
    """
    cache = _cache(sys, ctrl, grid, cache)
    if forward.grid != grid or not forward.pure:
        raise GridError("inhomogeneous costate needs a pure forward trajectory on the same grid")
    g = _weights(g, grid)
    src = 0.5 * grid.dt * g[:, None] * (forward.states @ as_matrix(a).T)
    out = np.empty_like(forward.states)
    out[-1] = 0.0
    for j in range(grid.n_steps - 1, -1, -1):
        out[j] = cache.unitaries[j].conj().T @ (out[j + 1] + src[j + 1]) + src[j]
    return Trajectory(grid, out, Direction.BACKWARD, TrajectoryKind.PURE)


def propagate_observable_backward(sys, ctrl, grid, a, cache=None) -> Trajectory:
    """Backward Heisenberg-type evolution A[u](t_j) = U_j^+ A[u](t_{j+1}) U_j, A[u](tf) = A."""
    cache = _cache(sys, ctrl, grid, cache)
    am = as_hermitian(a, "observable").matrix
    if am.shape[0] != sys.dim:
        raise DimensionError(f"observable of dim {am.shape[0]} for system of dim {sys.dim}")
    out = np.empty((grid.n_nodes, sys.dim, sys.dim), dtype=np.complex128)
    out[-1] = am
    for j in range(grid.n_steps - 1, -1, -1):
        u = cache.unitaries[j]
        out[j] = u.conj().T @ out[j + 1] @ u
    return Trajectory(grid, out, Direction.BACKWARD, TrajectoryKind.OPERATOR)


def propagate_observable_backward_inhomogeneous(sys, ctrl, grid, a, g, cache=None) -> Trajectory:
    """Operator analogue of the inhomogeneous costate, used for density-matrix
    time-dependent targets: trapezoid quadrature of
    ``int_{t_j}^{tf} g(t) U^+(t, t_j) A U(t, t_j) dt``.
    """
    cache = _cache(sys, ctrl, grid, cache)
    am = as_hermitian(a, "observable").matrix
    g = _weights(g, grid)
    half = 0.5 * grid.dt
    out = np.empty((grid.n_nodes, sys.dim, sys.dim), dtype=np.complex128)
    out[-1] = 0.0
    for j in range(grid.n_steps - 1, -1, -1):
        u = cache.unitaries[j]
        out[j] = dagger(u) @ (out[j + 1] + half * g[j + 1] * am) @ u + half * g[j] * am
    return Trajectory(grid, out, Direction.BACKWARD, TrajectoryKind.OPERATOR)
