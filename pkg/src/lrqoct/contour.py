"""Closed-time (Keldysh) contour form of the gradient.

The contour runs t0 -> tf on the forward branch and back tf -> t0 on the
backward branch.  With the observable pinned at the turning point tf, contour
ordering puts it to the left of V on the forward branch and to the right on
the backward branch, so the contour-ordered correlator has two explicit
pieces::

    forward:  -i Tr{rho0 A_H(tf) V_H(tau)}
    backward: -i Tr{rho0 V_H(tau) A_H(tf)}

Integrating over the backward branch runs from tf down to t0, so its
trapezoid weights enter with a minus sign; forward minus backward is the
retarded commutator kernel.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, UnsupportedTargetError
from .gradients import GradientResult, Route, heisenberg_stack, node_weights, penalty_gradient
from .linalg import as_hermitian
from .model import TargetKind, merit
from .propagation import TimeGrid, build_step_propagators, propagate_forward


class Branch(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@functools.total_ordering
@dataclass(frozen=True)
class ContourTime:
    """A point on the two-branch contour over ``[t0, tf]``."""

    branch: Branch
    t: float
    t0: float = 0.0
    tf: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "branch", Branch(self.branch))
        if not self.t0 <= self.t <= self.tf:
            raise DomainError(f"contour time {self.t!r} outside [{self.t0}, {self.tf}]")

    def key(self) -> tuple[int, float]:
        if self.branch is Branch.FORWARD:
            return (0, self.t)
        return (1, -self.t)

    def __lt__(self, other: "ContourTime") -> bool:
        return contour_order(self, other) < 0


def contour_order(a: ContourTime, b: ContourTime) -> int:
    """-1 if ``a`` comes first on the contour, 1 if ``b`` does, 0 if equal."""
    if (a.t0, a.tf) != (b.t0, b.tf):
        raise DomainError("contour times live on different contours")
    ka, kb = a.key(), b.key()
    return (ka > kb) - (ka < kb)


@dataclass(frozen=True, eq=False)
class ContourKernel:
    """chi^C(tf, tau) sampled at every node on both branches.

    ``forward[j]`` and ``backward[j]`` both refer to real time ``grid.nodes[j]``.
    """

    grid: TimeGrid
    forward: np.ndarray
    backward: np.ndarray

    @property
    def values(self) -> np.ndarray:
        """Both branches in contour order (forward ascending, then backward descending)."""
        return np.concatenate([self.forward, self.backward[::-1]])

    def branch_difference(self) -> np.ndarray:
        return self.forward - self.backward


def contour_kernel(sys, ctrl, grid, a, cache=None) -> ContourKernel:
    if cache is None:
        cache = build_step_propagators(sys, ctrl, grid)
    a = as_hermitian(a, "observable").matrix
    props = cache.node_propagators()
    rho0 = sys.initial_state.density_matrix()
    a_h = props[-1].conj().T @ a @ props[-1]
    v_h = heisenberg_stack(props, sys.coupling.matrix)
    fwd = -1j * np.einsum("ab,jba->j", rho0 @ a_h, v_h)
    bwd = -1j * np.einsum("ab,jba->j", a_h @ rho0, v_h)
    return ContourKernel(grid, fwd, bwd)


def gradient_contour(sys, ctrl, grid, target, cache=None) -> GradientResult:
    """Contour integral of dε/du against chi^C, for final-time objectives."""
    if target.time_dependent_objective:
        raise UnsupportedTargetError("the contour route is defined for final-time targets only")
    if cache is None:
        cache = build_step_propagators(sys, ctrl, grid)
    kernel = contour_kernel(sys, ctrl, grid, target.observable, cache)
    w = node_weights(ctrl, grid)
    forward_branch = w @ kernel.forward
    backward_branch = -(w @ kernel.backward)
    total = forward_branch + backward_branch
    # the branches' imaginary parts cancel for Hermitian inputs; keep the leftover for checks
    residue = float(np.max(np.abs(total.imag)))
    values = total.real
    if target.kind is TargetKind.COMPOSITE:
        values = values + penalty_gradient(ctrl, grid, target.penalty_alpha)
    forward = propagate_forward(sys, ctrl, grid, cache)
    return GradientResult(values, Route.CONTOUR, merit(sys, ctrl, target, forward),
                          {"imag_residue": residue})
