"""Merit-function gradients.

Routes
------
``adjoint``
    forward state + backward costate (pure) or backward observable (density).
``response``
    convolution of dG/du-independent basis functions with the retarded
    response kernel chi_{A,V}(t, tau) = -i Tr{rho0 [A_H(t), V_H(tau)]}.
``fd``
    central finite differences of the merit function.

Quadrature
----------
The propagator sees the control at step midpoints, so on step j the field
derivative is the constant ``B[k, j] = d eps(t_j + dt/2) / d u_k``.  Every
analytic route integrates ``B[k, j] * F(t)`` over each step with the
trapezoid rule on that step's end nodes::

    dG/du_k = sum_j dt * B[k, j] * (F_left(t_j) + F_right(t_{j+1})) / 2

For final-time targets ``F_left == F_right`` is the kernel chi(tf, t).  For
time-dependent targets the two differ by the equal-time term: a step only
influences observations made after it, so the left node sums the source over
``t > t_j`` and the right node over ``t >= t_{j+1}``.  This is the trapezoid
approximation of the derivative of each step exponential, so the analytic
routes track finite differences of the discrete merit to O(dt^2) with a small
constant, and agree with one another to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import GridError
from .linalg import as_hermitian, dagger
from .model import ControlKind, ControlParameterization, ControlledSystem, Target, TargetKind, merit
from .propagation import (
    TimeGrid,
    build_step_propagators,
    propagate_costate_backward,
    propagate_costate_backward_inhomogeneous,
    propagate_forward,
    propagate_observable_backward,
    propagate_observable_backward_inhomogeneous,
)


class Route(str, Enum):
    ADJOINT = "adjoint"
    RESPONSE = "response"
    CONTOUR = "contour"
    FINITE_DIFFERENCE = "fd"


@dataclass(frozen=True, eq=False)
class GradientResult:
    values: np.ndarray
    route: Route
    merit_value: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise FloatingPointError(f"{self.route} gradient has non-finite entries")
        object.__setattr__(self, "values", v)


class KernelKind(str, Enum):
    RETARDED = "retarded"
    CONTOUR = "contour"


@dataclass(frozen=True, eq=False)
class ResponseKernel:
    """Sampled response kernel.

    ``values`` is ``chi(tf, tau_j)`` per node for final-time kernels, or the
    lower-triangular matrix ``chi(t_i, tau_j)`` (zero for ``tau_j > t_i``) for
    two-time kernels.
    """

    grid: TimeGrid
    kind: KernelKind
    values: np.ndarray

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag_defect(self) -> float:
        return float(np.max(np.abs(self.values.imag)))


def step_basis(ctrl: ControlParameterization, grid: TimeGrid) -> np.ndarray:
    """``B[k, j]``: field derivative seen by step j (sampled at its midpoint)."""
    return ctrl.basis(grid.midpoints)


def node_weights(ctrl: ControlParameterization, grid: TimeGrid) -> np.ndarray:
    """``W[k, m]`` with ``dG/du_k = W @ F`` whenever the integrand F is single-valued."""
    b = 0.5 * grid.dt * step_basis(ctrl, grid)
    w = np.zeros((ctrl.n_params, grid.n_nodes))
    w[:, :-1] += b
    w[:, 1:] += b
    return w


def _integrate(ctrl, grid, left, right) -> np.ndarray:
    b = step_basis(ctrl, grid)
    return 0.5 * grid.dt * (b @ left[:-1] + b @ right[1:])


def penalty_gradient(ctrl: ControlParameterization, grid: TimeGrid, alpha: float) -> np.ndarray:
    """Exact gradient of ``-alpha * trapz(eps^2)`` on the grid nodes."""
    if alpha == 0:
        return np.zeros(ctrl.n_params)
    basis = ctrl.basis(grid.nodes)
    eps = ctrl.params @ basis
    return -2.0 * alpha * (basis @ (grid.trapezoid_weights() * eps))


def _add_penalty(values, ctrl, grid, target):
    if target.kind is TargetKind.COMPOSITE:
        return values + penalty_gradient(ctrl, grid, target.penalty_alpha)
    return values


def _pure_integrand(chi: np.ndarray, v: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """2 Im <chi_j|V|psi_j> per node."""
    return 2.0 * np.einsum("ji,ik,jk->j", chi.conj(), v, psi).imag


def _density_integrand(rho: np.ndarray, lam: np.ndarray, v: np.ndarray) -> np.ndarray:
    """-i Tr{rho_j [Lambda_j, V]} per node (real for Hermitian inputs)."""
    t1 = np.einsum("jab,jbc,ca->j", rho, lam, v)
    t2 = np.einsum("jab,bc,jca->j", rho, v, lam)
    return (-1j * (t1 - t2)).real


def adjoint_integrands(sys, ctrl, grid, target, cache=None, forward=None):
    """Left/right node integrands of the adjoint route plus the forward trajectory."""
    target.check_grid(grid)
    if cache is None:
        cache = build_step_propagators(sys, ctrl, grid)
    if forward is None:
        forward = propagate_forward(sys, ctrl, grid, cache)
    a = target.observable.matrix
    v = sys.coupling.matrix
    states = forward.states
    if not target.time_dependent_objective:
        if forward.pure:
            chi = propagate_costate_backward(sys, ctrl, grid, a @ states[-1], cache).states
            f = _pure_integrand(chi, v, states)
        else:
            lam = propagate_observable_backward(sys, ctrl, grid, target.observable, cache).states
            f = _density_integrand(states, lam, v)
        return f, f, forward

    g = target.weights
    w = grid.trapezoid_weights()
    half = 0.5 * grid.dt
    if forward.pure:
        chi = propagate_costate_backward_inhomogeneous(sys, ctrl, grid, forward, a, g, cache).states
        a_psi = states @ a.T
        excl = chi - half * g[:, None] * a_psi
        excl[-1] = 0.0
        incl = excl + (w * g)[:, None] * a_psi
        return _pure_integrand(excl, v, states), _pure_integrand(incl, v, states), forward
    lam = propagate_observable_backward_inhomogeneous(sys, ctrl, grid, a, g, cache).states
    excl = lam - half * g[:, None, None] * a[None]
    excl[-1] = 0.0
    incl = excl + (w * g)[:, None, None] * a[None]
    return _density_integrand(states, excl, v), _density_integrand(states, incl, v), forward


def gradient_adjoint(sys: ControlledSystem, ctrl: ControlParameterization, grid: TimeGrid,
                     target: Target, cache=None) -> GradientResult:
    if cache is None:
        cache = build_step_propagators(sys, ctrl, grid)
    left, right, forward = adjoint_integrands(sys, ctrl, grid, target, cache)
    values = _add_penalty(_integrate(ctrl, grid, left, right), ctrl, grid, target)
    return GradientResult(values, Route.ADJOINT, merit(sys, ctrl, target, forward))


def heisenberg_stack(node_props: np.ndarray, op: np.ndarray) -> np.ndarray:
    """O_H(t_j) = U^+(t_j, t0) O U(t_j, t0) for every node."""
    return dagger(node_props) @ op[None] @ node_props


def response_kernel(sys: ControlledSystem, ctrl: ControlParameterization, grid: TimeGrid, a,
                    cache=None) -> ResponseKernel:
    """Retarded kernel chi(tf, tau_j) for every node tau_j (all tau_j <= tf)."""
    if cache is None:
        cache = build_step_propagators(sys, ctrl, grid)
    a = as_hermitian(a, "observable").matrix
    props = cache.node_propagators()
    rho0 = sys.initial_state.density_matrix()
    a_h = props[-1].conj().T @ a @ props[-1]
    v_h = heisenberg_stack(props, sys.coupling.matrix)
    comm = a_h[None] @ v_h - v_h @ a_h[None]
    values = -1j * np.einsum("ab,jba->j", rho0, comm)
    return ResponseKernel(grid, KernelKind.RETARDED, values)


def response_kernel_matrix(sys, ctrl, grid, a, cache=None) -> ResponseKernel:
    """Two-time retarded kernel chi(t_i, tau_j), zero above the diagonal (tau > t)."""
    if cache is None:
        cache = build_step_propagators(sys, ctrl, grid)
    a = as_hermitian(a, "observable").matrix
    props = cache.node_propagators()
    rho0 = sys.initial_state.density_matrix()
    a_h = heisenberg_stack(props, a)
    v_h = heisenberg_stack(props, sys.coupling.matrix)
    n = grid.n_nodes
    v_t = np.swapaxes(v_h, 1, 2).reshape(n, -1)
    # Tr{rho0 A_H(t_i) V_H(t_j)} and Tr{rho0 V_H(t_j) A_H(t_i)} as flattened inner products
    forward_order = (rho0[None] @ a_h).reshape(n, -1) @ v_t.T
    backward_order = (a_h @ rho0[None]).reshape(n, -1) @ v_t.T
    values = np.tril(-1j * (forward_order - backward_order))
    return ResponseKernel(grid, KernelKind.RETARDED, values)


def gradient_response(sys: ControlledSystem, ctrl: ControlParameterization, grid: TimeGrid,
                      target: Target, cache=None) -> GradientResult:
    target.check_grid(grid)
    if cache is None:
        cache = build_step_propagators(sys, ctrl, grid)
    if target.time_dependent_objective:
        kernel = response_kernel_matrix(sys, ctrl, grid, target.observable, cache).real
        gw = grid.trapezoid_weights() * target.weights
        right = gw @ kernel
        left = right - gw * np.diag(kernel)
        values = _integrate(ctrl, grid, left, right)
    else:
        kernel = response_kernel(sys, ctrl, grid, target.observable, cache).real
        values = node_weights(ctrl, grid) @ kernel
    values = _add_penalty(values, ctrl, grid, target)
    forward = propagate_forward(sys, ctrl, grid, cache)
    return GradientResult(values, Route.RESPONSE, merit(sys, ctrl, target, forward))


def functional_derivative(sys: ControlledSystem, ctrl: ControlParameterization, grid: TimeGrid,
                          target: Target) -> np.ndarray:
    """dG/d eps(t) sampled at the grid nodes for a raw-grid control.

    For final-time targets this is the retarded kernel chi(tf, t).  For
    time-dependent targets the equal-time term enters with weight 1/2.
    Composite targets add the fluence contribution ``-2 alpha eps(t)``.
    For final-time targets the parameter gradient is exactly
    ``node_weights(ctrl, grid) @ result``; for time-dependent targets that
    product agrees with it to O(dt^2).
    """
    if ctrl.kind is not ControlKind.RAW_GRID or ctrl.n_params != grid.n_nodes:
        raise GridError("functional derivative needs a raw_grid control with one sample per node")
    left, right, _ = adjoint_integrands(sys, ctrl, grid, target)
    out = 0.5 * (left + right)
    if target.kind is TargetKind.COMPOSITE:
        out = out - 2.0 * target.penalty_alpha * ctrl.values(grid.nodes)
    return out


def evaluate_merit(sys, ctrl, grid, target) -> float:
    return merit(sys, ctrl, target, propagate_forward(sys, ctrl, grid))


def gradient_finite_difference(sys: ControlledSystem, ctrl: ControlParameterization,
                               grid: TimeGrid, target: Target, h: float = 1e-5) -> GradientResult:
    """Central differences ``(G[u + h e_k] - G[u - h e_k]) / 2h``."""
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    u = ctrl.params
    values = np.empty(u.size)
    for k in range(u.size):
        e = np.zeros(u.size)
        e[k] = h
        up = evaluate_merit(sys, ctrl.with_params(u + e), grid, target)
        dn = evaluate_merit(sys, ctrl.with_params(u - e), grid, target)
        values[k] = (up - dn) / (2 * h)
    return GradientResult(values, Route.FINITE_DIFFERENCE, evaluate_merit(sys, ctrl, grid, target),
                          {"h": h})


def kubo_delta_a(sys_unperturbed: ControlledSystem, ctrl0: ControlParameterization,
                 grid: TimeGrid, a, f, t: float) -> float:
    """First-order change of <A>(t) under the extra term f(t) V.

    ``f`` is sampled on the nodes and, like the control, enters each step
    at its midpoint value (the average of the adjacent node samples).
    """
    f = np.asarray(f, dtype=np.float64).reshape(-1)
    if f.size != grid.n_nodes:
        raise GridError(f"f has {f.size} samples, grid has {grid.n_nodes} nodes")
    n = grid.node_index(t)
    if n == 0:
        return 0.0
    cache = build_step_propagators(sys_unperturbed, ctrl0, grid)
    am = as_hermitian(a, "observable").matrix
    props = cache.node_propagators()[: n + 1]
    rho0 = sys_unperturbed.initial_state.density_matrix()
    a_h = props[-1].conj().T @ am @ props[-1]
    v_h = heisenberg_stack(props, sys_unperturbed.coupling.matrix)
    chi = (-1j * np.einsum("ab,jba->j", rho0, a_h[None] @ v_h - v_h @ a_h[None])).real
    f_mid = 0.5 * (f[:n] + f[1 : n + 1])
    return float(0.5 * grid.dt * np.sum(f_mid * (chi[:-1] + chi[1:])))


def propagator_derivative(sys: ControlledSystem, ctrl: ControlParameterization, grid: TimeGrid,
                          k: int, h: float = 1e-5) -> tuple[np.ndarray, np.ndarray]:
    """dU(tf, t0)/du_k two ways: the integral identity and central differences.

    Returns ``(identity_integral, fd_matrix)``; the caller compares them.
    """
    if not 0 <= k < ctrl.n_params:
        raise IndexError(f"parameter index {k} out of range for {ctrl.n_params} parameters")
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    props = build_step_propagators(sys, ctrl, grid).node_propagators()
    full = props[-1]
    v = sys.coupling.matrix
    # U(tf, t_j) V U(t_j, t0) with U(tf, t_j) = U(tf, t0) U^+(t_j, t0)
    sandwiches = full[None] @ dagger(props) @ v[None] @ props
    b = step_basis(ctrl, grid)[k]
    integral = -1j * 0.5 * grid.dt * (
        np.einsum("j,jab->ab", b, sandwiches[:-1]) + np.einsum("j,jab->ab", b, sandwiches[1:])
    )
    e = np.zeros(ctrl.n_params)
    e[k] = h
    up = build_step_propagators(sys, ctrl.with_params(ctrl.params + e), grid).full_propagator()
    dn = build_step_propagators(sys, ctrl.with_params(ctrl.params - e), grid).full_propagator()
    return integral, (up - dn) / (2 * h)


def gradient(sys, ctrl, grid, target, route=Route.ADJOINT, fd_step: float = 1e-5) -> GradientResult:
    """Dispatch to the requested gradient route."""
    route = Route(route)
    if route is Route.ADJOINT:
        return gradient_adjoint(sys, ctrl, grid, target)
    if route is Route.RESPONSE:
        return gradient_response(sys, ctrl, grid, target)
    if route is Route.CONTOUR:
        from .contour import gradient_contour

        return gradient_contour(sys, ctrl, grid, target)
    return gradient_finite_difference(sys, ctrl, grid, target, fd_step)
