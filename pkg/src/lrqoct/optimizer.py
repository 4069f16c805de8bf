"""Pulse optimization: gradient ascent with Armijo backtracking and L-BFGS."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .gradients import Route, evaluate_merit, gradient
from .model import ControlKind, ControlParameterization

MAX_BACKTRACKS = 40


class Status(str, Enum):
    GRADIENT_CONVERGED = "GradientConverged"
    MERIT_CONVERGED = "MeritConverged"
    MAX_ITERATIONS = "MaxIterations"
    LINE_SEARCH_FAILED = "LineSearchFailed"


@dataclass(frozen=True)
class OptimizationConfig:
    route: Route = Route.ADJOINT
    max_iterations: int = 200
    tol_gradient: float = 1e-8
    tol_merit: float = 1e-12
    initial_step: float = 1.0
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    lbfgs_memory: int = 8
    fd_step: float = 1e-5
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "route", Route(self.route))
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if not (self.tol_gradient > 0 and self.tol_merit > 0):
            raise ValueError("tolerances must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if self.lbfgs_memory < 0:
            raise ValueError("lbfgs_memory must be >= 0")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    merit: float
    gradient_inf_norm: float
    step_size: float
    params: np.ndarray


@dataclass
class OptimizationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    status: Status | None = None
    seed: int | None = None

    @property
    def merits(self) -> np.ndarray:
        return np.array([r.merit for r in self.records])

    @property
    def final_merit(self) -> float:
        return self.records[-1].merit


def random_initial_control(kind, n_params: int, t0: float, tf: float,
                           seed: int) -> ControlParameterization:
    """Seeded uniform noise in [-0.01, 0.01] for every parameter."""
    rng = np.random.default_rng(seed)
    return ControlParameterization(ControlKind(kind), rng.uniform(-0.01, 0.01, n_params), t0, tf)


def _two_loop(g: np.ndarray, s_hist, y_hist) -> np.ndarray:
    # y holds differences of the gradient of -G, so the result is an ascent direction
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    s, y = s_hist[-1], y_hist[-1]
    r = (s @ y) / (y @ y) * q
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ r)
        r += s * (a - b)
    return r


def maximize(sys, ctrl_initial: ControlParameterization, grid, target,
             cfg: OptimizationConfig = OptimizationConfig()):
    """Maximize the merit over the control parameters.

    Returns ``(optimized_control, trace)``.  Every accepted step satisfies the
    Armijo condition ``G(u + a d) >= G(u) + c a <grad, d>``.
    """

    def grad_at(c):
        return gradient(sys, c, grid, target, cfg.route, cfg.fd_step)

    trace = OptimizationTrace(seed=cfg.seed)
    ctrl = ctrl_initial
    res = grad_at(ctrl)
    merit_now, g = res.merit_value, res.values
    trace.records.append(IterationRecord(0, merit_now, float(np.max(np.abs(g))), 0.0, ctrl.params))
    if np.max(np.abs(g)) <= cfg.tol_gradient:
        trace.status = Status.GRADIENT_CONVERGED
        return ctrl, trace

    s_hist: deque = deque(maxlen=cfg.lbfgs_memory or None)
    y_hist: deque = deque(maxlen=cfg.lbfgs_memory or None)
    trace.status = Status.MAX_ITERATIONS
    for it in range(1, cfg.max_iterations + 1):
        quasi_newton = cfg.lbfgs_memory > 0 and len(s_hist) > 0
        d = _two_loop(g, s_hist, y_hist) if quasi_newton else g
        slope = float(g @ d)
        if not slope > 0:
            s_hist.clear()
            y_hist.clear()
            quasi_newton = False
            d, slope = g, float(g @ g)
        step = 1.0 if quasi_newton else cfg.initial_step
        for _ in range(MAX_BACKTRACKS):
            trial = ctrl.with_params(ctrl.params + step * d)
            merit_trial = evaluate_merit(sys, trial, grid, target)
            if merit_trial >= merit_now + cfg.armijo_c * step * slope:
                break
            step *= cfg.backtrack_factor
        else:
            trace.status = Status.LINE_SEARCH_FAILED
            break

        res = grad_at(trial)
        g_new = res.values
        s = trial.params - ctrl.params
        y = g - g_new
        if cfg.lbfgs_memory > 0:
            if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                s_hist.append(s)
                y_hist.append(y)
            else:
                s_hist.clear()
                y_hist.clear()
        improvement = merit_trial - merit_now
        ctrl, merit_now, g = trial, merit_trial, g_new
        g_inf = float(np.max(np.abs(g)))
        trace.records.append(IterationRecord(it, merit_now, g_inf, step, ctrl.params))
        if g_inf <= cfg.tol_gradient:
            trace.status = Status.GRADIENT_CONVERGED
            break
        if improvement < cfg.tol_merit:
            trace.status = Status.MERIT_CONVERGED
            break
    return ctrl, trace
