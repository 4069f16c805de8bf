import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrqoct import (
    ControlledSystem,
    ControlKind,
    ControlParameterization,
    DimensionError,
    DomainError,
    GridError,
    HermiticityError,
    Operator,
    QuantumState,
    Target,
    TimeGrid,
    depsilon_du,
    epsilon,
    hamiltonian_at,
    merit,
)
from lrqoct.propagation import propagate_forward

from .cases import SX, SZ, random_hermitian, random_pure, rabi

kinds = st.sampled_from(list(ControlKind))
coeffs = st.lists(st.floats(-5, 5), min_size=2, max_size=8)


def _ctrl(kind, params, t0=0.0, tf=2.0):
    return ControlParameterization(kind, params, t0, tf)


def test_piecewise_constant_bins():
    ctrl = ControlParameterization.piecewise_constant([0.5, -0.2], 0.0, 2.0)
    assert epsilon(ctrl, 1.5) == -0.2
    assert epsilon(ctrl, 0.0) == 0.5
    assert epsilon(ctrl, 1.0) == -0.2  # right-open bins
    assert epsilon(ctrl, 2.0) == -0.2  # last bin closed


def test_sine_basis_values():
    ctrl = ControlParameterization.sine_basis([1.0])
    assert epsilon(ctrl, 0.5) == pytest.approx(1.0, abs=1e-15)
    many = ControlParameterization.sine_basis([0.3, -1.0, 2.0], 1.0, 4.0)
    assert epsilon(many, 1.0) == 0.0
    assert abs(epsilon(many, 4.0)) <= 1e-15


def test_raw_grid_interpolates():
    ctrl = ControlParameterization.raw_grid([0.0, 1.0, 3.0], 0.0, 2.0)
    assert epsilon(ctrl, 1.0) == 1.0
    assert epsilon(ctrl, 1.5) == pytest.approx(2.0)
    assert epsilon(ctrl, 0.25) == pytest.approx(0.25)


def test_depsilon_du_examples():
    pwc = ControlParameterization.piecewise_constant([3.0, 4.0])
    assert depsilon_du(pwc, 0, 0.2) == 1.0
    assert depsilon_du(pwc, 0, 0.7) == 0.0
    sine = ControlParameterization.sine_basis([0.1, 0.2, 0.3])
    assert depsilon_du(sine, 1, 0.25) == pytest.approx(1.0, abs=1e-15)
    raw = ControlParameterization.raw_grid([5.0, 6.0, 7.0, 8.0], 0.0, 3.0)
    assert depsilon_du(raw, 2, 2.0) == 1.0
    with pytest.raises(IndexError):
        depsilon_du(raw, 4, 1.0)


@pytest.mark.parametrize("t", [-0.1, 1.0 + 1e-6])
def test_epsilon_domain(t):
    with pytest.raises(DomainError):
        epsilon(ControlParameterization.sine_basis([1.0]), t)


def test_raw_grid_needs_two_samples():
    with pytest.raises(ValueError):
        ControlParameterization.raw_grid([1.0])


@given(kinds, coeffs, st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2), st.data())
def test_epsilon_is_linear(kind, u, a, b, t, data):
    w = data.draw(st.lists(st.floats(-5, 5), min_size=len(u), max_size=len(u)))
    u, w = np.array(u), np.array(w)
    lhs = epsilon(_ctrl(kind, a * u + b * w), t)
    rhs = a * epsilon(_ctrl(kind, u), t) + b * epsilon(_ctrl(kind, w), t)
    scale = max(1.0, abs(a) * np.abs(u).sum() + abs(b) * np.abs(w).sum())
    assert abs(lhs - rhs) <= 1e-14 * scale


@given(kinds, coeffs, st.floats(0, 2))
def test_epsilon_is_sum_of_derivatives(kind, u, t):
    ctrl = _ctrl(kind, u)
    total = sum(uk * depsilon_du(ctrl, k, t) for k, uk in enumerate(u))
    assert abs(epsilon(ctrl, t) - total) <= 1e-13 * max(1.0, np.abs(u).sum())


@given(kinds, coeffs, st.floats(0, 2))
def test_derivative_independent_of_u(kind, u, t):
    a = _ctrl(kind, u)
    b = _ctrl(kind, np.zeros(len(u)))
    assert all(depsilon_du(a, k, t) == depsilon_du(b, k, t) for k in range(len(u)))


def test_hamiltonian_examples():
    sys0 = ControlledSystem(Operator.herm(SZ), Operator.herm(SX), QuantumState.basis(2, 0))
    zero = ControlParameterization.sine_basis([0.0])
    assert np.array_equal(hamiltonian_at(sys0, zero, 0.3).matrix, SZ)
    assert hamiltonian_at(sys0, zero, 0.3).hermitian
    one = ControlParameterization.sine_basis([1.0])
    np.testing.assert_allclose(hamiltonian_at(sys0, one, 0.5).matrix, SZ + SX, atol=1e-15)
    rabi_sys = ControlledSystem(Operator.herm(np.zeros((2, 2))), Operator.herm(SX), QuantumState.basis(2, 0))
    const = ControlParameterization.piecewise_constant([0.7])
    np.testing.assert_array_equal(hamiltonian_at(rabi_sys, const, 0.1).matrix, 0.7 * SX)


def test_system_validation():
    with pytest.raises(HermiticityError):
        ControlledSystem(np.array([[0, 1], [0, 0]]), SX, QuantumState.basis(2, 0))
    with pytest.raises(DimensionError):
        ControlledSystem(np.eye(3), np.eye(3), QuantumState.basis(2, 0))
    with pytest.raises(DomainError):
        ControlledSystem(SZ, SX, QuantumState.basis(2, 0), 1.0, 1.0)


def test_target_validation():
    with pytest.raises(HermiticityError):
        Target.final_time([[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        Target.time_dependent(SZ, None)
    t = Target.time_dependent(SZ, np.ones(5))
    with pytest.raises(GridError):
        t.check_grid(TimeGrid(0, 1, 5))


def test_rabi_merit():
    sys, ctrl, grid, target = rabi()
    assert merit(sys, ctrl, target, propagate_forward(sys, ctrl, grid)) == pytest.approx(0.5, abs=1e-8)


def test_time_dependent_zero_weight_merit():
    sys, ctrl, grid, _ = rabi(n_steps=50)
    target = Target.time_dependent(np.diag([0.0, 1.0]), np.zeros(grid.n_nodes))
    assert merit(sys, ctrl, target, propagate_forward(sys, ctrl, grid)) == 0.0


def test_composite_penalty_in_merit():
    sys, ctrl, grid, _ = rabi(u=0.3, n_steps=100)
    target = Target.composite(np.diag([0.0, 1.0]), 0.5)
    traj = propagate_forward(sys, ctrl, grid)
    expected = np.sin(0.3) ** 2 - 0.5 * 0.09
    assert merit(sys, ctrl, target, traj) == pytest.approx(expected, abs=1e-8)


def test_merit_grid_mismatch():
    sys, ctrl, grid, target = rabi(n_steps=10)
    other = TimeGrid(0, 1, 20)
    traj = propagate_forward(sys, ctrl, other)
    bad = Target.time_dependent(np.eye(2), np.ones(grid.n_nodes))
    with pytest.raises(GridError):
        merit(sys, ctrl, bad, traj)


@given(kinds, coeffs, st.integers(0, 10_000), st.booleans())
def test_identity_observable_merit_is_one(kind, u, seed, pure):
    rng = np.random.default_rng(seed)
    psi0 = random_pure(rng, 3)
    state = psi0 if pure else psi0.to_density()
    sys = ControlledSystem(random_hermitian(rng, 3), random_hermitian(rng, 3), state, 0.0, 2.0)
    ctrl = _ctrl(kind, u)
    grid = TimeGrid(0.0, 2.0, 40)
    g = merit(sys, ctrl, Target.final_time(np.eye(3)), propagate_forward(sys, ctrl, grid))
    assert abs(g - 1.0) <= 1e-9
