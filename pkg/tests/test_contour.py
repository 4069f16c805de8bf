import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrqoct import (
    Branch,
    ContourTime,
    DomainError,
    Target,
    UnsupportedTargetError,
    contour_kernel,
    contour_order,
    gradient_contour,
    gradient_response,
    response_kernel,
)
from lrqoct.gradients import penalty_gradient

from .cases import make_case, rabi, rel_err

TF = 2.0
contour_times = st.builds(
    ContourTime, st.sampled_from(list(Branch)), st.floats(0.0, TF), st.just(0.0), st.just(TF)
)


def test_forward_order():
    assert contour_order(ContourTime("forward", 0.3), ContourTime("forward", 0.7)) == -1


def test_backward_after_forward():
    assert ContourTime("forward", 0.99) < ContourTime("backward", 0.01)


def test_backward_runs_down():
    assert contour_order(ContourTime("backward", 0.7), ContourTime("backward", 0.3)) == -1


def test_turning_point():
    assert ContourTime("forward", 1.0) < ContourTime("backward", 1.0)
    assert contour_order(ContourTime("forward", 0.5), ContourTime("forward", 0.5)) == 0


def test_contour_time_domain():
    with pytest.raises(DomainError):
        ContourTime("forward", 1.5)
    with pytest.raises(DomainError):
        contour_order(ContourTime("forward", 0.5), ContourTime("forward", 0.5, 0.0, 2.0))


@given(contour_times, contour_times)
def test_order_antisymmetric(a, b):
    assert contour_order(a, b) == -contour_order(b, a)


@given(contour_times, contour_times, contour_times)
def test_order_transitive(a, b, c):
    if contour_order(a, b) <= 0 and contour_order(b, c) <= 0:
        assert contour_order(a, c) <= 0


@given(st.lists(contour_times, min_size=2, max_size=20, unique_by=lambda p: (p.branch, p.t)))
def test_sorting_round_trip(points):
    ordered = sorted(points)
    assert sorted(reversed(ordered)) == ordered
    assert all(contour_order(x, y) == -1 for x, y in zip(ordered, ordered[1:]))


def test_identity_observable_kernel_is_zero():
    case = make_case(3, False, "sine_basis", False, n_steps=30)
    kernel = contour_kernel(case.system, case.control, case.grid, np.eye(3))
    assert np.max(np.abs(kernel.branch_difference())) <= 1e-14
    grad = gradient_contour(case.system, case.control, case.grid, Target.final_time(np.eye(3)))
    assert np.max(np.abs(grad.values)) <= 1e-14


@pytest.mark.parametrize("pure", [True, False])
@pytest.mark.parametrize("dim", [2, 4])
def test_branch_identities(pure, dim):
    case = make_case(dim, pure, "raw_grid", False, n_steps=80)
    a = case.target.observable
    kernel = contour_kernel(case.system, case.control, case.grid, a)
    retarded = response_kernel(case.system, case.control, case.grid, a)
    assert np.max(np.abs(kernel.branch_difference() - retarded.values)) <= 1e-12
    assert np.max(np.abs(kernel.backward + kernel.forward.conj())) <= 1e-11
    assert kernel.values.shape == (2 * case.grid.n_nodes,)
    assert kernel.values[case.grid.n_nodes] == kernel.backward[-1]


def test_rabi_contour_gradient():
    res = gradient_contour(*rabi())
    assert res.values[0] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("kind", ["piecewise_constant", "sine_basis", "raw_grid"])
def test_contour_equals_response(kind):
    case = make_case(3, False, kind, False, n_steps=100)
    c = gradient_contour(*case.args)
    r = gradient_response(*case.args)
    assert rel_err(c.values, r.values) <= 1e-12
    assert c.diagnostics["imag_residue"] <= 1e-10 * np.max(np.abs(c.values))


def test_contour_composite_adds_penalty():
    case = make_case(2, True, "sine_basis", False, n_steps=100)
    target = Target.composite(case.target.observable, 0.2)
    plain = gradient_contour(*case.args).values
    comp = gradient_contour(case.system, case.control, case.grid, target).values
    np.testing.assert_allclose(comp - plain, penalty_gradient(case.control, case.grid, 0.2), atol=1e-14)


def test_contour_rejects_time_dependent():
    case = make_case(2, True, "sine_basis", True, n_steps=20)
    with pytest.raises(UnsupportedTargetError):
        gradient_contour(*case.args)
