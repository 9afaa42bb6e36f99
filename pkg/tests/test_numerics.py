import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoperiodic.curve import integrate_sqrt_endpoints
from isoperiodic.errors import (
    EvaluationError,
    MaxStepsExceeded,
    NonConvergence,
    RhsEvaluationError,
    StepSizeUnderflow,
)
from isoperiodic.numerics import (
    IVPSpec,
    PathSpec,
    QuadratureSpec,
    Segment,
    central_difference,
    integrate_path,
    solve_ivp,
    winding_number,
)


# ---------------------------------------------------------------- paths


def test_path_rejects_repeated_vertices():
    with pytest.raises(ValueError):
        PathSpec.polyline([0, 1, 1, 2])


def test_path_rejects_self_intersection():
    with pytest.raises(ValueError):
        PathSpec.polyline([0, 1, 1j, 1 + 1j], closed=True)


def test_stadium_is_simple_and_counterclockwise():
    loop = PathSpec.stadium(-0.7 + 0.4j, 1.0, 0.2)
    assert winding_number(loop, -0.7 + 0.4j) == 1
    assert winding_number(loop, 1.0) == 1
    assert winding_number(loop, 5.0) == 0


def test_point_and_derivative_agree():
    loop = PathSpec.stadium(0, 0.5 + 0.2j, 0.3)
    s = np.array([k + f for k in range(4) for f in np.linspace(0.05, 0.95, 9)])
    h = 1e-6
    fd = (loop.point(s + h) - loop.point(s - h)) / (2 * h)
    assert np.max(np.abs(fd - loop.derivative(s))) < 1e-8


def test_arc_segment_length():
    seg = Segment.arc(0, 2.0, 0.0, math.pi)
    assert seg.length == pytest.approx(2 * math.pi)


# ---------------------------------------------------------------- quadrature


def test_residue_of_simple_pole():
    val = integrate_path(lambda u: 1 / u, PathSpec.circle(0, 1.0))
    assert abs(val - 2j * math.pi) < 1e-12


def test_polynomial_on_segment():
    assert abs(integrate_path(lambda u: u, PathSpec.polyline([0, 1])) - 0.5) < 1e-15


def test_beta_half_half_with_endpoint_substitution():
    val = integrate_sqrt_endpoints(lambda u: 1 / np.sqrt(u * (1 - u)), 0, 1)
    assert abs(val - math.pi) < 1e-10


def test_error_estimate_is_reported():
    val, err, panels = integrate_path(lambda u: np.exp(u), PathSpec.polyline([0, 1j, 1 + 1j]), full_output=True)
    assert abs(val - (np.exp(1 + 1j) - 1)) < 1e-13
    assert err <= max(1e-12, 1e-10 * abs(val))
    assert panels >= 2


def test_nonconvergence_reports_estimate():
    spec = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-15, max_subdivisions=3)
    with pytest.raises(NonConvergence) as info:
        integrate_path(lambda u: 1 / np.sqrt(u), PathSpec.polyline([0, 1]), spec)
    assert info.value.error_estimate is not None


def test_nonfinite_integrand():
    with pytest.raises(EvaluationError):
        integrate_path(lambda u: np.where(u.real > 0.5, np.nan, u), PathSpec.polyline([0, 1]))


def test_stacked_integrands():
    out = integrate_path(lambda u: np.stack([u, u * u]), PathSpec.polyline([0, 2]))
    assert np.allclose(out, [2.0, 8.0 / 3.0], rtol=1e-14)


@settings(max_examples=25, deadline=None)
@given(
    st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
    st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
    st.integers(min_value=0, max_value=6),
)
def test_additivity_and_orientation(a, b, k):
    if abs(a - b) < 1e-3 or abs(a) < 1e-3 or abs(b) < 1e-3:
        return
    path = PathSpec.polyline([a, 0.5 * (a + b) + 0.3j, b])
    f = lambda u: np.exp(u) * u**k  # noqa: E731
    whole, err, _ = integrate_path(f, path, full_output=True)
    left, right = path.halves()
    parts = integrate_path(f, left) + integrate_path(f, right)
    assert abs(whole - parts) <= 10 * max(1e-12, 1e-10 * abs(whole))
    assert abs(integrate_path(f, path.reversed()) + whole) <= 1e-12 * max(1.0, abs(whole))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 3.0), st.integers(0, 5))
def test_closed_loop_of_entire_function_vanishes(r, k):
    val = integrate_path(lambda u: np.cos(u) * u**k, PathSpec.circle(0.1j, r))
    assert abs(val) < 1e-11 * max(1.0, r ** (k + 1) * math.cosh(r))


# ---------------------------------------------------------------- ivp


def test_exponential_growth():
    traj = solve_ivp(lambda t, y: y, 0.0, [1.0], 1.0)
    assert abs(traj.y[-1, 0] - math.e) <= 1e-9 * math.e


def test_constant_solution_exact():
    c = 0.3 - 1.7j
    traj = solve_ivp(lambda t, y: np.zeros_like(y), 0.0, [c], 5.0)
    assert traj.y[-1, 0] == c


def test_polynomial_solution():
    traj = solve_ivp(lambda t, y: np.array([2 * t]), 0.0, [0.0], 2.0)
    assert abs(traj.y[-1, 0] - 4.0) <= 1e-10 * 4


def test_dense_output_matches_closed_form():
    lam = -0.5 + 2j
    ts = np.linspace(0, 2, 17)
    traj = solve_ivp(lambda t, y: lam * y, 0.0, [1.0], 2.0, t_eval=ts)
    assert np.allclose(traj.t, ts)
    assert np.max(np.abs(traj.y[:, 0] - np.exp(lam * ts))) < 1e-8


def test_backward_integration():
    traj = solve_ivp(lambda t, y: y, 1.0, [math.e], 0.0)
    assert abs(traj.y[-1, 0] - 1.0) < 1e-9


def test_global_error_tracks_tolerance():
    errs = []
    for tol in (1e-6, 1e-8):
        traj = solve_ivp(lambda t, y: -1.3j * y, 0.0, [1.0], 3.0, IVPSpec(rel_tol=tol, abs_tol=tol * 1e-2))
        errs.append(abs(traj.y[-1, 0] - np.exp(-3.9j)))
    assert errs[1] * 10 <= errs[0]


def test_step_size_underflow_near_blowup():
    with pytest.raises(StepSizeUnderflow) as info:
        solve_ivp(lambda t, y: y * y, 0.0, [1.0], 2.0)
    assert info.value.t == pytest.approx(1.0, abs=1e-3)


def test_max_steps():
    with pytest.raises(MaxStepsExceeded):
        solve_ivp(lambda t, y: np.cos(200 * t) * y, 0.0, [1.0], 10.0, IVPSpec(max_steps=20))


def test_rhs_failure_carries_location():
    def rhs(t, y):
        if t > 0.5:
            raise ValueError("boom")
        return y

    with pytest.raises(RhsEvaluationError) as info:
        solve_ivp(rhs, 0.0, [1.0], 1.0)
    assert info.value.t > 0.5


# ---------------------------------------------------------------- differences


def test_difference_exact_for_quadratics():
    d = central_difference(lambda t: t * t, 1.0, 1e-3)
    assert abs(d.value - 2.0) < 1e-9


def test_difference_of_exponential():
    d = central_difference(math.exp, 0.0, 1e-3)
    assert abs(d.value - 1.0) < 1e-10


def test_second_order_convergence():
    d1 = central_difference(math.sin, 0.0, 1e-2)
    e_coarse = abs(d1.coarse - 1.0)
    e_fine = abs(d1.fine - 1.0)
    assert e_coarse / e_fine == pytest.approx(4.0, rel=0.02)


def test_difference_propagates_evaluation_error():
    def g(t):
        raise EvaluationError("nope")

    with pytest.raises(EvaluationError):
        central_difference(g, 0.0, 1e-3)
