import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ellip_k, legendre_tau, modular_lambda

from isoperiodic.curve import (
    CurveFamilyPoint,
    CycleBasis,
    Region,
    SheetedPoint,
    compute_Ix,
    compute_periods,
    compute_ramification_constants,
    cubic,
    eval_omega,
    eval_W_Q0_Px,
    integrate_sqrt_endpoints,
    lift_sqrt_along_path,
    rauch_check,
)
from isoperiodic.errors import (
    BranchPointCollision,
    ContinuationAmbiguity,
    DegenerateCurve,
    PoleAtRamification,
    PoleCollision,
    RegionError,
)
from isoperiodic.numerics import PathSpec, QuadratureSpec


def basis_at(x, fraction=0.2):
    return CycleBasis.for_region(Region.around_point(x, fraction))


@pytest.fixture(scope="module")
def half():
    cycles = basis_at(0.5)
    return cycles, compute_periods(0.5, cycles)


# ---------------------------------------------------------------- regions and loops


def test_region_must_avoid_degenerate_moduli():
    with pytest.raises(RegionError):
        Region(0.1, 0.2)
    with pytest.raises(RegionError):
        CurveFamilyPoint(0.9, Region(0.5, 0.1))
    with pytest.raises(DegenerateCurve):
        CurveFamilyPoint(1.0)


@pytest.mark.parametrize("x", [0.5, 0.3 + 0.2j, -0.7 + 0.4j, 2 + 1j, 1.5, -0.6])
def test_cycle_basis_winding(x):
    cycles = basis_at(x)
    a, b = cycles.a_loop, cycles.b_loop
    from isoperiodic.numerics import winding_number

    assert winding_number(a, 0) == 1 and winding_number(a, 1) == 0
    assert winding_number(b, 1) == 1 and winding_number(b, 0) == 0
    for z in (x, x + cycles.region.radius, x - 1j * cycles.region.radius):
        assert winding_number(a, z) == 1 and winding_number(b, z) == 1
    assert cycles.clearance == pytest.approx(0.05 * cycles.region.gap)


# ---------------------------------------------------------------- continuation


def test_a_loop_closure(half):
    cycles, _ = half
    lift = lift_sqrt_along_path(0.5, cycles.a_loop, cycles.v_start("a", 0.5))
    assert abs(lift.end_value - lift.start_value) < 1e-10 * abs(lift.start_value)


def test_b_loop_closure(half):
    cycles, _ = half
    lift = lift_sqrt_along_path(0.5, cycles.b_loop, cycles.v_start("b", 0.5))
    assert abs(lift.end_value - lift.start_value) < 1e-10 * abs(lift.start_value)


def test_monodromy_around_single_branch_point():
    loop = PathSpec.circle(0, 0.2)
    u0 = loop.segments[0].start
    v0 = np.sqrt(cubic(u0, 0.5))
    lift = lift_sqrt_along_path(0.5, loop, v0)
    assert abs(lift.end_value + v0) < 1e-10 * abs(v0)


def test_short_path_keeps_start_value():
    path = PathSpec.polyline([2.0, 2.0 + 1e-9, 2.0 + 2e-9])
    v0 = -np.sqrt(cubic(2.0, 0.5))
    lift = lift_sqrt_along_path(0.5, path, v0)
    assert lift.end_value == pytest.approx(v0, rel=1e-8)


def test_lift_rejects_wrong_start_value():
    with pytest.raises(ValueError):
        lift_sqrt_along_path(0.5, PathSpec.polyline([2, 3]), 1.0)


def test_branch_point_collision():
    with pytest.raises(BranchPointCollision):
        lift_sqrt_along_path(0.5, PathSpec.polyline([-1, 1e-9j, 0.3]), np.sqrt(complex(cubic(-1, 0.5))), clearance=1e-6)


def test_continuation_ambiguity():
    path = PathSpec.polyline([-1 + 1e-7j, 0.25 + 1e-7j], samples_hint=16)
    with pytest.raises(ContinuationAmbiguity):
        lift_sqrt_along_path(0.5, path, np.sqrt(cubic(path.segments[0].start, 0.5)), clearance=1e-9, max_refinements=2)


# ---------------------------------------------------------------- periods


def test_tau_at_half_is_i(half):
    _, per = half
    assert abs(per.tau - 1j) < 1e-9


@pytest.mark.parametrize("x", [0.3, 0.7])
def test_tau_matches_agm(x):
    per = compute_periods(x, basis_at(x))
    assert abs(per.tau - legendre_tau(x)) < 1e-9


def test_I0_modulus_at_half(half):
    _, per = half
    assert abs(abs(per.I0) - 4 * ellip_k(1 / math.sqrt(2))) < 1e-8
    assert abs(abs(per.I0) - 7.416300) < 2e-6  # quoted to six decimals


def test_I0_matches_branch_segment_integral():
    x = 0.3
    per = compute_periods(x, basis_at(x))
    seg = integrate_sqrt_endpoints(lambda u: 1 / np.sqrt(u * (1 - u) * (x - u)), 0, x)
    assert abs(abs(per.I0) - 2 * abs(seg)) < 1e-9


@pytest.mark.parametrize("x", [0.3 + 0.2j, -0.7 + 0.4j, 2 + 1j, 0.5 - 0.8j, 1.5 + 1e-3j, -0.6 + 1e-3j])
def test_modular_lambda_inverts_tau(x):
    per = compute_periods(x, basis_at(x))
    assert per.tau.imag > 0
    assert abs(modular_lambda(per.tau) - x) < 1e-9


def test_normalization_reverified(half):
    _, per = half
    assert abs(per.a_normalization - 1) < 1e-9


def test_periods_invariant_under_refinement_and_deformation():
    x = 0.35 + 0.1j
    base = basis_at(x)
    ref = compute_periods(x, base)
    fine = compute_periods(x, base.refined(2))
    wide = compute_periods(x, basis_at(x, 0.5))
    narrow = compute_periods(x, basis_at(x, 0.05))
    for other in (fine, wide, narrow):
        assert abs(other.I0 - ref.I0) < 1e-9 * abs(ref.I0)
        assert abs(other.tau - ref.tau) < 1e-9
        assert abs(other.Ix - ref.Ix) < 1e-9 * abs(ref.Ix)


def test_x_outside_region_is_rejected(half):
    cycles, _ = half
    with pytest.raises(RegionError):
        compute_periods(0.9, cycles)


# ---------------------------------------------------------------- evaluations


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(0.1, 0.9))
def test_zero_identity_random_x(re, im):
    x = complex(0.5 + re, im)
    ev = eval_omega(x, compute_periods(x, basis_at(x)), SheetedPoint(3 + 1j))
    total = ev.omega_P0**2 + ev.omega_P1**2 + ev.omega_Px**2
    assert abs(total) < 1e-12 * abs(ev.omega_P0) ** 2


def test_omega_at_Q0(half):
    _, per = half
    Q0 = SheetedPoint(2.0, 1)
    ev = eval_omega(0.5, per, Q0)
    assert ev.v_Q0 == pytest.approx(math.sqrt(3), rel=1e-15)
    assert abs(ev.v_Q0**2 - 3) < 1e-14
    expected = 1 / (4 * ellip_k(1 / math.sqrt(2)) * math.sqrt(3))
    assert abs(abs(ev.omega_Q0) - expected) < 1e-9
    assert abs(abs(ev.omega_Q0) - 0.0778480) < 1e-6  # quoted value is rounded
    assert abs(ev.omega_Q0 * per.I0 * ev.v_Q0 - 1) < 1e-14


def test_symmetric_modulus(half):
    _, per = half
    ev = eval_omega(0.5, per, SheetedPoint(2.0))
    assert abs(abs(ev.omega_P0) - abs(ev.omega_P1)) < 1e-14


def test_degenerate_inputs(half):
    _, per = half
    with pytest.raises(PoleAtRamification):
        eval_omega(0.5, per, SheetedPoint(1.0))
    with pytest.raises(PoleAtRamification):
        eval_omega(0.5, per, SheetedPoint(0.5 + 1e-10))
    with pytest.raises(DegenerateCurve):
        eval_omega(1e-10, per, SheetedPoint(2.0))


# ---------------------------------------------------------------- normalization constants


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
def test_ramification_constant_relations(re, im):
    x = complex(0.5 + re, im)
    if min(abs(x), abs(x - 1)) < 0.15:
        return
    per = compute_periods(x, basis_at(x))
    ev = eval_omega(x, per, SheetedPoint(2.5))
    # I^0, I^1 by their own quadratures, not from the relations
    cycles = basis_at(x)
    I0r, I1r = compute_ramification_constants(x, cycles, per)
    scale = abs(per.I0) ** 2
    assert abs(I0r / ev.omega_P0 - per.Ix / ev.omega_Px + x * per.I0**2 / 4) < 1e-10 * scale
    assert abs(I1r / ev.omega_P1 - per.Ix / ev.omega_Px + (x - 1) * per.I0**2 / 4) < 1e-10 * scale
    assert abs(I0r / ev.omega_P0 - I1r / ev.omega_P1 + per.I0**2 / 4) < 1e-10 * scale


def test_Ix_refined_discretization(half):
    cycles, per = half
    spec = QuadratureSpec(rel_tol=1e-13, abs_tol=1e-15)
    refined = compute_Ix(0.5, cycles.refined(2), per, spec)
    assert abs(refined - per.Ix) < 1e-10 * abs(per.Ix)


def test_Ix_normalizes_W():
    """The a-period of W(., P_x) vanishes with the normalization-forced constant."""
    x = 0.4 + 0.1j
    cycles = basis_at(x)
    per = compute_periods(x, cycles)
    # W(P, P_x) = (1/(omega(P_x)(u - x)) + I^x) omega(P): integrate over the a-loop
    from isoperiodic.curve import a_period_integrals

    I0, K1 = a_period_integrals(x, cycles)
    a_period = (K1 / I0) / per.omega_Px + per.Ix
    assert abs(a_period) < 1e-12 * abs(per.Ix)


# ---------------------------------------------------------------- W(Q0, P_x)


def test_W_odd_in_sheet(half):
    _, per = half
    w1 = eval_W_Q0_Px(0.5, per, SheetedPoint(2.0, 1))
    w2 = eval_W_Q0_Px(0.5, per, SheetedPoint(2.0, -1))
    assert w1 == -w2


def test_W_against_refined_quadrature(half):
    cycles, per = half
    Q0 = SheetedPoint(2.0, 1)
    spec = QuadratureSpec(rel_tol=1e-13, abs_tol=1e-15)
    Ix = compute_Ix(0.5, cycles.refined(2), per, spec)
    w = eval_omega(0.5, per, Q0).omega_Q0
    ref = (1 / (per.omega_Px * (2.0 - 0.5)) + Ix) * w
    assert abs(eval_W_Q0_Px(0.5, per, Q0) - ref) < 1e-10 * abs(ref)


def test_W_leading_pole_coefficient(half):
    _, per = half
    ray = np.exp(0.7j)

    def ratio(d):
        Q0 = SheetedPoint(0.5 + d * ray)
        w = eval_omega(0.5, per, Q0).omega_Q0
        return eval_W_Q0_Px(0.5, per, Q0) * (d * ray) / (w / per.omega_Px)

    r1, r2 = ratio(1e-2), ratio(1e-3)
    extrapolated = (10 * r2 - r1) / 9
    assert abs(extrapolated - 1) < 1e-10


def test_W_pole_collision(half):
    _, per = half
    with pytest.raises(PoleCollision):
        eval_W_Q0_Px(0.5, per, SheetedPoint(0.5 + 1e-10), omega_Q0=1.0)


# ---------------------------------------------------------------- variational formulas


def test_rauch_at_half():
    report = rauch_check(0.5, basis_at(0.5), SheetedPoint(2.0), h=1e-4)
    tau = report["tau"]
    assert tau.residual < 1e-6 * abs(tau.analytic)
    for e in report.entries:
        assert e.relative < 1e-6
        assert e.ratio == pytest.approx(4.0, abs=0.5)


def test_rauch_omega_Px_at_point_four():
    report = rauch_check(0.4, basis_at(0.4), SheetedPoint(1.5 + 0.5j), h=1e-4)
    assert report["omega_Px"].relative < 1e-6


def test_rauch_complex_point():
    x = 0.3 + 0.4j
    report = rauch_check(x, basis_at(x), SheetedPoint(-0.5 + 1j, -1), h=1e-3)
    for e in report.entries:
        assert e.relative < 1e-4
        assert e.ratio == pytest.approx(4.0, abs=0.5)
