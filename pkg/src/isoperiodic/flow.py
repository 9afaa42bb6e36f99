"""Isoperiodic deformations of a second-kind differential with a pole at Q0.

Omega has a pole of order n + 2 at Q0 = (y0, v0), a-period A and b-period

    B = 2 pi i/(n+1)! * omega(Q0) L_n + A tau.

Keeping B fixed while the branch point x moves determines y0(x). The flow is
integrated either from the first-order slope (which needs periods at every
step) or from the rational second-order equation (which needs none).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bell import BellTable, bell_table, ratio_derivative
from .curve import (
    CycleBasis,
    PeriodData,
    SheetedPoint,
    a_period_integrals,
    compute_periods,
    cubic,
)
from .errors import (
    BellSingularity,
    DegenerateDeformation,
    IsoperiodicError,
    PoleAtRamification,
    PoleCollision,
    RegionExit,
)
from .numerics import IVPSpec, QuadratureSpec, solve_ivp

__all__ = [
    "MAX_ORDER",
    "FlowConfig",
    "FlowState",
    "FlowResult",
    "VerificationReport",
    "b_period",
    "initial_slope",
    "slope_from_periods",
    "ode_rhs",
    "integrate_flow",
    "verify_isoperiodic",
]

MAX_ORDER = 8
BRANCH_HALT_TOL = 1e-6
BELL_HALT_TOL = 1e-10
MODES = ("first_order", "second_order", "both")


@dataclass(frozen=True)
class FlowConfig:
    """Parameters of one flow along the straight segment x0 -> x1."""

    n: int
    A: complex
    x0: complex
    x1: complex
    Q0_init: SheetedPoint
    ivp: IVPSpec = field(default_factory=IVPSpec)
    mode: str = "first_order"
    n_samples: int = 21
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    y0p_init: complex | None = None  # overrides the computed initial slope (second order only)

    def __post_init__(self):
        if not 0 <= self.n <= MAX_ORDER:
            raise ValueError(f"n must lie in 0..{MAX_ORDER}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")
        object.__setattr__(self, "A", complex(self.A))
        object.__setattr__(self, "x0", complex(self.x0))
        object.__setattr__(self, "x1", complex(self.x1))


@dataclass(frozen=True)
class FlowState:
    x: complex
    y0: complex
    y0p: complex
    sheet: int

    @property
    def Q0(self) -> SheetedPoint:
        return SheetedPoint(self.y0, self.sheet)


@dataclass
class FlowResult:
    samples: list[FlowState]
    B_values: np.ndarray
    B0: complex
    max_B_drift: float
    diagnostics: dict
    slope_formula: np.ndarray  # first-order slope re-evaluated at each sample
    config: FlowConfig
    cycles: CycleBasis = field(repr=False)
    secondary: "FlowResult | None" = None  # second-order run when mode == "both"
    discrepancy: float | None = None  # sup |y0_first - y0_second|

    @property
    def x(self) -> np.ndarray:
        return np.array([s.x for s in self.samples])

    @property
    def y0(self) -> np.ndarray:
        return np.array([s.y0 for s in self.samples])

    @property
    def y0p(self) -> np.ndarray:
        return np.array([s.y0p for s in self.samples])

    @property
    def relative_drift(self) -> float:
        return self.max_B_drift / abs(self.B0)


# ---------------------------------------------------------------------------
# pointwise formulas


def b_period(x: complex, Q0: SheetedPoint, n: int, A: complex, periods: PeriodData) -> complex:
    """B = 2 pi i/(n+1)! * omega(Q0) L_n + A tau."""
    x = complex(x)
    L = bell_table(x, Q0.y0, n)
    w = 1 / (periods.I0 * Q0.v(x))
    return 2j * math.pi / math.factorial(n + 1) * w * L[n] + complex(A) * periods.tau


def _check_singular(x: complex, y0: complex, L: BellTable, n: int, exc=BellSingularity, tol=BELL_HALT_TOL):
    scale = abs(L[n]) / abs(x - y0)
    if abs(L[n + 1]) < tol * scale:
        raise exc(f"L_{n + 1} vanishes at x={x}, y0={y0}: the deformation is degenerate")


def _check_branch(x: complex, y0: complex, tol: float = BRANCH_HALT_TOL) -> None:
    if abs(y0 - x) < tol:
        raise PoleCollision(f"y0={y0} reached the moving branch point x={x}")
    for bp in (0, 1):
        if abs(y0 - bp) < tol:
            raise PoleAtRamification(f"y0={y0} reached the branch point {bp}")


def slope_from_periods(
    x: complex,
    y0: complex,
    v0: complex,
    n: int,
    A: complex,
    I0: complex,
    J: complex,
    sqrt_x_xm1: complex,
    *,
    singular_exc=DegenerateDeformation,
    singular_tol: float = 1e-12,
) -> complex:
    """dy0/dx from the period data (I0, J = I^x omega(P_x)) and v0 = v(Q0).

    Writing p = omega(P_x) and w = omega(Q0), the slope is

        -1/(2 L_{n+1}) [ (1/(y0-x) + J) L_n - n/(x-y0) D_{n-1} + A (n+1)! p^2/w ],

    which is p W(Q0,P_x) L_n / w etc. with every omega(Q0) factor cancelled.
    """
    L = bell_table(x, y0, n + 1)
    _check_singular(x, y0, L, n, singular_exc, singular_tol)
    bracket = (1 / (y0 - x) + J) * L[n]
    if n > 0:
        bracket -= n / (x - y0) * ratio_derivative(n - 1, x, y0, L)
    if A != 0:
        p = 2 / (I0 * sqrt_x_xm1)
        bracket += A * math.factorial(n + 1) * p * p * I0 * v0
    return -bracket / (2 * L[n + 1])


def initial_slope(x: complex, Q0: SheetedPoint, n: int, A: complex, periods: PeriodData) -> complex:
    """Isoperiodic slope dy0/dx at (x, Q0)."""
    x = complex(x)
    _check_branch(x, Q0.y0, 1e-8)
    return slope_from_periods(x, Q0.y0, Q0.v(x), n, complex(A), periods.I0, periods.J, periods.sqrt_x_xm1)


def _falling_ratio_sum(L, d, lo, hi, weight=lambda s: 1.0):
    """sum_{s=lo}^{hi-1} weight(s) L_s d^s / s!"""
    return sum(weight(s) * L[s] * d**s / math.factorial(s) for s in range(lo, hi))


def ode_rhs(n: int, state: FlowState) -> complex:
    """y0'' as a rational function of (x, y0, y0') and the Bell values.

    No periods enter: A and the normalization constants have been eliminated.
    """
    x, y, yp = complex(state.x), complex(state.y0), complex(state.y0p)
    if not 0 <= n <= MAX_ORDER:
        raise ValueError(f"n must lie in 0..{MAX_ORDER}")
    _check_branch(x, y)
    L = bell_table(x, y, n + 2)
    _check_singular(x, y, L, n)
    d = x - y
    f = math.factorial
    Ln1 = L[n + 1]
    drift = 1 / x + 1 / (x - 1)
    r = -yp * yp * L[n + 2] / Ln1 - yp * (drift + 1 / (y - x))
    r += yp * f(n + 1) / (d ** (n + 2) * Ln1) * _falling_ratio_sum(L, d, 0, n + 1)
    if n > 0:
        r += f(n) * (drift + 2 / (y - x)) / (2 * d ** (n + 1) * Ln1) * _falling_ratio_sum(L, d, 0, n)
        r -= f(n) / (2 * d ** (n + 2) * Ln1) * _falling_ratio_sum(L, d, 0, n, lambda s: n - s)
        double = sum(_falling_ratio_sum(L, d, 0, s) for s in range(1, n))
        r -= f(n) / (4 * d ** (n + 2) * Ln1) * double
    r -= L[n] / (4 * Ln1) * (2 / (y - x) * drift + 3 / (y - x) ** 2 + 1 / (x - 1) - 1 / x)
    return r


# ---------------------------------------------------------------------------
# integration


def _nearest_root(y0: complex, x: complex, v_track: complex) -> tuple[complex, int]:
    w = complex(np.sqrt(cubic(y0, x)))
    sheet = 1 if (w * np.conj(v_track)).real >= 0 else -1
    return sheet * w, sheet


def _dv_dx(x, y0, v, y0p):
    """x-derivative of v(Q0) along the trajectory."""
    S = 1 / y0 + 1 / (y0 - 1) + 1 / (y0 - x)
    return 0.5 * v * (S * y0p - 1 / (y0 - x))


def _first_order_field(config: FlowConfig, cycles: CycleBasis):
    n, A = config.n, config.A
    x0, dx = config.x0, config.x1 - config.x0
    region = cycles.region

    def slope(x, y0, v_track):
        _check_branch(x, y0)
        v, _ = _nearest_root(y0, x, v_track)
        I0, K1 = a_period_integrals(x, cycles, config.quad)
        sxx = 1j * complex(region.sqrt_x(x)) * complex(region.sqrt_1mx(x))
        return slope_from_periods(
            x, y0, v, n, A, I0, -K1 / I0, sxx, singular_exc=BellSingularity, singular_tol=BELL_HALT_TOL
        ), v

    def rhs(t, state):
        x = x0 + t * dx
        y0, vt = state
        yp, v = slope(x, y0, vt)
        return np.array([yp, _dv_dx(x, y0, v, yp)]) * dx

    return rhs, slope


def _second_order_field(config: FlowConfig):
    n = config.n
    x0, dx = config.x0, config.x1 - config.x0

    def rhs(t, state):
        x = x0 + t * dx
        y0, yp, vt = state
        ypp = ode_rhs(n, FlowState(x, y0, yp, 1))
        v, _ = _nearest_root(y0, x, vt)
        return np.array([yp * dx, ypp * dx, _dv_dx(x, y0, v, yp) * dx])

    return rhs


def _solve(rhs, state0, config: FlowConfig, ts):
    try:
        return solve_ivp(rhs, 0.0, state0, 1.0, config.ivp, t_eval=ts)
    except IsoperiodicError as exc:
        t = getattr(exc, "t", None)
        if t is not None:
            x = config.x0 + t * (config.x1 - config.x0)
            exc.x = x
            exc.args = (f"{exc.args[0]} (flow halted near x={x:.12g})",) + exc.args[1:]
        raise


def _finish(config, cycles, mode, traj) -> FlowResult:
    samples, B, slopes = [], [], []
    for t, st in zip(traj.t, traj.y):
        x = config.x0 + t * (config.x1 - config.x0)
        y0 = complex(st[0])
        _, sheet = _nearest_root(y0, x, complex(st[-1]))
        periods = compute_periods(x, cycles, config.quad, verify_normalization=False)
        Q0 = SheetedPoint(y0, sheet)
        s = initial_slope(x, Q0, config.n, config.A, periods)
        y0p = s if mode == "first_order" else complex(st[1])
        samples.append(FlowState(x, y0, y0p, sheet))
        B.append(b_period(x, Q0, config.n, config.A, periods))
        slopes.append(s)
    B = np.array(B)
    diag = {"mode": mode, "n_steps": traj.n_steps, "n_rejected": traj.n_rejected, "n_rhs": traj.n_rhs}
    return FlowResult(
        samples=samples,
        B_values=B,
        B0=complex(B[0]),
        max_B_drift=float(np.max(np.abs(B - B[0]))),
        diagnostics=diag,
        slope_formula=np.array(slopes),
        config=config,
        cycles=cycles,
    )


def integrate_flow(config: FlowConfig, cycles: CycleBasis | None = None) -> FlowResult:
    """Integrate y0(x) along x0 -> x1 keeping both periods of Omega fixed.

    In mode ``both`` the first-order trajectory is returned with the
    second-order one attached as ``secondary`` and their sup-norm gap as
    ``discrepancy``.
    """
    if cycles is None:
        from .curve import Region

        cycles = CycleBasis.for_region(Region.around_segment(config.x0, config.x1))
    for xe in (config.x0, config.x1):
        if not cycles.region.contains(xe):
            raise RegionExit(f"x={xe} lies outside the cycle region {cycles.region}", x=xe)
    Q0 = config.Q0_init
    x0 = config.x0
    _check_branch(x0, Q0.y0, 1e-8)
    periods0 = compute_periods(x0, cycles, config.quad, verify_normalization=False)
    slope0 = initial_slope(x0, Q0, config.n, config.A, periods0)
    v0 = Q0.v(x0)
    ts = np.linspace(0.0, 1.0, config.n_samples)

    first = second = None
    if config.mode in ("first_order", "both"):
        rhs, _ = _first_order_field(config, cycles)
        traj = _solve(rhs, [Q0.y0, v0], config, ts)
        first = _finish(config, cycles, "first_order", traj)
    if config.mode in ("second_order", "both"):
        yp0 = slope0 if config.y0p_init is None else complex(config.y0p_init)
        traj = _solve(_second_order_field(config), [Q0.y0, yp0, v0], config, ts)
        second = _finish(config, cycles, "second_order", traj)
    if first is None:
        return second
    if second is not None:
        first.secondary = second
        first.discrepancy = float(np.max(np.abs(first.y0 - second.y0)))
    return first


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    max_relative_drift: float
    max_slope_residual: float
    tol: float
    B0: complex


def verify_isoperiodic(result: FlowResult, tol: float = 1e-7) -> VerificationReport:
    """Recompute B and the first-order slope at every sample and test both.

    Passes iff max |B - B0| <= tol |B0| and |y0' - slope| <= tol max(1, |slope|)
    at every sample. Values stored in ``result`` are not trusted.
    """
    if not result.samples:
        raise ValueError("empty flow result")
    cfg, cycles = result.config, result.cycles
    B, res = [], []
    for s in result.samples:
        try:
            periods = compute_periods(s.x, cycles, cfg.quad, verify_normalization=False)
            Q0 = s.Q0
            B.append(b_period(s.x, Q0, cfg.n, cfg.A, periods))
            slope = initial_slope(s.x, Q0, cfg.n, cfg.A, periods)
            res.append(abs(s.y0p - slope) / max(1.0, abs(slope)))
        except IsoperiodicError:
            return VerificationReport(False, math.inf, math.inf, tol, complex(B[0]) if B else complex("nan"))
    B = np.array(B)
    drift = float(np.max(np.abs(B - B[0])) / abs(B[0]))
    worst = float(max(res))
    return VerificationReport(drift <= tol and worst <= tol, drift, worst, tol, complex(B[0]))


def perturbed(result: FlowResult, index: int, dy0: complex) -> FlowResult:
    """Copy of ``result`` with y0 shifted at one sample (for negative tests)."""
    samples = list(result.samples)
    samples[index] = replace(samples[index], y0=samples[index].y0 + dy0)
    return replace(result, samples=samples)
