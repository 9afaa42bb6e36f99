"""The elliptic family v^2 = u(u-1)(u-x): cycles, periods and evaluations.

Cycles are fixed loops in the u-plane chosen once per working region of x;
values of v along a loop are obtained by continuation, never from a global
branch formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BranchPointCollision,
    ContinuationAmbiguity,
    DegenerateCurve,
    OrientationError,
    PoleAtRamification,
    PoleCollision,
    RegionError,
)
from .numerics import PathSpec, QuadratureSpec, central_difference, integrate_path, winding_number

__all__ = [
    "Region",
    "CurveFamilyPoint",
    "CycleBasis",
    "SheetedPoint",
    "BranchLift",
    "PeriodData",
    "DifferentialEvaluations",
    "RauchEntry",
    "RauchReport",
    "cubic",
    "lift_sqrt_along_path",
    "compute_periods",
    "eval_omega",
    "compute_Ix",
    "compute_ramification_constants",
    "eval_W_Q0_Px",
    "rauch_check",
    "integrate_sqrt_endpoints",
]

DEGENERACY_TOL = 1e-8


def cubic(u, x):
    """u(u-1)(u-x), the right-hand side of the curve equation."""
    return u * (u - 1) * (u - x)


def integrate_sqrt_endpoints(f, a: complex, b: complex, spec: QuadratureSpec | None = None) -> complex:
    """Integral of f over the segment a -> b when f ~ (u - a)^(-1/2), (b - u)^(-1/2) at the ends.

    With u = a + (b - a) t, the halves t in [0, 1/2] and [1/2, 1] are mapped
    by t = s^2 and t = 1 - s^2, which removes both endpoint singularities.
    """
    a, b = complex(a), complex(b)
    d = b - a
    half = PathSpec.polyline([0.0, math.sqrt(0.5)])

    def left(s):
        return f(a + d * s * s) * d * 2 * s

    def right(s):
        return f(b - d * s * s) * d * 2 * s

    return integrate_path(left, half, spec) + integrate_path(right, half, spec)


@dataclass(frozen=True)
class Region:
    """A closed disk of moduli x kept away from 0 and 1."""

    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius < 0:
            raise RegionError("region radius must be non-negative")
        if self.gap <= 0:
            raise RegionError(f"region {self} touches the degenerate moduli 0 or 1")

    @classmethod
    def around_point(cls, x: complex, fraction: float = 0.2) -> "Region":
        x = complex(x)
        return cls(x, fraction * min(abs(x), abs(x - 1)))

    @classmethod
    def around_segment(cls, x0: complex, x1: complex, pad: float = 0.02) -> "Region":
        x0, x1 = complex(x0), complex(x1)
        return cls(0.5 * (x0 + x1), 0.5 * abs(x1 - x0) + pad)

    @property
    def gap(self) -> float:
        """Distance from the region to the nearer of 0 and 1."""
        return min(abs(self.center), abs(self.center - 1)) - self.radius

    def contains(self, x: complex) -> bool:
        return abs(complex(x) - self.center) <= self.radius * (1 + 1e-12) + 1e-15

    def sqrt_x(self, x):
        """sqrt(x) continued from the principal root at the region center."""
        c = self.center
        return np.sqrt(c) * np.sqrt(x / c)

    def sqrt_1mx(self, x):
        c = self.center
        return np.sqrt(1 - c) * np.sqrt((1 - x) / (1 - c))


@dataclass(frozen=True)
class CurveFamilyPoint:
    x: complex
    region: Region = None

    def __post_init__(self):
        x = complex(self.x)
        object.__setattr__(self, "x", x)
        if min(abs(x), abs(x - 1)) < DEGENERACY_TOL:
            raise DegenerateCurve(f"x={x} is a degenerate modulus")
        if self.region is None:
            object.__setattr__(self, "region", Region.around_point(x))
        elif not self.region.contains(x):
            raise RegionError(f"x={x} lies outside {self.region}")


def _segment_distance(z: complex, p: complex, q: complex) -> float:
    d = q - p
    t = min(1.0, max(0.0, ((z - p) * d.conjugate()).real / abs(d) ** 2))
    return abs(z - (p + t * d))


def _polyline_distance(z: complex, pts: list[complex]) -> float:
    return min(_segment_distance(z, p, q) for p, q in zip(pts, pts[1:]))


def _enclosing_loop(p, q, avoid, R, clearance, samples_hint, shrink=False) -> PathSpec:
    """Closed loop around the segment p -> q (region disk of radius R at the
    region center) that leaves the branch point ``avoid`` outside.

    A stadium is used when ``avoid`` is far enough from the segment;
    otherwise the spine detours around ``avoid`` through one waypoint and
    the loop is the boundary of a tube around the bent spine.
    """
    need = R + 2 * clearance
    spine = [p, q]
    if _segment_distance(avoid, p, q) <= need:
        best = None
        d = q - p
        normal = 1j * d / abs(d)
        for k in (1, -1, 2, -2, 3, -3):
            w = avoid + k * normal * (R + 4 * clearance + 0.25 * abs(d))
            cand = [p, w, q]
            margin = _polyline_distance(avoid, cand)
            if margin > need and (best is None or margin > best[0]):
                best = (margin, cand)
        if best is None:
            raise RegionError("no cycle basis separates the branch points for this region")
        spine = best[1]
    dist = _polyline_distance(avoid, spine)
    if dist <= need:
        raise RegionError("no stadium cycle basis separates the branch points for this region")
    rho = 0.5 * (R + dist)
    if shrink:
        rho = 0.5 * (rho + R) if R > 0 else 0.8 * rho
    if len(spine) == 2:
        return PathSpec.stadium(p, q, rho, samples_hint=samples_hint)
    from shapely.geometry import LineString
    from shapely.geometry.polygon import orient

    poly = orient(LineString([(z.real, z.imag) for z in spine]).buffer(rho, quad_segs=24), 1.0)
    pts = [complex(u, v) for u, v in poly.exterior.coords[:-1]]
    return PathSpec.polyline(pts, closed=True, samples_hint=max(samples_hint, 4 * len(pts)))


@dataclass(frozen=True)
class CycleBasis:
    """Fixed a- and b-loops valid for every x in ``region``.

    The a-loop surrounds 0 and the region; the b-loop surrounds the region
    and 1. ``v_ref_a``/``v_ref_b`` are the values of v at each loop's start
    point for x at the region center; for other x they are continued along
    the straight line from the center.
    """

    a_loop: PathSpec
    b_loop: PathSpec
    clearance: float
    region: Region
    v_ref_a: complex
    v_ref_b: complex
    a_inner: PathSpec = field(repr=False, default=None)

    @classmethod
    def for_region(cls, region: Region, samples_hint: int = 240) -> "CycleBasis":
        c, R = region.center, region.radius
        clearance = 0.05 * region.gap
        a_loop = _enclosing_loop(0j, c, 1 + 0j, R, clearance, samples_hint)
        b_loop = _enclosing_loop(c, 1 + 0j, 0j, R, clearance, samples_hint)
        a_inner = _enclosing_loop(0j, c, 1 + 0j, R, clearance, samples_hint, shrink=True)
        v_a = np.sqrt(cubic(a_loop.segments[0].start, c))
        v_b = np.sqrt(cubic(b_loop.segments[0].start, c))
        basis = cls(a_loop, b_loop, clearance, region, complex(v_a), complex(v_b), a_inner)
        basis.validate()
        return basis

    def validate(self) -> None:
        """Winding checks: a encloses {0} and the region, b encloses the region and {1}."""
        c, R = self.region.center, self.region.radius
        probes = [c] + [c + R * np.exp(2j * math.pi * k / 8) for k in range(8)]
        for loop, name, inside, outside in (
            (self.a_loop, "a", 0j, 1 + 0j),
            (self.b_loop, "b", 1 + 0j, 0j),
        ):
            if winding_number(loop, inside) != 1 or winding_number(loop, outside) != 0:
                raise RegionError(f"{name}-loop does not separate the branch points correctly")
            if loop.distance_to(inside) < self.clearance or loop.distance_to(outside) < self.clearance:
                raise RegionError(f"{name}-loop violates the clearance")
            for z in probes:
                if winding_number(loop, z) != 1 or loop.distance_to(z) < self.clearance:
                    raise RegionError(f"{name}-loop does not enclose the region with clearance")

    def v_start(self, loop: str, x: complex) -> complex:
        path = self.a_loop if loop == "a" else self.b_loop
        ref = self.v_ref_a if loop == "a" else self.v_ref_b
        u0 = path.segments[0].start
        c = self.region.center
        return complex(ref * np.sqrt((u0 - x) / (u0 - c)))

    def refined(self, factor: int = 2) -> "CycleBasis":
        return replace(
            self,
            a_loop=replace(self.a_loop, samples_hint=self.a_loop.samples_hint * factor),
            b_loop=replace(self.b_loop, samples_hint=self.b_loop.samples_hint * factor),
        )

    def describe(self) -> dict:
        def loop(p: PathSpec):
            return {
                "segments": [
                    {"start": [s.start.real, s.start.imag], "end": [s.end.real, s.end.imag]}
                    | ({"center": [s.center.real, s.center.imag], "radius": s.radius} if s.is_arc else {})
                    for s in p.segments
                ],
                "samples_hint": p.samples_hint,
            }

        return {
            "region": {"center": [self.region.center.real, self.region.center.imag], "radius": self.region.radius},
            "clearance": self.clearance,
            "a_loop": loop(self.a_loop),
            "b_loop": loop(self.b_loop),
        }


@dataclass(frozen=True)
class SheetedPoint:
    """Point Q0 of the curve above u = y0; v(Q0) = sheet * sqrt(y0(y0-1)(y0-x))."""

    y0: complex
    sheet: int = 1

    def __post_init__(self):
        object.__setattr__(self, "y0", complex(self.y0))
        if self.sheet not in (1, -1):
            raise ValueError("sheet must be +1 or -1")

    def v(self, x: complex) -> complex:
        return self.sheet * complex(np.sqrt(cubic(self.y0, complex(x))))

    def flipped(self) -> "SheetedPoint":
        return SheetedPoint(self.y0, -self.sheet)

    @classmethod
    def matching(cls, y0: complex, x: complex, v_target: complex) -> "SheetedPoint":
        """The sheet whose v(Q0) is closest to ``v_target``."""
        w = complex(np.sqrt(cubic(complex(y0), complex(x))))
        return cls(y0, 1 if (w * np.conj(v_target)).real >= 0 else -1)


@dataclass(frozen=True)
class BranchLift:
    """v along a path, as continued from a start value."""

    x: complex
    path: PathSpec
    s_anchor: np.ndarray = field(repr=False)
    v_anchor: np.ndarray = field(repr=False)

    def __call__(self, s, u=None):
        s = np.asarray(s, dtype=float)
        if u is None:
            u = self.path.point(s)
        k = np.clip(np.searchsorted(self.s_anchor, s, side="right") - 1, 0, len(self.s_anchor) - 1)
        w = np.sqrt(cubic(u, self.x))
        ref = self.v_anchor[k]
        return np.where((w * np.conj(ref)).real >= 0, w, -w)

    @property
    def start_value(self) -> complex:
        return complex(self.v_anchor[0])

    @property
    def end_value(self) -> complex:
        return complex(self.v_anchor[-1])


def lift_sqrt_along_path(
    x: complex,
    path: PathSpec,
    v_start: complex,
    clearance: float = 1e-6,
    max_refinements: int = 8,
) -> BranchLift:
    """Continue v = sqrt(u(u-1)(u-x)) along ``path`` starting from ``v_start``.

    The path is sampled and at each sample the root closest to the previous
    value is kept; sampling is doubled until no step changes v by half its
    size or more.
    """
    x = complex(x)
    for bp in (0j, 1 + 0j, x):
        if path.distance_to(bp) < clearance:
            raise BranchPointCollision(f"path passes within {clearance:g} of branch point {bp}")
    u0 = path.segments[0].start
    target = cubic(u0, x)
    if abs(v_start * v_start - target) > 1e-8 * max(1.0, abs(target)):
        raise ValueError("v_start is not a square root of u(u-1)(u-x) at the path start")
    per = max(16, path.samples_hint // path.n_segments)
    for _ in range(max_refinements + 1):
        s, u = path.sample(per)
        w = np.sqrt(cubic(u, x))
        first = 1.0 if (w[0] * np.conj(v_start)).real >= 0 else -1.0
        flips = np.where((w[1:] * np.conj(w[:-1])).real < 0, -1.0, 1.0)
        signs = first * np.concatenate([[1.0], np.cumprod(flips)])
        v = signs * w
        jumps = np.abs(np.diff(v)) / np.abs(v[:-1])
        if np.all(jumps < 0.5):
            return BranchLift(x, path, s, v)
        per *= 2
    raise ContinuationAmbiguity("could not resolve the square-root branch along the path")


@dataclass(frozen=True)
class PeriodData:
    """Periods of the curve at one x, in the orientation with Im(tau) > 0."""

    x: complex
    I0: complex  # oint_a du/v
    tau: complex  # oint_b omega
    Ix: complex  # normalization constant of W(., P_x)
    J: complex  # Ix * omega(P_x) = -oint_a omega/(u - x); branch-free
    sqrt_x: complex
    sqrt_1mx: complex
    b_orientation: int = 1
    a_normalization: complex | None = None  # oint of omega over a deformed a-loop

    @property
    def sqrt_x_xm1(self) -> complex:
        return 1j * self.sqrt_x * self.sqrt_1mx

    @property
    def omega_Px(self) -> complex:
        return 2 / (self.I0 * self.sqrt_x_xm1)

    def I0_ramification(self) -> complex:
        """I^0 from the relation with I^x."""
        p0 = 2 / (self.I0 * self.sqrt_x)
        return p0 * (self.Ix / self.omega_Px - self.x * self.I0**2 / 4)

    def I1_ramification(self) -> complex:
        """I^1 from the relation with I^x."""
        p1 = 2 / (self.I0 * self.sqrt_1mx)
        return p1 * (self.Ix / self.omega_Px - (self.x - 1) * self.I0**2 / 4)


def _loop_integrals(x, cycles: CycleBasis, spec: QuadratureSpec, loop: str, weights) -> np.ndarray:
    path = cycles.a_loop if loop == "a" else cycles.b_loop
    lift = lift_sqrt_along_path(x, path, cycles.v_start(loop, x), clearance=cycles.clearance)

    def f(u, s):
        v = lift(s, u)
        return np.stack([w(u) / v for w in weights])

    return integrate_path(f, path, spec, with_param=True)


def a_period_integrals(x: complex, cycles: CycleBasis, spec: QuadratureSpec | None = None) -> tuple[complex, complex]:
    """(oint_a du/v, oint_a du/(v (u-x))) from one pass over the a-loop."""
    spec = spec or QuadratureSpec()
    x = complex(x)
    out = _loop_integrals(x, cycles, spec, "a", (lambda u: np.ones_like(u), lambda u: 1 / (u - x)))
    return complex(out[0]), complex(out[1])


def compute_periods(
    x: complex | CurveFamilyPoint,
    cycles: CycleBasis,
    spec: QuadratureSpec | None = None,
    verify_normalization: bool = True,
) -> PeriodData:
    """I0, tau and I^x at ``x`` by quadrature over the lifted cycles."""
    spec = spec or QuadratureSpec()
    x = complex(x.x if isinstance(x, CurveFamilyPoint) else x)
    if min(abs(x), abs(x - 1)) < DEGENERACY_TOL:
        raise DegenerateCurve(f"x={x} is a degenerate modulus")
    if not cycles.region.contains(x):
        raise RegionError(f"x={x} lies outside the cycle region {cycles.region}")
    I0, K1 = a_period_integrals(x, cycles, spec)
    Ib = complex(_loop_integrals(x, cycles, spec, "b", (lambda u: np.ones_like(u),))[0])
    tau = Ib / I0
    orientation = 1
    if abs(tau.imag) <= 1e-14 * abs(tau):
        raise OrientationError(f"Im(tau) vanishes at x={x}; no orientation gives Im(tau) > 0")
    if tau.imag < 0:
        orientation, tau = -1, -tau
    J = -K1 / I0
    sx, s1mx = complex(cycles.region.sqrt_x(x)), complex(cycles.region.sqrt_1mx(x))
    p = 2 / (I0 * 1j * sx * s1mx)
    norm = None
    if verify_normalization:
        inner = cycles.a_inner
        lift = lift_sqrt_along_path(x, inner, _continue_v(x, inner.segments[0].start, cycles), clearance=0.0)
        norm = integrate_path(lambda u, s: 1 / (I0 * lift(s, u)), inner, spec, with_param=True)
    return PeriodData(x, I0, tau, J / p, J, sx, s1mx, orientation, norm)


def _continue_v(x, u_target, cycles: CycleBasis) -> complex:
    """v at ``u_target`` continued from the a-loop start along a straight segment."""
    u0 = cycles.a_loop.segments[0].start
    seg = PathSpec.polyline([u0, u_target])
    return lift_sqrt_along_path(x, seg, cycles.v_start("a", x), clearance=0.0).end_value


@dataclass(frozen=True)
class DifferentialEvaluations:
    omega_P0: complex
    omega_P1: complex
    omega_Px: complex
    omega_Q0: complex
    v_Q0: complex


def _check_pole(x: complex, y0: complex) -> None:
    for bp in (0j, 1 + 0j, x):
        if abs(y0 - bp) < DEGENERACY_TOL:
            raise PoleAtRamification(f"y0={y0} coincides with branch point {bp}")


def eval_omega(x: complex, periods: PeriodData, Q0: SheetedPoint) -> DifferentialEvaluations:
    """omega evaluated at P0, P1, Px (local parameter sqrt(u - u_k)) and at Q0 (parameter u)."""
    x = complex(x)
    if min(abs(x), abs(x - 1)) < DEGENERACY_TOL:
        raise DegenerateCurve(f"x={x} is a degenerate modulus")
    _check_pole(x, Q0.y0)
    I0 = periods.I0
    v = Q0.v(x)
    return DifferentialEvaluations(
        omega_P0=2 / (I0 * periods.sqrt_x),
        omega_P1=2 / (I0 * periods.sqrt_1mx),
        omega_Px=periods.omega_Px,
        omega_Q0=1 / (I0 * v),
        v_Q0=v,
    )


def compute_Ix(
    x: complex,
    cycles: CycleBasis,
    periods: PeriodData,
    spec: QuadratureSpec | None = None,
) -> complex:
    """I^x = -(1/omega(P_x)) oint_a omega/(u - x), by its own quadrature pass.

    The integrand's double pole at u = x carries no residue on the cover, so
    the a-loop may pass around it at any distance.
    """
    spec = spec or QuadratureSpec()
    x = complex(x)
    out = _loop_integrals(x, cycles, spec, "a", (lambda u: 1 / (u - x),))
    return -complex(out[0]) / (periods.I0 * periods.omega_Px)


def compute_ramification_constants(
    x: complex,
    cycles: CycleBasis,
    periods: PeriodData,
    spec: QuadratureSpec | None = None,
) -> tuple[complex, complex]:
    """(I^0, I^1) by quadrature, I^k = -(1/omega(P_k)) oint_a omega/(u - u_k).

    Independent of the algebraic relations tying them to I^x, which the
    tests check against these values.
    """
    spec = spec or QuadratureSpec()
    x = complex(x)
    out = _loop_integrals(x, cycles, spec, "a", (lambda u: 1 / u, lambda u: 1 / (u - 1)))
    p0 = 2 / (periods.I0 * periods.sqrt_x)
    p1 = 2 / (periods.I0 * periods.sqrt_1mx)
    return -complex(out[0]) / (periods.I0 * p0), -complex(out[1]) / (periods.I0 * p1)


def eval_W_Q0_Px(x: complex, periods: PeriodData, Q0: SheetedPoint, omega_Q0: complex | None = None) -> complex:
    """W(Q0, P_x) = (1/(omega(P_x)(y0 - x)) + I^x) omega(Q0)."""
    x = complex(x)
    if abs(Q0.y0 - x) < DEGENERACY_TOL:
        raise PoleCollision(f"y0={Q0.y0} collides with the branch point x={x}")
    if omega_Q0 is None:
        omega_Q0 = eval_omega(x, periods, Q0).omega_Q0
    return (1 / (periods.omega_Px * (Q0.y0 - x)) + periods.Ix) * omega_Q0


# ---------------------------------------------------------------------------
# variational formulas, checked by difference quotients


@dataclass(frozen=True)
class RauchEntry:
    name: str
    analytic: complex
    coarse: complex  # central difference with step h
    fine: complex  # central difference with step h/2

    @property
    def residual(self) -> float:
        return abs(self.coarse - self.analytic)

    @property
    def residual_fine(self) -> float:
        return abs(self.fine - self.analytic)

    @property
    def relative(self) -> float:
        return self.residual / abs(self.analytic)

    @property
    def ratio(self) -> float:
        return self.residual / self.residual_fine if self.residual_fine > 0 else math.inf


@dataclass(frozen=True)
class RauchReport:
    x: complex
    h: float
    entries: tuple[RauchEntry, ...]

    def __getitem__(self, name: str) -> RauchEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def rauch_check(
    x: complex,
    cycles: CycleBasis,
    Q0: SheetedPoint,
    h: float = 1e-4,
    spec: QuadratureSpec | None = None,
) -> RauchReport:
    """Compare x-derivatives (y0 held fixed) with their variational formulas.

    Entries: ``tau`` (d tau/dx = pi i omega(P_x)^2), ``omega_Q0``
    (= omega(P_x) W(Q0, P_x)/2), ``omega_Px`` and ``W_Q0_Px``.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-14, abs_tol=1e-15)
    x = complex(x)
    y0 = Q0.y0
    for xs in (x - h, x + h):
        if not cycles.region.contains(xs):
            raise RegionError(f"x +/- h leaves the cycle region at x={x}")
    cache: dict[float, tuple[PeriodData, complex]] = {}
    v_ref = Q0.v(x)

    def state(dx: float):
        if dx not in cache:
            xs = x + dx
            per = compute_periods(xs, cycles, spec, verify_normalization=False)
            q = SheetedPoint.matching(y0, xs, v_ref)
            cache[dx] = (per, q)
        return cache[dx]

    def quantity(name):
        def g(dx):
            per, q = state(dx)
            if name == "tau":
                return per.tau
            if name == "omega_Px":
                return per.omega_Px
            ev = eval_omega(x + dx, per, q)
            if name == "omega_Q0":
                return ev.omega_Q0
            return eval_W_Q0_Px(x + dx, per, q, ev.omega_Q0)

        return g

    per, q = state(0.0)
    ev = eval_omega(x, per, q)
    p, w, Ix = ev.omega_Px, ev.omega_Q0, per.Ix
    W = eval_W_Q0_Px(x, per, q, w)
    L1 = -0.5 * (1 / y0 + 1 / (y0 - 1) + 1 / (y0 - x))
    analytic = {
        "tau": math.pi * 1j * p * p,
        "omega_Q0": 0.5 * p * W,
        "omega_Px": 0.5 * p * (Ix * p - 1 / x - 1 / (x - 1)),
        # full-derivative formula with y0' = 0
        "W_Q0_Px": (
            -(w / (2 * p)) * ((1 / (y0 - x)) * (1 / y0 + 1 / (y0 - 1) - 1 / x - 1 / (x - 1)) + 1 / x - 1 / (x - 1))
            + 0.5 * Ix * Ix * w * p
            - 0.5 * w * Ix * (1 / y0 + 1 / (y0 - 1) + 1 / x + 1 / (x - 1))
            - (-w / (p * (y0 - x) ** 2) + W * L1)
        ),
    }
    entries = []
    for name, value in analytic.items():
        d = central_difference(quantity(name), 0.0, h)
        entries.append(RauchEntry(name, complex(value), complex(d.coarse), complex(d.fine)))
    return RauchReport(x, h, tuple(entries))
