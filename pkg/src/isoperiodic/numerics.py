"""Numerical primitives: path quadrature, adaptive IVP solving, difference quotients.

Everything here is generic over complex-valued integrands and states; the
curve-specific logic (square-root branches, cycle geometry) lives in
:mod:`isoperiodic.curve`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    EvaluationError,
    IsoperiodicError,
    MaxStepsExceeded,
    NonConvergence,
    RhsEvaluationError,
    StepSizeUnderflow,
)

__all__ = [
    "Segment",
    "PathSpec",
    "QuadratureSpec",
    "IVPSpec",
    "Trajectory",
    "DifferenceEstimate",
    "integrate_path",
    "solve_ivp",
    "central_difference",
    "winding_number",
]


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class Segment:
    """A straight segment or a circular arc, parametrized on t in [0, 1]."""

    start: complex
    end: complex
    center: complex | None = None
    radius: float = 0.0
    theta0: float = 0.0
    sweep: float = 0.0

    @classmethod
    def line(cls, start: complex, end: complex) -> "Segment":
        return cls(complex(start), complex(end))

    @classmethod
    def arc(cls, center: complex, radius: float, theta0: float, sweep: float) -> "Segment":
        center = complex(center)
        start = center + radius * np.exp(1j * theta0)
        end = center + radius * np.exp(1j * (theta0 + sweep))
        return cls(complex(start), complex(end), center, float(radius), float(theta0), float(sweep))

    @property
    def is_arc(self) -> bool:
        return self.center is not None

    @property
    def length(self) -> float:
        if self.is_arc:
            return abs(self.radius * self.sweep)
        return abs(self.end - self.start)

    def reversed(self) -> "Segment":
        if self.is_arc:
            return Segment.arc(self.center, self.radius, self.theta0 + self.sweep, -self.sweep)
        return Segment.line(self.end, self.start)

    def split(self) -> tuple["Segment", "Segment"]:
        if self.is_arc:
            half = 0.5 * self.sweep
            return (
                Segment.arc(self.center, self.radius, self.theta0, half),
                Segment.arc(self.center, self.radius, self.theta0 + half, half),
            )
        mid = 0.5 * (self.start + self.end)
        return Segment.line(self.start, mid), Segment.line(mid, self.end)


@dataclass(frozen=True)
class PathSpec:
    """Piecewise path made of lines and circular arcs.

    The global path parameter ``s`` runs over ``[0, len(segments)]``; segment
    ``k`` occupies ``[k, k + 1]``.
    """

    segments: tuple[Segment, ...]
    closed: bool = False
    samples_hint: int = 240
    _arrays: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if len(segs) < 1:
            raise ValueError("a path needs at least one segment (two vertices)")
        if self.samples_hint < 1:
            raise ValueError("samples_hint must be positive")
        for seg in segs:
            if seg.length == 0.0:
                raise ValueError("consecutive vertices must be distinct")
        scale = max(seg.length for seg in segs)
        for s0, s1 in zip(segs, segs[1:]):
            if abs(s0.end - s1.start) > 1e-12 * max(1.0, scale):
                raise ValueError("path segments are not contiguous")
        if self.closed and abs(segs[-1].end - segs[0].start) > 1e-12 * max(1.0, scale):
            raise ValueError("closed path does not return to its start")
        arrays = {
            "is_arc": np.array([s.is_arc for s in segs]),
            "start": np.array([s.start for s in segs], dtype=complex),
            "end": np.array([s.end for s in segs], dtype=complex),
            "center": np.array([s.center if s.is_arc else 0j for s in segs], dtype=complex),
            "radius": np.array([s.radius for s in segs]),
            "theta0": np.array([s.theta0 for s in segs]),
            "sweep": np.array([s.sweep for s in segs]),
        }
        object.__setattr__(self, "_arrays", arrays)
        if self.closed and self.self_intersects():
            raise ValueError("closed path is not a simple loop")

    # constructors ---------------------------------------------------------

    @classmethod
    def polyline(cls, vertices: Sequence[complex], closed: bool = False, samples_hint: int = 240):
        pts = [complex(v) for v in vertices]
        if len(pts) < 2:
            raise ValueError("a path needs at least 2 vertices")
        if closed:
            pts = pts + [pts[0]]
        segs = tuple(Segment.line(a, b) for a, b in zip(pts, pts[1:]))
        return cls(segs, closed=closed, samples_hint=samples_hint)

    @classmethod
    def circle(cls, center: complex, radius: float, pieces: int = 4, samples_hint: int = 240):
        step = 2 * math.pi / pieces
        segs = tuple(Segment.arc(center, radius, k * step, step) for k in range(pieces))
        # force exact closure against rounding of exp()
        last = segs[-1]
        segs = segs[:-1] + (Segment(last.start, segs[0].start, last.center, last.radius, last.theta0, last.sweep),)
        return cls(segs, closed=True, samples_hint=samples_hint)

    @classmethod
    def stadium(cls, p: complex, q: complex, radius: float, samples_hint: int = 240):
        """Counterclockwise loop at constant distance ``radius`` from the segment [p, q]."""
        p, q = complex(p), complex(q)
        if p == q:
            return cls.circle(p, radius, samples_hint=samples_hint)
        phi = np.angle(q - p)
        lo, hi = phi - math.pi / 2, phi + math.pi / 2
        arc_q = Segment.arc(q, radius, lo, math.pi)
        arc_p = Segment.arc(p, radius, hi, math.pi)
        bottom = Segment.line(arc_p.end, arc_q.start)
        top = Segment.line(arc_q.end, arc_p.start)
        return cls((bottom, arc_q, top, arc_p), closed=True, samples_hint=samples_hint)

    # geometry -------------------------------------------------------------

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def vertices(self) -> list[complex]:
        pts = [s.start for s in self.segments]
        if not self.closed:
            pts.append(self.segments[-1].end)
        return pts

    @property
    def length(self) -> float:
        return sum(s.length for s in self.segments)

    def _split_param(self, s):
        s = np.asarray(s, dtype=float)
        k = np.clip(np.floor(s).astype(int), 0, self.n_segments - 1)
        return k, s - k

    def point(self, s):
        ar = self._arrays
        k, t = self._split_param(s)
        arc = ar["center"][k] + ar["radius"][k] * np.exp(1j * (ar["theta0"][k] + ar["sweep"][k] * t))
        lin = ar["start"][k] + (ar["end"][k] - ar["start"][k]) * t
        return np.where(ar["is_arc"][k], arc, lin)

    def derivative(self, s):
        ar = self._arrays
        k, t = self._split_param(s)
        arc = 1j * ar["radius"][k] * ar["sweep"][k] * np.exp(1j * (ar["theta0"][k] + ar["sweep"][k] * t))
        lin = (ar["end"][k] - ar["start"][k]) * np.ones_like(t)
        return np.where(ar["is_arc"][k], arc, lin)

    def sample(self, per_segment: int = 64):
        """Parameter values and points, including the final endpoint."""
        s = np.concatenate([k + np.arange(per_segment) / per_segment for k in range(self.n_segments)])
        s = np.append(s, float(self.n_segments))
        return s, self.point(s)

    def distance_to(self, z: complex, per_segment: int = 256) -> float:
        _, pts = self.sample(per_segment)
        return float(np.min(np.abs(pts - z)))

    def reversed(self) -> "PathSpec":
        segs = tuple(s.reversed() for s in reversed(self.segments))
        return PathSpec(segs, closed=self.closed, samples_hint=self.samples_hint)

    def halves(self) -> tuple["PathSpec", "PathSpec"]:
        """Split at the middle of the parameter range into two open paths."""
        n = self.n_segments
        segs = list(self.segments)
        if n % 2:
            mid = n // 2
            a, b = segs[mid].split()
            segs[mid:mid + 1] = [a, b]
            n += 1
        hint = max(1, self.samples_hint // 2)
        return (
            PathSpec(tuple(segs[: n // 2]), closed=False, samples_hint=hint),
            PathSpec(tuple(segs[n // 2:]), closed=False, samples_hint=hint),
        )

    def self_intersects(self, per_segment: int | None = None) -> bool:
        if per_segment is None:
            curved = any(seg.is_arc for seg in self.segments)
            per_segment = max(2, min(24, 1500 // self.n_segments)) if curved else 1
        _, pts = self.sample(per_segment)
        a, b = pts[:-1], pts[1:]
        m = len(a)
        # proper crossings between non-adjacent chords
        cross = lambda u, v: u.real * v.imag - u.imag * v.real  # noqa: E731
        A, B = a[:, None], b[:, None]
        C, D = a[None, :], b[None, :]
        o1 = cross(B - A, C - A)
        o2 = cross(B - A, D - A)
        o3 = cross(D - C, A - C)
        o4 = cross(D - C, B - C)
        tol = 1e-9 * float(np.max(np.abs(b - a))) ** 2
        sg = lambda o: np.where(np.abs(o) <= tol, 0.0, np.sign(o))  # noqa: E731
        hit = (sg(o1) * sg(o2) < 0) & (sg(o3) * sg(o4) < 0)
        idx = np.arange(m)
        near = np.abs(idx[:, None] - idx[None, :])
        near = np.minimum(near, m - near) <= 1
        if np.any(hit & ~near):
            return True
        # crossings that land exactly on sample points
        gap = np.abs(a[:, None] - a[None, :])
        far = np.minimum(np.abs(idx[:, None] - idx[None, :]), m - np.abs(idx[:, None] - idx[None, :])) > 2
        return bool(np.any((gap <= 1e-9 * float(np.max(np.abs(b - a)))) & far))


def winding_number(path: PathSpec, z: complex) -> int:
    """Winding number of a closed path about ``z`` (z must not lie on the path)."""
    if not path.closed:
        raise ValueError("winding number needs a closed path")
    d = path.distance_to(z)
    if d == 0.0:
        raise ValueError("point lies on the path")
    per = max(64, int(math.ceil(max(s.length for s in path.segments) / (0.25 * d))))
    _, pts = path.sample(per)
    ang = np.angle((pts[1:] - z) / (pts[:-1] - z))
    return int(round(ang.sum() / (2 * math.pi)))


# ---------------------------------------------------------------------------
# quadrature

# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[1:7:2] = _WG[:3]
_GW[9:14:2] = _WG[2::-1]
_GW[7] = _WG[3]


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 4000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


def integrate_path(
    f: Callable,
    path: PathSpec,
    spec: QuadratureSpec | None = None,
    *,
    with_param: bool = False,
    full_output: bool = False,
):
    """Integrate ``f(u) du`` along ``path`` with adaptive Gauss-Kronrod panels.

    ``f`` receives a 1-D array of points (and the matching path parameters
    when ``with_param`` is true) and may return either an array of the same
    length or a stacked array of shape ``(k, n)`` to integrate ``k``
    integrands at once.

    Returns the integral (complex scalar or length-``k`` array), or
    ``(value, error_estimate, n_panels)`` when ``full_output`` is set.
    """
    spec = spec or QuadratureSpec()
    nseg = path.n_segments
    per_seg = max(1, path.samples_hint // (15 * nseg))
    a = np.concatenate([k + np.arange(per_seg) / per_seg for k in range(nseg)])
    b = np.concatenate([k + np.arange(1, per_seg + 1) / per_seg for k in range(nseg)])

    def panels(a, b):
        half = 0.5 * (b - a)
        s = (0.5 * (a + b))[:, None] + half[:, None] * _NODES[None, :]
        flat = s.ravel()
        u = path.point(flat)
        du = path.derivative(flat)
        vals = f(u, flat) if with_param else f(u)
        vals = np.asarray(vals, dtype=complex)
        squeeze = vals.ndim == 1
        vals = np.atleast_2d(vals) * du[None, :]
        if not np.all(np.isfinite(vals)):
            raise EvaluationError("integrand is not finite on the path")
        vals = vals.reshape(vals.shape[0], len(a), 15)
        kron = np.einsum("kpn,n->pk", vals, _KW) * half[:, None]
        gauss = np.einsum("kpn,n->pk", vals, _GW) * half[:, None]
        err = np.max(np.abs(kron - gauss), axis=1)
        resabs = np.einsum("kpn,n->p", np.abs(vals), _KW) * half
        return kron, err, squeeze, resabs

    vals, errs, squeeze, absint = panels(a, b)
    floor_factor = 50 * np.finfo(float).eps
    span = float(nseg)
    while True:
        total = vals.sum(axis=0)
        err_total = float(errs.sum())
        # roundoff floor: cancellation below eps * integral of |f| is not resolvable
        tol = max(spec.abs_tol, spec.rel_tol * float(np.max(np.abs(total))), floor_factor * float(absint.sum()))
        if err_total <= tol:
            break
        if len(a) >= spec.max_subdivisions:
            raise NonConvergence(
                f"quadrature did not converge in {len(a)} panels (error estimate {err_total:.3e})",
                error_estimate=err_total,
            )
        bad = errs > tol * (b - a) / span
        if not np.any(bad):
            bad = errs == errs.max()
        mid = 0.5 * (a[bad] + b[bad])
        na = np.concatenate([a[bad], mid])
        nb = np.concatenate([mid, b[bad]])
        nv, ne, _, nabs = panels(na, nb)
        keep = ~bad
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        absint = np.concatenate([absint[keep], nabs])

    value = complex(total[0]) if squeeze else total
    if full_output:
        return value, err_total, len(a)
    return value


# ---------------------------------------------------------------------------
# initial value problems

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Dormand-Prince continuous extension, y(t + x h) = y + h K^T P [x, x^2, x^3, x^4]
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


@dataclass(frozen=True)
class IVPSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    initial_step: float = 1e-3
    max_steps: int = 100_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("IVP tolerances must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), n)
    n_steps: int
    n_rejected: int
    n_rhs: int


def solve_ivp(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    state0,
    t1: float,
    spec: IVPSpec | None = None,
    t_eval: Sequence[float] | None = None,
) -> Trajectory:
    """Dormand-Prince 5(4) with PI step control and dense output at ``t_eval``.

    The state is a complex vector. Without ``t_eval`` the accepted step
    points are returned.
    """
    spec = spec or IVPSpec()
    y = np.array(state0, dtype=complex).ravel()
    t = float(t0)
    t1 = float(t1)
    direction = 1.0 if t1 >= t else -1.0
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(direction * np.diff(t_eval) < 0):
            raise ValueError("t_eval must be monotone in the integration direction")
        lo, hi = min(t, t1), max(t, t1)
        if np.any((t_eval < lo - 1e-14 * max(1, abs(lo))) | (t_eval > hi + 1e-14 * max(1, abs(hi)))):
            raise ValueError("t_eval outside the integration interval")

    n_rhs = 0

    def f(tt, yy):
        nonlocal n_rhs
        n_rhs += 1
        try:
            out = np.asarray(rhs(tt, yy), dtype=complex).ravel()
        except RhsEvaluationError:
            raise
        except (IsoperiodicError, ArithmeticError, ValueError) as exc:
            raise RhsEvaluationError(f"rhs failed at t={tt!r}: {exc}", t=tt) from exc
        if not np.all(np.isfinite(out)):
            raise RhsEvaluationError(f"rhs not finite at t={tt!r}", t=tt)
        return out

    ts, ys = [t], [y.copy()]
    eval_idx = 0
    if t_eval is not None:
        ts, ys = [], []
        while eval_idx < len(t_eval) and abs(t_eval[eval_idx] - t) <= 1e-14 * max(1.0, abs(t)):
            ts.append(float(t_eval[eval_idx]))
            ys.append(y.copy())
            eval_idx += 1

    if t == t1:
        return Trajectory(np.array(ts), np.array(ys).reshape(len(ts), y.size), 0, 0, n_rhs)

    k = np.zeros((7, y.size), dtype=complex)
    k[0] = f(t, y)
    h = min(spec.initial_step, abs(t1 - t))
    err_prev = 1.0
    n_steps = n_rejected = 0
    alpha, beta, safety = 0.17, 0.04, 0.9
    while direction * (t1 - t) > 0:
        if n_steps >= spec.max_steps:
            raise MaxStepsExceeded(f"exceeded {spec.max_steps} steps at t={t!r}", t=t)
        h_min = 16 * np.finfo(float).eps * max(1.0, abs(t))
        if h < h_min:
            raise StepSizeUnderflow(f"step size underflow at t={t!r}", t=t)
        last = h >= abs(t1 - t)
        if last:
            h = abs(t1 - t)
        hs = direction * h
        for i in range(1, 6):
            dy = hs * np.dot(_A[i], k[:i])
            k[i] = f(t + _C[i] * hs, y + dy)
        y_new = y + hs * np.dot(_B, k[:6])
        t_new = t1 if last else t + hs
        k[6] = f(t_new, y_new)
        err_vec = hs * np.dot(_E, k)
        scale = spec.abs_tol + spec.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean(np.abs(err_vec / scale) ** 2)))
        if err <= 1.0:
            if t_eval is not None:
                q = k.T @ _P
                while eval_idx < len(t_eval) and direction * (t_eval[eval_idx] - t_new) <= 0:
                    te = float(t_eval[eval_idx])
                    x = (te - t) / hs
                    ys.append(y + hs * q @ (x ** np.arange(1, 5)))
                    ts.append(te)
                    eval_idx += 1
            t, y = t_new, y_new
            k[0] = k[6]
            n_steps += 1
            if t_eval is None:
                ts.append(t)
                ys.append(y.copy())
            fac = safety * max(err, 1e-10) ** -alpha * err_prev ** beta
            h = h * min(5.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
        else:
            n_rejected += 1
            h = h * max(0.2, safety * err ** -alpha)

    while t_eval is not None and eval_idx < len(t_eval):
        ts.append(float(t_eval[eval_idx]))
        ys.append(y.copy())
        eval_idx += 1
    return Trajectory(np.array(ts), np.array(ys).reshape(len(ts), y.size), n_steps, n_rejected, n_rhs)


# ---------------------------------------------------------------------------
# difference quotients


@dataclass(frozen=True)
class DifferenceEstimate:
    value: complex  # Richardson-extrapolated
    coarse: complex  # central difference with step h
    fine: complex  # central difference with step h/2


def central_difference(g: Callable[[float], complex], t: float, h: float, order: int = 1) -> DifferenceEstimate:
    """First derivative of ``g`` at ``t`` from central differences at h and h/2."""
    if order != 1:
        raise ValueError("only first derivatives are supported")
    try:
        gp, gm = g(t + h), g(t - h)
        gp2, gm2 = g(t + h / 2), g(t - h / 2)
    except IsoperiodicError as exc:
        raise EvaluationError(f"difference stencil evaluation failed near t={t!r}: {exc}") from exc
    coarse = (gp - gm) / (2 * h)
    fine = (gp2 - gm2) / h
    return DifferenceEstimate((4 * fine - coarse) / 3, coarse, fine)
