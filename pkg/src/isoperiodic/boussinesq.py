"""Genus-one theta solutions of the Boussinesq equation.

    u(X, Y) = 2 d^2/dX^2 log theta(U X + V Y + z0) + c
    3 u_YY + (6 u u_X + u_XXX)_X = 0

U and V are b-periods of the normalized second-kind differentials with a
pole at Q0; c is fixed numerically from the equation itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from math import comb

import numpy as np

from .bell import bell_table
from .curve import PeriodData, SheetedPoint
from .errors import IllConditioned, ThetaDivisorProximity, TruncationInsufficient

__all__ = [
    "ThetaParams",
    "WaveData",
    "GridSpec",
    "LatticeCheck",
    "CFit",
    "theta",
    "theta1",
    "log_theta_derivatives",
    "compute_wave_data",
    "u_hat",
    "pde_terms",
    "solve_c",
    "boussinesq_residual",
    "periodicity_lattice_check",
    "effectivization_diagnostic",
]

MAX_THETA_ORDER = 6  # u_XXXX needs the sixth derivative of log theta
DIVISOR_TOL = 1e-8


@dataclass(frozen=True)
class ThetaParams:
    """Modulus tau and truncation half-width of the theta series."""

    tau: complex
    term_bound: int | None = None

    def __post_init__(self):
        tau = complex(self.tau)
        object.__setattr__(self, "tau", tau)
        if tau.imag <= 0:
            raise ValueError("theta needs Im(tau) > 0")
        if self.term_bound is None:
            object.__setattr__(self, "term_bound", self.required_terms(tau))
        elif self.term_bound < 1:
            raise ValueError("term_bound must be positive")

    @property
    def q_abs(self) -> float:
        return math.exp(-math.pi * self.tau.imag)

    @staticmethod
    def required_terms(tau: complex, floor: int = 8) -> int:
        """Smallest M >= floor whose tail |q|^{M^2} (2 pi M)^6 is below 1e-16."""
        log_q = -math.pi * complex(tau).imag
        M = floor
        while M * M * log_q + MAX_THETA_ORDER * math.log(2 * math.pi * M) > math.log(1e-16):
            M += 1
        return M


def _series(z, params: ThetaParams, order: int, shift: float, phase: float, sign: float):
    """sum_m sign * (2 pi i k)^order exp(pi i k^2 tau + 2 pi i k (z + phase)), k = m + shift."""
    if not 0 <= order <= MAX_THETA_ORDER:
        raise ValueError(f"derivative order must lie in 0..{MAX_THETA_ORDER}")
    z = np.asarray(z, dtype=complex)
    M = params.term_bound
    k = np.arange(-M, M + 1) + shift
    expo = 1j * math.pi * k * k * params.tau + 2j * math.pi * np.multiply.outer(z + phase, k)
    terms = sign * (2j * math.pi * k) ** order * np.exp(expo)
    value = terms.sum(axis=-1)
    scale = np.abs(terms).sum(axis=-1)
    edge = np.maximum(np.abs(terms[..., 0]), np.abs(terms[..., -1]))
    if np.any(edge > 1e-14 * scale):
        raise TruncationInsufficient(f"theta series truncated at |m| <= {M} is not converged")
    return value, scale


def theta(z, params: ThetaParams, dz_order: int = 0):
    """d^k/dz^k of theta(z|tau) = sum_m exp(pi i m^2 tau + 2 pi i m z)."""
    return _series(z, params, dz_order, 0.0, 0.0, 1.0)[0]


def theta1(z, params: ThetaParams, dz_order: int = 0):
    """d^k/dz^k of theta_1(z|tau) = -sum_m exp(pi i (m+1/2)^2 tau + 2 pi i (m+1/2)(z+1/2))."""
    return _series(z, params, dz_order, 0.5, 0.5, -1.0)[0]


def log_theta_derivatives(z, params: ThetaParams, kmax: int = MAX_THETA_ORDER, divisor_tol: float = DIVISOR_TOL):
    """phi^(1..kmax) of phi = log theta, plus |theta|/scale (distance to the divisor).

    Uses theta^(k+1) = sum_j C(k, j) phi^(j+1) theta^(k-j).
    """
    th = []
    for k in range(kmax + 1):
        val, scale = _series(z, params, k, 0.0, 0.0, 1.0)
        th.append(val)
        if k == 0:
            closeness = np.abs(val) / scale
    if divisor_tol and np.any(closeness < divisor_tol):
        raise ThetaDivisorProximity("theta argument lies on the theta divisor")
    phi = [None]
    for k in range(kmax):
        acc = th[k + 1]
        for j in range(k):
            acc = acc - comb(k, j) * phi[j + 1] * th[k - j]
        phi.append(acc / th[0])
    return phi, closeness


@dataclass(frozen=True)
class WaveData:
    U: complex
    V: complex
    z0: complex
    c: complex | None
    tau: complex

    def with_c(self, c: complex) -> "WaveData":
        return replace(self, c=complex(c))

    def phase(self, X, Y):
        return self.U * np.asarray(X) + self.V * np.asarray(Y) + self.z0


def compute_wave_data(x: complex, Q0: SheetedPoint, periods: PeriodData, z0: complex = 0.0) -> WaveData:
    """U = -omega(Q0), V = -omega(Q0) L_1; c is left unset."""
    x = complex(x)
    L = bell_table(x, Q0.y0, 1)
    w = 1 / (periods.I0 * Q0.v(x))
    return WaveData(U=-w, V=-w * L[1], z0=complex(z0), c=None, tau=periods.tau)


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int = 64
    ny: int = 64
    endpoint: bool = False

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError("grid counts must be at least 8")

    @classmethod
    def one_period(cls, wave: WaveData, nx: int = 64, ny: int = 64) -> "GridSpec":
        """A period cell [0, 1/|U|) x [0, 1/|V|)."""
        return cls((0.0, 1 / abs(wave.U)), (0.0, 1 / abs(wave.V)), nx, ny)

    def refined(self, factor: int = 2) -> "GridSpec":
        return replace(self, nx=self.nx * factor, ny=self.ny * factor)

    def mesh(self):
        X = np.linspace(*self.x_range, self.nx, endpoint=self.endpoint)
        Y = np.linspace(*self.y_range, self.ny, endpoint=self.endpoint)
        return np.meshgrid(X, Y, indexing="ij")


def u_hat(X, Y, wave: WaveData, params: ThetaParams, dX_order: int = 0, dY_order: int = 0):
    """Partial derivative d^a/dX^a d^b/dY^b of u, a <= 4, b <= 2.

    Each is 2 U^{a+2} V^b phi^{(a+b+2)}(U X + V Y + z0); c is added to the
    underived value (treated as 0 if unset).
    """
    if not (0 <= dX_order <= 4 and 0 <= dY_order <= 2):
        raise ValueError("supported orders: dX <= 4, dY <= 2")
    k = dX_order + dY_order + 2
    phi, _ = log_theta_derivatives(wave.phase(X, Y), params, kmax=k)
    out = 2 * wave.U ** (dX_order + 2) * wave.V**dY_order * phi[k]
    if dX_order == 0 and dY_order == 0 and wave.c is not None:
        out = out + wave.c
    return out


def pde_terms(X, Y, wave: WaveData, params: ThetaParams):
    """The four terms (3u_YY, 6u_X^2, 6u u_XX, u_XXXX) without c, the closeness to the divisor."""
    phi, closeness = log_theta_derivatives(wave.phase(X, Y), params, kmax=6, divisor_tol=0.0)
    U, V = wave.U, wave.V
    u = 2 * U**2 * phi[2]
    uX = 2 * U**3 * phi[3]
    uXX = 2 * U**4 * phi[4]
    uXXXX = 2 * U**6 * phi[6]
    uYY = 2 * U**2 * V**2 * phi[4]
    return np.stack([3 * uYY, 6 * uX**2, 6 * u * uXX, uXXXX]), u, uXX, closeness


def _grid_terms(wave, params, grid):
    X, Y = grid.mesh()
    terms, u, uXX, closeness = pde_terms(X, Y, wave, params)
    keep = closeness >= DIVISOR_TOL * closeness.max()
    return terms, u, uXX, keep


@dataclass(frozen=True)
class CFit:
    c: complex
    spread: float  # max |c_point - c| over well-conditioned points
    n_points: int
    excluded: int  # grid points dropped near the theta divisor

    def __iter__(self):
        return iter((self.c, self.spread))


def solve_c(wave: WaveData, params: ThetaParams, grid: GridSpec) -> CFit:
    """Least-squares c from R(c) = R0 + 6 c u_XX over the grid.

    The spread compares pointwise solutions -R0/(6 u_XX) at points where
    |u_XX| is at least a tenth of its maximum.
    """
    terms, _, uXX, keep = _grid_terms(replace(wave, c=None), params, grid)
    R0 = terms.sum(axis=0)[keep]
    a = 6 * uXX[keep]
    norm = float(np.sum(np.abs(a) ** 2))
    scale = float(np.max(np.abs(terms[:, keep])))
    if math.sqrt(norm / a.size) < 1e-10 * scale:
        raise IllConditioned("u_XX vanishes on the grid; c is undetermined")
    c = -complex(np.sum(np.conj(a) * R0)) / norm
    good = np.abs(a) >= 0.1 * np.max(np.abs(a))
    spread = float(np.max(np.abs(-R0[good] / a[good] - c)))
    return CFit(c, spread, int(good.sum()), int((~keep).sum()))


def boussinesq_residual(wave: WaveData, params: ThetaParams, grid: GridSpec) -> float:
    """max over the grid of |3u_YY + 6u_X^2 + 6u u_XX + u_XXXX| / max term magnitude.

    Term magnitudes are taken pointwise and include c; points near the theta
    divisor are skipped.
    """
    if wave.c is None:
        raise ValueError("solve for c before evaluating the residual")
    terms, u, uXX, keep = _grid_terms(replace(wave, c=None), params, grid)
    c = wave.c
    terms = terms.copy()
    terms[2] = 6 * (u + c) * uXX
    R = terms.sum(axis=0)
    scale = np.max(np.abs(terms), axis=0)
    return float(np.max(np.abs(R[keep]) / scale[keep]))


@dataclass(frozen=True)
class LatticeCheck:
    passed: bool
    m: int  # coefficient of 1
    k: int  # coefficient of tau
    distance: float


def periodicity_lattice_check(wave: WaveData, T: float, direction: str = "X", tol: float = 1e-8) -> LatticeCheck:
    """Is T*U (or T*V) within ``tol`` of the lattice Z + tau Z?"""
    if T <= 0:
        raise ValueError("T must be positive")
    if direction not in ("X", "Y"):
        raise ValueError("direction must be 'X' or 'Y'")
    w = T * (wave.U if direction == "X" else wave.V)
    tau = wave.tau
    b = w.imag / tau.imag
    a = w.real - b * tau.real
    m, k = int(round(a)), int(round(b))
    dist = abs(w - (m + k * tau))
    return LatticeCheck(dist <= tol, m, k, float(dist))


def effectivization_diagnostic(wave: WaveData, params: ThetaParams) -> dict:
    """rho = V / ((4 pi i sqrt(3)/3) U^2 sqrt(theta_1'''(0)/theta_1'(0))) for both roots."""
    ratio = complex(theta1(0.0, params, 3) / theta1(0.0, params, 1))
    root = complex(np.sqrt(ratio))
    base = 4j * math.pi * math.sqrt(3) / 3 * wave.U**2 * root
    rho = wave.V / base
    return {"theta1_ratio": ratio, "rho_plus": rho, "rho_minus": -rho, "abs_rho": abs(rho)}
