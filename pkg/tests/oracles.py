"""Independent reference values used by the tests.

Nothing here imports the package under test.
"""

from __future__ import annotations

import math

import mpmath as mp


def agm(a: float, b: float, tol: float = 1e-16) -> float:
    """Arithmetic-geometric mean of two positive reals."""
    for _ in range(100):
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        if abs(a - b) <= tol * a:
            break
    return a


def ellip_k(k: float) -> float:
    """Complete elliptic integral of the first kind, modulus k, via AGM."""
    return math.pi / (2 * agm(1.0, math.sqrt(1 - k * k)))


def legendre_tau(x: float) -> complex:
    """tau = i K(sqrt(1-x))/K(sqrt(x)) for real 0 < x < 1."""
    return 1j * ellip_k(math.sqrt(1 - x)) / ellip_k(math.sqrt(x))


def modular_lambda(tau: complex) -> complex:
    """lambda(tau) = theta_2^4/theta_3^4, which inverts x -> tau."""
    q = mp.exp(1j * mp.pi * tau)
    return complex((mp.jtheta(2, 0, q) / mp.jtheta(3, 0, q)) ** 4)


def theta3(z: complex, tau: complex, k: int = 0) -> complex:
    """k-th z-derivative of sum_m exp(pi i m^2 tau + 2 pi i m z)."""
    q = mp.exp(1j * mp.pi * tau)
    return complex(mp.jtheta(3, mp.pi * z, q, k) * mp.pi**k)


def theta1(z: complex, tau: complex, k: int = 0) -> complex:
    q = mp.exp(1j * mp.pi * tau)
    return complex(mp.jtheta(1, mp.pi * z, q, k) * mp.pi**k)


def example_rhs_n0(x, y, yp):
    """Closed-form y0'' for a pole of order two."""
    s1 = 1 / y + 1 / (y - 1) + 1 / (y - x)
    s2 = 1 / y**2 + 1 / (y - 1) ** 2 + 1 / (y - x) ** 2
    return (
        yp**2 / 2 * s1
        + yp**2 * s2 / s1
        - yp * (1 / x + 1 / (x - 1) + 1 / (y - x))
        - 2 * yp / (s1 * (y - x) ** 2)
        + (2 / (x * (y - x)) + 2 / ((x - 1) * (y - x)) + 1 / (x - 1) - 1 / x + 3 / (y - x) ** 2) / (2 * s1)
    )


def example_rhs_n1(x, y, yp):
    """Closed-form y0'' for a pole of order three.

    The printed version has (y0 - 1)^3 where (y0 - x)^3 belongs and -1 where
    -5 belongs in the y0' bracket; this is the corrected form.
    """
    s1 = 1 / y + 1 / (y - 1) + 1 / (y - x)
    s2 = 1 / y**2 + 1 / (y - 1) ** 2 + 1 / (y - x) ** 2
    s3 = 1 / y**3 + 1 / (y - 1) ** 3 + 1 / (y - x) ** 3
    br = (
        2 * yp**2 * (s1 * s2 + 2 * s3)
        + 4 * yp / (y - x) ** 3 * (x / y + (x - 1) / (y - 1) - 5)
        + 2 / (x - y) ** 2 * (1 / x + 1 / (x - 1) + 3 / (y - x))
        + s1 / 2 * (2 / (y - x) * (1 / x + 1 / (x - 1)) + 3 / (y - x) ** 2 + 1 / (x - 1) - 1 / x)
    )
    return yp**2 / 2 * s1 - yp * (1 / x + 1 / (x - 1) + 1 / (y - x)) + br / (s1**2 + 2 * s2)


def example_rhs_n1_printed(x, y, yp):
    """The n = 1 closed form exactly as printed (kept to document the typos)."""
    s1 = 1 / y + 1 / (y - 1) + 1 / (y - x)
    s2 = 1 / y**2 + 1 / (y - 1) ** 2 + 1 / (y - x) ** 2
    s3 = 1 / y**3 + 1 / (y - 1) ** 3 + 1 / (y - 1) ** 3
    br = (
        2 * yp**2 * (s1 * s2 + 2 * s3)
        + 4 * yp / (y - x) ** 3 * (x / y + (x - 1) / (y - 1) - 1)
        + 2 / (x - y) ** 2 * (1 / x + 1 / (x - 1) + 3 / (y - x))
        + s1 / 2 * (2 / (y - x) * (1 / x + 1 / (x - 1)) + 3 / (y - x) ** 2 + 1 / (x - 1) - 1 / x)
    )
    return yp**2 / 2 * s1 - yp * (1 / x + 1 / (x - 1) + 1 / (y - x)) + br / (s1**2 + 2 * s2)


def convergence_order(e_coarse: float, e_fine: float) -> float:
    """Observed order from errors at steps h and h/2."""
    return math.log2(e_coarse / e_fine)
