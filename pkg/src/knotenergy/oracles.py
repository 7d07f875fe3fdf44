"""Independent reference values used to check the grid quadratures."""
from __future__ import annotations

import math

from scipy.integrate import quad


def _log_u_over_sin(u: float) -> float:
    """log(u / sin u) for 0 < u <= pi/2, accurate also for tiny u."""
    if u < 0.05:
        u2 = u * u
        # series of -log(sin u / u)
        return u2 / 6.0 + u2 * u2 / 180.0 + u2**3 / 2835.0 + u2**4 / 37800.0
    return math.log(u / math.sin(u))


def circle_energy_oracle(L: float = 2 * math.pi, alpha: float = 2.0, p: float = 1.0,
                         tol: float = 1e-10) -> float:
    """O'Hara energy of a round circle of length L by a 1-D adaptive quadrature.

    Chord and arc depend only on w = y - x, so the double integral reduces to
    2L int_0^{L/2} f(w) dw with chord 2R sin(w / 2R), R = L / 2 pi. Near w = 0,
    f(w) = w^{(2 - alpha) p} h(w) with h smooth; the algebraic factor is handed
    to QUADPACK's endpoint-singularity rule. Returns inf outside alpha p < 2p + 1.
    """
    if not (alpha > 0 and p > 0):
        raise ValueError("alpha and p must be positive")
    beta = (2.0 - alpha) * p
    if beta <= -1.0:
        return math.inf
    R = L / (2.0 * math.pi)

    def h(w):
        if w == 0.0:
            return (alpha / (24.0 * R * R)) ** p
        u = w / (2.0 * R)
        # chord^-a - w^-a = w^-a ((u / sin u)^a - 1)
        return (w**-2 * math.expm1(alpha * _log_u_over_sin(u))) ** p

    val, _ = quad(h, 0.0, 0.5 * L, weight="alg", wvar=(beta, 0.0), epsabs=tol, epsrel=tol, limit=500)
    return 2.0 * L * val
