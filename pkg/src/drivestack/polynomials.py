"""Quintic and quartic boundary-value polynomials for Frenet trajectories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NonPositiveHorizon", "QuinticPolynomial", "QuarticPolynomial", "solve_quintic", "solve_quartic"]


class NonPositiveHorizon(ValueError):
    pass


class _Poly:
    coeffs: tuple[float, ...]
    horizon: float

    def _c(self, n=6):
        c = list(self.coeffs) + [0.0] * (n - len(self.coeffs))
        return c

    def value(self, t):
        c0, c1, c2, c3, c4, c5 = self._c()
        return c0 + t * (c1 + t * (c2 + t * (c3 + t * (c4 + t * c5))))

    def d1(self, t):
        _, c1, c2, c3, c4, c5 = self._c()
        return c1 + t * (2 * c2 + t * (3 * c3 + t * (4 * c4 + t * 5 * c5)))

    def d2(self, t):
        _, _, c2, c3, c4, c5 = self._c()
        return 2 * c2 + t * (6 * c3 + t * (12 * c4 + t * 20 * c5))

    def d3(self, t):
        _, _, _, c3, c4, c5 = self._c()
        return 6 * c3 + t * (24 * c4 + t * 60 * c5)

    def jerk_integral(self) -> float:
        """Closed form of the integral of the squared third derivative over [0, T]."""
        _, _, _, c3, c4, c5 = self._c()
        return _jerk_sq_integral(6 * c3, 24 * c4, 60 * c5, self.horizon)


def _jerk_sq_integral(al, be, ga, T):
    # integral of (al + be t + ga t^2)^2 over [0, T]
    T2 = T * T
    T3 = T2 * T
    return (
        al * al * T
        + al * be * T2
        + (be * be + 2 * al * ga) * T3 / 3.0
        + be * ga * T3 * T / 2.0
        + ga * ga * T3 * T2 / 5.0
    )


@dataclass(frozen=True)
class QuinticPolynomial(_Poly):
    coeffs: tuple[float, float, float, float, float, float]
    horizon: float


@dataclass(frozen=True)
class QuarticPolynomial(_Poly):
    coeffs: tuple[float, float, float, float, float]
    horizon: float


def quintic_coeffs(p0, v0, a0, pT, vT, aT, T):
    """Coefficient arrays for a quintic; broadcasts over array inputs."""
    T = np.asarray(T, dtype=float)
    c0 = np.asarray(p0, dtype=float)
    c1 = np.asarray(v0, dtype=float)
    c2 = 0.5 * np.asarray(a0, dtype=float)
    b0 = pT - (c0 + c1 * T + c2 * T * T)
    b1 = vT - (c1 + 2 * c2 * T)
    b2 = aT - 2 * c2
    T2 = T * T
    c3 = (20 * b0 - 8 * b1 * T + b2 * T2) / (2 * T2 * T)
    c4 = (-30 * b0 + 14 * b1 * T - 2 * b2 * T2) / (2 * T2 * T2)
    c5 = (12 * b0 - 6 * b1 * T + b2 * T2) / (2 * T2 * T2 * T)
    return c0, c1, c2, c3, c4, c5


def quartic_coeffs(p0, v0, a0, vT, aT, T):
    T = np.asarray(T, dtype=float)
    c0 = np.asarray(p0, dtype=float)
    c1 = np.asarray(v0, dtype=float)
    c2 = 0.5 * np.asarray(a0, dtype=float)
    b1 = vT - (c1 + 2 * c2 * T)
    b2 = aT - 2 * c2
    c3 = (3 * b1 - b2 * T) / (3 * T * T)
    c4 = (b2 * T - 2 * b1) / (4 * T * T * T)
    return c0, c1, c2, c3, c4


def solve_quintic(p0, v0, a0, pT, vT, aT, T) -> QuinticPolynomial:
    """Unique quintic matching position, velocity and acceleration at 0 and T."""
    if not T > 0:
        raise NonPositiveHorizon(f"horizon must be positive, got {T}")
    c = quintic_coeffs(p0, v0, a0, pT, vT, aT, T)
    return QuinticPolynomial(tuple(float(x) for x in c), float(T))


def solve_quartic(p0, v0, a0, vT, aT, T) -> QuarticPolynomial:
    """Quartic with free terminal position (velocity keeping)."""
    if not T > 0:
        raise NonPositiveHorizon(f"horizon must be positive, got {T}")
    c = quartic_coeffs(p0, v0, a0, vT, aT, T)
    return QuarticPolynomial(tuple(float(x) for x in c), float(T))
